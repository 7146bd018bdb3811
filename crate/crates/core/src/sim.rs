//! Fringe simulation with analytically known phase, plus ground-truth
//! orientation and direction maps derived from that phase.
//!
//! All randomness comes from [`rng_from_seed`] (ChaCha8 seeded from a u64).
//! Gaussian samples use the Box–Muller transform.

use std::f64::consts::{PI, TAU};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::image::{gaussian_blur, gradients, RealImage};
use crate::orientation::{wrap_to_period, DirectionMap, OrientationMap};

pub type SimRng = ChaCha8Rng;

pub fn rng_from_seed(seed: u64) -> SimRng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// SplitMix64 finalizer.
pub fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed of item `index` under `base`: `splitmix64(base ^ splitmix64(index))`.
pub fn derive_seed(base: u64, index: u64) -> u64 {
    splitmix64(base ^ splitmix64(index))
}

/// One standard normal sample via Box–Muller (cosine branch).
pub fn standard_normal(rng: &mut impl Rng) -> f64 {
    // u1 in (0, 1] keeps the logarithm finite.
    let u1 = 1.0 - rng.gen::<f64>();
    let u2 = rng.gen::<f64>();
    (-2.0 * u1.ln()).sqrt() * (TAU * u2).cos()
}

/// Linear carrier of period `period` pixels and azimuth `theta`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CarrierSpec {
    pub period: f64,
    pub theta: f64,
}

impl CarrierSpec {
    pub fn new(period: f64, theta: f64) -> Result<Self> {
        if !(period > 2.0 && period.is_finite()) {
            return Err(Error::param("period", format!("must exceed 2 pixels, got {period}")));
        }
        if !(0.0..PI).contains(&theta) {
            return Err(Error::param("theta", format!("must lie in [0, pi), got {theta}")));
        }
        Ok(Self { period, theta })
    }
}

/// A single isotropic Gaussian bump of the object phase.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GaussianKernelSpec {
    pub cx: f64,
    pub cy: f64,
    pub sigma: f64,
    pub amplitude: f64,
}

/// Ranges the Gaussian-sum object phase is drawn from.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GaussianRanges {
    /// Inclusive kernel count range.
    pub count: (usize, usize),
    pub sigma: (f64, f64),
    pub amplitude: (f64, f64),
}

impl GaussianRanges {
    /// σ in 5–25 % of the shorter side, amplitude in ±8 rad, 1–50 kernels.
    pub fn default_for(rows: usize, cols: usize) -> Self {
        let side = rows.min(cols) as f64;
        Self {
            count: (1, 50),
            sigma: (0.05 * side, 0.25 * side),
            amplitude: (-8.0, 8.0),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.count.0 > self.count.1 {
            return Err(Error::param("kernel_count_range", "min exceeds max"));
        }
        if !(self.sigma.0 > 0.0 && self.sigma.0 <= self.sigma.1) {
            return Err(Error::param("sigma_range", "need 0 < min <= max"));
        }
        if self.amplitude.0 > self.amplitude.1 {
            return Err(Error::param("amplitude_range", "min exceeds max"));
        }
        Ok(())
    }
}

fn uniform(rng: &mut impl Rng, (lo, hi): (f64, f64)) -> f64 {
    if hi > lo {
        rng.gen_range(lo..hi)
    } else {
        lo
    }
}

/// Draws the kernels of a Gaussian-sum object phase.
pub fn sample_kernels(rows: usize, cols: usize, rng: &mut impl Rng, ranges: &GaussianRanges) -> Vec<GaussianKernelSpec> {
    let count = rng.gen_range(ranges.count.0..=ranges.count.1);
    (0..count)
        .map(|_| GaussianKernelSpec {
            cx: rng.gen_range(0.0..(cols - 1) as f64),
            cy: rng.gen_range(0.0..(rows - 1) as f64),
            sigma: uniform(rng, ranges.sigma),
            amplitude: uniform(rng, ranges.amplitude),
        })
        .collect()
}

/// Sum of Gaussian kernels evaluated at integer pixel coordinates.
pub fn phase_from_kernels(rows: usize, cols: usize, kernels: &[GaussianKernelSpec]) -> RealImage {
    RealImage::from_fn(rows, cols, |x, y| {
        kernels
            .iter()
            .map(|k| {
                let (dx, dy) = (x as f64 - k.cx, y as f64 - k.cy);
                k.amplitude * (-(dx * dx + dy * dy) / (2.0 * k.sigma * k.sigma)).exp()
            })
            .sum()
    })
}

pub fn gen_object_phase_gaussians(rows: usize, cols: usize, seed: u64, ranges: &GaussianRanges) -> Result<RealImage> {
    ranges.validate()?;
    let mut rng = rng_from_seed(seed);
    Ok(phase_from_kernels(rows, cols, &sample_kernels(rows, cols, &mut rng, ranges)))
}

/// The classic "peaks" test surface.
pub fn peaks(x: f64, y: f64) -> f64 {
    3.0 * (1.0 - x).powi(2) * (-x * x - (y + 1.0).powi(2)).exp()
        - 10.0 * (x / 5.0 - x.powi(3) - y.powi(5)) * (-x * x - y * y).exp()
        - (-(x + 1.0).powi(2) - y * y).exp() / 3.0
}

/// `coeff * peaks(X, Y)` with X (columns) and Y (rows) spanning `[-3, 3]`.
pub fn gen_peaks_phase(rows: usize, cols: usize, coeff: f64) -> RealImage {
    let axis = |i: usize, n: usize| {
        if n > 1 {
            -3.0 + 6.0 * i as f64 / (n - 1) as f64
        } else {
            0.0
        }
    };
    RealImage::from_fn(rows, cols, |x, y| coeff * peaks(axis(x, cols), axis(y, rows)))
}

pub fn gen_carrier(rows: usize, cols: usize, carrier: CarrierSpec) -> RealImage {
    let kx = carrier.theta.cos() * TAU / carrier.period;
    let ky = carrier.theta.sin() * TAU / carrier.period;
    RealImage::from_fn(rows, cols, |x, y| x as f64 * kx + y as f64 * ky)
}

/// Blurred union of 1–5 random ellipses scaled to `[0, amplitude]`.
pub fn gen_blob_mask_phase(rows: usize, cols: usize, seed: u64, amplitude: f64) -> Result<RealImage> {
    if !(amplitude >= 0.0 && amplitude.is_finite()) {
        return Err(Error::param("amplitude", format!("must be non-negative, got {amplitude}")));
    }
    let mut rng = rng_from_seed(seed);
    let side = rows.min(cols) as f64;
    let count = rng.gen_range(1..=5);
    let ellipses: Vec<[f64; 5]> = (0..count)
        .map(|_| {
            [
                rng.gen_range(0.2 * cols as f64..0.8 * cols as f64),
                rng.gen_range(0.2 * rows as f64..0.8 * rows as f64),
                rng.gen_range(0.08 * side..0.25 * side),
                rng.gen_range(0.08 * side..0.25 * side),
                rng.gen_range(0.0..PI),
            ]
        })
        .collect();
    let mask = RealImage::from_fn(rows, cols, |x, y| {
        let inside = ellipses.iter().any(|&[cx, cy, a, b, rot]| {
            let (dx, dy) = (x as f64 - cx, y as f64 - cy);
            let u = dx * rot.cos() + dy * rot.sin();
            let v = -dx * rot.sin() + dy * rot.cos();
            (u / a).powi(2) + (v / b).powi(2) <= 1.0
        });
        if inside {
            1.0
        } else {
            0.0
        }
    });
    let blurred = gaussian_blur(&mask, 3.0)?;
    Ok(blurred.map(|v| v.clamp(0.0, 1.0) * amplitude))
}

/// `I = cos(phase)`.
pub fn render_fringe(phase: &RealImage) -> RealImage {
    phase.map(f64::cos)
}

pub fn add_gaussian_noise(img: &RealImage, std: f64, seed: u64) -> Result<RealImage> {
    if !(std >= 0.0 && std.is_finite()) {
        return Err(Error::param("noise_std", format!("must be non-negative, got {std}")));
    }
    if std == 0.0 {
        return Ok(img.clone());
    }
    let mut rng = rng_from_seed(seed);
    Ok(img.map(|v| v + std * standard_normal(&mut rng)))
}

/// Gradient magnitude (L1) below which the orientation is undefined.
pub const DEGENERATE_GRADIENT: f64 = 1e-9;

/// `beta = atan2(dphi/dx, dphi/dy)` reduced into `[0, 2 pi)`.
pub fn ground_truth_direction(phase: &RealImage) -> DirectionMap {
    let g = gradients(phase);
    let (rows, cols) = phase.dims();
    let mut valid = Vec::with_capacity(rows * cols);
    let mut angles = Vec::with_capacity(rows * cols);
    for (&gx, &gy) in g.gx.as_slice().iter().zip(g.gy.as_slice()) {
        valid.push(gx.abs() + gy.abs() >= DEGENERATE_GRADIENT);
        angles.push(wrap_to_period(gx.atan2(gy), TAU));
    }
    DirectionMap::new(RealImage::new(rows, cols, angles).expect("finite"), valid).expect("mask length")
}

/// The direction map reduced modulo pi; invalid where the gradient vanishes.
pub fn ground_truth_orientation(phase: &RealImage) -> OrientationMap {
    ground_truth_direction(phase).to_orientation()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::orientation::circular_distance;

    #[test]
    fn empty_kernel_set_is_zero() {
        let ranges = GaussianRanges {
            count: (0, 0),
            sigma: (1.0, 2.0),
            amplitude: (-1.0, 1.0),
        };
        let p = gen_object_phase_gaussians(16, 16, 5, &ranges).unwrap();
        assert!(p.as_slice().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn single_kernel_values() {
        let k = GaussianKernelSpec {
            cx: 32.0,
            cy: 32.0,
            sigma: 10.0,
            amplitude: 1.0,
        };
        let p = phase_from_kernels(64, 64, &[k]);
        assert_eq!(p.get(32, 32), 1.0);
        assert!((p.get(42, 32) - (-0.5f64).exp()).abs() < 1e-15);
        assert!((p.get(42, 32) - 0.606_530_659_7).abs() < 1e-9);
        let doubled = phase_from_kernels(64, 64, &[k, k]);
        for (a, b) in doubled.as_slice().iter().zip(p.as_slice()) {
            assert_eq!(*a, 2.0 * b);
        }
    }

    #[test]
    fn gaussian_generator_is_deterministic() {
        let r = GaussianRanges::default_for(32, 32);
        let a = gen_object_phase_gaussians(32, 32, 11, &r).unwrap();
        let b = gen_object_phase_gaussians(32, 32, 11, &r).unwrap();
        let c = gen_object_phase_gaussians(32, 32, 12, &r).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn peaks_values() {
        assert!(gen_peaks_phase(33, 33, 0.0).as_slice().iter().all(|&v| v == 0.0));
        let p = gen_peaks_phase(33, 33, 1.0);
        assert!((p.get(16, 16) - 8.0 / 3.0 / std::f64::consts::E).abs() < 1e-12);
        assert!((p.get(16, 16) - 0.981_011_5).abs() < 1e-6);
        let p2 = gen_peaks_phase(33, 33, 2.0);
        for (a, b) in p2.as_slice().iter().zip(p.as_slice()) {
            assert_eq!(*a, 2.0 * b);
        }
    }

    #[test]
    fn carrier_values() {
        let c = gen_carrier(128, 128, CarrierSpec::new(14.0, 0.0).unwrap());
        assert!((c.get(14, 0) - TAU).abs() < 1e-12);
        assert_eq!(c.get(0, 123), 0.0);
        let c = gen_carrier(16, 16, CarrierSpec::new(14.0, PI / 2.0).unwrap());
        assert!((c.get(5, 7) - PI).abs() < 1e-12);
        assert!(CarrierSpec::new(2.0, 0.0).is_err());
        assert!(CarrierSpec::new(10.0, PI).is_err());
    }

    #[test]
    fn blob_mask_properties() {
        assert!(gen_blob_mask_phase(48, 48, 3, 0.0).unwrap().as_slice().iter().all(|&v| v == 0.0));
        let m = gen_blob_mask_phase(48, 48, 3, 1.0).unwrap();
        assert!(m.as_slice().iter().all(|&v| (0.0..=1.0).contains(&v)));
        assert!(m.as_slice().iter().any(|&v| v > 0.5));
        assert_eq!(m, gen_blob_mask_phase(48, 48, 3, 1.0).unwrap());
    }

    #[test]
    fn render_examples() {
        assert!(render_fringe(&RealImage::zeros(8, 8)).as_slice().iter().all(|&v| v == 1.0));
        assert!(render_fringe(&RealImage::filled(8, 8, PI)).as_slice().iter().all(|&v| v == -1.0));
        let f = render_fringe(&gen_carrier(16, 16, CarrierSpec::new(14.0, 0.0).unwrap()));
        assert!((f.get(7, 3) + 1.0).abs() < 1e-12);
    }

    #[test]
    fn noise_statistics() {
        let img = RealImage::zeros(512, 512);
        assert_eq!(add_gaussian_noise(&img, 0.0, 1).unwrap(), img);
        let noisy = add_gaussian_noise(&img, 0.1, 42).unwrap();
        let n = noisy.len() as f64;
        let mean = noisy.mean();
        let std = (noisy.as_slice().iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
        assert!(mean.abs() < 0.005, "mean {mean}");
        assert!((std - 0.1).abs() < 0.005, "std {std}");
        assert_eq!(noisy, add_gaussian_noise(&img, 0.1, 42).unwrap());
    }

    #[test]
    fn carrier_orientation_oracle() {
        let mut rng = rng_from_seed(2024);
        for _ in 0..32 {
            let c = CarrierSpec::new(rng.gen_range(8.0..32.0), rng.gen_range(0.0..PI)).unwrap();
            let fo = ground_truth_orientation(&gen_carrier(64, 64, c));
            let expected = wrap_to_period(PI / 2.0 - c.theta, PI);
            for y in 1..63 {
                for x in 1..63 {
                    assert!(fo.is_valid(x, y));
                    assert!(circular_distance(fo.angles().get(x, y), expected, PI) < 1e-6);
                }
            }
        }
    }

    #[test]
    fn theta_zero_carrier_orientation() {
        let phase = gen_carrier(32, 32, CarrierSpec::new(14.0, 0.0).unwrap());
        let fo = ground_truth_orientation(&phase);
        let beta = ground_truth_direction(&phase);
        assert!((fo.angles().get(10, 10) - PI / 2.0).abs() < 1e-12);
        assert!((beta.angles().get(10, 10) - PI / 2.0).abs() < 1e-12);
    }

    #[test]
    fn constant_phase_is_invalid() {
        let fo = ground_truth_orientation(&RealImage::filled(16, 16, 1.3));
        assert!(fo.valid().iter().all(|&v| !v));
    }

    #[test]
    fn negated_phase_flips_direction() {
        let phase = gen_peaks_phase(48, 48, 3.0)
            .zip_map(&gen_carrier(48, 48, CarrierSpec::new(14.0, 0.3).unwrap()), |a, b| a + b)
            .unwrap();
        let beta = ground_truth_direction(&phase);
        let neg = ground_truth_direction(&phase.map(|v| -v));
        for i in 0..phase.len() {
            if beta.valid()[i] {
                let d = circular_distance(neg.angles().as_slice()[i], beta.angles().as_slice()[i] + PI, TAU);
                assert!(d < 1e-12);
            }
        }
        let fo = ground_truth_orientation(&phase);
        let reduced = beta.to_orientation();
        assert_eq!(fo, reduced);
    }
}
