//! Hilbert spiral transform demodulation guided by a fringe direction map.
//!
//! For a zero-mean fringe `s = b cos(phi)` the spiral filter
//! `S(u, v) = (u + i v) / |(u, v)|` produces `V = F^-1{S F{s}}`, which
//! locally equals `i exp(i alpha) b sin(phi)` where `alpha` is the azimuth of
//! the phase gradient measured from the x axis. Directions in this crate are
//! measured as `beta = atan2(dphi/dx, dphi/dy)`, i.e. `alpha = pi/2 - beta`,
//! so the quadrature `-b sin(phi)` is recovered as `Re(exp(i beta) V)`.
//! Equivalently, the usual `-i exp(-i gamma) V` form with the x-axis azimuth
//! `gamma = 3pi/2 - beta`.

use std::f64::consts::PI;

use rustfft::num_complex::Complex64;

use crate::error::{Error, Result};
use crate::fft::{fft2, ifft2, signed_frequency};
use crate::image::{ComplexImage, RealImage};
use crate::orientation::{wrap_pm_pi, DirectionMap};
use crate::unwrap::unwrap_phase_2d;

/// Unit-modulus spiral phase over the FFT bin layout, zero at DC.
#[derive(Debug, Clone, PartialEq)]
pub struct SpiralFilter(ComplexImage);

impl SpiralFilter {
    pub fn as_image(&self) -> &ComplexImage {
        &self.0
    }

    /// Filter value at signed frequency `(u, v)` (u along columns).
    pub fn at(&self, u: i64, v: i64) -> Complex64 {
        let (rows, cols) = self.0.dims();
        let x = u.rem_euclid(cols as i64) as usize;
        let y = v.rem_euclid(rows as i64) as usize;
        self.0.get(x, y)
    }
}

/// Builds the spiral filter. Frequencies are taken in cycles per pixel
/// (`u / cols`, `v / rows`), which coincides with the integer bin indices
/// for square grids and keeps the spiral isotropic otherwise.
pub fn make_spiral_filter(rows: usize, cols: usize) -> Result<SpiralFilter> {
    if rows < crate::image::MIN_SIDE || cols < crate::image::MIN_SIDE {
        return Err(Error::InvalidDimensions {
            rows,
            cols,
            reason: "spiral filter needs at least 8x8".into(),
        });
    }
    let mut data = Vec::with_capacity(rows * cols);
    for y in 0..rows {
        let fv = signed_frequency(y, rows) as f64 / rows as f64;
        for x in 0..cols {
            let fu = signed_frequency(x, cols) as f64 / cols as f64;
            let r = fu.hypot(fv);
            data.push(if r == 0.0 {
                Complex64::new(0.0, 0.0)
            } else {
                Complex64::new(fu / r, fv / r)
            });
        }
    }
    Ok(SpiralFilter(ComplexImage::new(rows, cols, data)?))
}

/// `|mean| > 0.05 RMS` means the input still carries background.
pub fn zero_mean_warning(s: &RealImage) -> Option<String> {
    let mean = s.mean();
    let rms = s.rms();
    (rms > 0.0 && mean.abs() > 0.05 * rms).then(|| {
        format!("input is not zero-mean: mean {mean:.4} vs RMS {rms:.4}; quadrature will be biased")
    })
}

/// Quadrature signal `s_H ≈ -b sin(phi)` of a zero-mean fringe `s`.
pub fn quadrature(s: &RealImage, beta: &DirectionMap) -> Result<RealImage> {
    s.check_same_dims(beta.angles())?;
    let (rows, cols) = s.dims();
    let filter = make_spiral_filter(rows, cols)?;
    let mut spectrum = fft2(&s.to_complex());
    for (bin, f) in spectrum.as_mut_slice().iter_mut().zip(filter.0.as_slice()) {
        *bin *= f;
    }
    let vortex = ifft2(&spectrum);
    let out = vortex
        .as_slice()
        .iter()
        .zip(beta.angles().as_slice())
        .map(|(v, &b)| (Complex64::from_polar(1.0, b) * v).re)
        .collect();
    RealImage::new(rows, cols, out)
}

/// Wrapped phase in `[-pi, pi)` with the pixels where the analytic signal vanished.
#[derive(Debug, Clone, PartialEq)]
pub struct WrappedPhase {
    pub phase: RealImage,
    pub masked: Vec<bool>,
}

const MIN_ANALYTIC_ENERGY: f64 = 1e-12;

/// `phi = atan2(-s_H, s)`; pixels with `s² + s_H² < 1e-12` are set to 0 and masked.
pub fn demodulate_phase(s: &RealImage, s_h: &RealImage) -> Result<WrappedPhase> {
    s.check_same_dims(s_h)?;
    let mut masked = Vec::with_capacity(s.len());
    let phase: Vec<f64> = s
        .as_slice()
        .iter()
        .zip(s_h.as_slice())
        .map(|(&c, &q)| {
            let dead = c * c + q * q < MIN_ANALYTIC_ENERGY;
            masked.push(dead);
            if dead {
                0.0
            } else {
                wrap_pm_pi((-q).atan2(c))
            }
        })
        .collect();
    Ok(WrappedPhase {
        phase: RealImage::new(s.rows(), s.cols(), phase)?,
        masked,
    })
}

/// Output of [`demodulate`].
#[derive(Debug, Clone, PartialEq)]
pub struct Demodulation {
    pub wrapped: WrappedPhase,
    /// Unwrapped phase with its mean removed.
    pub unwrapped: RealImage,
    pub warnings: Vec<String>,
}

/// Quadrature, four-quadrant demodulation and unwrapping.
pub fn demodulate(fringe: &RealImage, beta: &DirectionMap) -> Result<Demodulation> {
    let warnings: Vec<String> = zero_mean_warning(fringe).into_iter().collect();
    let s_h = quadrature(fringe, beta)?;
    let wrapped = demodulate_phase(fringe, &s_h)?;
    let unwrapped = unwrap_phase_2d(&wrapped.phase);
    let mean = unwrapped.mean();
    Ok(Demodulation {
        wrapped,
        unwrapped: unwrapped.map(|v| v - mean),
        warnings,
    })
}

/// True when every value lies in `[-pi, pi)`.
pub fn is_wrapped(phase: &RealImage) -> bool {
    phase.as_slice().iter().all(|&v| (-PI..PI).contains(&v))
}
