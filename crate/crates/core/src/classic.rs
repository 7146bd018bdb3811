//! Classical orientation estimators working on fringe intensities: the
//! gradient method, windowed plane fitting, and their combination (CPFG).
//! Also hosts the simple background-removal / normalization prefilter.
//!
//! Both estimators average the doubled-angle vector `(gy² - gx², 2 gx gy)`
//! over the window and halve the resulting angle, so that the output is
//! insensitive to the sign of the local gradient.

use std::f64::consts::{FRAC_PI_2, PI};

use crate::error::{Error, Result};
use crate::fft::{fft2, signed_frequency};
use crate::image::{gaussian_blur, gradients, GradientPair, RealImage};
use crate::orientation::{wrap_to_period, OrientationMap};

/// Square analysis window of side `w` pixels.
///
/// An odd side covers `w` pixels centred on the current pixel. An even side
/// covers the continuous box of width `w` centred on the pixel: offsets
/// `-w/2..=w/2`, with the two outermost taps at half weight. This keeps the
/// window centred, so `w = 2` reduces to the central-difference stencil.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Window(usize);

impl Window {
    pub fn new(side: usize) -> Result<Self> {
        if side < 2 {
            return Err(Error::param("window", format!("side must be >= 2, got {side}")));
        }
        Ok(Self(side))
    }

    pub fn side(self) -> usize {
        self.0
    }

    /// `(offset, weight)` taps along one axis.
    fn taps(self) -> Vec<(isize, f64)> {
        let w = self.0 as isize;
        if w % 2 == 1 {
            (-(w / 2)..=w / 2).map(|o| (o, 1.0)).collect()
        } else {
            let h = w / 2;
            (-h..=h).map(|o| (o, if o.abs() == h { 0.5 } else { 1.0 })).collect()
        }
    }

    fn check_fits(self, img: &RealImage) -> Result<()> {
        img.check_estimator_size()?;
        let limit = img.rows().min(img.cols()) / 2;
        if self.0 > limit {
            return Err(Error::InvalidParameter {
                name: "window",
                reason: format!("side {} exceeds half the image size ({limit})", self.0),
            });
        }
        Ok(())
    }
}

impl Default for Window {
    fn default() -> Self {
        Self(2)
    }
}

const EPS: f64 = 1e-12;

/// Removes the slowly varying background, normalizes the local amplitude to
/// roughly one and applies light smoothing. The result is shifted to zero mean,
/// since edge replication in the wide background blur leaves a small bias.
pub fn prefilter(img: &RealImage, background_sigma: f64, smooth_sigma: f64) -> Result<RealImage> {
    let background = gaussian_blur(img, background_sigma)?;
    let ac = img.zip_map(&background, |a, b| a - b)?;
    // Mean |cos| is 2/pi, hence the pi/2 factor.
    let envelope = gaussian_blur(&ac.map(f64::abs), background_sigma)?;
    let normalized = ac.zip_map(&envelope, |s, e| s / (e * FRAC_PI_2).max(EPS))?;
    let smoothed = gaussian_blur(&normalized, smooth_sigma)?;
    let mean = smoothed.mean();
    Ok(smoothed.map(|v| v - mean))
}

/// Period (pixels) of the strongest non-DC spectral peak, `None` for images
/// without AC content.
pub fn dominant_period(img: &RealImage) -> Option<f64> {
    let mean = img.mean();
    let spec = fft2(&img.map(|v| v - mean).to_complex());
    let (rows, cols) = img.dims();
    let mut best: Option<(f64, f64)> = None;
    for v in 0..rows {
        for u in 0..cols {
            if u == 0 && v == 0 {
                continue;
            }
            let p = spec.get(u, v).norm_sqr();
            if best.map_or(true, |(bp, _)| p > bp) {
                let fu = signed_frequency(u, cols) as f64 / cols as f64;
                let fv = signed_frequency(v, rows) as f64 / rows as f64;
                best = Some((p, 1.0 / fu.hypot(fv)));
            }
        }
    }
    best.filter(|(p, _)| *p > EPS).map(|(_, t)| t)
}

/// Same normalization as [`prefilter`] with the background and envelope taken
/// as global means instead of local blurs.
pub fn prefilter_global(img: &RealImage, smooth_sigma: f64) -> Result<RealImage> {
    let mean = img.mean();
    let ac = img.map(|v| v - mean);
    let envelope = ac.map(f64::abs).mean() * FRAC_PI_2;
    let smoothed = gaussian_blur(&ac.map(|s| s / envelope.max(EPS)), smooth_sigma)?;
    let mean = smoothed.mean();
    Ok(smoothed.map(|v| v - mean))
}

/// Parameters of [`prefilter`] derived from the image itself.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PrefilterParams {
    pub background_sigma: f64,
    pub smooth_sigma: f64,
    /// Set when the background kernel (radius `4 background_sigma`) spans the
    /// whole image; the blur would then mostly see replicated edges.
    pub global_background: bool,
}

impl PrefilterParams {
    /// `background_sigma = 2 T` with `T` the dominant period, `smooth_sigma = 0.5`.
    pub fn auto(img: &RealImage) -> Self {
        let period = dominant_period(img).unwrap_or(16.0);
        let background_sigma = 2.0 * period;
        let (rows, cols) = img.dims();
        Self {
            background_sigma,
            smooth_sigma: 0.5,
            global_background: 4.0 * background_sigma >= rows.min(cols) as f64,
        }
    }
}

/// [`prefilter`] (or [`prefilter_global`] for images smaller than the
/// background kernel) with [`PrefilterParams::auto`].
pub fn prefilter_auto(img: &RealImage) -> Result<RealImage> {
    let p = PrefilterParams::auto(img);
    if p.global_background {
        prefilter_global(img, p.smooth_sigma)
    } else {
        prefilter(img, p.background_sigma, p.smooth_sigma)
    }
}

/// Weighted window average of the doubled-angle vector, halved back to `[0, pi)`.
fn doubled_angle_orientation(g: &GradientPair, win: Window) -> OrientationMap {
    let (rows, cols) = g.gx.dims();
    let c2 = g.gx.zip_map(&g.gy, |gx, gy| gy * gy - gx * gx).expect("same dims");
    let s2 = g.gx.zip_map(&g.gy, |gx, gy| 2.0 * gx * gy).expect("same dims");
    let taps = win.taps();
    let mut angles = Vec::with_capacity(rows * cols);
    let mut valid = Vec::with_capacity(rows * cols);
    for y in 0..rows {
        for x in 0..cols {
            let (mut sc, mut ss, mut sw) = (0.0, 0.0, 0.0);
            for &(oy, wy) in &taps {
                let yy = y as isize + oy;
                if yy < 0 || yy >= rows as isize {
                    continue;
                }
                for &(ox, wx) in &taps {
                    let xx = x as isize + ox;
                    if xx < 0 || xx >= cols as isize {
                        continue;
                    }
                    let w = wx * wy;
                    sc += w * c2.get(xx as usize, yy as usize);
                    ss += w * s2.get(xx as usize, yy as usize);
                    sw += w;
                }
            }
            let (sc, ss) = (sc / sw, ss / sw);
            if sc.hypot(ss) < 1e-9 {
                valid.push(false);
                angles.push(0.0);
            } else {
                valid.push(true);
                angles.push(wrap_to_period(ss.atan2(sc) / 2.0, PI));
            }
        }
    }
    OrientationMap::new(RealImage::new(rows, cols, angles).expect("finite"), valid).expect("mask")
}

/// Gradient-method orientation. Expects a prefiltered input.
pub fn gradient_orientation(img: &RealImage, win: Window) -> Result<OrientationMap> {
    win.check_fits(img)?;
    Ok(doubled_angle_orientation(&gradients(img), win))
}

/// Least-squares plane `I ≈ p0 + p1 x + p2 y` over the (border-clipped)
/// window around each pixel; returns `(p1, p2)`. Pixels whose normal
/// equations are singular get zero gradients.
pub fn plane_fit_gradients(img: &RealImage, win: Window) -> Result<GradientPair> {
    win.check_fits(img)?;
    let (rows, cols) = img.dims();
    let taps = win.taps();
    let mut gx = Vec::with_capacity(rows * cols);
    let mut gy = Vec::with_capacity(rows * cols);
    for y in 0..rows {
        for x in 0..cols {
            let mut m = [[0.0f64; 3]; 3];
            let mut rhs = [0.0f64; 3];
            for &(oy, wy) in &taps {
                let yy = y as isize + oy;
                if yy < 0 || yy >= rows as isize {
                    continue;
                }
                for &(ox, wx) in &taps {
                    let xx = x as isize + ox;
                    if xx < 0 || xx >= cols as isize {
                        continue;
                    }
                    let w = wx * wy;
                    let basis = [1.0, ox as f64, oy as f64];
                    let v = img.get(xx as usize, yy as usize);
                    for i in 0..3 {
                        rhs[i] += w * basis[i] * v;
                        for j in 0..3 {
                            m[i][j] += w * basis[i] * basis[j];
                        }
                    }
                }
            }
            let p = solve3(m, rhs).unwrap_or([0.0; 3]);
            gx.push(p[1]);
            gy.push(p[2]);
        }
    }
    Ok(GradientPair {
        gx: RealImage::new(rows, cols, gx)?,
        gy: RealImage::new(rows, cols, gy)?,
    })
}

/// Gaussian elimination with partial pivoting; `None` when (near) singular.
fn solve3(mut m: [[f64; 3]; 3], mut b: [f64; 3]) -> Option<[f64; 3]> {
    let scale = m.iter().flatten().fold(0.0f64, |a, v| a.max(v.abs()));
    if scale == 0.0 {
        return None;
    }
    for col in 0..3 {
        let pivot = (col..3).max_by(|&i, &j| m[i][col].abs().total_cmp(&m[j][col].abs()))?;
        if m[pivot][col].abs() < 1e-12 * scale {
            return None;
        }
        m.swap(col, pivot);
        b.swap(col, pivot);
        for row in col + 1..3 {
            let f = m[row][col] / m[col][col];
            for k in col..3 {
                m[row][k] -= f * m[col][k];
            }
            b[row] -= f * b[col];
        }
    }
    let mut x = [0.0; 3];
    for row in (0..3).rev() {
        let tail: f64 = (row + 1..3).map(|k| m[row][k] * x[k]).sum();
        x[row] = (b[row] - tail) / m[row][row];
    }
    Some(x)
}

/// Combined plane-fit/gradient orientation. Expects a prefiltered input.
pub fn cpfg_orientation(img: &RealImage, win: Window) -> Result<OrientationMap> {
    let g = plane_fit_gradients(img, win)?;
    Ok(doubled_angle_orientation(&g, win))
}
