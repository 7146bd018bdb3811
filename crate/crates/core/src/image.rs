//! Dense real/complex grids, finite-difference gradients and Gaussian blur.
//!
//! Axis convention used throughout the crate: `x` is the column index
//! (increasing rightward) and `y` the row index (increasing downward).

use rustfft::num_complex::Complex64;

use crate::error::{Error, Result};

/// Smallest side accepted by the estimators.
pub const MIN_SIDE: usize = 8;

/// Row-major grid of finite real samples.
#[derive(Debug, Clone, PartialEq)]
pub struct RealImage {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl RealImage {
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::InvalidDimensions {
                rows,
                cols,
                reason: "dimensions must be positive".into(),
            });
        }
        if data.len() != rows * cols {
            return Err(Error::ShapeMismatch {
                expected: format!("{} samples", rows * cols),
                actual: format!("{} samples", data.len()),
            });
        }
        if let Some(index) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite { index });
        }
        Ok(Self { rows, cols, data })
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self::filled(rows, cols, 0.0)
    }

    pub fn filled(rows: usize, cols: usize, value: f64) -> Self {
        assert!(rows > 0 && cols > 0, "image dimensions must be positive");
        assert!(value.is_finite());
        Self {
            rows,
            cols,
            data: vec![value; rows * cols],
        }
    }

    /// Builds an image by evaluating `f(x, y)` (column, row) at every pixel.
    ///
    /// Panics if `f` returns a non-finite value.
    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        assert!(rows > 0 && cols > 0, "image dimensions must be positive");
        let mut data = Vec::with_capacity(rows * cols);
        for y in 0..rows {
            for x in 0..cols {
                let v = f(x, y);
                assert!(v.is_finite(), "non-finite sample at ({x}, {y})");
                data.push(v);
            }
        }
        Self { rows, cols, data }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    /// Sample at column `x`, row `y`.
    #[inline]
    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.data[y * self.cols + x]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    /// Applies `f` to every sample. Panics if `f` produces a non-finite value.
    pub fn map(&self, mut f: impl FnMut(f64) -> f64) -> Self {
        let data: Vec<f64> = self.data.iter().map(|&v| f(v)).collect();
        assert!(data.iter().all(|v| v.is_finite()), "map produced non-finite sample");
        Self {
            rows: self.rows,
            cols: self.cols,
            data,
        }
    }

    /// Element-wise combination of two equally sized images.
    pub fn zip_map(&self, other: &RealImage, f: impl Fn(f64, f64) -> f64) -> Result<Self> {
        self.check_same_dims(other)?;
        let data = self
            .data
            .iter()
            .zip(&other.data)
            .map(|(&a, &b)| f(a, b))
            .collect();
        RealImage::new(self.rows, self.cols, data)
    }

    pub fn transpose(&self) -> Self {
        let mut data = Vec::with_capacity(self.data.len());
        for x in 0..self.cols {
            for y in 0..self.rows {
                data.push(self.get(x, y));
            }
        }
        Self {
            rows: self.cols,
            cols: self.rows,
            data,
        }
    }

    pub fn mean(&self) -> f64 {
        self.data.iter().sum::<f64>() / self.data.len() as f64
    }

    pub fn rms(&self) -> f64 {
        (self.data.iter().map(|v| v * v).sum::<f64>() / self.data.len() as f64).sqrt()
    }

    pub fn check_same_dims(&self, other: &RealImage) -> Result<()> {
        if self.dims() != other.dims() {
            return Err(Error::ShapeMismatch {
                expected: format!("{}x{}", self.rows, self.cols),
                actual: format!("{}x{}", other.rows, other.cols),
            });
        }
        Ok(())
    }

    /// Rejects grids smaller than [`MIN_SIDE`] on either axis.
    pub fn check_estimator_size(&self) -> Result<()> {
        if self.rows < MIN_SIDE || self.cols < MIN_SIDE {
            return Err(Error::InvalidDimensions {
                rows: self.rows,
                cols: self.cols,
                reason: format!("estimators need at least {MIN_SIDE}x{MIN_SIDE}"),
            });
        }
        Ok(())
    }

    pub fn to_complex(&self) -> ComplexImage {
        ComplexImage {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|&v| Complex64::new(v, 0.0)).collect(),
        }
    }
}

/// Row-major grid of finite complex samples.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexImage {
    rows: usize,
    cols: usize,
    data: Vec<Complex64>,
}

impl ComplexImage {
    pub fn new(rows: usize, cols: usize, data: Vec<Complex64>) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::InvalidDimensions {
                rows,
                cols,
                reason: "dimensions must be positive".into(),
            });
        }
        if data.len() != rows * cols {
            return Err(Error::ShapeMismatch {
                expected: format!("{} samples", rows * cols),
                actual: format!("{} samples", data.len()),
            });
        }
        if let Some(index) = data.iter().position(|v| !v.re.is_finite() || !v.im.is_finite()) {
            return Err(Error::NonFinite { index });
        }
        Ok(Self { rows, cols, data })
    }

    pub(crate) fn from_raw(rows: usize, cols: usize, data: Vec<Complex64>) -> Self {
        debug_assert_eq!(data.len(), rows * cols);
        Self { rows, cols, data }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> Complex64 {
        self.data[y * self.cols + x]
    }

    pub fn as_slice(&self) -> &[Complex64] {
        &self.data
    }

    pub(crate) fn as_mut_slice(&mut self) -> &mut [Complex64] {
        &mut self.data
    }

    pub fn re(&self) -> RealImage {
        RealImage {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|c| c.re).collect(),
        }
    }
}

/// Per-pixel partial derivatives along x (columns) and y (rows).
#[derive(Debug, Clone, PartialEq)]
pub struct GradientPair {
    pub gx: RealImage,
    pub gy: RealImage,
}

/// Central differences in the interior, one-sided differences on the first
/// and last row/column.
pub fn gradients(img: &RealImage) -> GradientPair {
    let (rows, cols) = img.dims();
    let gx = RealImage::from_fn(rows, cols, |x, y| diff_1d(cols, x, |i| img.get(i, y)));
    let gy = RealImage::from_fn(rows, cols, |x, y| diff_1d(rows, y, |j| img.get(x, j)));
    GradientPair { gx, gy }
}

#[inline]
fn diff_1d(n: usize, i: usize, at: impl Fn(usize) -> f64) -> f64 {
    if n < 2 {
        0.0
    } else if i == 0 {
        at(1) - at(0)
    } else if i == n - 1 {
        at(n - 1) - at(n - 2)
    } else {
        (at(i + 1) - at(i - 1)) / 2.0
    }
}

/// Unit-sum Gaussian taps for offsets `-r..=r`, `r = ceil(4 sigma)`.
pub fn gaussian_kernel(sigma: f64) -> Vec<f64> {
    let radius = (4.0 * sigma).ceil() as isize;
    let mut taps: Vec<f64> = (-radius..=radius)
        .map(|k| (-((k * k) as f64) / (2.0 * sigma * sigma)).exp())
        .collect();
    let sum: f64 = taps.iter().sum();
    taps.iter_mut().for_each(|t| *t /= sum);
    taps
}

/// Separable Gaussian convolution with edge replication.
pub fn gaussian_blur(img: &RealImage, sigma: f64) -> Result<RealImage> {
    if !(sigma > 0.0 && sigma.is_finite()) {
        return Err(Error::param("sigma", format!("must be positive, got {sigma}")));
    }
    let taps = gaussian_kernel(sigma);
    let radius = (taps.len() / 2) as isize;
    let (rows, cols) = img.dims();
    let clamp = |i: isize, n: usize| i.clamp(0, n as isize - 1) as usize;

    let horizontal = RealImage::from_fn(rows, cols, |x, y| {
        taps.iter()
            .enumerate()
            .map(|(k, w)| w * img.get(clamp(x as isize + k as isize - radius, cols), y))
            .sum()
    });
    Ok(RealImage::from_fn(rows, cols, |x, y| {
        taps.iter()
            .enumerate()
            .map(|(k, w)| w * horizontal.get(x, clamp(y as isize + k as isize - radius, rows)))
            .sum()
    }))
}
