//! Orientation (mod pi) and direction (mod 2 pi) maps and the doubled-angle
//! sin/cos encoding used as the network target.

use std::f64::consts::{PI, TAU};

use crate::error::{Error, Result};
use crate::image::RealImage;

/// Reduces `x` into `[0, period)`, guarding against `rem_euclid` rounding up
/// to `period` for tiny negative inputs.
#[inline]
pub fn wrap_to_period(x: f64, period: f64) -> f64 {
    let r = x.rem_euclid(period);
    if r >= period {
        0.0
    } else {
        r
    }
}

/// Wraps an angle into `[-pi, pi)`.
#[inline]
pub fn wrap_pm_pi(x: f64) -> f64 {
    wrap_to_period(x + PI, TAU) - PI
}

/// Smallest distance between two angles that are defined modulo `period`.
#[inline]
pub fn circular_distance(a: f64, b: f64, period: f64) -> f64 {
    let d = wrap_to_period(a - b, period);
    d.min(period - d)
}

/// Per-pixel fringe orientation in `[0, pi)` with a validity mask.
#[derive(Debug, Clone, PartialEq)]
pub struct OrientationMap {
    angles: RealImage,
    valid: Vec<bool>,
}

impl OrientationMap {
    /// Builds a map, reducing every angle into `[0, pi)`.
    pub fn new(angles: RealImage, valid: Vec<bool>) -> Result<Self> {
        if valid.len() != angles.len() {
            return Err(Error::ShapeMismatch {
                expected: format!("{} mask entries", angles.len()),
                actual: format!("{}", valid.len()),
            });
        }
        let angles = angles.map(|a| wrap_to_period(a, PI));
        Ok(Self { angles, valid })
    }

    pub fn all_valid(angles: RealImage) -> Self {
        let n = angles.len();
        Self::new(angles, vec![true; n]).expect("mask length matches")
    }

    pub fn angles(&self) -> &RealImage {
        &self.angles
    }

    pub fn valid(&self) -> &[bool] {
        &self.valid
    }

    pub fn is_valid(&self, x: usize, y: usize) -> bool {
        self.valid[y * self.angles.cols() + x]
    }

    pub fn dims(&self) -> (usize, usize) {
        self.angles.dims()
    }

    pub fn valid_fraction(&self) -> f64 {
        self.valid.iter().filter(|&&v| v).count() as f64 / self.valid.len() as f64
    }

    pub fn transpose(&self) -> Self {
        let (rows, cols) = self.dims();
        let mut valid = Vec::with_capacity(self.valid.len());
        for x in 0..cols {
            for y in 0..rows {
                valid.push(self.valid[y * cols + x]);
            }
        }
        Self {
            angles: self.angles.transpose(),
            valid,
        }
    }
}

/// Per-pixel fringe direction in `[0, 2 pi)` with a validity mask.
#[derive(Debug, Clone, PartialEq)]
pub struct DirectionMap {
    angles: RealImage,
    valid: Vec<bool>,
}

impl DirectionMap {
    pub fn new(angles: RealImage, valid: Vec<bool>) -> Result<Self> {
        if valid.len() != angles.len() {
            return Err(Error::ShapeMismatch {
                expected: format!("{} mask entries", angles.len()),
                actual: format!("{}", valid.len()),
            });
        }
        let angles = angles.map(|a| wrap_to_period(a, TAU));
        Ok(Self { angles, valid })
    }

    pub fn all_valid(angles: RealImage) -> Self {
        let n = angles.len();
        Self::new(angles, vec![true; n]).expect("mask length matches")
    }

    pub fn angles(&self) -> &RealImage {
        &self.angles
    }

    pub fn valid(&self) -> &[bool] {
        &self.valid
    }

    pub fn dims(&self) -> (usize, usize) {
        self.angles.dims()
    }

    /// Drops the sense of the direction, keeping the mask.
    pub fn to_orientation(&self) -> OrientationMap {
        OrientationMap {
            angles: self.angles.map(|a| wrap_to_period(a, PI)),
            valid: self.valid.clone(),
        }
    }

    /// The opposite branch, `beta + pi`.
    pub fn flipped(&self) -> Self {
        Self {
            angles: self.angles.map(|a| wrap_to_period(a + PI, TAU)),
            valid: self.valid.clone(),
        }
    }
}

/// Two-channel `(sin 2FO, cos 2FO)` field.
#[derive(Debug, Clone, PartialEq)]
pub struct OrientationEncoding {
    pub sin2: RealImage,
    pub cos2: RealImage,
}

impl OrientationEncoding {
    pub fn new(sin2: RealImage, cos2: RealImage) -> Result<Self> {
        sin2.check_same_dims(&cos2)?;
        Ok(Self { sin2, cos2 })
    }

    pub fn dims(&self) -> (usize, usize) {
        self.sin2.dims()
    }

    pub fn check_same_dims(&self, other: &OrientationEncoding) -> Result<()> {
        self.sin2.check_same_dims(&other.sin2)
    }
}

/// Invalid pixels encode as `(0, 1)`.
pub fn encode_orientation(fo: &OrientationMap) -> OrientationEncoding {
    let (rows, cols) = fo.dims();
    let at = |x: usize, y: usize| fo.is_valid(x, y).then(|| 2.0 * fo.angles().get(x, y));
    OrientationEncoding {
        sin2: RealImage::from_fn(rows, cols, |x, y| at(x, y).map_or(0.0, f64::sin)),
        cos2: RealImage::from_fn(rows, cols, |x, y| at(x, y).map_or(1.0, f64::cos)),
    }
}

/// Below this squared norm a `(sin, cos)` pair carries no angle.
pub const MIN_ENCODING_NORM_SQR: f64 = 1e-6;

pub fn decode_orientation(enc: &OrientationEncoding) -> OrientationMap {
    let (rows, cols) = enc.dims();
    let mut valid = Vec::with_capacity(rows * cols);
    let mut angles = Vec::with_capacity(rows * cols);
    for (&s, &c) in enc.sin2.as_slice().iter().zip(enc.cos2.as_slice()) {
        if s * s + c * c < MIN_ENCODING_NORM_SQR {
            valid.push(false);
            angles.push(0.0);
        } else {
            valid.push(true);
            angles.push(wrap_to_period(s.atan2(c) / 2.0, PI));
        }
    }
    OrientationMap {
        angles: RealImage::new(rows, cols, angles).expect("finite angles"),
        valid,
    }
}
