//! Error measures used to compare estimated maps with ground truth.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::image::RealImage;
use crate::orientation::{OrientationEncoding, OrientationMap};

/// Summary of one evaluation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub method: String,
    pub orientation_error: Option<f64>,
    pub rmse_sin: Option<f64>,
    pub rmse_cos: Option<f64>,
    pub rmse_phase: Option<f64>,
    pub excluded_border: usize,
    pub valid_pixel_fraction: f64,
}

impl EvalReport {
    pub fn new(method: impl Into<String>, excluded_border: usize) -> Self {
        Self {
            method: method.into(),
            orientation_error: None,
            rmse_sin: None,
            rmse_cos: None,
            rmse_phase: None,
            excluded_border,
            valid_pixel_fraction: 1.0,
        }
    }
}

fn inside(x: usize, y: usize, rows: usize, cols: usize, border: usize) -> bool {
    x >= border && y >= border && x + border < cols && y + border < rows
}

/// Pixels (row-major indices) that are valid in both maps and outside the border.
fn evaluated_pixels(fo: &OrientationMap, reference: &OrientationMap, border: usize) -> Result<Vec<usize>> {
    fo.angles().check_same_dims(reference.angles())?;
    let (rows, cols) = fo.dims();
    let mut idx = Vec::new();
    for y in 0..rows {
        for x in 0..cols {
            let i = y * cols + x;
            if inside(x, y, rows, cols, border) && fo.valid()[i] && reference.valid()[i] {
                idx.push(i);
            }
        }
    }
    Ok(idx)
}

/// Orientation error: sample standard deviation of `sin(FO - FO_ref)` over
/// the pixels valid in both maps and outside `exclude_border`.
pub fn orientation_error(fo: &OrientationMap, reference: &OrientationMap, exclude_border: usize) -> Result<f64> {
    Ok(orientation_error_with_coverage(fo, reference, exclude_border)?.0)
}

/// Like [`orientation_error`], also returning the fraction of border-free
/// pixels that took part.
pub fn orientation_error_with_coverage(
    fo: &OrientationMap,
    reference: &OrientationMap,
    exclude_border: usize,
) -> Result<(f64, f64)> {
    let idx = evaluated_pixels(fo, reference, exclude_border)?;
    if idx.len() < 2 {
        return Err(Error::EmptyPixelSet);
    }
    let a = fo.angles().as_slice();
    let b = reference.angles().as_slice();
    let fa: Vec<f64> = idx.iter().map(|&i| a[i]).collect();
    let fb: Vec<f64> = idx.iter().map(|&i| b[i]).collect();
    let oe = orientation_error_angles(&fa, &fb)?;
    let n = idx.len() as f64;

    let (rows, cols) = fo.dims();
    let interior = rows.saturating_sub(2 * exclude_border) * cols.saturating_sub(2 * exclude_border);
    Ok((oe, n / interior as f64))
}

/// The orientation-error formula on raw angle lists (no reduction, no mask):
/// `sqrt(sum((sin(a - b) - mu)^2) / (N - 1))`, `mu` the mean of `sin(a - b)`.
pub fn orientation_error_angles(fo: &[f64], reference: &[f64]) -> Result<f64> {
    if fo.len() != reference.len() {
        return Err(Error::ShapeMismatch {
            expected: format!("{} angles", reference.len()),
            actual: format!("{}", fo.len()),
        });
    }
    if fo.len() < 2 {
        return Err(Error::EmptyPixelSet);
    }
    let d: Vec<f64> = fo.iter().zip(reference).map(|(a, b)| (a - b).sin()).collect();
    let n = d.len() as f64;
    let mu = d.iter().sum::<f64>() / n;
    Ok((d.iter().map(|v| (v - mu).powi(2)).sum::<f64>() / (n - 1.0)).sqrt())
}

/// Per-channel root-mean-square differences `(rmse_sin, rmse_cos)`.
pub fn rmse_channels(pred: &OrientationEncoding, target: &OrientationEncoding) -> Result<(f64, f64)> {
    pred.check_same_dims(target)?;
    let rmse = |a: &RealImage, b: &RealImage| {
        let sum: f64 = a.as_slice().iter().zip(b.as_slice()).map(|(p, q)| (p - q).powi(2)).sum();
        (sum / a.len() as f64).sqrt()
    };
    Ok((rmse(&pred.sin2, &target.sin2), rmse(&pred.cos2, &target.cos2)))
}

/// `|sin2_pred - sin2_target|` per pixel.
pub fn sin_error_map(pred: &OrientationEncoding, target: &OrientationEncoding) -> Result<RealImage> {
    pred.sin2.zip_map(&target.sin2, |a, b| (a - b).abs())
}

/// RMS of the phase difference over the interior after removing its mean (piston).
pub fn rmse_phase(phase: &RealImage, reference: &RealImage, exclude_border: usize) -> Result<f64> {
    phase.check_same_dims(reference)?;
    let (rows, cols) = phase.dims();
    let mut diffs = Vec::new();
    for y in 0..rows {
        for x in 0..cols {
            if inside(x, y, rows, cols, exclude_border) {
                diffs.push(phase.get(x, y) - reference.get(x, y));
            }
        }
    }
    if diffs.is_empty() {
        return Err(Error::EmptyPixelSet);
    }
    let n = diffs.len() as f64;
    let mean = diffs.iter().sum::<f64>() / n;
    Ok((diffs.iter().map(|d| (d - mean).powi(2)).sum::<f64>() / n).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::orientation::{encode_orientation, wrap_to_period};
    use crate::sim::rng_from_seed;
    use proptest::prelude::*;
    use rand::Rng;
    use std::f64::consts::PI;

    fn map(rows: usize, cols: usize, f: impl FnMut(usize, usize) -> f64) -> OrientationMap {
        OrientationMap::all_valid(RealImage::from_fn(rows, cols, f))
    }

    fn random_map(seed: u64) -> OrientationMap {
        let mut rng = rng_from_seed(seed);
        map(16, 16, |_, _| rng.gen_range(0.0..PI))
    }

    #[test]
    fn identical_maps_have_zero_error() {
        let f = random_map(1);
        assert_eq!(orientation_error(&f, &f, 0).unwrap(), 0.0);
    }

    #[test]
    fn constant_offset_is_invisible() {
        let f = random_map(2);
        let base = f.angles().as_slice();
        let mut rng = rng_from_seed(3);
        for _ in 0..10 {
            let c: f64 = rng.gen_range(-10.0..10.0);
            let shifted: Vec<f64> = base.iter().map(|a| a + c).collect();
            let oe = orientation_error_angles(&shifted, base).unwrap();
            assert!(oe < 1e-12, "c = {c}, OE = {oe}");
        }
    }

    #[test]
    fn hand_computed_two_by_two() {
        let fo = map(2, 2, |x, _| if x == 1 { PI / 2.0 } else { 0.0 });
        let reference = map(2, 2, |_, _| 0.0);
        let oe = orientation_error(&fo, &reference, 0).unwrap();
        assert!((oe - (1.0f64 / 3.0).sqrt()).abs() < 1e-12);
    }

    #[test]
    fn masks_and_borders_shrink_the_pixel_set() {
        let fo = random_map(4);
        let mut valid = vec![true; 256];
        valid[5 * 16 + 5] = false;
        let reference = OrientationMap::new(random_map(5).angles().clone(), valid).unwrap();
        let (_, cov) = orientation_error_with_coverage(&fo, &reference, 2).unwrap();
        assert!((cov - 143.0 / 144.0).abs() < 1e-12);
        assert!(matches!(orientation_error(&fo, &reference, 8), Err(Error::EmptyPixelSet)));
        assert!(orientation_error(&fo, &map(8, 8, |_, _| 0.0), 0).is_err());
    }

    #[test]
    fn channel_rmse() {
        let e = encode_orientation(&random_map(6));
        assert_eq!(rmse_channels(&e, &e).unwrap(), (0.0, 0.0));
        let shifted = OrientationEncoding::new(e.sin2.map(|v| v + 0.1), e.cos2.clone()).unwrap();
        let (s, c) = rmse_channels(&shifted, &e).unwrap();
        assert!((s - 0.1).abs() < 1e-12 && c == 0.0);
        let err = sin_error_map(&shifted, &e).unwrap();
        assert!(err.as_slice().iter().all(|v| (v - 0.1).abs() < 1e-12));
    }

    #[test]
    fn channel_rmse_of_independent_random_maps() {
        // For independent uniform angles E[(sin a - sin b)^2] = 1. Monte-Carlo oracle.
        let mut rng = rng_from_seed(77);
        let oracle = {
            let n = 200_000;
            let s: f64 = (0..n)
                .map(|_| {
                    let (a, b): (f64, f64) = (rng.gen_range(0.0..PI), rng.gen_range(0.0..PI));
                    ((2.0 * a).sin() - (2.0 * b).sin()).powi(2)
                })
                .sum();
            (s / n as f64).sqrt()
        };
        let mut rng = rng_from_seed(78);
        let a = encode_orientation(&map(64, 64, |_, _| rng.gen_range(0.0..PI)));
        let b = encode_orientation(&map(64, 64, |_, _| rng.gen_range(0.0..PI)));
        let (s, _) = rmse_channels(&a, &b).unwrap();
        assert!((s - oracle).abs() < 0.1 * oracle, "{s} vs {oracle}");
    }

    #[test]
    fn phase_rmse_examples() {
        let reference = RealImage::from_fn(64, 64, |x, y| (x as f64 * 0.3).sin() + y as f64 * 0.01);
        assert_eq!(rmse_phase(&reference, &reference, 0).unwrap(), 0.0);
        let piston = reference.map(|v| v + 3.7);
        assert!(rmse_phase(&piston, &reference, 0).unwrap() < 1e-12);
        let tilted = reference.zip_map(&RealImage::from_fn(64, 64, |x, _| 0.01 * x as f64), |a, b| a + b).unwrap();
        // Zero-mean ramp over x = 0..63: variance (n^2 - 1) / 12.
        let expected = 0.01 * ((64.0f64 * 64.0 - 1.0) / 12.0).sqrt();
        assert!((rmse_phase(&tilted, &reference, 0).unwrap() - expected).abs() < 1e-12);
    }

    proptest! {
        #[test]
        fn oe_symmetric_and_non_negative(seed_a in 0u64..1000, seed_b in 0u64..1000) {
            let (a, b) = (random_map(seed_a), random_map(seed_b + 1000));
            let ab = orientation_error(&a, &b, 1).unwrap();
            let ba = orientation_error(&b, &a, 1).unwrap();
            prop_assert!(ab >= 0.0);
            prop_assert!((ab - ba).abs() < 1e-12);
        }

        #[test]
        fn oe_ignores_pi_jumps_in_the_difference(seed in 0u64..1000) {
            // Adding pi to a subset of differences flips those sines; with a
            // constant underlying difference of zero the error stays zero.
            let a = random_map(seed);
            let mut rng = rng_from_seed(seed + 7);
            let b = OrientationMap::all_valid(a.angles().map(|v| wrap_to_period(v + if rng.gen_bool(0.5) { PI } else { 0.0 }, PI)));
            prop_assert!(orientation_error(&a, &b, 0).unwrap() < 1e-7);
        }

        #[test]
        fn phase_rmse_piston_invariant(piston in -100.0f64..100.0) {
            let reference = RealImage::from_fn(16, 16, |x, y| ((x * y) as f64).sqrt());
            let phase = reference.map(|v| 0.5 * v);
            let base = rmse_phase(&phase, &reference, 2).unwrap();
            let shifted = rmse_phase(&phase.map(|v| v + piston), &reference, 2).unwrap();
            prop_assert!((base - shifted).abs() < 1e-9);
        }
    }
}
