//! Reliability-sorted 2-D phase unwrapping and the lifting of a modulo-pi
//! orientation map to a modulo-2pi direction map.
//!
//! Reliability of a pixel is the inverse of the sum of its squared wrapped
//! second differences (horizontal, vertical and both diagonals). Every edge
//! between 4-neighbours gets the sum of its endpoint reliabilities, and
//! edges are processed from most to least reliable, merging the groups they
//! join with whatever multiple of 2pi makes the step across the edge smallest.

use std::collections::VecDeque;
use std::f64::consts::{PI, TAU};

use crate::error::{Error, Result};
use crate::image::RealImage;
use crate::orientation::{wrap_pm_pi, wrap_to_period, DirectionMap, OrientationMap};

/// Minimum fraction of valid orientation pixels accepted for lifting.
pub const MIN_COVERAGE: f64 = 0.99;

const RELIABILITY_EPS: f64 = 1e-10;

/// Per-pixel reliability (non-negative, higher is unwrapped earlier).
/// Pixels without any complete second-difference stencil get zero.
pub fn reliability_map(wrapped: &RealImage) -> RealImage {
    let (rows, cols) = wrapped.dims();
    let at = |x: isize, y: isize| -> Option<f64> {
        (x >= 0 && y >= 0 && (x as usize) < cols && (y as usize) < rows).then(|| wrapped.get(x as usize, y as usize))
    };
    RealImage::from_fn(rows, cols, |x, y| {
        let (xi, yi) = (x as isize, y as isize);
        let centre = wrapped.get(x, y);
        let mut sum = 0.0;
        let mut terms = 0;
        for (dx, dy) in [(1, 0), (0, 1), (1, 1), (1, -1)] {
            if let (Some(a), Some(b)) = (at(xi - dx, yi - dy), at(xi + dx, yi + dy)) {
                let second = wrap_pm_pi(a - centre) - wrap_pm_pi(centre - b);
                sum += second * second;
                terms += 1;
            }
        }
        if terms == 0 {
            0.0
        } else {
            1.0 / (sum + RELIABILITY_EPS)
        }
    })
}

/// Result of [`unwrap_with_anchor`].
#[derive(Debug, Clone, PartialEq)]
pub struct Unwrapped {
    pub phase: RealImage,
    /// Row-major index of the most reliable pixel, which keeps its input value.
    pub anchor: usize,
}

/// Unwraps `wrapped`; the output differs from the input by integer
/// multiples of 2pi at every pixel.
pub fn unwrap_phase_2d(wrapped: &RealImage) -> RealImage {
    unwrap_with_anchor(wrapped).phase
}

pub fn unwrap_with_anchor(wrapped: &RealImage) -> Unwrapped {
    let (rows, cols) = wrapped.dims();
    let n = rows * cols;
    let values = wrapped.as_slice();
    let reliability = reliability_map(wrapped);
    let rel = reliability.as_slice();

    // (reliability, first pixel, second pixel); horizontal edges are listed
    // before vertical ones for the same first pixel.
    let mut edges: Vec<(f64, usize, usize)> = Vec::with_capacity(2 * n);
    for y in 0..rows {
        for x in 0..cols {
            let i = y * cols + x;
            if x + 1 < cols {
                edges.push((rel[i] + rel[i + 1], i, i + 1));
            }
            if y + 1 < rows {
                edges.push((rel[i] + rel[i + cols], i, i + cols));
            }
        }
    }
    edges.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));

    let mut group: Vec<usize> = (0..n).collect();
    let mut members: Vec<Vec<usize>> = (0..n).map(|i| vec![i]).collect();
    let mut turns = vec![0i64; n];

    for &(_, p, q) in &edges {
        let (gp, gq) = (group[p], group[q]);
        if gp == gq {
            continue;
        }
        let step = (values[q] + TAU * turns[q] as f64) - (values[p] + TAU * turns[p] as f64);
        let m = (step / TAU).round() as i64;
        // Move the smaller group; shift it so the step across the edge is in [-pi, pi].
        let (keep, moved, shift) = if members[gp].len() >= members[gq].len() {
            (gp, gq, -m)
        } else {
            (gq, gp, m)
        };
        let moved_members = std::mem::take(&mut members[moved]);
        for &i in &moved_members {
            turns[i] += shift;
            group[i] = keep;
        }
        members[keep].extend(moved_members);
    }

    let anchor = (0..n)
        .max_by(|&a, &b| rel[a].total_cmp(&rel[b]).then(b.cmp(&a)))
        .unwrap_or(0);
    let offset = turns[anchor];
    let data = values
        .iter()
        .zip(&turns)
        .map(|(&v, &t)| if t == offset { v } else { v + TAU * (t - offset) as f64 })
        .collect();
    Unwrapped {
        phase: RealImage::new(rows, cols, data).expect("finite"),
        anchor,
    }
}

/// Fills invalid pixels with the angle of the nearest valid pixel
/// (breadth-first over 4-neighbours, seeded in row-major order).
pub fn inpaint_nearest(fo: &OrientationMap) -> RealImage {
    let (rows, cols) = fo.dims();
    let mut values = fo.angles().as_slice().to_vec();
    let mut filled: Vec<bool> = fo.valid().to_vec();
    let mut queue: VecDeque<usize> = (0..rows * cols).filter(|&i| filled[i]).collect();
    while let Some(i) = queue.pop_front() {
        let (x, y) = (i % cols, i / cols);
        let mut neighbours = [None; 4];
        if x > 0 {
            neighbours[0] = Some(i - 1);
        }
        if x + 1 < cols {
            neighbours[1] = Some(i + 1);
        }
        if y > 0 {
            neighbours[2] = Some(i - cols);
        }
        if y + 1 < rows {
            neighbours[3] = Some(i + cols);
        }
        for j in neighbours.into_iter().flatten() {
            if !filled[j] {
                filled[j] = true;
                values[j] = values[i];
                queue.push_back(j);
            }
        }
    }
    RealImage::new(rows, cols, values).expect("finite")
}

/// A direction map together with the pixel that fixed its global branch.
#[derive(Debug, Clone, PartialEq)]
pub struct DirectionLift {
    pub direction: DirectionMap,
    /// Row-major index of the anchor pixel; its direction lies in `[0, pi)`.
    pub anchor: usize,
}

impl DirectionLift {
    pub fn anchor_xy(&self) -> (usize, usize) {
        let cols = self.direction.dims().1;
        (self.anchor % cols, self.anchor / cols)
    }
}

/// Doubles the orientation, unwraps it, halves it and reduces modulo 2pi.
///
/// The result is determined up to a global pi (the two branches of the
/// direction); the branch is the one whose most reliable pixel lies in
/// `[0, pi)`.
pub fn orientation_to_direction(fo: &OrientationMap) -> Result<DirectionLift> {
    let coverage = fo.valid_fraction();
    if coverage < MIN_COVERAGE {
        return Err(Error::InsufficientCoverage {
            coverage,
            required: MIN_COVERAGE,
        });
    }
    let doubled = inpaint_nearest(fo).map(|a| 2.0 * a);
    let unwrapped = unwrap_with_anchor(&doubled);
    let angles = unwrapped.phase.map(|v| wrap_to_period(v / 2.0, TAU));
    Ok(DirectionLift {
        direction: DirectionMap::new(angles, fo.valid().to_vec())?,
        anchor: unwrapped.anchor,
    })
}

/// Largest circular error between two direction maps over valid interior
/// pixels, minimized over the two global branches. Returns `(error, flipped)`.
pub fn branch_aligned_error(estimate: &DirectionMap, truth: &DirectionMap, border: usize) -> Result<(f64, bool)> {
    estimate.angles().check_same_dims(truth.angles())?;
    let (rows, cols) = truth.dims();
    let mut worst = [0.0f64; 2];
    let mut any = false;
    for y in border..rows.saturating_sub(border) {
        for x in border..cols.saturating_sub(border) {
            let i = y * cols + x;
            if !(estimate.valid()[i] && truth.valid()[i]) {
                continue;
            }
            any = true;
            let (e, t) = (estimate.angles().as_slice()[i], truth.angles().as_slice()[i]);
            worst[0] = worst[0].max(crate::orientation::circular_distance(e, t, TAU));
            worst[1] = worst[1].max(crate::orientation::circular_distance(e, t + PI, TAU));
        }
    }
    if !any {
        return Err(Error::EmptyPixelSet);
    }
    Ok(if worst[1] < worst[0] { (worst[1], true) } else { (worst[0], false) })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::{gen_carrier, gen_peaks_phase, ground_truth_direction, ground_truth_orientation, CarrierSpec};

    fn wrap(img: &RealImage) -> RealImage {
        img.map(wrap_pm_pi)
    }

    #[test]
    fn smooth_input_is_untouched() {
        let img = RealImage::from_fn(32, 32, |x, y| 0.04 * x as f64 - 0.03 * y as f64 + 0.2);
        assert_eq!(unwrap_phase_2d(&img), img);
    }

    #[test]
    fn wrapped_ramp() {
        let truth = RealImage::from_fn(64, 64, |x, _| 0.1 * x as f64);
        let out = unwrap_phase_2d(&wrap(&truth));
        let offset = out.get(0, 0) - truth.get(0, 0);
        for (a, b) in out.as_slice().iter().zip(truth.as_slice()) {
            assert!((a - b - offset).abs() < 1e-6);
        }
        assert!((offset / TAU - (offset / TAU).round()).abs() < 1e-9);
    }

    #[test]
    fn wrapped_peaks() {
        let truth = gen_peaks_phase(256, 256, 5.0);
        let wrapped = wrap(&truth);
        let out = unwrap_phase_2d(&wrapped);
        let offset = out.get(0, 0) - truth.get(0, 0);
        let max_dev = out.as_slice().iter().zip(truth.as_slice()).map(|(a, b)| (a - b - offset).abs()).fold(0.0, f64::max);
        assert!(max_dev < 1e-6, "{max_dev}");
        for (a, b) in out.as_slice().iter().zip(wrapped.as_slice()) {
            let k = (a - b) / TAU;
            assert!((k - k.round()).abs() < 1e-9);
        }
    }

    #[test]
    fn anchor_keeps_its_value() {
        let truth = RealImage::from_fn(40, 40, |x, y| 0.3 * x as f64 + 0.05 * (y * y) as f64 / 10.0);
        let wrapped = wrap(&truth);
        let out = unwrap_with_anchor(&wrapped);
        assert_eq!(out.phase.as_slice()[out.anchor], wrapped.as_slice()[out.anchor]);
        let rel = reliability_map(&wrapped);
        assert!(rel.as_slice().iter().all(|&r| r >= 0.0 && r.is_finite()));
        assert_eq!(rel.get(0, 0), 0.0);
    }

    #[test]
    fn constant_orientation_lifts_to_constant_direction() {
        let fo = OrientationMap::all_valid(RealImage::filled(16, 16, PI / 2.0));
        let lift = orientation_to_direction(&fo).unwrap();
        let first = lift.direction.angles().get(0, 0);
        assert!((first - PI / 2.0).abs() < 1e-12 || (first - 1.5 * PI).abs() < 1e-12);
        assert!(lift.direction.angles().as_slice().iter().all(|&a| a == first));
    }

    #[test]
    fn recovers_ground_truth_direction() {
        let phase = gen_peaks_phase(256, 256, 2.0)
            .zip_map(&gen_carrier(256, 256, CarrierSpec::new(8.0, 0.0).unwrap()), |a, b| a + b)
            .unwrap();
        let lift = orientation_to_direction(&ground_truth_orientation(&phase)).unwrap();
        let (err, _) = branch_aligned_error(&lift.direction, &ground_truth_direction(&phase), 1).unwrap();
        assert!(err < 1e-6, "{err}");
        let anchor = lift.direction.angles().as_slice()[lift.anchor];
        assert!(anchor < PI);
    }

    #[test]
    fn step_lines_disappear() {
        let beta = RealImage::from_fn(48, 48, |x, y| 0.05 * x as f64 + 0.03 * y as f64 + 1.0);
        let fo = OrientationMap::all_valid(beta.clone());
        assert!(fo.angles().as_slice().iter().any(|&a| a < 0.5));
        let lift = orientation_to_direction(&fo).unwrap();
        let d = lift.direction.angles();
        for y in 0..48 {
            for x in 0..47 {
                let step = crate::orientation::circular_distance(d.get(x + 1, y), d.get(x, y), TAU);
                assert!((step - 0.05).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn lifting_is_idempotent() {
        let phase = gen_peaks_phase(96, 96, 0.5)
            .zip_map(&gen_carrier(96, 96, CarrierSpec::new(10.0, 2.0).unwrap()), |a, b| a + b)
            .unwrap();
        let first = orientation_to_direction(&ground_truth_orientation(&phase)).unwrap();
        let again = orientation_to_direction(&first.direction.to_orientation()).unwrap();
        for (a, b) in first.direction.angles().as_slice().iter().zip(again.direction.angles().as_slice()) {
            assert!(crate::orientation::circular_distance(*a, *b, TAU) < 1e-9);
        }
    }

    #[test]
    fn low_coverage_is_rejected() {
        let mut valid = vec![true; 100];
        valid[..2].iter_mut().for_each(|v| *v = false);
        let fo = OrientationMap::new(RealImage::filled(10, 10, 1.0), valid).unwrap();
        match orientation_to_direction(&fo) {
            Err(Error::InsufficientCoverage { coverage, .. }) => assert!((coverage - 0.98).abs() < 1e-12),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn inpainting_uses_nearest_valid() {
        let mut valid = vec![true; 25];
        valid[12] = false;
        let angles = RealImage::from_fn(5, 5, |x, y| (x + 5 * y) as f64 * 0.1);
        let filled = inpaint_nearest(&OrientationMap::new(angles.clone(), valid).unwrap());
        assert!((filled.get(2, 2) - angles.get(2, 1)).abs() < 1e-15);
    }
}
