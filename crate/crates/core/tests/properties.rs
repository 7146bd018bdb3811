//! Property tests over the public API: unwrapping, direction lifting,
//! demodulation, the network's shape contract and the binary formats.

use std::f64::consts::{PI, TAU};

use fringeproc::classic::prefilter_auto;
use fringeproc::container::{decode_container, encode_container, ImageStack};
use fringeproc::hst::{demodulate, quadrature};
use fringeproc::metrics::rmse_phase;
use fringeproc::net::{build_network, decode_weights, encode_weights, forward, loss_mse, NetworkConfig};
use fringeproc::orientation::{circular_distance, wrap_pm_pi};
use fringeproc::sim::{gen_carrier, gen_peaks_phase, ground_truth_direction, ground_truth_orientation, render_fringe, CarrierSpec};
use fringeproc::unwrap::{branch_aligned_error, orientation_to_direction, unwrap_phase_2d};
use fringeproc::{DirectionMap, OrientationEncoding, RealImage};
use proptest::prelude::*;

fn carrier_phase(size: usize, period: f64, theta: f64, coeff: f64) -> RealImage {
    let c = gen_carrier(size, size, CarrierSpec::new(period, theta).unwrap());
    gen_peaks_phase(size, size, coeff).zip_map(&c, |a, b| a + b).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn unwrap_preserves_values_modulo_two_pi(values in prop::collection::vec(-50.0f64..50.0, 12 * 10)) {
        let img = RealImage::new(12, 10, values).unwrap();
        let out = unwrap_phase_2d(&img.map(wrap_pm_pi));
        for (a, b) in out.as_slice().iter().zip(img.as_slice()) {
            let turns = (a - b) / TAU;
            prop_assert!((turns - turns.round()).abs() * TAU < 1e-9);
        }
    }

    #[test]
    fn unwrap_recovers_smooth_fields(period in 8.0f64..32.0, theta in 0.0f64..PI, coeff in 0.0f64..4.0) {
        let phase = carrier_phase(48, period, theta, coeff);
        let steepest = (0..48)
            .flat_map(|y| (0..47).map(move |x| (x, y)))
            .map(|(x, y)| (phase.get(x + 1, y) - phase.get(x, y)).abs().max((phase.get(y, x + 1) - phase.get(y, x)).abs()))
            .fold(0.0f64, f64::max);
        prop_assume!(steepest < 0.9 * PI);
        let out = unwrap_phase_2d(&phase.map(wrap_pm_pi));
        let offset = out.as_slice()[0] - phase.as_slice()[0];
        for (a, b) in out.as_slice().iter().zip(phase.as_slice()) {
            prop_assert!((a - b - offset).abs() < 1e-6);
        }
    }

    #[test]
    fn lifting_is_idempotent(period in 8.0f64..32.0, theta in 0.0f64..PI) {
        let phase = carrier_phase(40, period, theta, 1.0);
        let first = orientation_to_direction(&ground_truth_orientation(&phase)).unwrap().direction;
        let second = orientation_to_direction(&first.to_orientation()).unwrap().direction;
        let (err, _) = branch_aligned_error(&second, &first, 0).unwrap();
        prop_assert!(err < 1e-9);
    }

    #[test]
    fn quadrature_is_linear_and_flips_with_the_branch(
        a in -3.0f64..3.0,
        b in -3.0f64..3.0,
        period in 8.0f64..24.0,
        theta in 0.0f64..PI,
    ) {
        let phase = carrier_phase(32, period, theta, 0.5);
        let beta = ground_truth_direction(&phase);
        let s1 = render_fringe(&phase);
        let s2 = phase.map(|p| (2.0 * p).sin());
        let mix = s1.zip_map(&s2, |x, y| a * x + b * y).unwrap();
        let q1 = quadrature(&s1, &beta).unwrap();
        let q2 = quadrature(&s2, &beta).unwrap();
        let q = quadrature(&mix, &beta).unwrap();
        for i in 0..q.len() {
            let expected = a * q1.as_slice()[i] + b * q2.as_slice()[i];
            prop_assert!((q.as_slice()[i] - expected).abs() < 1e-10);
        }
        let flipped = quadrature(&s1, &beta.flipped()).unwrap();
        for (x, y) in flipped.as_slice().iter().zip(q1.as_slice()) {
            prop_assert!((x + y).abs() < 1e-10);
        }
    }

    #[test]
    fn network_preserves_spatial_size(paths in 2usize..4, hm in 1usize..4, wm in 1usize..4, seed in 0u64..1000) {
        let cfg = NetworkConfig { paths, filters: 2, blocks_per_path: 1, kernel_size: 3 };
        let unit = 1 << (paths - 1);
        let (h, w) = (hm * unit * 2, wm * unit * 2);
        let weights = build_network(cfg, seed).unwrap();
        let img = RealImage::from_fn(h, w, |x, y| ((x * 7 + y * 3) as f64 * 0.37).cos());
        let out = forward(&weights, &img).unwrap();
        prop_assert_eq!(out.sin2.dims(), (h, w));
        prop_assert_eq!(out.cos2.dims(), (h, w));
        prop_assert!(loss_mse(&out, &out).unwrap() == 0.0);
        let zero = OrientationEncoding::new(RealImage::zeros(h, w), RealImage::zeros(h, w)).unwrap();
        prop_assert!(loss_mse(&out, &zero).unwrap() >= 0.0);
    }

    #[test]
    fn containers_round_trip_f32_values(rows in 1usize..9, cols in 1usize..9, channels in 1usize..4, seed in any::<u64>()) {
        let mut state = seed;
        let mut next = || {
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            ((state >> 40) as f32 / (1u32 << 24) as f32 * 20.0 - 10.0) as f64
        };
        let chans: Vec<RealImage> = (0..channels)
            .map(|_| RealImage::new(rows, cols, (0..rows * cols).map(|_| next()).collect()).unwrap())
            .collect();
        let stack = ImageStack::new(chans).unwrap();
        let bytes = encode_container(&stack);
        prop_assert_eq!(decode_container(&bytes).unwrap(), stack);
        prop_assert_eq!(encode_container(&decode_container(&bytes).unwrap()), bytes);
    }
}

#[test]
fn weights_round_trip_after_f32_rounding() {
    let cfg = NetworkConfig { paths: 3, filters: 3, blocks_per_path: 2, kernel_size: 3 };
    let mut w = build_network(cfg, 42).unwrap();
    for t in &mut w.tensors {
        t.data.iter_mut().for_each(|v| *v = *v as f32 as f64);
    }
    let bytes = encode_weights(&w).unwrap();
    assert_eq!(decode_weights(&bytes).unwrap(), w);
    assert_eq!(encode_weights(&decode_weights(&bytes).unwrap()).unwrap(), bytes);
}

#[test]
fn classical_chain_demodulates_a_closed_fringe_pattern() {
    let phase = carrier_phase(128, 14.0, 0.4, 1.0);
    let fringe = prefilter_auto(&render_fringe(&phase)).unwrap();
    let fo = fringeproc::classic::cpfg_orientation(&fringe, fringeproc::classic::Window::new(2).unwrap()).unwrap();
    let lift = orientation_to_direction(&fo).unwrap();
    let truth = ground_truth_direction(&phase);
    let (_, flipped) = branch_aligned_error(&lift.direction, &truth, 8).unwrap();
    let beta: DirectionMap = if flipped { lift.direction.flipped() } else { lift.direction.clone() };
    let interior_mismatch = (8..120)
        .flat_map(|y| (8..120).map(move |x| (x, y)))
        .filter(|&(x, y)| circular_distance(beta.angles().get(x, y), truth.angles().get(x, y), TAU) > PI / 2.0)
        .count();
    assert_eq!(interior_mismatch, 0);
    let d = demodulate(&fringe, &beta).unwrap();
    assert!(rmse_phase(&d.unwrapped, &phase, 16).unwrap() < 0.15);
}
