//! Weights, forward pass with an optional tape, and reverse-mode gradients.

use rand::Rng;

use super::config::NetworkConfig;
use super::layers::{self, Act};
use crate::error::{Error, Result};
use crate::image::RealImage;
use crate::orientation::{decode_orientation, OrientationEncoding, OrientationMap, MIN_ENCODING_NORM_SQR};
use crate::sim::rng_from_seed;

/// One named parameter tensor.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    pub name: String,
    pub shape: Vec<usize>,
    pub data: Vec<f64>,
}

/// All network parameters together with the configuration that shaped them.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelWeights {
    pub config: NetworkConfig,
    pub tensors: Vec<Tensor>,
}

/// Per-tensor gradients, parallel to [`ModelWeights::tensors`].
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients(pub Vec<Vec<f64>>);

impl Gradients {
    pub fn zeros_like(w: &ModelWeights) -> Self {
        Self(w.tensors.iter().map(|t| vec![0.0; t.data.len()]).collect())
    }

    pub fn add_scaled(&mut self, other: &Gradients, scale: f64) {
        for (a, b) in self.0.iter_mut().zip(&other.0) {
            for (x, y) in a.iter_mut().zip(b) {
                *x += scale * y;
            }
        }
    }
}

/// Expected tensor names and shapes, in storage order.
pub fn tensor_layout(cfg: &NetworkConfig) -> Vec<(String, Vec<usize>)> {
    let (f, k) = (cfg.filters, cfg.kernel_size);
    let mut out = Vec::new();
    for p in 0..cfg.paths {
        out.push((format!("path{p}.in.weight"), vec![f, 1, k, k]));
        out.push((format!("path{p}.in.bias"), vec![f]));
        for b in 0..cfg.blocks_per_path {
            for c in 1..=2 {
                out.push((format!("path{p}.block{b}.conv{c}.weight"), vec![f, f, k, k]));
                out.push((format!("path{p}.block{b}.conv{c}.bias"), vec![f]));
            }
        }
    }
    out.push(("head.weight".into(), vec![2, cfg.paths * f, k, k]));
    out.push(("head.bias".into(), vec![2]));
    out
}

/// Index helpers into the flat tensor list.
struct Idx {
    per_path: usize,
    paths: usize,
}

impl Idx {
    fn new(cfg: &NetworkConfig) -> Self {
        Self {
            per_path: 2 + 4 * cfg.blocks_per_path,
            paths: cfg.paths,
        }
    }
    fn input(&self, p: usize) -> usize {
        p * self.per_path
    }
    fn conv(&self, p: usize, b: usize, c: usize) -> usize {
        p * self.per_path + 2 + 4 * b + 2 * c
    }
    fn head(&self) -> usize {
        self.paths * self.per_path
    }
}

/// Builds a network with Glorot-uniform kernels and zero biases.
pub fn build_network(cfg: NetworkConfig, init_seed: u64) -> Result<ModelWeights> {
    cfg.validate()?;
    let mut rng = rng_from_seed(init_seed);
    let tensors = tensor_layout(&cfg)
        .into_iter()
        .map(|(name, shape)| {
            let n: usize = shape.iter().product();
            let data = if shape.len() == 4 {
                let rf = shape[2] * shape[3];
                let limit = (6.0 / ((shape[1] + shape[0]) * rf) as f64).sqrt();
                (0..n).map(|_| rng.gen_range(-limit..limit)).collect()
            } else {
                vec![0.0; n]
            };
            Tensor { name, shape, data }
        })
        .collect();
    Ok(ModelWeights { config: cfg, tensors })
}

impl ModelWeights {
    pub fn parameter_count(&self) -> usize {
        self.tensors.iter().map(|t| t.data.len()).sum()
    }

    /// Checks names, shapes and finiteness against the embedded configuration.
    pub fn audit(&self) -> Result<()> {
        self.config.validate()?;
        let layout = tensor_layout(&self.config);
        if layout.len() != self.tensors.len() {
            return Err(Error::ShapeAudit {
                name: "<table>".into(),
                reason: format!("expected {} tensors, found {}", layout.len(), self.tensors.len()),
            });
        }
        for ((name, shape), t) in layout.iter().zip(&self.tensors) {
            if *name != t.name || *shape != t.shape {
                return Err(Error::ShapeAudit {
                    name: t.name.clone(),
                    reason: format!("expected {name} with shape {shape:?}, found shape {:?}", t.shape),
                });
            }
            if t.data.len() != shape.iter().product::<usize>() {
                return Err(Error::ShapeAudit {
                    name: t.name.clone(),
                    reason: format!("holds {} values for shape {shape:?}", t.data.len()),
                });
            }
            if let Some(i) = t.data.iter().position(|v| !v.is_finite()) {
                return Err(Error::NonFinite { index: i });
            }
        }
        Ok(())
    }
}

struct BlockTape {
    input: Act,
    z1: Act,
    r1: Act,
    sum: Act,
}

struct PathTape {
    pre_in: Act,
    pools: Vec<((usize, usize, usize), Vec<usize>)>,
    blocks: Vec<BlockTape>,
}

struct Tape {
    input: Act,
    paths: Vec<PathTape>,
    concat: Act,
}

fn image_to_act(img: &RealImage) -> Act {
    Act {
        c: 1,
        h: img.rows(),
        w: img.cols(),
        data: img.as_slice().to_vec(),
    }
}

fn run(w: &ModelWeights, img: &RealImage, keep: bool) -> Result<(Act, Option<Tape>)> {
    let cfg = w.config;
    cfg.check_input(img.rows(), img.cols())?;
    let (f, k) = (cfg.filters, cfg.kernel_size);
    let ix = Idx::new(&cfg);
    let t = &w.tensors;
    let x = image_to_act(img);
    let mut concat = Act::zeros(cfg.paths * f, x.h, x.w);
    let mut path_tapes = Vec::new();
    for p in 0..cfg.paths {
        let pre_in = layers::conv_forward(&x, &t[ix.input(p)].data, &t[ix.input(p) + 1].data, f, k);
        let mut h = layers::relu(&pre_in);
        let mut pools = Vec::new();
        for _ in 0..p {
            let shape = (h.c, h.h, h.w);
            let (out, arg) = layers::maxpool_forward(&h);
            if keep {
                pools.push((shape, arg));
            }
            h = out;
        }
        let mut blocks = Vec::new();
        for b in 0..cfg.blocks_per_path {
            let (c1, c2) = (ix.conv(p, b, 0), ix.conv(p, b, 1));
            let z1 = layers::conv_forward(&h, &t[c1].data, &t[c1 + 1].data, f, k);
            let r1 = layers::relu(&z1);
            let mut sum = layers::conv_forward(&r1, &t[c2].data, &t[c2 + 1].data, f, k);
            for (s, v) in sum.data.iter_mut().zip(&h.data) {
                *s += v;
            }
            let next = layers::relu(&sum);
            if keep {
                blocks.push(BlockTape { input: h, z1, r1, sum });
            }
            h = next;
        }
        let up = layers::upsample_forward(&h, 1 << p);
        concat.data[p * f * x.plane()..(p + 1) * f * x.plane()].copy_from_slice(&up.data);
        if keep {
            path_tapes.push(PathTape { pre_in, pools, blocks });
        }
    }
    let h = ix.head();
    let out = layers::conv_forward(&concat, &t[h].data, &t[h + 1].data, 2, k);
    let tape = keep.then(|| Tape {
        input: x,
        paths: path_tapes,
        concat,
    });
    Ok((out, tape))
}

fn act_to_encoding(out: Act) -> OrientationEncoding {
    let n = out.plane();
    let mut data = out.data;
    let cos = data.split_off(n);
    OrientationEncoding {
        sin2: RealImage::new(out.h, out.w, data).expect("network output is finite-sized"),
        cos2: RealImage::new(out.h, out.w, cos).expect("network output is finite-sized"),
    }
}

/// Deterministic forward pass; channel 0 is `sin 2FO`, channel 1 `cos 2FO`.
pub fn forward(w: &ModelWeights, img: &RealImage) -> Result<OrientationEncoding> {
    let (out, _) = run(w, img, false)?;
    Ok(act_to_encoding(out))
}

/// Mean over both channels and all pixels of the squared difference.
pub fn loss_mse(pred: &OrientationEncoding, target: &OrientationEncoding) -> Result<f64> {
    pred.check_same_dims(target)?;
    let n = 2 * pred.sin2.len();
    let ss = |a: &RealImage, b: &RealImage| -> f64 { a.as_slice().iter().zip(b.as_slice()).map(|(p, t)| (p - t).powi(2)).sum() };
    Ok((ss(&pred.sin2, &target.sin2) + ss(&pred.cos2, &target.cos2)) / n as f64)
}

/// Loss and exact gradients of [`loss_mse`] with respect to every tensor.
pub fn backward(w: &ModelWeights, img: &RealImage, target: &OrientationEncoding) -> Result<(f64, Gradients)> {
    let (out, tape) = run(w, img, true)?;
    let tape = tape.expect("tape requested");
    let pred = act_to_encoding(out.clone());
    let loss = loss_mse(&pred, target)?;

    let cfg = w.config;
    let (f, k) = (cfg.filters, cfg.kernel_size);
    let ix = Idx::new(&cfg);
    let t = &w.tensors;
    let mut g = Gradients::zeros_like(w);
    let n = out.data.len() as f64;
    let tgt = target.sin2.as_slice().iter().chain(target.cos2.as_slice());
    let d_out = Act {
        data: out.data.iter().zip(tgt).map(|(p, t)| 2.0 * (p - t) / n).collect(),
        ..out
    };

    let h = ix.head();
    let (gw, rest) = g.0.split_at_mut(h + 1);
    let d_concat = layers::conv_backward(&tape.concat, &t[h].data, &d_out, k, &mut gw[h], &mut rest[0], true).expect("input grad requested");

    let plane = tape.input.plane();
    for (p, pt) in tape.paths.iter().enumerate().rev() {
        let d_up = Act {
            c: f,
            h: tape.input.h,
            w: tape.input.w,
            data: d_concat.data[p * f * plane..(p + 1) * f * plane].to_vec(),
        };
        let mut dh = layers::upsample_backward(&d_up, 1 << p);
        for (b, bt) in pt.blocks.iter().enumerate().rev() {
            layers::relu_backward(&bt.sum, &mut dh);
            let (c1, c2) = (ix.conv(p, b, 0), ix.conv(p, b, 1));
            let (lo, hi) = g.0.split_at_mut(c2 + 1);
            let mut dr1 = layers::conv_backward(&bt.r1, &t[c2].data, &dh, k, &mut lo[c2], &mut hi[0], true).expect("input grad requested");
            layers::relu_backward(&bt.z1, &mut dr1);
            let (lo, hi) = g.0.split_at_mut(c1 + 1);
            let dx = layers::conv_backward(&bt.input, &t[c1].data, &dr1, k, &mut lo[c1], &mut hi[0], true).expect("input grad requested");
            for (a, v) in dh.data.iter_mut().zip(&dx.data) {
                *a += v;
            }
        }
        for (shape, arg) in pt.pools.iter().rev() {
            dh = layers::maxpool_backward(*shape, arg, &dh);
        }
        layers::relu_backward(&pt.pre_in, &mut dh);
        let i = ix.input(p);
        let (lo, hi) = g.0.split_at_mut(i + 1);
        layers::conv_backward(&tape.input, &t[i].data, &dh, k, &mut lo[i], &mut hi[0], false);
    }
    Ok((loss, g))
}

/// Forward pass, per-pixel renormalization, then decoding to `[0, pi)`.
/// Pixels whose raw output norm is too small to carry an angle are invalid.
pub fn infer_orientation(w: &ModelWeights, img: &RealImage) -> Result<OrientationMap> {
    let enc = forward(w, img)?;
    let (rows, cols) = enc.dims();
    let mut s = enc.sin2.into_vec();
    let mut c = enc.cos2.into_vec();
    for (a, b) in s.iter_mut().zip(c.iter_mut()) {
        let n2 = *a * *a + *b * *b;
        if n2 >= MIN_ENCODING_NORM_SQR {
            let n = n2.sqrt();
            *a /= n;
            *b /= n;
        }
    }
    let enc = OrientationEncoding::new(RealImage::new(rows, cols, s)?, RealImage::new(rows, cols, c)?)?;
    Ok(decode_orientation(&enc))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::orientation::encode_orientation;
    use crate::sim::{gen_object_phase_gaussians, ground_truth_orientation, render_fringe, GaussianRanges};

    fn tiny() -> NetworkConfig {
        NetworkConfig {
            paths: 2,
            filters: 2,
            blocks_per_path: 1,
            kernel_size: 3,
        }
    }

    fn sample(rows: usize, seed: u64) -> (RealImage, OrientationEncoding) {
        let phase = gen_object_phase_gaussians(rows, rows, seed, &GaussianRanges::default_for(rows, rows)).unwrap();
        let enc = encode_orientation(&ground_truth_orientation(&phase));
        (render_fringe(&phase), enc)
    }

    #[test]
    fn output_shape_matches_input() {
        let w = build_network(NetworkConfig::default(), 1).unwrap();
        for side in [64, 96] {
            let img = RealImage::from_fn(side, side, |x, y| ((x + 2 * y) as f64 * 0.3).cos());
            assert_eq!(forward(&w, &img).unwrap().dims(), (side, side));
        }
        let w3 = build_network(NetworkConfig { paths: 3, ..tiny() }, 1).unwrap();
        assert_eq!(forward(&w3, &RealImage::zeros(12, 20)).unwrap().dims(), (12, 20));
        assert!(forward(&w3, &RealImage::zeros(12, 18)).is_err());
    }

    #[test]
    fn wide_architecture_is_constructible() {
        let cfg = NetworkConfig { paths: 2, filters: 110, blocks_per_path: 2, kernel_size: 3 };
        let w = build_network(cfg, 0).unwrap();
        w.audit().unwrap();
        assert_eq!(w.tensors.last().unwrap().shape, vec![2]);
        assert_eq!(w.tensors[w.tensors.len() - 2].shape, vec![2, 220, 3, 3]);
    }

    #[test]
    fn seeded_builds_match() {
        let a = build_network(tiny(), 9).unwrap();
        assert_eq!(a, build_network(tiny(), 9).unwrap());
        assert_ne!(a, build_network(tiny(), 10).unwrap());
        let t = &a.tensors[0];
        let limit = (6.0f64 / (1.0 * 9.0 + 2.0 * 9.0)).sqrt();
        assert!(t.data.iter().all(|v| v.abs() <= limit));
    }

    #[test]
    fn zero_weights_give_head_bias() {
        let mut w = build_network(tiny(), 3).unwrap();
        for t in &mut w.tensors {
            t.data.iter_mut().for_each(|v| *v = 0.0);
        }
        let n = w.tensors.len();
        w.tensors[n - 1].data = vec![0.3, -0.7];
        let img = RealImage::from_fn(8, 8, |x, y| (x * y) as f64 - 10.0);
        let enc = forward(&w, &img).unwrap();
        assert!(enc.sin2.as_slice().iter().all(|&v| v == 0.3));
        assert!(enc.cos2.as_slice().iter().all(|&v| v == -0.7));
    }

    #[test]
    fn forward_is_reproducible() {
        let w = build_network(NetworkConfig::default(), 5).unwrap();
        let (img, _) = sample(32, 2);
        assert_eq!(forward(&w, &img).unwrap(), forward(&w, &img).unwrap());
    }

    #[test]
    fn loss_examples() {
        let one = |v: f64| RealImage::filled(1, 1, v);
        let pred = OrientationEncoding::new(one(1.0), one(0.0)).unwrap();
        let tgt = OrientationEncoding::new(one(0.0), one(1.0)).unwrap();
        assert_eq!(loss_mse(&pred, &tgt).unwrap(), 1.0);
        assert_eq!(loss_mse(&pred, &pred).unwrap(), 0.0);
        let (_, enc) = sample(16, 1);
        let shifted = OrientationEncoding::new(enc.sin2.map(|v| v + 0.5), enc.cos2.map(|v| v + 0.5)).unwrap();
        assert!((loss_mse(&shifted, &enc).unwrap() - 0.25).abs() < 1e-12);
        let small = OrientationEncoding::new(RealImage::zeros(8, 8), RealImage::zeros(8, 8)).unwrap();
        assert!(loss_mse(&small, &enc).is_err());
    }

    #[test]
    fn gradients_match_finite_differences() {
        let mut w = build_network(tiny(), 21).unwrap();
        // Non-zero biases so every bias gradient is exercised away from ReLU kinks.
        let mut rng = rng_from_seed(77);
        for t in &mut w.tensors {
            if t.shape.len() == 1 {
                t.data.iter_mut().for_each(|v| *v = rng.gen_range(-0.2..0.2));
            }
        }
        let (img, target) = sample(8, 4);
        let (_, g) = backward(&w, &img, &target).unwrap();
        let total = w.parameter_count();
        assert!(total >= 50);
        let h = 1e-3;
        let mut checked = 0;
        let mut worst: f64 = 0.0;
        for ti in 0..w.tensors.len() {
            for j in 0..w.tensors[ti].data.len() {
                let orig = w.tensors[ti].data[j];
                w.tensors[ti].data[j] = orig + h;
                let lp = loss_mse(&forward(&w, &img).unwrap(), &target).unwrap();
                w.tensors[ti].data[j] = orig - h;
                let lm = loss_mse(&forward(&w, &img).unwrap(), &target).unwrap();
                w.tensors[ti].data[j] = orig;
                let fd = (lp - lm) / (2.0 * h);
                let rel = (g.0[ti][j] - fd).abs() / fd.abs().max(1e-8);
                worst = worst.max(rel);
                checked += 1;
            }
        }
        assert!(checked >= 50);
        assert!(worst < 1e-3, "worst relative error {worst}");
    }

    #[test]
    fn zero_input_gives_zero_first_layer_kernel_gradient() {
        let w = build_network(tiny(), 2).unwrap();
        let (_, target) = sample(8, 1);
        let (_, g) = backward(&w, &RealImage::zeros(8, 8), &target).unwrap();
        for p in 0..2 {
            let i = Idx::new(&w.config).input(p);
            assert!(g.0[i].iter().all(|&v| v == 0.0));
        }
    }

    #[test]
    fn inference_angles_in_range() {
        let w = build_network(tiny(), 8).unwrap();
        let (img, _) = sample(16, 3);
        let fo = infer_orientation(&w, &img).unwrap();
        assert!(fo.angles().as_slice().iter().all(|&a| (0.0..std::f64::consts::PI).contains(&a)));
    }
}
