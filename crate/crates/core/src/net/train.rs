use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::adam::{adam_step, AdamState};
use super::config::{NetworkConfig, TrainConfig};
use super::model::{backward, build_network, forward, infer_orientation, loss_mse, Gradients, ModelWeights};
use crate::error::{Error, Result};
use crate::image::RealImage;
use crate::metrics::orientation_error;
use crate::orientation::{OrientationEncoding, OrientationMap};
use crate::sim::{derive_seed, rng_from_seed};

/// One supervised example: network input, encoded target, reference angles.
#[derive(Debug, Clone)]
pub struct TrainSample {
    pub input: RealImage,
    pub target: OrientationEncoding,
    pub reference: OrientationMap,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub lr: f64,
    pub train_loss: f64,
    pub val_loss: f64,
    pub val_oe: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainHistory {
    /// Validation scores of the freshly initialized network.
    pub initial_val_loss: f64,
    pub initial_val_oe: f64,
    pub epochs: Vec<EpochRecord>,
    /// Epoch whose weights were returned.
    pub best_epoch: usize,
}

fn check_set(set: &[TrainSample], dims: (usize, usize)) -> Result<()> {
    for s in set {
        if s.input.dims() != dims || s.target.dims() != dims || s.reference.dims() != dims {
            return Err(Error::ShapeMismatch {
                expected: format!("{}x{} samples", dims.0, dims.1),
                actual: format!("{}x{}", s.input.rows(), s.input.cols()),
            });
        }
    }
    Ok(())
}

/// Mean validation loss and mean orientation error over `set`.
pub fn evaluate(w: &ModelWeights, set: &[TrainSample], border: usize) -> Result<(f64, f64)> {
    let (mut loss, mut oe) = (0.0, 0.0);
    for s in set {
        loss += loss_mse(&forward(w, &s.input)?, &s.target)?;
        oe += orientation_error(&infer_orientation(w, &s.input)?, &s.reference, border)?;
    }
    let n = set.len() as f64;
    Ok((loss / n, oe / n))
}

/// Mean orientation error of `w` over `set`.
pub fn mean_validation_oe(w: &ModelWeights, set: &[TrainSample], border: usize) -> Result<f64> {
    if set.is_empty() {
        return Err(Error::EmptyDataset);
    }
    Ok(evaluate(w, set, border)?.1)
}

/// Trains a freshly built network; `on_epoch` observes each finished epoch.
pub fn train(
    train_set: &[TrainSample],
    val_set: &[TrainSample],
    net_cfg: NetworkConfig,
    cfg: &TrainConfig,
    init_seed: u64,
    mut on_epoch: impl FnMut(&EpochRecord),
) -> Result<(ModelWeights, TrainHistory)> {
    cfg.validate()?;
    let first = train_set.first().ok_or(Error::EmptyDataset)?;
    if val_set.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let dims = first.input.dims();
    check_set(train_set, dims)?;
    check_set(val_set, dims)?;
    net_cfg.check_input(dims.0, dims.1)?;

    let mut w = build_network(net_cfg, init_seed)?;
    let mut state = AdamState::new(&w, cfg);
    let (initial_val_loss, initial_val_oe) = evaluate(&w, val_set, cfg.val_border)?;
    let mut history = TrainHistory {
        initial_val_loss,
        initial_val_oe,
        epochs: Vec::with_capacity(cfg.epochs),
        best_epoch: 0,
    };
    let mut best: Option<(f64, ModelWeights)> = None;
    let mut order: Vec<usize> = (0..train_set.len()).collect();

    for epoch in 1..=cfg.epochs {
        let lr = cfg.lr_for_epoch(epoch);
        order.shuffle(&mut rng_from_seed(derive_seed(cfg.shuffle_seed, epoch as u64)));
        let mut total = 0.0;
        for batch in order.chunks(cfg.batch_size) {
            let mut acc = Gradients::zeros_like(&w);
            for &i in batch {
                let s = &train_set[i];
                let (loss, g) = backward(&w, &s.input, &s.target)?;
                total += loss;
                acc.add_scaled(&g, 1.0 / batch.len() as f64);
            }
            adam_step(&mut w, &acc, &mut state, lr)?;
        }
        let (val_loss, val_oe) = evaluate(&w, val_set, cfg.val_border)?;
        let rec = EpochRecord {
            epoch,
            lr,
            train_loss: total / train_set.len() as f64,
            val_loss,
            val_oe,
        };
        on_epoch(&rec);
        if best.as_ref().map_or(true, |(b, _)| val_loss < *b) {
            best = Some((val_loss, w.clone()));
            history.best_epoch = epoch;
        }
        history.epochs.push(rec);
    }
    let (_, best_w) = best.expect("at least one epoch ran");
    Ok((best_w, history))
}
