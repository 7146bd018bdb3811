use super::config::TrainConfig;
use super::model::{Gradients, ModelWeights};
use crate::error::{Error, Result};

/// First/second moment estimates and the step counter.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub m: Vec<Vec<f64>>,
    pub v: Vec<Vec<f64>>,
    pub step: u64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl AdamState {
    pub fn new(w: &ModelWeights, cfg: &TrainConfig) -> Self {
        let zeros: Vec<Vec<f64>> = w.tensors.iter().map(|t| vec![0.0; t.data.len()]).collect();
        Self {
            m: zeros.clone(),
            v: zeros,
            step: 0,
            beta1: cfg.adam_beta1,
            beta2: cfg.adam_beta2,
            eps: cfg.adam_eps,
        }
    }
}

/// One bias-corrected Adam update in place.
pub fn adam_step(w: &mut ModelWeights, grads: &Gradients, state: &mut AdamState, lr: f64) -> Result<()> {
    let shapes_ok = grads.0.len() == w.tensors.len()
        && state.m.len() == w.tensors.len()
        && w.tensors.iter().zip(&grads.0).zip(&state.m).all(|((t, g), m)| t.data.len() == g.len() && m.len() == g.len());
    if !shapes_ok {
        return Err(Error::ShapeMismatch {
            expected: format!("{} tensors matching the weights", w.tensors.len()),
            actual: format!("{} gradient tensors", grads.0.len()),
        });
    }
    state.step += 1;
    let (b1, b2) = (state.beta1, state.beta2);
    let c1 = 1.0 - b1.powi(state.step as i32);
    let c2 = 1.0 - b2.powi(state.step as i32);
    for (ti, t) in w.tensors.iter_mut().enumerate() {
        let (m, v, g) = (&mut state.m[ti], &mut state.v[ti], &grads.0[ti]);
        for j in 0..g.len() {
            m[j] = b1 * m[j] + (1.0 - b1) * g[j];
            v[j] = b2 * v[j] + (1.0 - b2) * g[j] * g[j];
            let mh = m[j] / c1;
            let vh = v[j] / c2;
            t.data[j] -= lr * mh / (vh.sqrt() + state.eps);
        }
    }
    Ok(())
}
