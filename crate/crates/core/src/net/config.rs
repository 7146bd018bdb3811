use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Shape of the multi-path network.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct NetworkConfig {
    pub paths: usize,
    pub filters: usize,
    pub blocks_per_path: usize,
    pub kernel_size: usize,
}

impl Default for NetworkConfig {
    fn default() -> Self {
        Self {
            paths: 2,
            filters: 16,
            blocks_per_path: 2,
            kernel_size: 3,
        }
    }
}

impl NetworkConfig {
    pub fn validate(&self) -> Result<()> {
        if !(2..=5).contains(&self.paths) {
            return Err(Error::param("paths", format!("{} is outside [2, 5]", self.paths)));
        }
        if self.filters == 0 {
            return Err(Error::param("filters", "must be positive"));
        }
        if self.blocks_per_path == 0 {
            return Err(Error::param("blocks_per_path", "must be at least 1"));
        }
        if self.kernel_size % 2 == 0 {
            return Err(Error::param("kernel_size", format!("{} is not odd", self.kernel_size)));
        }
        Ok(())
    }

    /// Both image sides must be divisible by this.
    pub fn divisor(&self) -> usize {
        1 << (self.paths - 1)
    }

    pub fn check_input(&self, rows: usize, cols: usize) -> Result<()> {
        let d = self.divisor();
        if rows % d != 0 || cols % d != 0 || rows == 0 || cols == 0 {
            return Err(Error::InvalidDimensions {
                rows,
                cols,
                reason: format!("both sides must be positive multiples of {d} for {} paths", self.paths),
            });
        }
        Ok(())
    }
}

/// Optimizer and schedule settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub initial_lr: f64,
    pub lr_drop_factor: f64,
    pub lr_drop_period_epochs: usize,
    pub epochs: usize,
    pub batch_size: usize,
    pub adam_beta1: f64,
    pub adam_beta2: f64,
    pub adam_eps: f64,
    pub shuffle_seed: u64,
    /// Border excluded when scoring validation orientation error.
    pub val_border: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            initial_lr: 1e-4,
            lr_drop_factor: 5.0,
            lr_drop_period_epochs: 5,
            epochs: 30,
            batch_size: 1,
            adam_beta1: 0.9,
            adam_beta2: 0.999,
            adam_eps: 1e-8,
            shuffle_seed: 0,
            val_border: 0,
        }
    }
}

impl TrainConfig {
    /// Learning rate used during 1-based `epoch`.
    pub fn lr_for_epoch(&self, epoch: usize) -> f64 {
        let drops = (epoch.max(1) - 1) / self.lr_drop_period_epochs;
        self.initial_lr / self.lr_drop_factor.powi(drops as i32)
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("initial_lr", self.initial_lr),
            ("lr_drop_factor", self.lr_drop_factor),
            ("adam_eps", self.adam_eps),
        ];
        for (name, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::param(name, format!("{v} is not positive")));
            }
        }
        for (name, v) in [("adam_beta1", self.adam_beta1), ("adam_beta2", self.adam_beta2)] {
            if !(0.0..1.0).contains(&v) {
                return Err(Error::param(name, format!("{v} is outside [0, 1)")));
            }
        }
        if self.lr_drop_period_epochs == 0 || self.epochs == 0 || self.batch_size == 0 {
            return Err(Error::param("epochs", "epoch counts and batch size must be positive"));
        }
        Ok(())
    }
}
