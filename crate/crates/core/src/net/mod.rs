//! Multi-path residual CNN mapping a fringe image to the doubled-angle
//! orientation encoding, with Adam training and weight persistence.

mod adam;
mod config;
mod io;
mod layers;
mod model;
mod train;

pub use adam::{adam_step, AdamState};
pub use config::{NetworkConfig, TrainConfig};
pub use io::{decode_weights, encode_weights, load_weights, save_weights, FPAW_MAGIC, FPAW_VERSION};
pub use model::{backward, build_network, forward, infer_orientation, loss_mse, tensor_layout, Gradients, ModelWeights, Tensor};
pub use train::{mean_validation_oe, train, EpochRecord, TrainHistory, TrainSample};
