//! Fringe-pattern orientation estimation and orientation-guided phase
//! demodulation.
//!
//! The crate covers the whole chain from simulated fringes to recovered phase:
//!
//! * [`image`], [`fft`], [`container`]: dense grids, transforms and the FPAI file format.
//! * [`sim`], [`dataset`]: fringe simulation with analytic ground truth and seeded corpora.
//! * [`classic`]: gradient and combined plane-fit/gradient orientation estimators.
//! * [`net`]: a multi-path residual CNN predicting `(sin 2FO, cos 2FO)`, trained from scratch.
//! * [`unwrap`]: reliability-sorted 2-D phase unwrapping and orientation-to-direction lifting.
//! * [`hst`]: spiral-phase quadrature transform and phase demodulation.
//! * [`metrics`]: orientation error, channel RMSE and piston-free phase RMSE.
//! * [`experiment`]: the benchmark sweep and end-to-end pipeline driven by the CLI.

pub mod classic;
pub mod container;
pub mod dataset;
pub mod error;
pub mod experiment;
pub mod fft;
pub mod hst;
pub mod image;
pub mod metrics;
pub mod net;
pub mod orientation;
pub mod sim;
pub mod unwrap;

pub use error::{Error, Result};
pub use image::{ComplexImage, GradientPair, RealImage};
pub use orientation::{DirectionMap, OrientationEncoding, OrientationMap};
pub use rustfft::num_complex::Complex64;
