pub mod calibration;
pub mod error;
pub mod features;
pub mod graph;
pub mod rlr;
pub mod rng;
pub mod samplers;
pub mod tour_sgd;

pub use error::{Error, Result};
