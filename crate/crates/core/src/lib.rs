pub mod blocks;
pub mod census;
pub mod cli;
pub mod error;
pub mod image_io;
pub mod layout;
pub mod metrics;
pub mod network;
pub mod nn;
pub mod rng;
pub mod selfcheck;
pub mod ssm;
pub mod tensor;

pub use error::{Error, FormatError, Result};
pub use tensor::Tensor;
