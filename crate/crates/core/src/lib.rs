pub mod activations;
pub mod checkpoint;
pub mod encoding;
pub mod error;
pub mod io;
pub mod metrics;
pub mod network;
pub mod optim;
pub mod signal;
pub mod spectral;
pub mod tasks;
pub mod tensor;

pub use error::{Error, Result};
