pub mod autodiff;
pub mod checkpoint;
pub mod cli;
pub mod error;
pub mod fields;
pub mod mesher;
pub mod metrics;
pub mod render;
pub mod rng;
pub mod scene;
pub mod trainer;

pub use error::{Error, Result};
