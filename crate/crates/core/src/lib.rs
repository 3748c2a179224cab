pub mod adam;
pub mod augment;
pub mod checkpoint;
pub mod cli;
pub mod dataset;
pub mod error;
pub mod filters;
pub mod gradcheck;
pub mod metrics;
pub mod nn;
pub mod pipeline;
pub mod raster;
pub mod synthetic;
pub mod tensor;
pub mod trainer;
pub mod unet;

pub use error::{Error, Result};
