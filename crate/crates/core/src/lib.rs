pub mod error;
pub mod tensor;

pub use error::{Error, Result};
pub mod spline;
pub mod graph;
pub mod encoder;
mod params;
pub mod flow;
pub mod objective;
pub mod evaluation;
pub mod data;
pub mod model;
pub mod config;
pub mod train;
pub mod checkpoint;
pub mod pipeline;
