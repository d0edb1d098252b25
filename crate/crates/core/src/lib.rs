pub mod chart;
pub mod concepts;
pub mod error;
pub mod eval;
pub mod explain;
pub mod operators;
pub mod raster;
pub mod rng;
pub mod scorer;
pub mod segment;
pub mod surrogate;
pub mod synth;

pub use error::{Error, Result};
