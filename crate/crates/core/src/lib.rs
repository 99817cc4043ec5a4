pub mod analysis;
pub mod catalog;
pub mod deformation;
pub mod error;
pub mod grid;
pub mod operators;
pub mod pipeline;
pub mod poly;
pub mod residual;
pub mod spectral;

pub use error::{Error, Result};
