pub mod bernstein;
pub mod control;
pub mod error;
pub mod geometry;
pub mod hermite;
pub mod linalg;
pub mod operator;
pub mod quadrature;
pub mod spectral;
pub mod stats;

pub use error::{Error, Result};
