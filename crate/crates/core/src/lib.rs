pub mod ack;
pub mod bump;
pub mod cover;
pub mod curve;
pub mod error;
pub mod fourier;
pub mod mc;
pub mod quadrature;
pub mod scaling;

pub use error::{Error, Result};
