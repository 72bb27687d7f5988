pub mod error;
pub mod analysis;
pub mod channel;
pub mod linalg;
pub mod montecarlo;
pub mod optimize;
pub mod quadrature;
pub mod specfun;

pub use error::{Error, Result};
