pub mod cli;
pub mod convergence;
pub mod error;
pub mod io;
pub mod multiplier;
pub mod phase;
pub mod propagator;
pub mod spectral;
pub mod summation;

pub use error::{Error, Result};
