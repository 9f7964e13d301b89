pub mod clustering;
pub mod error;
pub mod estimation;
pub mod experiments;
pub mod io;
pub mod jump;
pub mod linalg;
pub mod markov;
pub mod reduction;
pub mod rng;
pub mod spectral;

pub use error::{Error, Result};
