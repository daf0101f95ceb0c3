pub mod config;
pub mod error;
pub mod extremal;
pub mod geometry;
pub mod mappings;
pub mod matrix;
pub mod modulus;
pub mod quadrature;
pub mod run;
pub mod verify;
pub mod weights;

pub use error::{Error, Result};
