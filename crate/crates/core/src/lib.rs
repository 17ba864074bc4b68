pub mod entropy;
pub mod cli;
pub mod decode;
pub mod error;
pub mod eval;
mod io;
pub mod lattice;
pub mod model;
pub mod numerics;

pub use error::{Error, Result};
