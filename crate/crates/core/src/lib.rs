pub mod env;
pub mod error;
pub mod expt;
pub mod lattice;
pub mod muscle;
pub mod ppo;
pub mod rod;

pub use error::{Error, Result};
