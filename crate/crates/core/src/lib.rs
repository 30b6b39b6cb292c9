pub mod cavity;
pub mod error;
pub mod evolve;
pub mod linalg;
pub mod msa;
pub mod ode;
pub mod resonance;
pub mod thermal;

pub use error::{Error, Result};
