pub mod ckks;
pub mod dp;
mod error;
pub mod experiment;
pub mod hebackend;
pub mod mdp;
pub mod protocol;
pub mod ring;
pub mod tdlearn;

pub use error::{Error, Result};
