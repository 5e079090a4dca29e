//! Samplers and rate-function numerics for the two-parameter GEM,
//! Poisson-Dirichlet, and Dirichlet-process family.

pub mod dist;
pub mod error;
pub mod gem;
pub mod harness;
pub mod measure;
pub mod opt;
pub mod perman;
pub mod quad;
pub mod rates;
pub mod report;
pub mod rng;
pub mod stable;
pub mod stats;
pub mod subordinator;

pub use error::{Error, Result};
pub use rng::RandomStream;
