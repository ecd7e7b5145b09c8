pub mod error;
pub mod eval;
pub mod ingest;
pub mod integrate;
pub mod io;
pub mod learners;
pub mod nn;
pub mod ode;
pub mod pca;
pub mod pde;
pub mod physics;
pub mod rng;
pub mod sampling;
pub mod series;

pub use error::{Error, Result};
