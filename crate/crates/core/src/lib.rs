//! Procedural 3D shape synthesis and evolutionary search over the
//! generation policy.

pub mod error;
pub mod geometry;
pub mod seed;

pub use error::{Error, Result};
pub mod policy;
pub mod meshing;
pub mod sampling;
pub mod datasetgen;
pub mod surrogate;
pub mod evolution;
