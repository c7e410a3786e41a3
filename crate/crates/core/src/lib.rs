//! Spectral shape correspondence with diffusion-synchronised refinement.

pub mod correspondence;
pub mod descriptors;
pub mod energies;
pub mod error;
pub mod evaluation;
pub mod mesh;
pub mod optimizer;
pub mod pipeline;
pub mod shape;
pub mod spectral;
pub mod synthetic;

pub use error::{Error, Result};
pub use mesh::TriangleMesh;
pub use shape::Shape;
