//! Entanglement-entropy laboratory for quasi-free Fermi gases.

pub mod cli;
pub mod entropy_functions;
pub mod error;
pub mod free_kernel;
pub mod lattice_model;
pub mod linalg;
pub mod restricted_projection;
pub mod riesz_projector;
pub mod scaling_fit;
pub mod schatten;
pub mod special;

pub use error::{Error, Result};
