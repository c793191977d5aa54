//! Monolithic and fixed-stress finite element solvers for linear
//! thermo-poroelasticity, and POD reduced order models built on them.

pub mod assembly;
pub mod error;
pub mod experiments;
pub mod hf;
pub mod io;
pub mod linalg;
pub mod mesh;
pub mod pod;
pub mod problem;
pub mod rom;

pub use error::{Error, Result};
