//! Numerical laboratory for two-dimensional lattice Schrödinger operators in
//! random magnetic fields.

pub mod current;
pub mod ensemble;
pub mod error;
pub mod gauge;
pub mod lattice;
pub mod operator;
pub mod randomfield;
pub mod regularity;
pub mod rng;
pub mod verify;

pub use error::{Error, Result};
