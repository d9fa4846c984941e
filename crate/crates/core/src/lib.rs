//! Symbolic and numeric analysis of meromorphic affine connections on a
//! coordinate chart of ℂⁿ with a polynomial pole divisor.

pub mod connection;
pub mod error;
pub mod geodesic;
pub mod killing;
pub mod linalg;
pub mod monodromy;
pub mod ode;
pub mod path;
pub mod rational;
pub mod scenario;

pub use error::{Error, Result};
