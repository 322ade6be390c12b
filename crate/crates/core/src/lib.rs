//! Quantum relative entropy optimization through semidefinite approximations
//! of the matrix logarithm.
//!
//! Entropic functions are compiled into linear matrix inequalities built from
//! a Gauss-Legendre rational approximation of `log`, then solved with an
//! embedded interior-point backend.

pub mod conic;
pub mod entrcones;
pub mod error;
pub mod qmat;
pub mod quadrature;
pub mod quantinfo;

pub use error::{Error, Result};
