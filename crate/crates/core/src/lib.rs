//! Szegő quadrature rules on the unit circle built from the moment data
//! `X_j = <psi0|U^j|psi0>` of a unitary time evolution `U = exp(-i H dt)`.

pub mod codec;
pub mod config;
pub mod error;
pub mod experiments;
pub mod functions;
pub mod krylov;
pub mod linalg;
pub mod pauli;
pub mod rule;
pub mod state;
pub mod baselines;

pub use error::{QsqError, Result};
