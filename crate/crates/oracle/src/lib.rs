//! Brute-force reference computations: a finite-difference Bloch
//! Hamiltonian, a direct double-sum Coulomb quadrature and random projector
//! constructions. Nothing here shares code with the plane-wave solver.

// `!(x > 0.0)` style checks deliberately reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod coulomb;
mod eigen;
mod projector;

pub use coulomb::oracle_coulomb;
pub use eigen::{oracle_eigensolve, MAX_GRID};
pub use projector::{givens_projector, rotated_projector, oracle_projector_identities, ProjectorReport};

pub use nalgebra::DMatrix;
pub use num_complex::Complex64;

#[derive(Debug, thiserror::Error)]
pub enum OracleError {
    #[error("grid of {0} points per side exceeds the oracle limit")]
    GridTooLarge(usize),
    #[error("invalid input: {0}")]
    Invalid(String),
}
