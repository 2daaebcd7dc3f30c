//! Plane-wave reduced Hartree-Fock for cubic crystals and supercells with
//! local defects.

// `!(x > 0.0)` style checks deliberately reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bloch;
pub mod charge;
pub mod coulomb;
pub mod error;
pub mod lattice;
pub mod linalg;
pub mod quadrature;
pub mod scf;
pub mod supercell;
pub mod thermo;

pub use error::{Error, Result};
pub use num_complex::Complex64;
