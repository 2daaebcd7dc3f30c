//! Cubic lattice geometry: Brillouin-zone meshes, plane-wave bases and
//! Fourier-represented periodic fields.
//!
//! The direct lattice is Z³ with unit cell Γ = [-1/2, 1/2)³, the reciprocal
//! lattice is 2πZ³ and the Brillouin zone is Γ* = [-π, π)³. A supercell of
//! side `L` is Λ_L = [-L/2, L/2)³ and carries the reciprocal mesh (2π/L)Z³.

mod basis;
mod field;

pub use basis::{build_basis, build_mesh_basis, build_supercell_basis, PlaneWaveBasis};
pub use field::{periodize_defect, periodize_samples, FourierField};

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

pub const TWO_PI: f64 = 2.0 * std::f64::consts::PI;

/// Discretization parameters shared by the unit-cell and supercell problems.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LatticeConfig {
    /// Kinetic-energy cutoff in Hartree: a plane wave e^{i(ξ+k)·x} is kept
    /// when ½|ξ+k|² ≤ cutoff.
    pub cutoff: f64,
    /// Brillouin-zone mesh size `L` (L³ points).
    pub bz_size: usize,
    /// Odd number of grid points per unit-cell side.
    pub grid_n: usize,
    /// Lattice constant a in bohr. Geometry stays in units of a; kinetic
    /// energies scale as 1/a² and Coulomb energies as 1/a.
    #[serde(default = "unit_spacing")]
    pub spacing: f64,
}

fn unit_spacing() -> f64 {
    1.0
}

impl LatticeConfig {
    pub fn new(cutoff: f64, bz_size: usize, grid_n: usize) -> Result<Self> {
        let config = Self {
            cutoff,
            bz_size,
            grid_n,
            spacing: 1.0,
        };
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.cutoff > 0.0) || !self.cutoff.is_finite() {
            return invalid(format!("cutoff must be positive, got {}", self.cutoff));
        }
        if !(self.spacing > 0.0) || !self.spacing.is_finite() {
            return invalid(format!("spacing must be positive, got {}", self.spacing));
        }
        if self.bz_size == 0 {
            return invalid("bz_size must be at least 1");
        }
        if self.grid_n.is_multiple_of(2) {
            return invalid(format!("grid_n must be odd, got {}", self.grid_n));
        }
        let needed = Self::min_grid_n(self.cutoff, self.spacing);
        if self.grid_n < needed {
            return invalid(format!(
                "grid_n = {} cannot represent every plane wave below the cutoff (need >= {needed})",
                self.grid_n
            ));
        }
        Ok(())
    }

    /// Largest integer coordinate of a reciprocal vector admitted at any ξ ∈ Γ*.
    pub fn max_index(cutoff: f64, spacing: f64) -> i64 {
        let radius = (2.0 * cutoff).sqrt() * spacing;
        ((radius + std::f64::consts::PI) / TWO_PI).floor() as i64
    }

    pub fn min_grid_n(cutoff: f64, spacing: f64) -> usize {
        2 * Self::max_index(cutoff, spacing) as usize + 1
    }

    /// Smallest grid on which every difference of two basis vectors, and so
    /// every density mode, is represented.
    pub fn full_grid_n(cutoff: f64, spacing: f64) -> usize {
        4 * Self::max_index(cutoff, spacing) as usize + 1
    }

    /// Factor converting cell-unit Coulomb energies and potentials to Hartree.
    pub fn coulomb_scale(&self) -> f64 {
        1.0 / self.spacing
    }

    pub fn with_spacing(mut self, spacing: f64) -> Result<Self> {
        self.spacing = spacing;
        self.validate()?;
        Ok(self)
    }

    /// Half-width of the unit-cell Fourier cube: modes m ∈ [-M, M]³.
    pub fn extent(&self) -> usize {
        (self.grid_n - 1) / 2
    }

    pub fn with_bz_size(mut self, bz_size: usize) -> Self {
        self.bz_size = bz_size;
        self
    }
}

/// A point ξ = 2π·index/size of the mesh (2π/L)Z³ ∩ Γ*.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct MeshPoint {
    pub index: [i64; 3],
    pub size: usize,
}

impl MeshPoint {
    pub fn coords(&self) -> [f64; 3] {
        let step = TWO_PI / self.size as f64;
        self.index.map(|j| j as f64 * step)
    }
}

/// The L³ points of (2π/L)Z³ ∩ [-π, π)³ in lexicographic index order.
pub fn brillouin_mesh(size: usize) -> Result<Vec<MeshPoint>> {
    if size == 0 {
        return invalid("Brillouin-zone mesh size must be at least 1");
    }
    let lo = -(size as i64 / 2);
    let range = lo..lo + size as i64;
    let mut points = Vec::with_capacity(size.pow(3));
    for a in range.clone() {
        for b in range.clone() {
            for c in range.clone() {
                points.push(MeshPoint {
                    index: [a, b, c],
                    size,
                });
            }
        }
    }
    Ok(points)
}

/// High-symmetry points Γ, X, M, R of the simple cubic Brillouin zone.
pub fn high_symmetry_points() -> [(&'static str, [f64; 3]); 4] {
    let pi = std::f64::consts::PI;
    [
        ("G", [0.0, 0.0, 0.0]),
        ("X", [pi, 0.0, 0.0]),
        ("M", [pi, pi, 0.0]),
        ("R", [pi, pi, pi]),
    ]
}

pub(crate) fn norm2(v: [f64; 3]) -> f64 {
    v[0] * v[0] + v[1] * v[1] + v[2] * v[2]
}
