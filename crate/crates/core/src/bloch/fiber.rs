use num_complex::Complex64;

use crate::error::{invalid, Result};
use crate::lattice::{FourierField, PlaneWaveBasis};
use crate::linalg::{hermitian_eigen, weighted_projector, CMat, Eigen};

/// The mean-field operator restricted to one plane-wave basis, diagonalized.
///
/// Used both for the unit-cell fibers at ξ and for the Γ-point supercell
/// problem (a basis of period L).
#[derive(Debug, Clone)]
pub struct BlochFiber {
    basis: PlaneWaveBasis,
    extent: usize,
    table: Vec<Option<u32>>,
    hamiltonian: CMat,
    eigen: Eigen,
}

/// H_ij = ½|q_i|²δ_ij + V̂(g_i - g_j).
pub fn hamiltonian_matrix(basis: &PlaneWaveBasis, table: &[Option<u32>], potential: &FourierField) -> CMat {
    let n = basis.len();
    let coeffs = potential.coeffs();
    let mut h = CMat::zeros(n, n);
    for j in 0..n {
        for i in 0..n {
            if let Some(idx) = table[i * n + j] {
                h[(i, j)] = coeffs[idx as usize];
            }
        }
        h[(j, j)] += Complex64::new(basis.kinetic()[j], 0.0);
    }
    h
}

pub fn assemble_fiber(basis: PlaneWaveBasis, potential: &FourierField) -> Result<BlochFiber> {
    let table = basis.difference_table(potential.extent());
    assemble_with_table(basis, table, potential)
}

pub(crate) fn assemble_with_table(
    basis: PlaneWaveBasis,
    table: Vec<Option<u32>>,
    potential: &FourierField,
) -> Result<BlochFiber> {
    if basis.is_empty() {
        return invalid("plane-wave basis is empty");
    }
    if basis.period() != potential.period() {
        return invalid(format!(
            "basis period {} does not match potential period {}",
            basis.period(),
            potential.period()
        ));
    }
    let hamiltonian = hamiltonian_matrix(&basis, &table, potential);
    let eigen = hermitian_eigen(&hamiltonian)?;
    Ok(BlochFiber {
        basis,
        extent: potential.extent(),
        table,
        hamiltonian,
        eigen,
    })
}

impl BlochFiber {
    /// Rotates the eigenvectors of a degenerate group of levels so that they
    /// diagonalize the kinetic operator within the group; returns its
    /// ascending eigenvalues there.
    pub(crate) fn diagonalize_kinetic_within(&mut self, group: &[usize]) -> Result<Vec<f64>> {
        let n = self.basis.len();
        let m = group.len();
        let kin = self.basis.kinetic();
        let mut u = CMat::zeros(n, m);
        for (c, &j) in group.iter().enumerate() {
            for i in 0..n {
                u[(i, c)] = self.eigen.vectors[(i, j)];
            }
        }
        let mut ku = u.clone();
        for c in 0..m {
            for i in 0..n {
                ku[(i, c)] *= kin[i];
            }
        }
        let w = hermitian_eigen(&(u.adjoint() * &ku))?;
        let rotated = &u * &w.vectors;
        for (c, &j) in group.iter().enumerate() {
            for i in 0..n {
                self.eigen.vectors[(i, j)] = rotated[(i, c)];
            }
        }
        Ok(w.values)
    }

    pub fn kpoint(&self) -> [f64; 3] {
        self.basis.kpoint()
    }

    pub fn basis(&self) -> &PlaneWaveBasis {
        &self.basis
    }

    pub fn hamiltonian(&self) -> &CMat {
        &self.hamiltonian
    }

    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigen.values
    }

    /// Orthonormal eigenvectors as columns, in plane-wave coefficients.
    pub fn eigenvectors(&self) -> &CMat {
        &self.eigen.vectors
    }

    pub fn band_count(&self) -> usize {
        self.eigen.values.len()
    }

    pub fn extent(&self) -> usize {
        self.extent
    }

    pub(crate) fn table(&self) -> &[Option<u32>] {
        &self.table
    }

    /// Σ_n occ_n |e_n⟩⟨e_n| in the plane-wave basis.
    pub fn density_matrix(&self, occupations: &[f64]) -> CMat {
        weighted_projector(&self.eigen.vectors, occupations)
    }

    /// Σ_n occ_n ⟨e_n, -½Δ e_n⟩, exact in Fourier space.
    pub fn kinetic_energy(&self, occupations: &[f64]) -> f64 {
        let kin = self.basis.kinetic();
        let v = &self.eigen.vectors;
        let mut total = 0.0;
        for (n, occ) in occupations.iter().enumerate() {
            if *occ == 0.0 {
                continue;
            }
            let mut band = 0.0;
            for (i, k) in kin.iter().enumerate() {
                band += k * v[(i, n)].norm_sqr();
            }
            total += occ * band;
        }
        total
    }

    /// Adds `weight` times the density of the occupied states to `out`.
    pub fn accumulate_density(&self, occupations: &[f64], weight: f64, out: &mut FourierField) {
        let p = self.density_matrix(occupations);
        accumulate_matrix_density(&self.table, &p, weight, out);
    }
}

/// ρ̂(G) += weight · Σ_{g_i - g_j = G} P_ij, for G inside the cube of `out`.
pub(crate) fn accumulate_matrix_density(table: &[Option<u32>], p: &CMat, weight: f64, out: &mut FourierField) {
    let n = p.nrows();
    let coeffs = out.coeffs_mut();
    for j in 0..n {
        for i in 0..n {
            if let Some(idx) = table[i * n + j] {
                coeffs[idx as usize] += p[(i, j)] * weight;
            }
        }
    }
}

/// Density of a plane-wave density matrix P of the given basis, normalized
/// for an L-periodic box (basis functions e^{iq·x}/L^{3/2}).
pub fn density_of_matrix(basis: &PlaneWaveBasis, p: &CMat, extent: usize) -> FourierField {
    let table = basis.difference_table(extent);
    let mut out = FourierField::zeros(basis.period(), extent);
    accumulate_matrix_density(&table, p, 1.0 / (basis.period() as f64).powi(3), &mut out);
    out
}

/// Σ_ij (kinetic_i δ_ij) P_ii.
pub fn kinetic_of_matrix(basis: &PlaneWaveBasis, p: &CMat) -> f64 {
    basis.kinetic().iter().enumerate().map(|(i, k)| k * p[(i, i)].re).sum()
}
