//! The periodic reduced Hartree-Fock problem: Bloch fibers of the mean-field
//! operator, self-consistent ground state, energy per cell and gap data.

mod aufbau;
mod contour;
mod fiber;

pub use aufbau::{aufbau_fill, Filling, Occupations, DEGENERACY_TOL};
pub use contour::{contour_node_count, contour_projector, ContourOptions};
pub use fiber::{assemble_fiber, density_of_matrix, hamiltonian_matrix, kinetic_of_matrix, BlochFiber};
pub(crate) use fiber::{accumulate_matrix_density, assemble_with_table};


use serde::{Deserialize, Serialize};

use crate::charge::{mu_field, NuclearModel};
use crate::coulomb::{d_periodic, hartree_potential};

use crate::error::{invalid, Result};
use crate::lattice::{
    brillouin_mesh, build_basis, build_mesh_basis, high_symmetry_points, FourierField, LatticeConfig, MeshPoint,
    PlaneWaveBasis,
};
use crate::scf::{self, SolverOptions};

/// A periodic crystal: discretization, nuclei and the Coulomb zero-mode
/// constant c.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PeriodicProblem {
    pub lattice: LatticeConfig,
    pub nuclear: NuclearModel,
    #[serde(default)]
    pub zero_mode: f64,
}

impl PeriodicProblem {
    pub fn new(lattice: LatticeConfig, nuclear: NuclearModel) -> Self {
        Self {
            lattice,
            nuclear,
            zero_mode: 0.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.lattice.validate()?;
        self.nuclear.validate()
    }

    pub fn mu(&self) -> Result<FourierField> {
        mu_field(&self.nuclear, 1, self.lattice.extent())
    }

    /// Mean-field potential (ρ - μ) ⋆ G₁ in Hartree.
    pub fn potential(&self, density: &FourierField) -> Result<FourierField> {
        Ok(self.potential_of_charge(&(density - &self.mu()?)))
    }

    pub fn potential_of_charge(&self, charge: &FourierField) -> FourierField {
        hartree_potential(charge, self.zero_mode).scaled(self.lattice.coulomb_scale())
    }

    /// D_{G₁}(f, g) in Hartree.
    pub fn coulomb(&self, f: &FourierField, g: &FourierField) -> Result<f64> {
        Ok(self.lattice.coulomb_scale() * d_periodic(f, g, self.zero_mode)?)
    }
}

/// Starting density of the SCF iteration.
#[derive(Debug, Clone, PartialEq)]
pub enum InitialDensity {
    /// ρ₀ = μ_per.
    Nuclear,
    /// ρ₀ ≡ Z.
    Uniform,
    Field(FourierField),
}

/// A density matrix of the crystal given fiber by fiber on the Brillouin
/// mesh, with the density it generates and the potential its fibers were
/// built from.
#[derive(Debug, Clone)]
pub struct CrystalState {
    pub lattice: LatticeConfig,
    pub mesh: Vec<MeshPoint>,
    pub fibers: Vec<BlochFiber>,
    pub occupations: Vec<Vec<f64>>,
    pub density: FourierField,
    pub potential: FourierField,
    pub electrons_per_cell: f64,
}

impl CrystalState {
    /// (1/L³) Σ_ξ Σ_n occ ⟨e_n, -½Δ e_n⟩.
    pub fn kinetic_energy(&self) -> f64 {
        let w = 1.0 / self.mesh.len() as f64;
        self.fibers
            .iter()
            .zip(&self.occupations)
            .map(|(f, o)| f.kinetic_energy(o))
            .sum::<f64>()
            * w
    }

    /// Largest |γ_ξ² - γ_ξ|_F over the fibers.
    pub fn projector_defect(&self) -> f64 {
        self.fibers
            .iter()
            .zip(&self.occupations)
            .map(|(f, o)| {
                let p = f.density_matrix(o);
                crate::linalg::frobenius(&(&p * &p - &p))
            })
            .fold(0.0, f64::max)
    }
}

/// ℰ⁰_per split into its two terms.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PeriodicEnergy {
    pub kinetic: f64,
    pub hartree: f64,
    pub total: f64,
}

/// Σ⁺_Z, Σ⁻_{Z+1} and the chosen Fermi level.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GapInfo {
    pub z: usize,
    pub sigma_plus: f64,
    pub sigma_minus: f64,
    pub gap_open: bool,
    pub midpoint: f64,
    pub fermi_level: f64,
}

impl GapInfo {
    pub fn width(&self) -> f64 {
        self.sigma_minus - self.sigma_plus
    }

    /// Same gap with a user-chosen Fermi level strictly inside it.
    pub fn with_fermi_level(mut self, fermi_level: f64) -> Result<Self> {
        if !self.gap_open {
            return Err(crate::Error::Precondition("the band gap is closed".into()));
        }
        if !(fermi_level > self.sigma_plus && fermi_level < self.sigma_minus) {
            return invalid(format!(
                "Fermi level {fermi_level} is outside the gap ({}, {})",
                self.sigma_plus, self.sigma_minus
            ));
        }
        self.fermi_level = fermi_level;
        Ok(self)
    }
}

#[derive(Debug, Clone)]
pub struct PeriodicSolution {
    pub state: CrystalState,
    pub gap: GapInfo,
    pub energy: PeriodicEnergy,
    pub iterations: usize,
    pub residuals: Vec<f64>,
}

impl PeriodicSolution {
    /// I⁰_per, the ground-state energy per unit cell.
    pub fn i0_per(&self) -> f64 {
        self.energy.total
    }
}

/// ℰ⁰_per of a crystal state: kinetic Bloch average plus ½D_{G₁}(ρ - μ, ρ - μ).
pub fn periodic_energy(problem: &PeriodicProblem, state: &CrystalState) -> Result<PeriodicEnergy> {
    let kinetic = state.kinetic_energy();
    let charge = &state.density - &problem.mu()?;
    let hartree = 0.5 * problem.coulomb(&charge, &charge)?;
    Ok(PeriodicEnergy {
        kinetic,
        hartree,
        total: kinetic + hartree,
    })
}

/// Mesh bases and their difference tables, built once per run.
struct MeshDiscretization {
    points: Vec<MeshPoint>,
    bases: Vec<PlaneWaveBasis>,
    tables: Vec<Vec<Option<u32>>>,
}

impl MeshDiscretization {
    fn new(lattice: &LatticeConfig) -> Result<Self> {
        let points = brillouin_mesh(lattice.bz_size)?;
        let bases = points
            .iter()
            .map(|p| build_mesh_basis(lattice, p))
            .collect::<Result<Vec<_>>>()?;
        let tables = bases.iter().map(|b| b.difference_table(lattice.extent())).collect();
        Ok(Self { points, bases, tables })
    }

    fn fibers(&self, potential: &FourierField) -> Result<Vec<BlochFiber>> {
        use rayon::prelude::*;
        self.bases
            .par_iter()
            .zip(self.tables.par_iter())
            .map(|(b, t)| assemble_with_table(b.clone(), t.clone(), potential))
            .collect()
    }
}

/// Fills `filling` at the potential V and returns the resulting state.
fn crystal_step(
    problem: &PeriodicProblem,
    mesh: &MeshDiscretization,
    potential: FourierField,
    filling: Filling,
    electrons: f64,
) -> Result<CrystalState> {
    let fibers = mesh.fibers(&potential)?;
    let spectra: Vec<&[f64]> = fibers.iter().map(|f| f.eigenvalues()).collect();
    let occ = aufbau_fill(&spectra, filling)?;
    let weight = 1.0 / mesh.points.len() as f64;
    let mut density = FourierField::zeros(1, problem.lattice.extent());
    // Fixed summation order keeps the density independent of worker count.
    for (f, o) in fibers.iter().zip(&occ.values) {
        f.accumulate_density(o, weight, &mut density);
    }
    Ok(CrystalState {
        lattice: problem.lattice,
        mesh: mesh.points.clone(),
        fibers,
        occupations: occ.values,
        density,
        potential,
        electrons_per_cell: electrons,
    })
}

/// Self-consistent periodic ground state with Z bands filled at every mesh
/// point.
pub fn scf_periodic(
    problem: &PeriodicProblem,
    options: &SolverOptions,
    initial: InitialDensity,
) -> Result<PeriodicSolution> {
    problem.validate()?;
    let z = problem.nuclear.z as usize;
    let extent = problem.lattice.extent();
    let mu = problem.mu()?;
    let mesh = MeshDiscretization::new(&problem.lattice)?;
    if let Some(b) = mesh.bases.iter().find(|b| b.len() < z) {
        return invalid(format!(
            "Z = {z} exceeds the {} plane waves available at k-point {:?}",
            b.len(),
            b.kpoint()
        ));
    }
    let rho0 = match initial {
        InitialDensity::Nuclear => mu.clone(),
        InitialDensity::Uniform => FourierField::constant(1, extent, z as f64),
        InitialDensity::Field(f) => {
            if f.period() != 1 || f.extent() != extent {
                return invalid("initial density must be a unit-cell field on the configured grid");
            }
            f
        }
    };
    let fp = scf::run(rho0, options, |rho| {
        let v = problem.potential_of_charge(&(rho - &mu));
        let state = crystal_step(problem, &mesh, v, Filling::Bands(z), z as f64)?;
        let out = state.density.clone();
        Ok((state, out))
    })?;
    let state = fp.state;
    let energy = periodic_energy(problem, &state)?;
    let gap = check_gap(&state)?;
    Ok(PeriodicSolution {
        state,
        gap,
        energy,
        iterations: fp.iterations,
        residuals: fp.residuals,
    })
}

/// Band edges Σ⁺_Z = max λ_Z and Σ⁻_{Z+1} = min λ_{Z+1}, taken over the
/// Brillouin mesh and the high-symmetry points Γ, X, M, R evaluated at the
/// state's potential.
pub fn check_gap(state: &CrystalState) -> Result<GapInfo> {
    let z = state.electrons_per_cell.round();
    if z < 1.0 || (state.electrons_per_cell - z).abs() > 1e-12 {
        return invalid(format!(
            "gap requires an integer electron count per cell, got {}",
            state.electrons_per_cell
        ));
    }
    let z = z as usize;
    let mut extra = Vec::new();
    for (_, xi) in high_symmetry_points() {
        let basis = build_basis(&state.lattice, xi)?;
        extra.push(assemble_fiber(basis, &state.potential)?);
    }
    let mut sigma_plus = f64::NEG_INFINITY;
    let mut sigma_minus = f64::INFINITY;
    for f in state.fibers.iter().chain(&extra) {
        let l = f.eigenvalues();
        if l.len() < z + 1 {
            return invalid(format!(
                "Z = {z} needs {} bands but only {} are available at k-point {:?}",
                z + 1,
                l.len(),
                f.kpoint()
            ));
        }
        sigma_plus = sigma_plus.max(l[z - 1]);
        sigma_minus = sigma_minus.min(l[z]);
    }
    let midpoint = 0.5 * (sigma_plus + sigma_minus);
    Ok(GapInfo {
        z,
        sigma_plus,
        sigma_minus,
        gap_open: sigma_plus < sigma_minus,
        midpoint,
        fermi_level: midpoint,
    })
}

/// Eigenvalues of the converged mean-field operator at an arbitrary ξ.
pub fn band_energies(state: &CrystalState, xi: [f64; 3]) -> Result<Vec<f64>> {
    let basis = build_basis(&state.lattice, xi)?;
    Ok(assemble_fiber(basis, &state.potential)?.eigenvalues().to_vec())
}

/// Crystal state obtained by filling the fibers of a fixed potential.
pub fn fill_at_potential(
    problem: &PeriodicProblem,
    potential: &FourierField,
    filling: Filling,
) -> Result<CrystalState> {
    problem.validate()?;
    let mesh = MeshDiscretization::new(&problem.lattice)?;
    let state = crystal_step(problem, &mesh, potential.clone(), filling, 0.0)?;
    let electrons = state.occupations.iter().flatten().sum::<f64>() / mesh.points.len() as f64;
    Ok(CrystalState {
        electrons_per_cell: electrons,
        ..state
    })
}
