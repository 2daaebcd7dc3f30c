//! Supercell model on Λ_L with an optional local defect: Γ-point SCF under
//! neutral, Fermi-level or fixed-charge filling.

mod boxqp;
mod frontier;
mod defect;
mod diagnostics;

pub use defect::{decompose_defect, defect_energy, kinetic_part, DefectDecomposition, DefectEnergyReport, DefectState};
pub use diagnostics::{binding_diagnostic, e0_of_q, BindingRow, ChargeCurve, ChargeRow};

use serde::{Deserialize, Serialize};

use crate::bloch::{kinetic_of_matrix, BlochFiber, Filling, GapInfo, PeriodicProblem};
use crate::charge::{mu_field, nu_field, DefectCharge, NuclearModel};
use crate::coulomb::{d_periodic, hartree_potential};
use crate::error::{invalid, Error, Result};
use crate::lattice::{build_supercell_basis, FourierField, LatticeConfig, PlaneWaveBasis};
use crate::linalg::CMat;
use crate::scf::{self, SolverOptions};

/// Supercell of side L built from a periodic problem, with defect ν.
#[derive(Debug, Clone, PartialEq)]
pub struct SupercellProblem {
    pub lattice: LatticeConfig,
    pub nuclear: NuclearModel,
    pub zero_mode: f64,
    pub size: usize,
    pub defect: DefectCharge,
}

impl SupercellProblem {
    pub fn new(periodic: &PeriodicProblem, size: usize, defect: DefectCharge) -> Self {
        Self {
            lattice: periodic.lattice,
            nuclear: periodic.nuclear,
            zero_mode: periodic.zero_mode,
            size,
            defect,
        }
    }

    pub fn perfect(periodic: &PeriodicProblem, size: usize) -> Self {
        Self::new(periodic, size, DefectCharge::default())
    }

    /// Same supercell without the defect.
    pub fn without_defect(&self) -> Self {
        Self {
            defect: DefectCharge::default(),
            ..self.clone()
        }
    }

    pub fn periodic(&self) -> PeriodicProblem {
        PeriodicProblem {
            lattice: self.lattice,
            nuclear: self.nuclear,
            zero_mode: self.zero_mode,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.lattice.validate()?;
        self.nuclear.validate()?;
        if self.size == 0 {
            return invalid("supercell size L must be at least 1");
        }
        self.defect.validate()
    }

    /// Half-width of the supercell Fourier cube.
    pub fn extent(&self) -> usize {
        self.lattice.extent() * self.size
    }

    pub fn neutral_electrons(&self) -> f64 {
        self.nuclear.z as f64 * (self.size as f64).powi(3)
    }

    pub fn basis(&self) -> Result<PlaneWaveBasis> {
        build_supercell_basis(&self.lattice, self.size)
    }

    pub fn mu(&self) -> Result<FourierField> {
        mu_field(&self.nuclear, self.size, self.extent())
    }

    pub fn nu(&self) -> Result<FourierField> {
        nu_field(&self.defect, self.size, self.extent())
    }

    /// D_{G_L}(f, g) in Hartree.
    pub fn coulomb(&self, f: &FourierField, g: &FourierField) -> Result<f64> {
        Ok(self.lattice.coulomb_scale() * d_periodic(f, g, self.zero_mode)?)
    }

    /// Zero-mode share of [`Self::coulomb`].
    pub fn coulomb_zero_mode(&self, f: &FourierField, g: &FourierField) -> f64 {
        self.lattice.coulomb_scale() * crate::coulomb::zero_mode_part(f, g, self.zero_mode)
    }

    /// f ⋆_{Λ_L} G_L in Hartree.
    pub fn potential_of_charge(&self, charge: &FourierField) -> FourierField {
        hartree_potential(charge, self.zero_mode).scaled(self.lattice.coulomb_scale())
    }

    /// ℰ^ν_sc,L of a plane-wave density matrix: kinetic + ½D(ρ - μ - ν).
    pub fn energy_of_matrix(&self, basis: &PlaneWaveBasis, p: &CMat) -> Result<SupercellEnergy> {
        let rho = crate::bloch::density_of_matrix(basis, p, self.extent());
        let kinetic = kinetic_of_matrix(basis, p);
        self.energy_of(kinetic, &rho)
    }

    fn energy_of(&self, kinetic: f64, density: &FourierField) -> Result<SupercellEnergy> {
        let charge = &(density - &self.mu()?) - &self.nu()?;
        let hartree = 0.5 * self.coulomb(&charge, &charge)?;
        Ok(SupercellEnergy {
            kinetic,
            hartree,
            total: kinetic + hartree,
        })
    }
}

/// How the supercell is filled.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SupercellFilling {
    /// Z·L³ electrons.
    Neutral,
    /// Every state below the Fermi level (grand-canonical).
    Threshold(f64),
    /// Z·L³ + q electrons with a fractional frontier.
    Charge(f64),
}

#[derive(Debug, Clone, PartialEq)]
pub enum SupercellStart {
    /// ρ₀ = μ_per + ν_L.
    Nuclear,
    /// ρ₀ ≡ Z.
    Uniform,
    Field(FourierField),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SupercellEnergy {
    pub kinetic: f64,
    pub hartree: f64,
    pub total: f64,
}

/// A Γ-point density matrix on Λ_L with its density and the mean-field
/// operator at that density.
#[derive(Debug, Clone)]
pub struct SupercellState {
    pub size: usize,
    /// Eigenpairs of the mean-field operator the state was filled in.
    pub fiber: BlochFiber,
    /// ⟨φ_n, γ φ_n⟩ in the eigenbasis of `fiber`.
    pub occupations: Vec<f64>,
    /// γ in the plane-wave basis.
    pub gamma: CMat,
    pub density: FourierField,
    pub potential: FourierField,
    pub total_electrons: f64,
    /// Highest (partially) occupied eigenvalue.
    pub frontier: f64,
}

impl SupercellState {
    pub fn basis(&self) -> &PlaneWaveBasis {
        self.fiber.basis()
    }

    pub fn eigenvalues(&self) -> &[f64] {
        self.fiber.eigenvalues()
    }

    pub fn density_matrix(&self) -> &CMat {
        &self.gamma
    }

    pub fn kinetic_energy(&self) -> f64 {
        kinetic_of_matrix(self.basis(), &self.gamma)
    }

    /// Largest deviation of ρ from its Z³ translates, on the grid.
    pub fn translation_defect(&self) -> f64 {
        let mut worst = 0.0f64;
        for z in [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]] {
            let diff = &self.density.translated(z) - &self.density;
            worst = worst.max(diff.sup_norm(1));
        }
        worst
    }
}

/// Which iteration produced a supercell solution.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SupercellMethod {
    /// Density mixing; residuals are density residuals.
    DensityMixing,
    /// Density mixing of the relaxed-frontier map, used when plain Aufbau
    /// mixing stalls on a fractionally occupied frontier.
    RelaxedFrontier,
}

#[derive(Debug, Clone)]
pub struct SupercellSolution {
    pub state: SupercellState,
    pub energy: SupercellEnergy,
    pub filling: SupercellFilling,
    pub method: SupercellMethod,
    pub iterations: usize,
    pub residuals: Vec<f64>,
}

impl SupercellSolution {
    /// ℰ - εF·Tr γ for Fermi-level filling, ℰ otherwise: I⁰_sc,L,
    /// I⁰_sc,L,εF or I^ν_sc,L,εF depending on the problem.
    pub fn minimum(&self) -> f64 {
        match self.filling {
            SupercellFilling::Threshold(ef) => self.energy.total - ef * self.state.total_electrons,
            _ => self.energy.total,
        }
    }

    /// Emergent Lagrange multiplier of the charge constraint.
    pub fn multiplier(&self) -> f64 {
        match self.filling {
            SupercellFilling::Threshold(ef) => ef,
            _ => self.state.frontier,
        }
    }
}

fn require_gap(gap: Option<&GapInfo>) -> Result<&GapInfo> {
    match gap {
        Some(g) if g.gap_open => Ok(g),
        Some(g) => Err(Error::Precondition(format!(
            "band gap is closed (sigma_plus = {}, sigma_minus = {}); defect and Fermi-level runs need an insulator",
            g.sigma_plus, g.sigma_minus
        ))),
        None => Err(Error::Precondition("a certified band gap is required".into())),
    }
}

/// Self-consistent supercell ground state.
///
/// Fermi-level and fixed-charge filling, and any run with a defect, need an
/// open gap of the periodic problem.
pub fn scf_supercell(
    problem: &SupercellProblem,
    filling: SupercellFilling,
    gap: Option<&GapInfo>,
    options: &SolverOptions,
    start: SupercellStart,
) -> Result<SupercellSolution> {
    problem.validate()?;
    let needs_gap = !problem.defect.is_empty() || !matches!(filling, SupercellFilling::Neutral);
    if needs_gap {
        let g = require_gap(gap)?;
        if let SupercellFilling::Threshold(ef) = filling {
            if !(ef > g.sigma_plus && ef < g.sigma_minus) {
                return Err(Error::Precondition(format!(
                    "Fermi level {ef} is outside the gap ({}, {})",
                    g.sigma_plus, g.sigma_minus
                )));
            }
        }
    }
    let basis = problem.basis()?;
    let table = basis.difference_table(problem.extent());
    let n0 = problem.neutral_electrons();
    let aufbau = match filling {
        SupercellFilling::Neutral => Filling::Total(n0),
        SupercellFilling::Threshold(ef) => Filling::Threshold(ef),
        SupercellFilling::Charge(q) => {
            if !q.is_finite() || n0 + q < 0.0 || n0 + q > basis.len() as f64 {
                return invalid(format!(
                    "charge q = {q} cannot be placed in {} supercell states",
                    basis.len()
                ));
            }
            Filling::Total(n0 + q)
        }
    };
    if let Filling::Total(n) = aufbau {
        if n > basis.len() as f64 {
            return invalid(format!("{n} electrons exceed the {} supercell states", basis.len()));
        }
    }
    let mu = problem.mu()?;
    let nu = problem.nu()?;
    let background = &mu + &nu;
    let extent = problem.extent();
    let rho0 = match start {
        SupercellStart::Nuclear => background.clone(),
        SupercellStart::Uniform => FourierField::constant(problem.size, extent, problem.nuclear.z as f64),
        SupercellStart::Field(f) => {
            if f.period() != problem.size || f.extent() != extent {
                return invalid("initial density does not match the supercell grid");
            }
            f
        }
    };
    let ctx = frontier::Context {
        problem,
        basis: &basis,
        table: &table,
        background: &background,
        filling: aufbau,
    };
    let mixed = scf::run(rho0.clone(), options, |rho| {
        let step = ctx.step(rho)?;
        let out = step.density.clone();
        Ok((step, out))
    });
    let (state, method, iterations, residuals) = match mixed {
        Ok(fp) => (fp.state.into_state(problem.size), SupercellMethod::DensityMixing, fp.iterations, fp.residuals),
        Err(Error::NonConvergence { .. }) => {
            let fp = scf::run(rho0, options, |rho| {
                let step = ctx.relaxed_step(rho)?;
                let out = step.density.clone();
                Ok((step, out))
            })?;
            (fp.state.into_state(problem.size), SupercellMethod::RelaxedFrontier, fp.iterations, fp.residuals)
        }
        Err(e) => return Err(e),
    };
    let energy = problem.energy_of(state.kinetic_energy(), &state.density)?;
    Ok(SupercellSolution {
        state,
        energy,
        filling,
        method,
        iterations,
        residuals,
    })
}

/// Density of a periodic ground state viewed on Λ_L: a good starting point
/// for the defect-free supercell SCF.
pub fn supercell_start_from_periodic(density: &FourierField, size: usize) -> SupercellStart {
    SupercellStart::Field(density.to_supercell(size))
}
