//! Thermodynamic-limit drivers: L-sweeps of the perfect crystal and of a
//! defect at fixed Fermi level, Richardson extrapolation and the analytic
//! correction terms of the defect-energy limit.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bloch::{assemble_fiber, scf_periodic, GapInfo, InitialDensity, PeriodicProblem, PeriodicSolution};
use crate::charge::DefectCharge;
use crate::error::{invalid, Error, Result};
use crate::lattice::{brillouin_mesh, build_mesh_basis, FourierField};
use crate::scf::SolverOptions;
use crate::supercell::{scf_supercell, SupercellFilling, SupercellProblem, SupercellStart};

/// Oversampling used for ‖Φ_L‖_∞.
pub const SUP_OVERSAMPLE: usize = 4;

/// Perfect-crystal convergence data at one L, from the Bloch route.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DensityRow {
    pub size: usize,
    /// I⁰_sc,L / L³.
    pub energy_per_cell: f64,
    /// |I⁰_sc,L / L³ - I⁰_per|.
    pub energy_error: f64,
    /// ‖ρ_L - ρ_per‖_{L²(Γ)}.
    pub density_deviation: f64,
    /// ‖(ρ_L - ρ_per)⋆G₁‖_∞.
    pub phi_sup: f64,
    /// sup over bands and the L-mesh of |λ_n^L(ξ) - λ_n(ξ)|.
    pub eigenvalue_deviation: f64,
    pub iterations: usize,
}

impl DensityRow {
    pub fn spectral_bound_holds(&self) -> bool {
        self.eigenvalue_deviation <= self.phi_sup
    }
}

fn sorted_sizes(sizes: &[usize]) -> Result<Vec<usize>> {
    if sizes.is_empty() || sizes.contains(&0) {
        return invalid("L list must be non-empty with every L >= 1");
    }
    let mut s = sizes.to_vec();
    s.sort_unstable();
    s.dedup();
    Ok(s)
}

/// Largest eigenvalue gap between the fibers of two potentials over the
/// L-mesh.
fn spectral_deviation(problem: &PeriodicProblem, size: usize, v_l: &FourierField, v_ref: &FourierField) -> Result<f64> {
    let lattice = problem.lattice.with_bz_size(size);
    let points = brillouin_mesh(size)?;
    let devs = points
        .par_iter()
        .map(|p| {
            let basis = build_mesh_basis(&lattice, p)?;
            let a = assemble_fiber(basis.clone(), v_l)?;
            let b = assemble_fiber(basis, v_ref)?;
            Ok(a.eigenvalues()
                .iter()
                .zip(b.eigenvalues())
                .map(|(x, y)| (x - y).abs())
                .fold(0.0, f64::max))
        })
        .collect::<Result<Vec<f64>>>()?;
    Ok(devs.into_iter().fold(0.0, f64::max))
}

fn density_row(
    problem: &PeriodicProblem,
    size: usize,
    solution: &PeriodicSolution,
    reference: &PeriodicSolution,
) -> Result<DensityRow> {
    let diff = &solution.state.density - &reference.state.density;
    let phi = problem.potential_of_charge(&diff);
    let v_l = problem.potential(&solution.state.density)?;
    let v_ref = problem.potential(&reference.state.density)?;
    Ok(DensityRow {
        size,
        energy_per_cell: solution.i0_per(),
        energy_error: (solution.i0_per() - reference.i0_per()).abs(),
        density_deviation: diff.l2_norm(),
        phi_sup: phi.sup_norm(SUP_OVERSAMPLE),
        eigenvalue_deviation: spectral_deviation(problem, size, &v_l, &v_ref)?,
        iterations: solution.iterations,
    })
}

/// Bloch-route perfect crystal at mesh L.
fn periodic_at(problem: &PeriodicProblem, size: usize, options: &SolverOptions) -> Result<PeriodicSolution> {
    let p = PeriodicProblem {
        lattice: problem.lattice.with_bz_size(size),
        ..*problem
    };
    scf_periodic(&p, options, InitialDensity::Nuclear)
}

/// Density, potential and spectral convergence of the perfect crystal over
/// `sizes`, against a reference periodic solution.
pub fn density_convergence(
    problem: &PeriodicProblem,
    sizes: &[usize],
    reference: &PeriodicSolution,
    options: &SolverOptions,
) -> Result<Vec<DensityRow>> {
    sorted_sizes(sizes)?
        .into_iter()
        .map(|l| density_row(problem, l, &periodic_at(problem, l, options)?, reference))
        .collect()
}

/// Richardson estimate of a sequence limit under geometric error decay.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Extrapolation {
    pub estimate: f64,
    /// Fitted ratio of successive differences; 0 when only two values exist.
    pub ratio: f64,
}

/// ΔI_∞ ≈ v_L + (v_L - v_{L-1})·r/(1 - r) with r fitted from the last three
/// values.
pub fn richardson(values: &[f64]) -> Result<Extrapolation> {
    let n = values.len();
    if n < 2 {
        return invalid("extrapolation needs at least 2 L values");
    }
    let last = values[n - 1];
    let d1 = last - values[n - 2];
    let ratio = if n >= 3 {
        let d0 = values[n - 2] - values[n - 3];
        if d0 == 0.0 {
            0.0
        } else {
            d1 / d0
        }
    } else {
        0.0
    };
    if !(ratio.abs() < 1.0) {
        return Err(Error::Precondition(format!(
            "successive differences do not contract (ratio {ratio}); no geometric extrapolation"
        )));
    }
    Ok(Extrapolation {
        estimate: last + d1 * ratio / (1.0 - ratio),
        ratio,
    })
}

/// Analytic terms of the limit lim ΔI_L = E^ν_εF + sea_cross + nu_self.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RhsTerms {
    /// -∫ν ((ρ⁰_per - μ)⋆G₁).
    pub sea_cross: f64,
    /// ½D(ν, ν) on R³.
    pub nu_self: f64,
}

pub fn rhs_terms(problem: &PeriodicProblem, defect: &DefectCharge, reference: &PeriodicSolution) -> Result<RhsTerms> {
    defect.validate()?;
    let v_sea = problem.potential(&reference.state.density)?;
    Ok(RhsTerms {
        sea_cross: -defect.integrate_periodic(&v_sea),
        nu_self: 0.5 * problem.lattice.coulomb_scale() * defect.self_coulomb(),
    })
}

/// One L of a defect sweep.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    #[serde(flatten)]
    pub crystal: DensityRow,
    /// I⁰_sc,L,εF.
    pub i0_ef: Option<f64>,
    /// I^ν_sc,L,εF.
    pub inu_ef: Option<f64>,
    /// ΔI_L = I^ν_sc,L,εF - I⁰_sc,L,εF.
    pub delta: Option<f64>,
    /// Tr γ^ν - Z·L³ of the defect minimizer.
    pub defect_charge: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub reference_i0: f64,
    pub fermi_level: Option<f64>,
    pub rows: Vec<SweepRow>,
    /// ΔI_L - ΔI_{L-1} along consecutive rows.
    pub delta_differences: Vec<f64>,
    pub extrapolated: Option<Extrapolation>,
    pub rhs: Option<RhsTerms>,
    /// ΔI_∞ - sea_cross - nu_self.
    pub e_nu_estimate: Option<f64>,
}

/// L-sweep of the perfect crystal and, with a Fermi level, of the defect
/// problem at that Fermi level.
pub fn sweep_l(
    problem: &PeriodicProblem,
    defect: &DefectCharge,
    sizes: &[usize],
    gap: Option<&GapInfo>,
    reference: &PeriodicSolution,
    options: &SolverOptions,
) -> Result<SweepResult> {
    let sizes = sorted_sizes(sizes)?;
    if !defect.is_empty() && gap.is_none() {
        return Err(Error::Precondition("defect sweeps need a certified gap and Fermi level".into()));
    }
    let ef = gap.map(|g| g.fermi_level);
    let mut rows = Vec::with_capacity(sizes.len());
    for &l in &sizes {
        let per = periodic_at(problem, l, options)?;
        let crystal = density_row(problem, l, &per, reference)?;
        let mut row = SweepRow {
            crystal,
            i0_ef: None,
            inu_ef: None,
            delta: None,
            defect_charge: None,
        };
        if let (Some(g), Some(ef)) = (gap, ef) {
            let free = SupercellProblem::perfect(problem, l);
            let start = SupercellStart::Field(per.state.density.to_supercell(l));
            let r0 = scf_supercell(&free, SupercellFilling::Threshold(ef), Some(g), options, start)?;
            let i0 = r0.minimum();
            let (inu, charge) = if defect.is_empty() {
                (i0, 0.0)
            } else {
                let with = SupercellProblem::new(problem, l, defect.clone());
                let start = SupercellStart::Field(r0.state.density.clone());
                let r = scf_supercell(&with, SupercellFilling::Threshold(ef), Some(g), options, start)?;
                (r.minimum(), r.state.total_electrons - free.neutral_electrons())
            };
            row.i0_ef = Some(i0);
            row.inu_ef = Some(inu);
            row.delta = Some(inu - i0);
            row.defect_charge = Some(charge);
        }
        rows.push(row);
    }
    let deltas: Vec<f64> = rows.iter().filter_map(|r| r.delta).collect();
    let delta_differences = deltas.windows(2).map(|w| w[1] - w[0]).collect();
    let extrapolated = if deltas.len() >= 2 { Some(richardson(&deltas)?) } else { None };
    let rhs = if ef.is_some() {
        Some(rhs_terms(problem, defect, reference)?)
    } else {
        None
    };
    let e_nu_estimate = match (extrapolated, rhs) {
        (Some(x), Some(t)) => Some(x.estimate - t.sea_cross - t.nu_self),
        _ => None,
    };
    Ok(SweepResult {
        reference_i0: reference.i0_per(),
        fermi_level: ef,
        rows,
        delta_differences,
        extrapolated,
        rhs,
        e_nu_estimate,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::charge::NuclearModel;
    use crate::lattice::LatticeConfig;

    #[test]
    fn richardson_recovers_geometric_limit() {
        let (limit, c, r): (f64, f64, f64) = (0.75, -0.4, 0.3);
        let seq: Vec<f64> = (1..=4).map(|l| limit + c * r.powi(l)).collect();
        let x = richardson(&seq).unwrap();
        assert!((x.estimate - limit).abs() < 1e-12);
        assert!((x.ratio - r).abs() < 1e-12);
    }

    #[test]
    fn richardson_with_two_values_takes_the_last() {
        let x = richardson(&[1.0, 2.0]).unwrap();
        assert_eq!(x.ratio, 0.0);
        assert_eq!(x.estimate, 2.0);
        assert!(richardson(&[1.0]).is_err());
        assert!(richardson(&[0.0, 1.0, 3.0]).is_err());
    }

    #[test]
    fn free_electrons_are_size_independent() {
        let lattice = LatticeConfig::new(25.0, 1, 5).unwrap();
        let problem = PeriodicProblem::new(lattice, NuclearModel::uniform(1));
        let reference = periodic_at(&problem, 3, &SolverOptions::default()).unwrap();
        let rows = density_convergence(&problem, &[2, 1], &reference, &SolverOptions::default()).unwrap();
        assert_eq!(rows.iter().map(|r| r.size).collect::<Vec<_>>(), vec![1, 2]);
        for r in rows {
            assert!(r.density_deviation < 1e-14);
            assert!(r.phi_sup < 1e-13);
            assert!(r.eigenvalue_deviation < 1e-13);
        }
    }

    #[test]
    fn empty_defect_has_no_energy_terms() {
        let lattice = LatticeConfig::new(25.0, 1, 5).unwrap();
        let problem = PeriodicProblem::new(lattice, NuclearModel::uniform(1));
        let reference = periodic_at(&problem, 2, &SolverOptions::default()).unwrap();
        let t = rhs_terms(&problem, &DefectCharge::default(), &reference).unwrap();
        assert_eq!((t.sea_cross, t.nu_self), (0.0, 0.0));
    }
}
