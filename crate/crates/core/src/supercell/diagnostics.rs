//! Charge-constrained energies E⁰_L(q), E^ν_L(q) and the binding gaps built
//! from them.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{scf_supercell, SupercellFilling, SupercellProblem, SupercellSolution, SupercellStart};
use crate::bloch::GapInfo;
use crate::error::{invalid, Result};
use crate::scf::SolverOptions;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChargeRow {
    pub q: f64,
    /// E_L(q) relative to the neutral defect-free reference.
    pub energy: f64,
    /// Frontier eigenvalue of the constrained minimizer.
    pub multiplier: f64,
    /// Whether the multiplier lies in [Σ⁺_Z, Σ⁻_{Z+1}].
    pub multiplier_in_gap: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChargeCurve {
    pub size: usize,
    pub rows: Vec<ChargeRow>,
}

fn check_reference(problem: &SupercellProblem, reference: &SupercellSolution) -> Result<()> {
    if reference.state.size != problem.size || reference.filling != SupercellFilling::Neutral {
        return invalid("reference must be the neutral defect-free solution of the same supercell");
    }
    Ok(())
}

/// E^ν_L(q) = ℰ^ν(γ_q) - ℰ⁰(γ⁰) - [½D(ν,ν) - D(ν, ρ⁰ - μ)] for each q.
fn charged_rows(
    problem: &SupercellProblem,
    gap: &GapInfo,
    charges: &[f64],
    reference: &SupercellSolution,
    options: &SolverOptions,
) -> Result<Vec<ChargeRow>> {
    check_reference(problem, reference)?;
    let nu = problem.nu()?;
    let sea = &reference.state.density - &problem.mu()?;
    let baseline = 0.5 * problem.coulomb(&nu, &nu)? - problem.coulomb(&nu, &sea)?;
    let e0 = reference.energy.total;
    charges
        .par_iter()
        .map(|&q| {
            if q == 0.0 && problem.defect.is_empty() {
                return Ok(ChargeRow {
                    q,
                    energy: 0.0,
                    multiplier: reference.state.frontier,
                    multiplier_in_gap: true,
                });
            }
            let sol = scf_supercell(
                problem,
                SupercellFilling::Charge(q),
                Some(gap),
                options,
                SupercellStart::Field(reference.state.density.clone()),
            )?;
            let m = sol.multiplier();
            Ok(ChargeRow {
                q,
                energy: sol.energy.total - e0 - baseline,
                multiplier: m,
                multiplier_in_gap: m >= gap.sigma_plus && m <= gap.sigma_minus,
            })
        })
        .collect()
}

/// Defect-free charge-constrained energies E⁰_L(q) over a grid of charges.
pub fn e0_of_q(
    problem: &SupercellProblem,
    gap: &GapInfo,
    charges: &[f64],
    reference: &SupercellSolution,
    options: &SolverOptions,
) -> Result<ChargeCurve> {
    let free = problem.without_defect();
    Ok(ChargeCurve {
        size: problem.size,
        rows: charged_rows(&free, gap, charges, reference, options)?,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BindingRow {
    pub q: f64,
    pub qprime: f64,
    /// E^ν_L(q - q').
    pub e_nu_rest: f64,
    /// E⁰_L(q').
    pub e0_qprime: f64,
    /// E^ν_L(q).
    pub e_nu_q: f64,
    /// E^ν_L(q - q') + E⁰_L(q') - E^ν_L(q); positive means binding at this L.
    pub gap: f64,
}

/// Finite-L binding gaps over a grid of q'.
pub fn binding_diagnostic(
    problem: &SupercellProblem,
    gap: &GapInfo,
    q: f64,
    qprimes: &[f64],
    reference: &SupercellSolution,
    options: &SolverOptions,
) -> Result<Vec<BindingRow>> {
    if !q.is_finite() || qprimes.iter().any(|v| !v.is_finite()) {
        return invalid("charges must be finite");
    }
    let mut nu_charges: Vec<f64> = std::iter::once(q).chain(qprimes.iter().map(|p| q - p)).collect();
    let mut free_charges: Vec<f64> = std::iter::once(0.0).chain(qprimes.iter().copied()).collect();
    for v in [&mut nu_charges, &mut free_charges] {
        v.sort_by(f64::total_cmp);
        v.dedup();
    }
    let nu_rows = charged_rows(problem, gap, &nu_charges, reference, options)?;
    let free_rows = charged_rows(&problem.without_defect(), gap, &free_charges, reference, options)?;
    let lookup = |rows: &[ChargeRow], c: f64| {
        rows.iter()
            .find(|r| r.q.to_bits() == c.to_bits())
            .map(|r| r.energy)
            .expect("charge was solved")
    };
    let e_nu_q = lookup(&nu_rows, q);
    Ok(qprimes
        .iter()
        .map(|&qp| {
            let e_nu_rest = lookup(&nu_rows, q - qp);
            let e0_qprime = lookup(&free_rows, qp);
            BindingRow {
                q,
                qprime: qp,
                e_nu_rest,
                e0_qprime,
                e_nu_q,
                gap: e_nu_rest + e0_qprime - e_nu_q,
            }
        })
        .collect())
}
