//! Defect states Q = γ - γ⁰ on Λ_L, their energy and the split into
//! polarization and bound electrons.

use serde::{Deserialize, Serialize};

use super::{SupercellProblem, SupercellState};
use crate::bloch::accumulate_matrix_density;
use crate::error::{invalid, Error, Result};
use crate::lattice::FourierField;
use crate::linalg::{frobenius, hermitian_eigen, hermiticity_defect, rotate_into, rotate_out, weighted_projector, CMat};
use crate::Complex64;

/// Reference occupations farther than this from 0 or 1 mean γ⁰ is not a
/// projector.
const PROJECTOR_TOL: f64 = 1e-12;

/// Q = γ - γ⁰ in the orbital basis of γ⁰, with its blocks, charge and density.
#[derive(Debug, Clone)]
pub struct DefectState {
    q: CMat,
    qpp: CMat,
    qmm: CMat,
    charge: f64,
    rho_q: FourierField,
    reference_eigenvalues: Vec<f64>,
    occupied: Vec<bool>,
}

fn reference_occupied(reference: &SupercellState) -> Result<Vec<bool>> {
    reference
        .occupations
        .iter()
        .map(|&o| {
            if o.abs() <= PROJECTOR_TOL {
                Ok(false)
            } else if (o - 1.0).abs() <= PROJECTOR_TOL {
                Ok(true)
            } else {
                Err(Error::Precondition(format!(
                    "reference state has fractional occupation {o}; γ⁰ must be a projector"
                )))
            }
        })
        .collect()
}

impl DefectState {
    /// Q from a perturbed state and the reference on the same basis.
    pub fn between(perturbed: &SupercellState, reference: &SupercellState) -> Result<Self> {
        if perturbed.basis() != reference.basis() || perturbed.density.extent() != reference.density.extent() {
            return invalid("perturbed and reference states live on different bases or grids");
        }
        let occupied = reference_occupied(reference)?;
        let diff = perturbed.density_matrix() - reference.density_matrix();
        let q = rotate_into(reference.fiber.eigenvectors(), &diff);
        let rho_q = &perturbed.density - &reference.density;
        Ok(Self::assemble(q, rho_q, reference, occupied))
    }

    /// Q given directly in the reference orbital basis.
    pub fn from_orbital_matrix(reference: &SupercellState, q: CMat) -> Result<Self> {
        let n = reference.eigenvalues().len();
        if q.nrows() != n || q.ncols() != n {
            return invalid(format!("Q must be {n}×{n}, got {}×{}", q.nrows(), q.ncols()));
        }
        if hermiticity_defect(&q) > 1e-12 {
            return invalid("Q must be Hermitian");
        }
        let occupied = reference_occupied(reference)?;
        let p = rotate_out(reference.fiber.eigenvectors(), &q);
        let mut rho_q = FourierField::zeros(reference.size, reference.density.extent());
        let volume = (reference.size as f64).powi(3);
        accumulate_matrix_density(reference.fiber.table(), &p, 1.0 / volume, &mut rho_q);
        Ok(Self::assemble(q, rho_q, reference, occupied))
    }

    fn assemble(q: CMat, rho_q: FourierField, reference: &SupercellState, occupied: Vec<bool>) -> Self {
        let n = q.nrows();
        let mut qpp = CMat::zeros(n, n);
        let mut qmm = CMat::zeros(n, n);
        for j in 0..n {
            for i in 0..n {
                match (occupied[i], occupied[j]) {
                    (false, false) => qpp[(i, j)] = q[(i, j)],
                    (true, true) => qmm[(i, j)] = q[(i, j)],
                    _ => {}
                }
            }
        }
        let charge = (0..n).map(|i| q[(i, i)].re).sum();
        Self {
            q,
            qpp,
            qmm,
            charge,
            rho_q,
            reference_eigenvalues: reference.eigenvalues().to_vec(),
            occupied,
        }
    }

    pub fn q(&self) -> &CMat {
        &self.q
    }

    pub fn qpp(&self) -> &CMat {
        &self.qpp
    }

    pub fn qmm(&self) -> &CMat {
        &self.qmm
    }

    /// Tr₀(Q).
    pub fn charge(&self) -> f64 {
        self.charge
    }

    pub fn rho_q(&self) -> &FourierField {
        &self.rho_q
    }

    pub fn reference_occupied(&self) -> &[bool] {
        &self.occupied
    }

    /// Eigenvalues of γ⁰ + Q.
    pub fn occupation_spectrum(&self) -> Result<Vec<f64>> {
        let mut g = self.q.clone();
        for (i, &o) in self.occupied.iter().enumerate() {
            if o {
                g[(i, i)] += Complex64::new(1.0, 0.0);
            }
        }
        Ok(hermitian_eigen(&g)?.values)
    }

    /// Smallest eigenvalue of Q⁺⁺ - Q⁻⁻ - Q².
    pub fn admissibility_margin(&self) -> Result<f64> {
        let m = &(&self.qpp - &self.qmm) - &(&self.q * &self.q);
        Ok(hermitian_eigen(&m)?.values.first().copied().unwrap_or(0.0))
    }

    /// Checks -γ⁰ ≤ Q ≤ 1 - γ⁰ to `tol`.
    pub fn check_admissible(&self, tol: f64) -> Result<()> {
        let spec = self.occupation_spectrum()?;
        let lo = spec.first().copied().unwrap_or(0.0);
        let hi = spec.last().copied().unwrap_or(0.0);
        if lo < -tol || hi > 1.0 + tol {
            return Err(Error::Precondition(format!(
                "γ⁰ + Q has spectrum [{lo}, {hi}] outside [0, 1]"
            )));
        }
        Ok(())
    }
}

/// Defect energy split into its parts, all in Hartree.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DefectEnergyReport {
    pub fermi_level: f64,
    /// Tr₀(Q).
    pub charge: f64,
    /// Tr(|H⁰ - εF|^{1/2}(Q⁺⁺ - Q⁻⁻)|H⁰ - εF|^{1/2}).
    pub kinetic_part: f64,
    /// kinetic_part + εF·charge = Tr₀(H⁰Q).
    pub trace_h0q: f64,
    /// -D(ρ_Q, ν_L).
    pub coulomb_cross: f64,
    /// ½D(ρ_Q, ρ_Q).
    pub coulomb_self: f64,
    /// ℰ^ν(Q) - εF·Tr₀(Q).
    pub e_mu: f64,
    /// ℰ^ν(Q) = Tr₀(H⁰Q) - D(ρ_Q, ν_L) + ½D(ρ_Q, ρ_Q).
    pub energy: f64,
    /// ½D(ν_L, ν_L) - D(ν_L, ρ⁰ - μ): the shift ℰ^ν(γ⁰) - ℰ⁰(γ⁰).
    pub nu_baseline: f64,
    /// Share of the Coulomb terms above (including the baseline) carried by
    /// the G = 0 mode; zero when c = 0.
    pub zero_mode_part: f64,
}

/// Tr(|H⁰ - κ|^{1/2}(Q⁺⁺ - Q⁻⁻)|H⁰ - κ|^{1/2}) in the reference eigenbasis.
pub fn kinetic_part(state: &DefectState, kappa: f64) -> f64 {
    state
        .reference_eigenvalues
        .iter()
        .enumerate()
        .map(|(i, l)| (l - kappa).abs() * (state.qpp[(i, i)].re - state.qmm[(i, i)].re))
        .sum()
}

/// Energy report of Q relative to the reference γ⁰ of the same supercell.
pub fn defect_energy(
    problem: &SupercellProblem,
    reference: &SupercellState,
    state: &DefectState,
    fermi_level: f64,
) -> Result<DefectEnergyReport> {
    if state.reference_eigenvalues.as_slice() != reference.eigenvalues() {
        return invalid("defect state was built on a different reference");
    }
    if !fermi_level.is_finite() {
        return invalid("Fermi level must be finite");
    }
    let nu = problem.nu()?;
    let mu = problem.mu()?;
    let sea = &reference.density - &mu;
    let rho_q = &state.rho_q;

    let kinetic = kinetic_part(state, fermi_level);
    let trace_h0q = kinetic + fermi_level * state.charge;
    let coulomb_cross = -problem.coulomb(rho_q, &nu)?;
    let coulomb_self = 0.5 * problem.coulomb(rho_q, rho_q)?;
    let nu_baseline = 0.5 * problem.coulomb(&nu, &nu)? - problem.coulomb(&nu, &sea)?;
    let zero_mode_part = -problem.coulomb_zero_mode(rho_q, &nu) + 0.5 * problem.coulomb_zero_mode(rho_q, rho_q)
        + 0.5 * problem.coulomb_zero_mode(&nu, &nu)
        - problem.coulomb_zero_mode(&nu, &sea);
    let e_mu = kinetic + coulomb_cross + coulomb_self;
    Ok(DefectEnergyReport {
        fermi_level,
        charge: state.charge,
        kinetic_part: kinetic,
        trace_h0q,
        coulomb_cross,
        coulomb_self,
        e_mu,
        energy: e_mu + fermi_level * state.charge,
        nu_baseline,
        zero_mode_part,
    })
}

/// Q = Q_pol + γ_e⁻ split at the spectral threshold Σ of the defect
/// mean-field operator.
#[derive(Debug, Clone)]
pub struct DefectDecomposition {
    /// χ_{(-∞,Σ)}(H_Q) - γ⁰ in the plane-wave basis.
    pub q_pol: CMat,
    /// Occupied states in [Σ, εF] in the plane-wave basis.
    pub gamma_e: CMat,
    /// Tr(γ_e⁻).
    pub bound_electrons: f64,
    /// Tr₀(Q_pol).
    pub polarization_charge: f64,
    /// ‖Q_pol + γ_e⁻ - Q‖_F.
    pub recomposition_error: f64,
    /// (ρ⁰ - μ)⋆G_L + ρ_{Q_pol}⋆G_L.
    pub v_pol: FourierField,
    /// Defect eigenvalues in [Σ, εF].
    pub gap_levels: Vec<f64>,
    /// Some eigenvalue lies within `SPLIT_TOL` of Σ.
    pub ambiguous: bool,
}

pub const SPLIT_TOL: f64 = 1e-8;

/// Splits a converged Fermi-level defect state at Σ.
pub fn decompose_defect(
    problem: &SupercellProblem,
    reference: &SupercellState,
    defect: &SupercellState,
    split: f64,
    fermi_level: f64,
) -> Result<DefectDecomposition> {
    if defect.basis() != reference.basis() {
        return invalid("defect and reference states live on different bases");
    }
    if !(split <= fermi_level) {
        return invalid(format!("split {split} must not exceed the Fermi level {fermi_level}"));
    }
    let values = defect.eigenvalues();
    let vectors = defect.fiber.eigenvectors();
    let below: Vec<f64> = values.iter().map(|&l| if l < split { 1.0 } else { 0.0 }).collect();
    let electrons: Vec<f64> = values
        .iter()
        .zip(&defect.occupations)
        .map(|(&l, &o)| if l >= split { o } else { 0.0 })
        .collect();
    let gamma0 = reference.density_matrix();
    let q_pol = &weighted_projector(vectors, &below) - gamma0;
    let gamma_e = weighted_projector(vectors, &electrons);
    let q = defect.density_matrix() - gamma0;
    let recomposition_error = frobenius(&(&(&q_pol + &gamma_e) - &q));

    let volume = (reference.size as f64).powi(3);
    let mut rho_pol = FourierField::zeros(reference.size, reference.density.extent());
    accumulate_matrix_density(reference.fiber.table(), &q_pol, 1.0 / volume, &mut rho_pol);
    let sea = &reference.density - &problem.mu()?;
    let v_pol = problem.potential_of_charge(&(&sea + &rho_pol));

    let trace = |m: &CMat| (0..m.nrows()).map(|i| m[(i, i)].re).sum::<f64>();
    Ok(DefectDecomposition {
        bound_electrons: electrons.iter().sum(),
        polarization_charge: trace(&q_pol),
        recomposition_error,
        v_pol,
        gap_levels: values
            .iter()
            .copied()
            .filter(|&l| l >= split && l <= fermi_level)
            .collect(),
        ambiguous: values.iter().any(|l| (l - split).abs() < SPLIT_TOL),
        q_pol,
        gamma_e,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bloch::PeriodicProblem;
    use crate::charge::NuclearModel;
    use crate::lattice::LatticeConfig;
    use crate::scf::SolverOptions;
    use crate::supercell::{scf_supercell, SupercellFilling, SupercellStart};

    /// One electron in the Γ plane wave of a free-electron unit cell.
    fn reference() -> (SupercellProblem, SupercellState) {
        let lattice = LatticeConfig::new(25.0, 1, 5).unwrap();
        let p = SupercellProblem::perfect(&PeriodicProblem::new(lattice, NuclearModel::uniform(1)), 1);
        let sol = scf_supercell(&p, SupercellFilling::Neutral, None, &SolverOptions::default(), SupercellStart::Uniform)
            .unwrap();
        (p, sol.state)
    }

    fn rotation(n: usize, theta: f64) -> CMat {
        // Occupied orbital 0 rotated towards orbital 1, minus γ⁰.
        let (c, s) = (theta.cos(), theta.sin());
        let mut q = CMat::zeros(n, n);
        q[(0, 0)] = Complex64::new(c * c - 1.0, 0.0);
        q[(1, 1)] = Complex64::new(s * s, 0.0);
        q[(0, 1)] = Complex64::new(c * s, 0.0);
        q[(1, 0)] = Complex64::new(c * s, 0.0);
        q
    }

    #[test]
    fn zero_perturbation() {
        let (p, r) = reference();
        let n = r.eigenvalues().len();
        let d = DefectState::from_orbital_matrix(&r, CMat::zeros(n, n)).unwrap();
        assert_eq!(d.charge(), 0.0);
        assert!(d.admissibility_margin().unwrap().abs() < 1e-14);
        let e = defect_energy(&p, &r, &d, 1.0).unwrap();
        for v in [e.kinetic_part, e.trace_h0q, e.coulomb_cross, e.coulomb_self, e.energy, e.nu_baseline] {
            assert!(v.abs() < 1e-14, "{e:?}");
        }
        let same = DefectState::between(&r, &r).unwrap();
        assert!(frobenius(same.q()) < 1e-14);
    }

    #[test]
    fn one_added_electron() {
        let (p, r) = reference();
        let n = r.eigenvalues().len();
        let mut q = CMat::zeros(n, n);
        q[(1, 1)] = Complex64::new(1.0, 0.0);
        let d = DefectState::from_orbital_matrix(&r, q).unwrap();
        assert!((d.charge() - 1.0).abs() < 1e-14);
        assert!(frobenius(d.qmm()) < 1e-14);
        assert!(frobenius(&(d.qpp() - d.q())) < 1e-14);
        d.check_admissible(1e-12).unwrap();
        let lambda = r.eigenvalues()[1];
        assert!((kinetic_part(&d, 0.0) - lambda).abs() < 1e-12);
        // A plane wave has uniform density, invisible to the c = 0 kernel.
        let e = defect_energy(&p, &r, &d, 0.0).unwrap();
        assert!(e.coulomb_self.abs() < 1e-12);
        assert!((e.energy - lambda).abs() < 1e-12);
    }

    #[test]
    fn rotated_projector_identities() {
        let (p, r) = reference();
        let n = r.eigenvalues().len();
        let d = DefectState::from_orbital_matrix(&r, rotation(n, 0.3)).unwrap();
        let q2 = d.q() * d.q();
        assert!(frobenius(&(&q2 - &(d.qpp() - d.qmm()))) < 1e-12);
        assert!(d.charge().abs() < 1e-14);
        assert!(d.admissibility_margin().unwrap().abs() < 1e-12);
        // The report reproduces the direct energy difference.
        let e = defect_energy(&p, &r, &d, 0.5).unwrap();
        let basis = r.basis();
        let gamma = r.density_matrix() + rotate_out(r.fiber.eigenvectors(), d.q());
        let direct = p.energy_of_matrix(basis, &gamma).unwrap().total
            - p.energy_of_matrix(basis, r.density_matrix()).unwrap().total;
        assert!((e.energy + e.nu_baseline - direct).abs() < 1e-12, "{} vs {direct}", e.energy);
    }

    #[test]
    fn rejects_inadmissible_and_malformed_input() {
        let (_, r) = reference();
        let n = r.eigenvalues().len();
        let mut q = CMat::zeros(n, n);
        q[(1, 1)] = Complex64::new(1.5, 0.0);
        let d = DefectState::from_orbital_matrix(&r, q).unwrap();
        assert!(d.check_admissible(1e-12).is_err());
        assert!(DefectState::from_orbital_matrix(&r, CMat::zeros(2, 2)).is_err());
        let mut skew = CMat::zeros(n, n);
        skew[(0, 1)] = Complex64::new(1.0, 0.0);
        assert!(DefectState::from_orbital_matrix(&r, skew).is_err());
    }
}
