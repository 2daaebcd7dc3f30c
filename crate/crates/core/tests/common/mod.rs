//! Shared fixture: one electron per cell on a Gaussian nucleus, cutoff 1 Ha,
//! lattice spacing 8 bohr.

#![allow(dead_code)]

use std::sync::OnceLock;
use std::time::Instant;

use fermi_sea::bloch::{scf_periodic, InitialDensity, PeriodicProblem, PeriodicSolution};
use fermi_sea::charge::{DefectCharge, DefectSite, NuclearModel};
use fermi_sea::lattice::{FourierField, LatticeConfig};
use fermi_sea::linalg::CMat;
use fermi_sea::scf::SolverOptions;
use fermi_sea::supercell::{scf_supercell, SupercellFilling, SupercellProblem, SupercellSolution, SupercellStart};
use fermi_sea::Complex64;
use fermi_sea_oracle::DMatrix;

pub const CUTOFF: f64 = 1.0;
pub const SPACING: f64 = 8.0;
pub const GRID_N: usize = 9;
pub const SIGMA: f64 = 0.02;
/// Brillouin mesh of the reference gap and energy.
pub const FINE_BZ: usize = 8;

pub fn options() -> SolverOptions {
    SolverOptions::default().with_tol(1e-11).with_anderson(6).with_max_iterations(200)
}

pub fn problem(bz: usize) -> PeriodicProblem {
    let lattice = LatticeConfig::new(CUTOFF, bz, GRID_N).unwrap().with_spacing(SPACING).unwrap();
    PeriodicProblem::new(lattice, NuclearModel::gaussian(1, SIGMA))
}

pub fn periodic(bz: usize) -> PeriodicSolution {
    scf_periodic(&problem(bz), &options(), InitialDensity::Nuclear).unwrap()
}

/// Converged crystal on the fine mesh; its gap certifies Σ⁺, Σ⁻ and εF.
pub fn fine() -> &'static PeriodicSolution {
    static FINE: OnceLock<PeriodicSolution> = OnceLock::new();
    FINE.get_or_init(|| periodic(FINE_BZ))
}

/// Neutral defect-free supercell state started from the Bloch density.
pub fn perfect_supercell(size: usize) -> (SupercellProblem, SupercellSolution) {
    let per = periodic(size);
    let free = SupercellProblem::perfect(&problem(1), size);
    let start = SupercellStart::Field(per.state.density.to_supercell(size));
    let sol = scf_supercell(&free, SupercellFilling::Neutral, None, &options(), start).unwrap();
    (free, sol)
}

/// Attractive Gaussian at the cell center binding one electron below the
/// conduction band.
pub fn binding_defect() -> DefectCharge {
    DefectCharge::new(vec![DefectSite {
        center: [0.5, 0.5, 0.5],
        amplitude: 0.6,
        width: 0.15,
    }])
}

/// Fermi level of the bound-electron fixture, between the bound level and
/// the conduction band.
pub const BOUND_FERMI_LEVEL: f64 = 0.095;

/// Neutral pair of opposite Gaussians.
pub fn dipole_defect() -> DefectCharge {
    let (c, d) = ([0.25, 0.25, 0.25], 0.1);
    DefectCharge::new(vec![
        DefectSite {
            center: [c[0] + d, c[1], c[2]],
            amplitude: 0.3,
            width: 0.08,
        },
        DefectSite {
            center: [c[0] - d, c[1], c[2]],
            amplitude: -0.3,
            width: 0.08,
        },
    ])
}

/// Field value at a point from its Fourier coefficients.
pub fn evaluate(field: &FourierField, x: [f64; 3]) -> f64 {
    (0..field.coeffs().len())
        .map(|i| {
            let k = field.wavevector(field.mode(i));
            let phase = k[0] * x[0] + k[1] * x[1] + k[2] * x[2];
            (field.coeffs()[i] * Complex64::from_polar(1.0, phase)).re
        })
        .sum()
}

pub fn to_faer(m: &DMatrix<Complex64>) -> CMat {
    CMat::from_fn(m.nrows(), m.ncols(), |i, j| m[(i, j)])
}

/// Prints the criterion line and returns the verdict.
pub fn report(id: u32, name: &str, pass: bool, started: Instant, detail: impl std::fmt::Display) -> bool {
    let verdict = if pass { "PASS" } else { "FAIL" };
    println!(
        "criterion {id:>2} {verdict} {name} [{:.1} s]: {detail}",
        started.elapsed().as_secs_f64()
    );
    pass
}
