use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::OracleError;

/// Projector U γ_start Uᴴ with U the product of the given Givens rotations
/// (i, a, θ, φ), applied in order.
pub fn rotated_projector(occupied: &[bool], rotations: &[(usize, usize, f64, f64)]) -> DMatrix<Complex64> {
    let n = occupied.len();
    let mut u = DMatrix::<Complex64>::identity(n, n);
    for &(i, a, theta, phi) in rotations {
        apply_givens(&mut u, i, a, theta, phi);
    }
    &u * reference(occupied) * u.adjoint()
}

/// Random projector from `rotations` Givens rotations, each mixing one
/// occupied and one empty orbital of `occupied` by a random angle and phase.
pub fn givens_projector(occupied: &[bool], rotations: usize, seed: u64) -> DMatrix<Complex64> {
    let n = occupied.len();
    let occ: Vec<usize> = (0..n).filter(|&i| occupied[i]).collect();
    let emp: Vec<usize> = (0..n).filter(|&i| !occupied[i]).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut list = Vec::with_capacity(rotations);
    if !occ.is_empty() && !emp.is_empty() {
        for _ in 0..rotations {
            let i = occ[rng.gen_range(0..occ.len())];
            let a = emp[rng.gen_range(0..emp.len())];
            list.push((i, a, rng.gen_range(-1.5..1.5), rng.gen_range(0.0..std::f64::consts::TAU)));
        }
    }
    rotated_projector(occupied, &list)
}

/// U ← G U with G the rotation by θ (phase φ) in the (i, a) plane.
fn apply_givens(u: &mut DMatrix<Complex64>, i: usize, a: usize, theta: f64, phi: f64) {
    let (c, s) = (theta.cos(), theta.sin());
    let e = Complex64::from_polar(1.0, phi);
    for col in 0..u.ncols() {
        let (x, y) = (u[(i, col)], u[(a, col)]);
        u[(i, col)] = x * c - e.conj() * y * s;
        u[(a, col)] = e * x * s + y * c;
    }
}

fn blocks(q: &DMatrix<Complex64>, occupied: &[bool]) -> (DMatrix<Complex64>, DMatrix<Complex64>) {
    let n = q.nrows();
    let mut qpp = DMatrix::zeros(n, n);
    let mut qmm = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            match (occupied[i], occupied[j]) {
                (false, false) => qpp[(i, j)] = q[(i, j)],
                (true, true) => qmm[(i, j)] = q[(i, j)],
                _ => {}
            }
        }
    }
    (qpp, qmm)
}

fn reference(occupied: &[bool]) -> DMatrix<Complex64> {
    let n = occupied.len();
    DMatrix::from_fn(n, n, |i, j| {
        if i == j && occupied[i] {
            Complex64::new(1.0, 0.0)
        } else {
            Complex64::new(0.0, 0.0)
        }
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProjectorReport {
    /// max over the samples of ‖Q² - (Q⁺⁺ - Q⁻⁻)‖_F for projector Q.
    pub projector_identity: f64,
    /// max distance of Tr Q to the nearest integer.
    pub trace_integrality: f64,
    /// smallest eigenvalue of Q⁺⁺ - Q⁻⁻ - Q² over convex mixtures.
    pub mixture_margin: f64,
}

/// Identity checks on `samples` random rotated projectors of γ⁰ and on
/// their pairwise mixtures with weight `t`.
pub fn oracle_projector_identities(
    occupied: &[bool],
    samples: usize,
    rotations: usize,
    t: f64,
    seed: u64,
) -> Result<ProjectorReport, OracleError> {
    if !(0.0..=1.0).contains(&t) {
        return Err(OracleError::Invalid(format!("mixture weight {t} outside [0, 1]")));
    }
    let g0 = reference(occupied);
    let qs: Vec<DMatrix<Complex64>> = (0..samples.max(1))
        .map(|s| givens_projector(occupied, rotations, seed.wrapping_add(s as u64)) - &g0)
        .collect();
    let mut report = ProjectorReport {
        projector_identity: 0.0,
        trace_integrality: 0.0,
        mixture_margin: f64::INFINITY,
    };
    for q in &qs {
        let (qpp, qmm) = blocks(q, occupied);
        report.projector_identity = report.projector_identity.max((q * q - (&qpp - &qmm)).norm());
        let tr = q.trace().re;
        report.trace_integrality = report.trace_integrality.max((tr - tr.round()).abs());
    }
    for pair in qs.windows(2) {
        let q = &pair[0] * Complex64::new(t, 0.0) + &pair[1] * Complex64::new(1.0 - t, 0.0);
        let (qpp, qmm) = blocks(&q, occupied);
        let m = &qpp - &qmm - &q * &q;
        let lo = m.symmetric_eigen().eigenvalues.iter().copied().fold(f64::INFINITY, f64::min);
        report.mixture_margin = report.mixture_margin.min(lo);
    }
    if qs.len() < 2 {
        report.mixture_margin = 0.0;
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rotated_projector_is_a_projector() {
        let occ = [true, true, false, false, false];
        let g = givens_projector(&occ, 6, 3);
        assert!((&g * &g - &g).norm() < 1e-13);
        assert!((g.trace().re - 2.0).abs() < 1e-13);
    }
}
