use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::OracleError;

/// Largest grid the dense finite-difference oracle accepts.
pub const MAX_GRID: usize = 13;

/// Fourth-order central second-difference weights at offsets 0, ±1, ±2.
const STENCIL: [f64; 3] = [-30.0 / 12.0, 16.0 / 12.0, -1.0 / 12.0];

/// Spectrum of -½Δ + V on the unit cell with Bloch condition
/// ψ(x + e_j) = e^{iξ_j} ψ(x), by fourth-order finite differences.
///
/// `potential` holds V at the points (i, j, k)/n, i, j, k ∈ 0..n, with k
/// fastest. Kinetic energy is divided by `spacing²`.
pub fn oracle_eigensolve(potential: &[f64], n: usize, xi: [f64; 3], spacing: f64) -> Result<Vec<f64>, OracleError> {
    if n > MAX_GRID {
        return Err(OracleError::GridTooLarge(n));
    }
    if n < 5 {
        return Err(OracleError::Invalid(format!("grid needs at least 5 points, got {n}")));
    }
    if potential.len() != n * n * n {
        return Err(OracleError::Invalid(format!("expected {} samples, got {}", n * n * n, potential.len())));
    }
    if !(spacing > 0.0) {
        return Err(OracleError::Invalid("spacing must be positive".into()));
    }
    let h = 1.0 / n as f64;
    let scale = -0.5 / (h * h * spacing * spacing);
    let size = n * n * n;
    let flat = |c: [usize; 3]| (c[0] * n + c[1]) * n + c[2];
    let mut h_mat = DMatrix::<Complex64>::zeros(size, size);
    for i in 0..n {
        for j in 0..n {
            for k in 0..n {
                let here = [i, j, k];
                let row = flat(here);
                h_mat[(row, row)] += Complex64::new(potential[row], 0.0);
                for axis in 0..3 {
                    h_mat[(row, row)] += Complex64::new(scale * STENCIL[0], 0.0);
                    for (off, w) in [(1i64, STENCIL[1]), (2, STENCIL[2])] {
                        for sign in [1i64, -1] {
                            let raw = here[axis] as i64 + sign * off;
                            // Crossing the cell boundary picks up the Bloch phase.
                            let wraps = raw.div_euclid(n as i64);
                            let mut there = here;
                            there[axis] = raw.rem_euclid(n as i64) as usize;
                            let phase = Complex64::from_polar(1.0, wraps as f64 * xi[axis]);
                            h_mat[(row, flat(there))] += phase * (scale * w);
                        }
                    }
                }
            }
        }
    }
    let eig = h_mat.symmetric_eigen();
    let mut values: Vec<f64> = eig.eigenvalues.iter().copied().collect();
    values.sort_by(f64::total_cmp);
    Ok(values)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn refuses_large_grids() {
        assert!(matches!(
            oracle_eigensolve(&vec![0.0; 15 * 15 * 15], 15, [0.0; 3], 1.0),
            Err(OracleError::GridTooLarge(15))
        ));
    }

    #[test]
    fn free_spectrum_starts_at_zero() {
        let e = oracle_eigensolve(&vec![0.0; 343], 7, [0.0; 3], 1.0).unwrap();
        assert!(e[0].abs() < 1e-10);
    }
}
