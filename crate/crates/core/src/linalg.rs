//! Dense Hermitian linear algebra on complex matrices.

use faer::linalg::solvers::Solve;
use faer::{Mat, Side};
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type CMat = Mat<Complex64>;

/// Eigenpairs of a Hermitian matrix, eigenvalues ascending, eigenvectors as
/// columns.
#[derive(Debug, Clone)]
pub struct Eigen {
    pub values: Vec<f64>,
    pub vectors: CMat,
}

pub fn hermitian_eigen(h: &CMat) -> Result<Eigen> {
    if h.nrows() != h.ncols() {
        return Err(Error::InvalidArgument("matrix must be square".into()));
    }
    let evd = h
        .self_adjoint_eigen(Side::Lower)
        .map_err(|e| Error::Eigensolver(format!("{e:?}")))?;
    let s = evd.S().column_vector();
    let values: Vec<f64> = (0..h.nrows()).map(|i| s[i].re).collect();
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::Eigensolver("non-finite eigenvalue".into()));
    }
    Ok(Eigen {
        values,
        vectors: evd.U().to_owned(),
    })
}

/// Σ_n w_n v_n v_nᴴ over the columns of `vectors` with nonzero weight.
pub fn weighted_projector(vectors: &CMat, weights: &[f64]) -> CMat {
    let n = vectors.nrows();
    let cols: Vec<usize> = (0..weights.len()).filter(|&j| weights[j] != 0.0).collect();
    let mut x = CMat::zeros(n, cols.len());
    let mut y = CMat::zeros(n, cols.len());
    for (c, &j) in cols.iter().enumerate() {
        let w = weights[j];
        for i in 0..n {
            x[(i, c)] = vectors[(i, j)] * w;
            y[(i, c)] = vectors[(i, j)];
        }
    }
    &x * y.adjoint()
}

/// Uᴴ A U.
pub fn rotate_into(u: &CMat, a: &CMat) -> CMat {
    u.adjoint() * (a * u)
}

/// U A Uᴴ.
pub fn rotate_out(u: &CMat, a: &CMat) -> CMat {
    u * (a * u.adjoint())
}

pub fn frobenius(a: &CMat) -> f64 {
    let mut s = 0.0;
    for j in 0..a.ncols() {
        for i in 0..a.nrows() {
            s += a[(i, j)].norm_sqr();
        }
    }
    s.sqrt()
}

pub fn trace(a: &CMat) -> Complex64 {
    (0..a.nrows().min(a.ncols())).map(|i| a[(i, i)]).sum()
}

/// Re Tr(A B) for square matrices of equal size.
pub fn trace_product(a: &CMat, b: &CMat) -> f64 {
    let n = a.nrows();
    let mut s = 0.0;
    for i in 0..n {
        for k in 0..n {
            s += (a[(i, k)] * b[(k, i)]).re;
        }
    }
    s
}

/// Largest |A_ij - conj(A_ji)|.
pub fn hermiticity_defect(a: &CMat) -> f64 {
    let mut worst = 0.0f64;
    for j in 0..a.ncols() {
        for i in 0..a.nrows() {
            worst = worst.max((a[(i, j)] - a[(j, i)].conj()).norm());
        }
    }
    worst
}

/// Solves A X = B by partial-pivot LU.
pub fn solve(a: &CMat, b: &CMat) -> CMat {
    a.partial_piv_lu().solve(b)
}

pub fn identity(n: usize) -> CMat {
    CMat::identity(n, n)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn eigen_of_two_by_two() {
        let mut h = CMat::zeros(2, 2);
        h[(0, 0)] = Complex64::new(1.0, 0.0);
        h[(1, 1)] = Complex64::new(-1.0, 0.0);
        h[(0, 1)] = Complex64::new(0.0, 1.0);
        h[(1, 0)] = Complex64::new(0.0, -1.0);
        let e = hermitian_eigen(&h).unwrap();
        let r = 2f64.sqrt();
        assert!((e.values[0] + r).abs() < 1e-14 && (e.values[1] - r).abs() < 1e-14);
        let back = rotate_out(&e.vectors, &diag(&e.values));
        assert!(frobenius(&(&back - &h)) < 1e-14);
    }

    #[test]
    fn projector_is_idempotent() {
        let mut h = CMat::zeros(3, 3);
        for i in 0..3 {
            for j in 0..3 {
                h[(i, j)] = Complex64::new((i + j) as f64, i as f64 - j as f64);
            }
        }
        let e = hermitian_eigen(&h).unwrap();
        let p = weighted_projector(&e.vectors, &[1.0, 1.0, 0.0]);
        assert!(frobenius(&(&p * &p - &p)) < 1e-13);
        assert!((trace(&p).re - 2.0).abs() < 1e-13);
    }

    fn diag(v: &[f64]) -> CMat {
        let mut d = CMat::zeros(v.len(), v.len());
        for (i, x) in v.iter().enumerate() {
            d[(i, i)] = Complex64::new(*x, 0.0);
        }
        d
    }
}
