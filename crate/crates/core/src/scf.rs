//! Density fixed-point iteration shared by the periodic and supercell
//! solvers.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::lattice::FourierField;
use crate::linalg::{solve, CMat};
use crate::Complex64;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolverOptions {
    /// Linear mixing weight α ∈ (0, 1].
    pub mixing: f64,
    /// Stop when the density residual (L² per unit cell) drops below this.
    pub tol: f64,
    pub max_iterations: usize,
    /// History depth for Anderson acceleration; 0 means plain linear mixing.
    pub anderson_depth: usize,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            mixing: 0.3,
            tol: 1e-8,
            max_iterations: 500,
            anderson_depth: 0,
        }
    }
}

impl SolverOptions {
    pub fn validate(&self) -> Result<()> {
        if !(self.mixing > 0.0 && self.mixing <= 1.0) {
            return invalid(format!("solver.mixing must lie in (0, 1], got {}", self.mixing));
        }
        if !(self.tol > 0.0) {
            return invalid(format!("solver.tol must be positive, got {}", self.tol));
        }
        if self.max_iterations == 0 {
            return invalid("solver.max_iterations must be at least 1");
        }
        Ok(())
    }

    pub fn with_tol(mut self, tol: f64) -> Self {
        self.tol = tol;
        self
    }

    pub fn with_max_iterations(mut self, n: usize) -> Self {
        self.max_iterations = n;
        self
    }

    pub fn with_anderson(mut self, depth: usize) -> Self {
        self.anderson_depth = depth;
        self
    }
}

/// Result of a converged fixed-point run.
#[derive(Debug, Clone)]
pub struct FixedPoint<S> {
    /// State built from the final input density.
    pub state: S,
    /// Final input density ρ_in; the state's own density differs from it by
    /// less than the tolerance.
    pub density_in: FourierField,
    pub iterations: usize,
    pub residuals: Vec<f64>,
}

/// Residual norm used for convergence: L² over one period, per unit cell.
pub fn residual_norm(f: &FourierField) -> f64 {
    f.l2_norm() / f.volume().sqrt()
}

/// Iterates ρ ↦ mix(ρ, F(ρ)) where `step` returns a state and its output
/// density F(ρ).
pub(crate) fn run<S>(
    initial: FourierField,
    options: &SolverOptions,
    mut step: impl FnMut(&FourierField) -> Result<(S, FourierField)>,
) -> Result<FixedPoint<S>> {
    options.validate()?;
    let mut mixer = Mixer::new(options);
    let mut density = initial;
    let mut residuals = Vec::new();
    for iteration in 1..=options.max_iterations {
        let (state, output) = step(&density)?;
        let r = residual_norm(&(&output - &density));
        residuals.push(r);
        if !r.is_finite() {
            return Err(Error::NonConvergence {
                iterations: iteration,
                residuals,
            });
        }
        if r < options.tol {
            return Ok(FixedPoint {
                state,
                density_in: density,
                iterations: iteration,
                residuals,
            });
        }
        density = mixer.next(&density, &output);
    }
    Err(Error::NonConvergence {
        iterations: options.max_iterations,
        residuals,
    })
}

/// Linear mixing with optional Anderson (Pulay) extrapolation.
struct Mixer {
    alpha: f64,
    depth: usize,
    inputs: Vec<FourierField>,
    residuals: Vec<FourierField>,
}

impl Mixer {
    fn new(options: &SolverOptions) -> Self {
        Self {
            alpha: options.mixing,
            depth: options.anderson_depth,
            inputs: Vec::new(),
            residuals: Vec::new(),
        }
    }

    fn next(&mut self, input: &FourierField, output: &FourierField) -> FourierField {
        let residual = output - input;
        if self.depth == 0 {
            let mut next = input.clone();
            next.axpy(self.alpha, &residual);
            return next;
        }
        self.inputs.push(input.clone());
        self.residuals.push(residual);
        if self.inputs.len() > self.depth {
            self.inputs.remove(0);
            self.residuals.remove(0);
        }
        let c = self.coefficients();
        let mut next = FourierField::zeros(input.period(), input.extent());
        for ((x, f), ci) in self.inputs.iter().zip(&self.residuals).zip(&c) {
            next.axpy(*ci, x);
            next.axpy(ci * self.alpha, f);
        }
        next
    }

    /// Minimizes |Σ c_i f_i| subject to Σ c_i = 1.
    fn coefficients(&self) -> Vec<f64> {
        let m = self.residuals.len();
        let mut a = CMat::zeros(m + 1, m + 1);
        let mut b = CMat::zeros(m + 1, 1);
        let mut scale = 0.0f64;
        for i in 0..m {
            for j in 0..m {
                let v = self.residuals[i].inner(&self.residuals[j]);
                a[(i, j)] = Complex64::new(v, 0.0);
                scale = scale.max(v.abs());
            }
        }
        for i in 0..m {
            a[(i, i)] += Complex64::new(1e-12 * scale.max(f64::MIN_POSITIVE), 0.0);
            a[(i, m)] = Complex64::new(1.0, 0.0);
            a[(m, i)] = Complex64::new(1.0, 0.0);
        }
        b[(m, 0)] = Complex64::new(1.0, 0.0);
        let x = solve(&a, &b);
        let c: Vec<f64> = (0..m).map(|i| x[(i, 0)].re).collect();
        if c.iter().all(|v| v.is_finite()) {
            c
        } else {
            let mut last = vec![0.0; m];
            last[m - 1] = 1.0;
            last
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Affine contraction ρ ↦ A ρ + b on the zero mode and one cosine mode.
    fn affine(rho: &FourierField) -> FourierField {
        let mut out = rho.scaled(-0.8);
        out.coeffs_mut()[0] += Complex64::new(3.0, 0.0);
        out.coeffs_mut()[1] += Complex64::new(0.5, 0.0);
        out
    }

    #[test]
    fn linear_mixing_converges_on_contraction() {
        let opts = SolverOptions::default().with_tol(1e-12);
        let fp = run(FourierField::zeros(1, 1), &opts, |r| Ok(((), affine(r)))).unwrap();
        assert!((fp.density_in.coeffs()[0].re - 3.0 / 1.8).abs() < 1e-11);
        assert!(fp.residuals.windows(2).all(|w| w[1] <= w[0]));
    }

    #[test]
    fn anderson_converges_faster() {
        let lin = SolverOptions::default().with_tol(1e-12);
        let and = lin.with_anderson(4);
        let a = run(FourierField::zeros(1, 1), &lin, |r| Ok(((), affine(r)))).unwrap();
        let b = run(FourierField::zeros(1, 1), &and, |r| Ok(((), affine(r)))).unwrap();
        assert!(b.iterations < a.iterations);
        assert!((b.density_in.coeffs()[1].re - 0.5 / 1.8).abs() < 1e-11);
    }

    #[test]
    fn reports_history_on_divergence() {
        let opts = SolverOptions {
            mixing: 1.0,
            max_iterations: 7,
            ..Default::default()
        };
        let err = run(FourierField::constant(1, 1, 1.0), &opts, |r| Ok(((), r.scaled(-2.0)))).unwrap_err();
        match err {
            Error::NonConvergence { iterations, residuals } => {
                assert_eq!(iterations, 7);
                assert_eq!(residuals.len(), 7);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn rejects_bad_options() {
        let bad = SolverOptions {
            mixing: 0.0,
            ..Default::default()
        };
        assert!(bad.validate().is_err());
    }
}
