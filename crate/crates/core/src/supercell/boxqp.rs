//! Convex quadratic programs over the box [0, 1]^m, optionally on a
//! hyperplane Σ w_i f_i = s, by a primal active-set method.

use faer::linalg::solvers::Solve;
use faer::Mat;

use crate::error::{Error, Result};

#[derive(Clone, Copy, PartialEq, Eq)]
enum Bound {
    Free,
    Lower,
    Upper,
}

const STEP_TOL: f64 = 1e-15;
const MULTIPLIER_TOL: f64 = 1e-13;

/// Minimizes ½fᵀBf + gᵀf over 0 ≤ f ≤ 1, and Σ w_i f_i = s when
/// `weights` is given, starting from the feasible point `start`. `b` is
/// row-major m×m and positive semidefinite; weights are positive.
pub(crate) fn box_qp(b: &[f64], g: &[f64], weights: Option<&[f64]>, start: &[f64]) -> Result<Vec<f64>> {
    let m = g.len();
    if b.len() != m * m || start.len() != m || weights.is_some_and(|w| w.len() != m) {
        return Err(Error::InvalidArgument("box QP dimensions disagree".into()));
    }
    let mut f = start.to_vec();
    let mut state: Vec<Bound> = f
        .iter()
        .map(|&v| match v {
            v if v <= 0.0 => Bound::Lower,
            v if v >= 1.0 => Bound::Upper,
            _ => Bound::Free,
        })
        .collect();
    for (v, s) in f.iter_mut().zip(&state) {
        match s {
            Bound::Lower => *v = 0.0,
            Bound::Upper => *v = 1.0,
            Bound::Free => {}
        }
    }
    let scale = (0..m).map(|i| b[i * m + i].abs()).fold(0.0, f64::max).max(1.0);
    let ridge = 1e-14 * scale;
    // Set after a full Newton step: the free subproblem is solved.
    let mut stationary = false;
    for _ in 0..(50 * m + 50) {
        let r: Vec<f64> = (0..m)
            .map(|i| g[i] + (0..m).map(|j| b[i * m + j] * f[j]).sum::<f64>())
            .collect();
        let free: Vec<usize> = (0..m).filter(|&i| state[i] == Bound::Free).collect();
        let (p, lambda) = newton_direction(b, &r, &free, weights, ridge, &state);
        let pmax = p.iter().fold(0.0, |a: f64, v| a.max(v.abs()));
        if stationary || pmax < STEP_TOL {
            // Multipliers of active bounds: r_i + λw_i ≥ 0 at 0, ≤ 0 at 1.
            let mut worst: Option<(usize, f64)> = None;
            for i in 0..m {
                let shifted = r[i] + lambda * weights.map_or(0.0, |w| w[i]);
                let violation = match state[i] {
                    Bound::Lower => -shifted,
                    Bound::Upper => shifted,
                    Bound::Free => continue,
                };
                if violation > MULTIPLIER_TOL * scale && worst.is_none_or(|(_, w)| violation > w) {
                    worst = Some((i, violation));
                }
            }
            match worst {
                None => return Ok(f),
                Some((i, _)) => state[i] = Bound::Free,
            }
            stationary = false;
            continue;
        }
        let mut alpha = 1.0;
        let mut blocking = None;
        for (k, &i) in free.iter().enumerate() {
            let (limit, bound) = if p[k] < 0.0 {
                (-f[i] / p[k], Bound::Lower)
            } else if p[k] > 0.0 {
                ((1.0 - f[i]) / p[k], Bound::Upper)
            } else {
                continue;
            };
            if limit < alpha {
                alpha = limit;
                blocking = Some((i, bound));
            }
        }
        for (k, &i) in free.iter().enumerate() {
            f[i] = (f[i] + alpha * p[k]).clamp(0.0, 1.0);
        }
        match blocking {
            Some((i, bound)) => {
                state[i] = bound;
                f[i] = if bound == Bound::Lower { 0.0 } else { 1.0 };
            }
            None => stationary = true,
        }
    }
    Err(Error::NonConvergence {
        iterations: 50 * m + 50,
        residuals: Vec::new(),
    })
}

/// Equality-constrained Newton step on the free variables, and the
/// multiplier of the weighted sum (zero without the constraint).
fn newton_direction(
    b: &[f64],
    r: &[f64],
    free: &[usize],
    weights: Option<&[f64]>,
    ridge: f64,
    state: &[Bound],
) -> (Vec<f64>, f64) {
    let m = r.len();
    let k = free.len();
    let constrained = weights.is_some();
    let w = |i: usize| weights.map_or(1.0, |w| w[i]);
    if k == 0 || (constrained && k == 1) {
        let lambda = if !constrained {
            0.0
        } else if k == 1 {
            -r[free[0]] / w(free[0])
        } else {
            // Any λ in [-min_lower r/w, -max_upper r/w] certifies optimality.
            let lo = (0..m)
                .filter(|&i| state[i] == Bound::Lower)
                .map(|i| r[i] / w(i))
                .fold(f64::INFINITY, f64::min);
            let hi = (0..m)
                .filter(|&i| state[i] == Bound::Upper)
                .map(|i| r[i] / w(i))
                .fold(f64::NEG_INFINITY, f64::max);
            match (lo.is_finite(), hi.is_finite()) {
                (true, true) => -0.5 * (lo + hi),
                (true, false) => -lo,
                (false, true) => -hi,
                (false, false) => 0.0,
            }
        };
        return (vec![0.0; k], lambda);
    }
    let n = if constrained { k + 1 } else { k };
    let mut lhs = Mat::<f64>::zeros(n, n);
    let mut rhs = Mat::<f64>::zeros(n, 1);
    for (u, &i) in free.iter().enumerate() {
        for (v, &j) in free.iter().enumerate() {
            lhs[(u, v)] = b[i * m + j];
        }
        lhs[(u, u)] += ridge;
        rhs[(u, 0)] = -r[i];
        if constrained {
            lhs[(u, k)] = w(i);
            lhs[(k, u)] = w(i);
        }
    }
    let sol = lhs.partial_piv_lu().solve(&rhs);
    let p = (0..k).map(|u| sol[(u, 0)]).collect();
    let lambda = if constrained { sol[(k, 0)] } else { 0.0 };
    (p, lambda)
}
