use std::f64::consts::PI;

use crate::OracleError;

/// D(f, g) = ∫∫ G_L(x - y) f(x) g(y) dx dy over [-L/2, L/2)³ by a direct
/// double sum on an n³ grid, with
/// G_L(r) = c/L + Σ_{0 < |m|∞ ≤ M} 4π/(|k_m|² L³) e^{ik_m·r}, k_m = 2πm/L.
///
/// Exact for trigonometric polynomials resolved by the grid when
/// M = (n - 1)/2; larger M aliases onto resolved modes.
pub fn oracle_coulomb(
    f: impl Fn([f64; 3]) -> f64,
    g: impl Fn([f64; 3]) -> f64,
    period: f64,
    n: usize,
    zero_mode: f64,
    series_cutoff: usize,
) -> Result<f64, OracleError> {
    if n == 0 || n > 24 {
        return Err(OracleError::GridTooLarge(n));
    }
    if !(period > 0.0) {
        return Err(OracleError::Invalid("period must be positive".into()));
    }
    let h = period / n as f64;
    let points: Vec<[f64; 3]> = (0..n * n * n)
        .map(|idx| {
            let c = [idx / (n * n), (idx / n) % n, idx % n];
            c.map(|i| -0.5 * period + i as f64 * h)
        })
        .collect();
    let fs: Vec<f64> = points.iter().map(|&x| f(x)).collect();
    let gs: Vec<f64> = points.iter().map(|&x| g(x)).collect();

    // G on the grid of differences (a, b, c)·h, a, b, c ∈ 0..n (periodic).
    let m = series_cutoff as i64;
    let step = 2.0 * PI / period;
    let vol = period.powi(3);
    let mut kernel = vec![zero_mode / period; n * n * n];
    for a in -m..=m {
        for b in -m..=m {
            for c in -m..=m {
                if a == 0 && b == 0 && c == 0 {
                    continue;
                }
                let k2 = step * step * (a * a + b * b + c * c) as f64;
                let coeff = 4.0 * PI / (k2 * vol);
                for (idx, slot) in kernel.iter_mut().enumerate() {
                    let d = [idx / (n * n), (idx / n) % n, idx % n];
                    let phase = step * h * (a * d[0] as i64 + b * d[1] as i64 + c * d[2] as i64) as f64;
                    *slot += coeff * phase.cos();
                }
            }
        }
    }
    let w = h.powi(3);
    let mut total = 0.0;
    for (i, fi) in fs.iter().enumerate() {
        if *fi == 0.0 {
            continue;
        }
        let ci = [i / (n * n), (i / n) % n, i % n];
        for (j, gj) in gs.iter().enumerate() {
            let cj = [j / (n * n), (j / n) % n, j % n];
            let d = [0, 1, 2].map(|t| (ci[t] + n - cj[t]) % n);
            total += kernel[(d[0] * n + d[1]) * n + d[2]] * fi * gj;
        }
    }
    Ok(total * w * w)
}
