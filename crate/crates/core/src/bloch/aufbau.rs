use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

/// Eigenvalues closer than this are treated as degenerate when splitting a
/// fractional frontier occupation.
pub const DEGENERACY_TOL: f64 = 1e-9;

/// How electrons are distributed over a set of fiber spectra.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Filling {
    /// The lowest `n` bands of every fiber.
    Bands(usize),
    /// Every state with λ ≤ εF.
    Threshold(f64),
    /// The lowest `n` states over all fibers together; a degenerate frontier
    /// shell is shared fractionally.
    Total(f64),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Occupations {
    /// occupation[fiber][band] ∈ [0, 1].
    pub values: Vec<Vec<f64>>,
    /// Highest (partially) occupied eigenvalue, -∞ when nothing is filled.
    pub frontier: f64,
}

impl Occupations {
    pub fn total(&self) -> f64 {
        self.values.iter().flatten().sum()
    }
}

/// Aufbau principle on ascending spectra.
pub fn aufbau_fill(spectra: &[&[f64]], filling: Filling) -> Result<Occupations> {
    let mut values: Vec<Vec<f64>> = spectra.iter().map(|s| vec![0.0; s.len()]).collect();
    let mut frontier = f64::NEG_INFINITY;
    match filling {
        Filling::Bands(n) => {
            for (f, spectrum) in spectra.iter().enumerate() {
                if n > spectrum.len() {
                    return invalid(format!(
                        "cannot fill {n} bands: fiber {f} has only {} states",
                        spectrum.len()
                    ));
                }
                let levels: Vec<(f64, usize, usize)> = spectrum.iter().enumerate().map(|(b, &l)| (l, f, b)).collect();
                frontier = frontier.max(fill_lowest(levels, n as f64, &mut values));
            }
        }
        Filling::Threshold(ef) => {
            if ef.is_nan() {
                return invalid("Fermi level is NaN");
            }
            for (f, spectrum) in spectra.iter().enumerate() {
                for (b, &l) in spectrum.iter().enumerate() {
                    if l <= ef {
                        values[f][b] = 1.0;
                        frontier = frontier.max(l);
                    }
                }
            }
        }
        Filling::Total(n) => {
            let available: usize = spectra.iter().map(|s| s.len()).sum();
            if !(n >= 0.0) || n > available as f64 {
                return invalid(format!("cannot place {n} electrons in {available} states"));
            }
            let levels: Vec<(f64, usize, usize)> = spectra
                .iter()
                .enumerate()
                .flat_map(|(f, s)| s.iter().enumerate().map(move |(b, &l)| (l, f, b)))
                .collect();
            frontier = fill_lowest(levels, n, &mut values);
        }
    }
    Ok(Occupations { values, frontier })
}

/// Fills `count` electrons into the lowest levels; returns the frontier.
fn fill_lowest(mut levels: Vec<(f64, usize, usize)>, count: f64, values: &mut [Vec<f64>]) -> f64 {
    if count <= 0.0 || levels.is_empty() {
        return f64::NEG_INFINITY;
    }
    levels.sort_by(|a, b| a.0.total_cmp(&b.0).then((a.1, a.2).cmp(&(b.1, b.2))));
    let last = (count.ceil() as usize).min(levels.len()) - 1;
    let edge = levels[last].0;
    let below = levels.iter().take_while(|l| l.0 < edge - DEGENERACY_TOL).count();
    let shell: Vec<_> = levels[below..]
        .iter()
        .take_while(|l| l.0 <= edge + DEGENERACY_TOL)
        .copied()
        .collect();
    for l in &levels[..below] {
        values[l.1][l.2] = 1.0;
    }
    let share = ((count - below as f64) / shell.len() as f64).clamp(0.0, 1.0);
    for l in &shell {
        values[l.1][l.2] = share;
    }
    shell.last().map(|l| l.0).unwrap_or(edge)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn one_band_per_fiber() {
        let a = [-1.0, 0.5, 2.0];
        let b = [-0.7, 0.9, 1.0];
        let occ = aufbau_fill(&[&a, &b], Filling::Bands(1)).unwrap();
        assert_eq!(occ.values, vec![vec![1.0, 0.0, 0.0], vec![1.0, 0.0, 0.0]]);
        assert_eq!(occ.frontier, -0.7);
    }

    #[test]
    fn threshold_above_everything_fills_all() {
        let a = [-1.0, 0.5, 2.0];
        let occ = aufbau_fill(&[&a], Filling::Threshold(10.0)).unwrap();
        assert_eq!(occ.values, vec![vec![1.0; 3]]);
    }

    #[test]
    fn threshold_in_gap_matches_band_count() {
        let a = [-1.0, -0.9, 2.0];
        let b = [-1.2, -0.5, 1.5];
        let by_count = aufbau_fill(&[&a, &b], Filling::Bands(2)).unwrap();
        let by_level = aufbau_fill(&[&a, &b], Filling::Threshold(0.5)).unwrap();
        assert_eq!(by_count.values, by_level.values);
    }

    #[test]
    fn degenerate_frontier_is_shared() {
        let a = [0.0, 1.0, 1.0, 1.0];
        let occ = aufbau_fill(&[&a], Filling::Total(2.0)).unwrap();
        let third = 1.0 / 3.0;
        assert_eq!(occ.values[0][0], 1.0);
        for v in &occ.values[0][1..] {
            assert!((v - third).abs() < 1e-15);
        }
        assert!((occ.total() - 2.0).abs() < 1e-14);
    }

    #[test]
    fn global_count_crosses_fibers() {
        let a = [0.0, 3.0];
        let b = [1.0, 2.0];
        let occ = aufbau_fill(&[&a, &b], Filling::Total(2.5)).unwrap();
        assert_eq!(occ.values, vec![vec![1.0, 0.0], vec![1.0, 0.5]]);
        assert_eq!(occ.frontier, 2.0);
    }

    #[test]
    fn too_many_electrons() {
        let a = [0.0];
        assert!(aufbau_fill(&[&a], Filling::Bands(2)).is_err());
        assert!(aufbau_fill(&[&a], Filling::Total(1.5)).is_err());
    }
}
