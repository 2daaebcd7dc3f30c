use super::{norm2, LatticeConfig, MeshPoint, TWO_PI};
use crate::error::{invalid, Result};

/// Plane waves e^{i(ξ+k)·x} of an L-periodic box below the kinetic cutoff.
///
/// Kinetic energies are in Hartree, ½|ξ+k|²/a² for lattice constant a.
/// Reciprocal vectors are stored as integer coordinates in units of
/// 2π/period, so a unit-cell basis has `period == 1` and a supercell basis
/// `period == L`. Ordering is by |ξ+k|², ties broken lexicographically.
#[derive(Debug, Clone, PartialEq)]
pub struct PlaneWaveBasis {
    period: usize,
    kpoint: [f64; 3],
    gvectors: Vec<[i64; 3]>,
    kinetic: Vec<f64>,
}

impl PlaneWaveBasis {
    pub fn period(&self) -> usize {
        self.period
    }

    pub fn kpoint(&self) -> [f64; 3] {
        self.kpoint
    }

    pub fn gvectors(&self) -> &[[i64; 3]] {
        &self.gvectors
    }

    /// ½|ξ+k|² for every plane wave.
    pub fn kinetic(&self) -> &[f64] {
        &self.kinetic
    }

    pub fn len(&self) -> usize {
        self.gvectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.gvectors.is_empty()
    }

    pub fn wavevector(&self, i: usize) -> [f64; 3] {
        let step = TWO_PI / self.period as f64;
        let g = self.gvectors[i];
        [
            self.kpoint[0] + step * g[0] as f64,
            self.kpoint[1] + step * g[1] as f64,
            self.kpoint[2] + step * g[2] as f64,
        ]
    }

    /// For every ordered pair (i, j) the flat index of g_i - g_j in a Fourier
    /// cube of half-width `extent`, or `None` when the difference falls
    /// outside the cube. Row-major in (i, j).
    pub fn difference_table(&self, extent: usize) -> Vec<Option<u32>> {
        let n = 2 * extent as i64 + 1;
        let e = extent as i64;
        let wrap = |v: i64| v.rem_euclid(n);
        let mut table = Vec::with_capacity(self.len() * self.len());
        for gi in &self.gvectors {
            for gj in &self.gvectors {
                let d = [gi[0] - gj[0], gi[1] - gj[1], gi[2] - gj[2]];
                if d.iter().all(|c| c.abs() <= e) {
                    let idx = (wrap(d[0]) * n + wrap(d[1])) * n + wrap(d[2]);
                    table.push(Some(idx as u32));
                } else {
                    table.push(None);
                }
            }
        }
        table
    }
}

/// Plane-wave basis of the unit cell at an arbitrary quasi-momentum ξ ∈ Γ*.
pub fn build_basis(config: &LatticeConfig, xi: [f64; 3]) -> Result<PlaneWaveBasis> {
    if !(config.cutoff > 0.0) {
        return invalid(format!("cutoff must be positive, got {}", config.cutoff));
    }
    let pi = std::f64::consts::PI;
    if xi.iter().any(|x| !x.is_finite() || *x < -pi - 1e-12 || *x > pi + 1e-12) {
        return invalid(format!("k-point {xi:?} lies outside the Brillouin zone"));
    }
    let spacing = config.spacing;
    let radius = (2.0 * config.cutoff).sqrt() * spacing;
    let reach = ((radius + pi) / TWO_PI).ceil() as i64;
    let mut entries = Vec::new();
    for a in -reach..=reach {
        for b in -reach..=reach {
            for c in -reach..=reach {
                let q = [
                    xi[0] + TWO_PI * a as f64,
                    xi[1] + TWO_PI * b as f64,
                    xi[2] + TWO_PI * c as f64,
                ];
                let ke = 0.5 * norm2(q) / (spacing * spacing);
                if admitted(ke, config.cutoff) {
                    // Rounded key keeps the ordering transitive under round-off.
                    let key = (2.0 * ke * 1e8).round() as i64;
                    entries.push((key, [a, b, c], ke));
                }
            }
        }
    }
    Ok(finish(1, xi, entries))
}

/// Unit-cell basis at a Brillouin mesh point, computed in exact integer
/// arithmetic so that it tiles the matching supercell basis.
pub fn build_mesh_basis(config: &LatticeConfig, point: &MeshPoint) -> Result<PlaneWaveBasis> {
    if !(config.cutoff > 0.0) {
        return invalid(format!("cutoff must be positive, got {}", config.cutoff));
    }
    let l = point.size as i64;
    let entries = enumerate_exact(config.cutoff, config.spacing, point.size, l, point.index);
    Ok(finish(1, point.coords(), entries))
}

/// Γ-point basis of the supercell Λ_L: all q ∈ (2π/L)Z³ below the cutoff.
pub fn build_supercell_basis(config: &LatticeConfig, size: usize) -> Result<PlaneWaveBasis> {
    if !(config.cutoff > 0.0) {
        return invalid(format!("cutoff must be positive, got {}", config.cutoff));
    }
    if size == 0 {
        return invalid("supercell size must be at least 1");
    }
    let entries = enumerate_exact(config.cutoff, config.spacing, size, 1, [0; 3]);
    Ok(finish(size, [0.0; 3], entries))
}

fn admitted(kinetic: f64, cutoff: f64) -> bool {
    kinetic <= cutoff * (1.0 + 1e-12)
}

/// Wave numbers n = offset + stride·m with ½(2π/(denom·a))²|n|² ≤ cutoff,
/// keyed by the exact integer |n|².
fn enumerate_exact(
    cutoff: f64,
    spacing: f64,
    denom: usize,
    stride: i64,
    offset: [i64; 3],
) -> Vec<(i64, [i64; 3], f64)> {
    let step = TWO_PI / (denom as f64 * spacing);
    let nmax = ((2.0 * cutoff).sqrt() / step).floor() as i64 + 1;
    let lo = |o: i64| (-nmax - o).div_euclid(stride);
    let hi = |o: i64| (nmax - o).div_euclid(stride) + 1;
    let mut entries = Vec::new();
    for a in lo(offset[0])..=hi(offset[0]) {
        for b in lo(offset[1])..=hi(offset[1]) {
            for c in lo(offset[2])..=hi(offset[2]) {
                let n = [
                    offset[0] + stride * a,
                    offset[1] + stride * b,
                    offset[2] + stride * c,
                ];
                let n2 = n[0] * n[0] + n[1] * n[1] + n[2] * n[2];
                let ke = 0.5 * step * step * n2 as f64;
                if admitted(ke, cutoff) {
                    entries.push((n2, [a, b, c], ke));
                }
            }
        }
    }
    entries
}

fn finish(period: usize, kpoint: [f64; 3], mut entries: Vec<(i64, [i64; 3], f64)>) -> PlaneWaveBasis {
    entries.sort_by(|x, y| x.0.cmp(&y.0).then(x.1.cmp(&y.1)));
    let (gvectors, kinetic) = entries.into_iter().map(|(_, g, ke)| (g, ke)).unzip();
    PlaneWaveBasis {
        period,
        kpoint,
        gvectors,
        kinetic,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::brillouin_mesh;
    use std::collections::BTreeSet;

    fn config(cutoff: f64) -> LatticeConfig {
        LatticeConfig::new(cutoff, 1, LatticeConfig::min_grid_n(cutoff, 1.0)).unwrap()
    }

    /// Brute-force count of admitted vectors over a generous index box.
    fn shell_count(cutoff: f64, xi: [f64; 3]) -> usize {
        let mut count = 0;
        for a in -6i64..=6 {
            for b in -6i64..=6 {
                for c in -6i64..=6 {
                    let q = [
                        xi[0] + TWO_PI * a as f64,
                        xi[1] + TWO_PI * b as f64,
                        xi[2] + TWO_PI * c as f64,
                    ];
                    if 0.5 * (q[0] * q[0] + q[1] * q[1] + q[2] * q[2]) <= cutoff {
                        count += 1;
                    }
                }
            }
        }
        count
    }

    #[test]
    fn gamma_point_shells() {
        let b = build_basis(&config(1.0), [0.0; 3]).unwrap();
        assert_eq!(b.gvectors(), &[[0, 0, 0]]);

        let b = build_basis(&config(20.0), [0.0; 3]).unwrap();
        assert_eq!(b.len(), 7);
        assert_eq!(b.gvectors()[0], [0, 0, 0]);
        let rest: BTreeSet<_> = b.gvectors()[1..].iter().copied().collect();
        let expected: BTreeSet<_> = [
            [-1, 0, 0],
            [1, 0, 0],
            [0, -1, 0],
            [0, 1, 0],
            [0, 0, -1],
            [0, 0, 1],
        ]
        .into_iter()
        .collect();
        assert_eq!(rest, expected);
    }

    #[test]
    fn zone_edge_basis_matches_enumeration() {
        let xi = [std::f64::consts::PI, 0.0, 0.0];
        let b = build_basis(&config(20.0), xi).unwrap();
        assert_eq!(b.len(), shell_count(20.0, xi));
    }

    #[test]
    fn ordering_is_by_energy_then_lexicographic() {
        let b = build_basis(&config(60.0), [0.3, -0.2, 1.1]).unwrap();
        for w in b.kinetic().windows(2) {
            assert!(w[0] <= w[1] + 1e-9);
        }
        let b = build_basis(&config(60.0), [0.0; 3]).unwrap();
        for i in 1..b.len() {
            if (b.kinetic()[i] - b.kinetic()[i - 1]).abs() < 1e-12 {
                assert!(b.gvectors()[i - 1] < b.gvectors()[i]);
            }
        }
    }

    #[test]
    fn contains_origin_when_admitted() {
        let b = build_basis(&config(5.0), [1.0, 1.0, 1.0]).unwrap();
        assert!(b.gvectors().contains(&[0, 0, 0]));
        let b = build_basis(&config(5.0), [3.0, 3.0, 3.0]).unwrap();
        assert!(!b.gvectors().contains(&[0, 0, 0]));
    }

    #[test]
    fn rejects_bad_input() {
        let mut c = config(10.0);
        c.cutoff = 0.0;
        assert!(build_basis(&c, [0.0; 3]).is_err());
        assert!(build_basis(&config(10.0), [4.0, 0.0, 0.0]).is_err());
        assert!(build_supercell_basis(&c, 2).is_err());
    }

    #[test]
    fn mesh_bases_tile_the_supercell_basis() {
        let cutoff = 45.0;
        for l in 1..=3 {
            let sc = build_supercell_basis(&config(cutoff), l).unwrap();
            let mut union = Vec::new();
            for p in brillouin_mesh(l).unwrap() {
                let b = build_mesh_basis(&config(cutoff), &p).unwrap();
                for (g, ke) in b.gvectors().iter().zip(b.kinetic()) {
                    let n = [0, 1, 2].map(|d| p.index[d] + l as i64 * g[d]);
                    union.push((n, ke.to_bits()));
                }
            }
            union.sort();
            let mut direct: Vec<_> = sc
                .gvectors()
                .iter()
                .zip(sc.kinetic())
                .map(|(n, ke)| (*n, ke.to_bits()))
                .collect();
            direct.sort();
            assert_eq!(union, direct, "L = {l}");
        }
    }

    #[test]
    fn mesh_basis_agrees_with_float_basis() {
        let c = config(40.0);
        for p in brillouin_mesh(3).unwrap() {
            let exact = build_mesh_basis(&c, &p).unwrap();
            let float = build_basis(&c, p.coords()).unwrap();
            assert_eq!(exact.gvectors(), float.gvectors());
        }
    }
}
