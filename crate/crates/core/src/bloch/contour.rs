use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::BlochFiber;
use crate::error::{invalid, Error, Result};
use crate::linalg::{identity, solve, CMat};
use crate::quadrature::gauss_legendre;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ContourOptions {
    /// Gauss-Legendre nodes on each side (and on each panel of the edge
    /// crossing εF).
    pub nodes_per_side: usize,
    /// Smallest allowed distance between εF and an eigenvalue.
    pub clearance: f64,
}

impl Default for ContourOptions {
    fn default() -> Self {
        Self {
            nodes_per_side: 16,
            clearance: 1e-6,
        }
    }
}

struct Rectangle {
    corners: [Complex64; 4],
    right_panels: usize,
}

/// Square box [lower - g, εF] × [-h, h], h half its width, with g the
/// distance from εF to the nearest eigenvalue and lower a Gershgorin bound.
/// The right edge is split into panels no longer than 2g.
fn rectangle(fiber: &BlochFiber, fermi_level: f64, options: &ContourOptions) -> Result<Rectangle> {
    if options.nodes_per_side == 0 || !fermi_level.is_finite() {
        return invalid("contour needs at least one node per side and a finite Fermi level");
    }
    let h = fiber.hamiltonian();
    let n = h.nrows();
    let nearest = fiber
        .eigenvalues()
        .iter()
        .map(|l| (l - fermi_level).abs())
        .fold(f64::INFINITY, f64::min);
    if nearest < options.clearance {
        return Err(Error::IllConditioned(format!(
            "an eigenvalue lies within {} of the contour at {fermi_level}",
            options.clearance
        )));
    }
    let lower = (0..n)
        .map(|i| {
            let off: f64 = (0..n).filter(|&j| j != i).map(|j| h[(i, j)].norm()).sum();
            h[(i, i)].re - off
        })
        .fold(f64::INFINITY, f64::min)
        .min(fermi_level);
    let right = fermi_level;
    let left = lower - nearest;
    let half_height = 0.5 * (right - left);
    // Slack against round-off pushing an exact ratio past an integer.
    let right_panels = ((1.0 - 1e-12) * 2.0 * half_height / (2.0 * nearest)).ceil().max(1.0) as usize;
    Ok(Rectangle {
        corners: [
            Complex64::new(right, -half_height),
            Complex64::new(right, half_height),
            Complex64::new(left, half_height),
            Complex64::new(left, -half_height),
        ],
        right_panels,
    })
}

/// Quadrature nodes [`contour_projector`] uses for this fiber.
pub fn contour_node_count(fiber: &BlochFiber, fermi_level: f64, options: &ContourOptions) -> Result<usize> {
    let r = rectangle(fiber, fermi_level, options)?;
    Ok(options.nodes_per_side * (3 + r.right_panels))
}

/// (1/2πi)∮ (z - H)⁻¹ dz around a rectangle whose right edge crosses the
/// real axis at εF, i.e. the spectral projector onto eigenvalues below εF.
///
/// Resolvents are computed by LU solves; the eigenvalues only fix the box.
pub fn contour_projector(fiber: &BlochFiber, fermi_level: f64, options: &ContourOptions) -> Result<CMat> {
    let Rectangle { corners, right_panels } = rectangle(fiber, fermi_level, options)?;
    let h = fiber.hamiltonian();
    let n = h.nrows();
    let (nodes, weights) = gauss_legendre(options.nodes_per_side);
    let mut shifted = h.clone();
    let id = identity(n);
    let mut sum = CMat::zeros(n, n);
    for side in 0..4 {
        let panels = if side == 0 { right_panels } else { 1 };
        for p in 0..panels {
            let a = corners[side] + (corners[(side + 1) % 4] - corners[side]) * (p as f64 / panels as f64);
            let b = corners[side] + (corners[(side + 1) % 4] - corners[side]) * ((p + 1) as f64 / panels as f64);
            let half = (b - a) * 0.5;
            let mid = (a + b) * 0.5;
            for (t, w) in nodes.iter().zip(&weights) {
                let z = mid + half * *t;
                for j in 0..n {
                    for i in 0..n {
                        shifted[(i, j)] = -h[(i, j)];
                    }
                    shifted[(j, j)] += z;
                }
                let resolvent = solve(&shifted, &id);
                let factor = half * *w;
                for j in 0..n {
                    for i in 0..n {
                        sum[(i, j)] += resolvent[(i, j)] * factor;
                    }
                }
            }
        }
    }
    let scale = Complex64::new(0.0, -1.0 / (2.0 * std::f64::consts::PI));
    let mut p = CMat::zeros(n, n);
    for j in 0..n {
        for i in 0..n {
            p[(i, j)] = (sum[(i, j)] + sum[(j, i)].conj() * -1.0) * 0.5 * scale;
        }
    }
    Ok(p)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bloch::assemble_fiber;
    use crate::lattice::{build_basis, FourierField, LatticeConfig};
    use crate::linalg::{frobenius, trace};

    fn free_fiber() -> BlochFiber {
        let c = LatticeConfig::new(25.0, 1, 5).unwrap();
        assemble_fiber(build_basis(&c, [0.3, 0.0, 0.0]).unwrap(), &FourierField::zeros(1, 2)).unwrap()
    }

    #[test]
    fn free_projector_onto_lowest_shell() {
        let f = free_fiber();
        let ef = 0.5 * (f.eigenvalues()[0] + f.eigenvalues()[1]);
        let p = contour_projector(&f, ef, &ContourOptions::default()).unwrap();
        assert_eq!(contour_node_count(&f, ef, &ContourOptions::default()).unwrap(), 64);
        let mut occ = vec![0.0; f.band_count()];
        occ[0] = 1.0;
        let spectral = f.density_matrix(&occ);
        assert!(frobenius(&(&p - &spectral)) < 1e-8);
        assert!((trace(&p).re - 1.0).abs() < 1e-8);
        assert!(frobenius(&(&p * &p - &p)) < 1e-8);
    }

    #[test]
    fn eigenvalue_on_contour_is_ill_conditioned() {
        let f = free_fiber();
        let ef = f.eigenvalues()[0];
        assert!(matches!(
            contour_projector(&f, ef, &ContourOptions::default()),
            Err(Error::IllConditioned(_))
        ));
    }
}
