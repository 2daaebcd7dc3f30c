//! Periodic Coulomb kernels G_1, G_L and the associated bilinear forms.
//!
//! G_L(x) = c/L + Σ_{k ∈ (2π/L)Z³ \ 0} 4π/(|k|² L³) e^{ik·x}.
//!
//! The constant `c` (the zero mode) is a caller-supplied scalar. Every
//! quantity built from neutral densities is independent of it.

use num_complex::Complex64;

use crate::error::{invalid, Result};
use crate::lattice::{norm2, FourierField, TWO_PI};
use crate::quadrature::{composite_gauss_legendre, gauss_legendre};

const FOUR_PI: f64 = 4.0 * std::f64::consts::PI;

/// Fourier coefficients of the L-periodic Coulomb kernel G_L.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PeriodicCoulombKernel {
    period: usize,
    zero_mode: f64,
}

impl PeriodicCoulombKernel {
    /// Kernel of period `period` with unit-cell zero-mode constant `c`.
    pub fn new(period: usize, c: f64) -> Self {
        Self {
            period,
            zero_mode: c,
        }
    }

    pub fn period(&self) -> usize {
        self.period
    }

    /// The constant c of the unit kernel; G_L carries c/L.
    pub fn zero_mode_constant(&self) -> f64 {
        self.zero_mode
    }

    /// Ĝ_L at the integer mode m (k = 2πm/L).
    pub fn coefficient(&self, m: [i64; 3]) -> f64 {
        let l = self.period as f64;
        if m == [0, 0, 0] {
            return self.zero_mode / l;
        }
        let step = TWO_PI / l;
        let k2 = step * step * (m[0] * m[0] + m[1] * m[1] + m[2] * m[2]) as f64;
        FOUR_PI / (k2 * l * l * l)
    }
}

/// Ĝ_L(k) for a wavevector k that must lie on (2π/L)Z³.
pub fn g_coefficient(period: usize, k: [f64; 3], c: f64) -> Result<f64> {
    if period == 0 {
        return invalid("period must be at least 1");
    }
    let scale = period as f64 / TWO_PI;
    let mut m = [0i64; 3];
    for d in 0..3 {
        let v = k[d] * scale;
        let r = v.round();
        if (v - r).abs() > 1e-9 * v.abs().max(1.0) {
            return invalid(format!("{k:?} is not on the reciprocal mesh of period {period}"));
        }
        m[d] = r as i64;
    }
    Ok(PeriodicCoulombKernel::new(period, c).coefficient(m))
}

fn check_pair(f: &FourierField, g: &FourierField) -> Result<()> {
    if f.period() != g.period() {
        return invalid(format!(
            "fields have different periods ({} vs {})",
            f.period(),
            g.period()
        ));
    }
    if f.extent() != g.extent() {
        return invalid(format!(
            "fields have different Fourier extents ({} vs {})",
            f.extent(),
            g.extent()
        ));
    }
    Ok(())
}

/// D_{G_L}(f, g) = ∫∫_{Λ_L} G_L(x - y) f(x) g(y) dx dy for real L-periodic
/// fields, including the zero-mode term.
pub fn d_periodic(f: &FourierField, g: &FourierField, c: f64) -> Result<f64> {
    check_pair(f, g)?;
    let kernel = PeriodicCoulombKernel::new(f.period(), c);
    let l3 = f.volume();
    let mut sum = 0.0;
    for (idx, (a, b)) in f.coeffs().iter().zip(g.coeffs()).enumerate() {
        let m = f.mode(idx);
        sum += kernel.coefficient(m) * (a.conj() * b).re;
    }
    Ok(l3 * l3 * sum)
}

/// The zero-mode share of [`d_periodic`]: (c/L)·L⁶·f̂(0)ĝ(0).
pub fn zero_mode_part(f: &FourierField, g: &FourierField, c: f64) -> f64 {
    let l = f.period() as f64;
    c / l * l.powi(6) * (f.coeffs()[0].conj() * g.coeffs()[0]).re
}

/// (ρ ⋆_{Λ_L} G_L): V̂(k) = Ĝ_L(k) L³ ρ̂(k).
pub fn hartree_potential(rho: &FourierField, c: f64) -> FourierField {
    let kernel = PeriodicCoulombKernel::new(rho.period(), c);
    let l3 = rho.volume();
    let mut out = rho.clone();
    for idx in 0..out.coeffs().len() {
        let m = rho.mode(idx);
        out.coeffs_mut()[idx] *= kernel.coefficient(m) * l3;
    }
    out
}

/// Estimate of the constant c that makes the cube-truncated G_1 have zero
/// minimum on the grid of half-width `extent`. Depends on the truncation.
pub fn estimate_zero_mode(extent: usize) -> f64 {
    let kernel = PeriodicCoulombKernel::new(1, 0.0);
    let g = FourierField::from_modes(1, extent, |m| Complex64::new(kernel.coefficient(m), 0.0));
    let min = g.to_real_samples().into_iter().fold(f64::INFINITY, f64::min);
    -min
}

/// Orders of the continuum quadrature used by [`d_free`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FreeQuadrature {
    pub radial_panels: usize,
    pub radial_order: usize,
    pub polar_order: usize,
    pub azimuthal_points: usize,
}

impl Default for FreeQuadrature {
    fn default() -> Self {
        Self {
            radial_panels: 6,
            radial_order: 12,
            polar_order: 20,
            azimuthal_points: 40,
        }
    }
}

/// Whole-space Coulomb interaction D(f, g) = (2π)⁻³ ∫ 4π/|k|² conj(f̂) ĝ dk of
/// two real fields supported in the L-cell.
///
/// f̂ is the continuous transform obtained by grid quadrature over Λ_L and
/// is resolved up to the grid Nyquist wavenumber πN/L. The k-integral uses
/// Gauss-Legendre in |k| and cos θ and a uniform rule in φ.
pub fn d_free(f: &FourierField, g: &FourierField, quad: &FreeQuadrature) -> Result<f64> {
    check_pair(f, g)?;
    if !f.is_real(1e-10) || !g.is_real(1e-10) {
        return invalid("d_free expects real-valued fields");
    }
    let n = f.grid_len();
    let l = f.period() as f64;
    let h = l / n as f64;
    let fs = f.to_real_samples();
    let same = std::ptr::eq(f, g);
    let gs = if same { Vec::new() } else { g.to_real_samples() };
    let coords: Vec<f64> = (0..n)
        .map(|i| {
            let s = if i > f.extent() { i as i64 - n as i64 } else { i as i64 };
            s as f64 * h
        })
        .collect();

    let kmax = std::f64::consts::PI * n as f64 / l;
    let radial = composite_gauss_legendre(0.0, kmax, quad.radial_panels, quad.radial_order);
    let (ct, ctw) = gauss_legendre(quad.polar_order);
    let dphi = TWO_PI / quad.azimuthal_points as f64;
    let cell = h * h * h;

    let mut phase = [vec![Complex64::new(0.0, 0.0); n], vec![Complex64::new(0.0, 0.0); n], vec![Complex64::new(0.0, 0.0); n]];
    let mut total = 0.0;
    for &(k, wk) in &radial {
        let mut shell = 0.0;
        for (c, wc) in ct.iter().zip(&ctw) {
            let s = (1.0 - c * c).max(0.0).sqrt();
            let mut ring = 0.0;
            for p in 0..quad.azimuthal_points {
                let phi = dphi * p as f64;
                let kv = [k * s * phi.cos(), k * s * phi.sin(), k * c];
                for d in 0..3 {
                    for (ph, x) in phase[d].iter_mut().zip(&coords) {
                        *ph = Complex64::from_polar(1.0, -kv[d] * x);
                    }
                }
                let fk = transform_at(&fs, &phase, n) * cell;
                let prod = if same {
                    fk.norm_sqr()
                } else {
                    let gk = transform_at(&gs, &phase, n) * cell;
                    (fk.conj() * gk).re
                };
                ring += prod;
            }
            shell += wc * ring * dphi;
        }
        total += wk * shell;
    }
    // (2π)⁻³ · 4π · ∫ dk ∫ dΩ (the k² of the volume element cancels 1/k²).
    Ok(total * FOUR_PI / TWO_PI.powi(3))
}

fn transform_at(samples: &[f64], phase: &[Vec<Complex64>; 3], n: usize) -> Complex64 {
    let mut acc = Complex64::new(0.0, 0.0);
    for a in 0..n {
        let mut plane = Complex64::new(0.0, 0.0);
        for b in 0..n {
            let row = &samples[(a * n + b) * n..(a * n + b + 1) * n];
            let line: Complex64 = row.iter().zip(&phase[2]).map(|(v, p)| p * *v).sum();
            plane += phase[1][b] * line;
        }
        acc += phase[0][a] * plane;
    }
    acc
}

/// Whole-space D(f, g) of two normalized Gaussians (width σ₁, σ₂) at distance d.
pub fn gaussian_pair_coulomb(sigma1: f64, sigma2: f64, distance: f64) -> f64 {
    let s = (sigma1 * sigma1 + sigma2 * sigma2).sqrt();
    if distance < 1e-12 * s {
        return (2.0 / std::f64::consts::PI).sqrt() / s;
    }
    libm::erf(distance / (std::f64::consts::SQRT_2 * s)) / distance
}

/// |k|² of mode m in a box of the given period.
pub(crate) fn k_squared(period: usize, m: [i64; 3]) -> f64 {
    let step = TWO_PI / period as f64;
    norm2(m.map(|c| c as f64 * step))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn cosine(period: usize, extent: usize, m0: [i64; 3]) -> FourierField {
        let neg = m0.map(|c| -c);
        FourierField::from_modes(period, extent, |m| {
            if m == m0 || m == neg {
                Complex64::new(0.5, 0.0)
            } else {
                Complex64::new(0.0, 0.0)
            }
        })
    }

    fn gaussian(period: usize, extent: usize, sigma: f64, center: [f64; 3]) -> FourierField {
        let norm = (TWO_PI * sigma * sigma).powf(-1.5);
        crate::lattice::periodize_defect(
            |x| {
                let r2 = (0..3).map(|d| (x[d] - center[d]).powi(2)).sum::<f64>();
                norm * (-r2 / (2.0 * sigma * sigma)).exp()
            },
            period,
            extent,
        )
    }

    #[test]
    fn kernel_coefficients() {
        let c = g_coefficient(1, [2.0 * PI, 0.0, 0.0], 0.0).unwrap();
        assert!((c - 1.0 / PI).abs() < 1e-12);
        let c = g_coefficient(2, [PI, 0.0, 0.0], 0.0).unwrap();
        assert!((c - 1.0 / (2.0 * PI)).abs() < 1e-12);
        assert_eq!(g_coefficient(1, [0.0; 3], 0.0).unwrap(), 0.0);
        assert!((g_coefficient(2, [0.0; 3], 3.0).unwrap() - 1.5).abs() < 1e-15);
        assert!(g_coefficient(1, [1.0, 0.0, 0.0], 0.0).is_err());
    }

    #[test]
    fn kernel_scaling_and_positivity() {
        // G_L(x) = G_1(x/L)/L, so Ĝ_L(m) = Ĝ_1(m)/L mode by mode.
        let unit = PeriodicCoulombKernel::new(1, 0.7);
        for l in 1..=4usize {
            let big = PeriodicCoulombKernel::new(l, 0.7);
            for m in [[1, 0, 0], [1, 2, -1], [0, 0, 3]] {
                let expected = unit.coefficient(m) / l as f64;
                assert!((big.coefficient(m) - expected).abs() < 1e-15);
                assert!(big.coefficient(m) > 0.0);
            }
            assert!((big.coefficient([0; 3]) - 0.7 / l as f64).abs() < 1e-15);
        }
    }

    #[test]
    fn single_mode_interaction() {
        let f = cosine(1, 3, [1, 0, 0]);
        let d = d_periodic(&f, &f, 0.0).unwrap();
        assert!((d - 1.0 / (2.0 * PI)).abs() < 1e-14);
    }

    #[test]
    fn neutral_fields_ignore_the_zero_mode() {
        let f = cosine(1, 3, [1, 1, 0]);
        let g = &gaussian(1, 3, 0.2, [0.1, 0.0, 0.0]) + &cosine(1, 3, [1, 1, 0]);
        let a = d_periodic(&f, &g, 0.0).unwrap();
        let b = d_periodic(&f, &g, 5.0).unwrap();
        assert!((a - b).abs() <= 1e-14);
    }

    #[test]
    fn mismatched_periods_rejected() {
        let f = FourierField::zeros(1, 2);
        let g = FourierField::zeros(2, 2);
        assert!(d_periodic(&f, &g, 0.0).is_err());
    }

    #[test]
    fn hartree_of_cosine() {
        let rho = cosine(1, 3, [1, 0, 0]);
        let v = hartree_potential(&rho, 0.0);
        let expected = cosine(1, 3, [1, 0, 0]).scaled(1.0 / PI);
        assert!((&v - &expected).l2_norm() < 1e-14);
        let zero = hartree_potential(&FourierField::zeros(1, 3), 0.0);
        assert!(zero.l2_norm() == 0.0);
    }

    #[test]
    fn spectral_poisson_equation() {
        for l in [1usize, 2] {
            let rho = &gaussian(l, 6 * l, 0.15, [0.05, -0.1, 0.0]) + &FourierField::constant(l, 6 * l, 0.3);
            let v = hartree_potential(&rho, 0.0);
            let mut lap = v.clone();
            for idx in 0..lap.coeffs().len() {
                let k2 = k_squared(l, v.mode(idx));
                lap.coeffs_mut()[idx] *= k2;
            }
            let mut target = rho.scaled(4.0 * PI);
            target.coeffs_mut()[0] = Complex64::new(0.0, 0.0);
            let rel = (&lap - &target).l2_norm() / target.l2_norm();
            assert!(rel < 1e-10, "L = {l}: {rel}");
        }
    }

    #[test]
    fn dilation_scales_as_inverse_length() {
        // Charge-preserving dilation f_L(x) = L⁻³ f(x/L) keeps the coefficient
        // of mode m, and D_{G_L}(f_L, f_L) = D_{G_1}(f, f) / L.
        let f = &gaussian(1, 5, 0.12, [0.0; 3]) - &FourierField::constant(1, 5, 1.0);
        let unit = d_periodic(&f, &f, 0.4).unwrap();
        for l in 2..=3usize {
            let scale = (l as f64).powi(-3);
            let dilated = FourierField::from_modes(l, 5, |m| f.coefficient(m) * scale);
            let d = d_periodic(&dilated, &dilated, 0.4).unwrap();
            assert!((d * l as f64 - unit).abs() < 1e-10 * unit.abs());
        }
    }

    #[test]
    fn zero_mode_estimate_is_positive() {
        let c = estimate_zero_mode(6);
        assert!(c > 0.0 && c.is_finite());
    }

    #[test]
    fn free_self_energy_of_gaussian() {
        let sigma = 0.1;
        let f = gaussian(1, 12, sigma, [0.0; 3]);
        let d = d_free(&f, &f, &FreeQuadrature::default()).unwrap();
        let exact = 1.0 / (sigma * PI.sqrt());
        assert!((d - exact).abs() < 1e-6 * exact, "{d} vs {exact}");
        assert!((gaussian_pair_coulomb(sigma, sigma, 0.0) - exact).abs() < 1e-14);
        assert_eq!(d_free(&FourierField::zeros(1, 4), &FourierField::zeros(1, 4), &FreeQuadrature::default()).unwrap(), 0.0);
    }

    #[test]
    fn free_interaction_of_separated_gaussians() {
        let sigma = 0.05;
        let a = gaussian(1, 15, sigma, [-0.2, 0.0, 0.0]);
        let b = gaussian(1, 15, sigma, [0.2, 0.0, 0.0]);
        let quad = FreeQuadrature {
            polar_order: 32,
            azimuthal_points: 48,
            ..FreeQuadrature::default()
        };
        let d = d_free(&a, &b, &quad).unwrap();
        assert!((d - 2.5).abs() < 1e-4, "{d}");
        assert!((d - gaussian_pair_coulomb(sigma, sigma, 0.4)).abs() < 1e-4);
    }

    #[test]
    fn free_interaction_rejects_complex_input() {
        let mut f = FourierField::zeros(1, 2);
        f.coeffs_mut()[1] = Complex64::new(0.0, 1.0);
        assert!(d_free(&f, &f, &FreeQuadrature::default()).is_err());
    }
}
