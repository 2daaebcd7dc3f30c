//! Nuclear and defect charge distributions as analytic Gaussian mixtures.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::coulomb::{gaussian_pair_coulomb, k_squared};
use crate::error::{invalid, Result};
use crate::lattice::{norm2, FourierField};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NuclearForm {
    Gaussian,
    /// Constant background of density Z (jellium); makes the mean-field
    /// operator the free Laplacian.
    Uniform,
}

/// One smeared nucleus of charge Z per unit cell, centered on the lattice.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NuclearModel {
    pub z: u32,
    pub sigma: f64,
    pub form: NuclearForm,
}

impl NuclearModel {
    pub fn gaussian(z: u32, sigma: f64) -> Self {
        Self {
            z,
            sigma,
            form: NuclearForm::Gaussian,
        }
    }

    pub fn uniform(z: u32) -> Self {
        Self {
            z,
            sigma: 0.0,
            form: NuclearForm::Uniform,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.z == 0 {
            return invalid("nuclear charge Z must be a positive integer");
        }
        if self.form == NuclearForm::Gaussian && !(self.sigma > 0.0 && self.sigma.is_finite()) {
            return invalid(format!("nuclear sigma must be positive, got {}", self.sigma));
        }
        Ok(())
    }

    /// Fourier coefficient of μ_per at wavevector k ∈ 2πZ³.
    fn coefficient(&self, k2: f64) -> f64 {
        let z = self.z as f64;
        match self.form {
            NuclearForm::Gaussian => z * (-0.5 * self.sigma * self.sigma * k2).exp(),
            NuclearForm::Uniform => {
                if k2 == 0.0 {
                    z
                } else {
                    0.0
                }
            }
        }
    }
}

/// μ_per(x) = Σ_R Z m(x - R) as an L-periodic field; only modes on 2πZ³
/// are populated.
pub fn mu_field(model: &NuclearModel, period: usize, extent: usize) -> Result<FourierField> {
    model.validate()?;
    let l = period as i64;
    Ok(FourierField::from_modes(period, extent, |m| {
        if m.iter().all(|c| c % l == 0) {
            Complex64::new(model.coefficient(k_squared(1, m.map(|c| c / l))), 0.0)
        } else {
            Complex64::new(0.0, 0.0)
        }
    }))
}

/// One normalized Gaussian component of a defect density.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DefectSite {
    pub center: [f64; 3],
    pub amplitude: f64,
    pub width: f64,
}

/// Defect charge ν as a finite Gaussian mixture on R³.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DefectCharge {
    #[serde(default)]
    pub sites: Vec<DefectSite>,
}

impl DefectCharge {
    pub fn new(sites: Vec<DefectSite>) -> Self {
        Self { sites }
    }

    pub fn is_empty(&self) -> bool {
        self.sites.is_empty()
    }

    pub fn total_charge(&self) -> f64 {
        self.sites.iter().map(|s| s.amplitude).sum()
    }

    pub fn validate(&self) -> Result<()> {
        for (i, s) in self.sites.iter().enumerate() {
            if !(s.width > 0.0 && s.width.is_finite()) {
                return invalid(format!("defect.sites[{i}].width must be positive"));
            }
            if !s.amplitude.is_finite() || s.center.iter().any(|c| !c.is_finite()) {
                return invalid(format!("defect.sites[{i}] has non-finite entries"));
            }
        }
        Ok(())
    }

    /// ν(x) on R³.
    pub fn density_at(&self, x: [f64; 3]) -> f64 {
        self.sites
            .iter()
            .map(|s| {
                let r2 = norm2([x[0] - s.center[0], x[1] - s.center[1], x[2] - s.center[2]]);
                let norm = (2.0 * std::f64::consts::PI * s.width * s.width).powf(-1.5);
                s.amplitude * norm * (-r2 / (2.0 * s.width * s.width)).exp()
            })
            .sum()
    }

    /// ν̂(k) = ∫ ν(x) e^{-ik·x} dx.
    pub fn transform(&self, k: [f64; 3]) -> Complex64 {
        let k2 = norm2(k);
        self.sites
            .iter()
            .map(|s| {
                let phase = -(k[0] * s.center[0] + k[1] * s.center[1] + k[2] * s.center[2]);
                Complex64::from_polar(s.amplitude * (-0.5 * s.width * s.width * k2).exp(), phase)
            })
            .sum()
    }

    /// Fraction of the charge of site `i` lying outside Λ_L.
    pub fn tail_fraction(&self, i: usize, period: usize) -> f64 {
        let s = &self.sites[i];
        let half = 0.5 * period as f64;
        let scale = std::f64::consts::SQRT_2 * s.width;
        let inside: f64 = s
            .center
            .iter()
            .map(|c| 0.5 * (libm::erf((half - c) / scale) + libm::erf((half + c) / scale)))
            .product();
        (1.0 - inside).max(0.0)
    }

    /// Whole-space self-interaction D(ν, ν).
    pub fn self_coulomb(&self) -> f64 {
        let mut total = 0.0;
        for a in &self.sites {
            for b in &self.sites {
                let d = norm2([
                    a.center[0] - b.center[0],
                    a.center[1] - b.center[1],
                    a.center[2] - b.center[2],
                ])
                .sqrt();
                total += a.amplitude * b.amplitude * gaussian_pair_coulomb(a.width, b.width, d);
            }
        }
        total
    }

    /// ∫_{R³} ν V for a Z³-periodic potential V given on the unit cell.
    pub fn integrate_periodic(&self, potential: &FourierField) -> f64 {
        assert_eq!(potential.period(), 1, "expects a unit-cell potential");
        potential
            .coeffs()
            .iter()
            .enumerate()
            .map(|(idx, a)| {
                let k = potential.wavevector(potential.mode(idx));
                (a * self.transform(k).conj()).re
            })
            .sum()
    }
}

/// ν_L, the L-periodization of ν restricted to Λ_L.
///
/// Coefficients are the exact Gaussian transforms, so the zero mode carries
/// the total charge exactly. The Gaussian tail outside Λ_L (see
/// [`DefectCharge::tail_fraction`]) is folded back rather than truncated.
pub fn nu_field(defect: &DefectCharge, period: usize, extent: usize) -> Result<FourierField> {
    defect.validate()?;
    let half = 0.5 * period as f64;
    for (i, s) in defect.sites.iter().enumerate() {
        if s.center.iter().any(|c| *c < -half || *c >= half) {
            return invalid(format!(
                "defect.sites[{i}].center {:?} lies outside the L = {period} cell",
                s.center
            ));
        }
    }
    let volume = (period as f64).powi(3);
    Ok(FourierField::from_modes(period, extent, |m| {
        let k = m.map(|c| c as f64 * crate::lattice::TWO_PI / period as f64);
        defect.transform(k) / volume
    }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn uniform_background() {
        let mu = mu_field(&NuclearModel::uniform(1), 1, 3).unwrap();
        assert_eq!(mu.coeffs()[0], Complex64::new(1.0, 0.0));
        assert!(mu.coeffs()[1..].iter().all(|c| c.norm() == 0.0));
    }

    #[test]
    fn gaussian_coefficients() {
        let mu = mu_field(&NuclearModel::gaussian(4, 0.08), 1, 4).unwrap();
        assert_eq!(mu.coefficient([0, 0, 0]).re, 4.0);
        // Oracle: Z e^{-σ²|k|²/2} at k = 2π e₁.
        let expected = 4.0 * (-(0.08f64 * 2.0 * PI).powi(2) / 2.0).exp();
        assert!((mu.coefficient([1, 0, 0]).re - expected).abs() < 1e-14);
        assert!((expected - 3.5253).abs() < 1e-4);
        assert!((mu.integral() - 4.0).abs() < 1e-12);
    }

    #[test]
    fn gaussian_is_nonnegative_on_grid() {
        let mu = mu_field(&NuclearModel::gaussian(4, 0.08), 1, 12).unwrap();
        let min = mu.to_real_samples().into_iter().fold(f64::INFINITY, f64::min);
        assert!(min >= -1e-12, "{min}");
    }

    #[test]
    fn rejects_invalid_models() {
        assert!(mu_field(&NuclearModel::gaussian(0, 0.1), 1, 2).is_err());
        assert!(mu_field(&NuclearModel::gaussian(1, 0.0), 1, 2).is_err());
    }

    #[test]
    fn supercell_mu_is_lattice_periodic() {
        let unit = mu_field(&NuclearModel::gaussian(2, 0.1), 1, 5).unwrap();
        let big = mu_field(&NuclearModel::gaussian(2, 0.1), 3, 15).unwrap();
        assert_eq!(big, unit.to_supercell(3));
        for z in [[1.0, 0.0, 0.0], [0.0, -2.0, 1.0]] {
            assert!((&big.translated(z) - &big).l2_norm() < 1e-12);
        }
    }

    #[test]
    fn empty_defect_is_zero() {
        let nu = nu_field(&DefectCharge::default(), 2, 6).unwrap();
        assert_eq!(nu.l2_norm(), 0.0);
    }

    #[test]
    fn single_site_charge() {
        let d = DefectCharge::new(vec![DefectSite {
            center: [0.0; 3],
            amplitude: 1.0,
            width: 0.1,
        }]);
        for l in 1..=3 {
            let nu = nu_field(&d, l, 5 * l).unwrap();
            assert!((nu.integral() - 1.0).abs() < 1e-10);
            assert!((nu.coeffs()[0].re * (l as f64).powi(3) - d.total_charge()).abs() < 1e-12);
        }
    }

    #[test]
    fn vacancy_removes_one_nucleus() {
        let z = 3u32;
        let sigma = 0.09;
        let d = DefectCharge::new(vec![DefectSite {
            center: [0.0; 3],
            amplitude: -(z as f64),
            width: sigma,
        }]);
        for l in 1..=3usize {
            let total = &mu_field(&NuclearModel::gaussian(z, sigma), l, 4 * l).unwrap() + &nu_field(&d, l, 4 * l).unwrap();
            let l3 = (l as f64).powi(3);
            let expected = (z as f64 * l3 - z as f64) / l3;
            assert!((total.coeffs()[0].re - expected).abs() < 1e-12);
        }
    }

    #[test]
    fn sites_must_fit_in_the_cell() {
        let outside = DefectCharge::new(vec![DefectSite {
            center: [0.7, 0.0, 0.0],
            amplitude: 1.0,
            width: 0.1,
        }]);
        assert!(nu_field(&outside, 1, 4).is_err());
        assert!(nu_field(&outside, 2, 4).is_ok());
        assert!(outside.tail_fraction(0, 1) > 0.4);
        assert!(outside.tail_fraction(0, 2) < 1e-2);
    }

    #[test]
    fn analytic_coefficients_match_sampled_periodization() {
        let d = DefectCharge::new(vec![
            DefectSite {
                center: [0.1, -0.05, 0.0],
                amplitude: 0.7,
                width: 0.06,
            },
            DefectSite {
                center: [-0.1, 0.0, 0.05],
                amplitude: -0.4,
                width: 0.05,
            },
        ]);
        let analytic = nu_field(&d, 1, 24).unwrap();
        let sampled = crate::lattice::periodize_defect(|x| d.density_at(x), 1, 24);
        assert!((&analytic - &sampled).l2_norm() < 1e-9 * analytic.l2_norm());
    }

    #[test]
    fn self_coulomb_of_dipole() {
        let d = DefectCharge::new(vec![
            DefectSite {
                center: [-0.2, 0.0, 0.0],
                amplitude: 1.0,
                width: 0.05,
            },
            DefectSite {
                center: [0.2, 0.0, 0.0],
                amplitude: -1.0,
                width: 0.05,
            },
        ]);
        let own = gaussian_pair_coulomb(0.05, 0.05, 0.0);
        let cross = gaussian_pair_coulomb(0.05, 0.05, 0.4);
        assert!((d.self_coulomb() - 2.0 * (own - cross)).abs() < 1e-12);
    }
}
