use std::ops::{Add, Sub};
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use super::TWO_PI;
use crate::error::{invalid, Result};

/// An L-periodic scalar field stored by its Fourier-series coefficients
///
/// f(x) = Σ_m a_m e^{i k_m·x},  k_m = 2π m / L,  m ∈ [-M, M]³.
///
/// Coefficients are kept in FFT order (m mod N with N = 2M + 1). The matching
/// real-space grid has points x_s = s·L/N for s ∈ [-M, M]³, all inside
/// Λ_L = [-L/2, L/2)³, stored in the same wrapped order. With this
/// convention ∫_{Λ_L} |f|² = L³ Σ |a_m|² and ∫_{Λ_L} f = L³ a_0.
#[derive(Debug, Clone, PartialEq)]
pub struct FourierField {
    period: usize,
    extent: usize,
    coeffs: Vec<Complex64>,
}

impl FourierField {
    pub fn zeros(period: usize, extent: usize) -> Self {
        let n = 2 * extent + 1;
        Self {
            period,
            extent,
            coeffs: vec![Complex64::new(0.0, 0.0); n * n * n],
        }
    }

    pub fn from_coefficients(period: usize, extent: usize, coeffs: Vec<Complex64>) -> Result<Self> {
        let n = 2 * extent + 1;
        if coeffs.len() != n * n * n {
            return invalid(format!(
                "expected {} Fourier coefficients, got {}",
                n * n * n,
                coeffs.len()
            ));
        }
        Ok(Self {
            period,
            extent,
            coeffs,
        })
    }

    /// Builds a field from a coefficient rule evaluated on every mode.
    pub fn from_modes(period: usize, extent: usize, mut rule: impl FnMut([i64; 3]) -> Complex64) -> Self {
        let mut field = Self::zeros(period, extent);
        for idx in 0..field.coeffs.len() {
            let m = field.mode(idx);
            field.coeffs[idx] = rule(m);
        }
        field
    }

    pub fn constant(period: usize, extent: usize, value: f64) -> Self {
        let mut field = Self::zeros(period, extent);
        field.coeffs[0] = Complex64::new(value, 0.0);
        field
    }

    pub fn period(&self) -> usize {
        self.period
    }

    pub fn extent(&self) -> usize {
        self.extent
    }

    pub fn grid_len(&self) -> usize {
        2 * self.extent + 1
    }

    pub fn volume(&self) -> f64 {
        (self.period as f64).powi(3)
    }

    pub fn coeffs(&self) -> &[Complex64] {
        &self.coeffs
    }

    pub fn coeffs_mut(&mut self) -> &mut [Complex64] {
        &mut self.coeffs
    }

    pub fn same_shape(&self, other: &Self) -> bool {
        self.period == other.period && self.extent == other.extent
    }

    /// Integer mode m of the flat index `idx`.
    pub fn mode(&self, idx: usize) -> [i64; 3] {
        let n = self.grid_len();
        let e = self.extent as i64;
        let unwrap = |v: usize| {
            let v = v as i64;
            if v > e {
                v - n as i64
            } else {
                v
            }
        };
        [unwrap(idx / (n * n)), unwrap((idx / n) % n), unwrap(idx % n)]
    }

    pub fn index_of(&self, m: [i64; 3]) -> Option<usize> {
        let e = self.extent as i64;
        if m.iter().any(|c| c.abs() > e) {
            return None;
        }
        let n = self.grid_len() as i64;
        let w = |v: i64| v.rem_euclid(n);
        Some(((w(m[0]) * n + w(m[1])) * n + w(m[2])) as usize)
    }

    /// Coefficient a_m, zero outside the stored cube.
    pub fn coefficient(&self, m: [i64; 3]) -> Complex64 {
        self.index_of(m)
            .map(|i| self.coeffs[i])
            .unwrap_or(Complex64::new(0.0, 0.0))
    }

    pub fn wavevector(&self, m: [i64; 3]) -> [f64; 3] {
        let step = TWO_PI / self.period as f64;
        m.map(|c| c as f64 * step)
    }

    /// Real-space grid points in storage order.
    pub fn grid_points(&self) -> Vec<[f64; 3]> {
        let n = self.grid_len();
        let h = self.period as f64 / n as f64;
        (0..n * n * n)
            .map(|idx| self.mode(idx).map(|s| s as f64 * h))
            .collect()
    }

    /// Forward transform of real-space samples given in storage order.
    pub fn from_real_samples(period: usize, extent: usize, samples: &[f64]) -> Result<Self> {
        let n = 2 * extent + 1;
        if samples.len() != n * n * n {
            return invalid(format!(
                "expected {} real-space samples, got {}",
                n * n * n,
                samples.len()
            ));
        }
        let mut data: Vec<Complex64> = samples.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        fft3(&mut data, n, false);
        let scale = 1.0 / (n * n * n) as f64;
        data.iter_mut().for_each(|c| *c *= scale);
        Self::from_coefficients(period, extent, data)
    }

    pub fn to_complex_samples(&self) -> Vec<Complex64> {
        let mut data = self.coeffs.clone();
        fft3(&mut data, self.grid_len(), true);
        data
    }

    /// Real part of the field on the grid.
    pub fn to_real_samples(&self) -> Vec<f64> {
        self.to_complex_samples().into_iter().map(|c| c.re).collect()
    }

    /// ∫ over one period.
    pub fn integral(&self) -> f64 {
        self.volume() * self.coeffs[0].re
    }

    /// L² norm over one period, from the coefficients.
    pub fn l2_norm(&self) -> f64 {
        (self.volume() * self.coeffs.iter().map(|c| c.norm_sqr()).sum::<f64>()).sqrt()
    }

    /// L² norm over one period, from grid quadrature of the samples.
    pub fn real_space_l2_norm(&self) -> f64 {
        let samples = self.to_complex_samples();
        let w = self.volume() / samples.len() as f64;
        (w * samples.iter().map(|c| c.norm_sqr()).sum::<f64>()).sqrt()
    }

    /// Largest violation of a_{-m} = conj(a_m).
    pub fn conjugate_asymmetry(&self) -> f64 {
        (0..self.coeffs.len())
            .map(|idx| {
                let m = self.mode(idx);
                let j = self.index_of(m.map(|c| -c)).expect("cube is symmetric");
                (self.coeffs[j] - self.coeffs[idx].conj()).norm()
            })
            .fold(0.0, f64::max)
    }

    pub fn is_real(&self, tol: f64) -> bool {
        let scale = self.coeffs.iter().map(|c| c.norm()).fold(0.0, f64::max).max(1.0);
        self.conjugate_asymmetry() <= tol * scale
    }

    /// f(x - shift), i.e. coefficients multiplied by e^{-i k·shift}.
    pub fn translated(&self, shift: [f64; 3]) -> Self {
        let mut out = self.clone();
        for idx in 0..out.coeffs.len() {
            let k = self.wavevector(self.mode(idx));
            let phase = -(k[0] * shift[0] + k[1] * shift[1] + k[2] * shift[2]);
            out.coeffs[idx] *= Complex64::from_polar(1.0, phase);
        }
        out
    }

    /// Same field on a cube of a different half-width (zero-padding or
    /// truncation of the modes).
    pub fn with_extent(&self, extent: usize) -> Self {
        let mut out = Self::zeros(self.period, extent);
        for idx in 0..out.coeffs.len() {
            out.coeffs[idx] = self.coefficient(out.mode(idx));
        }
        out
    }

    /// Views a Z³-periodic field (period 1) as an L-periodic one: mode m of
    /// the unit cell becomes mode L·m of the supercell cube of half-width L·M.
    pub fn to_supercell(&self, size: usize) -> Self {
        assert_eq!(self.period, 1, "to_supercell expects a unit-cell field");
        let l = size as i64;
        let mut out = Self::zeros(size, self.extent * size);
        for idx in 0..self.coeffs.len() {
            let m = self.mode(idx);
            let j = out.index_of(m.map(|c| c * l)).expect("scaled cube fits");
            out.coeffs[j] = self.coeffs[idx];
        }
        out
    }

    /// Modes of an L-periodic field lying on 2πZ³, as a unit-cell field.
    /// This is the Z³-periodic part (the average over lattice translations).
    pub fn unit_cell_part(&self) -> Self {
        let l = self.period as i64;
        let extent = self.extent / self.period;
        let mut out = Self::zeros(1, extent);
        for idx in 0..out.coeffs.len() {
            let m = out.mode(idx);
            out.coeffs[idx] = self.coefficient(m.map(|c| c * l));
        }
        out
    }

    /// Supremum of |f| estimated on a grid refined by `oversample`.
    pub fn sup_norm(&self, oversample: usize) -> f64 {
        let n = self.grid_len() * oversample.max(1);
        let fine = self.with_extent(n / 2);
        fine.to_complex_samples()
            .iter()
            .map(|c| c.norm())
            .fold(0.0, f64::max)
    }

    pub fn scaled(&self, factor: f64) -> Self {
        let mut out = self.clone();
        out.coeffs.iter_mut().for_each(|c| *c *= factor);
        out
    }

    /// self += alpha * other.
    pub fn axpy(&mut self, alpha: f64, other: &Self) {
        assert!(self.same_shape(other), "field shapes differ");
        for (a, b) in self.coeffs.iter_mut().zip(&other.coeffs) {
            *a += alpha * b;
        }
    }

    /// Real inner product ∫ f g over one period (both fields real).
    pub fn inner(&self, other: &Self) -> f64 {
        assert!(self.same_shape(other), "field shapes differ");
        self.volume()
            * self
                .coeffs
                .iter()
                .zip(&other.coeffs)
                .map(|(a, b)| (a.conj() * b).re)
                .sum::<f64>()
    }
}

impl Add for &FourierField {
    type Output = FourierField;

    fn add(self, rhs: &FourierField) -> FourierField {
        let mut out = self.clone();
        out.axpy(1.0, rhs);
        out
    }
}

impl Sub for &FourierField {
    type Output = FourierField;

    fn sub(self, rhs: &FourierField) -> FourierField {
        let mut out = self.clone();
        out.axpy(-1.0, rhs);
        out
    }
}

/// L-periodization of 1_{Λ_L} ν: ν is sampled on the L-cell grid (whose
/// points all lie in Λ_L) and transformed.
pub fn periodize_defect(nu: impl Fn([f64; 3]) -> f64, period: usize, extent: usize) -> FourierField {
    let grid = FourierField::zeros(period, extent).grid_points();
    let samples: Vec<f64> = grid.into_iter().map(nu).collect();
    FourierField::from_real_samples(period, extent, &samples).expect("sample count matches grid")
}

/// Raw-array variant of [`periodize_defect`]; samples must be finite and
/// laid out in grid storage order.
pub fn periodize_samples(samples: &[f64], period: usize, extent: usize) -> Result<FourierField> {
    if period == 0 {
        return invalid("period must be at least 1");
    }
    if let Some(bad) = samples.iter().position(|v| !v.is_finite()) {
        return invalid(format!("defect sample {bad} is not finite"));
    }
    FourierField::from_real_samples(period, extent, samples)
}

fn plan(n: usize, inverse: bool) -> Arc<dyn Fft<f64>> {
    let mut planner = FftPlanner::new();
    if inverse {
        planner.plan_fft_inverse(n)
    } else {
        planner.plan_fft_forward(n)
    }
}

/// Unnormalized in-place 3D transform of an n³ array in row-major order.
/// `inverse` uses the e^{+i} kernel.
fn fft3(data: &mut [Complex64], n: usize, inverse: bool) {
    let fft = plan(n, inverse);
    // Last axis is contiguous.
    for line in data.chunks_exact_mut(n) {
        fft.process(line);
    }
    let mut buf = vec![Complex64::new(0.0, 0.0); n];
    for a in 0..n {
        for c in 0..n {
            for b in 0..n {
                buf[b] = data[(a * n + b) * n + c];
            }
            fft.process(&mut buf);
            for b in 0..n {
                data[(a * n + b) * n + c] = buf[b];
            }
        }
    }
    for b in 0..n {
        for c in 0..n {
            for a in 0..n {
                buf[a] = data[(a * n + b) * n + c];
            }
            fft.process(&mut buf);
            for a in 0..n {
                data[(a * n + b) * n + c] = buf[a];
            }
        }
    }
}
