//! Fourier coefficients on a periodic grid.
//!
//! Normalization (fixed once, used everywhere):
//!
//! ```text
//! f̂(k_j) = dx/√(2π) · Σ_n f(x_n) e^{−i k_j x_n}
//! f(x_n) = dk/√(2π) · Σ_j f̂(k_j) e^{+i k_j x_n}
//! ```
//!
//! so Parseval holds with unit constant, `dx Σ|f|² = dk Σ|f̂|²`, and the
//! transform of a product is `dk/√(2π) · Σ_m f̂(k−m) ĝ(m)`. The continuous
//! convention with a bare 1/(2π) in front of the forward integral equals
//! `f̂ / √(2π)`; kernels built from a field use that scaling (see
//! [`super::Kernel2::multiplier`]).

use std::cell::RefCell;
use std::collections::HashMap;
use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use super::Grid1D;
use crate::error::{LabError, Result};

type Plans = (Arc<dyn Fft<f64>>, Arc<dyn Fft<f64>>);

thread_local! {
    static PLANS: RefCell<(FftPlanner<f64>, HashMap<usize, Plans>)> =
        RefCell::new((FftPlanner::new(), HashMap::new()));
}

fn plans(n: usize) -> Plans {
    PLANS.with(|cell| {
        let mut guard = cell.borrow_mut();
        let (planner, cache) = &mut *guard;
        if let Some(p) = cache.get(&n) {
            return p.clone();
        }
        let p = (planner.plan_fft_forward(n), planner.plan_fft_inverse(n));
        cache.insert(n, p.clone());
        p
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpectralField {
    pub grid: Grid1D,
    pub coeffs: Vec<Complex64>,
}

impl SpectralField {
    pub fn zeros(grid: Grid1D) -> Self {
        Self { grid, coeffs: vec![Complex64::new(0.0, 0.0); grid.n()] }
    }

    pub fn from_coeffs(grid: Grid1D, coeffs: Vec<Complex64>) -> Result<Self> {
        if coeffs.len() != grid.n() {
            return Err(LabError::InvalidArgument(format!(
                "coefficient count {} does not match grid size {}",
                coeffs.len(),
                grid.n()
            )));
        }
        Ok(Self { grid, coeffs })
    }

    /// Single Fourier mode of amplitude `a` at signed mode number `mode`.
    pub fn single_mode(grid: Grid1D, mode: i64, a: Complex64) -> Self {
        let mut f = Self::zeros(grid);
        f.coeffs[grid.slot(mode)] = a;
        f
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.iter().all(|c| c.re == 0.0 && c.im == 0.0)
    }

    pub fn max_abs(&self) -> f64 {
        self.coeffs.iter().map(|c| c.norm()).fold(0.0, f64::max)
    }

    /// max |f̂(k) − conj f̂(−k)| over non-Nyquist modes.
    pub fn hermitian_defect(&self) -> f64 {
        let g = self.grid;
        (0..g.n())
            .filter(|&j| j != g.nyquist_slot())
            .map(|j| (self.coeffs[j] - self.coeffs[g.slot(-g.mode(j))].conj()).norm())
            .fold(0.0, f64::max)
    }

    pub fn check_same_grid(&self, other: &Self) -> Result<()> {
        if self.grid != other.grid {
            return Err(LabError::GridMismatch(format!("{:?} vs {:?}", self.grid, other.grid)));
        }
        Ok(())
    }

    pub fn scale(&self, a: f64) -> Self {
        self.map_coeffs(|_, c| c * a)
    }

    pub fn scale_c(&self, a: Complex64) -> Self {
        self.map_coeffs(|_, c| c * a)
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.check_same_grid(other)?;
        Ok(self.zip(other, |a, b| a + b))
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.check_same_grid(other)?;
        Ok(self.zip(other, |a, b| a - b))
    }

    /// `self + a·other` without a grid check (internal hot paths).
    pub fn axpy(&self, a: Complex64, other: &Self) -> Self {
        self.zip(other, |x, y| x + a * y)
    }

    pub fn zip(&self, other: &Self, f: impl Fn(Complex64, Complex64) -> Complex64) -> Self {
        let coeffs = self.coeffs.iter().zip(&other.coeffs).map(|(&a, &b)| f(a, b)).collect();
        Self { grid: self.grid, coeffs }
    }

    /// Apply `f(k, c)` per coefficient with k the grid wavenumber of the slot.
    pub fn map_coeffs(&self, f: impl Fn(f64, Complex64) -> Complex64) -> Self {
        let g = self.grid;
        let coeffs = self.coeffs.iter().enumerate().map(|(j, &c)| f(g.wavenumber(j), c)).collect();
        Self { grid: g, coeffs }
    }

    /// Multiply by a Fourier symbol `σ(k)`; the Nyquist slot is zeroed.
    pub fn apply_symbol(&self, sym: impl Fn(f64) -> Complex64) -> Self {
        let g = self.grid;
        let ny = g.nyquist_slot();
        let coeffs = self
            .coeffs
            .iter()
            .enumerate()
            .map(|(j, &c)| if j == ny { Complex64::new(0.0, 0.0) } else { c * sym(g.wavenumber(j)) })
            .collect();
        Self { grid: g, coeffs }
    }

    /// `∂_x^order` as the symbol `(ik)^order`.
    pub fn derivative(&self, order: u32) -> Self {
        self.apply_symbol(|k| Complex64::new(0.0, k).powu(order))
    }

    /// Zero-mean antiderivative `∂_x⁻¹` (the k = 0 coefficient must vanish).
    pub fn antiderivative(&self) -> Result<Self> {
        let scale = self.max_abs().max(f64::MIN_POSITIVE);
        if self.coeffs[0].norm() > 1e-12 * scale {
            return Err(LabError::InvalidArgument(format!(
                "antiderivative of a field with nonzero mean coefficient {:.3e}",
                self.coeffs[0].norm()
            )));
        }
        Ok(self.apply_symbol(|k| if k == 0.0 { Complex64::new(0.0, 0.0) } else { Complex64::new(0.0, -1.0 / k) }))
    }

    /// 2/3-rule truncation (also removes the Nyquist slot).
    pub fn dealiased(&self) -> Self {
        let g = self.grid;
        let coeffs = self
            .coeffs
            .iter()
            .enumerate()
            .map(|(j, &c)| if g.is_retained(j) { c } else { Complex64::new(0.0, 0.0) })
            .collect();
        Self { grid: g, coeffs }
    }

    pub fn without_nyquist(&self) -> Self {
        let mut out = self.clone();
        let ny = self.grid.nyquist_slot();
        out.coeffs[ny] = Complex64::new(0.0, 0.0);
        out
    }

    /// Mean of the physical field, `f̂(0)·√(2π)/length`.
    pub fn mean(&self) -> Complex64 {
        self.coeffs[0] * ((2.0 * PI).sqrt() / self.grid.length())
    }

    /// Discrete L² norm, `(dk Σ|f̂|²)^{1/2}`.
    pub fn l2_norm(&self) -> f64 {
        self.weighted_norm(|_| 1.0)
    }

    /// Fourier-weighted norm `H⁰_s`: `(dk Σ (1+k²)^s |f̂|²)^{1/2}`.
    pub fn hs_weighted(&self, s: u32) -> f64 {
        self.weighted_norm(|k| (1.0 + k * k).powi(s as i32))
    }

    /// Derivative-sum norm `(Σ_{j≤s} ‖∂^j f‖²_{L²})^{1/2}`, evaluated by Parseval.
    pub fn hs_derivative(&self, s: u32) -> f64 {
        let ny = self.grid.nyquist_slot();
        let g = self.grid;
        let sum: f64 = self
            .coeffs
            .iter()
            .enumerate()
            .map(|(j, c)| {
                let k2 = if j == ny { 0.0 } else { g.wavenumber(j).powi(2) };
                let w: f64 = (0..=s).map(|p| k2.powi(p as i32)).sum();
                w * c.norm_sqr()
            })
            .sum();
        (g.dk() * sum).sqrt()
    }

    pub fn weighted_norm(&self, w: impl Fn(f64) -> f64) -> f64 {
        let g = self.grid;
        let sum: f64 = self.coeffs.iter().enumerate().map(|(j, c)| w(g.wavenumber(j)) * c.norm_sqr()).sum();
        (g.dk() * sum).sqrt()
    }
}

/// Forward transform of real samples.
pub fn transform_forward(grid: Grid1D, samples: &[f64]) -> Result<SpectralField> {
    let buf: Vec<Complex64> = samples.iter().map(|&x| Complex64::new(x, 0.0)).collect();
    transform_forward_complex(grid, &buf)
}

pub fn transform_forward_complex(grid: Grid1D, samples: &[Complex64]) -> Result<SpectralField> {
    if samples.len() != grid.n() {
        return Err(LabError::InvalidArgument(format!(
            "sample count {} does not match grid size {}",
            samples.len(),
            grid.n()
        )));
    }
    let mut buf = samples.to_vec();
    plans(grid.n()).0.process(&mut buf);
    let scale = grid.dx() / (2.0 * PI).sqrt();
    for c in &mut buf {
        *c *= scale;
    }
    Ok(SpectralField { grid, coeffs: buf })
}

/// Inverse transform to complex samples.
pub fn transform_inverse(f: &SpectralField) -> Vec<Complex64> {
    let mut buf = f.coeffs.clone();
    plans(f.grid.n()).1.process(&mut buf);
    let scale = f.grid.dk() / (2.0 * PI).sqrt();
    for c in &mut buf {
        *c *= scale;
    }
    buf
}

/// Inverse transform keeping the real part (fields known to be real).
pub fn transform_inverse_real(f: &SpectralField) -> Vec<f64> {
    transform_inverse(f).into_iter().map(|c| c.re).collect()
}

/// Transform of the pointwise product of the inverse transforms, 2/3-dealiased.
pub fn convolve(f: &SpectralField, g: &SpectralField) -> Result<SpectralField> {
    f.check_same_grid(g)?;
    let a = transform_inverse(f);
    let b = transform_inverse(g);
    let prod: Vec<Complex64> = a.iter().zip(&b).map(|(x, y)| x * y).collect();
    Ok(transform_forward_complex(f.grid, &prod)?.dealiased())
}

/// Pointwise map of a real field in physical space (no dealiasing).
pub fn map_physical(f: &SpectralField, op: impl Fn(f64) -> f64) -> SpectralField {
    let x = transform_inverse_real(f);
    let y: Vec<f64> = x.into_iter().map(op).collect();
    transform_forward(f.grid, &y).expect("same grid size")
}

/// Spectral interpolation of a long-wave field: samples `U(εx)` on `fast`
/// from `U(X)` on `slow`, where `fast.length = slow.length/ε`.
///
/// Mode `j` of the slow grid becomes mode `j` of the fast grid (same integer
/// index, wavenumber scaled by ε), so the map is exact zero padding up to
/// the `1/ε` amplitude factor of the transform.
pub fn interpolate_long_wave(slow_field: &SpectralField, fast: Grid1D) -> Result<SpectralField> {
    let slow = slow_field.grid;
    if fast.n() < slow.n() {
        return Err(LabError::GridMismatch(format!("fast grid ({}) coarser than slow grid ({})", fast.n(), slow.n())));
    }
    let ratio = fast.length() / slow.length();
    let mut out = SpectralField::zeros(fast);
    for j in 0..slow.n() {
        if j == slow.nyquist_slot() {
            continue;
        }
        out.coeffs[fast.slot(slow.mode(j))] = slow_field.coeffs[j] * ratio;
    }
    Ok(out)
}
