//! Two-argument Fourier kernels `f(k, l)` acting by
//!
//! ```text
//! (f ⋆ R)(k) = Δl · Σ_m f(k, k−m) R(m)
//! ```
//!
//! Rows are indexed by the grid slot of `k`, columns by the signed offset
//! `l = k − m` in units of Δl = grid dk, truncated to `|l| ≤ half_width·Δl`.
//! Row arithmetic is periodic (slot `k − l` is taken modulo n), matching the
//! aliasing of a discrete convolution on the torus.

use std::f64::consts::PI;

use num_complex::Complex64;

use super::{Grid1D, SpectralField};
use crate::error::{LabError, Result};

const ZERO: Complex64 = Complex64 { re: 0.0, im: 0.0 };

#[derive(Debug, Clone, PartialEq)]
pub struct Kernel2 {
    pub grid: Grid1D,
    half_width: usize,
    values: Vec<Complex64>,
    pub eps: f64,
    pub s_weight: f64,
}

impl Kernel2 {
    pub fn zeros(grid: Grid1D, half_width: usize, eps: f64, s_weight: f64) -> Self {
        assert!(2 * half_width < grid.n(), "kernel support must not wrap around the grid");
        Self { grid, half_width, values: vec![ZERO; grid.n() * (2 * half_width + 1)], eps, s_weight }
    }

    /// Build from a function of (k, l) in physical wavenumbers.
    pub fn from_fn(
        grid: Grid1D,
        half_width: usize,
        eps: f64,
        s_weight: f64,
        mut f: impl FnMut(f64, f64) -> Complex64,
    ) -> Self {
        let mut out = Self::zeros(grid, half_width, eps, s_weight);
        let dl = grid.dk();
        for i in 0..grid.n() {
            let k = grid.wavenumber(i);
            for a in -(half_width as i64)..=(half_width as i64) {
                out.set(i, a, f(k, a as f64 * dl));
            }
        }
        out
    }

    /// Discrete identity: δ_{l=0} with amplitude 1/Δl.
    pub fn identity(grid: Grid1D, eps: f64, s_weight: f64) -> Self {
        let mut out = Self::zeros(grid, 0, eps, s_weight);
        let v = Complex64::new(1.0 / grid.dk(), 0.0);
        for i in 0..grid.n() {
            out.set(i, 0, v);
        }
        out
    }

    /// k-independent kernel of multiplication by the real field behind `psi`:
    /// `f(k, l) = ψ̂(l)/√(2π)`, so that `f ⋆ R` is the transform of `ψ·R`.
    /// The Nyquist row is left at zero: it has no mirror row, and every
    /// kernel built from this one by composition then keeps
    /// f(−k, −l) = conj f(k, l) exactly.
    pub fn multiplier(psi: &SpectralField, half_width: usize, eps: f64, s_weight: f64) -> Self {
        let grid = psi.grid;
        let mut out = Self::zeros(grid, half_width, eps, s_weight);
        let c = 1.0 / (2.0 * PI).sqrt();
        for a in -(half_width as i64)..=(half_width as i64) {
            let v = psi.coeffs[grid.slot(a)] * c;
            for i in (0..grid.n()).filter(|&i| i != grid.nyquist_slot()) {
                out.set(i, a, v);
            }
        }
        out
    }

    #[inline]
    pub fn half_width(&self) -> usize {
        self.half_width
    }

    #[inline]
    pub fn width(&self) -> usize {
        2 * self.half_width + 1
    }

    #[inline]
    pub fn dl(&self) -> f64 {
        self.grid.dk()
    }

    /// Largest retained offset as a wavenumber.
    pub fn l_max(&self) -> f64 {
        self.half_width as f64 * self.dl()
    }

    #[inline]
    fn idx(&self, row: usize, offset: i64) -> usize {
        row * self.width() + (offset + self.half_width as i64) as usize
    }

    #[inline]
    pub fn get(&self, row: usize, offset: i64) -> Complex64 {
        if offset.unsigned_abs() as usize > self.half_width {
            return ZERO;
        }
        self.values[self.idx(row, offset)]
    }

    #[inline]
    pub fn set(&mut self, row: usize, offset: i64, v: Complex64) {
        let i = self.idx(row, offset);
        self.values[i] = v;
    }

    #[inline]
    pub fn row(&self, row: usize) -> &[Complex64] {
        let w = self.width();
        &self.values[row * w..(row + 1) * w]
    }

    pub fn is_zero(&self) -> bool {
        self.values.iter().all(|c| *c == ZERO)
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().map(|c| c.norm()).fold(0.0, f64::max)
    }

    fn check_compatible(&self, other: &Self) -> Result<()> {
        if self.grid != other.grid {
            return Err(LabError::GridMismatch(format!("kernel grids {:?} vs {:?}", self.grid, other.grid)));
        }
        if self.eps != other.eps || self.s_weight != other.s_weight {
            return Err(LabError::GridMismatch(format!(
                "kernel metadata (ε={}, s={}) vs (ε={}, s={})",
                self.eps, self.s_weight, other.eps, other.s_weight
            )));
        }
        Ok(())
    }

    /// `(1 + (l/ε)²)^{s/2}` at offset index `a`.
    #[inline]
    pub fn offset_weight(&self, a: i64) -> f64 {
        let lam = a as f64 * self.dl() / self.eps;
        (1.0 + lam * lam).powf(0.5 * self.s_weight)
    }

    /// `Δl · Σ_l sup_k |f(k, l)| (1 + (l/ε)²)^{s/2}`.
    pub fn xnorm(&self) -> f64 {
        let w = self.width();
        let mut col_sup = vec![0.0f64; w];
        for row in self.values.chunks_exact(w) {
            for (s, v) in col_sup.iter_mut().zip(row) {
                *s = s.max(v.norm());
            }
        }
        let h = self.half_width as i64;
        self.dl() * (-h..=h).zip(&col_sup).map(|(a, s)| s * self.offset_weight(a)).sum::<f64>()
    }

    /// Re-embed with a different half width; entries beyond the new width are
    /// dropped and their X-norm mass returned.
    pub fn with_half_width(&self, half_width: usize) -> (Self, f64) {
        let mut out = Self::zeros(self.grid, half_width, self.eps, self.s_weight);
        let common = half_width.min(self.half_width) as i64;
        for i in 0..self.grid.n() {
            for a in -common..=common {
                out.set(i, a, self.get(i, a));
            }
        }
        let mut dropped = 0.0;
        if self.half_width > half_width {
            let h = self.half_width as i64;
            for a in (-h..=h).filter(|a| a.unsigned_abs() as usize > half_width) {
                let sup = (0..self.grid.n()).map(|i| self.get(i, a).norm()).fold(0.0, f64::max);
                dropped += sup * self.offset_weight(a);
            }
            dropped *= self.dl();
        }
        (out, dropped)
    }

    /// `f ⋆ R`.
    pub fn apply(&self, r: &SpectralField) -> Result<SpectralField> {
        if r.grid != self.grid {
            return Err(LabError::GridMismatch("kernel and field grids differ".into()));
        }
        Ok(self.apply_unchecked(r))
    }

    pub(crate) fn apply_unchecked(&self, r: &SpectralField) -> SpectralField {
        let g = self.grid;
        let n = g.n() as i64;
        let h = self.half_width as i64;
        let dl = self.dl();
        let mut out = SpectralField::zeros(g);
        for i in 0..g.n() {
            let row = self.row(i);
            let mut acc = ZERO;
            for (c, a) in row.iter().zip(-h..=h) {
                acc += c * r.coeffs[(i as i64 - a).rem_euclid(n) as usize];
            }
            out.coeffs[i] = acc * dl;
        }
        out
    }

    /// Composition `(f∘g)(k, k−m) = Δl Σ_l f(k, k−l) g(l, l−m)` with the full
    /// support `|k−m| ≤ (w_f + w_g)`.
    pub fn compose(&self, other: &Self) -> Result<Self> {
        self.check_compatible(other)?;
        Ok(self.compose_truncated(other, self.half_width + other.half_width))
    }

    /// Composition evaluated only on offsets `|k−m| ≤ out_half_width·Δl`.
    pub fn compose_truncated(&self, other: &Self, out_half_width: usize) -> Self {
        let g = self.grid;
        let n = g.n() as i64;
        let hf = self.half_width as i64;
        let hg = other.half_width as i64;
        let ho = out_half_width as i64;
        let mut out = Self::zeros(g, out_half_width, self.eps, self.s_weight);
        let wo = out.width();
        let dl = self.dl();
        for i in 0..g.n() {
            let frow = self.row(i);
            let orow = &mut out.values[i * wo..(i + 1) * wo];
            for (fa, a) in frow.iter().zip(-hf..=hf) {
                if fa.re == 0.0 && fa.im == 0.0 {
                    continue;
                }
                let grow = other.row((i as i64 - a).rem_euclid(n) as usize);
                let b_lo = (-hg).max(-ho - a);
                let b_hi = hg.min(ho - a);
                if b_lo > b_hi {
                    continue;
                }
                let fa = fa * dl;
                for b in b_lo..=b_hi {
                    orow[(a + b + ho) as usize] += fa * grow[(b + hg) as usize];
                }
            }
        }
        out
    }

    /// `self + c·other`, embedding both in the wider support.
    pub fn axpy(&self, c: Complex64, other: &Self) -> Self {
        let h = self.half_width.max(other.half_width);
        let mut out = if h == self.half_width { self.clone() } else { self.with_half_width(h).0 };
        let ho = other.half_width as i64;
        for i in 0..self.grid.n() {
            for a in -ho..=ho {
                let v = out.get(i, a) + c * other.get(i, a);
                out.set(i, a, v);
            }
        }
        out
    }

    pub fn add(&self, other: &Self) -> Self {
        self.axpy(Complex64::new(1.0, 0.0), other)
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.axpy(Complex64::new(-1.0, 0.0), other)
    }

    pub fn scale(&self, c: Complex64) -> Self {
        let mut out = self.clone();
        for v in &mut out.values {
            *v *= c;
        }
        out
    }

    /// Multiply row k by `w(k)`.
    pub fn scale_rows(&self, w: impl Fn(f64) -> Complex64) -> Self {
        let mut out = self.clone();
        let wd = self.width();
        for i in 0..self.grid.n() {
            let c = w(self.grid.wavenumber(i));
            for v in &mut out.values[i * wd..(i + 1) * wd] {
                *v *= c;
            }
        }
        out
    }

    /// Multiply entry (k, k−m) by `w(k, m)` (both physical wavenumbers).
    pub fn scale_entries(&self, w: impl Fn(f64, f64) -> Complex64) -> Self {
        let mut out = self.clone();
        let g = self.grid;
        let h = self.half_width as i64;
        for i in 0..g.n() {
            let k = g.wavenumber(i);
            for a in -h..=h {
                let m = g.wavenumber(g.slot(i as i64 - a));
                let v = out.get(i, a) * w(k, m);
                out.set(i, a, v);
            }
        }
        out
    }

    pub fn conj(&self) -> Self {
        let mut out = self.clone();
        for v in &mut out.values {
            *v = v.conj();
        }
        out
    }

    /// max |f(k, l) − conj f(k, −l)|.
    pub fn conjugate_symmetry_defect(&self) -> f64 {
        self.conjugate_symmetry_defect_within(i64::MAX)
    }

    /// As [`Self::conjugate_symmetry_defect`], over rows with |mode| ≤ `max_mode`.
    pub fn conjugate_symmetry_defect_within(&self, max_mode: i64) -> f64 {
        let h = self.half_width as i64;
        let mut d: f64 = 0.0;
        for i in (0..self.grid.n()).filter(|&i| self.grid.mode(i).abs() <= max_mode) {
            for a in 0..=h {
                d = d.max((self.get(i, a) - self.get(i, -a).conj()).norm());
            }
        }
        d
    }

    /// max |f(−k, −l) − conj f(k, l)|: the condition for the kernel action to
    /// map transforms of real fields to transforms of real fields.
    pub fn reality_defect(&self) -> f64 {
        let g = self.grid;
        let h = self.half_width as i64;
        let mut d: f64 = 0.0;
        for i in 0..g.n() {
            if i == g.nyquist_slot() {
                continue;
            }
            let mirror = g.slot(-g.mode(i));
            for a in -h..=h {
                d = d.max((self.get(mirror, -a) - self.get(i, a).conj()).norm());
            }
        }
        d
    }

    /// sup_k Δl Σ_l |f(k, l) − f(k − l, l)|: sensitivity to the first argument.
    /// Pairs where k − l wraps around the periodic wavenumber range, or
    /// touches the (always empty) Nyquist row, are skipped.
    pub fn shift_defect(&self) -> f64 {
        let g = self.grid;
        let h = self.half_width as i64;
        let half = g.n() as i64 / 2;
        let mut best: f64 = 0.0;
        for i in (0..g.n()).filter(|&i| i != g.nyquist_slot()) {
            let mut s = 0.0;
            for a in -h..=h {
                let m = g.mode(i) - a;
                if m <= -half || m >= half {
                    continue;
                }
                s += (self.get(i, a) - self.get(g.slot(m), a)).norm();
            }
            best = best.max(s);
        }
        best * self.dl()
    }

    /// max over non-Nyquist rows of |f(k, ·) − f(k', ·)|: zero for
    /// k-independent kernels.
    pub fn row_variation(&self) -> f64 {
        let r0 = self.row(0).to_vec();
        let ny = self.grid.nyquist_slot();
        (1..self.grid.n())
            .filter(|&i| i != ny)
            .map(|i| self.row(i).iter().zip(&r0).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max))
            .fold(0.0, f64::max)
    }

    /// Sesquilinear form `Δk·Δl Σ_k Σ_m conj(a(k)) w(k) f(k, k−m) w(m) b(m)`.
    pub fn cross_form(&self, a: &SpectralField, b: &SpectralField, w: impl Fn(f64) -> f64) -> Complex64 {
        let g = self.grid;
        let n = g.n() as i64;
        let h = self.half_width as i64;
        let weights: Vec<f64> = (0..g.n()).map(|j| w(g.wavenumber(j))).collect();
        let mut total = ZERO;
        for i in 0..g.n() {
            let wi = weights[i];
            if wi == 0.0 {
                continue;
            }
            let mut acc = ZERO;
            for (c, off) in self.row(i).iter().zip(-h..=h) {
                let m = (i as i64 - off).rem_euclid(n) as usize;
                acc += c * (weights[m] * b.coeffs[m]);
            }
            total += a.coeffs[i].conj() * wi * acc;
        }
        total * (g.dk() * self.dl())
    }
}
