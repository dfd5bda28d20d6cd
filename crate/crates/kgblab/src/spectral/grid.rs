use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{LabError, Result};

/// Uniform periodic grid on `[0, length)` with `n` points (power of two, ≥ 8).
///
/// Fourier index `j` is stored in FFT order; its signed mode number is
/// `j` for `j < n/2` and `j − n` above. The Nyquist slot `j = n/2` carries
/// mode `−n/2` but is never differentiated and is removed by dealiasing.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Grid1D {
    n: usize,
    length: f64,
}

impl Grid1D {
    pub fn new(n: usize, length: f64) -> Result<Self> {
        if n < 8 || !n.is_power_of_two() {
            return Err(LabError::InvalidArgument(format!("grid size must be a power of two ≥ 8, got {n}")));
        }
        if !(length > 0.0 && length.is_finite()) {
            return Err(LabError::InvalidArgument(format!("grid length must be positive, got {length}")));
        }
        Ok(Self { n, length })
    }

    /// Smallest power-of-two grid on `length` with spacing ≤ `dx_max`.
    pub fn with_max_spacing(length: f64, dx_max: f64) -> Result<Self> {
        let need = (length / dx_max).ceil().max(8.0) as usize;
        Self::new(need.next_power_of_two(), length)
    }

    #[inline]
    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn length(&self) -> f64 {
        self.length
    }

    #[inline]
    pub fn dx(&self) -> f64 {
        self.length / self.n as f64
    }

    /// Wavenumber spacing 2π/length.
    #[inline]
    pub fn dk(&self) -> f64 {
        2.0 * PI / self.length
    }

    pub fn x(&self, i: usize) -> f64 {
        self.dx() * i as f64
    }

    pub fn xs(&self) -> Vec<f64> {
        (0..self.n).map(|i| self.x(i)).collect()
    }

    /// Signed mode number of storage slot `j`.
    #[inline]
    pub fn mode(&self, j: usize) -> i64 {
        if j < self.n / 2 {
            j as i64
        } else {
            j as i64 - self.n as i64
        }
    }

    /// Storage slot of a signed mode number (taken modulo n).
    #[inline]
    pub fn slot(&self, mode: i64) -> usize {
        mode.rem_euclid(self.n as i64) as usize
    }

    #[inline]
    pub fn nyquist_slot(&self) -> usize {
        self.n / 2
    }

    #[inline]
    pub fn wavenumber(&self, j: usize) -> f64 {
        self.dk() * self.mode(j) as f64
    }

    pub fn wavenumbers(&self) -> Vec<f64> {
        (0..self.n).map(|j| self.wavenumber(j)).collect()
    }

    /// Wavenumber used inside derivative symbols: zero at Nyquist so that
    /// real fields stay real under `ik`.
    #[inline]
    pub fn symbol_wavenumber(&self, j: usize) -> f64 {
        if j == self.nyquist_slot() {
            0.0
        } else {
            self.wavenumber(j)
        }
    }

    /// Largest retained |mode| under the 2/3 rule.
    #[inline]
    pub fn dealias_cutoff(&self) -> i64 {
        (self.n / 3) as i64
    }

    #[inline]
    pub fn is_retained(&self, j: usize) -> bool {
        j != self.nyquist_slot() && self.mode(j).abs() <= self.dealias_cutoff()
    }

    /// Largest retained wavenumber after dealiasing.
    pub fn k_max_retained(&self) -> f64 {
        self.dk() * self.dealias_cutoff() as f64
    }
}
