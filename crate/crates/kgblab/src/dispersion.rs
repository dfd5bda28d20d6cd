//! Linear dispersion relations of the KGB system and non-resonance gap scans.
//!
//! Plane waves `e^{ikx + iω t}` of the linearization solve
//! `ω_{±1}(k) = ±k/√(k²+1)` (Boussinesq branch, bounded by 1) and
//! `ω_{±2}(k) = ±√(k²+2)` (Klein-Gordon branch, gapped at √2).

use serde::{Deserialize, Serialize};

use crate::error::{LabError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Branch {
    Plus1,
    Minus1,
    Plus2,
    Minus2,
}

impl Branch {
    pub const ALL: [Branch; 4] = [Branch::Plus1, Branch::Minus1, Branch::Plus2, Branch::Minus2];

    pub fn from_label(label: i32) -> Result<Self> {
        match label {
            1 => Ok(Branch::Plus1),
            -1 => Ok(Branch::Minus1),
            2 => Ok(Branch::Plus2),
            -2 => Ok(Branch::Minus2),
            other => Err(LabError::InvalidArgument(format!("unknown dispersion branch {other}"))),
        }
    }

    pub fn label(self) -> i32 {
        match self {
            Branch::Plus1 => 1,
            Branch::Minus1 => -1,
            Branch::Plus2 => 2,
            Branch::Minus2 => -2,
        }
    }

    /// +1 or −1.
    pub fn sign(self) -> f64 {
        if self.label() > 0 {
            1.0
        } else {
            -1.0
        }
    }

    /// 1 for the Boussinesq pair, 2 for the Klein-Gordon pair.
    pub fn family(self) -> u8 {
        self.label().unsigned_abs() as u8
    }

    pub fn negated(self) -> Self {
        Branch::from_label(-self.label()).expect("negation stays in range")
    }

    /// Position in the fixed ordering (+1, −1, +2, −2).
    pub fn index(self) -> usize {
        match self {
            Branch::Plus1 => 0,
            Branch::Minus1 => 1,
            Branch::Plus2 => 2,
            Branch::Minus2 => 3,
        }
    }
}

#[inline]
pub fn omega1(k: f64) -> f64 {
    k / (k * k + 1.0).sqrt()
}

#[inline]
pub fn omega2(k: f64) -> f64 {
    (k * k + 2.0).sqrt()
}

#[inline]
pub fn omega(branch: Branch, k: f64) -> f64 {
    match branch {
        Branch::Plus1 => omega1(k),
        Branch::Minus1 => -omega1(k),
        Branch::Plus2 => omega2(k),
        Branch::Minus2 => -omega2(k),
    }
}

/// Frequency by integer label; unknown labels are rejected.
pub fn omega_by_label(label: i32, k: f64) -> Result<f64> {
    Ok(omega(Branch::from_label(label)?, k))
}

/// `k²/((1+k²)ω₁(k))` with the removable singularity at k = 0 resolved.
///
/// Algebraically this is `k/√(k²+1)`: dividing the Boussinesq symbol
/// `−k²/(1+k²)` by `iω₁` leaves `iω₁` in the first-order system.
#[inline]
pub fn boussinesq_symbol_over_omega1(k: f64) -> f64 {
    omega1(k)
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct ResonanceGapReport {
    /// inf over k, m of |ω₂(k) − ω₁(m)|.
    pub gap_12_minus: f64,
    /// inf over k, m of |ω₂(k) + ω₁(m)|.
    pub gap_12_plus: f64,
    /// min over μ ∈ {±1}, λ ∈ {±2} of inf_k |ω_μ(k) − ω_λ(k)|.
    pub gap_same_k: f64,
    /// Wavenumber where the same-k gap is attained (k ≥ 0 representative).
    pub gap_same_k_at: f64,
    pub c_omega: f64,
    pub k_max: f64,
    pub n_samples: usize,
    /// Scan spacing; the stated uncertainty of the cross-k gaps.
    pub grid_spacing: f64,
}

/// Grid minimization of the non-resonance gaps on `[−k_max, k_max]`.
///
/// Outside the window ω₂ is increasing in |k| and |ω₁| climbs monotonically
/// towards 1, so the tails are represented by the closed value intervals
/// `[ω₁(k_max), 1]` and `[ω₂(k_max), ∞)`; the reported infima are therefore
/// global up to grid resolution. The same-k gap is polished by golden-section
/// search around the best grid point.
pub fn scan_resonance_gaps(k_max: f64, n_samples: usize) -> Result<ResonanceGapReport> {
    if !(k_max > 0.0 && k_max.is_finite()) {
        return Err(LabError::InvalidArgument(format!("k_max must be positive, got {k_max}")));
    }
    if n_samples < 1000 {
        return Err(LabError::InvalidArgument(format!("n_samples must be ≥ 1000, got {n_samples}")));
    }
    let h = 2.0 * k_max / (n_samples - 1) as f64;
    let ks: Vec<f64> = (0..n_samples).map(|i| -k_max + h * i as f64).collect();

    let w1: Vec<f64> = ks.iter().map(|&k| omega1(k)).collect();
    let w2: Vec<f64> = ks.iter().map(|&k| omega2(k)).collect();
    let w1_tail = (omega1(k_max), 1.0);
    let w2_tail_start = omega2(k_max);

    let gap_minus = cross_gap(&w2, &w1, w1_tail, w2_tail_start);
    let neg_w1: Vec<f64> = w1.iter().map(|w| -w).collect();
    let gap_plus = cross_gap(&w2, &neg_w1, w1_tail, w2_tail_start);

    let mut best = f64::INFINITY;
    let mut best_at = 0.0;
    for mu in [Branch::Plus1, Branch::Minus1] {
        for lambda in [Branch::Plus2, Branch::Minus2] {
            let diff = |k: f64| (omega(mu, k) - omega(lambda, k)).abs();
            let (i_min, v_min) = ks
                .iter()
                .enumerate()
                .map(|(i, &k)| (i, diff(k)))
                .fold((0, f64::INFINITY), |acc, x| if x.1 < acc.1 { x } else { acc });
            let k0 = ks[i_min];
            let (k_ref, v_ref) = golden_min(&diff, k0 - h, k0 + h);
            let (k_star, v) = if v_ref < v_min { (k_ref, v_ref) } else { (k0, v_min) };
            if v < best {
                best = v;
                best_at = k_star.abs();
            }
        }
    }
    // Tail: |ω_μ − ω_λ| ≥ ω₂(k) − 1 ≥ ω₂(k_max) − 1 beyond the window.
    best = best.min(w2_tail_start - 1.0);

    Ok(ResonanceGapReport {
        gap_12_minus: gap_minus,
        gap_12_plus: gap_plus,
        gap_same_k: best,
        gap_same_k_at: best_at,
        c_omega: 1.0 / best,
        k_max,
        n_samples,
        grid_spacing: h,
    })
}

/// inf |a − b| over samples plus tail intervals, via sorted nearest-value search.
fn cross_gap(a: &[f64], b: &[f64], b_tail_abs: (f64, f64), a_tail_start: f64) -> f64 {
    let mut sorted = b.to_vec();
    sorted.sort_by(|x, y| x.partial_cmp(y).expect("finite frequencies"));
    let mut best = f64::INFINITY;
    for &x in a {
        let pos = sorted.partition_point(|&y| y < x);
        if pos < sorted.len() {
            best = best.min((sorted[pos] - x).abs());
        }
        if pos > 0 {
            best = best.min((x - sorted[pos - 1]).abs());
        }
        // b tails: ±[lo, hi]
        for (lo, hi) in [(b_tail_abs.0, b_tail_abs.1), (-b_tail_abs.1, -b_tail_abs.0)] {
            best = best.min(interval_distance(x, lo, hi));
        }
    }
    // a tail [a_tail_start, ∞) against b samples (a is the gapped branch).
    for &y in b {
        best = best.min(interval_distance(y, a_tail_start, f64::INFINITY));
    }
    best
}

fn interval_distance(x: f64, lo: f64, hi: f64) -> f64 {
    if x < lo {
        lo - x
    } else if x > hi {
        x - hi
    } else {
        0.0
    }
}

fn golden_min(f: &dyn Fn(f64) -> f64, mut a: f64, mut b: f64) -> (f64, f64) {
    let r = 0.5 * (5f64.sqrt() - 1.0);
    let mut c = b - r * (b - a);
    let mut d = a + r * (b - a);
    for _ in 0..200 {
        if f(c) < f(d) {
            b = d;
        } else {
            a = c;
        }
        c = b - r * (b - a);
        d = a + r * (b - a);
        if (b - a).abs() < 1e-14 {
            break;
        }
    }
    let x = 0.5 * (a + b);
    (x, f(x))
}

/// Dispersion curves sampled for CSV output: rows of (k, ω₁, ω₂).
pub fn dispersion_table(k_max: f64, n: usize) -> Vec<(f64, f64, f64)> {
    let n = n.max(2);
    (0..n)
        .map(|i| {
            let k = -k_max + 2.0 * k_max * i as f64 / (n - 1) as f64;
            (k, omega1(k), omega2(k))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unknown_label_rejected() {
        assert!(Branch::from_label(3).is_err());
        assert!(omega_by_label(0, 1.0).is_err());
    }

    #[test]
    fn branch_bookkeeping() {
        for b in Branch::ALL {
            assert_eq!(b.negated().negated(), b);
            assert_eq!(Branch::ALL[b.index()], b);
        }
    }
}
