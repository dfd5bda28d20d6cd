//! Sobolev energies of the transformed error and the modified energy.
//!
//! ```text
//! E_{s,u} = Σ_{j≤s}   ∫ |k|^{2j} (|R_u|² + |W_u|²) dk
//! E_{s,v} = Σ_{j≤s−1} ∫ |k|^{2j} ω₂² (|R_v|² + |W_v|²) dk
//! 𝓔_s     = E_s + Σ_j ∬ |k|^j conj R_u(k) f_u(k, k−m) |m|^j R_u(m) + (v analogue)
//! ```
//!
//! The v cross term runs over the same j range as E_{s,v}; that is the range
//! for which its time derivative cancels the resonant v coupling.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::dispersion::omega2;
use crate::error::{LabError, Result};
use crate::kgb::KgbState;
use crate::normalform::LimitKernels;
use crate::spectral::SpectralField;

/// Relative tolerance on the imaginary part of the cross terms.
pub const REALNESS_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EnergySnapshot {
    pub t: f64,
    pub e_s: f64,
    pub e_mod: f64,
    pub e_su: f64,
    pub e_sv: f64,
    /// |Im cross| / max(E_s, tiny).
    pub imag_defect: f64,
}

fn check_s(s: u32) -> Result<()> {
    if s == 0 {
        return Err(LabError::InvalidArgument("energy index s must be ≥ 1".into()));
    }
    Ok(())
}

fn u_weight(k: f64, s: u32) -> f64 {
    let k2 = k * k;
    (0..=s).map(|j| k2.powi(j as i32)).sum()
}

fn v_weight(k: f64, s: u32) -> f64 {
    let k2 = k * k;
    let w2 = omega2(k).powi(2);
    (0..s).map(|j| k2.powi(j as i32)).sum::<f64>() * w2
}

/// Δk Σ w(k) conj a(k) b(k).
fn weighted_inner(a: &SpectralField, b: &SpectralField, w: impl Fn(f64) -> f64) -> Complex64 {
    let g = a.grid;
    let s: Complex64 =
        a.coeffs.iter().zip(&b.coeffs).enumerate().map(|(j, (x, y))| x.conj() * y * w(g.wavenumber(j))).sum();
    s * g.dk()
}

/// (E_{s,u}, E_{s,v}).
pub fn energy_components(err: &KgbState, s: u32) -> Result<(f64, f64)> {
    check_s(s)?;
    let eu =
        weighted_inner(&err.u, &err.u, |k| u_weight(k, s)).re + weighted_inner(&err.wu, &err.wu, |k| u_weight(k, s)).re;
    let ev =
        weighted_inner(&err.v, &err.v, |k| v_weight(k, s)).re + weighted_inner(&err.wv, &err.wv, |k| v_weight(k, s)).re;
    Ok((eu, ev))
}

pub fn energy_e(err: &KgbState, s: u32) -> Result<f64> {
    let (a, b) = energy_components(err, s)?;
    Ok(a + b)
}

/// Cross terms (u, v) of the modified energy for fields (a, b): the
/// sesquilinear forms evaluated at conj a, b.
fn cross_pair(a: &KgbState, b: &KgbState, lk: &LimitKernels, s: u32) -> (Complex64, Complex64) {
    let cu: Complex64 = (0..=s).map(|j| lk.f_u.cross_form(&a.u, &b.u, |k| k.abs().powi(j as i32))).sum();
    let cv: Complex64 = (0..s).map(|j| lk.f_v.cross_form(&a.v, &b.v, |k| k.abs().powi(j as i32))).sum();
    (cu, cv)
}

/// Snapshot of E_s and 𝓔_s; the imaginary part of the cross terms is
/// recorded, not enforced.
pub fn energy_snapshot(t: f64, err: &KgbState, lk: &LimitKernels, s: u32) -> Result<EnergySnapshot> {
    let (e_su, e_sv) = energy_components(err, s)?;
    let e_s = e_su + e_sv;
    let (cu, cv) = cross_pair(err, err, lk, s);
    let cross = cu + cv;
    Ok(EnergySnapshot {
        t,
        e_s,
        e_mod: e_s + cross.re,
        e_su,
        e_sv,
        imag_defect: cross.im.abs() / e_s.max(f64::MIN_POSITIVE),
    })
}

/// 𝓔_s, rejecting cross terms whose imaginary part exceeds [`REALNESS_TOL`]
/// relative to E_s.
pub fn energy_modified(err: &KgbState, lk: &LimitKernels, s: u32) -> Result<f64> {
    let snap = energy_snapshot(0.0, err, lk, s)?;
    if snap.imag_defect > REALNESS_TOL {
        return Err(LabError::SymmetryViolation { defect: snap.imag_defect, tol: REALNESS_TOL });
    }
    Ok(snap.e_mod)
}

/// Instantaneous (dE_s/dt, d𝓔_s/dt) with the kernels held fixed, given the
/// error and its time derivative.
pub fn energy_rates(err: &KgbState, derr: &KgbState, lk: &LimitKernels, s: u32) -> Result<(f64, f64)> {
    check_s(s)?;
    let uw = |k: f64| u_weight(k, s);
    let vw = |k: f64| v_weight(k, s);
    let de = 2.0
        * (weighted_inner(&err.u, &derr.u, uw).re
            + weighted_inner(&err.wu, &derr.wu, uw).re
            + weighted_inner(&err.v, &derr.v, vw).re
            + weighted_inner(&err.wv, &derr.wv, vw).re);
    let (au, av) = cross_pair(derr, err, lk, s);
    let (bu, bv) = cross_pair(err, derr, lk, s);
    let dc = (au + av + bu + bv).re;
    Ok((de, de + dc))
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DriftReport {
    pub eps: f64,
    pub s: u32,
    pub snapshots: Vec<EnergySnapshot>,
    /// d𝓔_s/dt at each snapshot (kernels frozen at the snapshot time).
    pub rates: Vec<f64>,
    /// max_t |d𝓔_s/dt|.
    pub max_rate: f64,
    /// max_{t>0} |𝓔_s(t) − 𝓔_s(0)|/t.
    pub secant_rate: f64,
    /// Smallest C with |d𝓔/dt| ≤ Cε(𝓔 + ε^{1/2}𝓔^{3/2} + 1) at every snapshot.
    pub gronwall_constant: f64,
    /// (𝓔(0) + ½)e^{2Cεt} − ½ at each snapshot; valid while ε^{1/2}𝓔^{1/2} ≤ 1.
    pub envelope: Vec<f64>,
    pub envelope_holds: bool,
    pub max_imag_defect: f64,
}

pub fn drift_report(snapshots: Vec<EnergySnapshot>, rates: Vec<f64>, eps: f64, s: u32) -> Result<DriftReport> {
    if snapshots.is_empty() || snapshots.len() != rates.len() {
        return Err(LabError::InvalidArgument("drift report needs one rate per snapshot".into()));
    }
    let e0 = snapshots[0].e_mod;
    let t0 = snapshots[0].t;
    let secant_rate =
        snapshots.iter().filter(|sn| sn.t > t0).map(|sn| (sn.e_mod - e0).abs() / (sn.t - t0)).fold(0.0, f64::max);
    let max_rate = rates.iter().fold(0.0f64, |m, r| m.max(r.abs()));
    let c = snapshots
        .iter()
        .zip(&rates)
        .map(|(sn, r)| {
            let e = sn.e_mod.max(0.0);
            r.abs() / (eps * (e + eps.sqrt() * e.powf(1.5) + 1.0))
        })
        .fold(0.0, f64::max);
    let envelope: Vec<f64> =
        snapshots.iter().map(|sn| (e0 + 0.5) * (2.0 * c * eps * (sn.t - t0)).exp() - 0.5).collect();
    let envelope_holds = snapshots
        .iter()
        .zip(&envelope)
        .all(|(sn, env)| sn.e_mod <= env * (1.0 + 1e-12) + 1e-14 || eps * sn.e_mod > 1.0);
    let max_imag_defect = snapshots.iter().map(|sn| sn.imag_defect).fold(0.0, f64::max);
    Ok(DriftReport {
        eps,
        s,
        snapshots,
        rates,
        max_rate,
        secant_rate,
        gronwall_constant: c,
        envelope,
        envelope_holds,
        max_imag_defect,
    })
}
