use std::f64::consts::PI;

use num_complex::Complex64;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use kgblab::energy::{drift_report, energy_components, energy_e, energy_modified, energy_rates, energy_snapshot};
use kgblab::kgb::{kgb_solve_with, KgbState};
use kgblab::normalform::{iterate_to_limit, LimitKernels, NormalFormConfig};
use kgblab::spectral::{Grid1D, Kernel2, SpectralField};
use kgblab::LabError;

fn band_random(grid: Grid1D, band: i64, amp: f64, rng: &mut ChaCha8Rng) -> SpectralField {
    let mut f = SpectralField::zeros(grid);
    for m in 0..=band {
        let v = Complex64::new(rng.gen_range(-amp..amp), if m == 0 { 0.0 } else { rng.gen_range(-amp..amp) });
        f.coeffs[grid.slot(m)] = v;
        if m > 0 {
            f.coeffs[grid.slot(-m)] = v.conj();
        }
    }
    f
}

fn random_state(grid: Grid1D, rng: &mut ChaCha8Rng) -> KgbState {
    KgbState {
        u: band_random(grid, 12, 1.0, rng),
        wu: band_random(grid, 12, 1.0, rng),
        v: band_random(grid, 12, 1.0, rng),
        wv: band_random(grid, 12, 1.0, rng),
    }
}

fn zero_kernels(grid: Grid1D) -> LimitKernels {
    LimitKernels {
        f_u: Kernel2::zeros(grid, 4, 0.1, 1.0),
        f_v: Kernel2::zeros(grid, 4, 0.1, 1.0),
        stages_used: 1,
        residual_decay: 0.0,
    }
}

/// Limit kernels of a small long-wave Ψ (real-preserving, not conjugate
/// symmetric).
fn real_kernels(grid: Grid1D, rng: &mut ChaCha8Rng) -> LimitKernels {
    let mut psi = SpectralField::zeros(grid);
    for m in 1..4i64 {
        let v = Complex64::new(rng.gen_range(-0.02..0.02), rng.gen_range(-0.02..0.02));
        psi.coeffs[grid.slot(m)] = v;
        psi.coeffs[grid.slot(-m)] = v.conj();
    }
    let cfg = NormalFormConfig { half_width: 8, ..Default::default() };
    iterate_to_limit(&psi, 0.2, &cfg).unwrap().limit
}

#[test]
fn energy_examples() {
    let g = Grid1D::new(32, 2.0 * PI).unwrap();
    let z = KgbState::zeros(g);
    assert_eq!(energy_e(&z, 1).unwrap(), 0.0);
    let mut s = KgbState::zeros(g);
    s.u.coeffs[g.slot(1)] = Complex64::new(1.0, 0.0);
    assert!((energy_e(&s, 1).unwrap() - 2.0 * g.dk()).abs() < 1e-15);
    let (eu, ev) = energy_components(&s, 1).unwrap();
    assert_eq!(ev, 0.0);
    assert_eq!(eu, energy_e(&s, 1).unwrap());
    assert!(matches!(energy_e(&s, 0), Err(LabError::InvalidArgument(_))));
}

#[test]
fn klein_gordon_component_weight() {
    // E_{1,v} carries ω₂²·(j ≤ 0) = k² + 2.
    let g = Grid1D::new(32, 2.0 * PI).unwrap();
    let mut s = KgbState::zeros(g);
    s.v.coeffs[g.slot(2)] = Complex64::new(1.0, 0.0);
    s.wv.coeffs[g.slot(2)] = Complex64::new(0.0, 1.0);
    let (eu, ev) = energy_components(&s, 1).unwrap();
    assert_eq!(eu, 0.0);
    assert!((ev - 2.0 * 6.0 * g.dk()).abs() < 1e-14);
}

#[test]
fn zero_kernels_leave_energy_unchanged() {
    let g = Grid1D::new(64, 30.0).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let s = random_state(g, &mut rng);
    let lk = zero_kernels(g);
    assert_eq!(energy_modified(&s, &lk, 1).unwrap(), energy_e(&s, 1).unwrap());
    assert_eq!(energy_modified(&KgbState::zeros(g), &lk, 1).unwrap(), 0.0);
}

/// Σ_j Δk Δl Σ_k Σ_m |a(k)| |k|^j |f(k, k−m)| |m|^j |a(m)|, summed
/// directly over (k, m) pairs.
fn abs_double_sum(f: &Kernel2, a: &SpectralField, js: std::ops::Range<u32>) -> f64 {
    let g = f.grid;
    let n = g.n();
    let mut total = 0.0;
    for j in js {
        for i in 0..n {
            for m in 0..n {
                let off = g.mode(i) - g.mode(m);
                let off = if off >= n as i64 / 2 {
                    off - n as i64
                } else if off < -(n as i64) / 2 {
                    off + n as i64
                } else {
                    off
                };
                let kij = g.wavenumber(i).abs().powi(j as i32) * g.wavenumber(m).abs().powi(j as i32);
                total += a.coeffs[i].norm() * kij * f.get(i, off).norm() * a.coeffs[m].norm();
            }
        }
    }
    total * g.dk() * f.dl()
}

#[test]
fn cross_terms_bounded_by_absolute_double_sum() {
    let g = Grid1D::new(64, 200.0).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let lk = real_kernels(g, &mut rng);
    for _ in 0..5 {
        let s = random_state(g, &mut rng);
        let snap = energy_snapshot(0.0, &s, &lk, 1).unwrap();
        let bound = abs_double_sum(&lk.f_u, &s.u, 0..2) + abs_double_sum(&lk.f_v, &s.v, 0..1);
        assert!((snap.e_mod - snap.e_s).abs() <= bound * (1.0 + 1e-12));
        assert!(snap.imag_defect < 1e-14, "imag defect {}", snap.imag_defect);
    }
}

#[test]
fn non_hermitian_cross_term_rejected() {
    let g = Grid1D::new(32, 20.0).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let s = random_state(g, &mut rng);
    let skew = Kernel2::identity(g, 0.1, 1.0).scale(Complex64::new(0.0, 0.1));
    let mut lk = zero_kernels(g);
    lk.f_u = skew;
    assert!(matches!(energy_modified(&s, &lk, 1), Err(LabError::SymmetryViolation { .. })));
    assert!(energy_snapshot(0.0, &s, &lk, 1).unwrap().imag_defect > 1e-3);
}

#[test]
fn rates_match_exact_quadratic_difference() {
    let g = Grid1D::new(64, 200.0).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let lk = real_kernels(g, &mut rng);
    let r = random_state(g, &mut rng);
    let dr = random_state(g, &mut rng);
    let (de, dm) = energy_rates(&r, &dr, &lk, 1).unwrap();
    // Quadratic forms: Q(R + hD) − Q(R − hD) = 2h·dQ exactly.
    let h = 1e-3;
    let plus = KgbState {
        u: r.u.axpy(h.into(), &dr.u),
        wu: r.wu.axpy(h.into(), &dr.wu),
        v: r.v.axpy(h.into(), &dr.v),
        wv: r.wv.axpy(h.into(), &dr.wv),
    };
    let minus = plus.sub(&dr.scale(2.0 * h));
    let sp = energy_snapshot(0.0, &plus, &lk, 1).unwrap();
    let sm = energy_snapshot(0.0, &minus, &lk, 1).unwrap();
    assert!(((sp.e_s - sm.e_s) / (2.0 * h) - de).abs() < 1e-9 * de.abs());
    assert!(((sp.e_mod - sm.e_mod) / (2.0 * h) - dm).abs() < 1e-9 * dm.abs());
}

#[test]
fn zero_error_trajectory_has_zero_drift() {
    let g = Grid1D::new(32, 20.0).unwrap();
    let lk = zero_kernels(g);
    let z = KgbState::zeros(g);
    let snaps: Vec<_> = (0..4).map(|i| energy_snapshot(i as f64, &z, &lk, 1).unwrap()).collect();
    let d = drift_report(snaps, vec![0.0; 4], 0.1, 1).unwrap();
    assert_eq!((d.max_rate, d.secant_rate, d.gronwall_constant), (0.0, 0.0, 0.0));
    assert!(d.envelope_holds);
    assert!(drift_report(Vec::new(), Vec::new(), 0.1, 1).is_err());
}

#[test]
fn linear_flow_conserves_energy_with_zero_kernels() {
    let g = Grid1D::new(128, 64.0).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let s = random_state(g, &mut rng);
    let lk = zero_kernels(g);
    let tr = kgb_solve_with(&s, 100.0, 0.05, 5, false).unwrap();
    let snaps: Vec<_> =
        tr.times.iter().zip(&tr.states).map(|(t, st)| energy_snapshot(*t, st, &lk, 1).unwrap()).collect();
    let e0 = snaps[0].e_mod;
    assert!(snaps.iter().all(|sn| (sn.e_mod / e0 - 1.0).abs() < 1e-12));
    let d = drift_report(snaps, vec![0.0; 6], 0.1, 1).unwrap();
    assert!(d.secant_rate < 1e-12 * e0);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn energy_is_quadratic(seed in any::<u64>(), c in 0.1f64..10.0) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let g = Grid1D::new(32, 20.0).unwrap();
        let s = random_state(g, &mut rng);
        let e = energy_e(&s, 2).unwrap();
        prop_assert!(e >= 0.0);
        prop_assert!((energy_e(&s.scale(c), 2).unwrap() - c * c * e).abs() <= 1e-12 * c * c * e);
        prop_assert!((energy_e(&s.scale(2.0), 2).unwrap() - 4.0 * e).abs() <= 1e-15 * e);
    }
}
