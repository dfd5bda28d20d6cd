use std::f64::consts::PI;

use num_complex::Complex64;
use proptest::prelude::*;

use kgblab::harness::{fit_slope, run_residual_scan, RunConfig, Setup};
use kgblab::spectral::{transform_forward, transform_inverse_real, Grid1D, SpectralField};
use kgblab::whitham::{
    build_ansatz, default_profiles, flux, h, h1, h2, h3, h4, h_of_u, residual_fields, whitham_rhs, whitham_solve,
    SlowJet, WhithamState,
};
use kgblab::LabError;

/// Newton on 2V + U² + 2UV + V² = 0 from V = 0.
fn newton_root(u: f64) -> f64 {
    let mut v = 0.0;
    for _ in 0..50 {
        let f = 2.0 * v + u * u + 2.0 * u * v + v * v;
        let df = 2.0 + 2.0 * u + 2.0 * v;
        v -= f / df;
    }
    v
}

#[test]
fn slaving_examples() {
    assert_eq!(h_of_u(&[0.0]).unwrap(), vec![0.0]);
    let v = h_of_u(&[0.1]).unwrap()[0];
    assert!((v - (-1.1 + 1.2f64.sqrt())).abs() < 1e-15);
    assert!((v - (-0.004_554_884_989_667_94)).abs() < 1e-15);
    assert!((v - newton_root(0.1)).abs() < 1e-14);
    assert!((h1(0.1) - (-0.087_129_070_824_723_1)).abs() < 1e-13);
}

#[test]
fn slaving_rejects_out_of_domain() {
    match h_of_u(&[0.0, 0.1, -0.6]) {
        Err(LabError::Domain { index, .. }) => assert_eq!(index, 2),
        other => panic!("expected a domain error, got {other:?}"),
    }
    assert!(h_of_u(&[f64::NAN]).is_err());
}

#[test]
fn derivatives_match_finite_differences() {
    let d = 1e-4;
    for u in [-0.3, -0.1, 0.0, 0.05, 0.2, 0.37] {
        let fd = |f: fn(f64) -> f64| (f(u - 2.0 * d) - 8.0 * f(u - d) + 8.0 * f(u + d) - f(u + 2.0 * d)) / (12.0 * d);
        assert!((fd(h) - h1(u)).abs() < 1e-9, "h1 at {u}");
        assert!((fd(h1) - h2(u)).abs() < 1e-8, "h2 at {u}");
        assert!((fd(h2) - h3(u)).abs() < 1e-7, "h3 at {u}");
        assert!((fd(h3) - h4(u)).abs() < 1e-6, "h4 at {u}");
    }
}

fn state(g: Grid1D, u: &[f64], w: &[f64]) -> WhithamState {
    WhithamState { u: transform_forward(g, u).unwrap(), w: transform_forward(g, w).unwrap() }
}

#[test]
fn rhs_trivial_states() {
    let g = Grid1D::new(64, 2.0 * PI).unwrap();
    let z = vec![0.0; 64];
    let r = whitham_rhs(&state(g, &z, &z)).unwrap();
    assert!(r.u.is_zero() && r.w.max_abs() < 1e-15);
    let r = whitham_rhs(&state(g, &[0.1; 64], &z)).unwrap();
    assert!(r.u.max_abs() < 1e-15 && r.w.max_abs() < 1e-14);
}

#[test]
fn rhs_matches_chain_rule_oracle() {
    let g = Grid1D::new(64, 2.0 * PI).unwrap();
    let a = 0.1;
    let u: Vec<f64> = g.xs().iter().map(|&x| a * x.sin()).collect();
    let w: Vec<f64> = g.xs().iter().map(|&x| 0.05 * (2.0 * x).cos()).collect();
    let r = whitham_rhs(&state(g, &u, &w)).unwrap();
    let ut = transform_inverse_real(&r.u);
    let wt = transform_inverse_real(&r.w);
    for (i, &x) in g.xs().iter().enumerate() {
        // ∂_X flux(U) = (1 − 2H′(U))·U_X on the slaving branch.
        let want = (1.0 - 2.0 * h1(u[i])) * a * x.cos();
        assert!((wt[i] - want).abs() < 1e-10);
        assert!((ut[i] + 0.1 * (2.0 * x).sin()).abs() < 1e-12);
    }
}

#[test]
fn flux_collapses_on_slaving_branch() {
    for u in [-0.3, 0.0, 0.1, 0.3] {
        assert!((flux(u) - (u - 2.0 * h(u))).abs() < 1e-15);
    }
}

#[test]
fn zero_profiles_give_zero_trajectory() {
    let g = Grid1D::new(64, 16.0 * PI).unwrap();
    let z = SpectralField::zeros(g);
    let tr = whitham_solve(&z, &z, 1.0, 0.01, 4).unwrap();
    assert_eq!(tr.times.len(), 5);
    assert!(tr.states.iter().all(|s| s.u.is_zero() && s.w.is_zero()));
}

#[test]
fn linear_regime_matches_wave_transport() {
    let g = Grid1D::new(128, 16.0 * PI).unwrap();
    let (p1, p2) = default_profiles(g, 1e-6, 1e-6, g.length() / 16.0);
    let tr = whitham_solve(&p1, &p2, 1.0, 0.01, 1).unwrap();
    // û(k, T) = Φ̂₁ cos kT + Φ̂₂ sin(kT)/k for U_TT = U_XX.
    let t = 1.0;
    let exact = p1
        .map_coeffs(|k, c| c * (k * t).cos())
        .zip(&p2.map_coeffs(|k, c| if k == 0.0 { c * t } else { c * ((k * t).sin() / k) }), |a, b| a + b);
    let got = &tr.states[1].u;
    let rel = got.sub(&exact).unwrap().l2_norm() / exact.l2_norm();
    assert!(rel < 1e-4, "relative error {rel:.3e}");
}

#[test]
fn solver_rejects_bad_inputs() {
    let g = Grid1D::new(64, 16.0 * PI).unwrap();
    let (p1, p2) = default_profiles(g, 0.05, 0.05, 3.0);
    assert!(whitham_solve(&p1, &p2, 0.0, 0.01, 4).is_err());
    assert!(whitham_solve(&p1, &p2, 1.0, 0.01, 0).is_err());
    // Φ₂ with nonzero mean has no periodic antiderivative.
    let mut bad = p2.clone();
    bad.coeffs[0] = Complex64::new(1.0, 0.0);
    assert!(whitham_solve(&p1, &bad, 1.0, 0.01, 4).is_err());
    // Amplitude beyond 3/8 leaves the small-amplitude regime.
    let (big, p2b) = default_profiles(g, 0.5, 0.0, 3.0);
    assert!(matches!(whitham_solve(&big, &p2b, 1.0, 0.01, 4), Err(LabError::InvariantViolation { .. })));
}

#[test]
fn rk4_self_convergence() {
    let g = Grid1D::new(128, 16.0 * PI).unwrap();
    let (p1, p2) = default_profiles(g, 0.1, 0.1, g.length() / 16.0);
    let finals: Vec<SpectralField> =
        [0.2, 0.1, 0.05].iter().map(|&dt| whitham_solve(&p1, &p2, 1.0, dt, 1).unwrap().states[1].u.clone()).collect();
    let d1 = finals[0].sub(&finals[1]).unwrap().l2_norm();
    let d2 = finals[1].sub(&finals[2]).unwrap().l2_norm();
    let order = (d1 / d2).log2();
    assert!((order - 4.0).abs() < 0.2, "order {order}");
}

#[test]
fn chain_rule_time_derivatives_match_finite_differences() {
    let g = Grid1D::new(128, 16.0 * PI).unwrap();
    let (p1, p2) = default_profiles(g, 0.05, 0.05, g.length() / 16.0);
    let tr = whitham_solve(&p1, &p2, 0.64, 0.0025, 64).unwrap();
    let mid = 32;
    let jet = SlowJet::from_state(&tr.states[mid]).unwrap();
    let v_at = |i: usize| h_of_u(&tr.states[i].u_physical()).unwrap();
    let mut errs = Vec::new();
    for stride in [8usize, 4, 2] {
        let dtt = 0.01 * stride as f64;
        let (a, b, c) = (v_at(mid - stride), v_at(mid), v_at(mid + stride));
        let e = (0..g.n()).map(|i| ((a[i] - 2.0 * b[i] + c[i]) / (dtt * dtt) - jet.v_tt[i]).abs()).fold(0.0, f64::max);
        let u_e = (0..g.n())
            .map(|i| {
                let (ua, uc) = (tr.states[mid - stride].u_physical()[i], tr.states[mid + stride].u_physical()[i]);
                ((uc - ua) / (2.0 * dtt) - jet.u_t[i]).abs()
            })
            .fold(0.0, f64::max);
        errs.push((dtt, e.max(1e-300), u_e));
    }
    let (slope, _) = fit_slope(&errs.iter().map(|e| (e.0, e.1)).collect::<Vec<_>>()).unwrap();
    assert!((slope - 2.0).abs() < 0.15, "∂_T²V finite-difference slope {slope}");
    let (slope_u, _) = fit_slope(&errs.iter().map(|e| (e.0, e.2)).collect::<Vec<_>>()).unwrap();
    assert!((slope_u - 2.0).abs() < 0.15, "∂_TU finite-difference slope {slope_u}");
}

#[test]
fn zero_and_constant_ansatz() {
    let g = Grid1D::new(64, 16.0 * PI).unwrap();
    let z = SpectralField::zeros(g);
    let tr = whitham_solve(&z, &z, 1.0, 0.01, 2).unwrap();
    let fast = Grid1D::new(1024, g.length() / 0.1).unwrap();
    let ans = build_ansatz(&tr, 0.1, 0.0, fast).unwrap();
    assert!(ans.psi_u.is_zero() && ans.psi_v.is_zero() && ans.v2.is_zero());
    let (ru, rv) = residual_fields(&ans);
    assert!(ru.is_zero() && rv.is_zero());

    let c = transform_forward(g, &vec![0.1; 64]).unwrap();
    let tr = whitham_solve(&c, &z, 1.0, 0.01, 2).unwrap();
    let ans = build_ansatz(&tr, 0.1, 0.0, fast).unwrap();
    assert!(ans.v2.max_abs() < 1e-14);
    assert!(build_ansatz(&tr, 0.1, 0.123, fast).is_err());
}

#[test]
fn improved_ansatz_gap_scales_as_eps_squared() {
    let setup = Setup::new(&RunConfig::default()).unwrap();
    let samples: Vec<(f64, f64)> = [0.1, 0.05, 0.025]
        .iter()
        .map(|&eps| {
            let ans = build_ansatz(&setup.whitham, eps, 0.0, setup.fast_grid(eps).unwrap()).unwrap();
            let a = transform_inverse_real(&ans.psi_v);
            let b = transform_inverse_real(&ans.v_plain);
            (eps, a.iter().zip(&b).fold(0.0f64, |m, (x, y)| m.max((x - y).abs())))
        })
        .collect();
    let (slope, _) = fit_slope(&samples).unwrap();
    assert!((slope - 2.0).abs() < 0.05, "gap slope {slope}");
}

#[test]
fn residual_sup_slope() {
    let mut cfg = RunConfig::default();
    cfg.eps_ladder = vec![0.1, 0.05, 0.025];
    let scan = run_residual_scan(&Setup::new(&cfg).unwrap(), 1).unwrap();
    assert!(scan.v_sup.slope >= 3.8, "sup Res_v slope {}", scan.v_sup.slope);
}

proptest! {
    #[test]
    fn slaving_root_residual(u in -0.375f64..0.375) {
        let v = h_of_u(&[u]).unwrap()[0];
        prop_assert!((2.0 * v + u * u + 2.0 * u * v + v * v).abs() < 1e-12);
        prop_assert!((v - newton_root(u)).abs() < 1e-12);
        prop_assert!(v <= 0.0);
    }
}
