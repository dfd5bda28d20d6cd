use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::config::RunConfig;
use super::fit::ScalingReport;
use crate::energy::{drift_report, energy_e, energy_rates, energy_snapshot, DriftReport};
use crate::error::{LabError, Result};
use crate::kgb::{
    diagonalize, error_linear_rhs, kgb_rhs, kgb_solve, kgb_solve_with, max_stable_dt, theorem_initial_data,
    undiagonalize, DiagonalState, KgbState, KgbTrajectory,
};
use crate::normalform::{
    apply_composite, apply_composite_inverse, check_kernel_symmetries, iterate_to_limit, untransformed_limit,
    NormalFormRun, NormalFormStage, SymmetryReport,
};
use crate::spectral::{interpolate_long_wave, transform_forward, transform_inverse_real, Grid1D, SpectralField};
use crate::whitham::{build_ansatz, fast_grid, h_of_u, residual, whitham_solve, ResidualReport, WhithamTrajectory};

/// Map `f` over `items` on up to `threads` scoped workers, preserving order.
pub fn par_map<T: Sync, R: Send>(items: &[T], threads: usize, f: impl Fn(&T) -> R + Sync) -> Vec<R> {
    let threads = threads.max(1).min(items.len().max(1));
    if threads == 1 {
        return items.iter().map(f).collect();
    }
    let next = AtomicUsize::new(0);
    let out: Mutex<Vec<Option<R>>> = Mutex::new((0..items.len()).map(|_| None).collect());
    std::thread::scope(|scope| {
        for _ in 0..threads {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                if i >= items.len() {
                    break;
                }
                let r = f(&items[i]);
                out.lock().expect("worker poisoned")[i] = Some(r);
            });
        }
    });
    out.into_inner().expect("worker poisoned").into_iter().map(|r| r.expect("every item mapped")).collect()
}

/// Profiles and the (ε-independent) Whitham trajectory on the stride grid.
#[derive(Debug, Clone)]
pub struct Setup {
    pub cfg: RunConfig,
    pub phi1: SpectralField,
    pub phi2: SpectralField,
    pub whitham: WhithamTrajectory,
}

impl Setup {
    pub fn new(cfg: &RunConfig) -> Result<Self> {
        cfg.validate()?;
        let (phi1, phi2) = cfg.profiles()?;
        let whitham = whitham_solve(&phi1, &phi2, cfg.t0, cfg.resolution.whitham_dt, cfg.snapshot_count())?;
        Ok(Self { cfg: cfg.clone(), phi1, phi2, whitham })
    }

    pub fn fast_grid(&self, eps: f64) -> Result<Grid1D> {
        fast_grid(self.phi1.grid, eps, self.cfg.resolution.dx_max)
    }

    /// Production step: the configured dt, capped by the stability bound.
    pub fn dt_for(&self, grid: Grid1D) -> f64 {
        self.cfg.resolution.dt.min(max_stable_dt(grid))
    }

    pub fn solve_kgb(&self, eps: f64, grid: Grid1D, dt: f64) -> Result<KgbTrajectory> {
        let init = theorem_initial_data(&self.phi1, &self.phi2, eps, grid)?;
        kgb_solve(&init, self.cfg.t0 / eps, dt, self.cfg.snapshot_count())
    }
}

fn sup_abs(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).fold(0.0f64, |m, (x, y)| m.max((x - y).abs()))
}

/// (sup, H¹) distance of a KGB state from (U, H(U))(εx) for the slow state
/// at the same instant.
fn distance_to_whitham(state: &KgbState, slow_u: &SpectralField) -> Result<(f64, f64)> {
    let g = state.grid();
    let u_hat = interpolate_long_wave(slow_u, g)?;
    let up = transform_inverse_real(&u_hat);
    let vp = h_of_u(&up)?;
    let v_hat = transform_forward(g, &vp)?;
    let sup = sup_abs(&state.u_physical(), &up).max(sup_abs(&state.v_physical(), &vp));
    let du = state.u.sub(&u_hat)?.without_nyquist().hs_derivative(1);
    let dv = state.v.sub(&v_hat)?.without_nyquist().hs_derivative(1);
    Ok((sup, (du * du + dv * dv).sqrt()))
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ErrorSample {
    pub eps: f64,
    pub n_fast: usize,
    pub dt: f64,
    pub t_end: f64,
    pub sup_error: f64,
    pub h1_error: f64,
    /// sup |ψ_v − V(ε·)| over the snapshots.
    pub ansatz_gap: f64,
    /// Production vs refined-reference discrepancy (sup norm).
    pub certified_error: f64,
    pub signal_ratio: f64,
    pub certified: bool,
    pub max_hermitian_defect: f64,
}

/// One ε sample of the approximation-error study.
pub fn error_sample(setup: &Setup, eps: f64) -> Result<ErrorSample> {
    let cfg = &setup.cfg;
    let grid = setup.fast_grid(eps)?;
    let dt = setup.dt_for(grid);
    let traj = setup.solve_kgb(eps, grid, dt)?;

    let mut sup_error: f64 = 0.0;
    let mut h1_error: f64 = 0.0;
    let mut gap: f64 = 0.0;
    let mut herm: f64 = 0.0;
    for (state, slow) in traj.states.iter().zip(&setup.whitham.states) {
        let (s, h) = distance_to_whitham(state, &slow.u)?;
        sup_error = sup_error.max(s);
        h1_error = h1_error.max(h);
        herm = herm.max(state.hermitian_defect());
    }
    for &t in &traj.times {
        let ans = build_ansatz(&setup.whitham, eps, t, grid)?;
        gap = gap.max(sup_abs(&transform_inverse_real(&ans.psi_v), &transform_inverse_real(&ans.v_plain)));
    }

    let ref_grid = Grid1D::new(grid.n() * cfg.resolution.reference_n_factor, grid.length())?;
    let ref_traj = setup.solve_kgb(eps, ref_grid, dt / cfg.resolution.reference_dt_factor as f64)?;
    let mut certified_error: f64 = 0.0;
    for (p, r) in traj.states.iter().zip(&ref_traj.states) {
        let pu = transform_inverse_real(&interpolate_long_wave(&p.u, ref_grid)?);
        let pv = transform_inverse_real(&interpolate_long_wave(&p.v, ref_grid)?);
        certified_error = certified_error.max(sup_abs(&pu, &r.u_physical())).max(sup_abs(&pv, &r.v_physical()));
    }
    let signal_ratio = if certified_error > 0.0 { sup_error / certified_error } else { f64::INFINITY };
    Ok(ErrorSample {
        eps,
        n_fast: grid.n(),
        dt: traj.dt,
        t_end: cfg.t0 / eps,
        sup_error,
        h1_error,
        ansatz_gap: gap,
        certified_error,
        signal_ratio,
        certified: signal_ratio >= 10.0,
        max_hermitian_defect: herm,
    })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ErrorScalingOutcome {
    pub samples: Vec<ErrorSample>,
    /// Fits over the certified samples only.
    pub sup: ScalingReport,
    pub h1: ScalingReport,
    pub ansatz_gap: ScalingReport,
    pub rejected: Vec<f64>,
}

/// Approximation error against the Whitham solution over the ε ladder.
pub fn run_error_scaling(setup: &Setup, threads: usize) -> Result<ErrorScalingOutcome> {
    let results = par_map(&setup.cfg.eps_ladder, threads, |&eps| error_sample(setup, eps));
    let samples = results.into_iter().collect::<Result<Vec<_>>>()?;
    let ok: Vec<&ErrorSample> = samples.iter().filter(|s| s.certified).collect();
    let rejected = samples.iter().filter(|s| !s.certified).map(|s| s.eps).collect();
    let pick = |f: &dyn Fn(&ErrorSample) -> f64| ok.iter().map(|s| (s.eps, f(s))).collect::<Vec<_>>();
    Ok(ErrorScalingOutcome {
        sup: ScalingReport::fit("sup |(u,v) − (U,V)|", pick(&|s| s.sup_error))?,
        h1: ScalingReport::fit("H¹ |(u,v) − (U,V)|", pick(&|s| s.h1_error))?,
        ansatz_gap: ScalingReport::fit("sup |ψ_v − V|", pick(&|s| s.ansatz_gap))?,
        samples,
        rejected,
    })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ResidualScan {
    pub reports: Vec<ResidualReport>,
    pub hs: ScalingReport,
    pub weighted: ScalingReport,
    pub v_sup: ScalingReport,
}

pub fn run_residual_scan(setup: &Setup, threads: usize) -> Result<ResidualScan> {
    let s = setup.cfg.s;
    let results = par_map(&setup.cfg.eps_ladder, threads, |&eps| {
        let grid = setup.fast_grid(eps)?;
        residual(&setup.whitham, eps, grid, s)
    });
    let reports = results.into_iter().collect::<Result<Vec<_>>>()?;
    let pick = |f: &dyn Fn(&ResidualReport) -> f64| reports.iter().map(|r| (r.eps, f(r))).collect::<Vec<_>>();
    Ok(ResidualScan {
        hs: ScalingReport::fit("H^s residual", pick(&|r| r.hs_total()))?,
        weighted: ScalingReport::fit("ω-weighted residual", pick(&|r| r.weighted_total()))?,
        v_sup: ScalingReport::fit("sup Res_v", pick(&|r| r.res_v_sup))?,
        reports,
    })
}

/// Normal-form iteration for Ψ at stride snapshot `index`.
pub fn normal_form_at(setup: &Setup, eps: f64, index: usize) -> Result<NormalFormRun> {
    let grid = setup.fast_grid(eps)?;
    let t =
        setup.whitham.times.get(index).ok_or_else(|| LabError::InvalidArgument(format!("no snapshot {index}")))? / eps;
    let ans = build_ansatz(&setup.whitham, eps, t, grid)?;
    iterate_to_limit(&ans.psi(), eps, &setup.cfg.normal_form)
}

/// Bracket [lo, hi] on the profile amplitude where the normal-form gate
/// (q threshold) starts to fail at `eps`, by bisection from `a_hi`. An
/// empirical smallness boundary, not a proven one.
pub fn amplitude_gate_boundary(cfg: &RunConfig, eps: f64, a_hi: f64, bisections: usize) -> Result<(f64, f64)> {
    let blocked = |a: f64| -> Result<bool> {
        let mut c = cfg.clone();
        c.profile.amplitude = a;
        match normal_form_at(&Setup::new(&c)?, eps, 0) {
            Ok(_) => Ok(false),
            Err(LabError::Regime { .. }) => Ok(true),
            Err(e) => Err(e),
        }
    };
    if !(a_hi > 0.0) || !blocked(a_hi)? {
        return Err(LabError::InvalidArgument(format!("gate still passes at amplitude {a_hi}")));
    }
    let (mut lo, mut hi) = (0.0, a_hi);
    for _ in 0..bisections {
        let mid = 0.5 * (lo + hi);
        if blocked(mid)? {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok((lo, hi))
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct KernelLadderEntry {
    pub eps: f64,
    pub stages_used: usize,
    pub fitted_ratio: f64,
    pub symmetry: SymmetryReport,
    pub commutator_xnorm: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct KernelLadder {
    pub entries: Vec<KernelLadderEntry>,
    pub shift: ScalingReport,
    pub commutator: ScalingReport,
}

/// Limit-kernel diagnostics at t = 0 over the energy ladder.
pub fn run_kernel_ladder(setup: &Setup, threads: usize) -> Result<KernelLadder> {
    let results = par_map(&setup.cfg.energy_ladder, threads, |&eps| -> Result<KernelLadderEntry> {
        let run = normal_form_at(setup, eps, 0)?;
        Ok(KernelLadderEntry {
            eps,
            stages_used: run.limit.stages_used,
            fitted_ratio: run.fitted_ratio(),
            symmetry: check_kernel_symmetries(&run.limit),
            commutator_xnorm: run.records[0].commutator_xnorm,
        })
    });
    let entries = results.into_iter().collect::<Result<Vec<_>>>()?;
    Ok(KernelLadder {
        shift: ScalingReport::fit(
            "first-argument shift defect",
            entries.iter().map(|e| (e.eps, e.symmetry.shift_defect)).collect(),
        )?,
        commutator: ScalingReport::fit(
            "commutator X-norm",
            entries.iter().map(|e| (e.eps, e.commutator_xnorm)).collect(),
        )?,
        entries,
    })
}

/// Random probe state: independent uniform coefficients on every
/// non-Nyquist mode of every branch.
pub fn random_probe(grid: Grid1D, rng: &mut ChaCha8Rng) -> DiagonalState {
    DiagonalState {
        r: std::array::from_fn(|_| {
            let mut f = SpectralField::zeros(grid);
            for (j, c) in f.coeffs.iter_mut().enumerate() {
                if j != grid.nyquist_slot() {
                    *c = Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
                }
            }
            f
        }),
    }
}

/// max over probes of ‖inverse(forward(R)) − R‖ / ‖R‖ in H⁰_s.
pub fn probe_roundtrip(stages: &[NormalFormStage], grid: Grid1D, probes: usize, seed: u64, s: u32) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..probes)
        .map(|_| {
            let r = random_probe(grid, &mut rng);
            let back = apply_composite_inverse(&apply_composite(&r, stages), stages);
            back.sub(&r).hs_weighted(s) / r.hs_weighted(s)
        })
        .fold(0.0, f64::max)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PipelineOutcome {
    pub eps: f64,
    pub ablated: bool,
    pub drift: DriftReport,
    /// (t, ‖R‖_{H¹}) of the untransformed error.
    pub r_h1: Vec<(f64, f64)>,
    pub stages_used: Vec<usize>,
    pub q_measured: Vec<f64>,
    /// d𝓔/dt driven by the linear error dynamics alone (no residual forcing,
    /// no quadratic term), per snapshot.
    pub homogeneous_rates: Vec<f64>,
    /// max over snapshots with 𝓔 > 0 of |homogeneous rate| / 𝓔.
    pub growth_rate: f64,
}

/// Error trajectory R = (solution − ansatz)/ε^β at the configured energy
/// snapshots, transformed by the normal form frozen at each snapshot
/// (identity when `ablate`), with 𝓔_s and its instantaneous rate.
pub fn run_full_pipeline(setup: &Setup, eps: f64, ablate: bool) -> Result<PipelineOutcome> {
    let grid = setup.fast_grid(eps)?;
    let traj = setup.solve_kgb(eps, grid, setup.dt_for(grid))?;
    pipeline_on_trajectory(setup, eps, &traj, ablate)
}

pub fn pipeline_on_trajectory(setup: &Setup, eps: f64, traj: &KgbTrajectory, ablate: bool) -> Result<PipelineOutcome> {
    let cfg = &setup.cfg;
    let grid = traj.states[0].grid();
    let inv = eps.powf(-cfg.beta);
    let mut snaps = Vec::new();
    let mut rates = Vec::new();
    let mut r_h1 = Vec::new();
    let mut stages_used = Vec::new();
    let mut q_measured = Vec::new();
    let mut hom = Vec::new();
    let mut growth: f64 = 0.0;
    for &idx in &cfg.energy_snapshots {
        let t = traj.times[idx];
        let sol = &traj.states[idx];
        let ans = build_ansatz(&setup.whitham, eps, t, grid)?;
        let psi = KgbState::from_time_derivatives(ans.psi_u.clone(), &ans.psi_u_t, ans.psi_v.clone(), &ans.psi_v_t);
        let psi_rate =
            KgbState::from_time_derivatives(ans.psi_u_t.clone(), &ans.psi_u_tt, ans.psi_v_t.clone(), &ans.psi_v_tt);
        let r = sol.sub(&psi).scale(inv);
        let dr = kgb_rhs(sol).sub(&psi_rate).scale(inv);
        let dr_lin = error_linear_rhs(&r, &ans.psi());
        r_h1.push((t, [&r.u, &r.wu, &r.v, &r.wv].iter().map(|f| f.hs_derivative(1).powi(2)).sum::<f64>().sqrt()));

        let run = if ablate {
            untransformed_limit(&ans.psi(), eps, &cfg.normal_form)?
        } else {
            iterate_to_limit(&ans.psi(), eps, &cfg.normal_form)?
        };
        stages_used.push(run.limit.stages_used);
        q_measured.push(run.q_measured);
        let tr = undiagonalize(&apply_composite(&diagonalize(&r), &run.stages));
        let tdr = undiagonalize(&apply_composite(&diagonalize(&dr), &run.stages));
        let tdr_lin = undiagonalize(&apply_composite(&diagonalize(&dr_lin), &run.stages));
        let snap = energy_snapshot(t, &tr, &run.limit, cfg.s)?;
        let h = energy_rates(&tr, &tdr_lin, &run.limit, cfg.s)?.1;
        if snap.e_mod > 0.0 {
            growth = growth.max(h.abs() / snap.e_mod);
        }
        hom.push(h);
        snaps.push(snap);
        rates.push(energy_rates(&tr, &tdr, &run.limit, cfg.s)?.1);
    }
    Ok(PipelineOutcome {
        eps,
        ablated: ablate,
        drift: drift_report(snaps, rates, eps, cfg.s)?,
        r_h1,
        stages_used,
        q_measured,
        homogeneous_rates: hom,
        growth_rate: growth,
    })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DriftLadder {
    pub transformed: Vec<PipelineOutcome>,
    pub ablated: Vec<PipelineOutcome>,
    pub transformed_rate: ScalingReport,
    pub ablated_rate: ScalingReport,
    pub transformed_secant: ScalingReport,
    pub ablated_secant: ScalingReport,
    pub transformed_growth: ScalingReport,
    pub ablated_growth: ScalingReport,
}

/// Full and ablated pipelines on the energy ladder (one KGB run per ε).
pub fn run_drift_ladder(setup: &Setup, threads: usize) -> Result<DriftLadder> {
    let results = par_map(&setup.cfg.energy_ladder, threads, |&eps| -> Result<(PipelineOutcome, PipelineOutcome)> {
        let grid = setup.fast_grid(eps)?;
        let traj = setup.solve_kgb(eps, grid, setup.dt_for(grid))?;
        Ok((pipeline_on_trajectory(setup, eps, &traj, false)?, pipeline_on_trajectory(setup, eps, &traj, true)?))
    });
    let pairs = results.into_iter().collect::<Result<Vec<_>>>()?;
    let (transformed, ablated): (Vec<_>, Vec<_>) = pairs.into_iter().unzip();
    let fit = |name: &str, v: &[PipelineOutcome], f: &dyn Fn(&DriftReport) -> f64| {
        ScalingReport::fit(name, v.iter().map(|o| (o.eps, f(&o.drift))).collect())
    };
    Ok(DriftLadder {
        transformed_rate: fit("max |d𝓔/dt|, transformed", &transformed, &|d| d.max_rate)?,
        ablated_rate: fit("max |d𝓔/dt|, ablated", &ablated, &|d| d.max_rate)?,
        transformed_secant: fit("max |Δ𝓔|/Δt, transformed", &transformed, &|d| d.secant_rate)?,
        ablated_secant: fit("max |Δ𝓔|/Δt, ablated", &ablated, &|d| d.secant_rate)?,
        transformed_growth: ScalingReport::fit(
            "linear growth rate, transformed",
            transformed.iter().map(|o| (o.eps, o.growth_rate)).collect(),
        )?,
        ablated_growth: ScalingReport::fit(
            "linear growth rate, ablated",
            ablated.iter().map(|o| (o.eps, o.growth_rate)).collect(),
        )?,
        transformed,
        ablated,
    })
}

/// max_t |E_s(t)/E_s(0) − 1| under the linear flow from the long-wave data
/// over T0/ε.
pub fn linear_conservation(setup: &Setup, eps: f64) -> Result<f64> {
    let grid = setup.fast_grid(eps)?;
    let init = theorem_initial_data(&setup.phi1, &setup.phi2, eps, grid)?;
    let traj = kgb_solve_with(&init, setup.cfg.t0 / eps, setup.dt_for(grid), setup.cfg.snapshot_count(), false)?;
    let e0 = energy_e(&init, setup.cfg.s)?;
    let mut worst: f64 = 0.0;
    for st in &traj.states {
        worst = worst.max((energy_e(st, setup.cfg.s)? / e0 - 1.0).abs());
    }
    Ok(worst)
}

/// Observed temporal orders log₂(‖y_h − y_{h/2}‖/‖y_{h/2} − y_{h/4}‖) for the
/// KGB integrator on a coarse periodic problem, over dt = dt0/2^i.
pub fn kgb_self_convergence(dt0: f64, levels: usize, t_end: f64) -> Result<Vec<f64>> {
    let grid = Grid1D::new(64, 64.0)?;
    let c = grid.length() / 2.0;
    let u: Vec<f64> = grid.xs().iter().map(|&x| 0.3 * (-((x - c) / 4.0).powi(2)).exp()).collect();
    let v: Vec<f64> = grid.xs().iter().map(|&x| 0.2 * (-((x - c - 3.0) / 3.0).powi(2)).exp()).collect();
    let ut: Vec<f64> = grid.xs().iter().map(|&x| 0.1 * (x - c) / 4.0 * (-((x - c) / 4.0).powi(2)).exp()).collect();
    let uh = transform_forward(grid, &u)?;
    let init = KgbState::from_time_derivatives(
        uh.clone(),
        &transform_forward(grid, &ut)?,
        transform_forward(grid, &v)?,
        &SpectralField::zeros(grid),
    );
    let finals = (0..levels)
        .map(|i| {
            let dt = dt0 / 2f64.powi(i as i32);
            kgb_solve(&init, t_end, dt, 1).map(|tr| diagonalize(tr.states.last().expect("final state")).r.to_vec())
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(orders(&finals))
}

/// Same study for the Whitham RK4 integrator on the configured profiles.
pub fn whitham_self_convergence(setup: &Setup, dt0: f64, levels: usize, t_end: f64) -> Result<Vec<f64>> {
    let finals = (0..levels)
        .map(|i| {
            let dt = dt0 / 2f64.powi(i as i32);
            whitham_solve(&setup.phi1, &setup.phi2, t_end, dt, 1).map(|tr| {
                let s = tr.states.last().expect("final state");
                vec![s.u.clone(), s.w.clone()]
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(orders(&finals))
}

fn orders(levels: &[Vec<SpectralField>]) -> Vec<f64> {
    let diff = |a: &Vec<SpectralField>, b: &Vec<SpectralField>| {
        a.iter().zip(b).map(|(x, y)| x.sub(y).expect("same grid").l2_norm().powi(2)).sum::<f64>().sqrt()
    };
    let d: Vec<f64> = levels.windows(2).map(|w| diff(&w[0], &w[1])).collect();
    d.windows(2).map(|w| (w[0] / w[1]).log2()).collect()
}
