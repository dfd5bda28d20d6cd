//! Long-wave dynamics: the slaving map V = H(U), the Whitham system in
//! conservation form, the improved ansatz with its ε² correction, and the
//! residual the ansatz leaves in the full equations.
//!
//! Slow variables X = εx, T = εt. The Whitham system is
//!
//! ```text
//! U_T = W_X,    W_T = (U + U² + 2U·H(U) + H(U)²)_X
//! ```
//!
//! and every ansatz time derivative is obtained from it by the chain rule,
//! never by differencing in time.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::dispersion::{omega1, omega2};
use crate::error::{LabError, Result};
use crate::spectral::{interpolate_long_wave, transform_forward, transform_inverse_real, Grid1D, SpectralField};

/// Amplitude bound of the small-amplitude regime.
pub const U_MAX: f64 = 0.375;

// H and its derivatives; valid for U > −1/2.

#[inline]
pub fn h(u: f64) -> f64 {
    -(1.0 + u) + (1.0 + 2.0 * u).sqrt()
}

#[inline]
pub fn h1(u: f64) -> f64 {
    -1.0 + 1.0 / (1.0 + 2.0 * u).sqrt()
}

#[inline]
pub fn h2(u: f64) -> f64 {
    -(1.0 + 2.0 * u).powf(-1.5)
}

#[inline]
pub fn h3(u: f64) -> f64 {
    3.0 * (1.0 + 2.0 * u).powf(-2.5)
}

#[inline]
pub fn h4(u: f64) -> f64 {
    -15.0 * (1.0 + 2.0 * u).powf(-3.5)
}

/// Whitham flux `U + U² + 2U·H + H²`.
#[inline]
pub fn flux(u: f64) -> f64 {
    let v = h(u);
    u + u * u + 2.0 * u * v + v * v
}

// On the slaving branch the flux collapses to U − 2H(U), so its U-derivatives
// are 1 − 2H′ and −2H″.
#[inline]
fn flux1(u: f64) -> f64 {
    1.0 - 2.0 * h1(u)
}

#[inline]
fn flux2(u: f64) -> f64 {
    -2.0 * h2(u)
}

/// Pointwise V = H(U): the root of `2V + U² + 2UV + V² = 0` with H(0) = 0.
pub fn h_of_u(u: &[f64]) -> Result<Vec<f64>> {
    u.iter()
        .enumerate()
        .map(|(i, &x)| {
            let disc = 1.0 + 2.0 * x;
            if disc <= 0.0 || !disc.is_finite() {
                Err(LabError::Domain { index: i, value: x, what: "1 + 2U must be positive".into() })
            } else {
                Ok(h(x))
            }
        })
        .collect()
}

#[derive(Debug, Clone)]
pub struct WhithamState {
    pub u: SpectralField,
    pub w: SpectralField,
}

impl WhithamState {
    pub fn grid(&self) -> Grid1D {
        self.u.grid
    }

    pub fn u_physical(&self) -> Vec<f64> {
        transform_inverse_real(&self.u)
    }

    fn axpy(&self, a: f64, d: &WhithamState) -> WhithamState {
        let c = Complex64::new(a, 0.0);
        WhithamState { u: self.u.axpy(c, &d.u), w: self.w.axpy(c, &d.w) }
    }

    /// Check sup|U| < 3/8 and a zero-mean W.
    pub fn check_invariants(&self, time: f64) -> Result<()> {
        let sup = self.u_physical().iter().fold(0.0f64, |m, x| m.max(x.abs()));
        if sup >= U_MAX || !sup.is_finite() {
            return Err(LabError::InvariantViolation { time, what: format!("sup|U| = {sup:.4} ≥ 3/8") });
        }
        let scale = self.w.max_abs().max(1.0);
        if self.w.coeffs[0].norm() > 1e-10 * scale {
            return Err(LabError::InvariantViolation {
                time,
                what: format!("W mean coefficient {:.3e} not zero", self.w.coeffs[0].norm()),
            });
        }
        Ok(())
    }
}

/// Right-hand side of the Whitham system with spectral derivatives and a
/// dealiased flux.
pub fn whitham_rhs(state: &WhithamState) -> Result<WhithamState> {
    let u = state.u_physical();
    h_of_u(&u)?;
    let f: Vec<f64> = u.iter().map(|&x| flux(x)).collect();
    let f_hat = transform_forward(state.grid(), &f)?.dealiased();
    Ok(WhithamState { u: state.w.derivative(1), w: f_hat.derivative(1) })
}

#[derive(Debug, Clone)]
pub struct WhithamTrajectory {
    pub times: Vec<f64>,
    pub states: Vec<WhithamState>,
    pub dt: f64,
}

impl WhithamTrajectory {
    pub fn grid(&self) -> Grid1D {
        self.states[0].grid()
    }

    /// State at a stored snapshot time (matched to 1e−9).
    pub fn state_at(&self, t: f64) -> Result<&WhithamState> {
        self.times
            .iter()
            .position(|&s| (s - t).abs() <= 1e-9 * (1.0 + t.abs()))
            .map(|i| &self.states[i])
            .ok_or_else(|| LabError::InvalidArgument(format!("slow time {t} is not a stored snapshot")))
    }
}

/// Classical RK4 from U(·,0) = Φ₁, W(·,0) = ∂_X⁻¹Φ₂ over `[0, t0]`, storing
/// `snapshots + 1` equally spaced states. The step is shrunk so that every
/// snapshot lands on the step grid.
pub fn whitham_solve(
    phi1: &SpectralField,
    phi2: &SpectralField,
    t0: f64,
    dt: f64,
    snapshots: usize,
) -> Result<WhithamTrajectory> {
    phi1.check_same_grid(phi2)?;
    if !(t0 > 0.0 && dt > 0.0) || snapshots == 0 {
        return Err(LabError::Config(format!("need t0 > 0, dt > 0, snapshots ≥ 1 (got {t0}, {dt}, {snapshots})")));
    }
    let w0 = phi2.without_nyquist().antiderivative()?;
    let mut state = WhithamState { u: phi1.without_nyquist(), w: w0 };
    state.check_invariants(0.0)?;

    let interval = t0 / snapshots as f64;
    let sub = (interval / dt).ceil().max(1.0) as usize;
    let h = interval / sub as f64;

    let mut times = vec![0.0];
    let mut states = vec![state.clone()];
    for s in 0..snapshots {
        for k in 0..sub {
            state = rk4_step(&state, h)?;
            let t = (s * sub + k + 1) as f64 * h;
            state.check_invariants(t)?;
        }
        times.push((s + 1) as f64 * interval);
        states.push(state.clone());
    }
    Ok(WhithamTrajectory { times, states, dt: h })
}

fn rk4_step(y: &WhithamState, h: f64) -> Result<WhithamState> {
    let k1 = whitham_rhs(y)?;
    let k2 = whitham_rhs(&y.axpy(0.5 * h, &k1))?;
    let k3 = whitham_rhs(&y.axpy(0.5 * h, &k2))?;
    let k4 = whitham_rhs(&y.axpy(h, &k3))?;
    Ok(y.axpy(h / 6.0, &k1).axpy(h / 3.0, &k2).axpy(h / 3.0, &k3).axpy(h / 6.0, &k4))
}

/// Slow fields and their T-derivatives up to the order the residual needs,
/// all produced from (U, W) through the Whitham equation.
#[derive(Debug, Clone)]
pub struct SlowJet {
    pub grid: Grid1D,
    pub u: Vec<f64>,
    pub u_t: Vec<f64>,
    pub u_tt: Vec<f64>,
    pub v: Vec<f64>,
    pub v_t: Vec<f64>,
    pub v_tt: Vec<f64>,
    pub v2: Vec<f64>,
    pub v2_t: Vec<f64>,
    pub v2_tt: Vec<f64>,
}

fn phys(f: &SpectralField) -> Vec<f64> {
    transform_inverse_real(f)
}

fn spec(g: Grid1D, x: &[f64]) -> SpectralField {
    transform_forward(g, x).expect("slow grid size")
}

fn dxx(g: Grid1D, x: &[f64]) -> Vec<f64> {
    phys(&spec(g, x).derivative(2))
}

impl SlowJet {
    pub fn from_state(state: &WhithamState) -> Result<Self> {
        let g = state.grid();
        let u = state.u_physical();
        let v = h_of_u(&u)?;
        let n = u.len();
        let zip = |f: &dyn Fn(usize) -> f64| -> Vec<f64> { (0..n).map(f).collect() };

        let u_t = phys(&state.w.derivative(1));
        let fl: Vec<f64> = u.iter().map(|&x| flux(x)).collect();
        let u_tt = dxx(g, &fl);
        let u_ttt = dxx(g, &zip(&|i| flux1(u[i]) * u_t[i]));
        let u_tttt = dxx(g, &zip(&|i| flux2(u[i]) * u_t[i] * u_t[i] + flux1(u[i]) * u_tt[i]));

        let v_t = zip(&|i| h1(u[i]) * u_t[i]);
        let v_tt = zip(&|i| h2(u[i]) * u_t[i].powi(2) + h1(u[i]) * u_tt[i]);
        let v_ttt = zip(&|i| h3(u[i]) * u_t[i].powi(3) + 3.0 * h2(u[i]) * u_t[i] * u_tt[i] + h1(u[i]) * u_ttt[i]);
        let v_tttt = zip(&|i| {
            let (a, b, c, d) = (u_t[i], u_tt[i], u_ttt[i], u_tttt[i]);
            h4(u[i]) * a.powi(4)
                + 6.0 * h3(u[i]) * a * a * b
                + 3.0 * h2(u[i]) * b * b
                + 4.0 * h2(u[i]) * a * c
                + h1(u[i]) * d
        });

        let v_xx = dxx(g, &v);
        let v_t_xx = dxx(g, &v_t);
        let v_tt_xx = dxx(g, &v_tt);

        // V₂ = N/D with N = V_XX − V_TT and D = 2 + 2U + 2V (> 0 on the branch).
        let num = zip(&|i| v_xx[i] - v_tt[i]);
        let num_t = zip(&|i| v_t_xx[i] - v_ttt[i]);
        let num_tt = zip(&|i| v_tt_xx[i] - v_tttt[i]);
        let mut den = Vec::with_capacity(n);
        for i in 0..n {
            let d = 2.0 + 2.0 * u[i] + 2.0 * v[i];
            if d <= 0.0 {
                return Err(LabError::Domain { index: i, value: d, what: "V₂ denominator 2 + 2U + 2V".into() });
            }
            den.push(d);
        }
        let den_t = zip(&|i| 2.0 * u_t[i] + 2.0 * v_t[i]);
        let den_tt = zip(&|i| 2.0 * u_tt[i] + 2.0 * v_tt[i]);

        let v2 = zip(&|i| num[i] / den[i]);
        let v2_t = zip(&|i| num_t[i] / den[i] - num[i] * den_t[i] / den[i].powi(2));
        let v2_tt = zip(&|i| {
            let (nn, nt, ntt, d, dt, dtt) = (num[i], num_t[i], num_tt[i], den[i], den_t[i], den_tt[i]);
            ntt / d - 2.0 * nt * dt / (d * d) - nn * dtt / (d * d) + 2.0 * nn * dt * dt / d.powi(3)
        });

        Ok(Self { grid: g, u, u_t, u_tt, v, v_t, v_tt, v2, v2_t, v2_tt })
    }
}

/// Improved ansatz on the fast grid at one instant, with its first two
/// fast-time derivatives (∂_t = ε∂_T).
#[derive(Debug, Clone)]
pub struct AnsatzFields {
    pub eps: f64,
    pub t: f64,
    pub psi_u: SpectralField,
    pub psi_v: SpectralField,
    pub psi_u_t: SpectralField,
    pub psi_v_t: SpectralField,
    pub psi_u_tt: SpectralField,
    pub psi_v_tt: SpectralField,
    /// Plain Whitham ansatz V(εx) (without the ε² correction).
    pub v_plain: SpectralField,
    /// Slow-grid V and V₂.
    pub v: SpectralField,
    pub v2: SpectralField,
}

impl AnsatzFields {
    pub fn grid(&self) -> Grid1D {
        self.psi_u.grid
    }

    /// Ψ = ψ_u + ψ_v.
    pub fn psi(&self) -> SpectralField {
        self.psi_u.axpy(Complex64::new(1.0, 0.0), &self.psi_v)
    }
}

/// Fast grid for a run: length L_X/ε and spacing ≤ `dx_max`.
pub fn fast_grid(slow: Grid1D, eps: f64, dx_max: f64) -> Result<Grid1D> {
    let g = Grid1D::with_max_spacing(slow.length() / eps, dx_max)?;
    if g.n() < slow.n() {
        return Grid1D::new(slow.n(), slow.length() / eps);
    }
    Ok(g)
}

/// Build ψ_u = U(εx, εt), ψ_v = V + ε²V₂ at fast time `t` on `fast`.
pub fn build_ansatz(traj: &WhithamTrajectory, eps: f64, t: f64, fast: Grid1D) -> Result<AnsatzFields> {
    let state = traj.state_at(eps * t)?;
    let jet = SlowJet::from_state(state)?;
    ansatz_from_jet(&jet, eps, t, fast)
}

pub fn ansatz_from_jet(jet: &SlowJet, eps: f64, t: f64, fast: Grid1D) -> Result<AnsatzFields> {
    let g = jet.grid;
    let up = |x: &[f64]| interpolate_long_wave(&spec(g, x), fast);
    let e2 = eps * eps;
    let lin = |a: &[f64], b: &[f64], cb: f64| -> Vec<f64> { a.iter().zip(b).map(|(x, y)| x + cb * y).collect() };

    let psi_v_slow = lin(&jet.v, &jet.v2, e2);
    let psi_v_t = lin(&jet.v_t, &jet.v2_t, e2);
    let psi_v_tt = lin(&jet.v_tt, &jet.v2_tt, e2);

    Ok(AnsatzFields {
        eps,
        t,
        psi_u: up(&jet.u)?,
        psi_v: up(&psi_v_slow)?,
        psi_u_t: up(&jet.u_t)?.scale(eps),
        psi_v_t: up(&psi_v_t)?.scale(eps),
        psi_u_tt: up(&jet.u_tt)?.scale(e2),
        psi_v_tt: up(&psi_v_tt)?.scale(e2),
        v_plain: up(&jet.v)?,
        v: spec(g, &jet.v),
        v2: spec(g, &jet.v2),
    })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ResidualReport {
    pub eps: f64,
    pub s: u32,
    pub res_u_hs: f64,
    pub res_v_hs: f64,
    pub res_u_weighted: f64,
    pub res_v_weighted: f64,
    pub res_v_sup: f64,
}

impl ResidualReport {
    pub fn hs_total(&self) -> f64 {
        self.res_u_hs + self.res_v_hs
    }

    pub fn weighted_total(&self) -> f64 {
        self.res_u_weighted + self.res_v_weighted
    }

    fn sup_with(&self, o: &ResidualReport) -> ResidualReport {
        ResidualReport {
            eps: self.eps,
            s: self.s,
            res_u_hs: self.res_u_hs.max(o.res_u_hs),
            res_v_hs: self.res_v_hs.max(o.res_v_hs),
            res_u_weighted: self.res_u_weighted.max(o.res_u_weighted),
            res_v_weighted: self.res_v_weighted.max(o.res_v_weighted),
            res_v_sup: self.res_v_sup.max(o.res_v_sup),
        }
    }
}

/// Residual fields of the improved ansatz in the KGB equations,
///
/// ```text
/// Res_u = −∂_t²ψ_u + ∂_x²ψ_u + ∂_t²∂_x²ψ_u + ∂_x²(ψ_u + ψ_v)²
/// Res_v = −∂_t²ψ_v + ∂_x²ψ_v − 2ψ_v − (ψ_u + ψ_v)²
/// ```
///
/// evaluated term by term on the fast grid.
pub fn residual_fields(ans: &AnsatzFields) -> (SpectralField, SpectralField) {
    let g = ans.grid();
    let pu = transform_inverse_real(&ans.psi_u);
    let pv = transform_inverse_real(&ans.psi_v);
    let f: Vec<f64> = pu.iter().zip(&pv).map(|(a, b)| (a + b) * (a + b)).collect();
    let f_hat = transform_forward(g, &f).expect("fast grid size");

    let one = Complex64::new(1.0, 0.0);
    let res_u = ans
        .psi_u_tt
        .scale(-1.0)
        .axpy(one, &ans.psi_u.derivative(2))
        .axpy(one, &ans.psi_u_tt.derivative(2))
        .axpy(one, &f_hat.derivative(2));
    let res_v = ans
        .psi_v_tt
        .scale(-1.0)
        .axpy(one, &ans.psi_v.derivative(2))
        .axpy(Complex64::new(-2.0, 0.0), &ans.psi_v)
        .axpy(-one, &f_hat);
    (res_u.without_nyquist(), res_v.without_nyquist())
}

/// Norms of the residual at one instant; errors if Res_u has a k = 0 mode.
pub fn residual_norms(ans: &AnsatzFields, s: u32) -> Result<ResidualReport> {
    let (ru, rv) = residual_fields(ans);
    let l2 = ru.l2_norm();
    let mean = ru.coeffs[0].norm() * ru.grid.dk().sqrt();
    if mean > 1e-10 * l2.max(f64::MIN_POSITIVE) && mean > 0.0 {
        return Err(LabError::Consistency(format!("Res_u carries a k = 0 component ({mean:.3e} vs norm {l2:.3e})")));
    }
    let zero = Complex64::new(0.0, 0.0);
    let wu = ru.apply_symbol(|k| if k == 0.0 { zero } else { Complex64::new(1.0 / omega1(k), 0.0) });
    let wv = rv.apply_symbol(|k| Complex64::new(1.0 / omega2(k), 0.0));
    let sup = transform_inverse_real(&rv).iter().fold(0.0f64, |m, x| m.max(x.abs()));
    Ok(ResidualReport {
        eps: ans.eps,
        s,
        res_u_hs: ru.hs_derivative(s),
        res_v_hs: rv.hs_derivative(s),
        res_u_weighted: wu.hs_derivative(s),
        res_v_weighted: wv.hs_derivative(s),
        res_v_sup: sup,
    })
}

/// Supremum over the stored snapshots of the residual norms.
pub fn residual(traj: &WhithamTrajectory, eps: f64, fast: Grid1D, s: u32) -> Result<ResidualReport> {
    let mut acc: Option<ResidualReport> = None;
    for &tt in &traj.times {
        let ans = build_ansatz(traj, eps, tt / eps, fast)?;
        let r = residual_norms(&ans, s)?;
        acc = Some(match acc {
            None => r,
            Some(a) => a.sup_with(&r),
        });
    }
    acc.ok_or_else(|| LabError::InvalidArgument("empty trajectory".into()))
}

/// Default long-wave profiles on the slow torus: a mean-corrected Gaussian
/// Φ₁ of amplitude `a` and width `sigma`, and Φ₂ = `b`·σ·∂_X of the same bump.
pub fn default_profiles(slow: Grid1D, a: f64, b: f64, sigma: f64) -> (SpectralField, SpectralField) {
    let c = 0.5 * slow.length();
    let xs = slow.xs();
    let bump: Vec<f64> = xs.iter().map(|&x| (-((x - c) / sigma).powi(2)).exp()).collect();
    let mean = bump.iter().sum::<f64>() / bump.len() as f64;
    let p1: Vec<f64> = bump.iter().map(|g| a * (g - mean)).collect();
    let p2: Vec<f64> = xs.iter().zip(&bump).map(|(&x, g)| b * sigma * (-2.0 * (x - c) / (sigma * sigma)) * g).collect();
    let phi1 = transform_forward(slow, &p1).expect("slow grid size").without_nyquist();
    let mut phi2 = transform_forward(slow, &p2).expect("slow grid size").without_nyquist();
    phi2.coeffs[0] = Complex64::new(0.0, 0.0);
    (phi1, phi2)
}
