//! The full KGB system as a first-order system in Fourier space,
//!
//! ```text
//! ∂_t û  = iω₁ Ŵ_u          ∂_t Ŵ_u = iω₁ (û + F̂)
//! ∂_t v̂  = iω₂ Ŵ_v          ∂_t Ŵ_v = iω₂ v̂ + iω₂⁻¹ F̂
//! ```
//!
//! with F = (u + v)² = u² + 2uv + v² (dealiased), integrated by an
//! integrating-factor (Lawson) RK4 in the diagonal variables
//! R_{±1} = (û ± Ŵ_u)/√2, R_{±2} = (v̂ ± Ŵ_v)/√2, whose linear parts rotate
//! by exact phases e^{±iωt}.

use std::f64::consts::FRAC_1_SQRT_2;

use num_complex::Complex64;

use crate::dispersion::{omega, omega1, omega2, Branch};
use crate::error::{LabError, Result};
use crate::spectral::{interpolate_long_wave, transform_forward, transform_inverse_real, Grid1D, SpectralField};
use crate::whitham::{h1, h_of_u};

const I: Complex64 = Complex64 { re: 0.0, im: 1.0 };
const ZERO: Complex64 = Complex64 { re: 0.0, im: 0.0 };

#[derive(Debug, Clone, PartialEq)]
pub struct KgbState {
    pub u: SpectralField,
    pub wu: SpectralField,
    pub v: SpectralField,
    pub wv: SpectralField,
}

/// Diagonal variables in the order (+1, −1, +2, −2).
#[derive(Debug, Clone, PartialEq)]
pub struct DiagonalState {
    pub r: [SpectralField; 4],
}

impl DiagonalState {
    pub fn grid(&self) -> Grid1D {
        self.r[0].grid
    }

    pub fn zeros(grid: Grid1D) -> Self {
        let z = SpectralField::zeros(grid);
        Self { r: [z.clone(), z.clone(), z.clone(), z] }
    }

    pub fn branch(&self, b: Branch) -> &SpectralField {
        &self.r[b.index()]
    }

    pub fn sub(&self, o: &Self) -> Self {
        let m = Complex64::new(-1.0, 0.0);
        Self { r: std::array::from_fn(|i| self.r[i].axpy(m, &o.r[i])) }
    }

    /// Sum over branches of H⁰_s norms.
    pub fn hs_weighted(&self, s: u32) -> f64 {
        self.r.iter().map(|f| f.hs_weighted(s).powi(2)).sum::<f64>().sqrt()
    }
}

impl KgbState {
    pub fn zeros(grid: Grid1D) -> Self {
        let z = SpectralField::zeros(grid);
        Self { u: z.clone(), wu: z.clone(), v: z.clone(), wv: z }
    }

    pub fn grid(&self) -> Grid1D {
        self.u.grid
    }

    /// From (û, ∂_t û, v̂, ∂_t v̂): Ŵ_u = (iω₁)⁻¹∂_t û with the k = 0 mode set
    /// to zero, Ŵ_v = (iω₂)⁻¹∂_t v̂.
    pub fn from_time_derivatives(u: SpectralField, ut: &SpectralField, v: SpectralField, vt: &SpectralField) -> Self {
        let wu = ut.apply_symbol(|k| if k == 0.0 { ZERO } else { 1.0 / (I * omega1(k)) });
        let wv = vt.apply_symbol(|k| 1.0 / (I * omega2(k)));
        Self { u: u.without_nyquist(), wu, v: v.without_nyquist(), wv }
    }

    pub fn hermitian_defect(&self) -> f64 {
        // Ŵ_v is the transform of an imaginary field (iω₂ is even in k).
        let wv_real = self.wv.scale_c(I);
        [&self.u, &self.wu, &self.v, &wv_real].iter().map(|f| f.hermitian_defect()).fold(0.0, f64::max)
    }

    pub fn u_physical(&self) -> Vec<f64> {
        transform_inverse_real(&self.u)
    }

    pub fn v_physical(&self) -> Vec<f64> {
        transform_inverse_real(&self.v)
    }

    pub fn sub(&self, o: &Self) -> Self {
        let m = Complex64::new(-1.0, 0.0);
        Self {
            u: self.u.axpy(m, &o.u),
            wu: self.wu.axpy(m, &o.wu),
            v: self.v.axpy(m, &o.v),
            wv: self.wv.axpy(m, &o.wv),
        }
    }

    pub fn scale(&self, a: f64) -> Self {
        Self { u: self.u.scale(a), wu: self.wu.scale(a), v: self.v.scale(a), wv: self.wv.scale(a) }
    }
}

/// F̂ for F = (u + v)², dealiased.
pub fn nonlinearity(u: &SpectralField, v: &SpectralField) -> SpectralField {
    let up = transform_inverse_real(u);
    let vp = transform_inverse_real(v);
    let f: Vec<f64> = up.iter().zip(&vp).map(|(a, b)| (a + b) * (a + b)).collect();
    transform_forward(u.grid, &f).expect("grid size").dealiased()
}

pub fn kgb_rhs(state: &KgbState) -> KgbState {
    kgb_rhs_with(state, true)
}

pub fn kgb_rhs_with(state: &KgbState, nonlinear: bool) -> KgbState {
    let f = if nonlinear { nonlinearity(&state.u, &state.v) } else { SpectralField::zeros(state.grid()) };
    let i_w1 = |k: f64| I * omega1(k);
    let i_w2 = |k: f64| I * omega2(k);
    KgbState {
        u: state.wu.apply_symbol(i_w1),
        wu: state.u.axpy(Complex64::new(1.0, 0.0), &f).apply_symbol(i_w1),
        v: state.wv.apply_symbol(i_w2),
        wv: state.v.apply_symbol(i_w2).axpy(Complex64::new(1.0, 0.0), &f.apply_symbol(|k| I / omega2(k))),
    }
}

/// Linear part of the error system about Ψ = ψ_u + ψ_v: the KGB linear
/// operator plus the coupling F̂ ↦ transform of 2Ψ(R_u + R_v) (dealiased).
pub fn error_linear_rhs(r: &KgbState, psi: &SpectralField) -> KgbState {
    let pp = transform_inverse_real(psi);
    let ru = transform_inverse_real(&r.u);
    let rv = transform_inverse_real(&r.v);
    let f: Vec<f64> = pp.iter().zip(ru.iter().zip(&rv)).map(|(p, (a, b))| 2.0 * p * (a + b)).collect();
    let f_hat = transform_forward(r.grid(), &f).expect("grid size").dealiased();
    let lin = kgb_rhs_with(r, false);
    KgbState {
        wu: lin.wu.axpy(Complex64::new(1.0, 0.0), &f_hat.apply_symbol(|k| I * omega1(k))),
        wv: lin.wv.axpy(Complex64::new(1.0, 0.0), &f_hat.apply_symbol(|k| I / omega2(k))),
        ..lin
    }
}

pub fn diagonalize(s: &KgbState) -> DiagonalState {
    let p = Complex64::new(FRAC_1_SQRT_2, 0.0);
    let sum = |a: &SpectralField, b: &SpectralField| a.axpy(Complex64::new(1.0, 0.0), b).scale_c(p);
    let dif = |a: &SpectralField, b: &SpectralField| a.axpy(Complex64::new(-1.0, 0.0), b).scale_c(p);
    DiagonalState { r: [sum(&s.u, &s.wu), dif(&s.u, &s.wu), sum(&s.v, &s.wv), dif(&s.v, &s.wv)] }
}

pub fn undiagonalize(d: &DiagonalState) -> KgbState {
    let p = Complex64::new(FRAC_1_SQRT_2, 0.0);
    let sum = |a: &SpectralField, b: &SpectralField| a.axpy(Complex64::new(1.0, 0.0), b).scale_c(p);
    let dif = |a: &SpectralField, b: &SpectralField| a.axpy(Complex64::new(-1.0, 0.0), b).scale_c(p);
    KgbState {
        u: sum(&d.r[0], &d.r[1]),
        wu: dif(&d.r[0], &d.r[1]),
        v: sum(&d.r[2], &d.r[3]),
        wv: dif(&d.r[2], &d.r[3]),
    }
}

#[derive(Debug, Clone)]
pub struct KgbTrajectory {
    pub times: Vec<f64>,
    pub states: Vec<KgbState>,
    pub dt: f64,
}

/// Largest dt allowed by `dt · max_k ω₂(k) ≤ 0.5`.
pub fn max_stable_dt(grid: Grid1D) -> f64 {
    let kmax = (0..grid.n()).map(|j| grid.symbol_wavenumber(j).abs()).fold(0.0, f64::max);
    0.5 / omega2(kmax)
}

struct Lawson {
    half: [Vec<Complex64>; 4],
    full: [Vec<Complex64>; 4],
    coupling: [Vec<Complex64>; 4],
}

impl Lawson {
    fn new(grid: Grid1D, h: f64) -> Self {
        let phase = |b: Branch, tau: f64| -> Vec<Complex64> {
            (0..grid.n()).map(|j| (I * omega(b, grid.symbol_wavenumber(j)) * tau).exp()).collect()
        };
        let coupling = |b: Branch| -> Vec<Complex64> {
            (0..grid.n())
                .map(|j| {
                    if j == grid.nyquist_slot() {
                        return ZERO;
                    }
                    let k = grid.wavenumber(j);
                    let w = if b.family() == 1 { omega1(k) } else { 1.0 / omega2(k) };
                    I * (b.sign() * w * FRAC_1_SQRT_2)
                })
                .collect()
        };
        Self {
            half: Branch::ALL.map(|b| phase(b, 0.5 * h)),
            full: Branch::ALL.map(|b| phase(b, h)),
            coupling: Branch::ALL.map(coupling),
        }
    }

    fn nonlinear(&self, d: &DiagonalState, on: bool) -> DiagonalState {
        if !on {
            return DiagonalState::zeros(d.grid());
        }
        let one = Complex64::new(1.0, 0.0);
        let u = d.r[0].axpy(one, &d.r[1]).scale(FRAC_1_SQRT_2);
        let v = d.r[2].axpy(one, &d.r[3]).scale(FRAC_1_SQRT_2);
        let f = nonlinearity(&u, &v);
        DiagonalState {
            r: std::array::from_fn(|b| {
                let mut out = f.clone();
                for (c, s) in out.coeffs.iter_mut().zip(&self.coupling[b]) {
                    *c *= s;
                }
                out
            }),
        }
    }

    fn rotate(factors: &[Vec<Complex64>; 4], d: &DiagonalState) -> DiagonalState {
        DiagonalState {
            r: std::array::from_fn(|b| {
                let mut out = d.r[b].clone();
                for (c, e) in out.coeffs.iter_mut().zip(&factors[b]) {
                    *c *= e;
                }
                out
            }),
        }
    }

    fn step(&self, y: &DiagonalState, h: f64, on: bool) -> DiagonalState {
        let lin = |a: &DiagonalState, c: f64, b: &DiagonalState| DiagonalState {
            r: std::array::from_fn(|i| a.r[i].axpy(Complex64::new(c, 0.0), &b.r[i])),
        };
        let k1 = self.nonlinear(y, on);
        let k2 = self.nonlinear(&Self::rotate(&self.half, &lin(y, 0.5 * h, &k1)), on);
        let ey = Self::rotate(&self.half, y);
        let k3 = self.nonlinear(&lin(&ey, 0.5 * h, &k2), on);
        let e2y = Self::rotate(&self.full, y);
        let k4 = self.nonlinear(&lin(&e2y, h, &Self::rotate(&self.half, &k3)), on);
        let mid = Self::rotate(&self.half, &lin(&k2, 1.0, &k3));
        let acc = lin(&lin(&Self::rotate(&self.full, &k1), 2.0, &mid), 1.0, &k4);
        lin(&e2y, h / 6.0, &acc)
    }
}

/// Integrate to `t_end`, storing `snapshots + 1` equally spaced states. The
/// step is the largest value ≤ `dt` that lands on every snapshot.
pub fn kgb_solve(init: &KgbState, t_end: f64, dt: f64, snapshots: usize) -> Result<KgbTrajectory> {
    kgb_solve_with(init, t_end, dt, snapshots, true)
}

pub fn kgb_solve_with(
    init: &KgbState,
    t_end: f64,
    dt: f64,
    snapshots: usize,
    nonlinear: bool,
) -> Result<KgbTrajectory> {
    let grid = init.grid();
    if !(dt > 0.0 && t_end > 0.0) || snapshots == 0 {
        return Err(LabError::Config(format!(
            "need t_end > 0, dt > 0, snapshots ≥ 1 (got {t_end}, {dt}, {snapshots})"
        )));
    }
    let dt_max = max_stable_dt(grid);
    if dt > dt_max * (1.0 + 1e-12) {
        return Err(LabError::Config(format!(
            "dt = {dt} violates dt·max ω₂ ≤ 0.5 (largest admissible dt {dt_max:.4e})"
        )));
    }
    let interval = t_end / snapshots as f64;
    let sub = (interval / dt).ceil().max(1.0) as usize;
    let h = interval / sub as f64;
    let scheme = Lawson::new(grid, h);

    let mut y = diagonalize(init);
    let mut times = vec![0.0];
    let mut states = vec![init.clone()];
    for s in 0..snapshots {
        for _ in 0..sub {
            y = scheme.step(&y, h, nonlinear);
        }
        times.push((s + 1) as f64 * interval);
        states.push(undiagonalize(&y));
    }
    Ok(KgbTrajectory { times, states, dt: h })
}

/// Long-wave initial data
/// `(u, ∂_t u, v, ∂_t v)(x, 0) = (Φ₁, εΦ₂, H(Φ₁), εH′(Φ₁)Φ₂)(εx)` on `fast`.
pub fn theorem_initial_data(phi1: &SpectralField, phi2: &SpectralField, eps: f64, fast: Grid1D) -> Result<KgbState> {
    phi1.check_same_grid(phi2)?;
    let scale = phi2.max_abs().max(f64::MIN_POSITIVE);
    if phi2.coeffs[0].norm() > 1e-12 * scale && phi2.coeffs[0].norm() > 1e-300 {
        return Err(LabError::InvalidArgument(format!(
            "Φ₂ must have zero mean (mean coefficient {:.3e})",
            phi2.coeffs[0].norm()
        )));
    }
    let u0 = interpolate_long_wave(&phi1.without_nyquist(), fast)?;
    let p2 = interpolate_long_wave(&phi2.without_nyquist(), fast)?;
    let up = transform_inverse_real(&u0);
    let p2p = transform_inverse_real(&p2);
    let v0 = h_of_u(&up)?;
    let vt: Vec<f64> = up.iter().zip(&p2p).map(|(&u, &p)| eps * h1(u) * p).collect();
    let v0_hat = transform_forward(fast, &v0)?;
    let vt_hat = transform_forward(fast, &vt)?;
    let ut_hat = p2.scale(eps);
    Ok(KgbState::from_time_derivatives(u0, &ut_hat, v0_hat, &vt_hat))
}
