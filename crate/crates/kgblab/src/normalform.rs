//! Iterated near-identity transformations of the diagonal error system.
//!
//! Time-frozen error equations after j − 1 transformations:
//!
//! ```text
//! ∂_t R_n = iΩ_n R_n + i d_n(k) Σ_{n'} K^{(j)}_{nn'} ⋆ R_{n'}
//! ```
//!
//! with branches n ∈ (+1, −1, +2, −2), Ω_n the branch frequency and
//! d_{±1} = ±ω₁, d_{±2} = ±ω₂⁻¹. Blocks with |n| = |n'| are resonant
//! (`f_res`), the others non-resonant (`f_non`). At stage 1 every block is
//! the multiplication kernel of Ψ = ψ_u + ψ_v.
//!
//! Stage j removes the non-resonant blocks with
//!
//! ```text
//! R' = (I + G)R,   G_{nn'}(k, ·) = i d_n(k) K_{nn'}(k, ·) / (iΩ_n(k) − iΩ_{n'}(k))
//! ```
//!
//! (frequencies at the same k; the error ω(m) − ω(k) is the O(ε) commutator
//! reported by [`commutator_xnorm`]). With (I + G)⁻¹ = I + H from a Neumann
//! series and the rescaled transformation G̃_{nn'} = G_{nn'}/(i d_n), the new
//! couplings are
//!
//! ```text
//! K^{(j+1)} = X + X∘H,   X = K_res + G̃∘(i d K)
//! ```
//!
//! Split into blocks this is the four-term update of `f_res` (G̃∘f_non, f_res∘H,
//! G̃∘f_non∘H, G̃∘f_res∘H) and the four-term construction of `f_non`; the
//! intermediate weight i d(l) carries the ω₂⁻¹(l) factors, and the second
//! index of H runs over the column of the outgoing branch.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::dispersion::{omega, omega1, omega2, Branch};
use crate::error::{LabError, Result};
use crate::kgb::DiagonalState;
use crate::spectral::{Kernel2, SpectralField};

const I: Complex64 = Complex64 { re: 0.0, im: 1.0 };

pub type Block = [[Option<Kernel2>; 4]; 4];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct NormalFormConfig {
    /// Working kernel support in units of Δl.
    pub half_width: usize,
    pub s_weight: f64,
    /// Smallness gate on the stage-1 kernel and on the transformation norm.
    pub q_gate: f64,
    pub j_max: usize,
    pub tol: f64,
    pub neumann_tail: f64,
}

impl Default for NormalFormConfig {
    fn default() -> Self {
        Self { half_width: 32, s_weight: 1.0, q_gate: 0.25, j_max: 12, tol: 1e-8, neumann_tail: 1e-12 }
    }
}

#[inline]
fn d_factor(b: Branch, k: f64) -> f64 {
    match b.family() {
        1 => b.sign() * omega1(k),
        _ => b.sign() / omega2(k),
    }
}

#[inline]
fn resonant(a: usize, b: usize) -> bool {
    Branch::ALL[a].family() == Branch::ALL[b].family()
}

fn empty_block() -> Block {
    std::array::from_fn(|_| std::array::from_fn(|_| None))
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct StageRecord {
    pub j: usize,
    pub f_res_xnorm: f64,
    pub f_non_xnorm: f64,
    pub g_xnorm: f64,
    /// Block row-sum bound of the transformation; the Neumann gate.
    pub g_operator_bound: f64,
    pub h_xnorm: f64,
    /// xnorm(f_res^{(j+1)} − f_res^{(j)}); zero on the final stage.
    pub f_res_increment: f64,
    pub neumann_terms: usize,
    pub neumann_tail_bound: f64,
    /// Largest X-norm mass discarded by support truncation in this stage.
    pub truncation: f64,
    /// Spread among blocks that share a kernel (±n rows, ±n' columns).
    pub sign_structure_defect: f64,
    /// Commutator norm for branch +1 (sum over ±2 columns).
    pub commutator_xnorm: f64,
}

#[derive(Debug, Clone)]
pub struct NormalFormStage {
    pub j: usize,
    /// Transformation kernels G^{(j)} (operator form), off-family blocks only.
    pub g: Block,
    /// Inverse kernels H^{(j)}: (I + G)⁻¹ = I + H.
    pub h: Block,
    pub record: StageRecord,
}

/// Coupling kernel K_{ab} of a dense coupling block (f-form, prefactor
/// i d_a(k) stripped).
pub fn coupling(block: &Block, a: Branch, b: Branch) -> &Kernel2 {
    block[a.index()][b.index()].as_ref().expect("coupling blocks are dense")
}

#[derive(Debug, Clone)]
pub struct LimitKernels {
    pub f_u: Kernel2,
    pub f_v: Kernel2,
    pub stages_used: usize,
    pub residual_decay: f64,
}

impl LimitKernels {
    pub fn max_xnorm(&self) -> f64 {
        self.f_u.xnorm().max(self.f_v.xnorm())
    }
}

#[derive(Debug, Clone)]
pub struct NormalFormRun {
    /// Stages that carry a transformation (all but the last computed stage).
    pub stages: Vec<NormalFormStage>,
    pub final_couplings: Block,
    pub records: Vec<StageRecord>,
    pub limit: LimitKernels,
    /// Stage-1 X-norm of Ψ's multiplication kernel.
    pub q_measured: f64,
}

impl NormalFormRun {
    /// Successive ratios xnorm(f_non^{(j+1)})/xnorm(f_non^{(j)}).
    pub fn f_non_ratios(&self) -> Vec<f64> {
        self.records.windows(2).map(|w| w[1].f_non_xnorm / w[0].f_non_xnorm).collect()
    }

    pub fn f_res_increment_ratios(&self) -> Vec<f64> {
        let inc: Vec<f64> = self.records.iter().map(|r| r.f_res_increment).filter(|x| *x > 0.0).collect();
        inc.windows(2).map(|w| w[1] / w[0]).collect()
    }

    /// Geometric fit ρ of the f_non sequence (log-linear least squares).
    pub fn fitted_ratio(&self) -> f64 {
        let ys: Vec<(f64, f64)> =
            self.records.iter().filter(|r| r.f_non_xnorm > 0.0).map(|r| (r.j as f64, r.f_non_xnorm.ln())).collect();
        if ys.len() < 2 {
            return 0.0;
        }
        let n = ys.len() as f64;
        let mx = ys.iter().map(|p| p.0).sum::<f64>() / n;
        let my = ys.iter().map(|p| p.1).sum::<f64>() / n;
        let sxy: f64 = ys.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
        let sxx: f64 = ys.iter().map(|p| (p.0 - mx).powi(2)).sum();
        (sxy / sxx).exp()
    }
}

fn compose_tracked(a: &Kernel2, b: &Kernel2, half_width: usize, dropped: &mut f64) -> Kernel2 {
    let full = a.compose_truncated(b, a.half_width() + b.half_width());
    let (out, lost) = full.with_half_width(half_width);
    *dropped = dropped.max(lost);
    out
}

/// Block product C_{ik} = Σ_j A_{ij} ∘ B_{jk}, truncated to `half_width`.
fn block_compose(a: &Block, b: &Block, half_width: usize, dropped: &mut f64) -> Block {
    let mut out = empty_block();
    for i in 0..4 {
        for k in 0..4 {
            let mut acc: Option<Kernel2> = None;
            for j in 0..4 {
                if let (Some(x), Some(y)) = (&a[i][j], &b[j][k]) {
                    let c = compose_tracked(x, y, half_width, dropped);
                    acc = Some(match acc {
                        None => c,
                        Some(s) => s.add(&c),
                    });
                }
            }
            out[i][k] = acc;
        }
    }
    out
}

fn block_add(a: &Block, b: &Block) -> Block {
    let mut out = empty_block();
    for i in 0..4 {
        for k in 0..4 {
            out[i][k] = match (&a[i][k], &b[i][k]) {
                (Some(x), Some(y)) => Some(x.add(y)),
                (Some(x), None) => Some(x.clone()),
                (None, Some(y)) => Some(y.clone()),
                (None, None) => None,
            };
        }
    }
    out
}

fn block_map(a: &Block, f: impl Fn(usize, usize, &Kernel2) -> Kernel2) -> Block {
    let mut out = empty_block();
    for i in 0..4 {
        for k in 0..4 {
            out[i][k] = a[i][k].as_ref().map(|x| f(i, k, x));
        }
    }
    out
}

fn block_max_xnorm(a: &Block, pick: impl Fn(usize, usize) -> bool) -> f64 {
    let mut m: f64 = 0.0;
    for i in 0..4 {
        for k in 0..4 {
            if pick(i, k) {
                if let Some(x) = &a[i][k] {
                    m = m.max(x.xnorm());
                }
            }
        }
    }
    m
}

/// Operator bound max_i Σ_k xnorm(A_{ik}).
pub fn block_operator_bound(a: &Block) -> f64 {
    (0..4).map(|i| a[i].iter().flatten().map(|x| x.xnorm()).sum::<f64>()).fold(0.0, f64::max)
}

fn sign_structure_defect(c: &Block) -> f64 {
    let mut d: f64 = 0.0;
    for i in 0..4 {
        for k in 0..4 {
            let base = c[i - i % 2][k - k % 2].as_ref();
            if let (Some(x), Some(b)) = (c[i][k].as_ref(), base) {
                d = d.max(x.sub(b).max_abs());
            }
        }
    }
    d
}

/// Stage-1 couplings: every block equals the multiplication kernel of Ψ.
pub fn init_stage(psi_hat: &SpectralField, eps: f64, cfg: &NormalFormConfig) -> Result<(Block, f64)> {
    let base = Kernel2::multiplier(psi_hat, cfg.half_width, eps, cfg.s_weight);
    let q = base.xnorm();
    if q > cfg.q_gate {
        return Err(LabError::Regime {
            what: "stage-1 kernel X-norm above the smallness gate".into(),
            measured: q,
            gate: cfg.q_gate,
        });
    }
    let mut out = empty_block();
    for row in out.iter_mut() {
        for cell in row.iter_mut() {
            *cell = Some(base.clone());
        }
    }
    Ok((out, q))
}

/// Transformation kernels from the non-resonant couplings (operator form).
pub fn g_from_fnon(couplings: &Block) -> Block {
    let mut g = empty_block();
    for a in 0..4 {
        for b in 0..4 {
            if resonant(a, b) {
                continue;
            }
            let (na, nb) = (Branch::ALL[a], Branch::ALL[b]);
            if let Some(k) = &couplings[a][b] {
                g[a][b] =
                    Some(k.scale_rows(|kk| Complex64::new(d_factor(na, kk) / (omega(na, kk) - omega(nb, kk)), 0.0)));
            }
        }
    }
    g
}

/// G̃_{nn'} = G_{nn'}/(i d_n): the f-form transformation used in the recursion.
fn g_tilde(couplings: &Block) -> Block {
    let mut g = empty_block();
    for a in 0..4 {
        for b in 0..4 {
            if resonant(a, b) {
                continue;
            }
            let (na, nb) = (Branch::ALL[a], Branch::ALL[b]);
            if let Some(k) = &couplings[a][b] {
                g[a][b] = Some(k.scale_rows(|kk| 1.0 / (I * (omega(na, kk) - omega(nb, kk)))));
            }
        }
    }
    g
}

pub struct NeumannResult {
    pub h: Block,
    pub terms: usize,
    pub tail_bound: f64,
    pub truncation: f64,
}

/// (I + G)⁻¹ = I + H with H = Σ_{m≥1} (−G)^m, summed until the geometric
/// tail bound q^{m+1}/(1 − q) drops below `tail`.
pub fn neumann_invert(g: &Block, half_width: usize, q_gate: f64, tail: f64) -> Result<NeumannResult> {
    let q = block_operator_bound(g);
    if q >= q_gate.min(1.0) {
        return Err(LabError::Regime {
            what: "transformation norm above the Neumann gate".into(),
            measured: q,
            gate: q_gate.min(1.0),
        });
    }
    let minus_g = block_map(g, |_, _, x| x.scale(Complex64::new(-1.0, 0.0)));
    let mut dropped: f64 = 0.0;
    let mut term = block_map(&minus_g, |_, _, x| x.with_half_width(half_width).0);
    let mut h = term.clone();
    let mut m = 1;
    let mut bound = q.powi(2) / (1.0 - q);
    while bound >= tail {
        if m > 400 {
            return Err(LabError::Regime {
                what: "Neumann series did not reach its tail bound".into(),
                measured: bound,
                gate: tail,
            });
        }
        term = block_compose(&minus_g, &term, half_width, &mut dropped);
        h = block_add(&h, &term);
        m += 1;
        bound = q.powi(m as i32 + 1) / (1.0 - q);
    }
    if q == 0.0 {
        bound = 0.0;
    }
    Ok(NeumannResult { h, terms: m, tail_bound: bound, truncation: dropped })
}

/// X-norm of the branch-+1 commutator kernels i(Ω_{n'}(m) − Ω_{n'}(k))·G_{+1,n'}(k, k−m),
/// summed over n' = ±2.
pub fn commutator_xnorm(g: &Block) -> f64 {
    let row = Branch::Plus1.index();
    [Branch::Plus2, Branch::Minus2]
        .iter()
        .filter_map(|&nb| {
            g[row][nb.index()].as_ref().map(|x| x.scale_entries(|k, m| I * (omega(nb, m) - omega(nb, k))).xnorm())
        })
        .sum()
}

fn advance(couplings: &Block, h: &Block, half_width: usize, dropped: &mut f64) -> Block {
    // i d(l)·K: operator form of the couplings.
    let op = block_map(couplings, |a, _, x| {
        let na = Branch::ALL[a];
        x.scale_rows(|k| I * d_factor(na, k))
    });
    let gt = g_tilde(couplings);
    let mut res = couplings.clone();
    for (a, row) in res.iter_mut().enumerate() {
        for (b, cell) in row.iter_mut().enumerate() {
            if !resonant(a, b) {
                *cell = None;
            }
        }
    }
    let x = block_add(&res, &block_compose(&gt, &op, half_width, dropped));
    block_add(&x, &block_compose(&x, h, half_width, dropped))
}

/// One full stage: transformation, inverse, next couplings.
pub fn advance_stage(j: usize, couplings: &Block, cfg: &NormalFormConfig) -> Result<(NormalFormStage, Block)> {
    let g = g_from_fnon(couplings);
    let nm = neumann_invert(&g, cfg.half_width, cfg.q_gate, cfg.neumann_tail)?;
    let mut dropped = nm.truncation;
    let next = advance(couplings, &nm.h, cfg.half_width, &mut dropped);
    let record = StageRecord {
        j,
        f_res_xnorm: block_max_xnorm(couplings, resonant),
        f_non_xnorm: block_max_xnorm(couplings, |a, b| !resonant(a, b)),
        g_xnorm: block_max_xnorm(&g, |_, _| true),
        g_operator_bound: block_operator_bound(&g),
        h_xnorm: block_max_xnorm(&nm.h, |_, _| true),
        f_res_increment: res_increment(couplings, &next),
        neumann_terms: nm.terms,
        neumann_tail_bound: nm.tail_bound,
        truncation: dropped,
        sign_structure_defect: sign_structure_defect(couplings),
        commutator_xnorm: commutator_xnorm(&g),
    };
    Ok((NormalFormStage { j, g, h: nm.h, record }, next))
}

fn res_increment(old: &Block, new: &Block) -> f64 {
    let mut m: f64 = 0.0;
    for a in 0..4 {
        for b in 0..4 {
            if resonant(a, b) {
                if let (Some(x), Some(y)) = (&old[a][b], &new[a][b]) {
                    m = m.max(y.sub(x).xnorm());
                }
            }
        }
    }
    m
}

fn final_record(j: usize, c: &Block) -> StageRecord {
    StageRecord {
        j,
        f_res_xnorm: block_max_xnorm(c, resonant),
        f_non_xnorm: block_max_xnorm(c, |a, b| !resonant(a, b)),
        sign_structure_defect: sign_structure_defect(c),
        ..Default::default()
    }
}

/// Iterate until xnorm(f_non) < tol or j = j_max.
pub fn iterate_to_limit(psi_hat: &SpectralField, eps: f64, cfg: &NormalFormConfig) -> Result<NormalFormRun> {
    let (mut couplings, q) = init_stage(psi_hat, eps, cfg)?;
    let mut stages = Vec::new();
    let mut records = Vec::new();
    let mut rising = 0;
    let mut j = 1;
    loop {
        let f_non = block_max_xnorm(&couplings, |a, b| !resonant(a, b));
        if f_non < cfg.tol || j >= cfg.j_max {
            records.push(final_record(j, &couplings));
            break;
        }
        let (stage, next) = advance_stage(j, &couplings, cfg)?;
        let next_non = block_max_xnorm(&next, |a, b| !resonant(a, b));
        records.push(stage.record.clone());
        stages.push(stage);
        if next_non >= f_non && f_non > 0.0 {
            rising += 1;
            if rising >= 3 {
                let ratios = records.windows(2).map(|w| w[1].f_non_xnorm / w[0].f_non_xnorm).collect();
                return Err(LabError::Divergence { stages: j, ratios });
            }
        } else {
            rising = 0;
        }
        couplings = next;
        j += 1;
    }
    let two = Complex64::new(2.0, 0.0);
    let pick = |b: Branch| couplings[b.index()][b.index()].as_ref().expect("dense").scale(two);
    let limit = LimitKernels {
        f_u: pick(Branch::Plus1),
        f_v: pick(Branch::Plus2),
        stages_used: j,
        residual_decay: records.last().map(|r| r.f_non_xnorm).unwrap_or(0.0),
    };
    Ok(NormalFormRun { stages, final_couplings: couplings, records, limit, q_measured: q })
}

/// Limit kernels of the ablated pipeline: no transformations, stage-1 couplings.
pub fn untransformed_limit(psi_hat: &SpectralField, eps: f64, cfg: &NormalFormConfig) -> Result<NormalFormRun> {
    let (couplings, q) = init_stage(psi_hat, eps, cfg)?;
    let base = couplings[0][0].clone().expect("dense");
    let two = Complex64::new(2.0, 0.0);
    let rec = final_record(1, &couplings);
    Ok(NormalFormRun {
        stages: Vec::new(),
        limit: LimitKernels {
            f_u: base.scale(two),
            f_v: base.scale(two),
            stages_used: 1,
            residual_decay: rec.f_non_xnorm,
        },
        final_couplings: couplings,
        records: vec![rec],
        q_measured: q,
    })
}

fn block_apply(block: &Block, d: &DiagonalState) -> DiagonalState {
    let one = Complex64::new(1.0, 0.0);
    DiagonalState {
        r: std::array::from_fn(|a| {
            let mut out = d.r[a].clone();
            for b in 0..4 {
                if let Some(x) = &block[a][b] {
                    out = out.axpy(one, &x.apply_unchecked(&d.r[b]));
                }
            }
            out
        }),
    }
}

/// R ↦ (I + G^{(J−1)})⋯(I + G^{(1)}) R.
pub fn apply_composite(d: &DiagonalState, stages: &[NormalFormStage]) -> DiagonalState {
    stages.iter().fold(d.clone(), |acc, st| block_apply(&st.g, &acc))
}

/// R ↦ (I + H^{(1)})⋯(I + H^{(J−1)}) R.
pub fn apply_composite_inverse(d: &DiagonalState, stages: &[NormalFormStage]) -> DiagonalState {
    stages.iter().rev().fold(d.clone(), |acc, st| block_apply(&st.h, &acc))
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SymmetryReport {
    pub conjugate_defect: f64,
    pub conjugate_defect_relative: f64,
    /// Relative conjugate defect over the dealiased band |k| ≤ ⅔k_max. Rows
    /// near Nyquist compose through wrapped intermediate wavenumbers.
    pub conjugate_defect_band_relative: f64,
    pub shift_defect: f64,
    /// f(−k, −l) = conj f(k, l); holds for every kernel the pipeline builds.
    pub reality_defect: f64,
}

/// Conjugate symmetry f(k, l) = conj f(k, −l) and first-argument shift
/// sensitivity of the limit kernels (worst over f_u, f_v).
pub fn check_kernel_symmetries(lk: &LimitKernels) -> SymmetryReport {
    let conj = lk.f_u.conjugate_symmetry_defect().max(lk.f_v.conjugate_symmetry_defect());
    let band = lk.f_u.grid.n() as i64 / 3;
    let conj_band = lk.f_u.conjugate_symmetry_defect_within(band).max(lk.f_v.conjugate_symmetry_defect_within(band));
    let scale = lk.f_u.max_abs().max(lk.f_v.max_abs());
    let rel = |d: f64| if scale > 0.0 { d / scale } else { 0.0 };
    SymmetryReport {
        conjugate_defect: conj,
        conjugate_defect_relative: rel(conj),
        conjugate_defect_band_relative: rel(conj_band),
        shift_defect: lk.f_u.shift_defect().max(lk.f_v.shift_defect()),
        reality_defect: lk.f_u.reality_defect().max(lk.f_v.reality_defect()),
    }
}
