//! Coarse-graining: block scales `(K₁, K₂)`, good/bad blocks, `C_φ` and the
//! computable free-energy lower bound.
//!
//! The scale conditions are
//!
//! ```text
//! 32 K₂ < e^{Λ_V K₂}
//! 4 (M ∨ 1) log(1/φ(K₁)) < K₂ < log(K₁/2) / (2 Λ_V)
//! ```
//!
//! and are always evaluated with `log K₁`, since compliant `K₁` is far beyond
//! any machine integer. `φ` is the normalized slowly varying factor of the law,
//! i.e. `p_n = n^{-c} φ(n)` exactly.

use rayon::prelude::*;

use crate::annealed;
use crate::disorder::{lambda_v, DisorderModel};
use crate::dp::{self, PinningParams};
use crate::error::{PinError, Result};
use crate::excursion::{ExcursionLaw, PhiSpec};
use crate::logspace::LogSumExp;

/// `K₁` is materialized only up to `2^62`.
pub const MAX_LOG_K1: f64 = 62.0 * std::f64::consts::LN_2;
/// Extra room added to `log K₁` above `2 Λ_V K₂ + log 2` in compliant mode.
pub const LOG_K1_MARGIN: f64 = 1.0;

const LN_2: f64 = std::f64::consts::LN_2;
const LN_3: f64 = 1.098_612_288_668_109_8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct ScaleFlags {
    pub ineq_2_5: bool,
    pub ineq_2_6_lower: bool,
    pub ineq_2_6_upper: bool,
}

impl ScaleFlags {
    pub fn all(&self) -> bool {
        self.ineq_2_5 && self.ineq_2_6_lower && self.ineq_2_6_upper
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BlockScales {
    pub log_k1: f64,
    /// `None` when `K₁` does not fit (infeasible at desk scale).
    pub k1: Option<u64>,
    pub k2: u64,
    pub flags: ScaleFlags,
    pub m: f64,
    pub lambda: f64,
}

impl BlockScales {
    pub fn is_feasible(&self) -> bool {
        self.k1.is_some()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ScaleMode {
    Compliant,
    Desk { k1_max: u64 },
}

/// Evaluates the three scale inequalities for an explicit (normalized) `φ`.
pub fn check_scales_phi(phi: &PhiSpec, lambda: f64, m: f64, log_k1: f64, k2: u64) -> BlockScales {
    let k2f = k2 as f64;
    let ineq_2_5 = (32.0 * k2f).ln() < lambda * k2f;
    let ineq_2_6_lower = 4.0 * m.max(1.0) * (-phi.ln_at_ln(log_k1)) < k2f;
    let ineq_2_6_upper = if lambda > 0.0 {
        k2f < (log_k1 - LN_2) / (2.0 * lambda)
    } else {
        log_k1 > LN_2
    };
    let k1 = if log_k1 <= MAX_LOG_K1 {
        let v = log_k1.exp().round() as u64;
        Some(v + (v & 1))
    } else {
        None
    };
    BlockScales {
        log_k1,
        k1,
        k2,
        flags: ScaleFlags {
            ineq_2_5,
            ineq_2_6_lower,
            ineq_2_6_upper,
        },
        m,
        lambda,
    }
}

pub fn check_scales(
    law: &ExcursionLaw,
    model: &DisorderModel,
    beta: f64,
    m: f64,
    log_k1: f64,
    k2: u64,
) -> BlockScales {
    check_scales_phi(&law.normalized_phi(), lambda_v(model, beta), m, log_k1, k2)
}

/// Same check for an integer `K₁`.
pub fn check_scales_int(
    law: &ExcursionLaw,
    model: &DisorderModel,
    beta: f64,
    m: f64,
    k1: u64,
    k2: u64,
) -> BlockScales {
    let mut s = check_scales(law, model, beta, m, (k1 as f64).ln(), k2);
    s.k1 = Some(k1);
    s
}

fn even_above(x: f64) -> f64 {
    let e = 2.0 * (x / 2.0).floor() + 2.0;
    e.max(2.0)
}

pub fn choose_scales(
    law: &ExcursionLaw,
    model: &DisorderModel,
    beta: f64,
    m: f64,
    mode: ScaleMode,
) -> Result<BlockScales> {
    if !(m > 0.0) {
        return Err(PinError::InvalidSpec(format!(
            "correlation length must be positive, got {m}"
        )));
    }
    match mode {
        ScaleMode::Desk { k1_max } => {
            let k1 = k1_max - (k1_max & 1);
            if k1 < 2 {
                return Err(PinError::InvalidSpec(format!(
                    "desk K1 must be at least 2, got {k1_max}"
                )));
            }
            let k2 = ((k1 / 100) & !1).max(2);
            Ok(check_scales_int(law, model, beta, m, k1, k2))
        }
        ScaleMode::Compliant => {
            let phi = law.normalized_phi();
            if !phi.is_analytic() {
                return Err(PinError::NoSolution(
                    "compliant scales need an analytic phi".into(),
                ));
            }
            let lambda = lambda_v(model, beta);
            if !(lambda > 0.0) {
                return Err(PinError::NoSolution(format!(
                    "Lambda_V = {lambda}; 32 K2 < exp(Lambda K2) has no solution"
                )));
            }
            let mut k2_min = 2.0f64;
            while (32.0 * k2_min).ln() >= lambda * k2_min {
                k2_min += 2.0;
                if k2_min > 1e12 {
                    return Err(PinError::NoSolution(
                        "K2 for 32 K2 < exp(Lambda K2) exceeds 1e12".into(),
                    ));
                }
            }
            let mut k2 = k2_min;
            for _ in 0..500 {
                let log_k1 = 2.0 * lambda * k2 + LN_2 + LOG_K1_MARGIN;
                let need = 4.0 * m.max(1.0) * (-phi.ln_at_ln(log_k1));
                let next = even_above(need).max(k2_min);
                if next == k2 {
                    return Ok(check_scales_phi(&phi, lambda, m, log_k1, k2 as u64));
                }
                if !(next < 1e15) {
                    break;
                }
                k2 = next;
            }
            Err(PinError::NoSolution(format!(
                "scale fixed point diverged (K2 = {k2})"
            )))
        }
    }
}

/// Verdict for one disorder block.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BlockVerdict {
    pub good: bool,
    /// `log Σ_{b ∈ I^{1/2}} W_b`.
    pub log_w_sum: f64,
    /// `log(|I^{1/2}| E^X[e^{βΔ L_{K₂}}])`; good iff `log_w_sum > log_ref_sum - log 2`.
    pub log_ref_sum: f64,
}

/// Classifies blocks for fixed `(law, β, u, K₁, K₂)`.
pub struct BlockClassifier {
    params: PinningParams,
    k1: usize,
    k2: usize,
    p: Vec<f64>,
    tails: Vec<f64>,
    log_ref: f64,
}

impl BlockClassifier {
    pub fn new(
        law: &ExcursionLaw,
        params: &PinningParams,
        model: &DisorderModel,
        k1: u64,
        k2: u64,
    ) -> Result<Self> {
        if k1 < 2 || k1 % 2 != 0 || k2 < 2 || k2 % 2 != 0 {
            return Err(PinError::InvalidSpec(format!(
                "K1, K2 must be even and >= 2, got {k1}, {k2}"
            )));
        }
        let (k1, k2) = (k1 as usize, k2 as usize);
        let beta_delta = params.beta * params.delta(model);
        Ok(BlockClassifier {
            params: *params,
            k1,
            k2,
            p: law.mass_vector(k2)?,
            tails: law.tail_vector(k2)?,
            log_ref: annealed::annealed_log_z_dp(law, beta_delta, k2)?,
        })
    }

    /// `log E^X[e^{βΔ L_{K₂}}]`, the mean of every `W_b` over the disorder.
    pub fn log_reference(&self) -> f64 {
        self.log_ref
    }

    /// Disorder values needed per block: `K₁/2 + K₂ - 1`.
    pub fn window_len(&self) -> usize {
        self.k1 / 2 + self.k2 - 1
    }

    /// `W_b` is the free-endpoint partition of length `K₂` started at zero at
    /// site `b`, on `V_{b+1..b+K₂}` (zero-based `v[b..b+K₂]`).
    pub fn classify(&self, v: &[f64]) -> Result<BlockVerdict> {
        if v.len() < self.window_len() {
            return Err(PinError::InvalidSpec(format!(
                "block window has {} values, need {}",
                v.len(),
                self.window_len()
            )));
        }
        let half = self.k1 / 2;
        let w: Vec<f64> = v[..self.window_len()]
            .iter()
            .map(|x| self.params.beta * (self.params.u + x))
            .collect();
        let mut omega = vec![0.0; self.k2 + 1];
        let mut acc = LogSumExp::default();
        for b in 0..half {
            omega[1..].copy_from_slice(&w[b..b + self.k2]);
            acc.push(dp::ln_z_free_prepared(&self.p, &self.tails, &omega));
        }
        let log_w_sum = acc.value();
        let log_ref_sum = (half as f64).ln() + self.log_ref;
        Ok(BlockVerdict {
            good: log_w_sum > log_ref_sum - LN_2,
            log_w_sum,
            log_ref_sum,
        })
    }
}

pub fn block_goodness(
    law: &ExcursionLaw,
    params: &PinningParams,
    model: &DisorderModel,
    v_window: &[f64],
    k1: u64,
    k2: u64,
) -> Result<BlockVerdict> {
    BlockClassifier::new(law, params, model, k1, k2)?.classify(v_window)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BlockRow {
    pub replica: u64,
    pub verdict: BlockVerdict,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BlockReport {
    pub replicas: usize,
    pub good_count: usize,
    pub p_good_hat: f64,
    pub stderr: f64,
    pub log_reference: f64,
    pub rows: Vec<BlockRow>,
}

impl BlockReport {
    /// Replica mean of `Σ_b W_b / (|I^{1/2}| E^X[e^{βΔ L_{K₂}}])` and its standard error.
    pub fn normalized_mean(&self) -> (f64, f64) {
        let r: Vec<f64> = self
            .rows
            .iter()
            .map(|b| (b.verdict.log_w_sum - b.verdict.log_ref_sum).exp())
            .collect();
        mean_stderr(&r)
    }
}

pub(crate) fn mean_stderr(x: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let mean = x.iter().sum::<f64>() / n;
    if x.len() < 2 {
        return (mean, 0.0);
    }
    let var = x.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

/// Classifies `replicas` independent blocks; block `r` uses disorder replica `r`.
/// Runs on the current rayon pool; rows are in replica order.
pub fn estimate_p_good(
    law: &ExcursionLaw,
    params: &PinningParams,
    model: &DisorderModel,
    scales: &BlockScales,
    replicas: usize,
    seed: u64,
) -> Result<BlockReport> {
    if replicas == 0 {
        return Err(PinError::InvalidSpec("replicas must be at least 1".into()));
    }
    let k1 = scales.k1.ok_or(PinError::InfeasibleScales {
        log_k1: scales.log_k1,
    })?;
    let classifier = BlockClassifier::new(law, params, model, k1, scales.k2)?;
    let len = classifier.window_len();
    let rows = (0..replicas as u64)
        .into_par_iter()
        .map(|r| {
            let v = model.sample(seed, r, len);
            Ok(BlockRow {
                replica: r,
                verdict: classifier.classify(&v.values)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let good_count = rows.iter().filter(|r| r.verdict.good).count();
    let p = good_count as f64 / replicas as f64;
    Ok(BlockReport {
        replicas,
        good_count,
        p_good_hat: p,
        stderr: (p * (1.0 - p) / replicas as f64).sqrt(),
        log_reference: classifier.log_reference(),
        rows,
    })
}

/// Log-spaced grid for `C_φ = inf{x φ(kx)/φ(k) : x ≥ 1, k ≥ K}`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CPhiGrid {
    pub ln_x_max: f64,
    /// Upper end of the `k` range; raised to `log K + log 1e3` when `K` is larger.
    pub ln_k_max: f64,
    pub points: usize,
}

impl Default for CPhiGrid {
    fn default() -> Self {
        CPhiGrid {
            ln_x_max: 1e6f64.ln(),
            ln_k_max: 1e9f64.ln(),
            points: 400,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CPhi {
    pub ln_value: f64,
    pub x_at: f64,
    pub ln_k_at: f64,
}

impl CPhi {
    pub fn value(&self) -> f64 {
        self.ln_value.exp()
    }

    /// The infimum sits in the refined region next to `x = 1`.
    pub fn attained_near_one(&self) -> bool {
        self.x_at < 1.1
    }
}

/// Grid infimum of `x φ(kx)/φ(k)` over `x ∈ [1, e^{ln_x_max}]`, `log k ∈ [ln_k_min, ln_k_max]`,
/// with extra resolution for `x ∈ [1, 1.1]`.
pub fn c_phi_constant(phi: &PhiSpec, ln_k_min: f64, grid: &CPhiGrid) -> Result<CPhi> {
    if !phi.is_analytic() {
        return Err(PinError::InvalidSpec("C_phi needs an analytic phi".into()));
    }
    let n = grid.points.max(2);
    let ln_k_max = grid.ln_k_max.max(ln_k_min + 1e3f64.ln());
    let mut lx: Vec<f64> = (0..n)
        .map(|i| grid.ln_x_max * i as f64 / (n - 1) as f64)
        .collect();
    let near = 1.1f64.ln();
    lx.extend((1..n).map(|i| near * i as f64 / (n - 1) as f64));
    let mut best = CPhi {
        ln_value: f64::INFINITY,
        x_at: 1.0,
        ln_k_at: ln_k_min,
    };
    for j in 0..n {
        let lk = ln_k_min + (ln_k_max - ln_k_min) * j as f64 / (n - 1) as f64;
        let base = phi.ln_at_ln(lk);
        for &l in &lx {
            let v = l + phi.ln_at_ln(lk + l) - base;
            if v < best.ln_value {
                best = CPhi {
                    ln_value: v,
                    x_at: l.exp(),
                    ln_k_at: lk,
                };
            }
        }
    }
    Ok(best)
}

/// Exact replacement for the excursion constant `C`: the largest `C ≤ 1` with
/// `min p_{b-a} ≥ C φ((d+1)K₁)/((d+1)K₁)` over gaps spanning `d = 1..=64`
/// blocks, where `b - a ∈ [(d - 3/4) K₁, (d + 1/2) K₁]`. Returned as `log C`.
pub fn excursion_constant(law: &ExcursionLaw, log_k1: f64) -> Result<f64> {
    if law.has_finite_support() {
        return Err(PinError::InvalidSpec(
            "the excursion constant needs an analytic law".into(),
        ));
    }
    let phi = law.normalized_phi();
    let mut ln_c = 0.0f64;
    for d in 1..=64u32 {
        let d = d as f64;
        let lo = law.ln_mass_at_ln((d - 0.75).ln() + log_k1);
        let hi = law.ln_mass_at_ln((d + 0.5).ln() + log_k1);
        let span = (d + 1.0).ln() + log_k1;
        ln_c = ln_c.min(lo.min(hi) + span - phi.ln_at_ln(span));
    }
    Ok(ln_c)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum BoundConclusion {
    /// `lim (1/N) log Z_N = β f_q ≥ e^{log_bound}`.
    Positive {
        log_bound: f64,
    },
    NoConclusion,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundReport {
    pub log_k1: f64,
    pub k2: u64,
    pub m: f64,
    pub log_reference: f64,
    pub ln_c_exact: f64,
    pub ln_c_phi: f64,
    pub ln_phi_k1: f64,
    /// `log E^X[e^{βΔ L_{K₂}}] + log(C C_φ φ(K₁)) - 2 log 3`.
    pub bracket: f64,
    /// Same with `K₂/(2M)` in place of the exact annealed value.
    pub bracket_lemma: f64,
    /// `K₂/(4M) + log(C C_φ / 9)`.
    pub bracket_final: f64,
    pub conclusion: BoundConclusion,
}

/// The bound `(1/(2K₁)) · bracket` on `β f_q`, kept in log form.
pub fn fq_lower_bound(
    law: &ExcursionLaw,
    scales: &BlockScales,
    c_phi: &CPhi,
    log_reference: f64,
) -> Result<BoundReport> {
    if !(scales.m.is_finite() && scales.m > 0.0) {
        return Err(PinError::InvalidSpec(format!(
            "the bound needs beta*delta > 0 (M = {})",
            scales.m
        )));
    }
    let ln_c_exact = excursion_constant(law, scales.log_k1)?;
    let ln_phi_k1 = law.normalized_phi().ln_at_ln(scales.log_k1);
    let k2 = scales.k2 as f64;
    let consts = ln_c_exact + c_phi.ln_value;
    let bracket = log_reference + consts + ln_phi_k1 - 2.0 * LN_3;
    let bracket_lemma = k2 / (2.0 * scales.m) + consts + ln_phi_k1 - 2.0 * LN_3;
    let bracket_final = k2 / (4.0 * scales.m) + consts - 2.0 * LN_3;
    let conclusion = if bracket > 0.0 {
        BoundConclusion::Positive {
            log_bound: bracket.ln() - LN_2 - scales.log_k1,
        }
    } else {
        BoundConclusion::NoConclusion
    };
    Ok(BoundReport {
        log_k1: scales.log_k1,
        k2: scales.k2,
        m: scales.m,
        log_reference,
        ln_c_exact,
        ln_c_phi: c_phi.ln_value,
        ln_phi_k1,
        bracket,
        bracket_lemma,
        bracket_final,
        conclusion,
    })
}
