//! Annealed quantities: `Δ`, `u_c^a`, the free-energy fixed point and the
//! correlation length `M = 1/(β f_a)`.
//!
//! `s = β f_a` is the unique positive root of `Σ_n p_n e^{-sn} = e^{-βΔ}` when
//! `βΔ > 0` (renewal characterization of the homogeneous model). We solve it in
//! the variable `λ = log M = -log s`, writing
//!
//! ```text
//! 1 - Σ p_n e^{-sn} = (1 - e^{-s}) Σ_{k≥0} P(E > k) e^{-sk}
//! ```
//!
//! so no cancellation occurs at small `s`. The series is summed exactly up to
//! the explicit table horizon `n₀` and the remainder is an integral in
//! `w = log(s x)`, which stays well conditioned even when `s` underflows.

use crate::disorder::DisorderModel;
use crate::dp::{self, ForwardTable, PinningParams};
use crate::error::{PinError, Result};
use crate::excursion::{invert_psi, ExcursionLaw, PhiSpec};
use crate::logspace::{ln_one_minus_exp_neg, log_add_exp};
use crate::quad::{self, Tolerance};

// e^{-e^40} is zero in f64.
const W_UPPER: f64 = 40.0;
// Beyond s·k = 750 every e^{-sk} underflows.
const EXP_CUTOFF: f64 = 750.0;
// Moment expansion is used while s·n₀ stays below this.
const MOMENT_RADIUS: f64 = 0.05;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolveMethod {
    TrivialZero,
    ExactSum,
    HybridIntegral,
}

impl SolveMethod {
    pub fn as_str(&self) -> &'static str {
        match self {
            SolveMethod::TrivialZero => "trivial_zero",
            SolveMethod::ExactSum => "exact_sum",
            SolveMethod::HybridIntegral => "hybrid_integral",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AnnealedSolution {
    pub beta_delta: f64,
    /// `β f_a`; underflows to zero once `log_m > ~745`, `log_m` stays exact.
    pub s: f64,
    pub m: f64,
    pub log_m: f64,
    pub method: SolveMethod,
    /// `|Σ p_n e^{-sn} - e^{-βΔ}|` at the reported root.
    pub residual: f64,
}

pub fn delta_of(params: &PinningParams, model: &DisorderModel) -> f64 {
    params.delta(model)
}

/// `u_c^a(β) = -β^{-1} log M_V(β)`.
pub fn u_c_annealed(model: &DisorderModel, beta: f64) -> f64 {
    -model.log_mgf(beta) / beta
}

/// Evaluates `log(1 - Σ p_n e^{-sn})` and `log Σ n p_n e^{-sn}` at `s = e^{-λ}`.
struct Transform<'a> {
    law: &'a ExcursionLaw,
}

impl Transform<'_> {
    /// `log Σ_{k≥0} P(E > k) e^{-sk}` and whether the integral part contributed.
    fn ln_tail_series(&self, lambda: f64) -> Result<(f64, bool)> {
        let s = (-lambda).exp();
        let tails = self.law.tails_table();
        let n0 = tails.len();
        let mut sum = if !self.law.has_finite_support() && s * n0 as f64 <= MOMENT_RADIUS {
            let x = s * n0 as f64;
            let mut term = 1.0;
            let mut acc = 0.0;
            for (j, m) in self.law.tail_moments().iter().enumerate() {
                if j > 0 {
                    term *= -x / j as f64;
                }
                acc += term * m;
            }
            acc
        } else {
            let upto = if s > 0.0 {
                ((EXP_CUTOFF / s).ceil() as usize).min(n0)
            } else {
                n0
            };
            let decay = (-s).exp();
            let mut factor = 1.0;
            let mut acc = 0.0;
            for &t in &tails[..upto] {
                acc += t * factor;
                factor *= decay;
            }
            acc
        };
        if self.law.has_finite_support() {
            return Ok((sum.ln(), false));
        }

        let ln_n0 = (n0 as f64).ln();
        let w_lo = ln_n0 - lambda;
        if w_lo >= W_UPPER {
            return Ok((sum.ln(), false));
        }
        // Euler–Maclaurin end corrections at x = n₀: g/2 - g'/12, g = τ e^{-sx}.
        let tau0 = self.law.tail_at_ln(ln_n0);
        let p0 = self.law.ln_mass_at_ln(ln_n0).exp();
        let damp = (-s * n0 as f64).exp();
        sum += damp * (0.5 * tau0 + (p0 + s * tau0) / 12.0);

        let law = self.law;
        let integral = quad::integrate(
            |w: f64| {
                let e = w.exp();
                if e > EXP_CUTOFF {
                    return 0.0;
                }
                law.tail_at_ln(lambda + w) * (w - e).exp()
            },
            w_lo,
            W_UPPER,
            Tolerance {
                abs: 0.0,
                rel: 1e-13,
                max_intervals: 4000,
            },
        )?;
        if !(integral >= 0.0) {
            return Err(PinError::NonConvergent(format!(
                "tail integral at log M = {lambda} is {integral}"
            )));
        }
        Ok((log_add_exp(sum.ln(), lambda + integral.ln()), true))
    }

    /// `log(1 - Σ p_n e^{-sn})`.
    fn ln_gap(&self, lambda: f64) -> Result<(f64, bool)> {
        let s = (-lambda).exp();
        let ln_prefactor = if s > 0.0 {
            ln_one_minus_exp_neg(s)
        } else {
            -lambda
        };
        let (ln_t, hybrid) = self.ln_tail_series(lambda)?;
        Ok((ln_prefactor + ln_t, hybrid))
    }

    /// `log Σ_n n p_n e^{-sn}`.
    fn ln_first_moment(&self, lambda: f64) -> Result<f64> {
        let s = (-lambda).exp();
        let masses = self.law.masses_table();
        let n0 = masses.len();
        let upto = if s > 0.0 {
            ((EXP_CUTOFF / s).ceil() as usize).min(n0)
        } else {
            n0
        };
        let decay = (-s).exp();
        let mut factor = 1.0;
        let mut sum = 0.0;
        for (n, &p) in masses.iter().enumerate().take(upto).skip(1) {
            factor *= decay;
            sum += n as f64 * p * factor;
        }
        if self.law.has_finite_support() {
            return Ok(sum.ln());
        }
        let ln_n0 = (n0 as f64).ln();
        let w_lo = ln_n0 - lambda;
        if w_lo >= W_UPPER {
            return Ok(sum.ln());
        }
        let c = self.law.c().expect("analytic law");
        let h0 = (ln_n0 + self.law.ln_mass_at_ln(ln_n0) - s * n0 as f64).exp();
        sum += 0.5 * h0;
        // ∫ x p(x) e^{-sx} dx = e^{(2-c)λ} ∫ exp(2(λ+w) + log p(λ+w) - (2-c)λ - e^w) dw
        let shift = (2.0 - c) * lambda;
        let law = self.law;
        let integral = quad::integrate(
            |w: f64| {
                let e = w.exp();
                if e > EXP_CUTOFF {
                    return 0.0;
                }
                (2.0 * (lambda + w) + law.ln_mass_at_ln(lambda + w) - shift - e).exp()
            },
            w_lo,
            W_UPPER,
            Tolerance {
                abs: 0.0,
                rel: 1e-12,
                max_intervals: 4000,
            },
        )?;
        Ok(log_add_exp(sum.ln(), shift + integral.ln()))
    }
}

/// Safeguarded regula falsi (Illinois variant) on a bracket where `f` changes
/// sign from positive to negative.
fn bracketed_root<F>(
    mut f: F,
    mut lo: f64,
    mut hi: f64,
    mut f_lo: f64,
    mut f_hi: f64,
) -> Result<f64>
where
    F: FnMut(f64) -> Result<f64>,
{
    let mut side = 0i8;
    for _ in 0..300 {
        let width = hi - lo;
        if width <= 1e-14 * lo.abs().max(1.0) {
            break;
        }
        let mut x = if f_lo.is_finite() && f_hi.is_finite() && f_lo != f_hi {
            lo + width * f_lo / (f_lo - f_hi)
        } else {
            0.5 * (lo + hi)
        };
        if !(x > lo && x < hi) {
            x = 0.5 * (lo + hi);
        }
        if x <= lo || x >= hi {
            break;
        }
        let fx = f(x)?;
        if fx == 0.0 {
            return Ok(x);
        }
        if fx > 0.0 {
            lo = x;
            f_lo = fx;
            if side == 1 {
                f_hi *= 0.5;
            }
            side = 1;
        } else {
            hi = x;
            f_hi = fx;
            if side == -1 {
                f_lo *= 0.5;
            }
            side = -1;
        }
    }
    Ok(if f_lo.abs() < f_hi.abs() { lo } else { hi })
}

/// Solves `Σ p_n e^{-sn} = e^{-βΔ}` for `s = β f_a`.
pub fn solve_free_energy(law: &ExcursionLaw, beta_delta: f64) -> Result<AnnealedSolution> {
    if beta_delta.is_nan() {
        return Err(PinError::InvalidSpec("beta*delta is NaN".into()));
    }
    if beta_delta <= 0.0 {
        return Ok(AnnealedSolution {
            beta_delta,
            s: 0.0,
            m: f64::INFINITY,
            log_m: f64::INFINITY,
            method: SolveMethod::TrivialZero,
            residual: 0.0,
        });
    }
    let tr = Transform { law };
    let ln_target = ln_one_minus_exp_neg(beta_delta);
    let g = |lambda: f64| -> Result<f64> { Ok(tr.ln_gap(lambda)?.0 - ln_target) };

    // s ≤ βΔ since 1 - Σ p_n e^{-sn} ≥ 1 - e^{-s}.
    let lo = -beta_delta.ln();
    let g_lo = g(lo)?;
    if g_lo <= 0.0 {
        return finish(&tr, beta_delta, lo, ln_target);
    }
    let mut step = 1.0;
    let mut hi = lo + step;
    let mut g_hi = g(hi)?;
    let mut lo_b = lo;
    let mut g_lo_b = g_lo;
    while g_hi > 0.0 {
        lo_b = hi;
        g_lo_b = g_hi;
        step *= 2.0;
        hi = lo + step;
        if hi > 1e9 {
            return Err(PinError::NonConvergent(format!(
                "no sign change up to log M = {hi}"
            )));
        }
        g_hi = g(hi)?;
    }
    let lambda = bracketed_root(g, lo_b, hi, g_lo_b, g_hi)?;
    finish(&tr, beta_delta, lambda, ln_target)
}

fn finish(
    tr: &Transform<'_>,
    beta_delta: f64,
    lambda: f64,
    ln_target: f64,
) -> Result<AnnealedSolution> {
    let (ln_gap, hybrid) = tr.ln_gap(lambda)?;
    let residual = (ln_target.exp() * (ln_gap - ln_target).exp_m1()).abs();
    Ok(AnnealedSolution {
        beta_delta,
        s: (-lambda).exp(),
        m: lambda.exp(),
        log_m: lambda,
        method: if hybrid {
            SolveMethod::HybridIntegral
        } else {
            SolveMethod::ExactSum
        },
        residual,
    })
}

/// `log E^X[e^{βΔ L_N}]` from the quenched kernel with every site weight `βΔ`.
pub fn annealed_log_z_dp(law: &ExcursionLaw, beta_delta: f64, n: usize) -> Result<f64> {
    dp::log_z_free_weights(law, &annealed_weights(beta_delta, n))
}

/// Forward table of the homogeneous model, reusable for every prefix length.
pub fn annealed_forward(law: &ExcursionLaw, beta_delta: f64, n: usize) -> Result<ForwardTable> {
    dp::forward_weights(law, &annealed_weights(beta_delta, n), false)
}

fn annealed_weights(beta_delta: f64, n: usize) -> Vec<f64> {
    let mut w = vec![beta_delta; n + 1];
    w[0] = 0.0;
    w
}

/// `((α-1) βΔ / K)^{-1/(α-1)}` for `φ = K (log n)^{-α}`.
pub fn predict_log_m_asymptotic(phi: &PhiSpec, beta_delta: f64) -> Result<f64> {
    match *phi {
        PhiSpec::LogPower { k, alpha, .. } if alpha > 1.0 => {
            if !(beta_delta > 0.0) {
                return Err(PinError::InvalidSpec(format!(
                    "asymptotics need beta*delta > 0, got {beta_delta}"
                )));
            }
            Ok(((alpha - 1.0) * beta_delta / k).powf(-1.0 / (alpha - 1.0)))
        }
        _ => Err(PinError::InvalidSpec(
            "asymptotic log M needs a log_power phi with alpha > 1".into(),
        )),
    }
}

/// Solves `βΔ = Ψ(log M)` for `log M`.
pub fn predict_log_m_psi(phi: &PhiSpec, beta_delta: f64) -> Result<f64> {
    invert_psi(phi, beta_delta)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AnnealedContact {
    /// `d(β f_a)/d(βΔ) = e^{-βΔ} / Σ_n n p_n e^{-sn}`.
    pub value: f64,
    /// `1 / (M φ(M))` with the normalized `φ`.
    pub asymptotic_proxy: f64,
    pub solution: AnnealedSolution,
}

pub fn contact_fraction_annealed(law: &ExcursionLaw, beta_delta: f64) -> Result<AnnealedContact> {
    if !(beta_delta > 0.0) {
        return Err(PinError::InvalidSpec(format!(
            "contact fraction needs beta*delta > 0, got {beta_delta}"
        )));
    }
    let sol = solve_free_energy(law, beta_delta)?;
    let tr = Transform { law };
    let ln_q = tr.ln_first_moment(sol.log_m)?;
    let value = (-beta_delta - ln_q).exp();
    let asymptotic_proxy = if law.has_finite_support() {
        f64::NAN
    } else {
        (-sol.log_m - law.normalized_phi().ln_at_ln(sol.log_m)).exp()
    };
    Ok(AnnealedContact {
        value,
        asymptotic_proxy,
        solution: sol,
    })
}

/// Inverts `βΔ ↦ log M`; `log M` is strictly decreasing in `βΔ`.
pub fn beta_delta_for_log_m(law: &ExcursionLaw, log_m: f64) -> Result<f64> {
    let f = |ln_bd: f64| -> Result<f64> { Ok(solve_free_energy(law, ln_bd.exp())?.log_m - log_m) };
    let (mut lo, mut hi) = (-1.0, 0.0);
    let mut f_lo = f(lo)?;
    while f_lo <= 0.0 {
        lo -= 2.0;
        if lo < -60.0 {
            return Err(PinError::NonConvergent(format!(
                "log M = {log_m} not reached"
            )));
        }
        f_lo = f(lo)?;
    }
    let mut f_hi = f(hi)?;
    while f_hi >= 0.0 {
        hi += 2.0;
        if hi > 10.0 {
            return Err(PinError::NonConvergent(format!(
                "log M = {log_m} not reached"
            )));
        }
        f_hi = f(hi)?;
    }
    Ok(bracketed_root(f, lo, hi, f_lo, f_hi)?.exp())
}

/// One row of the `log E^X[e^{βΔ L_N}] ≥ N/(2M)` check.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LemmaRow {
    pub n: usize,
    pub log_z: f64,
    pub bound: f64,
    pub applicable: bool,
    pub holds: bool,
}

/// Evaluates the inequality at every `n` in `grid` from a single forward pass;
/// it is asserted only for `N > 2 βΔ M`.
pub fn lemma_grid(law: &ExcursionLaw, beta_delta: f64, grid: &[usize]) -> Result<Vec<LemmaRow>> {
    let sol = solve_free_energy(law, beta_delta)?;
    let n_top = grid.iter().copied().max().unwrap_or(0);
    let table = annealed_forward(law, beta_delta, n_top)?;
    let tails = law.tail_vector(n_top)?;
    Ok(grid
        .iter()
        .map(|&n| {
            let log_z = table.ln_z_free(&tails, n);
            let bound = 0.5 * n as f64 * sol.s;
            let applicable = (n as f64) > 2.0 * beta_delta * sol.m;
            LemmaRow {
                n,
                log_z,
                bound,
                applicable,
                holds: !applicable || log_z >= bound,
            }
        })
        .collect())
}
