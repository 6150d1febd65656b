//! Renewal dynamic programming for pinning partition functions.
//!
//! With site weights `w_n = β(u + V_n)` (site 0 carries none), the partition
//! function constrained to `x_n = 0` obeys
//!
//! ```text
//! zc(0) = 1,   zc(n) = e^{w_n} Σ_{k<n} zc(k) p_{n-k}
//! ```
//!
//! and the free-endpoint partition function is `Z_N = Σ_k zc(k) P(E > N-k)`.
//! Values are kept as logarithms. Each convolution is accumulated in linear
//! scale relative to a running log reference `R` (the running maximum, bumped
//! whenever a new value exceeds it by more than `RESCALE_GAP`), so the inner
//! loop is a plain dot product. When the scaled sum underflows the step falls
//! back to an exact log-sum-exp over the stored logarithms.
//!
//! `⟨L_N⟩` counts contacts at sites `1..=N`, matching the Hamiltonian.

use crate::disorder::DisorderModel;
use crate::error::{PinError, Result};
use crate::excursion::ExcursionLaw;
use crate::logspace::{log_add_exp, LogSumExp};

const RESCALE_GAP: f64 = 300.0;
const UNDERFLOW_GUARD: f64 = 1e-250;

/// Largest horizon accepted by [`brute_force_log_z`].
pub const BRUTE_FORCE_MAX: usize = 20;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PinningParams {
    pub beta: f64,
    pub u: f64,
}

impl PinningParams {
    pub fn new(beta: f64, u: f64) -> Result<Self> {
        if !(beta > 0.0 && beta.is_finite()) {
            return Err(PinError::InvalidSpec(format!(
                "beta must be > 0, got {beta}"
            )));
        }
        if !u.is_finite() {
            return Err(PinError::InvalidSpec(format!("u must be finite, got {u}")));
        }
        Ok(PinningParams { beta, u })
    }

    /// `Δ = u + β^{-1} log M_V(β)`, always recomputed from `(β, u, model)`.
    pub fn delta(&self, model: &DisorderModel) -> f64 {
        self.u + model.log_mgf(self.beta) / self.beta
    }

    /// `w_0 = 0`, `w_n = β(u + V_n)` for `n = 1..=n`.
    pub fn site_weights(&self, v: &[f64], n: usize) -> Result<Vec<f64>> {
        if v.len() < n {
            return Err(PinError::InvalidSpec(format!(
                "disorder has {} values, need {n}",
                v.len()
            )));
        }
        let mut w = Vec::with_capacity(n + 1);
        w.push(0.0);
        w.extend(v[..n].iter().map(|x| self.beta * (self.u + x)));
        Ok(w)
    }
}

/// Forward DP output: `log zc(0..=N)` and optionally the constrained mean
/// local time `⟨L_n⟩_{zc}` for every prefix.
#[derive(Debug, Clone)]
pub struct ForwardTable {
    ln_zc: Vec<f64>,
    local_time: Option<Vec<f64>>,
    neutral_prefix: usize,
}

impl ForwardTable {
    pub fn ln_zc(&self) -> &[f64] {
        &self.ln_zc
    }

    pub fn horizon(&self) -> usize {
        self.ln_zc.len() - 1
    }

    /// `log Z_n` for any prefix `n ≤ N`; `tails[j] = P(E > j)`.
    pub fn ln_z_free(&self, tails: &[f64], n: usize) -> f64 {
        assert!(n <= self.horizon() && tails.len() > n);
        if n <= self.neutral_prefix {
            // every weight is exactly zero: Z_n = E[1]
            return 0.0;
        }
        let terms = &self.ln_zc[..=n];
        let r = terms.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mut s = 0.0;
        for (k, &lz) in terms.iter().enumerate() {
            s += (lz - r).exp() * tails[n - k];
        }
        r + s.ln()
    }

    /// `⟨L_n⟩` under the free-endpoint Gibbs measure of length `n`.
    pub fn mean_local_time_free(&self, tails: &[f64], n: usize) -> Option<f64> {
        let lt = self.local_time.as_ref()?;
        let terms = &self.ln_zc[..=n];
        let r = terms.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let (mut s, mut ds) = (0.0, 0.0);
        for (k, &lz) in terms.iter().enumerate() {
            let t = (lz - r).exp() * tails[n - k];
            s += t;
            ds += t * lt[k];
        }
        Some(ds / s)
    }
}

enum Source<'a> {
    /// `y(0) = 1`, no other source.
    Origin,
    /// `y(m) += exp(ln_src[m])`.
    Log(&'a [f64]),
}

impl Source<'_> {
    #[inline]
    fn ln_at(&self, m: usize) -> f64 {
        match self {
            Source::Origin => {
                if m == 0 {
                    0.0
                } else {
                    f64::NEG_INFINITY
                }
            }
            Source::Log(s) => s[m],
        }
    }
}

struct KernelOut {
    ln_x: Vec<f64>,
    ln_y: Vec<f64>,
    local_time: Option<Vec<f64>>,
}

/// Solves `y(m) = src(m) + Σ_{i<m} x(i) p_{m-i}`, `x(i) = e^{ω_i} y(i)` for
/// `m = 0..=N` where `N = omega.len() - 1`.
fn renewal_kernel(p: &[f64], omega: &[f64], src: Source<'_>, with_local_time: bool) -> KernelOut {
    let n = omega.len() - 1;
    debug_assert!(p.len() > n);
    // rev[i] = p[n - i]; window for step m is rev[n-m..n] paired with a[0..m].
    let rev: Vec<f64> = (0..n).map(|i| p[n - i]).collect();
    let ln_p: Vec<f64> = p.iter().map(|v| v.ln()).collect();

    let mut ln_x = Vec::with_capacity(n + 1);
    let mut ln_y = Vec::with_capacity(n + 1);
    let mut a: Vec<f64> = Vec::with_capacity(n + 1);
    let mut da: Vec<f64> = Vec::with_capacity(if with_local_time { n + 1 } else { 0 });
    let mut lt: Vec<f64> = Vec::with_capacity(if with_local_time { n + 1 } else { 0 });

    let y0 = src.ln_at(0);
    let x0 = omega[0] + y0;
    let mut r = if x0.is_finite() { x0 } else { 0.0 };
    ln_y.push(y0);
    ln_x.push(x0);
    a.push((x0 - r).exp());
    if with_local_time {
        da.push(0.0);
        lt.push(0.0);
    }

    for m in 1..=n {
        let window = &rev[n - m..n];
        let (dot, ddot) = if with_local_time {
            dot2(&a[..m], &da[..m], window)
        } else {
            (dot(&a[..m], window), 0.0)
        };
        let exact = !(dot > UNDERFLOW_GUARD && dot.is_finite());
        let (ln_conv, ratio) = if !exact {
            (r + dot.ln(), if with_local_time { ddot / dot } else { 0.0 })
        } else {
            // exact fallback over the stored logarithms
            let terms: Vec<f64> = (0..m).map(|k| ln_x[k] + ln_p[m - k]).collect();
            let top = terms.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            if top == f64::NEG_INFINITY {
                (top, 0.0)
            } else {
                let (mut s, mut ds) = (0.0, 0.0);
                for (k, t) in terms.iter().enumerate() {
                    let e = (t - top).exp();
                    s += e;
                    if with_local_time {
                        ds += e * lt[k];
                    }
                }
                (top + s.ln(), ds / s)
            }
        };
        let y = log_add_exp(src.ln_at(m), ln_conv);
        let x = omega[m] + y;
        ln_y.push(y);
        ln_x.push(x);
        if x - r > RESCALE_GAP {
            let shift = (r - x).exp();
            a.iter_mut().for_each(|v| *v *= shift);
            da.iter_mut().for_each(|v| *v *= shift);
            r = x;
        }
        let am = (x - r).exp();
        a.push(am);
        if with_local_time {
            let l = 1.0 + ratio;
            lt.push(l);
            da.push(am * l);
        }
    }
    KernelOut {
        ln_x,
        ln_y,
        local_time: with_local_time.then_some(lt),
    }
}

#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    let mut acc = [0.0f64; 8];
    let ca = a.chunks_exact(8);
    let cb = b.chunks_exact(8);
    let (ra, rb) = (ca.remainder(), cb.remainder());
    for (x, y) in ca.zip(cb) {
        for j in 0..8 {
            acc[j] += x[j] * y[j];
        }
    }
    let mut tail = 0.0;
    for (x, y) in ra.iter().zip(rb) {
        tail += x * y;
    }
    ((acc[0] + acc[4]) + (acc[1] + acc[5])) + ((acc[2] + acc[6]) + (acc[3] + acc[7])) + tail
}

#[inline]
fn dot2(a: &[f64], da: &[f64], b: &[f64]) -> (f64, f64) {
    let mut acc = [0.0f64; 4];
    let mut dacc = [0.0f64; 4];
    let ca = a.chunks_exact(4);
    let cd = da.chunks_exact(4);
    let cb = b.chunks_exact(4);
    let (ra, rd, rb) = (ca.remainder(), cd.remainder(), cb.remainder());
    for ((x, dx), y) in ca.zip(cd).zip(cb) {
        for j in 0..4 {
            acc[j] += x[j] * y[j];
            dacc[j] += dx[j] * y[j];
        }
    }
    let (mut t, mut dt) = (0.0, 0.0);
    for ((x, dx), y) in ra.iter().zip(rd).zip(rb) {
        t += x * y;
        dt += dx * y;
    }
    (
        (acc[0] + acc[2]) + (acc[1] + acc[3]) + t,
        (dacc[0] + dacc[2]) + (dacc[1] + dacc[3]) + dt,
    )
}

/// Forward pass over explicit site weights `w_0..=w_N` (`w_0` is ignored).
pub fn forward_weights(
    law: &ExcursionLaw,
    weights: &[f64],
    with_local_time: bool,
) -> Result<ForwardTable> {
    let n = weights
        .len()
        .checked_sub(1)
        .ok_or_else(|| PinError::InvalidSpec("empty weight vector".into()))?;
    let p = law.mass_vector(n)?;
    let mut omega = weights.to_vec();
    omega[0] = 0.0;
    let out = renewal_kernel(&p, &omega, Source::Origin, with_local_time);
    let neutral_prefix = omega[1..].iter().take_while(|&&w| w == 0.0).count();
    Ok(ForwardTable {
        ln_zc: out.ln_x,
        local_time: out.local_time,
        neutral_prefix,
    })
}

pub fn forward(
    law: &ExcursionLaw,
    params: &PinningParams,
    v: &[f64],
    n: usize,
    with_local_time: bool,
) -> Result<ForwardTable> {
    forward_weights(law, &params.site_weights(v, n)?, with_local_time)
}

/// `log zc(n)` for `n = 0..=N`.
pub fn log_z_constrained(
    law: &ExcursionLaw,
    params: &PinningParams,
    v: &[f64],
    n: usize,
) -> Result<Vec<f64>> {
    Ok(forward(law, params, v, n, false)?.ln_zc)
}

/// `log Z_N` with a free endpoint.
pub fn log_z_free(law: &ExcursionLaw, params: &PinningParams, v: &[f64], n: usize) -> Result<f64> {
    log_z_free_weights(law, &params.site_weights(v, n)?)
}

pub fn log_z_free_weights(law: &ExcursionLaw, weights: &[f64]) -> Result<f64> {
    let n = weights.len() - 1;
    let table = forward_weights(law, weights, false)?;
    Ok(table.ln_z_free(&law.tail_vector(n)?, n))
}

/// `log Z_N` for weights `omega[0..=N]` (`omega[0]` must be 0) with masses and
/// tails supplied by the caller; used for many short windows of one law.
pub(crate) fn ln_z_free_prepared(p: &[f64], tails: &[f64], omega: &[f64]) -> f64 {
    let n = omega.len() - 1;
    let out = renewal_kernel(p, omega, Source::Origin, false);
    let table = ForwardTable {
        neutral_prefix: omega[1..].iter().take_while(|&&w| w == 0.0).count(),
        ln_zc: out.ln_x,
        local_time: None,
    };
    table.ln_z_free(tails, n)
}

/// Log-domain partition values with contact probabilities.
#[derive(Debug, Clone)]
pub struct QuenchedProfile {
    pub log_zc: Vec<f64>,
    pub log_z_free: f64,
    /// `P(x_n = 0)` at index `n - 1` for `n = 1..=N`.
    pub contact_prob: Option<Vec<f64>>,
    /// `⟨L_N⟩ / N`.
    pub contact_fraction: Option<f64>,
}

impl QuenchedProfile {
    /// `⟨L_N⟩ = Σ_n P(x_n = 0)`.
    pub fn mean_local_time(&self) -> Option<f64> {
        self.contact_prob.as_ref().map(|c| c.iter().sum())
    }
}

/// Forward–backward contact probabilities. The backward partition from site
/// `n` (at zero, site-`n` weight excluded) runs the same kernel on the
/// index-reversed weights with `P(E > m)` as source.
pub fn contact_profile_weights(law: &ExcursionLaw, weights: &[f64]) -> Result<QuenchedProfile> {
    let n = weights.len() - 1;
    let fwd = forward_weights(law, weights, false)?;
    let p = law.mass_vector(n)?;
    let tails = law.tail_vector(n)?;
    let ln_tails: Vec<f64> = tails.iter().map(|t| t.ln()).collect();
    let omega: Vec<f64> = (0..=n)
        .map(|i| if i == n { 0.0 } else { weights[n - i] })
        .collect();
    let back = renewal_kernel(&p, &omega, Source::Log(&ln_tails), false);
    let ln_z = fwd.ln_z_free(&tails, n);
    let probs: Vec<f64> = (1..=n)
        .map(|site| {
            (fwd.ln_zc[site] + back.ln_y[n - site] - ln_z)
                .exp()
                .min(1.0)
        })
        .collect();
    let total: f64 = probs.iter().sum();
    Ok(QuenchedProfile {
        log_zc: fwd.ln_zc,
        log_z_free: ln_z,
        contact_fraction: Some(if n > 0 { total / n as f64 } else { 0.0 }),
        contact_prob: Some(probs),
    })
}

pub fn contact_profile(
    law: &ExcursionLaw,
    params: &PinningParams,
    v: &[f64],
    n: usize,
) -> Result<QuenchedProfile> {
    contact_profile_weights(law, &params.site_weights(v, n)?)
}

/// Exhaustive sum over return sets `{0 < t_1 < … < t_k ≤ N}`; independent of the kernel.
pub fn brute_force_log_z(
    law: &ExcursionLaw,
    params: &PinningParams,
    v: &[f64],
    n: usize,
) -> Result<f64> {
    if n > BRUTE_FORCE_MAX {
        return Err(PinError::TooLarge {
            requested: n,
            max: BRUTE_FORCE_MAX,
        });
    }
    if v.len() < n {
        return Err(PinError::InvalidSpec(format!(
            "disorder has {} values, need {n}",
            v.len()
        )));
    }
    law.check_horizon(n)?;
    let mut acc = LogSumExp::default();
    for mask in 0u32..(1u32 << n) {
        let mut ln_w = 0.0;
        let mut last = 0usize;
        for site in 1..=n {
            if mask & (1 << (site - 1)) != 0 {
                ln_w += law.mass(site - last).ln() + params.beta * (params.u + v[site - 1]);
                last = site;
            }
        }
        ln_w += law.tail(n - last).ln();
        acc.push(ln_w);
    }
    Ok(acc.value())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::excursion::{build_law, PhiSpec};

    fn table() -> ExcursionLaw {
        ExcursionLaw::from_masses(vec![0.5, 0.3, 0.2]).unwrap()
    }

    #[test]
    fn single_site() {
        let law = build_law(1.0, PhiSpec::srw2d(), 100).unwrap();
        let params = PinningParams::new(0.8, 0.3).unwrap();
        let v = [0.7];
        let lz = log_z_constrained(&law, &params, &v, 1).unwrap();
        assert_eq!(lz[0], 0.0);
        let w = 0.8 * (0.3 + 0.7);
        assert!((lz[1] - (law.mass(1).ln() + w)).abs() < 1e-14);
        let z1 = law.tail(1) + law.mass(1) * f64::exp(w);
        assert!((log_z_free(&law, &params, &v, 1).unwrap() - z1.ln()).abs() < 1e-14);
        assert!((brute_force_log_z(&law, &params, &v, 1).unwrap() - z1.ln()).abs() < 1e-14);
    }

    #[test]
    fn two_return_patterns() {
        let params = PinningParams::new(1.0, 0.0).unwrap();
        let lz = log_z_constrained(&table(), &params, &[0.0, 0.0], 2).unwrap();
        assert!((lz[2].exp() - 0.55).abs() < 1e-15);
    }

    #[test]
    fn empty_horizon_and_limits() {
        let params = PinningParams::new(1.0, 0.0).unwrap();
        assert_eq!(brute_force_log_z(&table(), &params, &[], 0).unwrap(), 0.0);
        assert!(matches!(
            brute_force_log_z(&table(), &params, &[0.0; 21], 21),
            Err(PinError::TooLarge {
                requested: 21,
                max: 20
            })
        ));
        let law = build_law(1.0, PhiSpec::srw2d(), 10).unwrap();
        assert!(matches!(
            log_z_free(&law, &params, &[0.0; 11], 11),
            Err(PinError::HorizonExceeded { .. })
        ));
        assert!(PinningParams::new(0.0, 1.0).is_err());
    }

    #[test]
    fn neutral_weights_give_zero() {
        let law = build_law(1.0, PhiSpec::srw2d(), 2000).unwrap();
        let w = vec![0.0; 1001];
        assert_eq!(log_z_free_weights(&law, &w).unwrap(), 0.0);
        // the kernel itself reproduces it to rounding
        let table = forward_weights(&law, &w, false).unwrap();
        let tails = law.tail_vector(1000).unwrap();
        let r = table
            .ln_zc()
            .iter()
            .copied()
            .fold(f64::NEG_INFINITY, f64::max);
        let s: f64 = table
            .ln_zc()
            .iter()
            .enumerate()
            .map(|(k, lz)| (lz - r).exp() * tails[1000 - k])
            .sum();
        assert!((r + s.ln()).abs() < 1e-12);
    }

    #[test]
    fn renewal_function_at_zero_weight() {
        // u_0 = 1, u_n = Σ p_k u_{n-k}
        let law = build_law(1.0, PhiSpec::srw2d(), 400).unwrap();
        let n = 300;
        let mut un = vec![1.0f64; n + 1];
        for m in 1..=n {
            un[m] = (1..=m).map(|k| law.mass(k) * un[m - k]).sum();
        }
        let prof = contact_profile_weights(&law, &vec![0.0; n + 1]).unwrap();
        for (i, c) in prof.contact_prob.unwrap().iter().enumerate() {
            assert!(
                (c - un[i + 1]).abs() < 1e-10,
                "n={} {} {}",
                i + 1,
                c,
                un[i + 1]
            );
        }
    }

    #[test]
    fn strongly_pinned_values_stay_finite() {
        // weights ~ 5 per site drive log Z far beyond f64 range
        let law = build_law(1.0, PhiSpec::srw2d(), 5000).unwrap();
        let w: Vec<f64> = (0..=5000).map(|i| if i == 0 { 0.0 } else { 5.0 }).collect();
        let table = forward_weights(&law, &w, true).unwrap();
        let tails = law.tail_vector(5000).unwrap();
        let lz = table.ln_z_free(&tails, 5000);
        assert!(lz.is_finite() && lz > 5000.0 * 4.0, "{lz}");
        let l = table.mean_local_time_free(&tails, 5000).unwrap();
        assert!(l > 4900.0 && l <= 5000.0, "{l}");
    }

    #[test]
    fn repulsive_table_law_uses_exact_fallback() {
        // zc decays by ~e^{-40} per step; scaled sums underflow quickly
        let law = table();
        let n = 60;
        let params = PinningParams::new(2.0, -20.0).unwrap();
        let v = vec![0.0; n];
        let lz = log_z_constrained(&law, &params, &v, n).unwrap();
        // plain log-sum-exp recursion as reference
        let mut reference = vec![0.0f64];
        for m in 1..=n {
            let terms: Vec<f64> = (0..m)
                .map(|k| reference[k] + law.mass(m - k).ln())
                .collect();
            reference.push(-40.0 + crate::logspace::log_sum_exp(&terms));
        }
        for m in 1..=n {
            assert!(lz[m].is_finite(), "m={m}");
            assert!(
                (lz[m] - reference[m]).abs() < 1e-9 * reference[m].abs(),
                "m={m}"
            );
        }
        let small = log_z_free(&law, &params, &v, 12).unwrap();
        let brute = brute_force_log_z(&law, &params, &v, 12).unwrap();
        assert!((small - brute).abs() < 1e-9);
    }

    #[test]
    fn backward_pass_recovers_partition_function() {
        let law = build_law(1.0, PhiSpec::srw2d(), 500).unwrap();
        let v = crate::disorder::DisorderModel::Gaussian
            .sample(5, 0, 500)
            .values;
        let params = PinningParams::new(1.2, -0.4).unwrap();
        let prof = contact_profile(&law, &params, &v, 500).unwrap();
        let direct = log_z_free(&law, &params, &v, 500).unwrap();
        assert!((prof.log_z_free - direct).abs() < 1e-12);
        let probs = prof.contact_prob.as_ref().unwrap();
        assert!(probs.iter().all(|&c| (0.0..=1.0).contains(&c)));
        // last site: P(x_N = 0) = zc(N)/Z_N
        assert!((probs[499] - (prof.log_zc[500] - direct).exp()).abs() < 1e-12);
    }
}
