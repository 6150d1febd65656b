//! Excursion-length laws `P(E = n) ∝ n^{-c} φ(n)` with a slowly varying `φ`.
//!
//! A law keeps an explicit table of masses and tails up to an extended horizon
//! (at least [`NORMALIZER_CUT`]) and answers queries beyond it from the analytic
//! form, using an Euler–Maclaurin corrected tail integral. The normalizer is the
//! partial sum up to that horizon plus the corrected integral, so
//! `Σ p_n + P(E > n_max) = 1` holds to rounding.
//!
//! For `φ(n) = K (log(n + s₀))^{-α}` the shift `s₀` keeps `φ(1)` finite; only
//! the large-`n` behaviour is constrained, so any positive shift is admissible.

use std::io::Write;

use crate::error::{PinError, Result};
use crate::quad::{self, Tolerance};

/// Default shift `s₀` in `log(n + s₀)`.
pub const DEFAULT_SHIFT: f64 = std::f64::consts::E;

/// Explicit summation horizon used for the normalizer.
pub const NORMALIZER_CUT: usize = 1_000_000;

const TAIL_MOMENTS: usize = 10;

/// Slowly varying factor of the excursion law.
#[derive(Debug, Clone, PartialEq)]
pub enum PhiSpec {
    Constant {
        k: f64,
    },
    /// `K (log(x + shift))^{-alpha}`.
    LogPower {
        k: f64,
        alpha: f64,
        shift: f64,
    },
    /// Explicit, exactly normalized masses `p_1, p_2, …` (no analytic form).
    Table(Vec<f64>),
}

impl PhiSpec {
    pub fn constant(k: f64) -> Self {
        PhiSpec::Constant { k }
    }

    pub fn log_power(k: f64, alpha: f64, shift: f64) -> Self {
        PhiSpec::LogPower { k, alpha, shift }
    }

    /// `π (log(n + e))^{-2}`, the return-time profile of simple random walk in the plane.
    pub fn srw2d() -> Self {
        PhiSpec::LogPower {
            k: std::f64::consts::PI,
            alpha: 2.0,
            shift: DEFAULT_SHIFT,
        }
    }

    pub fn is_analytic(&self) -> bool {
        !matches!(self, PhiSpec::Table(_))
    }

    /// Checks parameter positivity. A zero shift is accepted here (it is the
    /// idealized asymptotic form) but rejected when building a law.
    pub fn validate(&self) -> Result<()> {
        match *self {
            PhiSpec::Constant { k } => {
                if !(k > 0.0 && k.is_finite()) {
                    return Err(PinError::InvalidSpec(format!(
                        "constant phi needs K > 0, got {k}"
                    )));
                }
            }
            PhiSpec::LogPower { k, alpha, shift } => {
                if !(k > 0.0 && k.is_finite()) {
                    return Err(PinError::InvalidSpec(format!(
                        "log_power needs K > 0, got {k}"
                    )));
                }
                if !(alpha > 0.0 && alpha.is_finite()) {
                    return Err(PinError::InvalidSpec(format!(
                        "log_power needs alpha > 0, got {alpha}"
                    )));
                }
                if !(shift >= 0.0 && shift.is_finite()) {
                    return Err(PinError::InvalidSpec(format!(
                        "log_power needs shift >= 0, got {shift}"
                    )));
                }
            }
            PhiSpec::Table(ref masses) => {
                if masses.is_empty() {
                    return Err(PinError::InvalidSpec("empty mass table".into()));
                }
                if masses.iter().any(|&m| !(m >= 0.0 && m.is_finite())) {
                    return Err(PinError::InvalidSpec(
                        "mass table entries must be finite and >= 0".into(),
                    ));
                }
            }
        }
        Ok(())
    }

    /// `log φ(e^t)`, evaluated without forming `e^t`.
    pub fn ln_at_ln(&self, t: f64) -> f64 {
        match *self {
            PhiSpec::Constant { k } => k.ln(),
            PhiSpec::LogPower { k, alpha, shift } => k.ln() - alpha * ln_shifted_log(t, shift).ln(),
            PhiSpec::Table(_) => f64::NAN,
        }
    }

    /// `log φ(x)`.
    pub fn ln_eval(&self, x: f64) -> f64 {
        match *self {
            PhiSpec::Constant { k } => k.ln(),
            PhiSpec::LogPower { k, alpha, shift } => k.ln() - alpha * (x + shift).ln().ln(),
            PhiSpec::Table(_) => f64::NAN,
        }
    }

    pub fn eval(&self, x: f64) -> f64 {
        self.ln_eval(x).exp()
    }

    /// `φ'(x)/φ(x)` at `x = e^t`.
    pub fn log_derivative_at_ln(&self, t: f64) -> f64 {
        match *self {
            PhiSpec::Constant { .. } => 0.0,
            PhiSpec::LogPower { alpha, shift, .. } => {
                // 1/(x + s) = e^{-t}/(1 + s e^{-t})
                let inv = (-t).exp() / (1.0 + shift * (-t).exp());
                -alpha * inv / ln_shifted_log(t, shift)
            }
            PhiSpec::Table(_) => f64::NAN,
        }
    }

    /// Same family with `K` multiplied by `factor`.
    pub fn scaled(&self, factor: f64) -> PhiSpec {
        match self {
            PhiSpec::Constant { k } => PhiSpec::Constant { k: k * factor },
            PhiSpec::LogPower { k, alpha, shift } => PhiSpec::LogPower {
                k: k * factor,
                alpha: *alpha,
                shift: *shift,
            },
            PhiSpec::Table(m) => PhiSpec::Table(m.clone()),
        }
    }
}

/// `log(e^t + s)` for large or small `t`.
fn ln_shifted_log(t: f64, shift: f64) -> f64 {
    if shift == 0.0 {
        t
    } else if t > 0.0 {
        t + (shift * (-t).exp()).ln_1p()
    } else {
        (t.exp() + shift).ln()
    }
}

/// `Ψ(t) = ∫_t^∞ φ(e^s) ds`.
pub fn psi_integral(phi: &PhiSpec, t: f64) -> Result<f64> {
    phi.validate()?;
    if !(t > 0.0 && t.is_finite()) {
        return Err(PinError::InvalidSpec(format!("psi needs t > 0, got {t}")));
    }
    match *phi {
        PhiSpec::Constant { .. } => Err(PinError::NonConvergent(
            "psi diverges for constant phi".into(),
        )),
        PhiSpec::LogPower { alpha, .. } if alpha <= 1.0 => Err(PinError::NonConvergent(format!(
            "psi diverges for log_power with alpha = {alpha} <= 1"
        ))),
        PhiSpec::Table(_) => Err(PinError::InvalidSpec("psi needs an analytic phi".into())),
        PhiSpec::LogPower { .. } => quad::integrate_from(
            |s| phi.ln_at_ln(s).exp(),
            t,
            Tolerance {
                abs: 0.0,
                rel: 1e-13,
                max_intervals: 4000,
            },
        ),
    }
}

/// Solves `Ψ(t) = value` for `t > 0` by bisection.
pub fn invert_psi(phi: &PhiSpec, value: f64) -> Result<f64> {
    if !(value > 0.0 && value.is_finite()) {
        return Err(PinError::InvalidSpec(format!(
            "psi inversion needs a positive target, got {value}"
        )));
    }
    let mut lo = 1e-6;
    let psi_lo = psi_integral(phi, lo)?;
    if psi_lo <= value {
        return Err(PinError::NonConvergent(format!(
            "target {value} exceeds psi near the origin ({psi_lo})"
        )));
    }
    let mut hi = 1.0;
    while psi_integral(phi, hi)? > value {
        lo = hi;
        hi *= 2.0;
        if hi > 1e300 {
            return Err(PinError::NonConvergent(
                "psi inversion bracket overflowed".into(),
            ));
        }
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if psi_integral(phi, mid)? > value {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= 1e-15 * hi {
            break;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Normalized return-time law.
#[derive(Debug, Clone)]
pub struct ExcursionLaw {
    c: Option<f64>,
    phi: PhiSpec,
    n_max: usize,
    normalizer: f64,
    // index 0 unused; 1..=extended()
    masses: Vec<f64>,
    // 0..=extended()
    tails: Vec<f64>,
    // Σ_{k < n₀} (k/n₀)^j tail(k), n₀ = extended() + 1
    tail_moments: Vec<f64>,
}

/// Builds the law `p_n = n^{-c} φ(n) / Z_p`.
pub fn build_law(c: f64, phi: PhiSpec, n_max: usize) -> Result<ExcursionLaw> {
    ExcursionLaw::new(c, phi, n_max)
}

impl ExcursionLaw {
    pub fn new(c: f64, phi: PhiSpec, n_max: usize) -> Result<Self> {
        if !(c >= 1.0 && c.is_finite()) {
            return Err(PinError::InvalidSpec(format!(
                "loop exponent must satisfy c >= 1, got {c}"
            )));
        }
        if n_max < 2 {
            return Err(PinError::InvalidSpec(format!(
                "n_max must be >= 2, got {n_max}"
            )));
        }
        phi.validate()?;
        match phi {
            PhiSpec::Table(_) => {
                return Err(PinError::InvalidSpec(
                    "table laws are built with ExcursionLaw::from_masses".into(),
                ))
            }
            PhiSpec::LogPower { shift, .. } if shift <= 0.0 => {
                return Err(PinError::InvalidSpec(
                    "law construction needs shift > 0 so that phi(1) is finite".into(),
                ))
            }
            _ => {}
        }
        if c == 1.0 {
            match phi {
                PhiSpec::Constant { .. } => {
                    return Err(PinError::NonSummable(
                        "c = 1 with constant phi is the harmonic series".into(),
                    ))
                }
                PhiSpec::LogPower { alpha, .. } if alpha <= 1.0 => {
                    return Err(PinError::NonSummable(format!(
                        "c = 1 needs alpha > 1, got {alpha}"
                    )))
                }
                _ => {}
            }
        }

        let extended = n_max.max(NORMALIZER_CUT);
        let raw = |n: usize| -> f64 {
            let x = n as f64;
            (-c * x.ln() + phi.ln_eval(x)).exp()
        };
        let mut f = vec![0.0; extended + 1];
        for (n, slot) in f.iter_mut().enumerate().skip(1) {
            *slot = raw(n);
        }

        let mut law = ExcursionLaw {
            c: Some(c),
            phi,
            n_max,
            normalizer: 1.0,
            masses: Vec::new(),
            tails: Vec::new(),
            tail_moments: Vec::new(),
        };
        let beyond = law.raw_tail_beyond((extended as f64).ln())?;

        // Suffix sums U_n = Σ_{k>n} f_k, summed from the small end.
        let mut suffix = vec![0.0; extended + 1];
        suffix[extended] = beyond;
        for n in (0..extended).rev() {
            suffix[n] = suffix[n + 1] + f[n + 1];
        }
        let z = suffix[0];
        law.normalizer = z;
        law.masses = f.iter().map(|v| v / z).collect();
        law.tails = suffix.iter().map(|v| v / z).collect();
        law.tails[0] = 1.0;
        law.tail_moments = moments(&law.tails);
        Ok(law)
    }

    /// Law with explicit masses `p_1..p_L`; they must sum to one within 1e-12.
    pub fn from_masses(masses: Vec<f64>) -> Result<Self> {
        let spec = PhiSpec::Table(masses.clone());
        spec.validate()?;
        let total: f64 = masses.iter().rev().sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(PinError::InvalidSpec(format!(
                "mass table must be normalized, sums to {total:.17}"
            )));
        }
        let len = masses.len();
        let mut suffix = vec![0.0; len + 1];
        for n in (0..len).rev() {
            suffix[n] = suffix[n + 1] + masses[n];
        }
        let z = suffix[0];
        let mut m = Vec::with_capacity(len + 1);
        m.push(0.0);
        m.extend(masses.iter().map(|v| v / z));
        let mut tails: Vec<f64> = suffix.iter().map(|v| v / z).collect();
        tails[0] = 1.0;
        Ok(ExcursionLaw {
            c: None,
            phi: spec,
            n_max: len,
            normalizer: z,
            masses: m,
            tails,
            tail_moments: Vec::new(),
        })
    }

    /// Loop exponent, `None` for table laws.
    pub fn c(&self) -> Option<f64> {
        self.c
    }

    /// The configured `φ` (before normalization).
    pub fn phi(&self) -> &PhiSpec {
        &self.phi
    }

    /// `φ` of the normalized law, i.e. the function with `p_n = n^{-c} φ(n)` exactly.
    pub fn normalized_phi(&self) -> PhiSpec {
        self.phi.scaled(1.0 / self.normalizer)
    }

    pub fn n_max(&self) -> usize {
        self.n_max
    }

    pub fn normalizer(&self) -> f64 {
        self.normalizer
    }

    pub fn has_finite_support(&self) -> bool {
        self.c.is_none()
    }

    /// Masses `p_1..p_{n_max}`.
    pub fn masses(&self) -> &[f64] {
        &self.masses[1..=self.n_max]
    }

    /// Last index with an explicitly tabulated mass and tail.
    pub fn extended(&self) -> usize {
        self.masses.len() - 1
    }

    pub fn mass(&self, n: usize) -> f64 {
        assert!(n >= 1, "excursion lengths start at 1");
        if n < self.masses.len() {
            return self.masses[n];
        }
        if self.has_finite_support() {
            return 0.0;
        }
        self.ln_mass_at_ln((n as f64).ln()).exp()
    }

    /// `P(E > n)`.
    pub fn tail(&self, n: usize) -> f64 {
        if n < self.tails.len() {
            return self.tails[n];
        }
        if self.has_finite_support() {
            return 0.0;
        }
        self.tail_at_ln((n as f64).ln())
    }

    /// `log p_x` at `x = e^t` from the analytic form (any `t`, no overflow).
    pub fn ln_mass_at_ln(&self, t: f64) -> f64 {
        match self.c {
            Some(c) => -c * t + self.phi.ln_at_ln(t) - self.normalizer.ln(),
            None => {
                let x = t.exp();
                if x >= 1.0 && x.fract() == 0.0 && (x as usize) < self.masses.len() {
                    self.masses[x as usize].ln()
                } else {
                    f64::NEG_INFINITY
                }
            }
        }
    }

    /// Continuous extension of `P(E > x)` at `x = e^t`, for `x` beyond the table.
    pub fn tail_at_ln(&self, t: f64) -> f64 {
        match self.raw_tail_beyond(t) {
            Ok(v) => v / self.normalizer,
            Err(_) => f64::NAN,
        }
    }

    /// `Σ_{k > x} k^{-c} φ(k)` at `x = e^t` via Euler–Maclaurin:
    /// `∫_x^∞ f − f(x)/2 − f'(x)/12`.
    fn raw_tail_beyond(&self, t: f64) -> Result<f64> {
        let c = self.c.expect("analytic law");
        let phi = &self.phi;
        let integral = quad::integrate_from(
            |r| ((1.0 - c) * r + phi.ln_at_ln(r)).exp(),
            t,
            Tolerance {
                abs: 0.0,
                rel: 1e-14,
                max_intervals: 4000,
            },
        )?;
        let f = (-c * t + phi.ln_at_ln(t)).exp();
        let dlog = -c * (-t).exp() + phi.log_derivative_at_ln(t);
        Ok(integral - 0.5 * f - f * dlog / 12.0)
    }

    /// `Σ_{k<n₀} (k/n₀)^j P(E > k)` for `j = 0..`, `n₀ = extended() + 1`.
    pub(crate) fn tail_moments(&self) -> &[f64] {
        &self.tail_moments
    }

    pub(crate) fn tails_table(&self) -> &[f64] {
        &self.tails
    }

    pub(crate) fn masses_table(&self) -> &[f64] {
        &self.masses
    }

    /// Linear masses `p_0..p_n` with `p_0 = 0`, for kernels.
    pub fn mass_vector(&self, n: usize) -> Result<Vec<f64>> {
        self.check_horizon(n)?;
        Ok((0..=n)
            .map(|j| if j == 0 { 0.0 } else { self.mass(j) })
            .collect())
    }

    /// Linear tails `P(E > 0)..P(E > n)`.
    pub fn tail_vector(&self, n: usize) -> Result<Vec<f64>> {
        self.check_horizon(n)?;
        Ok((0..=n).map(|j| self.tail(j)).collect())
    }

    /// Errors when a DP over `n` steps needs masses the law does not tabulate.
    pub fn check_horizon(&self, n: usize) -> Result<()> {
        if !self.has_finite_support() && n > self.n_max {
            return Err(PinError::HorizonExceeded {
                needed: n,
                available: self.n_max,
            });
        }
        Ok(())
    }

    /// Writes `n p_n tail_n` lines for `n = 1..=n_max` with 17 significant digits.
    pub fn dump<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        for n in 1..=self.n_max {
            writeln!(out, "{} {:.16e} {:.16e}", n, self.mass(n), self.tail(n))?;
        }
        Ok(())
    }
}

fn moments(tails: &[f64]) -> Vec<f64> {
    let n0 = tails.len() as f64;
    let mut m = vec![0.0; TAIL_MOMENTS + 1];
    for (k, &t) in tails.iter().enumerate().rev() {
        let x = k as f64 / n0;
        let mut w = t;
        for slot in m.iter_mut() {
            *slot += w;
            w *= x;
        }
    }
    m
}

/// Named law families addressable from configuration.
#[derive(Debug, Clone, PartialEq)]
pub enum LawPreset {
    /// `c = 1`, `φ = π (log(n + e))^{-2}`.
    Srw2d,
    /// `c = 1`, `φ = K (log(n + s₀))^{-α}`.
    LogPow { k: f64, alpha: f64, shift: f64 },
    /// `c > 1`, constant `φ`.
    Power { c: f64 },
    /// Explicit masses.
    Table(Vec<f64>),
}

impl LawPreset {
    pub fn build(&self, n_max: usize) -> Result<ExcursionLaw> {
        match self {
            LawPreset::Srw2d => build_law(1.0, PhiSpec::srw2d(), n_max),
            LawPreset::LogPow { k, alpha, shift } => {
                build_law(1.0, PhiSpec::log_power(*k, *alpha, *shift), n_max)
            }
            LawPreset::Power { c } => {
                if *c <= 1.0 {
                    return Err(PinError::NonSummable(format!(
                        "power preset needs c > 1, got {c}"
                    )));
                }
                build_law(*c, PhiSpec::constant(1.0), n_max)
            }
            LawPreset::Table(m) => ExcursionLaw::from_masses(m.clone()),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            LawPreset::Srw2d => "srw2d",
            LawPreset::LogPow { .. } => "logpow",
            LawPreset::Power { .. } => "power",
            LawPreset::Table(_) => "table",
        }
    }
}
