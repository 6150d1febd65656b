//! Standardized i.i.d. disorder with closed-form log moment generating functions.
//!
//! Replica streams are derived deterministically from `(seed, replica_index)`:
//!
//! ```text
//! stream_seed = splitmix64(splitmix64(seed) ^ replica_index · 0x9E3779B97F4A7C15)
//! ```
//!
//! and fed to `ChaCha8Rng::seed_from_u64`. Values are drawn sequentially, so a
//! sample of length `N` is a prefix of the sample of any length `N' > N`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{PinError, Result};
use crate::logspace::log_add_exp;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DisorderModel {
    Gaussian,
    /// `±1` with equal probability.
    Rademacher,
    /// Uniform on `[-√3, √3]`.
    UniformCentered,
    /// `(B - p)/√(p(1-p))` with `B ~ Bernoulli(p)`.
    ShiftedBernoulli {
        p: f64,
    },
    /// `V ≡ 0`. Not standardized (variance zero); used for degenerate checks
    /// and as the annealed reference.
    Zero,
}

impl DisorderModel {
    pub fn validate(&self) -> Result<()> {
        if let DisorderModel::ShiftedBernoulli { p } = *self {
            if !(p > 0.0 && p < 1.0) {
                return Err(PinError::InvalidSpec(format!(
                    "bernoulli parameter must lie in (0, 1), got {p}"
                )));
            }
        }
        Ok(())
    }

    pub fn name(&self) -> &'static str {
        match self {
            DisorderModel::Gaussian => "gaussian",
            DisorderModel::Rademacher => "rademacher",
            DisorderModel::UniformCentered => "uniform",
            DisorderModel::ShiftedBernoulli { .. } => "bernoulli",
            DisorderModel::Zero => "zero",
        }
    }

    /// `log E[e^{tV}]`.
    pub fn log_mgf(&self, t: f64) -> f64 {
        match *self {
            DisorderModel::Gaussian => 0.5 * t * t,
            DisorderModel::Rademacher => ln_cosh(t),
            DisorderModel::UniformCentered => {
                // sinh(at)/(at), a = √3
                let x = (3f64.sqrt() * t).abs();
                if x < 1e-4 {
                    x * x / 6.0 - x.powi(4) / 180.0
                } else {
                    x + (-(-2.0 * x).exp()).ln_1p() - std::f64::consts::LN_2 - x.ln()
                }
            }
            DisorderModel::ShiftedBernoulli { p } => {
                let sd = (p * (1.0 - p)).sqrt();
                let a = t / sd;
                if a.abs() < 30.0 {
                    (p * a.exp_m1()).ln_1p() - a * p
                } else {
                    log_add_exp((1.0 - p).ln() - a * p, p.ln() + a * (1.0 - p))
                }
            }
            DisorderModel::Zero => 0.0,
        }
    }

    /// Draws `n` values for one replica.
    pub fn sample(&self, seed: u64, replica_index: u64, n: usize) -> DisorderSample {
        let mut rng = ChaCha8Rng::seed_from_u64(stream_seed(seed, replica_index));
        let values = match *self {
            DisorderModel::Gaussian => (0..n)
                .map(|_| rng.sample::<f64, _>(StandardNormal))
                .collect(),
            DisorderModel::Rademacher => (0..n)
                .map(|_| if rng.random::<bool>() { 1.0 } else { -1.0 })
                .collect(),
            DisorderModel::UniformCentered => {
                let a = 3f64.sqrt();
                (0..n)
                    .map(|_| a * (2.0 * rng.random::<f64>() - 1.0))
                    .collect()
            }
            DisorderModel::ShiftedBernoulli { p } => {
                let sd = (p * (1.0 - p)).sqrt();
                (0..n)
                    .map(|_| {
                        let b = if rng.random::<f64>() < p { 1.0 } else { 0.0 };
                        (b - p) / sd
                    })
                    .collect()
            }
            DisorderModel::Zero => vec![0.0; n],
        };
        DisorderSample {
            values,
            seed,
            replica_index,
        }
    }
}

fn ln_cosh(t: f64) -> f64 {
    let a = t.abs();
    a + (-2.0 * a).exp().ln_1p() - std::f64::consts::LN_2
}

/// `log M_V(2β) − 2 log M_V(β)`; nonnegative by Cauchy–Schwarz.
pub fn lambda_v(model: &DisorderModel, beta: f64) -> f64 {
    (model.log_mgf(2.0 * beta) - 2.0 * model.log_mgf(beta)).max(0.0)
}

pub fn log_mgf(model: &DisorderModel, t: f64) -> f64 {
    model.log_mgf(t)
}

pub fn sample(model: &DisorderModel, seed: u64, replica_index: u64, n: usize) -> DisorderSample {
    model.sample(seed, replica_index, n)
}

/// One replica of `V_1..V_N` (stored zero-based).
#[derive(Debug, Clone, PartialEq)]
pub struct DisorderSample {
    pub values: Vec<f64>,
    pub seed: u64,
    pub replica_index: u64,
}

pub fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    x = (x ^ (x >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    x ^ (x >> 31)
}

pub fn stream_seed(seed: u64, replica_index: u64) -> u64 {
    splitmix64(splitmix64(seed) ^ replica_index.wrapping_mul(0x9E37_79B9_7F4A_7C15))
}
