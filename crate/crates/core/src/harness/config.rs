//! TOML experiment configuration.
//!
//! ```toml
//! [law]
//! preset = "srw2d"        # srw2d | logpow | power | table
//! n_max = 100000
//!
//! [disorder]
//! family = "gaussian"     # gaussian | rademacher | uniform | bernoulli | zero
//! seed = 1
//!
//! [model]
//! beta = 1.0
//!
//! [grid]
//! delta = [-0.2, 0.0, 0.2]   # or u = [...]
//! n = [2500, 5000]
//!
//! [run]
//! replicas = 32
//! threads = 4
//! output = "scan.csv"
//! ```

use std::path::{Path, PathBuf};

use serde::Deserialize;

use crate::annealed::u_c_annealed;
use crate::disorder::DisorderModel;
use crate::error::{PinError, Result};
use crate::excursion::{ExcursionLaw, LawPreset, DEFAULT_SHIFT};

pub const DEFAULT_N_MAX: usize = 100_000;

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    #[serde(default)]
    law: RawLaw,
    #[serde(default)]
    disorder: RawDisorder,
    #[serde(default)]
    model: RawModel,
    #[serde(default)]
    grid: RawGrid,
    #[serde(default)]
    run: RawRun,
    #[serde(default)]
    annealed: RawAnnealed,
    #[serde(default)]
    blocks: RawBlocks,
    #[serde(default)]
    bound: RawBound,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawLaw {
    preset: Option<String>,
    k: Option<f64>,
    alpha: Option<f64>,
    shift: Option<f64>,
    c: Option<f64>,
    masses: Option<Vec<f64>>,
    n_max: Option<usize>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawDisorder {
    family: Option<String>,
    p: Option<f64>,
    seed: Option<u64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawModel {
    beta: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawGrid {
    u: Option<Vec<f64>>,
    delta: Option<Vec<f64>>,
    n: Option<Vec<usize>>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawRun {
    replicas: Option<usize>,
    threads: Option<usize>,
    output: Option<PathBuf>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawAnnealed {
    beta_delta: Option<Vec<f64>>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawBlocks {
    k1: Option<u64>,
    k2: Option<u64>,
    correlation_length: Option<f64>,
    replicas: Option<usize>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawBound {
    correlation_length: Option<Vec<f64>>,
    mode: Option<String>,
    k1_max: Option<u64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BlocksConfig {
    pub k1: u64,
    pub k2: u64,
    /// Target `M`; `Δ` is solved from it.
    pub correlation_length: f64,
    pub replicas: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub enum BoundMode {
    Compliant,
    Desk { k1_max: u64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct BoundConfig {
    pub correlation_lengths: Vec<f64>,
    pub mode: BoundMode,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub law: LawPreset,
    pub n_max: usize,
    pub disorder: DisorderModel,
    pub seed: u64,
    pub beta: f64,
    /// Resolved pinning parameters, ascending as given.
    pub u_grid: Vec<f64>,
    pub n_grid: Vec<usize>,
    pub replicas: usize,
    pub threads: usize,
    pub output: Option<PathBuf>,
    pub annealed_beta_delta: Vec<f64>,
    pub blocks: BlocksConfig,
    pub bound: BoundConfig,
}

impl ExperimentConfig {
    pub fn from_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| {
            PinError::Config(format!("cannot read config file {}: {e}", path.display()))
        })?;
        Self::from_toml(&text).map_err(|e| match e {
            PinError::Config(m) => PinError::Config(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let raw: RawConfig = toml::from_str(text).map_err(|e| PinError::Config(e.to_string()))?;
        resolve(raw)
    }

    pub fn build_law(&self) -> Result<ExcursionLaw> {
        self.law.build(self.n_max)
    }

    /// `u_c^a(β)` for the configured disorder.
    pub fn uc_annealed(&self) -> f64 {
        u_c_annealed(&self.disorder, self.beta)
    }

    pub fn n_top(&self) -> usize {
        self.n_grid.last().copied().unwrap_or(0)
    }
}

fn cfg<T>(what: &str) -> Result<T> {
    Err(PinError::Config(what.to_string()))
}

fn resolve(raw: RawConfig) -> Result<ExperimentConfig> {
    let law = match raw.law.preset.as_deref().unwrap_or("srw2d") {
        "srw2d" => LawPreset::Srw2d,
        "logpow" => LawPreset::LogPow {
            k: raw.law.k.unwrap_or(1.0),
            alpha: raw.law.alpha.unwrap_or(2.0),
            shift: raw.law.shift.unwrap_or(DEFAULT_SHIFT),
        },
        "power" => match raw.law.c {
            Some(c) => LawPreset::Power { c },
            None => return cfg("law.c is required for the power preset"),
        },
        "table" => match raw.law.masses {
            Some(m) => LawPreset::Table(m),
            None => return cfg("law.masses is required for the table preset"),
        },
        other => return cfg(&format!("unknown law.preset '{other}'")),
    };
    let n_max = raw.law.n_max.unwrap_or(DEFAULT_N_MAX);

    let disorder = match raw.disorder.family.as_deref().unwrap_or("gaussian") {
        "gaussian" => DisorderModel::Gaussian,
        "rademacher" => DisorderModel::Rademacher,
        "uniform" => DisorderModel::UniformCentered,
        "bernoulli" => DisorderModel::ShiftedBernoulli {
            p: raw.disorder.p.unwrap_or(0.5),
        },
        "zero" => DisorderModel::Zero,
        other => return cfg(&format!("unknown disorder.family '{other}'")),
    };
    disorder.validate()?;

    let beta = raw.model.beta.unwrap_or(1.0);
    if !(beta > 0.0 && beta.is_finite()) {
        return cfg(&format!("model.beta must be positive, got {beta}"));
    }
    let uc = u_c_annealed(&disorder, beta);
    let u_grid = match (raw.grid.u, raw.grid.delta) {
        (Some(_), Some(_)) => return cfg("grid.u and grid.delta are mutually exclusive"),
        (Some(u), None) => u,
        (None, Some(d)) => d.iter().map(|x| uc + x).collect(),
        (None, None) => vec![uc],
    };
    if u_grid.is_empty() || u_grid.iter().any(|u| !u.is_finite()) {
        return cfg("the u grid must be nonempty and finite");
    }
    let n_grid = raw.grid.n.unwrap_or_else(|| vec![1000]);
    if n_grid.is_empty() || n_grid[0] == 0 || n_grid.windows(2).any(|w| w[1] <= w[0]) {
        return cfg("grid.n must be nonempty, positive and strictly increasing");
    }
    let replicas = raw.run.replicas.unwrap_or(16);
    if replicas == 0 {
        return cfg("run.replicas must be at least 1");
    }
    let threads = raw.run.threads.unwrap_or(1);
    if threads == 0 {
        return cfg("run.threads must be at least 1");
    }

    let annealed_beta_delta = raw
        .annealed
        .beta_delta
        .unwrap_or_else(|| vec![0.003, 0.01, 0.03, 0.1, 0.3, 1.0]);
    if annealed_beta_delta.is_empty() {
        return cfg("annealed.beta_delta must be nonempty");
    }

    let blocks = BlocksConfig {
        k1: raw.blocks.k1.unwrap_or(10_000),
        k2: raw.blocks.k2.unwrap_or(100),
        correlation_length: raw.blocks.correlation_length.unwrap_or(20.0),
        replicas: raw.blocks.replicas.unwrap_or(200),
    };
    if blocks.k1 < 2 || blocks.k1 % 2 != 0 || blocks.k2 < 2 || blocks.k2 % 2 != 0 {
        return cfg("blocks.k1 and blocks.k2 must be even and at least 2");
    }
    if blocks.replicas == 0 || !(blocks.correlation_length > 0.0) {
        return cfg("blocks.replicas and blocks.correlation_length must be positive");
    }

    let mode = match raw.bound.mode.as_deref().unwrap_or("compliant") {
        "compliant" => BoundMode::Compliant,
        "desk" => BoundMode::Desk {
            k1_max: raw.bound.k1_max.unwrap_or(10_000),
        },
        other => return cfg(&format!("unknown bound.mode '{other}'")),
    };
    let bound = BoundConfig {
        correlation_lengths: raw
            .bound
            .correlation_length
            .unwrap_or_else(|| vec![5.0, 10.0, 20.0]),
        mode,
    };
    if bound.correlation_lengths.is_empty() || bound.correlation_lengths.iter().any(|m| !(*m > 0.0))
    {
        return cfg("bound.correlation_length must be a nonempty list of positive values");
    }

    Ok(ExperimentConfig {
        law,
        n_max,
        disorder,
        seed: raw.disorder.seed.unwrap_or(1),
        beta,
        u_grid,
        n_grid,
        replicas,
        threads,
        output: raw.run.output,
        annealed_beta_delta,
        blocks,
        bound,
    })
}
