//! Replica-averaged quenched free energies and critical-point brackets.
//!
//! Every replica draws one disorder sequence of the largest horizon and runs
//! one forward pass per `u`; each `N` in the grid is read off the prefix. The
//! same replicas are therefore shared by the whole `(u, N)` grid, which makes
//! `fq_hat` exactly monotone in `u` replica by replica.

use rayon::prelude::*;

use crate::annealed::{self, solve_free_energy};
use crate::coarse::mean_stderr;
use crate::disorder::DisorderModel;
use crate::dp::{self, PinningParams};
use crate::error::{PinError, Result};
use crate::excursion::ExcursionLaw;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ResultRow {
    pub beta: f64,
    pub u: f64,
    pub delta: f64,
    pub n: usize,
    pub replicas: usize,
    /// Mean of `(1/βN) log Z_N`.
    pub fq_hat: f64,
    pub stderr: f64,
    /// Annealed free energy `f_a = s/β`.
    pub fa: f64,
    pub log_m: f64,
    /// Mean of `⟨L_N⟩/N`.
    pub contact_fraction_hat: f64,
    pub wallclock: Option<f64>,
}

impl ResultRow {
    pub fn pinned(&self) -> bool {
        self.fq_hat > 3.0 * self.stderr
    }
}

/// Grid description for [`run_grid`].
#[derive(Debug, Clone, PartialEq)]
pub struct GridSpec<'a> {
    pub model: DisorderModel,
    pub beta: f64,
    pub u_grid: &'a [f64],
    pub n_grid: &'a [usize],
    pub replicas: usize,
    pub seed: u64,
}

/// `(log Z_N, ⟨L_N⟩)` for every `(u, N)` of one replica, `u`-major.
fn replica_values(
    law: &ExcursionLaw,
    spec: &GridSpec<'_>,
    tails: &[f64],
    replica: u64,
) -> Result<Vec<(f64, f64)>> {
    let n_top = *spec.n_grid.last().expect("nonempty grid");
    let v = spec.model.sample(spec.seed, replica, n_top).values;
    let mut out = Vec::with_capacity(spec.u_grid.len() * spec.n_grid.len());
    for &u in spec.u_grid {
        let params = PinningParams::new(spec.beta, u)?;
        let table = dp::forward(law, &params, &v, n_top, true)?;
        for &n in spec.n_grid {
            let lt = table
                .mean_local_time_free(tails, n)
                .expect("local time requested");
            out.push((table.ln_z_free(tails, n), lt));
        }
    }
    Ok(out)
}

/// One [`ResultRow`] per `(u, N)`, `u`-major in grid order. Runs on the current
/// rayon pool; the output does not depend on the number of threads.
pub fn run_grid(law: &ExcursionLaw, spec: &GridSpec<'_>) -> Result<Vec<ResultRow>> {
    if spec.replicas == 0 {
        return Err(PinError::InvalidSpec("replicas must be at least 1".into()));
    }
    if spec.u_grid.is_empty() || spec.n_grid.is_empty() {
        return Err(PinError::InvalidSpec("empty u or N grid".into()));
    }
    let n_top = *spec.n_grid.last().unwrap();
    law.check_horizon(n_top)?;
    let tails = law.tail_vector(n_top)?;
    let per_replica = (0..spec.replicas as u64)
        .into_par_iter()
        .map(|r| replica_values(law, spec, &tails, r))
        .collect::<Result<Vec<_>>>()?;

    let mut rows = Vec::with_capacity(per_replica[0].len());
    for (ui, &u) in spec.u_grid.iter().enumerate() {
        let delta = PinningParams::new(spec.beta, u)?.delta(&spec.model);
        let sol = solve_free_energy(law, spec.beta * delta)?;
        for (ni, &n) in spec.n_grid.iter().enumerate() {
            let idx = ui * spec.n_grid.len() + ni;
            let scale = spec.beta * n as f64;
            let f: Vec<f64> = per_replica.iter().map(|v| v[idx].0 / scale).collect();
            let cf: Vec<f64> = per_replica.iter().map(|v| v[idx].1 / n as f64).collect();
            let (fq_hat, stderr) = mean_stderr(&f);
            if !fq_hat.is_finite() {
                return Err(PinError::NonConvergent(format!(
                    "non-finite free energy at u = {u}, N = {n}"
                )));
            }
            rows.push(ResultRow {
                beta: spec.beta,
                u,
                delta,
                n,
                replicas: spec.replicas,
                fq_hat,
                stderr,
                fa: sol.s / spec.beta,
                log_m: sol.log_m,
                contact_fraction_hat: mean_stderr(&cf).0,
                wallclock: None,
            });
        }
    }
    Ok(rows)
}

/// Single `(β, u, N)` estimate.
pub fn estimate_fq(
    law: &ExcursionLaw,
    model: DisorderModel,
    beta: f64,
    u: f64,
    n: usize,
    replicas: usize,
    seed: u64,
) -> Result<ResultRow> {
    let spec = GridSpec {
        model,
        beta,
        u_grid: &[u],
        n_grid: &[n],
        replicas,
        seed,
    };
    Ok(run_grid(law, &spec)?[0])
}

/// `(1/βN) log E^X[e^{βΔ L_N}]`, the finite-`N` annealed counterpart of `fq_hat`.
pub fn annealed_finite_n(law: &ExcursionLaw, beta: f64, delta: f64, n: usize) -> Result<f64> {
    Ok(annealed::annealed_log_z_dp(law, beta * delta, n)? / (beta * n as f64))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NBracket {
    pub n: usize,
    /// Largest `u` with `fq_hat < 3σ`.
    pub lower: Option<f64>,
    /// Smallest `u` with `fq_hat > 3σ`.
    pub upper: Option<f64>,
}

impl NBracket {
    pub fn width(&self) -> Option<f64> {
        Some(self.upper? - self.lower?)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScanSummary {
    pub uc_a: f64,
    pub brackets: Vec<NBracket>,
}

impl ScanSummary {
    /// Bracket at the largest horizon.
    pub fn final_bracket(&self) -> Result<(f64, f64)> {
        let b = self
            .brackets
            .last()
            .ok_or_else(|| PinError::InconclusiveBracket("empty scan".into()))?;
        match (b.lower, b.upper) {
            (Some(l), Some(u)) => Ok((l, u)),
            (None, _) => Err(PinError::InconclusiveBracket(format!(
                "every u is pinned at N = {}",
                b.n
            ))),
            (_, None) => Err(PinError::InconclusiveBracket(format!(
                "no u is pinned at N = {}",
                b.n
            ))),
        }
    }
}

/// Pinned/unpinned bracket for each `N`.
pub fn scan_brackets(rows: &[ResultRow], uc_a: f64) -> ScanSummary {
    let mut ns: Vec<usize> = rows.iter().map(|r| r.n).collect();
    ns.sort_unstable();
    ns.dedup();
    let brackets = ns
        .into_iter()
        .map(|n| {
            let at: Vec<&ResultRow> = rows.iter().filter(|r| r.n == n).collect();
            let lower = at
                .iter()
                .filter(|r| r.fq_hat < 3.0 * r.stderr)
                .map(|r| r.u)
                .fold(None, |m: Option<f64>, u| Some(m.map_or(u, |m| m.max(u))));
            let upper = at
                .iter()
                .filter(|r| r.pinned())
                .map(|r| r.u)
                .fold(None, |m: Option<f64>, u| Some(m.map_or(u, |m| m.min(u))));
            NBracket { n, lower, upper }
        })
        .collect();
    ScanSummary { uc_a, brackets }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::excursion::{build_law, PhiSpec};

    #[test]
    fn neutral_weights_give_zero() {
        let law = build_law(1.0, PhiSpec::srw2d(), 500).unwrap();
        let uc = annealed::u_c_annealed(&DisorderModel::Zero, 0.7);
        let row = estimate_fq(&law, DisorderModel::Zero, 0.7, uc, 400, 5, 3).unwrap();
        assert_eq!(row.fq_hat, 0.0);
        assert_eq!(row.stderr, 0.0);
        assert!(!row.pinned());
    }

    #[test]
    fn grid_matches_single_runs_and_is_monotone() {
        let law = build_law(1.0, PhiSpec::srw2d(), 500).unwrap();
        let us = [-0.8, -0.5, -0.2, 0.4];
        let ns = [100, 300];
        let spec = GridSpec {
            model: DisorderModel::Gaussian,
            beta: 1.0,
            u_grid: &us,
            n_grid: &ns,
            replicas: 6,
            seed: 4,
        };
        let rows = run_grid(&law, &spec).unwrap();
        assert_eq!(rows.len(), 8);
        let single = estimate_fq(&law, DisorderModel::Gaussian, 1.0, -0.2, 300, 6, 4).unwrap();
        assert_eq!(single, rows[5]);
        for n in ns {
            let f: Vec<f64> = rows.iter().filter(|r| r.n == n).map(|r| r.fq_hat).collect();
            assert!(f.windows(2).all(|w| w[1] > w[0]), "{f:?}");
        }
        for r in &rows {
            assert!(r.contact_fraction_hat > 0.0 && r.contact_fraction_hat < 1.0);
            assert!(
                r.fq_hat <= annealed_finite_n(&law, 1.0, r.delta, r.n).unwrap() + 3.0 * r.stderr
            );
        }
    }

    #[test]
    fn bracket_logic() {
        let mk = |u: f64, f: f64| ResultRow {
            beta: 1.0,
            u,
            delta: u + 0.5,
            n: 10,
            replicas: 4,
            fq_hat: f,
            stderr: 0.01,
            fa: 0.0,
            log_m: 0.0,
            contact_fraction_hat: 0.0,
            wallclock: None,
        };
        let rows = vec![mk(-0.6, 0.0), mk(-0.5, 0.01), mk(-0.4, 0.05), mk(-0.3, 0.2)];
        let s = scan_brackets(&rows, -0.5);
        assert_eq!(s.final_bracket().unwrap(), (-0.5, -0.4));
        let s = scan_brackets(&rows[..2], -0.5);
        assert!(matches!(
            s.final_bracket(),
            Err(PinError::InconclusiveBracket(_))
        ));
    }
}
