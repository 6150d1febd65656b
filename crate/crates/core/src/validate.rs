//! Quick property suites behind `pinlab validate`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::annealed::{self, solve_free_energy, u_c_annealed};
use crate::coarse::{self, check_scales_phi, choose_scales, ScaleMode};
use crate::disorder::{lambda_v, DisorderModel};
use crate::dp::{self, PinningParams};
use crate::error::Result;
use crate::excursion::{build_law, psi_integral, ExcursionLaw, LawPreset, PhiSpec};
use crate::harness::experiment::{annealed_finite_n, run_grid, GridSpec};

type Check = (&'static str, fn() -> Result<bool>);

#[derive(Debug, Clone, PartialEq)]
pub struct SuiteResult {
    pub name: &'static str,
    pub passed: usize,
    pub total: usize,
    pub failures: Vec<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ValidationReport {
    pub suites: Vec<SuiteResult>,
}

impl ValidationReport {
    pub fn totals(&self) -> (usize, usize) {
        self.suites
            .iter()
            .fold((0, 0), |(p, t), s| (p + s.passed, t + s.total))
    }

    pub fn all_passed(&self) -> bool {
        let (p, t) = self.totals();
        p == t
    }
}

fn run_suite(name: &'static str, checks: &[Check]) -> SuiteResult {
    let mut failures = Vec::new();
    for (label, f) in checks {
        match f() {
            Ok(true) => {}
            Ok(false) => failures.push(label.to_string()),
            Err(e) => failures.push(format!("{label}: {e}")),
        }
    }
    SuiteResult {
        name,
        passed: checks.len() - failures.len(),
        total: checks.len(),
        failures,
    }
}

pub fn run_all() -> ValidationReport {
    ValidationReport {
        suites: vec![
            run_suite("excursion_law", EXCURSION),
            run_suite("disorder", DISORDER),
            run_suite("pinning_dp", DP),
            run_suite("annealed", ANNEALED),
            run_suite("coarse_grain", COARSE),
            run_suite("harness", HARNESS),
        ],
    }
}

fn srw(n_max: usize) -> Result<ExcursionLaw> {
    build_law(1.0, PhiSpec::srw2d(), n_max)
}

const EXCURSION: &[Check] = &[
    ("normalization", || {
        let law = srw(10_000)?;
        let s: f64 = law.masses().iter().sum();
        Ok((s + law.tail(10_000) - 1.0).abs() < 1e-12)
    }),
    ("tail telescoping", || {
        let law = srw(2000)?;
        Ok((1..=2000).all(|n| (law.tail(n - 1) - law.tail(n) - law.mass(n)).abs() < 1e-15))
    }),
    ("non-summable rejected", || {
        Ok(build_law(1.0, PhiSpec::constant(1.0), 100).is_err())
    }),
    ("psi closed form", || {
        let phi = PhiSpec::log_power(2.0, 2.0, 0.0);
        for i in 1..=20 {
            let t = 0.5 * i as f64;
            if (psi_integral(&phi, t)? * t / 2.0 - 1.0).abs() > 1e-8 {
                return Ok(false);
            }
        }
        Ok(true)
    }),
    ("slow variation", || {
        let law = srw(1000)?;
        let r = law.tail(2_000_000) / law.tail(1_000_000);
        Ok((0.9..=1.1).contains(&r))
    }),
];

const ALL_MODELS: [DisorderModel; 4] = [
    DisorderModel::Gaussian,
    DisorderModel::Rademacher,
    DisorderModel::UniformCentered,
    DisorderModel::ShiftedBernoulli { p: 0.3 },
];

const DISORDER: &[Check] = &[
    ("log_mgf(0) = 0", || {
        Ok(ALL_MODELS.iter().all(|m| m.log_mgf(0.0) == 0.0))
    }),
    ("Lambda_V >= 0", || {
        Ok(ALL_MODELS
            .iter()
            .all(|m| (1..50).all(|i| lambda_v(m, 0.1 * i as f64) >= 0.0)))
    }),
    ("deterministic sampling", || {
        Ok(ALL_MODELS
            .iter()
            .all(|m| m.sample(5, 2, 100) == m.sample(5, 2, 100)))
    }),
    ("standardized moments", || {
        let n = 100_000;
        Ok(ALL_MODELS.iter().all(|m| {
            let v = m.sample(17, 0, n).values;
            let mean = v.iter().sum::<f64>() / n as f64;
            let var = v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
            mean.abs() < 5.0 / (n as f64).sqrt() && (var - 1.0).abs() < 0.05
        }))
    }),
];

const DP: &[Check] = &[
    ("brute-force equivalence", || {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..20 {
            let len = rng.random_range(1..=6);
            let raw: Vec<f64> = (0..len).map(|_| rng.random_range(0.05..1.0)).collect();
            let total: f64 = raw.iter().sum();
            let law = ExcursionLaw::from_masses(raw.iter().map(|x| x / total).collect())?;
            let n = rng.random_range(1..=12);
            let params =
                PinningParams::new(rng.random_range(0.5..2.0), rng.random_range(-1.0..1.0))?;
            let v = DisorderModel::Gaussian.sample(rng.random(), 0, n).values;
            let a = dp::log_z_free(&law, &params, &v, n)?;
            let b = dp::brute_force_log_z(&law, &params, &v, n)?;
            if (a - b).abs() >= 1e-9 {
                return Ok(false);
            }
        }
        Ok(true)
    }),
    ("neutral identity", || {
        let law = srw(1000)?;
        Ok(dp::log_z_free_weights(&law, &vec![0.0; 1001])? == 0.0)
    }),
    ("contact identity", || {
        let law = srw(300)?;
        let v = DisorderModel::Gaussian.sample(3, 0, 300).values;
        let (beta, u, h) = (1.0, -0.3, 1e-4);
        let prof = dp::contact_profile(&law, &PinningParams::new(beta, u)?, &v, 300)?;
        let up = dp::log_z_free(&law, &PinningParams::new(beta, u + h / beta)?, &v, 300)?;
        let dn = dp::log_z_free(&law, &PinningParams::new(beta, u - h / beta)?, &v, 300)?;
        let fd = (up - dn) / (2.0 * h);
        Ok((prof.mean_local_time().unwrap() / fd - 1.0).abs() < 1e-5)
    }),
    ("monotone in u", || {
        let law = srw(200)?;
        let v = DisorderModel::Gaussian.sample(8, 0, 200).values;
        let z: Vec<f64> = (0..10)
            .map(|i| {
                dp::log_z_free(
                    &law,
                    &PinningParams::new(1.0, -1.0 + 0.2 * i as f64)?,
                    &v,
                    200,
                )
            })
            .collect::<Result<_>>()?;
        Ok(z.windows(2).all(|w| w[1] > w[0]))
    }),
];

const ANNEALED: &[Check] = &[
    ("u_c^a gaussian", || {
        Ok((u_c_annealed(&DisorderModel::Gaussian, 1.0) + 0.5).abs() < 1e-15)
    }),
    ("cubic fixed point", || {
        let law = ExcursionLaw::from_masses(vec![0.5, 0.3, 0.2])?;
        let s = solve_free_energy(&law, 2f64.ln())?;
        let x = (-s.s).exp();
        Ok(x > 0.64 && x < 0.65 && s.residual < 1e-12)
    }),
    ("hybrid residuals", || {
        let law = srw(1000)?;
        for bd in [3e-3, 1e-2, 3e-2] {
            if solve_free_energy(&law, bd)?.residual >= 1e-12 {
                return Ok(false);
            }
        }
        Ok(true)
    }),
    ("two-route agreement", || {
        let law = ExcursionLaw::from_masses(vec![0.5, 0.3, 0.2])?;
        let s = solve_free_energy(&law, 0.5)?;
        let n = (200.0 * s.m).ceil() as usize;
        let slope = annealed::annealed_log_z_dp(&law, 0.5, n)? / n as f64;
        Ok((slope / s.s - 1.0).abs() < 0.02)
    }),
    ("lemma grid", || {
        let law = srw(2000)?;
        let grid: Vec<usize> = (1..=20).map(|i| 100 * i).collect();
        for bd in [0.3, 1.0] {
            if !annealed::lemma_grid(&law, bd, &grid)?
                .iter()
                .all(|r| r.holds)
            {
                return Ok(false);
            }
        }
        Ok(true)
    }),
];

const COARSE: &[Check] = &[
    ("scale arithmetic", || {
        let phi = PhiSpec::constant(0.5);
        Ok(check_scales_phi(&phi, 1.0, 1.0, 100.0, 6).flags.ineq_2_5
            && !check_scales_phi(&phi, 1.0, 1.0, 100.0, 4).flags.ineq_2_5)
    }),
    ("compliant fixed point", || {
        let law = srw(1000)?;
        Ok(choose_scales(
            &law,
            &DisorderModel::Gaussian,
            1.0,
            5.0,
            ScaleMode::Compliant,
        )?
        .flags
        .all())
    }),
    ("zero disorder p_good = 1", || {
        let law = srw(1000)?;
        let params = PinningParams::new(1.0, 0.1)?;
        let scales = coarse::check_scales_int(&law, &DisorderModel::Zero, 1.0, 10.0, 100, 10);
        Ok(
            coarse::estimate_p_good(&law, &params, &DisorderModel::Zero, &scales, 3, 1)?.p_good_hat
                == 1.0,
        )
    }),
];

const HARNESS: &[Check] = &[
    ("neutral fq_hat = 0", || {
        let law = srw(500)?;
        let uc = u_c_annealed(&DisorderModel::Zero, 1.0);
        let spec = GridSpec {
            model: DisorderModel::Zero,
            beta: 1.0,
            u_grid: &[uc],
            n_grid: &[500],
            replicas: 3,
            seed: 1,
        };
        let r = run_grid(&law, &spec)?[0];
        Ok(r.fq_hat == 0.0 && r.stderr == 0.0)
    }),
    ("Jensen ordering", || {
        let law = LawPreset::Srw2d.build(1000)?;
        let us = [-0.7, -0.5, -0.3];
        let spec = GridSpec {
            model: DisorderModel::Gaussian,
            beta: 1.0,
            u_grid: &us,
            n_grid: &[1000],
            replicas: 8,
            seed: 2,
        };
        for r in run_grid(&law, &spec)? {
            if r.fq_hat > annealed_finite_n(&law, r.beta, r.delta, r.n)? + 3.0 * r.stderr {
                return Ok(false);
            }
        }
        Ok(true)
    }),
];
