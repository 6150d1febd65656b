//! Command-line front end. Exit codes: 0 success, 1 numeric failure,
//! 2 usage or configuration error.

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand};

use crate::annealed::{annealed_log_z_dp, beta_delta_for_log_m, solve_free_energy};
use crate::coarse::{
    self, c_phi_constant, check_scales_int, choose_scales, fq_lower_bound, CPhiGrid, ScaleMode,
};
use crate::error::{PinError, Result};
use crate::harness::config::{BoundMode, ExperimentConfig};
use crate::harness::experiment::{run_grid, scan_brackets, GridSpec};
use crate::harness::output;
use crate::validate;

#[derive(Debug, Parser)]
#[command(
    name = "pinlab",
    version,
    about = "Disordered pinning model laboratory"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Annealed free energy and correlation length for each annealed.beta_delta
    Annealed(RunArgs),
    /// Replica-averaged quenched free energy on the (u, N) grid
    FreeEnergy(RunArgs),
    /// Free-energy grid plus the pinned/unpinned bracket around u_c^a
    ScanUc(RunArgs),
    /// Good/bad block classification and p_good
    Blocks(RunArgs),
    /// Scale selection and the computable free-energy lower bound
    Bound(RunArgs),
    /// Run the built-in property suites
    Validate(ValidateArgs),
}

#[derive(Debug, Args)]
struct RunArgs {
    #[arg(long, value_name = "PATH")]
    config: PathBuf,
    #[arg(long, value_name = "PATH")]
    out: Option<PathBuf>,
    #[arg(long, value_name = "N")]
    threads: Option<usize>,
    #[arg(long, value_name = "S")]
    seed: Option<u64>,
    /// Fill the wallclock column (makes output run-dependent)
    #[arg(long)]
    timing: bool,
}

#[derive(Debug, Args)]
struct ValidateArgs {
    #[arg(long, value_name = "N")]
    threads: Option<usize>,
}

enum Failure {
    Usage(String),
    Numeric(String),
}

impl From<PinError> for Failure {
    fn from(e: PinError) -> Self {
        match e {
            PinError::Config(m) => Failure::Usage(m),
            other => Failure::Numeric(other.to_string()),
        }
    }
}

impl From<io::Error> for Failure {
    fn from(e: io::Error) -> Self {
        Failure::Numeric(format!("i/o error: {e}"))
    }
}

/// Runs the CLI on `argv` (including the program name).
pub fn run_cli<I, T>(argv: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let text = e.render().to_string();
            let _ = if code == 0 {
                stdout.write_all(text.as_bytes())
            } else {
                stderr.write_all(text.as_bytes())
            };
            return code;
        }
    };
    match dispatch(cli.command, stdout) {
        Ok(code) => code,
        Err(Failure::Usage(m)) => {
            let _ = writeln!(stderr, "error: {m}");
            2
        }
        Err(Failure::Numeric(m)) => {
            let _ = writeln!(stderr, "error: {m}");
            1
        }
    }
}

fn load(args: &RunArgs) -> std::result::Result<ExperimentConfig, Failure> {
    if !args.config.is_file() {
        return Err(Failure::Usage(format!(
            "config file not found: {}",
            args.config.display()
        )));
    }
    let mut cfg = ExperimentConfig::from_path(&args.config)?;
    if let Some(s) = args.seed {
        cfg.seed = s;
    }
    if let Some(t) = args.threads {
        if t == 0 {
            return Err(Failure::Usage("--threads must be at least 1".into()));
        }
        cfg.threads = t;
    }
    if let Some(o) = &args.out {
        cfg.output = Some(o.clone());
    }
    Ok(cfg)
}

fn pool(threads: usize) -> std::result::Result<rayon::ThreadPool, Failure> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| Failure::Numeric(format!("cannot start thread pool: {e}")))
}

/// Writes CSV to `path`, or to `stdout` when no path is configured.
fn emit(
    path: Option<&Path>,
    stdout: &mut dyn Write,
    f: impl FnOnce(&mut dyn Write) -> io::Result<()>,
) -> io::Result<()> {
    match path {
        Some(p) => {
            let mut w = BufWriter::new(File::create(p)?);
            f(&mut w)?;
            w.flush()
        }
        None => f(stdout),
    }
}

fn dispatch(cmd: Command, stdout: &mut dyn Write) -> std::result::Result<i32, Failure> {
    match cmd {
        Command::Validate(a) => {
            let threads = a.threads.unwrap_or(1).max(1);
            let report = pool(threads)?.install(validate::run_all);
            for s in &report.suites {
                writeln!(stdout, "{}: {}/{} passed", s.name, s.passed, s.total)?;
                for f in &s.failures {
                    writeln!(stdout, "  FAILED {f}")?;
                }
            }
            let (p, t) = report.totals();
            writeln!(stdout, "total: {p}/{t} passed")?;
            Ok(if p == t { 0 } else { 1 })
        }
        Command::Annealed(a) => {
            let cfg = load(&a)?;
            let law = cfg.build_law()?;
            let rows = cfg
                .annealed_beta_delta
                .iter()
                .map(|&bd| solve_free_energy(&law, bd))
                .collect::<Result<Vec<_>>>()?;
            emit(cfg.output.as_deref(), stdout, |w| {
                output::write_annealed_rows(w, &rows)
            })?;
            Ok(0)
        }
        Command::FreeEnergy(a) => grid_command(&a, false, stdout),
        Command::ScanUc(a) => grid_command(&a, true, stdout),
        Command::Blocks(a) => {
            let cfg = load(&a)?;
            let law = cfg.build_law()?;
            let b = &cfg.blocks;
            let bd = beta_delta_for_log_m(&law, b.correlation_length.ln())?;
            let params =
                crate::dp::PinningParams::new(cfg.beta, cfg.uc_annealed() + bd / cfg.beta)?;
            let scales = check_scales_int(
                &law,
                &cfg.disorder,
                cfg.beta,
                b.correlation_length,
                b.k1,
                b.k2,
            );
            let report = pool(cfg.threads)?.install(|| {
                coarse::estimate_p_good(&law, &params, &cfg.disorder, &scales, b.replicas, cfg.seed)
            })?;
            emit(cfg.output.as_deref(), stdout, |w| {
                output::write_block_rows(w, &report)
            })?;
            writeln!(
                stdout,
                "p_good={} stderr={} good={}/{} beta_delta={} ineq_2_5={} ineq_2_6_lower={} ineq_2_6_upper={}",
                output::fmt_f(report.p_good_hat),
                output::fmt_f(report.stderr),
                report.good_count,
                report.replicas,
                output::fmt_f(bd),
                scales.flags.ineq_2_5,
                scales.flags.ineq_2_6_lower,
                scales.flags.ineq_2_6_upper
            )?;
            Ok(0)
        }
        Command::Bound(a) => {
            let cfg = load(&a)?;
            let law = cfg.build_law()?;
            let mode = match cfg.bound.mode {
                BoundMode::Compliant => ScaleMode::Compliant,
                BoundMode::Desk { k1_max } => ScaleMode::Desk { k1_max },
            };
            let mut rows = Vec::new();
            for &m in &cfg.bound.correlation_lengths {
                let bd = beta_delta_for_log_m(&law, m.ln())?;
                let scales = choose_scales(&law, &cfg.disorder, cfg.beta, m, mode)?;
                let log_ref = annealed_log_z_dp(&law, bd, scales.k2 as usize)?;
                let cphi =
                    c_phi_constant(&law.normalized_phi(), scales.log_k1, &CPhiGrid::default())?;
                let rep = fq_lower_bound(&law, &scales, &cphi, log_ref)?;
                rows.push((bd, scales, rep));
            }
            emit(cfg.output.as_deref(), stdout, |w| {
                output::write_bound_rows(w, &rows)
            })?;
            Ok(0)
        }
    }
}

fn grid_command(
    a: &RunArgs,
    scan: bool,
    stdout: &mut dyn Write,
) -> std::result::Result<i32, Failure> {
    let cfg = load(a)?;
    let law = cfg.build_law()?;
    let spec = GridSpec {
        model: cfg.disorder,
        beta: cfg.beta,
        u_grid: &cfg.u_grid,
        n_grid: &cfg.n_grid,
        replicas: cfg.replicas,
        seed: cfg.seed,
    };
    let start = Instant::now();
    let mut rows = pool(cfg.threads)?.install(|| run_grid(&law, &spec))?;
    if a.timing {
        let t = start.elapsed().as_secs_f64();
        rows.iter_mut().for_each(|r| r.wallclock = Some(t));
    }
    emit(cfg.output.as_deref(), stdout, |w| {
        output::write_result_rows(w, &rows)
    })?;
    if !scan {
        return Ok(0);
    }
    let summary = scan_brackets(&rows, cfg.uc_annealed());
    for b in &summary.brackets {
        writeln!(stdout, "{}", output::bracket_line(b))?;
    }
    writeln!(stdout, "{}", output::summary_line(&summary))?;
    summary.final_bracket()?;
    Ok(0)
}
