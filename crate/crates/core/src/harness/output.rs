//! CSV emission: header row, comma separated, LF endings, floats with 17
//! significant digits.

use std::io::{self, Write};

use crate::annealed::AnnealedSolution;
use crate::coarse::{BlockReport, BlockScales, BoundConclusion, BoundReport};
use crate::harness::experiment::{NBracket, ResultRow, ScanSummary};

pub const RESULT_HEADER: &str =
    "beta,u,delta,N,replicas,fq_hat,stderr,fa,log_M,contact_fraction_hat,wallclock";
pub const ANNEALED_HEADER: &str = "beta_delta,s,M,log_M,residual,method";
pub const BLOCK_HEADER: &str = "replica,verdict,logW,logRef";
pub const BOUND_HEADER: &str = "M,beta_delta,log_K1,K2,ineq_2_5,ineq_2_6_lower,ineq_2_6_upper,log_ref,ln_C,ln_C_phi,ln_phi_K1,bracket,bracket_lemma,bracket_final,log_bound,conclusion";

pub fn fmt_f(x: f64) -> String {
    format!("{x:.16e}")
}

pub fn write_result_rows<W: Write>(mut w: W, rows: &[ResultRow]) -> io::Result<()> {
    writeln!(w, "{RESULT_HEADER}")?;
    for r in rows {
        writeln!(
            w,
            "{},{},{},{},{},{},{},{},{},{},{}",
            fmt_f(r.beta),
            fmt_f(r.u),
            fmt_f(r.delta),
            r.n,
            r.replicas,
            fmt_f(r.fq_hat),
            fmt_f(r.stderr),
            fmt_f(r.fa),
            fmt_f(r.log_m),
            fmt_f(r.contact_fraction_hat),
            r.wallclock.map(fmt_f).unwrap_or_default()
        )?;
    }
    Ok(())
}

pub fn write_annealed_rows<W: Write>(mut w: W, rows: &[AnnealedSolution]) -> io::Result<()> {
    writeln!(w, "{ANNEALED_HEADER}")?;
    for s in rows {
        writeln!(
            w,
            "{},{},{},{},{},{}",
            fmt_f(s.beta_delta),
            fmt_f(s.s),
            fmt_f(s.m),
            fmt_f(s.log_m),
            fmt_f(s.residual),
            s.method.as_str()
        )?;
    }
    Ok(())
}

pub fn write_block_rows<W: Write>(mut w: W, report: &BlockReport) -> io::Result<()> {
    writeln!(w, "{BLOCK_HEADER}")?;
    for b in &report.rows {
        writeln!(
            w,
            "{},{},{},{}",
            b.replica,
            if b.verdict.good { "good" } else { "bad" },
            fmt_f(b.verdict.log_w_sum),
            fmt_f(b.verdict.log_ref_sum)
        )?;
    }
    Ok(())
}

pub fn write_bound_rows<W: Write>(
    mut w: W,
    rows: &[(f64, BlockScales, BoundReport)],
) -> io::Result<()> {
    writeln!(w, "{BOUND_HEADER}")?;
    for (bd, s, b) in rows {
        let (log_bound, concl) = match b.conclusion {
            BoundConclusion::Positive { log_bound } => (fmt_f(log_bound), "positive"),
            BoundConclusion::NoConclusion => (String::new(), "no_conclusion"),
        };
        writeln!(
            w,
            "{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
            fmt_f(s.m),
            fmt_f(*bd),
            fmt_f(s.log_k1),
            s.k2,
            s.flags.ineq_2_5,
            s.flags.ineq_2_6_lower,
            s.flags.ineq_2_6_upper,
            fmt_f(b.log_reference),
            fmt_f(b.ln_c_exact),
            fmt_f(b.ln_c_phi),
            fmt_f(b.ln_phi_k1),
            fmt_f(b.bracket),
            fmt_f(b.bracket_lemma),
            fmt_f(b.bracket_final),
            log_bound,
            concl
        )?;
    }
    Ok(())
}

fn opt(x: Option<f64>) -> String {
    x.map(fmt_f).unwrap_or_else(|| "none".into())
}

pub fn bracket_line(b: &NBracket) -> String {
    format!(
        "N={} bracket=[{},{}] width={}",
        b.n,
        opt(b.lower),
        opt(b.upper),
        opt(b.width())
    )
}

/// `uc_a=… bracket=[…,…]` at the largest horizon.
pub fn summary_line(s: &ScanSummary) -> String {
    let last = s.brackets.last();
    format!(
        "uc_a={} bracket=[{},{}]",
        fmt_f(s.uc_a),
        opt(last.and_then(|b| b.lower)),
        opt(last.and_then(|b| b.upper))
    )
}
