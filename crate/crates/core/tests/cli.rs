use std::path::Path;
use std::process::{Command, Output};

fn pinlab(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_pinlab"))
        .args(args)
        .output()
        .expect("spawn pinlab")
}

fn golden(name: &str) -> String {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("tests/golden")
        .join(name)
        .to_string_lossy()
        .into_owned()
}

fn write_config(dir: &Path, text: &str) -> String {
    let p = dir.join("cfg.toml");
    std::fs::write(&p, text).unwrap();
    p.to_string_lossy().into_owned()
}

#[test]
fn missing_config_is_a_usage_error() {
    let out = pinlab(&["free-energy", "--config", "/no/such/file.toml"]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("/no/such/file.toml"), "{err}");
}

#[test]
fn bad_config_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "[grid]\nn = [10, 5]\n");
    let out = pinlab(&["free-energy", "--config", &cfg]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("cfg.toml"));
}

#[test]
fn unknown_subcommand_exits_2() {
    assert_eq!(pinlab(&["frobnicate"]).status.code(), Some(2));
}

#[test]
fn validate_passes() {
    let out = pinlab(&["validate", "--threads", "2"]);
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8_lossy(&out.stdout);
    assert!(text.lines().last().unwrap().starts_with("total:"));
    assert!(!text.contains("FAILED"), "{text}");
}

#[test]
fn scan_matches_golden_output() {
    let out = pinlab(&["scan-uc", "--config", &golden("scan_small.toml")]);
    assert_eq!(out.status.code(), Some(0));
    let want = std::fs::read_to_string(golden("scan_small.out")).unwrap();
    assert_eq!(String::from_utf8(out.stdout).unwrap(), want);
}

#[test]
fn output_does_not_depend_on_threads() {
    let cfg = golden("scan_small.toml");
    let dir = tempfile::tempdir().unwrap();
    let mut files = Vec::new();
    for t in ["1", "3"] {
        let path = dir.path().join(format!("t{t}.csv"));
        let p = path.to_string_lossy().into_owned();
        let out = pinlab(&["free-energy", "--config", &cfg, "--threads", t, "--out", &p]);
        assert_eq!(out.status.code(), Some(0));
        files.push(std::fs::read(&path).unwrap());
    }
    assert_eq!(files[0], files[1]);
    assert!(!files[0].contains(&b'\r'));
}

#[test]
fn timing_fills_wallclock() {
    let out = pinlab(&[
        "free-energy",
        "--config",
        &golden("scan_small.toml"),
        "--timing",
    ]);
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.lines().skip(1).all(|l| !l.ends_with(',')));
}

#[test]
fn annealed_blocks_bound_smoke() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "[law]\nn_max = 5000\n\n[annealed]\nbeta_delta = [0.05, 0.5]\n\n\
         [blocks]\nk1 = 200\nk2 = 20\ncorrelation_length = 5.0\nreplicas = 6\n\n\
         [bound]\ncorrelation_length = [5.0]\n",
    );

    let out = pinlab(&["annealed", "--config", &cfg]);
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.starts_with("beta_delta,s,M,log_M,residual,method\n"));
    assert_eq!(text.lines().count(), 3);

    let out = pinlab(&["blocks", "--config", &cfg]);
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8(out.stdout).unwrap();
    assert_eq!(
        text.lines()
            .filter(|l| l.contains(",good,") || l.contains(",bad,"))
            .count(),
        6
    );
    assert!(text.lines().last().unwrap().starts_with("p_good="));

    let out = pinlab(&["bound", "--config", &cfg]);
    assert_eq!(
        out.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.starts_with("M,beta_delta,log_K1,K2,"));
    assert_eq!(text.lines().count(), 2);
}
