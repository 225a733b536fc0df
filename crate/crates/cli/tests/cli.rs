use std::path::Path;
use std::process::{Command, Output};

use lorenz_stab_cli::manifest::sha256_hex;
use lorenz_stab_cli::{Config, RunManifest};

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_lorenz-stab"));
    c.env_remove("LORENZ_STAB_OUT");
    c
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().unwrap()
}

const QUICK_ATTRACTOR: [&str; 4] = ["--set", "lyapunov_samples=200", "--set", "t_attractor=20"];

fn assert_hashes_match(dir: &Path, m: &RunManifest) {
    assert!(!m.files.is_empty());
    for f in &m.files {
        let bytes = std::fs::read(dir.join(&f.path)).unwrap();
        assert_eq!(sha256_hex(&bytes), f.sha256, "{}", f.path);
        assert_eq!(bytes.len() as u64, f.bytes);
    }
}

#[test]
fn print_config_parses_back_to_defaults() {
    let out = run(&["print-config"]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    assert_eq!(Config::parse(&text).unwrap(), Config::default());
    assert!(text.lines().any(|l| l.starts_with("# ")));
}

#[test]
fn invalid_configuration_exits_2() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("r");
    let out_s = out.to_str().unwrap();
    for args in [
        vec!["run", "pdmp", "--set", "eps=-0.1", "--out", out_s],
        vec!["run", "pdmp", "--set", "no_such_key=1", "--out", out_s],
        vec!["run", "no-such-experiment", "--out", out_s],
        vec!["run", "stat-stability", "--set", "ladder=0.01,0.1", "--out", out_s],
    ] {
        let o = run(&args);
        assert_eq!(o.status.code(), Some(2), "{args:?}: {}", String::from_utf8_lossy(&o.stderr));
    }
    assert!(!out.join("manifest.json").exists());

    let cfg = tmp.path().join("bad.cfg");
    std::fs::write(&cfg, "seed = 3\nthis line has no equals sign\n").unwrap();
    let o = run(&["run", "attractor", "--config", cfg.to_str().unwrap(), "--out", out_s]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("line 2"));
}

#[test]
fn attractor_run_writes_consistent_manifest() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("run.cfg");
    std::fs::write(&cfg, "# quick\nseed = 5\n").unwrap();
    let dir = tmp.path().join("out");
    let mut args = vec!["run", "attractor", "--config", cfg.to_str().unwrap(), "--out", dir.to_str().unwrap(), "--jobs", "1"];
    args.extend(QUICK_ATTRACTOR);
    let o = run(&args);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let stdout = String::from_utf8(o.stdout).unwrap();
    assert!(stdout.contains("PASS lyapunov_bound_sweep"));

    let m = RunManifest::read(&dir.join("manifest.json")).unwrap();
    assert_eq!(m.status, "passed");
    assert_eq!(m.seed, 5);
    assert_eq!(m.config["lyapunov_samples"], "200");
    assert!(m.files.iter().any(|f| f.path == "plots/attractor.svg"));
    assert_hashes_match(&dir, &m);
}

#[test]
fn env_var_sets_default_output_root() {
    let tmp = tempfile::tempdir().unwrap();
    let mut args = vec!["run", "attractor", "--seed", "7"];
    args.extend(QUICK_ATTRACTOR);
    let o = bin().env("LORENZ_STAB_OUT", tmp.path()).args(&args).output().unwrap();
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(tmp.path().join("attractor-7").join("manifest.json").is_file());
}

#[test]
fn runtime_failure_leaves_partial_manifest() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path().join("out");
    let mut args = vec!["run", "attractor", "--set", "horizon=0.01", "--out", dir.to_str().unwrap()];
    args.extend(QUICK_ATTRACTOR);
    let o = run(&args);
    assert_eq!(o.status.code(), Some(1));
    let m = RunManifest::read(&dir.join("manifest.json")).unwrap();
    assert_eq!(m.status, "error");
    assert!(m.error.is_some());
    assert!(m.checks.is_empty());
    assert_hashes_match(&dir, &m);
}

#[test]
fn unperturbed_pdmp_duality_holds() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path().join("out");
    let o = run(&["run", "pdmp", "--set", "duality_eps=0", "--set", "t_total=2500", "--out", dir.to_str().unwrap()]);
    let m = RunManifest::read(&dir.join("manifest.json")).unwrap();
    assert_ne!(o.status.code(), Some(2));
    let dual: Vec<_> = m.checks.iter().filter(|c| c.name.starts_with("duality_")).collect();
    assert_eq!(dual.len(), 3);
    assert!(dual.iter().all(|c| c.passed), "{dual:?}");
    // the short trace is below the crossing count the criterion asks for
    assert!(!m.check("pdmp_crossings_eps0").unwrap().passed);
    assert_eq!(o.status.code(), Some(1));
}
