use std::path::PathBuf;

use tspec_cli::config::RunConfig;
use tspec_cli::output::read_eigenvalue_csv;
use tspec_cli::{asymptotics_json, compute_spectra, run};
use tspec_core::analysis::assign_branches;

fn config(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("../../configs")
        .join(name)
}

fn tspec(args: &[&str]) -> i32 {
    run(std::iter::once("tspec").chain(args.iter().copied()))
}

fn run_to_dir(sub: &str, cfg: &str, extra: &[&str]) -> (i32, tempfile::TempDir) {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config(cfg);
    let mut args = vec![
        sub,
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        dir.path().to_str().unwrap(),
    ];
    args.extend_from_slice(extra);
    (tspec(&args), dir)
}

#[test]
fn solve_decoupled_first_row() {
    let (code, dir) = run_to_dir("solve", "decoupled.json", &[]);
    assert_eq!(code, 0);
    let text = std::fs::read_to_string(dir.path().join("eigenvalues.csv")).unwrap();
    let recs = read_eigenvalue_csv(&text).unwrap();
    let exact = -(std::f64::consts::PI / 2.0).powi(2);
    assert!((recs[0].value.re - exact).abs() < 1e-8, "{}", recs[0].value);
    assert_eq!(recs[0].multiplicity, 2);
}

#[test]
fn verify_symmetric_passes() {
    let (code, dir) = run_to_dir("verify", "symmetric.json", &[]);
    assert_eq!(code, 0);
    let v: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("verify.json")).unwrap())
            .unwrap();
    let lagrange = v
        .as_array()
        .unwrap()
        .iter()
        .find(|r| r["name"] == "lagrange")
        .unwrap();
    assert_eq!(lagrange["status"], "pass");
    for key in ["name", "status", "constants", "params", "notes"] {
        assert!(lagrange.get(key).is_some(), "missing {key}");
    }
}

#[test]
fn usage_and_config_errors_exit_one() {
    assert_eq!(tspec(&["solve", "--config", "/definitely/missing.json"]), 1);
    assert_eq!(tspec(&["frobnicate"]), 1);
    assert_eq!(tspec(&["solve"]), 1);
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.json");
    std::fs::write(&bad, r#"{"problem": {"coefficients": {"p1": 1}}}"#).unwrap();
    assert_eq!(tspec(&["verify", "--config", bad.to_str().unwrap()]), 1);
    assert_eq!(tspec(&["--help"]), 0);
}

#[test]
fn failing_check_exits_two() {
    // delta0 = 1 alone breaks the interface symmetry; on 20 cells the
    // quadrature cannot match the interface form to 1e-4.
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("broken.json");
    std::fs::write(
        &cfg,
        r#"{"problem": {"coefficients": {"p1": 1, "p2": 1, "alpha0": 1, "alpha1": 0,
            "beta0": 1, "beta1": 0, "gamma0": 0, "delta0": 1, "gamma1": 0, "delta1": 0}},
            "verify": {"checks": ["lagrange"], "refined_n_per_interval": 20, "lagrange_samples": 5}}"#,
    )
    .unwrap();
    let out = dir.path().join("out");
    assert_eq!(
        tspec(&[
            "verify",
            "--config",
            cfg.to_str().unwrap(),
            "--out",
            out.to_str().unwrap()
        ]),
        2
    );
}

#[test]
fn repeated_runs_are_byte_identical() {
    for (sub, file) in [("solve", "eigenvalues.csv"), ("verify", "verify.json")] {
        let (a, da) = run_to_dir(sub, "symmetric.json", &["--seed", "11"]);
        let (b, db) = run_to_dir(sub, "symmetric.json", &["--seed", "11"]);
        assert_eq!((a, b), (0, 0));
        let x = std::fs::read(da.path().join(file)).unwrap();
        let y = std::fs::read(db.path().join(file)).unwrap();
        assert_eq!(x, y, "{file} differs between runs");
    }
}

#[test]
fn asymptotics_from_csv_matches_in_process() {
    let (code, dir) = run_to_dir("solve", "symmetric.json", &[]);
    assert_eq!(code, 0);
    let csv = dir.path().join("eigenvalues.csv");

    let cfg = RunConfig::load(&config("symmetric.json")).unwrap();
    let p = cfg.problem().unwrap();
    let in_process = compute_spectra(&cfg, &p).unwrap();
    let recs = read_eigenvalue_csv(&std::fs::read_to_string(&csv).unwrap()).unwrap();
    let shooting: Vec<_> = recs
        .iter()
        .copied()
        .filter(|r| r.source == in_process[0].merged()[0].source)
        .collect();
    let reread = assign_branches(&shooting, &p).unwrap();
    assert_eq!(reread.branch1, in_process[0].branch1);
    assert_eq!(
        asymptotics_json(&reread, &p).0,
        asymptotics_json(&in_process[0], &p).0
    );

    let out = tempfile::tempdir().unwrap();
    let code = tspec(&[
        "asymptotics",
        "--config",
        config("symmetric.json").to_str().unwrap(),
        "--spectrum",
        csv.to_str().unwrap(),
        "--out",
        out.path().to_str().unwrap(),
    ]);
    // Ten eigenvalues are too few for a tail fit, so the fit itself fails.
    assert_eq!(code, 2);
    assert!(out.path().join("asymptotics.json").exists());
}
