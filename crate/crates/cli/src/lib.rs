//! `tspec <subcommand> --config <path> [--out <dir>] [--seed <u64>]`
//!
//! Exit codes: 0 when every check passes, 2 when any check fails, 1 on
//! usage, configuration or numerical errors.

pub mod config;
pub mod output;

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use serde_json::{json, Value};

use tspec_core::abel::{AbelSettings, AbelWorkspace, ContourSettings};
use tspec_core::analysis::{
    assign_branches, counting_law_check, expand, fit_asymptotics, predicted_leading_coefficient,
    sector_enclosure, BranchedSpectrum, DEFAULT_TAIL_START,
};
use tspec_core::discrete::{build_grid, discrete_spectrum};
use tspec_core::shooting::locate_spectrum;
use tspec_core::verify::run_checks;
use tspec_core::{Branch, EigenvalueRecord, StiffnessCase, TransmissionProblem, C64};

use config::{Engine, RunConfig};

#[derive(Debug, Parser)]
#[command(
    name = "tspec",
    version,
    about = "Spectra of two-interval transmission problems"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct Common {
    #[arg(long)]
    config: PathBuf,
    /// Output directory; overrides the config. Without one, results go to stdout.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Seed for every random draw; overrides the config.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Eigenvalue CSV.
    Solve(Common),
    /// Asymptotic fits, counting law and sector bound.
    Asymptotics {
        #[command(flatten)]
        common: Common,
        /// Reuse an eigenvalue CSV instead of solving.
        #[arg(long)]
        spectrum: Option<PathBuf>,
    },
    /// Abel-regularized reconstruction errors.
    Abel(Common),
    /// Verification suite as JSON.
    Verify(Common),
    /// Everything above.
    Report(Common),
}

/// Files produced by a subcommand and whether its checks passed.
struct Outcome {
    files: Vec<(String, String)>,
    /// Printed when no output directory is set.
    primary: usize,
    pass: bool,
}

type Res<T> = Result<T, String>;

fn err(e: tspec_core::Error) -> String {
    e.to_string()
}

/// Entry point shared by the binary and the tests.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = e.print();
            return code;
        }
    };
    match dispatch(cli.command) {
        Ok(true) => 0,
        Ok(false) => 2,
        Err(msg) => {
            eprintln!("tspec: {}", msg.lines().next().unwrap_or("error"));
            1
        }
    }
}

fn prepare(common: &Common) -> Res<(RunConfig, TransmissionProblem, Option<PathBuf>)> {
    let mut cfg = RunConfig::load(&common.config)?;
    if let Some(seed) = common.seed {
        cfg.verify.seed = seed;
    }
    let problem = cfg.problem()?;
    let dir = common.out.clone().or_else(|| cfg.output.directory.clone());
    Ok((cfg, problem, dir))
}

fn dispatch(command: Command) -> Res<bool> {
    let (common, outcome) = match command {
        Command::Solve(c) => {
            let (cfg, p, _) = prepare(&c)?;
            let o = solve(&cfg, &p)?;
            (c, o)
        }
        Command::Asymptotics { common, spectrum } => {
            let (cfg, p, _) = prepare(&common)?;
            let o = asymptotics(&cfg, &p, spectrum.as_deref())?;
            (common, o)
        }
        Command::Abel(c) => {
            let (cfg, p, _) = prepare(&c)?;
            let o = abel(&cfg, &p, c.seed)?;
            (c, o)
        }
        Command::Verify(c) => {
            let (cfg, p, _) = prepare(&c)?;
            let o = verify(&cfg, &p)?;
            (c, o)
        }
        Command::Report(c) => {
            let (cfg, p, _) = prepare(&c)?;
            let o = report(&cfg, &p, c.seed)?;
            (c, o)
        }
    };
    let (cfg, _, dir) = prepare(&common)?;
    emit(&cfg, dir.as_deref(), &outcome)?;
    Ok(outcome.pass)
}

fn emit(cfg: &RunConfig, dir: Option<&Path>, o: &Outcome) -> Res<()> {
    match dir {
        Some(d) => {
            std::fs::create_dir_all(d)
                .map_err(|e| format!("cannot create {}: {e}", d.display()))?;
            for (name, body) in &o.files {
                let ext = name.rsplit('.').next().unwrap_or("");
                if !cfg.wants(ext) {
                    continue;
                }
                let path = d.join(name);
                std::fs::write(&path, body)
                    .map_err(|e| format!("cannot write {}: {e}", path.display()))?;
            }
        }
        None => print!("{}", o.files[o.primary].1),
    }
    Ok(())
}

/// Real-part window reaching about `count + 1` eigenvalues per branch.
pub fn default_window(problem: &TransmissionProblem, count: usize) -> (f64, f64) {
    let c = predicted_leading_coefficient(problem);
    let k = (count + 2) as f64;
    let reach = |coef: f64| 1.3 * coef.abs() * k * k + 10.0;
    match problem.case() {
        StiffnessCase::OppositeSigns => (
            -reach(c.for_branch(Branch::Branch2)),
            reach(c.for_branch(Branch::Branch1)),
        ),
        StiffnessCase::SameSign => {
            let r = reach(c.for_branch(Branch::Single));
            (-r, r)
        }
    }
}

/// Keeps the first `count` indices of every branch.
fn truncate(mut b: BranchedSpectrum, count: usize) -> BranchedSpectrum {
    b.branch1.retain(|e| e.index <= count);
    b.branch2.retain(|e| e.index <= count);
    b
}

fn shooting_spectrum(cfg: &RunConfig, p: &TransmissionProblem) -> Res<Vec<EigenvalueRecord>> {
    let window = match cfg.search.window {
        Some([lo, hi]) => (lo, hi),
        None => default_window(p, cfg.search.count),
    };
    locate_spectrum(p, window, cfg.search.grid_points).map_err(err)
}

fn matrix_spectrum(cfg: &RunConfig, p: &TransmissionProblem) -> Res<Vec<EigenvalueRecord>> {
    let grid = build_grid(cfg.discretization.n_per_interval).map_err(err)?;
    discrete_spectrum(p, &grid, cfg.search.count).map_err(err)
}

/// Spectra by the configured engine(s), branch-assigned and truncated.
pub fn compute_spectra(cfg: &RunConfig, p: &TransmissionProblem) -> Res<Vec<BranchedSpectrum>> {
    let engines: &[Engine] = match cfg.search.engine {
        Engine::Both => &[Engine::Shooting, Engine::Matrix],
        Engine::Shooting => &[Engine::Shooting],
        Engine::Matrix => &[Engine::Matrix],
    };
    engines
        .iter()
        .map(|e| {
            let recs = match e {
                Engine::Shooting => shooting_spectrum(cfg, p)?,
                _ => matrix_spectrum(cfg, p)?,
            };
            let b = assign_branches(&recs, p).map_err(err)?;
            Ok(truncate(b, cfg.search.count))
        })
        .collect()
}

fn solve(cfg: &RunConfig, p: &TransmissionProblem) -> Res<Outcome> {
    let spectra = compute_spectra(cfg, p)?;
    Ok(Outcome {
        files: vec![("eigenvalues.csv".into(), output::eigenvalue_csv(&spectra)?)],
        primary: 0,
        pass: true,
    })
}

#[derive(Debug, Serialize)]
struct BranchFit {
    branch: &'static str,
    members: usize,
    fit: Option<tspec_core::AsymptoticFit>,
    error: Option<String>,
}

/// Fits, counting law and sector bound for one branched spectrum.
pub fn asymptotics_json(b: &BranchedSpectrum, p: &TransmissionProblem) -> (Value, bool) {
    let predicted = predicted_leading_coefficient(p);
    let branches: Vec<(Branch, &[tspec_core::analysis::IndexedEigenvalue])> = match b.case {
        StiffnessCase::OppositeSigns => {
            vec![(Branch::Branch1, &b.branch1), (Branch::Branch2, &b.branch2)]
        }
        StiffnessCase::SameSign => vec![(Branch::Single, &b.branch1)],
    };
    let mut pass = true;
    let fits: Vec<BranchFit> = branches
        .iter()
        .map(|(which, members)| {
            let series = expand(members);
            match fit_asymptotics(&series, predicted.for_branch(*which), DEFAULT_TAIL_START) {
                Ok(f) => {
                    pass &= f.relative_error <= 0.02;
                    BranchFit {
                        branch: output::branch_name(*which),
                        members: series.len(),
                        fit: Some(f),
                        error: None,
                    }
                }
                Err(e) => {
                    pass = false;
                    BranchFit {
                        branch: output::branch_name(*which),
                        members: series.len(),
                        fit: None,
                        error: Some(e.to_string()),
                    }
                }
            }
        })
        .collect();

    let counting = if b.case == StiffnessCase::OppositeSigns {
        let reach = |br: &[tspec_core::analysis::IndexedEigenvalue]| {
            br.iter().map(|e| e.record.value.norm()).fold(0.0, f64::max)
        };
        let r_max = reach(&b.branch1).min(reach(&b.branch2));
        let radii = [r_max / 100.0, r_max / 10.0, r_max];
        match counting_law_check(b, p, &radii) {
            Ok(t) => {
                pass &= t.pass;
                json!(t)
            }
            Err(e) => {
                pass = false;
                json!({ "error": e.to_string() })
            }
        }
    } else {
        Value::Null
    };
    let records = b.merged();
    let value = json!({
        "case": b.case,
        "predicted": predicted,
        "fits": fits,
        "counting": counting,
        "counting_note": "alternate_predicted uses sqrt(r / (|p| pi)), the radical placed over pi",
        "sector_b": sector_enclosure(&records, 0.5),
        "ambiguous": b.ambiguous,
        "warnings": b.warnings,
        "pass": pass,
    });
    (value, pass)
}

fn asymptotics(cfg: &RunConfig, p: &TransmissionProblem, csv: Option<&Path>) -> Res<Outcome> {
    let spectra = match csv {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| format!("cannot read {}: {e}", path.display()))?;
            let recs = output::read_eigenvalue_csv(&text)?;
            vec![assign_branches(&recs, p).map_err(err)?]
        }
        None => compute_spectra(cfg, p)?,
    };
    let mut pass = true;
    let parts: Vec<Value> = spectra
        .iter()
        .map(|b| {
            let (v, ok) = asymptotics_json(b, p);
            pass &= ok;
            v
        })
        .collect();
    Ok(Outcome {
        files: vec![("asymptotics.json".into(), output::to_json(&parts)?)],
        primary: 0,
        pass,
    })
}

fn abel(cfg: &RunConfig, p: &TransmissionProblem, seed: Option<u64>) -> Res<Outcome> {
    let a = &cfg.abel;
    let settings = AbelSettings::new(a.alpha, a.theta).map_err(err)?;
    let grid = build_grid(cfg.discretization.n_per_interval).map_err(err)?;
    let ws = AbelWorkspace::new(p, &grid).map_err(err)?;
    let mut f: Option<tspec_core::BrokenFunction> = None;
    for &k in &a.components {
        let u = ws.eigenfunction(k).map_err(err)?;
        f = Some(match f {
            None => u,
            Some(g) => g.combine(C64::from(1.0), &u, C64::from(1.0)).map_err(err)?,
        });
    }
    let f = f.ok_or("abel.components is empty")?;
    let f = f.scale(C64::from(1.0 / f.l2_norm()));
    let contour = ContourSettings {
        seed: seed.unwrap_or(ContourSettings::default().seed),
        ..Default::default()
    };
    let projectors = ws.projectors(a.mode_count, &contour).map_err(err)?;
    let study = ws
        .study(&f, &projectors, settings, &a.t_values)
        .map_err(err)?;
    let pass = study.monotone && study.max_idempotence_defect <= 1e-6;
    let mut table = String::from("t,error\n");
    for (t, e) in study.t_values.iter().zip(&study.errors) {
        table.push_str(&format!(
            "{},{}\n",
            output::full_precision(*t),
            output::full_precision(*e)
        ));
    }
    Ok(Outcome {
        files: vec![
            ("abel.csv".into(), table),
            (
                "abel.json".into(),
                output::to_json(&json!({ "study": study, "pass": pass }))?,
            ),
        ],
        primary: 0,
        pass,
    })
}

fn verify(cfg: &RunConfig, p: &TransmissionProblem) -> Res<Outcome> {
    let reports = run_checks(p, &cfg.verify);
    let pass = reports.iter().all(|r| r.status != tspec_core::Status::Fail);
    Ok(Outcome {
        files: vec![("verify.json".into(), output::to_json(&reports)?)],
        primary: 0,
        pass,
    })
}

fn report(cfg: &RunConfig, p: &TransmissionProblem, seed: Option<u64>) -> Res<Outcome> {
    let s = solve(cfg, p)?;
    let a = asymptotics(cfg, p, None)?;
    let parts = [
        ("asymptotics", Ok(a)),
        ("abel", abel(cfg, p, seed)),
        ("verify", verify(cfg, p)),
    ];
    let mut files = s.files;
    let mut summary = serde_json::Map::new();
    let mut pass = true;
    for (name, part) in parts {
        match part {
            Ok(o) => {
                pass &= o.pass;
                let json_file = o
                    .files
                    .iter()
                    .find(|f| f.0.ends_with(".json"))
                    .map(|f| f.1.clone());
                if let Some(body) = json_file {
                    let v: Value = serde_json::from_str(&body).map_err(|e| e.to_string())?;
                    summary.insert(name.into(), v);
                }
                files.extend(o.files);
            }
            Err(e) => {
                pass = false;
                summary.insert(name.into(), json!({ "error": e }));
            }
        }
    }
    summary.insert("pass".into(), json!(pass));
    files.push((
        "report.json".into(),
        output::to_json(&Value::Object(summary))?,
    ));
    let primary = files.len() - 1;
    Ok(Outcome {
        files,
        primary,
        pass,
    })
}
