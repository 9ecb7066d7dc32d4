//! `poa`: solve games, compute prices of anarchy and distances, and run
//! sensitivity and convergence experiments from JSON game files.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::{json, Value};

use poa_core::convergence::{
    converge_down, converge_up, fit_rate, DemandPattern, DemandSchedule, RateAxis,
};
use poa_core::io::{self, IoError, RunManifest};
use poa_core::metric::{check_metric_axioms, dist, naive_distance, PerturbationKind};
use poa_core::sensitivity::{fit_hoelder, sweep, HoelderPoint};
use poa_core::solver::{
    approximation_threshold, check_approximation_bounds, cost_bounds, poa, solve_so, solve_we,
    SolveOptions, DEFAULT_MAX_ITER, DEFAULT_TOL,
};
use poa_core::transforms::{cost_normalize, demand_normalize, NormalizationFactor};
use poa_core::{Error, Game, DEFAULT_GRID};

#[derive(Parser)]
#[command(
    name = "poa",
    version,
    about = "Price of anarchy of non-atomic congestion games"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Wardrop equilibrium, or the social optimum with --so.
    Solve {
        game: PathBuf,
        #[arg(long)]
        so: bool,
        #[arg(long, default_value_t = DEFAULT_TOL)]
        tol: f64,
        #[arg(long, default_value_t = DEFAULT_MAX_ITER)]
        max_iter: usize,
    },
    /// Price of anarchy with the equilibrium and optimal costs.
    Poa {
        game: PathBuf,
        #[arg(long, default_value_t = DEFAULT_TOL)]
        tol: f64,
        #[arg(long, default_value_t = DEFAULT_MAX_ITER)]
        max_iter: usize,
    },
    /// Distance between two games on the same network.
    Dist {
        #[arg(long)]
        game_a: PathBuf,
        #[arg(long)]
        game_b: PathBuf,
        /// Also report the operator that ignores the demand-dependent domain.
        #[arg(long)]
        naive: bool,
    },
    /// Price-of-anarchy changes over random perturbations at several radii.
    Sweep {
        game: PathBuf,
        #[arg(long, value_enum)]
        kind: Kind,
        #[arg(long, value_delimiter = ',', default_value = "0.1,0.01,0.001,0.0001")]
        radii: Vec<f64>,
        #[arg(long, default_value_t = 16)]
        samples: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// CSV output; a manifest is written next to it.
        #[arg(long)]
        out: PathBuf,
    },
    /// Fit `log δ = log H + γ·log dist` to a sweep CSV.
    HolderFit {
        #[arg(long = "in")]
        input: PathBuf,
        /// Records with δ at or below this are censored.
        #[arg(long, default_value_t = 1e-12)]
        tol: f64,
    },
    /// Price of anarchy along a demand schedule towards 0 or infinity.
    Converge {
        game: PathBuf,
        #[arg(long, value_enum)]
        direction: Direction,
        #[arg(long, value_delimiter = ',', required = true)]
        totals: Vec<f64>,
        /// Let the demand ratios oscillate with this relative amplitude.
        #[arg(long)]
        drift: Option<f64>,
        #[arg(long, default_value_t = 1e-13)]
        tol: f64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Check the approximation inequalities, the solution sandwich, the metric
    /// axioms and invariance of the price of anarchy under normalization.
    Check {
        game: PathBuf,
        #[arg(long, default_value_t = 1e-12)]
        tol: f64,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Kind {
    Demand,
    Cost,
    Joint,
}

#[derive(Clone, Copy, ValueEnum)]
enum Direction {
    Up,
    Down,
}

enum Failure {
    Core(Error),
    Io(IoError),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Core(e)
    }
}

impl From<IoError> for Failure {
    fn from(e: IoError) -> Self {
        Failure::Io(e)
    }
}

impl Failure {
    fn code(&self) -> &'static str {
        match self {
            Failure::Core(e) => e.code(),
            Failure::Io(e) => e.code(),
        }
    }

    fn exit_code(&self) -> u8 {
        let c = match self {
            Failure::Core(e) => e.exit_code(),
            Failure::Io(IoError::Game { source, .. }) => source.exit_code(),
            Failure::Io(_) => 2,
        };
        c as u8
    }

    fn message(&self) -> String {
        match self {
            Failure::Core(e) => e.to_string(),
            Failure::Io(e) => e.to_string(),
        }
    }

    fn line(&self) -> Option<usize> {
        match self {
            Failure::Io(e) => e.line(),
            Failure::Core(_) => None,
        }
    }
}

type Outcome = Result<Value, Failure>;

fn read_input(path: &Path) -> Result<(Game, Vec<u8>), Failure> {
    let bytes = fs::read(path).map_err(|source| IoError::File {
        path: path.display().to_string(),
        source,
    })?;
    let text = String::from_utf8_lossy(&bytes);
    Ok((io::parse_game(&text)?, bytes))
}

fn to_value<T: Serialize>(v: &T) -> Value {
    serde_json::to_value(v).expect("serializable output")
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<(), Failure> {
    fs::write(path, bytes).map_err(|source| {
        IoError::File {
            path: path.display().to_string(),
            source,
        }
        .into()
    })
}

fn write_manifest(out: &Path, manifest: &RunManifest) -> Result<PathBuf, Failure> {
    let mut name = out.as_os_str().to_owned();
    name.push(".manifest.json");
    let path = PathBuf::from(name);
    write_file(
        &path,
        serde_json::to_string_pretty(manifest)
            .expect("serializable manifest")
            .as_bytes(),
    )?;
    Ok(path)
}

fn tolerances(pairs: &[(&str, f64)]) -> BTreeMap<String, f64> {
    pairs.iter().map(|(k, v)| (k.to_string(), *v)).collect()
}

fn run(cmd: Command) -> Outcome {
    match cmd {
        Command::Solve {
            game,
            so,
            tol,
            max_iter,
        } => {
            let (g, _) = read_input(&game)?;
            let opts = SolveOptions {
                max_iter,
                ..SolveOptions::with_tol(tol)
            };
            let r = if so {
                solve_so(&g, &opts)?
            } else {
                solve_we(&g, &opts)?
            };
            if !r.converged {
                return Err(Error::Unconverged {
                    iterations: r.iterations,
                    gap: r.duality_gap,
                    tol,
                }
                .into());
            }
            let mut v = to_value(&r);
            v["arcs"] = json!(g.structure().arcs());
            Ok(v)
        }
        Command::Poa {
            game,
            tol,
            max_iter,
        } => {
            let (g, _) = read_input(&game)?;
            let r = poa(
                &g,
                &SolveOptions {
                    max_iter,
                    ..SolveOptions::with_tol(tol)
                },
            )?;
            Ok(json!({
                "poa": r.poa,
                "equilibrium_cost": r.we.total_cost,
                "optimal_cost": r.so.total_cost,
                "optimum_certified": r.so.optimality_certified,
                "bounds": r.bounds,
            }))
        }
        Command::Dist {
            game_a,
            game_b,
            naive,
        } => {
            let (a, _) = read_input(&game_a)?;
            let (b, _) = read_input(&game_b)?;
            let mut v = json!({ "dist": dist(&a, &b)? });
            if naive {
                v["naive"] = to_value(&naive_distance(&a, &b, DEFAULT_GRID)?);
            }
            Ok(v)
        }
        Command::Sweep {
            game,
            kind,
            radii,
            samples,
            seed,
            out,
        } => {
            let (g, bytes) = read_input(&game)?;
            let kind = match kind {
                Kind::Demand => PerturbationKind::Demand,
                Kind::Cost => PerturbationKind::Cost,
                Kind::Joint => PerturbationKind::Joint,
            };
            let s = sweep(&g, kind, &radii, samples, seed)?;
            io::write_sweep_csv(&s.records, &out)?;
            let tol = radii
                .iter()
                .map(|r| poa_core::sensitivity::sweep_tolerance(*r))
                .fold(f64::INFINITY, f64::min);
            let manifest = write_manifest(
                &out,
                &RunManifest::new(
                    "sweep",
                    Some(seed),
                    tolerances(&[("solver", tol)]),
                    &[&bytes],
                ),
            )?;
            let points: Vec<HoelderPoint> = s
                .records
                .iter()
                .filter(|r| r.usable())
                .map(|r| HoelderPoint {
                    dist: r.dist.value,
                    dist_err: r.dist.error_bound,
                    delta: r.delta,
                })
                .collect();
            let fit = fit_hoelder(&points, tol).ok();
            Ok(json!({
                "records": s.records.len(),
                "failed": s.records.iter().filter(|r| !r.usable()).count(),
                "base_poa": s.base.poa,
                "certificates": s.certificates,
                "violations": s.violations(20.0).len(),
                "fit": fit,
                "out": out,
                "manifest": manifest,
            }))
        }
        Command::HolderFit { input, tol } => {
            let rows = io::read_sweep_csv(&input)?;
            let points: Vec<HoelderPoint> = rows.iter().map(HoelderPoint::from).collect();
            Ok(to_value(&fit_hoelder(&points, tol)?))
        }
        Command::Converge {
            game,
            direction,
            totals,
            drift,
            tol,
            out,
        } => {
            let (g, bytes) = read_input(&game)?;
            let pattern = match drift {
                Some(amplitude) => DemandPattern::DriftingRatio { amplitude },
                None => DemandPattern::FixedRatio,
            };
            let schedule = DemandSchedule::new(g.demands().to_vec(), totals, pattern)?;
            let opts = SolveOptions::with_tol(tol);
            let (points, axis) = match direction {
                Direction::Down => (converge_down(&g, &schedule, &opts)?, RateAxis::Total),
                Direction::Up => (converge_up(&g, &schedule, &opts)?, RateAxis::InverseLog),
            };
            io::write_rate_csv(&points, &out)?;
            let manifest = write_manifest(
                &out,
                &RunManifest::new("converge", None, tolerances(&[("solver", tol)]), &[&bytes]),
            )?;
            Ok(json!({
                "points": points,
                "fit": fit_rate(&points, axis, tol).ok(),
                "out": out,
                "manifest": manifest,
            }))
        }
        Command::Check { game, tol } => check(&game, tol),
    }
}

const CHECK_FACTORS: [f64; 3] = [0.5, 2.0, 10.0];

fn check(path: &Path, tol: f64) -> Outcome {
    let (g, _) = read_input(path)?;
    let opts = SolveOptions::with_tol(tol);
    let report = poa(&g, &opts)?;
    let mut failures = Vec::new();

    let uniform = g.uniform_flow();
    let eps = approximation_threshold(&g, &uniform)?;
    let m = g
        .costs()
        .iter()
        .map(|c| c.lipschitz_on(g.total_demand()))
        .fold(0.0, f64::max);
    let approximation = if m.is_finite() {
        let r = check_approximation_bounds(&g, &uniform, &report.we.flow, eps, m)?;
        if !r.all_hold() {
            failures.push("approximation inequalities".to_string());
        }
        to_value(&r)
    } else {
        Value::Null
    };

    let mut rho = Vec::new();
    let mut others = Vec::new();
    for u in CHECK_FACTORS {
        let u = NormalizationFactor::new(u)?;
        for (name, h) in [
            ("cost", cost_normalize(&g, u)?),
            ("demand", demand_normalize(&g, u)?),
        ] {
            let p = poa(&h, &opts)?.poa;
            if (p - report.poa).abs() > 1e-6 {
                failures.push(format!(
                    "{name} normalization by {} changes the price of anarchy",
                    u.get()
                ));
            }
            rho.push(json!({ "normalization": name, "factor": u.get(), "poa": p }));
            others.push(h);
        }
    }
    let axioms = check_metric_axioms(&g, &others[1], &others[3])?;
    if !axioms.ok() {
        failures.push("metric axioms".to_string());
    }
    let result = json!({
        "poa": report.poa,
        "bounds": cost_bounds(&g),
        "approximation": { "epsilon": eps, "lipschitz": if m.is_finite() { json!(m) } else { Value::Null }, "report": approximation },
        "normalizations": rho,
        "metric_axioms": axioms,
        "failures": failures,
    });
    if failures.is_empty() {
        Ok(result)
    } else {
        println!(
            "{}",
            serde_json::to_string_pretty(&result).expect("serializable output")
        );
        Err(Error::InvariantViolation(failures.join("; ")).into())
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(v) => {
            println!(
                "{}",
                serde_json::to_string_pretty(&v).expect("serializable output")
            );
            ExitCode::SUCCESS
        }
        Err(e) => {
            let mut v = json!({ "error": e.code(), "message": e.message() });
            if let Some(line) = e.line() {
                v["line"] = json!(line);
            }
            eprintln!("{v}");
            ExitCode::from(e.exit_code())
        }
    }
}
