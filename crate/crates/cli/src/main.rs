//! `tsspec`: validate, solve, verify and convert self-adjoint dynamic
//! eigenvalue problems on isolated time scales.
//!
//! Exit codes: 0 all checks pass, 1 a check or invariant failed,
//! 2 usage, I/O or parse error. `TSSPEC_TOL` overrides the default
//! tolerance; `--tol` overrides both.

mod convert;
mod report;

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Parser, Subcommand, ValueEnum};
use rayon::prelude::*;
use serde_json::{json, Value};
use tsspec::generate::sweep_problem;
use tsspec::problem::{matrix_to_json, problem_from_json, validate, DEFAULT_TOL, SCHEMA_VERSION};
use tsspec::spectral::solve_spectrum_with_tol;
use tsspec::timescale::make_scale;
use tsspec::verify::{verify_problem, Check, ProblemVerification, VerifyOptions};
use tsspec::{Error, ScaleKind, SpectralProblem};

use report::{ErrorInfo, InputInfo, RunReport, Tolerances};

#[derive(Parser)]
#[command(
    name = "tsspec",
    version,
    about = "Self-adjoint spectral problems on finite isolated time scales"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args)]
struct Common {
    /// Tolerance (overrides TSSPEC_TOL).
    #[arg(long)]
    tol: Option<f64>,
    /// Write the report here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Check the standing hypotheses of a problem file.
    Validate {
        problem: PathBuf,
        #[command(flatten)]
        common: Common,
    },
    /// Solve a problem and report r, m, eigenvalues and residuals.
    Solve {
        problem: PathBuf,
        #[command(flatten)]
        common: Common,
    },
    /// Run every invariant suite on a problem file or on random problems.
    Verify {
        /// Problem file (omit with --random).
        problem: Option<PathBuf>,
        /// D N SEED COUNT: COUNT random self-adjoint problems of size d, N.
        #[arg(long, num_args = 4, value_names = ["D", "N", "SEED", "COUNT"], conflicts_with = "problem")]
        random: Option<Vec<u64>>,
        /// Seed for the random test functions (file mode).
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Random samples per suite (Lagrange pairs, admissible pairs, Parseval).
        #[arg(long, default_value_t = 10)]
        samples: usize,
        #[command(flatten)]
        common: Common,
    },
    /// Convert between second-order, Sturm–Liouville, Hamiltonian and symplectic forms.
    Convert {
        #[arg(long, value_enum)]
        mode: convert::Mode,
        input: PathBuf,
        #[command(flatten)]
        common: Common,
    },
    /// Generate a time scale with N + 2 points (indices −1..=N).
    MakeTimescale {
        kind: KindArg,
        /// N: the scale has N + 2 points.
        #[arg(long = "n")]
        n: usize,
        /// Step for `uniform`.
        #[arg(long, default_value_t = 1.0)]
        h: f64,
        /// Ratio for `qscale`.
        #[arg(long, default_value_t = 2.0)]
        q: f64,
        /// Value at `a` for `qscale`.
        #[arg(long, default_value_t = 1.0)]
        t0: f64,
        /// Points for `explicit` (comma separated).
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        points: Vec<f64>,
        /// Seed for `random`.
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum KindArg {
    Uniform,
    Qscale,
    Explicit,
    Random,
}

/// A failure that ends the run with an exit code.
struct Fail {
    code: u8,
    message: String,
}

impl Fail {
    fn usage(message: impl Into<String>) -> Self {
        Self {
            code: 2,
            message: message.into(),
        }
    }
}

/// Parse, I/O and schema problems are usage errors; everything else is a
/// failed check.
fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Parse(_)
        | Error::SchemaVersionMismatch { .. }
        | Error::Io(_)
        | Error::NonFinite { .. } => 2,
        _ => 1,
    }
}

fn resolve_tol(flag: Option<f64>) -> Result<(f64, &'static str), Fail> {
    let checked = |v: f64, what: &str| {
        if v.is_finite() && v > 0.0 {
            Ok(v)
        } else {
            Err(Fail::usage(format!(
                "{what} must be a positive number, got {v}"
            )))
        }
    };
    if let Some(v) = flag {
        return Ok((checked(v, "--tol")?, "flag"));
    }
    match std::env::var("TSSPEC_TOL") {
        Ok(s) => {
            let v: f64 = s
                .trim()
                .parse()
                .map_err(|_| Fail::usage(format!("TSSPEC_TOL is not a number: {s:?}")))?;
            Ok((checked(v, "TSSPEC_TOL")?, "env"))
        }
        Err(_) => Ok((DEFAULT_TOL, "default")),
    }
}

fn read_input(path: &Path) -> Result<(String, InputInfo), Fail> {
    let bytes = std::fs::read(path).map_err(|e| Fail::usage(format!("{}: {e}", path.display())))?;
    let info = InputInfo::file(path, &bytes);
    let text =
        String::from_utf8(bytes).map_err(|e| Fail::usage(format!("{}: {e}", path.display())))?;
    Ok((text, info))
}

fn load(path: &Path) -> Result<(SpectralProblem, InputInfo), Fail> {
    let (text, info) = read_input(path)?;
    let p = problem_from_json(&text).map_err(|e| Fail {
        code: 2,
        message: format!("{}: {e}", path.display()),
    })?;
    Ok((p, info))
}

struct Outcome {
    report: RunReport,
    out: Option<PathBuf>,
}

fn finish(
    command: &'static str,
    input: InputInfo,
    seed: Option<u64>,
    tolerances: Tolerances,
    outcome: Result<(Value, bool), Error>,
    start: Instant,
    out: Option<PathBuf>,
) -> Outcome {
    let (result, pass, error) = match outcome {
        Ok((v, pass)) => (v, pass, None),
        Err(e) => (Value::Null, false, Some(ErrorInfo::from_error(&e))),
    };
    Outcome {
        report: RunReport {
            schema_version: report::REPORT_SCHEMA_VERSION,
            command,
            input,
            seed,
            tolerances,
            pass,
            error,
            result,
            wall_time_s: start.elapsed().as_secs_f64(),
        },
        out,
    }
}

fn solve_result(p: &SpectralProblem, tol: f64) -> Result<(Value, bool), Error> {
    let res = solve_spectrum_with_tol(p, tol)?;
    let eigenfunctions: Vec<Value> = res
        .eigenfunctions
        .iter()
        .map(|f| json!({ "lo": f.lo(), "values": f.values().iter().map(matrix_to_json).collect::<Vec<_>>() }))
        .collect();
    let worst = res.relative_residuals.iter().copied().fold(0.0, f64::max);
    let dec = &res.space.decomposition;
    let pass = worst <= 1e-9 && res.asymmetry <= 1e-10;
    Ok((
        json!({
            "d": p.d(),
            "N": p.n(),
            "r": res.r,
            "m": res.m,
            "proper": res.r == 2 * p.d(),
            "eigenvalues": res.eigenvalues,
            "residuals": res.residuals,
            "relative_residuals": res.relative_residuals,
            "max_relative_residual": worst,
            "operator_asymmetry": res.asymmetry,
            "closure_residual": res.operator.closure_residual,
            "gamma_decomposition": dec.residuals,
            "gram_min_eigenvalue": res.space.gram_min_eigenvalue,
            "eigenfunctions": eigenfunctions,
        }),
        pass,
    ))
}

/// Per-check maxima over all problems, in first-seen order.
fn aggregate(results: &[ProblemVerification]) -> Vec<Value> {
    let mut names: Vec<String> = Vec::new();
    for r in results {
        for c in &r.checks {
            if !names.contains(&c.name) {
                names.push(c.name.clone());
            }
        }
    }
    names
        .iter()
        .map(|name| {
            let hits: Vec<&Check> = results
                .iter()
                .flat_map(|r| r.checks.iter().filter(|c| &c.name == name))
                .collect();
            let run: Vec<&&Check> = hits.iter().filter(|c| !c.skipped).collect();
            let max = run.iter().map(|c| c.value).fold(0.0, f64::max);
            let failed = run.iter().filter(|c| !c.passed).count();
            json!({
                "name": name,
                "max_defect": max,
                "tol": run.first().map(|c| c.tol).or(hits.first().map(|c| c.tol)).unwrap_or(0.0),
                "runs": run.len(),
                "skipped": hits.len() - run.len(),
                "failed": failed,
                "passed": failed == 0,
            })
        })
        .collect()
}

fn verify_summary(index: usize, v: &ProblemVerification) -> Value {
    let failed: Vec<&str> = v
        .checks
        .iter()
        .filter(|c| !c.passed)
        .map(|c| c.name.as_str())
        .collect();
    json!({ "index": index, "d": v.d, "N": v.n, "r": v.r, "m": v.m, "pass": v.pass, "failed_checks": failed })
}

/// `Ok(None)` for commands that write their own output.
fn run(cli: Cli) -> Result<Option<Outcome>, Fail> {
    let start = Instant::now();
    match cli.command {
        Command::Validate { problem, common } => {
            let (tol, source) = resolve_tol(common.tol)?;
            let (p, info) = load(&problem)?;
            let rep = validate(&p, tol);
            let pass = rep.pass;
            let value = serde_json::to_value(rep).expect("serializable");
            Ok(Some(finish(
                "validate",
                info,
                None,
                tolerances(tol, source, None),
                Ok((value, pass)),
                start,
                common.out,
            )))
        }
        Command::Solve { problem, common } => {
            let (tol, source) = resolve_tol(common.tol)?;
            let (p, info) = load(&problem)?;
            let outcome = solve_result(&p, tol);
            Ok(Some(finish(
                "solve",
                info,
                None,
                tolerances(tol, source, None),
                outcome,
                start,
                common.out,
            )))
        }
        Command::Verify {
            problem,
            random,
            seed,
            samples,
            common,
        } => {
            let (tol, source) = resolve_tol(common.tol)?;
            let opts = VerifyOptions {
                tol,
                lagrange_pairs: samples,
                admissible_pairs: samples,
                parseval_samples: samples,
                ..VerifyOptions::default()
            };
            let opts_value = serde_json::to_value(&opts).expect("serializable");
            match (problem, random) {
                (Some(path), None) => {
                    let (p, info) = load(&path)?;
                    let v = verify_problem(&p, seed, &opts);
                    let pass = v.pass;
                    let value = json!({
                        "checks": v.checks,
                        "r": v.r,
                        "m": v.m,
                        "eigenvalues": v.eigenvalues,
                        "failed_checks": v.checks.iter().filter(|c| !c.passed).map(|c| c.name.clone()).collect::<Vec<_>>(),
                    });
                    Ok(Some(finish(
                        "verify",
                        info,
                        Some(seed),
                        tolerances(tol, source, Some(opts_value)),
                        Ok((value, pass)),
                        start,
                        common.out,
                    )))
                }
                (None, Some(args)) => {
                    let [d, n, rseed, count] = args[..] else {
                        return Err(Fail::usage("--random takes D N SEED COUNT"));
                    };
                    if d == 0 || n < 2 {
                        return Err(Fail::usage("--random needs D ≥ 1 and N ≥ 2"));
                    }
                    let (d, n, count) = (d as usize, n as usize, count as usize);
                    let results: Vec<ProblemVerification> = (0..count)
                        .into_par_iter()
                        .map(|i| {
                            let p = sweep_problem(d, n, rseed, i).problem;
                            verify_problem(&p, rseed.wrapping_add(i as u64), &opts)
                        })
                        .collect();
                    let pass = results.iter().all(|r| r.pass);
                    let value = json!({
                        "d": d,
                        "N": n,
                        "count": count,
                        "checks": aggregate(&results),
                        "problems": results.iter().enumerate().map(|(i, v)| verify_summary(i, v)).collect::<Vec<_>>(),
                    });
                    let info = InputInfo::generated(&format!(
                        "random d={d} N={n} seed={rseed} count={count}"
                    ));
                    Ok(Some(finish(
                        "verify",
                        info,
                        Some(rseed),
                        tolerances(tol, source, Some(opts_value)),
                        Ok((value, pass)),
                        start,
                        common.out,
                    )))
                }
                _ => Err(Fail::usage(
                    "verify needs a problem file or --random D N SEED COUNT",
                )),
            }
        }
        Command::Convert {
            mode,
            input,
            common,
        } => {
            let (tol, source) = resolve_tol(common.tol)?;
            let (text, info) = read_input(&input)?;
            let parsed = convert::parse_input(mode, &text).map_err(|e| Fail {
                code: exit_code(&e),
                message: format!("{}: {e}", input.display()),
            })?;
            let outcome = convert::run(parsed, tol);
            Ok(Some(finish(
                "convert",
                info,
                None,
                tolerances(tol, source, None),
                outcome,
                start,
                common.out,
            )))
        }
        Command::MakeTimescale {
            kind,
            n,
            h,
            q,
            t0,
            points,
            seed,
            out,
        } => {
            let kind = match kind {
                KindArg::Uniform => ScaleKind::Uniform { h },
                KindArg::Qscale => ScaleKind::Qscale { q, t0 },
                KindArg::Explicit => ScaleKind::Explicit { points },
                KindArg::Random => ScaleKind::Random { seed },
            };
            let scale = make_scale(&kind, n).map_err(|e| Fail::usage(e.to_string()))?;
            let value = json!({
                "schema_version": SCHEMA_VERSION,
                "kind": kind,
                "N": n,
                "scale": scale.points(),
            });
            let text = serde_json::to_string_pretty(&value).expect("serializable") + "\n";
            match &out {
                Some(path) => std::fs::write(path, text)
                    .map_err(|e| Fail::usage(format!("{}: {e}", path.display())))?,
                None => print!("{text}"),
            }
            Ok(None)
        }
    }
}

fn tolerances(tol: f64, source: &'static str, checks: Option<Value>) -> Tolerances {
    Tolerances {
        tol,
        source,
        checks,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(None) => ExitCode::SUCCESS,
        Ok(Some(Outcome { report, out })) => {
            if let Err(e) = report.emit(out.as_deref()) {
                eprintln!("error: {e}");
                return ExitCode::from(2);
            }
            if let Some(err) = &report.error {
                eprintln!("error: {}", err.message);
            }
            ExitCode::from(if report.pass { 0 } else { 1 })
        }
        Err(Fail { code, message }) => {
            if !message.is_empty() {
                eprintln!("error: {message}");
            }
            ExitCode::from(code)
        }
    }
}
