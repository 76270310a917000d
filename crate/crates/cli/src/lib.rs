//! Command-line front end.
//!
//! Exit codes: 0 on success, 1 on bad input (flags, unreadable or invalid
//! instance files), 2 when a proven inequality fails, which always points
//! at a defect in the library.

use std::fmt::Write as _;
use std::io::Write;
use std::path::{Path, PathBuf};

use bitrade::geometry::{bound_report, decompose_expected, decompose_fixed_v};
use bitrade::mechanism::{equilibrium, first_best};
use bitrade::montecarlo::{simulate_fb, simulate_mechanism};
use bitrade::ratio::optimize_lambda;
use bitrade::search::worst_case_search;
use bitrade::{BoundReport, Error, RawInstance, SearchConfig, TradeInstance};
use clap::{Parser, Subcommand, ValueEnum};
use serde::Serialize;

#[derive(Debug, Parser)]
#[command(name = "bitrade", version, about = "Gains from trade of the random proposer mechanism")]
pub struct Cli {
    /// Output format; csv is only available for `sweep`.
    #[arg(long, value_enum, default_value_t = Format::Json, global = true)]
    pub format: Format,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Csv,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// First-best gains from trade.
    Fb {
        #[arg(long)]
        instance: PathBuf,
    },
    /// Canonical best-response equilibrium of the random proposer mechanism.
    Eq {
        #[arg(long)]
        instance: PathBuf,
    },
    /// Areas S, B, A and deviation utilities, at one buyer value or averaged
    /// over the buyer prior.
    Decompose {
        #[arg(long)]
        instance: PathBuf,
        #[arg(long = "v")]
        v: Option<f64>,
        #[arg(long, default_value_t = 0.5)]
        lambda: f64,
    },
    /// Every proven identity and inequality with signed slacks.
    Verify {
        #[arg(long)]
        instance: PathBuf,
        #[arg(long, default_value_t = 0.5)]
        lambda: f64,
    },
    /// Optimal scaling parameter and ratio constant.
    LambdaOpt {
        #[arg(long, default_value_t = 1e-12)]
        tol: f64,
    },
    /// Monte Carlo estimates of the first best and the mechanism.
    Simulate {
        #[arg(long)]
        instance: PathBuf,
        #[arg(long, default_value_t = 1_000_000)]
        trials: u64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Hill-climbing search for instances with a large FB/GFT ratio.
    Search {
        #[arg(long, default_value_t = 8)]
        atoms: usize,
        #[arg(long, default_value_t = 1000)]
        iters: usize,
        #[arg(long, default_value_t = 4)]
        restarts: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 0.1)]
        step_scale: f64,
        #[arg(long, default_value_t = 0.0)]
        lo: f64,
        #[arg(long, default_value_t = 1.0)]
        hi: f64,
    },
    /// `verify` over a grid of scaling parameters `A:B:N`.
    Sweep {
        #[arg(long)]
        instance: PathBuf,
        #[arg(long = "lambda-grid")]
        lambda_grid: String,
    },
}

/// Failure of a command, carrying its exit code.
#[derive(Debug)]
pub struct Failure {
    pub code: i32,
    pub message: String,
    /// Output produced before the failure was detected.
    pub partial: Option<String>,
}

impl Failure {
    fn input(message: impl Into<String>) -> Self {
        Self {
            code: 1,
            message: message.into(),
            partial: None,
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::InvariantViolation { .. } => 2,
            _ => 1,
        };
        Self {
            code,
            message: e.to_string(),
            partial: None,
        }
    }
}

pub fn load_instance(path: &Path) -> Result<TradeInstance, Failure> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Failure::input(format!("cannot read {}: {e}", path.display())))?;
    let raw: RawInstance = serde_json::from_str(&text)
        .map_err(|e| Failure::input(format!("cannot parse {}: {e}", path.display())))?;
    Ok(raw.validate()?)
}

fn to_json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("reports serialize");
    s.push('\n');
    s
}

/// Parses `A:B:N` into grid points. `N = 1` requires `A = B`.
pub fn parse_grid(spec: &str) -> Result<Vec<f64>, Failure> {
    let bad = || Failure::input(format!("invalid lambda grid {spec:?}; expected A:B:N"));
    let parts: Vec<&str> = spec.split(':').collect();
    let [a, b, n] = parts.as_slice() else {
        return Err(bad());
    };
    let a: f64 = a.trim().parse().map_err(|_| bad())?;
    let b: f64 = b.trim().parse().map_err(|_| bad())?;
    let n: usize = n.trim().parse().map_err(|_| bad())?;
    let inside = |x: f64| x > 0.0 && x < 1.0;
    if !(inside(a) && inside(b)) {
        return Err(Failure::input(format!("lambda grid {spec:?} must lie inside (0, 1)")));
    }
    match n {
        0 => Err(bad()),
        1 if a == b => Ok(vec![a]),
        1 => Err(Failure::input("a single-point grid needs A = B")),
        _ if a < b => {
            let step = (b - a) / (n - 1) as f64;
            Ok((0..n)
                .map(|i| if i == n - 1 { b } else { a + step * i as f64 })
                .collect())
        }
        _ => Err(Failure::input(format!("lambda grid {spec:?} needs A < B"))),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SweepRow {
    pub lambda: f64,
    pub fb: f64,
    #[serde(rename = "u_B")]
    pub u_b: f64,
    #[serde(rename = "u_S")]
    pub u_s: f64,
    #[serde(rename = "E_A")]
    pub expected_area_a: f64,
    #[serde(rename = "E_u_S_geom")]
    pub expected_u_s_geom: f64,
    pub slack_i: f64,
    pub slack_ii: f64,
    pub slack_iii: f64,
    pub slack_iv: f64,
    pub slack_v: f64,
    pub ratio_bound: f64,
}

impl From<&BoundReport> for SweepRow {
    fn from(r: &BoundReport) -> Self {
        Self {
            lambda: r.lambda,
            ratio_bound: r.ratio_bound,
            fb: r.fb,
            u_b: r.u_b,
            u_s: r.u_s,
            expected_area_a: r.expected_area_a,
            expected_u_s_geom: r.expected_u_s_geom,
            slack_i: r.slacks.identity,
            slack_ii: r.slacks.area_a,
            slack_iii: r.slacks.seller_bound,
            slack_iv: r.slacks.mirrored_bound,
            slack_v: r.slacks.averaged,
        }
    }
}

pub const SWEEP_HEADER: &str =
    "lambda,fb,u_B,u_S,E_A,E_u_S_geom,slack_i,slack_ii,slack_iii,slack_iv,slack_v,ratio_bound";

fn sweep_csv(rows: &[SweepRow]) -> String {
    let mut out = String::from(SWEEP_HEADER);
    out.push('\n');
    for r in rows {
        let fields = [
            r.lambda,
            r.fb,
            r.u_b,
            r.u_s,
            r.expected_area_a,
            r.expected_u_s_geom,
            r.slack_i,
            r.slack_ii,
            r.slack_iii,
            r.slack_iv,
            r.slack_v,
            r.ratio_bound,
        ];
        let line: Vec<String> = fields.iter().map(|x| format!("{x:?}")).collect();
        let _ = writeln!(out, "{}", line.join(","));
    }
    out
}

#[derive(Serialize)]
struct FbOutput {
    fb: f64,
}

#[derive(Serialize)]
struct SimulateOutput {
    fb: bitrade::SimEstimate,
    mechanism: bitrade::MechanismEstimate,
}

/// Runs a parsed command and returns its standard output.
pub fn execute(cli: &Cli) -> Result<String, Failure> {
    if cli.format == Format::Csv && !matches!(cli.command, Command::Sweep { .. }) {
        return Err(Failure::input("--format csv is only available for sweep"));
    }
    match &cli.command {
        Command::Fb { instance } => {
            let i = load_instance(instance)?;
            Ok(to_json(&FbOutput { fb: first_best(&i) }))
        }
        Command::Eq { instance } => Ok(to_json(&equilibrium(&load_instance(instance)?))),
        Command::Decompose { instance, v, lambda } => {
            let i = load_instance(instance)?;
            match v {
                Some(v) => Ok(to_json(&decompose_fixed_v(*v, &i.seller, *lambda)?)),
                None => Ok(to_json(&decompose_expected(&i, *lambda)?)),
            }
        }
        Command::Verify { instance, lambda } => {
            let i = load_instance(instance)?;
            let report = bound_report(&i, *lambda)?;
            let text = to_json(&report);
            report.check().map_err(|e| Failure {
                partial: Some(text.clone()),
                ..Failure::from(e)
            })?;
            Ok(text)
        }
        Command::LambdaOpt { tol } => Ok(to_json(&optimize_lambda(*tol)?)),
        Command::Simulate {
            instance,
            trials,
            seed,
        } => {
            let i = load_instance(instance)?;
            Ok(to_json(&SimulateOutput {
                fb: simulate_fb(&i, *trials, *seed)?,
                mechanism: simulate_mechanism(&i, *trials, *seed)?,
            }))
        }
        Command::Search {
            atoms,
            iters,
            restarts,
            seed,
            step_scale,
            lo,
            hi,
        } => {
            let cfg = SearchConfig {
                atoms_per_side: *atoms,
                value_range: (*lo, *hi),
                iterations: *iters,
                restarts: *restarts,
                seed: *seed,
                step_scale: *step_scale,
            };
            Ok(to_json(&worst_case_search(&cfg)?))
        }
        Command::Sweep {
            instance,
            lambda_grid,
        } => {
            let grid = parse_grid(lambda_grid)?;
            let i = load_instance(instance)?;
            let mut rows = Vec::with_capacity(grid.len());
            let mut violation = None;
            for lambda in grid {
                let report = bound_report(&i, lambda)?;
                if violation.is_none() {
                    violation = report.check().err();
                }
                rows.push(SweepRow::from(&report));
            }
            let text = match cli.format {
                Format::Json => to_json(&rows),
                Format::Csv => sweep_csv(&rows),
            };
            match violation {
                Some(e) => Err(Failure {
                    partial: Some(text),
                    ..Failure::from(e)
                }),
                None => Ok(text),
            }
        }
    }
}

/// Parses `args` (including the program name), runs the command, writes to
/// the given streams, and returns the process exit code.
pub fn run<I, S>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = S>,
    S: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            let text = e.render().to_string();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => {
                    let _ = stdout.write_all(text.as_bytes());
                    0
                }
                _ => {
                    let _ = stderr.write_all(text.as_bytes());
                    1
                }
            };
        }
    };
    match execute(&cli) {
        Ok(text) => {
            let _ = stdout.write_all(text.as_bytes());
            0
        }
        Err(f) => {
            if let Some(text) = &f.partial {
                let _ = stdout.write_all(text.as_bytes());
            }
            let _ = writeln!(stderr, "error: {}", f.message);
            f.code
        }
    }
}
