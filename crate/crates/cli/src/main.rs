//! `timedreach check`: acceptance probability of a chain under an automaton.
//!
//! Exit codes: 0 success, 1 usage error, 2 invalid model, 3 no convergence.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use timedreach::grid::{check_grid, GridSpec};
use timedreach::io::{load_ctmc, load_dta};
use timedreach::muller::{check_muller, qualitative_check, MullerEngine, MullerMode, QualitativeMode};
use timedreach::sim::{simulate_report, SimConfig};
use timedreach::single_clock::{solve_single_clock, DEFAULT_EPSILON};
use timedreach::timed::{time_bound_transform, validate_dta};
use timedreach::{build_product, Acceptance, Ctmc, Dta, Error, RegionGraph, VerificationReport};

#[derive(Parser, Debug)]
#[command(name = "timedreach", version, about = "Acceptance probabilities of CTMC paths by deterministic timed automata")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Compute the probability that the automaton accepts the chain's paths.
    Check(CheckArgs),
}

#[derive(Parser, Debug)]
struct CheckArgs {
    /// Chain in JSON.
    #[arg(long)]
    ctmc: PathBuf,
    /// Automaton in JSON.
    #[arg(long)]
    dta: PathBuf,
    #[arg(long, value_enum, default_value_t = MethodArg::Auto)]
    method: MethodArg,
    /// Graph-only check instead of a probability (implies --method qualitative).
    #[arg(long, value_enum)]
    qualitative: Option<QualitativeArg>,
    /// Only count acceptance within this many time units.
    #[arg(long)]
    time_bound: Option<f64>,
    #[arg(long, default_value_t = 0.01)]
    grid_step: f64,
    /// Truncation error of each transient computation.
    #[arg(long, default_value_t = DEFAULT_EPSILON)]
    epsilon: f64,
    #[arg(long, default_value_t = 100_000)]
    samples: u64,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Automaton steps per sampled path before it counts as undecided.
    #[arg(long, default_value_t = 10_000)]
    max_steps: usize,
    #[arg(long, value_enum, default_value_t = Format::Json)]
    format: Format,
    /// Write the simplified region graph (before pruning) in dot format.
    #[arg(long, value_name = "PATH")]
    dump_region_graph: Option<PathBuf>,
    /// Expected acceptance kind of the automaton file.
    #[arg(long, value_enum)]
    acceptance: Option<AcceptanceArg>,
    #[arg(long, value_enum, default_value_t = MullerModeArg::Exact)]
    muller_mode: MullerModeArg,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum MethodArg {
    Auto,
    SingleClock,
    Grid,
    Simulate,
    Qualitative,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum QualitativeArg {
    Positive,
    AlmostSure,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Json,
    Text,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum AcceptanceArg {
    Finite,
    Muller,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum MullerModeArg {
    Exact,
    Containment,
}

#[derive(Debug)]
enum Failure {
    Usage(String),
    Engine(Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Engine(e)
    }
}

impl Failure {
    fn exit_code(&self) -> u8 {
        match self {
            Failure::Usage(_) => 1,
            Failure::Engine(e) if e.is_validation() => 2,
            Failure::Engine(Error::NonConvergence { .. } | Error::Numerical(_)) => 3,
            Failure::Engine(_) => 1,
        }
    }
}

impl std::fmt::Display for Failure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Failure::Usage(m) => f.write_str(m),
            Failure::Engine(e) => e.fmt(f),
        }
    }
}

/// Adds the time-bound clock and rescales rates to match its constants.
fn bounded(c: &Ctmc, a: &Dta, t_f: f64) -> Result<(Ctmc, Dta, u64), Error> {
    let b = time_bound_transform(&validate_dta(a)?.dta, t_f)?;
    Ok((c.with_rates_scaled(1.0 / b.scale as f64), b.dta, b.scale))
}

fn check(args: &CheckArgs) -> Result<VerificationReport, Failure> {
    let c = load_ctmc(&args.ctmc)?;
    let a = load_dta(&args.dta)?;
    let muller = matches!(a.acceptance(), Acceptance::Muller(_));
    if let Some(kind) = args.acceptance {
        if (kind == AcceptanceArg::Muller) != muller {
            return Err(Failure::Usage(format!(
                "--acceptance {} given, but {} has {} acceptance",
                if muller { "finite" } else { "muller" },
                args.dta.display(),
                if muller { "Muller" } else { "finite" }
            )));
        }
    }
    let muller_mode = match args.muller_mode {
        MullerModeArg::Exact => MullerMode::Exact,
        MullerModeArg::Containment => MullerMode::Containment,
    };
    let (c, a, scale) = match args.time_bound {
        Some(_) if muller => {
            return Err(Failure::Usage("--time-bound needs finite acceptance".into()))
        }
        Some(t) => bounded(&c, &a, t)?,
        None => (c, a, 1),
    };
    if let Some(path) = &args.dump_region_graph {
        let m = build_product(&c, &validate_dta(&a)?.dta)?;
        std::fs::write(path, RegionGraph::simplified(&m)?.to_dot()).map_err(Error::from)?;
    }
    let method = match (args.qualitative, args.method) {
        (Some(_), MethodArg::Auto | MethodArg::Qualitative) => MethodArg::Qualitative,
        (Some(_), m) => {
            return Err(Failure::Usage(format!(
                "--qualitative cannot be combined with --method {}",
                m.to_possible_value().map(|v| v.get_name().to_string()).unwrap_or_default()
            )))
        }
        (None, MethodArg::Auto) if a.num_clocks() <= 1 => MethodArg::SingleClock,
        (None, MethodArg::Auto) => MethodArg::Grid,
        (None, m) => m,
    };
    let spec = GridSpec::with_step(args.grid_step);
    let mut report = match method {
        MethodArg::SingleClock if muller => check_muller(
            &c,
            &a,
            &MullerEngine::SingleClock {
                epsilon: args.epsilon,
            },
            muller_mode,
        )?,
        MethodArg::SingleClock => solve_single_clock(&c, &a, args.epsilon)?,
        MethodArg::Grid if muller => check_muller(&c, &a, &MullerEngine::Grid(spec), muller_mode)?,
        MethodArg::Grid => check_grid(&c, &a, &spec)?,
        MethodArg::Simulate => simulate_report(
            &c,
            &a,
            &SimConfig {
                samples: args.samples,
                max_steps: args.max_steps,
                seed: args.seed,
                muller_mode,
                ..SimConfig::default()
            },
        )?,
        MethodArg::Qualitative => {
            let mode = match args.qualitative.unwrap_or(QualitativeArg::Positive) {
                QualitativeArg::Positive => QualitativeMode::Positive,
                QualitativeArg::AlmostSure => QualitativeMode::AlmostSure,
            };
            qualitative_check(&c, &a, mode, muller_mode)?.1
        }
        MethodArg::Auto => unreachable!("auto is resolved above"),
    };
    if let Some(t) = args.time_bound {
        report.time_bound = Some(t);
        if scale > 1 && !report.warnings.iter().any(|w| w.starts_with("time scaled")) {
            report
                .warnings
                .push(format!("time scaled by {scale}: durations are in scaled units"));
        }
    }
    Ok(report)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    let Command::Check(args) = cli.command;
    match check(&args) {
        Ok(report) => {
            match args.format {
                Format::Json => println!(
                    "{}",
                    serde_json::to_string_pretty(&report).expect("report serializes")
                ),
                Format::Text => print!("{}", report.render_text()),
            }
            ExitCode::SUCCESS
        }
        Err(f) => {
            eprintln!("error: {f}");
            ExitCode::from(f.exit_code())
        }
    }
}
