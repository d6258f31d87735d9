use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use vibronic::par::{self, Execution};
use vibronic::scenarios::config::Format;
use vibronic::scenarios::{self, RunKind, ScenarioConfig};
use vibronic::Error;

#[derive(Parser, Debug)]
#[command(name = "vibronic", version, about = "Driven two-level atom with photoinduced vibronic coupling")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// TOML scenario file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory (overrides `output.directory`).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Output format (overrides `output.formats`).
    #[arg(long, global = true, value_enum)]
    format: Option<FormatArg>,
    /// Worker threads; 1 runs sequentially.
    #[arg(long, global = true)]
    workers: Option<usize>,
    /// Seed for randomized checks (overrides `run.seed`).
    #[arg(long, global = true)]
    seed: Option<u64>,
}

#[derive(Subcommand, Debug, Clone, Copy)]
enum Command {
    /// Time evolution with analytic comparisons.
    Simulate,
    /// Closed-form quantities over a parameter grid.
    Sweep,
    /// Run every self-check; exit 1 if any fails.
    Verify,
    /// Plan a cooling or heating pulse in SI units.
    PlanPulse,
}

impl Command {
    fn kind(self) -> RunKind {
        match self {
            Command::Simulate => RunKind::Simulate,
            Command::Sweep => RunKind::Sweep,
            Command::Verify => RunKind::Verify,
            Command::PlanPulse => RunKind::PlanPulse,
        }
    }
}

#[derive(ValueEnum, Debug, Clone, Copy)]
enum FormatArg {
    Csv,
    Json,
    Both,
}

fn load(cli: &Cli) -> vibronic::Result<ScenarioConfig> {
    let mut cfg = match &cli.config {
        Some(path) => scenarios::load_config(path)?,
        None => ScenarioConfig::default(),
    };
    let kind = cli.command.kind();
    if let Some(k) = cfg.run.kind {
        if k != kind {
            return Err(Error::Config {
                path: "run.kind".into(),
                reason: format!("config declares `{}` but `{}` was requested", k.name(), kind.name()),
            });
        }
    }
    cfg.run.kind = Some(kind);
    if kind == RunKind::Sweep && cfg.run.sweep.is_none() {
        return Err(Error::Config {
            path: "run.sweep".into(),
            reason: "sweep requires a [run.sweep] table".into(),
        });
    }
    if let Some(out) = &cli.out {
        cfg.output.directory = out.clone();
    }
    if let Some(f) = cli.format {
        cfg.output.formats = match f {
            FormatArg::Csv => vec![Format::Csv],
            FormatArg::Json => vec![Format::Json],
            FormatArg::Both => vec![Format::Csv, Format::Json],
        };
    }
    if let Some(seed) = cli.seed {
        cfg.run.seed = seed;
    }
    Ok(cfg)
}

/// Print a line, ignoring a closed stdout.
macro_rules! out {
    ($($arg:tt)*) => {{
        let _ = writeln!(std::io::stdout().lock(), $($arg)*);
    }};
}

fn run(cli: &Cli, cfg: &ScenarioConfig) -> vibronic::Result<bool> {
    let exec = if cli.workers == Some(1) {
        Execution::Sequential
    } else {
        Execution::Parallel
    };
    match cli.command {
        Command::Simulate => {
            let out = scenarios::run_simulate(cfg)?;
            for c in &out.summary.comparisons {
                let numeric = c.numeric.as_ref().map_or(f64::NAN, |f| f.value);
                out!(
                    "{}: analytic {:.10e} numeric {:.10e} rel_error {:.3e}",
                    c.quantity,
                    c.analytic,
                    numeric,
                    c.rel_error.unwrap_or(f64::NAN)
                );
            }
            for f in &out.summary.files {
                out!("wrote {f}");
            }
            Ok(true)
        }
        Command::Sweep => {
            let rows = scenarios::run_sweep(cfg, exec)?;
            out!("{} grid points written to {}", rows.len(), cfg.output.directory.display());
            Ok(true)
        }
        Command::Verify => {
            let report = scenarios::run_verify(cfg, exec)?;
            for c in &report.checks {
                out!(
                    "{} {}: measured {:.3e} tolerance {:.1e} ({})",
                    if c.passed { "PASS" } else { "FAIL" },
                    c.name,
                    c.measured,
                    c.tolerance,
                    c.detail
                );
            }
            out!("{}/{} checks passed", report.checks.len() - report.failures, report.checks.len());
            Ok(report.all_passed)
        }
        Command::PlanPulse => {
            let plan = scenarios::run_plan(cfg)?;
            out!("{}", serde_json::to_string_pretty(&plan)?);
            Ok(true)
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let cfg = match load(&cli) {
        Ok(cfg) => cfg,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    };
    match par::with_workers(cli.workers, || run(&cli, &cfg)) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e @ Error::Config { .. }) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
