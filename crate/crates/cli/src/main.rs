use std::collections::BTreeMap;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use morphic_cli::report::{apply_tolerances, check_tolerance_keys, verify_manifest, RunReport};
use morphic_cli::{config::ValidateConfig, suite, CliError, ScenarioConfig, ScenarioKind};

#[derive(Parser)]
#[command(name = "morphic", version, about = "Information-geometric quantum potential scenarios")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the scenario described by a TOML config.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Output directory; overrides `out_dir` in the config.
        #[arg(long, env = "MORPHIC_OUT_DIR")]
        out: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Run the invariant suite.
    Validate {
        /// Module to run; repeatable. All modules when absent.
        #[arg(long)]
        filter: Vec<String>,
        /// Tolerance override `name=value`; repeatable.
        #[arg(long = "tol", value_parser = parse_tol)]
        tol: Vec<(String, f64)>,
        /// Also write checks.txt and report.json here.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Convert a field CSV (with sidecar) to another format.
    Export {
        #[arg(long)]
        field: PathBuf,
        #[arg(long, value_enum)]
        format: ExportFormat,
        /// Write here instead of stdout.
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Re-hash every file listed in a report's manifest.
    Verify {
        #[arg(long)]
        report: PathBuf,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum ExportFormat {
    Json,
}

fn parse_tol(s: &str) -> Result<(String, f64), String> {
    let (k, v) = s.split_once('=').ok_or_else(|| format!("expected name=value, got `{s}`"))?;
    let v: f64 = v.trim().parse().map_err(|e| format!("`{v}`: {e}"))?;
    if !v.is_finite() || v < 0.0 {
        return Err(format!("tolerance must be finite and non-negative, got {v}"));
    }
    Ok((k.trim().to_string(), v))
}

const DEFAULT_OUT: &str = "morphic-out";

fn print_report(report: &RunReport) {
    for c in &report.checks {
        println!("{}", c.line());
    }
    println!(
        "{}: {} passed, {} failed ({:.2?})",
        report.scenario, report.summary.passed, report.summary.failed, report.wall_time
    );
}

fn outcome(report: &RunReport) -> Result<(), CliError> {
    if report.all_passed() {
        Ok(())
    } else {
        Err(CliError::CheckFailed { failed: report.summary.failed, total: report.summary.total })
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Run { config, out, seed } => {
            let mut cfg = ScenarioConfig::load(&config)?;
            if let Some(s) = seed {
                cfg.seed = s;
            }
            let dir = out.or_else(|| cfg.out_dir.clone()).unwrap_or_else(|| PathBuf::from(DEFAULT_OUT));
            let report = morphic_cli::run_scenario(&cfg, &dir)?;
            print_report(&report);
            outcome(&report)
        }
        Command::Validate { filter, tol, out } => {
            let tolerances: BTreeMap<String, f64> = tol.into_iter().collect();
            let mut cfg = ScenarioConfig::minimal(ScenarioKind::Validate);
            cfg.validate = Some(ValidateConfig { filter: filter.clone() });
            cfg.tolerances = tolerances.clone();
            cfg.validate()?;
            let report = match out {
                Some(dir) => morphic_cli::run_scenario(&cfg, &dir)?,
                None => {
                    check_tolerance_keys(tolerances.keys(), &suite::check_names(&filter))?;
                    let start = std::time::Instant::now();
                    let checks = apply_tolerances(suite::run_suite(&filter)?, &tolerances);
                    let mut r = RunReport::new("validate", cfg.seed, serde_json::Value::Null, checks);
                    r.wall_time = start.elapsed();
                    r
                }
            };
            print_report(&report);
            outcome(&report)
        }
        Command::Export { field, format: ExportFormat::Json, output } => {
            let text = morphic_cli::export::field_to_json(&field)?;
            match output {
                Some(path) => std::fs::write(&path, text).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?,
                None => print!("{text}"),
            }
            Ok(())
        }
        Command::Verify { report } => {
            let problems = verify_manifest(&report)?;
            for p in &problems {
                println!("{p}");
            }
            if problems.is_empty() {
                println!("manifest ok");
                Ok(())
            } else {
                Err(CliError::CheckFailed { failed: problems.len(), total: problems.len() })
            }
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("morphic: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
