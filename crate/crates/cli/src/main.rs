use std::fs;
use std::io::Write;
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Context;
use clap::{Parser, Subcommand};
use waypoint_core::env::resolve_map;
use waypoint_core::harness::{
    read_results, run_battery_with, write_results, CurvePayload, MetricSettings, MetricsReport, RunConfig,
};
use waypoint_core::subgoal::check_series_json;
use waypoint_core::Error;

const EXIT_CONFIG: u8 = 2;
const EXIT_DEGENERATE: u8 = 3;

#[derive(Parser)]
#[command(
    name = "waypoint",
    version,
    about = "Subgoal-based reward shaping experiments"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a learning battery and write results, report and curves to a directory.
    Run {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Worker threads (0 = all cores); overrides the config.
        #[arg(long)]
        workers: Option<usize>,
        /// Suppress progress output.
        #[arg(long, short)]
        quiet: bool,
    },
    /// Compute metrics and statistics from a results CSV.
    Report {
        #[arg(long)]
        results: PathBuf,
        #[arg(long, value_delimiter = ',', default_values_t = MetricSettings::default().thresholds)]
        thresholds: Vec<usize>,
        #[arg(long, default_value_t = 1)]
        smoothing_window: usize,
        #[arg(long, default_value_t = 10)]
        tail: usize,
        /// Print the JSON report instead of the table.
        #[arg(long)]
        json: bool,
    },
    /// Check a subgoal series document against a map.
    ValidateSubgoals {
        /// Built-in map id or path to a map document.
        #[arg(long)]
        env: String,
        #[arg(long)]
        series: PathBuf,
    },
    /// Serve the HTTP API and the UI bundle.
    Serve {
        #[arg(long, default_value = "127.0.0.1:8080")]
        addr: SocketAddr,
        /// Directory where run results are kept across restarts.
        #[arg(long, default_value = "waypoint-spool")]
        spool: PathBuf,
        /// Directory holding a built UI bundle.
        #[arg(long)]
        ui_dir: Option<PathBuf>,
        #[arg(long, default_value_t = 0)]
        workers: usize,
    },
}

enum Failure {
    Config(String),
    Other(anyhow::Error),
}

impl From<anyhow::Error> for Failure {
    fn from(e: anyhow::Error) -> Self {
        Failure::Other(e)
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::Config(_) | Error::MapLoad { .. } | Error::Invalid(_) | Error::Json(_) => {
                Failure::Config(e.to_string())
            }
            other => Failure::Other(other.into()),
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Run {
            config,
            out,
            workers,
            quiet,
        } => run(&config, &out, workers, quiet),
        Command::Report {
            results,
            thresholds,
            smoothing_window,
            tail,
            json,
        } => report(
            &results,
            MetricSettings {
                thresholds,
                smoothing_window,
                asymptotic_tail: tail,
            },
            json,
        ),
        Command::ValidateSubgoals { env, series } => validate(&env, &series),
        Command::Serve {
            addr,
            spool,
            ui_dir,
            workers,
        } => serve(addr, spool, ui_dir, workers),
    };
    match outcome {
        Ok(code) => code,
        Err(Failure::Config(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(EXIT_CONFIG)
        }
        Err(Failure::Other(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

fn run(config_path: &Path, out: &Path, workers: Option<usize>, quiet: bool) -> Result<ExitCode, Failure> {
    let config = RunConfig::load(config_path)?;
    let prepared = config.prepare()?;
    let workers = workers.unwrap_or(config.workers);
    fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;

    let progress = |done: usize, total: usize| {
        if !quiet {
            eprint!("\r{done}/{total} runs");
            if done == total {
                eprintln!();
            }
        }
    };
    let runs = run_battery_with(&prepared, workers, &progress)?;
    for r in runs.iter().filter(|r| r.error.is_some()) {
        eprintln!(
            "warning: {} seed {} failed: {}",
            r.method,
            r.seed,
            r.error.as_deref().unwrap_or_default()
        );
    }

    let settings = config.metric_settings();
    let file = fs::File::create(out.join("results.csv")).context("creating results.csv")?;
    write_results(&runs, file)?;
    let payload = CurvePayload::from_runs(&runs, &settings)?;
    write_file(&out.join("config.json"), &config.to_json())?;
    write_file(&out.join("report.json"), &payload.metrics.to_json())?;
    write_file(&out.join("report.txt"), &payload.metrics.to_table())?;
    write_file(
        &out.join("curves.json"),
        &serde_json::to_string(&payload).context("serializing curves")?,
    )?;

    print!("{}", payload.metrics.to_table());
    Ok(exit_for(&payload.metrics))
}

fn report(results: &Path, settings: MetricSettings, json: bool) -> Result<ExitCode, Failure> {
    let file = fs::File::open(results).with_context(|| format!("opening {}", results.display()))?;
    let runs = read_results(file)?;
    let report = MetricsReport::from_runs(&runs, &settings)?;
    if json {
        println!("{}", report.to_json());
    } else {
        print!("{}", report.to_table());
    }
    Ok(exit_for(&report))
}

fn validate(env: &str, series: &Path) -> Result<ExitCode, Failure> {
    let map = resolve_map(env)?;
    let text =
        fs::read_to_string(series).map_err(|e| Failure::Config(format!("{}: {e}", series.display())))?;
    let errors = check_series_json(&map, &text);
    let ok = errors.is_empty();
    let body = serde_json::json!({ "ok": ok, "errors": errors });
    println!(
        "{}",
        serde_json::to_string_pretty(&body).context("serializing result")?
    );
    Ok(if ok {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(EXIT_CONFIG)
    })
}

fn serve(
    addr: SocketAddr,
    spool: PathBuf,
    ui_dir: Option<PathBuf>,
    workers: usize,
) -> Result<ExitCode, Failure> {
    let settings = waypoint_server::ServerConfig {
        spool: Some(spool),
        ui_dir,
        workers,
    };
    let runtime = tokio::runtime::Runtime::new().context("starting runtime")?;
    runtime.block_on(waypoint_server::serve(addr, settings))?;
    Ok(ExitCode::SUCCESS)
}

fn exit_for(report: &MetricsReport) -> ExitCode {
    if report.degenerate {
        eprintln!("warning: degenerate statistics (no within-group variance); comparisons skipped");
        ExitCode::from(EXIT_DEGENERATE)
    } else {
        ExitCode::SUCCESS
    }
}

fn write_file(path: &Path, text: &str) -> anyhow::Result<()> {
    let mut f = fs::File::create(path).with_context(|| format!("creating {}", path.display()))?;
    f.write_all(text.as_bytes())?;
    Ok(())
}
