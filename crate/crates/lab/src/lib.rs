//! Experiment driver for `anosov-core`: TOML configuration, command
//! dispatch and JSON/CSV/SVG report writers.

pub mod commands;
pub mod config;
pub mod error;
pub mod report;
pub mod svg;

use std::path::{Path, PathBuf};
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use clap::Parser;
use serde_json::{json, Value};

pub use commands::{Command, Context};
pub use config::{ExperimentConfig, Format, Overrides};
pub use error::{LabError, LabResult};

use report::{write_json, Status};

#[derive(Debug, Parser)]
#[command(name = "anosov-lab", version, about = "Numerical experiments on Anosov endomorphisms of the 2- and 3-torus")]
pub struct Cli {
    #[arg(value_enum)]
    pub command: Command,
    /// Experiment file; repeat to run several maps (outputs go to OUT/<stem>/).
    #[arg(short, long = "config", required = true, value_name = "PATH")]
    pub configs: Vec<PathBuf>,
    #[arg(short, long, default_value = "out", value_name = "DIR")]
    pub out: PathBuf,
    /// Overrides the `seed` of every config.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Worker threads; results do not depend on it.
    #[arg(long)]
    pub threads: Option<usize>,
    #[arg(long, value_enum)]
    pub format: Option<Format>,
}

/// Outcome of one command on one map, as listed in `summary.json`.
#[derive(Debug)]
pub struct CommandOutcome {
    pub command: Command,
    pub result: Result<Status, LabError>,
    pub skipped: Option<&'static str>,
    pub seconds: f64,
    pub files: Vec<PathBuf>,
}

impl CommandOutcome {
    fn label(&self) -> String {
        match (&self.skipped, &self.result) {
            (Some(why), _) => format!("skipped ({why})"),
            (None, Ok(s)) => serde_json::to_value(s).unwrap().as_str().unwrap().to_string(),
            (None, Err(e)) => format!("error (exit {}): {e}", e.exit_code()),
        }
    }
}

fn create_dir(dir: &Path) -> LabResult<()> {
    std::fs::create_dir_all(dir).map_err(|e| LabError::io(dir, e))
}

/// Runs one command, or every applicable command for `all`, on a resolved
/// config and writes the reports into `dir`.
pub fn run_config(cmd: Command, cfg: &ExperimentConfig, dir: &Path) -> LabResult<Vec<CommandOutcome>> {
    create_dir(dir)?;
    let ctx = Context::new(cfg)?;
    let header = report::map_header(cfg, &ctx.f);
    let list: Vec<Command> = if cmd == Command::All { Command::EACH.to_vec() } else { vec![cmd] };
    let mut outcomes = Vec::new();
    for c in list {
        let start = Instant::now();
        if cmd == Command::All && c.only_dim().is_some_and(|d| d != ctx.f.dim()) {
            let why = if ctx.f.dim() == 2 { "3-torus only" } else { "2-torus only" };
            outcomes.push(CommandOutcome { command: c, result: Ok(Status::Ok), skipped: Some(why), seconds: 0.0, files: vec![] });
            continue;
        }
        let mut files = Vec::new();
        let result = ctx.run(c).and_then(|r| {
            files = report::write_report(dir, cfg, &header, &r)?;
            if r.status == Status::Inconsistent {
                return Err(LabError::Inconsistent { command: c.name(), detail: inconsistency_detail(&r.result) });
            }
            Ok(r.status)
        });
        outcomes.push(CommandOutcome { command: c, result, skipped: None, seconds: start.elapsed().as_secs_f64(), files });
    }
    if cmd == Command::All {
        let summary: Vec<Value> = outcomes
            .iter()
            .map(|o| {
                json!({
                    "command": o.command.name(),
                    "outcome": o.label(),
                    "exit_code": o.result.as_ref().err().map_or(0, LabError::exit_code),
                })
            })
            .collect();
        write_json(&dir.join("summary.json"), &json!({ "map": cfg.name, "commands": summary }))?;
    }
    Ok(outcomes)
}

fn inconsistency_detail(result: &Value) -> String {
    let items = result.get("report").and_then(|r| r.get("items")).or_else(|| result.get("items"));
    items
        .and_then(Value::as_array)
        .map(|v| {
            v.iter()
                .map(|i| format!("({})={}", i["item"], if i["passed"].as_bool() == Some(true) { "pass" } else { "fail" }))
                .collect::<Vec<_>>()
                .join(" ")
        })
        .unwrap_or_default()
}

fn write_meta(dir: &Path, cli: &Cli, config: &Path, outcomes: &[CommandOutcome], started: SystemTime) -> LabResult<()> {
    let unix = |t: SystemTime| t.duration_since(UNIX_EPOCH).map(|d| d.as_secs_f64()).unwrap_or(0.0);
    let commands: Vec<Value> = outcomes
        .iter()
        .map(|o| json!({ "command": o.command.name(), "seconds": o.seconds, "outcome": o.label(), "files": o.files }))
        .collect();
    write_json(
        &dir.join("meta.json"),
        &json!({
            "version": env!("CARGO_PKG_VERSION"),
            "command": cli.command.name(),
            "config": config,
            "threads": rayon::current_num_threads(),
            "started_unix": unix(started),
            "finished_unix": unix(SystemTime::now()),
            "commands": commands,
        }),
    )
}

/// Entry point behind the binary; returns the process exit status.
pub fn run(cli: &Cli) -> i32 {
    if let Some(n) = cli.threads {
        // a second call in the same process keeps the first pool
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    let mut stems: Vec<String> = Vec::new();
    for c in &cli.configs {
        let stem = c.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
        if stems.contains(&stem) {
            return report_error(&LabError::Usage(format!("two configs share the name `{stem}`")));
        }
        stems.push(stem);
    }
    let overrides = Overrides { seed: cli.seed, threads: cli.threads, format: cli.format };
    let mut worst: Option<LabError> = None;
    let keep = |e: LabError, worst: &mut Option<LabError>| {
        eprintln!("anosov-lab: {e}");
        if worst.as_ref().is_none_or(|w| e.severity() > w.severity()) {
            *worst = Some(e);
        }
    };
    for (path, stem) in cli.configs.iter().zip(&stems) {
        let dir = if cli.configs.len() == 1 { cli.out.clone() } else { cli.out.join(stem) };
        let started = SystemTime::now();
        let cfg = match ExperimentConfig::load(path, &overrides) {
            Ok(c) => c,
            Err(e) => {
                keep(e, &mut worst);
                continue;
            }
        };
        match run_config(cli.command, &cfg, &dir) {
            Ok(outcomes) => {
                for o in &outcomes {
                    println!("{} {}: {} ({:.1} s)", cfg.name, o.command.name(), o.label(), o.seconds);
                }
                if let Err(e) = write_meta(&dir, cli, path, &outcomes, started) {
                    keep(e, &mut worst);
                }
                for o in outcomes {
                    if let Err(e) = o.result {
                        keep(e, &mut worst);
                    }
                }
            }
            Err(e) => keep(e, &mut worst),
        }
    }
    worst.map_or(0, |e| e.exit_code())
}

fn report_error(e: &LabError) -> i32 {
    eprintln!("anosov-lab: {e}");
    e.exit_code()
}
