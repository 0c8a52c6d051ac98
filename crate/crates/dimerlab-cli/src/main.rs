//! `dimerlab`: run an experiment from a JSON config and command-line overrides, or re-render a report.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use dimerlab_cli::{render, run, ConfigError, ExperimentConfig, ExperimentId, Format, Report};
use serde_json::{Map, Value};

#[derive(Parser)]
#[command(name = "dimerlab", version, about = "Domino tiling, spanning tree and LERW experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one experiment. Exits 0 iff every criterion passes.
    Run(RunArgs),
    /// Render a JSON report in another format.
    Render {
        report: PathBuf,
        #[arg(long, value_enum, default_value = "markdown")]
        format: Format,
    },
}

#[derive(Args)]
struct RunArgs {
    #[arg(value_enum)]
    experiment: ExperimentId,
    /// JSON config; the flags below override it.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Grid list such as `2x2,3x3,3x4`.
    #[arg(long)]
    grids: Option<String>,
    /// Comma-separated sizes.
    #[arg(long)]
    sizes: Option<String>,
    /// Comma-separated region files.
    #[arg(long)]
    regions: Option<String>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    samples: Option<u64>,
    /// Any parameter as `key=value`, with the value read as JSON when it parses.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
    /// Precision in bits; defaults to DIMERLAB_PRECISION, then 128.
    #[arg(long)]
    precision: Option<u32>,
    /// Fan independent parameter points out over threads.
    #[arg(long)]
    parallel: bool,
    /// Format written to stdout.
    #[arg(long, value_enum, default_value = "json")]
    out: Format,
    #[arg(long)]
    json: Option<PathBuf>,
    #[arg(long)]
    csv: Option<PathBuf>,
}

fn list(text: &str, numeric: bool) -> Result<Value, ConfigError> {
    text.split(',')
        .map(|s| {
            let s = s.trim();
            if numeric {
                serde_json::from_str::<serde_json::Number>(s).map(Value::Number).map_err(|_| ConfigError::new("params", format!("{s:?} is not a number")))
            } else {
                Ok(Value::String(s.into()))
            }
        })
        .collect::<Result<Vec<_>, _>>()
        .map(Value::Array)
}

fn build_config(a: &RunArgs) -> Result<ExperimentConfig, ConfigError> {
    let mut doc = match &a.config {
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(|e| ConfigError::new("config", format!("{}: {e}", path.display())))?;
            serde_json::from_str::<Value>(&text).map_err(|e| ConfigError::new("", e.to_string()))?
        }
        None => Value::Object(Map::new()),
    };
    let obj = doc.as_object_mut().ok_or_else(|| ConfigError::new("", "config must be a JSON object"))?;
    let id = Value::String(a.experiment.name().into());
    if let Some(existing) = obj.get("experiment") {
        if *existing != id {
            return Err(ConfigError::new("experiment", format!("config names {existing}, command line names {id}")));
        }
    }
    obj.insert("experiment".into(), id);
    let params = obj.entry("params").or_insert_with(|| Value::Object(Map::new()));
    let params = params.as_object_mut().ok_or_else(|| ConfigError::new("params", "must be an object"))?;
    if let Some(g) = &a.grids {
        params.insert("grids".into(), list(g, false)?);
    }
    if let Some(s) = &a.sizes {
        params.insert("sizes".into(), list(s, true)?);
    }
    if let Some(r) = &a.regions {
        params.insert("regions".into(), list(r, false)?);
    }
    if let Some(s) = a.seed {
        params.insert("seed".into(), s.into());
    }
    if let Some(s) = a.samples {
        params.insert("samples".into(), s.into());
    }
    for kv in &a.set {
        let (k, v) = kv.split_once('=').ok_or_else(|| ConfigError::new("params", format!("--set {kv:?} is not key=value")))?;
        let value = serde_json::from_str(v).unwrap_or_else(|_| Value::String(v.into()));
        params.insert(k.trim().into(), value);
    }
    if let Some(p) = a.precision {
        obj.insert("precision_bits".into(), p.into());
    }
    if a.parallel {
        obj.insert("parallel".into(), true.into());
    }
    let output = obj.entry("output").or_insert_with(|| Value::Object(Map::new()));
    let output = output.as_object_mut().ok_or_else(|| ConfigError::new("output", "must be an object"))?;
    if let Some(j) = &a.json {
        output.insert("json".into(), j.display().to_string().into());
    }
    if let Some(c) = &a.csv {
        output.insert("csv".into(), c.display().to_string().into());
    }
    ExperimentConfig::from_value(doc)
}

fn write(path: &PathBuf, bytes: &[u8]) -> Result<(), String> {
    std::fs::write(path, bytes).map_err(|e| format!("{}: {e}", path.display()))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.command {
        Command::Render { report, format } => {
            let parsed = std::fs::read(&report).map_err(|e| e.to_string()).and_then(|b| Report::from_json(&b).map_err(|e| e.to_string()));
            match parsed {
                Ok(r) => {
                    print!("{}", String::from_utf8_lossy(&render(&r, format)));
                    ExitCode::SUCCESS
                }
                Err(e) => {
                    eprintln!("error: {}: {e}", report.display());
                    ExitCode::from(2)
                }
            }
        }
        Command::Run(args) => {
            let config = match build_config(&args) {
                Ok(c) => c,
                Err(e) => {
                    eprintln!("config error: {e}");
                    return ExitCode::from(2);
                }
            };
            let report = match run(&config) {
                Ok(r) => r,
                Err(e) => {
                    eprintln!("error: {e}");
                    return ExitCode::from(2);
                }
            };
            let files = [(config.output.json.as_ref(), Format::Json), (config.output.csv.as_ref(), Format::Csv)];
            for (path, format) in files {
                if let Some(p) = path {
                    if let Err(e) = write(p, &render(&report, format)) {
                        eprintln!("error: {e}");
                        return ExitCode::from(2);
                    }
                }
            }
            print!("{}", String::from_utf8_lossy(&render(&report, args.out)));
            if report.passed() {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(1)
            }
        }
    }
}
