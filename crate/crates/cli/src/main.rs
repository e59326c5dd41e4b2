mod commands;
mod config;
mod failure;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use config::RunConfig;
use failure::{fail, AtStage, CliResult, Stage};

#[derive(Parser, Debug)]
#[command(name = "m2fgb", version, about = "Min-max group-fair gradient boosting")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// `key = value` run configuration
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,
    #[arg(long, global = true, value_name = "N")]
    seed: Option<u64>,
    /// Output directory
    #[arg(long, global = true, value_name = "DIR")]
    out: Option<PathBuf>,
    /// Machine-readable output on stdout
    #[arg(long, global = true)]
    json: bool,
    /// Input CSV
    #[arg(long, global = true, value_name = "PATH")]
    data: Option<PathBuf>,
    /// Column schema of the input CSV
    #[arg(long, global = true, value_name = "PATH")]
    schema: Option<PathBuf>,
    /// Override any config key; repeatable
    #[arg(long = "set", short = 's', global = true, value_name = "KEY=VALUE")]
    set: Vec<String>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Train a model; writes model, trace, preprocessing and a metrics report
    Train,
    /// Evaluate a saved model on a dataset
    Evaluate {
        #[arg(long, value_name = "PATH")]
        model: Option<PathBuf>,
        /// Defaults to preprocessor.json next to the model
        #[arg(long, value_name = "PATH")]
        preprocessor: Option<PathBuf>,
        #[arg(long, value_name = "NAME")]
        metric: Option<String>,
        #[arg(long)]
        threshold: Option<f64>,
    },
    /// Random search into a model pool, then alpha-weighted selection
    Sweep,
    /// Train over a lambda grid and report the fairness gap
    LambdaSweep,
    /// Paired lambda = 0 and lambda > 0 runs, per-round CSV
    Converge,
    /// Write a synthetic grouped dataset and its schema
    Synth,
    /// Project a vector onto the scaled simplex
    Project,
    /// List accepted config keys
    Keys,
}

fn configure_threads() -> CliResult<()> {
    let Ok(raw) = std::env::var("M2FGB_THREADS") else { return Ok(()) };
    let threads: usize = match raw.trim().parse() {
        Ok(t) if t >= 1 => t,
        _ => return fail(Stage::Config, format!("M2FGB_THREADS must be a positive integer, got '{raw}'")),
    };
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build_global()
        .at(Stage::Config)
}

fn build_config(cli: &Cli) -> CliResult<RunConfig> {
    let mut cfg = RunConfig::load(cli.config.as_deref())?;
    for entry in &cli.set {
        let Some((k, v)) = entry.split_once('=') else {
            return fail(Stage::Config, format!("--set expects KEY=VALUE, got '{entry}'"));
        };
        cfg.set(k.trim(), v.trim())?;
    }
    let path_flags = [("data", &cli.data), ("schema", &cli.schema), ("out", &cli.out)];
    for (key, value) in path_flags {
        if let Some(v) = value {
            cfg.set(key, &v.to_string_lossy())?;
        }
    }
    if let Some(seed) = cli.seed {
        cfg.set("seed", &seed.to_string())?;
    }
    if let Command::Evaluate {
        model,
        preprocessor,
        metric,
        threshold,
    } = &cli.command
    {
        if let Some(m) = model {
            cfg.set("model", &m.to_string_lossy())?;
        }
        if let Some(p) = preprocessor {
            cfg.set("preprocessor", &p.to_string_lossy())?;
        }
        if let Some(m) = metric {
            cfg.set("fairness_metric", m)?;
        }
        if let Some(t) = threshold {
            cfg.set("threshold", &t.to_string())?;
        }
    }
    Ok(cfg)
}

fn run(cli: &Cli) -> CliResult<()> {
    configure_threads()?;
    let cfg = build_config(cli)?;
    let json = cli.json;
    match cli.command {
        Command::Train => commands::train(&cfg, json),
        Command::Evaluate { .. } => commands::evaluate(&cfg, json),
        Command::Sweep => commands::sweep(&cfg, json),
        Command::LambdaSweep => commands::lambda_sweep(&cfg, json),
        Command::Converge => commands::converge(&cfg, json),
        Command::Synth => commands::synth(&cfg, json),
        Command::Project => commands::project(&cfg, json),
        Command::Keys => {
            for (k, help) in config::KEYS {
                println!("{k:<28}{help}");
            }
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("{f}");
            ExitCode::from(f.stage.exit_code() as u8)
        }
    }
}
