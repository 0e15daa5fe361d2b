use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};
use robinscat_cli::{run_pipeline, Assignments, PipelineConfig, Stage, MANIFEST};

#[derive(Parser)]
#[command(name = "robinscat", version, about = "Random anisotropic impedance scattering: simulation and recovery pipeline")]
struct Cli {
    /// Configuration file (`key = value` lines).
    #[arg(short, long, global = true)]
    config: Option<PathBuf>,
    /// Override a configuration key; repeatable, list keys may be given several times.
    #[arg(short = 's', long = "set", value_name = "KEY=VALUE", global = true)]
    set: Vec<String>,
    /// Output directory.
    #[arg(short, long, global = true)]
    output: Option<PathBuf>,
    /// Worker threads (0 = all cores).
    #[arg(short = 'j', long, global = true)]
    threads: Option<usize>,
    /// Write CSV traces of every diagnostic under `<output>/plots`.
    #[arg(long, global = true)]
    emit_plots: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Build the anisotropy and sample one field realization.
    Synth,
    /// Operator-norm decay and Born-series diagnostics.
    Forward,
    /// Backscatter data at the measurement points.
    Measure,
    /// Fit the strength to the data.
    Reduce,
    /// Radon transform of the fitted strength and its Fourier slices.
    Radon,
    /// Trace and component recovery.
    Recover,
    /// Compare the recovery with the synthesized truth.
    Verify,
    /// Run the configured stages in dependency order.
    Pipeline,
    /// Validate the configuration and print it with defaults filled in.
    ShowConfig,
    /// Print the configuration schema.
    Schema,
}

fn load_config(cli: &Cli) -> Result<PipelineConfig> {
    let mut a = match &cli.config {
        Some(p) => Assignments::parse(&std::fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?)?,
        None => Assignments::default(),
    };
    let mut sets = cli.set.clone();
    if let Some(o) = &cli.output {
        sets.push(format!("output={}", o.display()));
    }
    if let Some(t) = cli.threads {
        sets.push(format!("threads={t}"));
    }
    if cli.emit_plots {
        sets.push("emit_plots=true".into());
    }
    a.override_with(&sets)?;
    PipelineConfig::from_assignments(&a)
}

fn run(cli: Cli) -> Result<()> {
    let mut cfg = load_config(&cli)?;
    let stage = match cli.command {
        Command::Synth => Some(Stage::Synth),
        Command::Forward => Some(Stage::Forward),
        Command::Measure => Some(Stage::Measure),
        Command::Reduce => Some(Stage::Reduce),
        Command::Radon => Some(Stage::Radon),
        Command::Recover => Some(Stage::Recover),
        Command::Verify => Some(Stage::Verify),
        Command::Pipeline => None,
        Command::ShowConfig => {
            cfg.validate()?;
            print!("{}", cfg.to_text());
            return Ok(());
        }
        Command::Schema => {
            for (k, doc) in robinscat_cli::config::SCHEMA {
                println!("{k:<16} {doc}");
            }
            return Ok(());
        }
    };
    if let Some(s) = stage {
        cfg.stages = vec![s];
    }
    let written = run_pipeline(&cfg)?;
    for (name, e) in &written.artifacts {
        println!("{:<16} {}  {}", name, &e.sha256[..16], e.path);
    }
    if !written.is_empty() {
        println!("manifest: {}", cfg.output.join(MANIFEST).display());
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
