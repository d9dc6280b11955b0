//! `lrdlab`: seeded, reproducible experiments on long-range dependency in
//! sequence-model recurrences. Each run reads a JSON config, executes one
//! experiment, and writes CSV tables, `meta.json`, and optional SVG plots
//! to the output directory.

mod bundle;
mod config;
mod error;
mod experiments;
mod svg;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;

use config::{ExperimentConfig, ExperimentKind};
use error::CliError;

#[derive(Parser)]
#[command(
    name = "lrdlab",
    version,
    about = "Long-range dependency laboratory for sequence-model recurrences"
)]
struct Cli {
    /// Experiment to run; must match the config file's `experiment` field.
    #[arg(value_enum)]
    experiment: ExperimentKind,

    /// Path to the JSON experiment configuration.
    #[arg(long)]
    config: PathBuf,

    /// Override the config seed.
    #[arg(long)]
    seed: Option<u64>,

    /// Override the config output directory.
    #[arg(long)]
    out: Option<PathBuf>,

    /// Skip SVG emission; CSV and JSON outputs are unaffected.
    #[arg(long)]
    no_plots: bool,

    /// Run a single named check of the oracle suite.
    #[arg(long)]
    filter: Option<String>,

    /// Worker threads for the data-parallel sweeps (default: all cores).
    #[arg(long)]
    threads: Option<usize>,

    /// Deliberately corrupt one computation to exercise failure detection.
    #[arg(long, hide = true)]
    inject_fault: Option<String>,
}

fn load_config(cli: &Cli) -> Result<ExperimentConfig, CliError> {
    let text = std::fs::read_to_string(&cli.config).map_err(|e| {
        CliError::Config(format!("cannot read {}: {e}", cli.config.display()))
    })?;
    let mut config: ExperimentConfig = serde_json::from_str(&text)
        .map_err(|e| CliError::Config(format!("cannot parse {}: {e}", cli.config.display())))?;
    config.validate().map_err(CliError::Config)?;
    if config.experiment != cli.experiment {
        return Err(CliError::Config(format!(
            "config is for experiment {:?} but {:?} was requested",
            config.experiment.as_str(),
            cli.experiment.as_str()
        )));
    }
    if let Some(seed) = cli.seed {
        config.seed = seed;
    }
    if let Some(out) = &cli.out {
        config.out_dir = out.clone();
    }
    Ok(config)
}

fn setup_threads(threads: Option<usize>) {
    #[cfg(feature = "parallel")]
    if let Some(n) = threads {
        // Errors only if a global pool already exists, which is fine.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    #[cfg(not(feature = "parallel"))]
    if let Some(n) = threads {
        eprintln!("note: built without the parallel feature; --threads {n} has no effect");
    }
}

fn run(cli: &Cli) -> Result<u8, CliError> {
    let config = load_config(cli)?;
    setup_threads(cli.threads);

    let bundle = experiments::run_experiment(
        &config,
        cli.inject_fault.as_deref(),
        cli.filter.as_deref(),
    )?;
    let written = bundle::write_bundle(&bundle, &config, &config.out_dir, !cli.no_plots)?;

    for warning in &bundle.warnings {
        eprintln!("warning: {warning}");
    }
    println!(
        "{}: wrote {} file(s) to {}",
        config.experiment.as_str(),
        written.len(),
        config.out_dir.display()
    );
    if bundle.failed_checks > 0 {
        eprintln!("{} check(s) failed", bundle.failed_checks);
        return Ok(1);
    }
    Ok(0)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
