use std::fs::File;
use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};
use memento_harness::runner::{run, write_stream};
use memento_harness::{RunConfig, ScenarioKind, ScenarioSpec};

#[derive(Parser)]
#[command(name = "memento", about = "Replay-memory selection experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one experiment described by a config file.
    Run {
        #[arg(long)]
        config: PathBuf,
    },
    /// Run the same experiment once per value of one config key.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        param: String,
        /// Comma-separated values.
        #[arg(long, value_delimiter = ',')]
        values: Vec<String>,
    },
    /// Write a scenario stream as sample records.
    Gen {
        #[arg(long)]
        scenario: ScenarioKind,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        iterations: Option<usize>,
        #[arg(long)]
        samples_per_iteration: Option<usize>,
        #[arg(long, default_value_t = 0.0)]
        noise_fraction: f64,
    },
}

fn summarize(config: &RunConfig) -> Result<()> {
    let result = run(config)?;
    if let Some(last) = result.reports.last() {
        let retrains = result.reports.iter().filter(|r| r.retrained).count();
        println!(
            "{}: {} iterations, {} retrains, final memory {:?}",
            config.strategy,
            result.reports.len(),
            retrains,
            last.class_counts
        );
    } else {
        println!("{}: no iterations", config.strategy);
    }
    Ok(())
}

fn main() -> Result<()> {
    match Cli::parse().command {
        Command::Run { config } => {
            let config = RunConfig::from_file(&config)?;
            summarize(&config)
        }
        Command::Sweep { config, param, values } => {
            let base = RunConfig::from_file(&config)?;
            if values.is_empty() {
                bail!("no values to sweep");
            }
            for value in values {
                let mut config = base.clone();
                config
                    .set(&param, &value)
                    .with_context(|| format!("{param} = {value}"))?;
                if let Some(dir) = &base.output_dir {
                    config.output_dir = Some(dir.join(format!("{param}={value}")));
                }
                print!("{param}={value} ");
                summarize(&config)?;
            }
            Ok(())
        }
        Command::Gen {
            scenario,
            out,
            seed,
            iterations,
            samples_per_iteration,
            noise_fraction,
        } => {
            let mut spec = ScenarioSpec::new(scenario, seed);
            if let Some(n) = iterations {
                spec.iterations = n;
            }
            if let Some(n) = samples_per_iteration {
                spec.samples_per_iteration = n;
            }
            let file = File::create(&out).with_context(|| out.display().to_string())?;
            let n = write_stream(&spec, noise_fraction, file)?;
            println!("wrote {n} samples to {}", out.display());
            Ok(())
        }
    }
}
