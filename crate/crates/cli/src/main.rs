use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use shiftkit::models::{Hyperparams, ModelKind};
use shiftkit_cli::preview::preview;
use shiftkit_cli::{lemma_check, run_experiment, CliError, ExperimentConfig};

#[derive(Parser)]
#[command(name = "shiftkit", version, about = "Calibration, quantification and accuracy prediction under dataset shift")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args)]
struct RunArgs {
    /// Experiment config (JSON).
    #[arg(long)]
    config: PathBuf,
    /// Overrides the config seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads; 0 uses every core.
    #[arg(long, default_value_t = 0)]
    jobs: usize,
    /// Overrides the config output directory.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment and write results.csv, summary.json and by_shift.csv.
    Run(RunArgs),
    /// Verify the oracle reductions on a dataset.
    LemmaCheck {
        /// CSV dataset with columns f0..f{d-1},label.
        #[arg(long)]
        data: PathBuf,
        /// logistic, naive-bayes or knn.
        #[arg(long, default_value = "knn")]
        classifier: ModelKind,
        /// Neighbourhood size for knn.
        #[arg(long, default_value_t = 10)]
        k: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Where to write the JSON report.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Inspect generated samples.
    Protocols {
        #[command(subcommand)]
        action: ProtocolAction,
    },
}

#[derive(Subcommand)]
enum ProtocolAction {
    /// Print the prevalence or mixture fraction of every generated sample.
    Preview(RunArgs),
}

fn load(args: &RunArgs) -> Result<ExperimentConfig, CliError> {
    let mut cfg = ExperimentConfig::load(&args.config)?;
    if let Some(seed) = args.seed {
        cfg.seed = seed;
    }
    if let Some(out) = &args.out {
        cfg.output_dir = out.clone();
    }
    Ok(cfg)
}

fn execute(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Run(args) => {
            let cfg = load(&args)?;
            let out = run_experiment(&cfg, args.jobs)?;
            for f in &out.failures {
                match f.sample_id {
                    Some(id) => eprintln!("warning: {} failed on sample {id}: {}", f.method, f.error),
                    None => eprintln!("warning: {} could not be fitted: {}", f.method, f.error),
                }
            }
            println!("{} records written to {}", out.records.len(), cfg.output_dir.display());
            Ok(())
        }
        Command::LemmaCheck { data, classifier, k, seed, out } => {
            let params = Hyperparams { k, ..Hyperparams::default() };
            let report = lemma_check(&data, classifier, &params, seed, out.as_deref());
            match report {
                Ok(r) => {
                    print!("{r}");
                    Ok(())
                }
                Err(e) => Err(e),
            }
        }
        Command::Protocols { action: ProtocolAction::Preview(args) } => {
            print!("{}", preview(&load(&args)?)?);
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    match execute(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.code() as u8)
        }
    }
}
