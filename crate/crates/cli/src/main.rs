//! `csipos` command-line driver: simulate -> train -> transfer -> eval
//! workflows plus the letters demo and the gradient-check suite.

use clap::{Args, Parser, Subcommand};
use csipos_cli::commands::{self, CommandError, CommonArgs};
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "csipos", version, about = "CSI-based indoor positioning pipeline")]
struct Cli {
    #[command(subcommand)]
    verb: Verb,
}

#[derive(Args)]
struct Shared {
    /// Plain-text config file (key = value lines).
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory; every artifact of the run lands here.
    #[arg(long)]
    out: PathBuf,
    /// Config override, repeatable: --set key=value.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    sets: Vec<String>,
    /// Run seed (overrides config).
    #[arg(long)]
    seed: Option<u64>,
    /// Antenna topology: ura, ula, or dis.
    #[arg(long)]
    topology: Option<String>,
    /// Antenna subsampling target (8, 16, 32, or 64).
    #[arg(long)]
    antennas: Option<usize>,
    /// Transfer-learning sample budget.
    #[arg(long)]
    budget: Option<usize>,
    /// Transfer-learning freeze boundary (layer index).
    #[arg(long = "freeze-boundary")]
    freeze_boundary: Option<usize>,
}

impl Shared {
    fn into_common(self) -> CommonArgs {
        CommonArgs {
            config: self.config,
            out: self.out,
            sets: self.sets,
            seed: self.seed,
            topology: self.topology,
            antennas: self.antennas,
            budget: self.budget,
            freeze_boundary: self.freeze_boundary,
        }
    }
}

#[derive(Subcommand)]
enum Verb {
    /// Synthesize a grid-scanned CSI dataset for the configured topology.
    Simulate {
        #[command(flatten)]
        shared: Shared,
    },
    /// Train the positioning CNN on a dataset file.
    Train {
        #[command(flatten)]
        shared: Shared,
        /// Input dataset (CSIB file).
        #[arg(long)]
        dataset: PathBuf,
    },
    /// Fine-tune a pretrained model on a new dataset under a sample budget.
    Transfer {
        #[command(flatten)]
        shared: Shared,
        /// Pretrained model (CSIM file).
        #[arg(long)]
        model: PathBuf,
        /// New-topology dataset (CSIB file).
        #[arg(long)]
        dataset: PathBuf,
    },
    /// Evaluate a saved model on a dataset's test split.
    Eval {
        #[command(flatten)]
        shared: Shared,
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        dataset: PathBuf,
    },
    /// Emit letter-path waypoints, with a prediction overlay when a model
    /// and dataset are given.
    Letters {
        #[command(flatten)]
        shared: Shared,
        #[arg(long)]
        model: Option<PathBuf>,
        #[arg(long)]
        dataset: Option<PathBuf>,
    },
    /// Run the finite-difference gradient suite over every layer kind.
    Gradcheck {
        /// Output directory for the result table.
        #[arg(long)]
        out: PathBuf,
    },
}

fn run() -> Result<(), CommandError> {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // clap's help/version output is a success path.
            if e.use_stderr() {
                eprint!("{e}");
                std::process::exit(1);
            }
            print!("{e}");
            return Ok(());
        }
    };
    match cli.verb {
        Verb::Simulate { shared } => {
            let common = shared.into_common();
            let cfg = commands::resolve_config(&common)?;
            let path = commands::simulate(&cfg, &common.out)?;
            println!("dataset written to {}", path.display());
        }
        Verb::Train { shared, dataset } => {
            let common = shared.into_common();
            let cfg = commands::resolve_config(&common)?;
            let outcome = commands::train_cmd(&cfg, &common.out, &dataset)?;
            println!(
                "trained {} epochs; best val ME {:.2} mm (epoch {})",
                outcome.history.len(),
                outcome.best_val_me_mm,
                outcome.best_epoch
            );
        }
        Verb::Transfer {
            shared,
            model,
            dataset,
        } => {
            let common = shared.into_common();
            let cfg = commands::resolve_config(&common)?;
            let outcome = commands::transfer_cmd(&cfg, &common.out, &model, &dataset)?;
            println!(
                "fine-tuned {} epochs; best val ME {:.2} mm (epoch {})",
                outcome.history.len(),
                outcome.best_val_me_mm,
                outcome.best_epoch
            );
        }
        Verb::Eval {
            shared,
            model,
            dataset,
        } => {
            let common = shared.into_common();
            let cfg = commands::resolve_config(&common)?;
            let report = commands::eval_cmd(&cfg, &common.out, &model, &dataset)?;
            println!(
                "test ME {:.2} mm ({:.3} lambda) over {} samples",
                report.me_mm,
                report.me_lambda,
                report.per_sample_error_mm.len()
            );
        }
        Verb::Letters {
            shared,
            model,
            dataset,
        } => {
            let common = shared.into_common();
            let cfg = commands::resolve_config(&common)?;
            let n = commands::letters_cmd(
                &cfg,
                &common.out,
                model.as_deref(),
                dataset.as_deref(),
            )?;
            println!("{n} waypoints written");
        }
        Verb::Gradcheck { out } => {
            commands::gradcheck_cmd(&out)?;
            println!("gradient check passed");
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run() {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
