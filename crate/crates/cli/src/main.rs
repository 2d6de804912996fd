//! `visage`: train, check, embed and evaluate from the command line.

mod commands;
mod config;

use std::process::ExitCode;

use clap::{Parser, Subcommand};
use config::{CommonFlags, RunConfig};
use visage_core::Error;

#[derive(Debug, Parser)]
#[command(name = "visage", version, about = "CNN training and face-verification experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    flags: CommonFlags,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Train a model on IDX images and write a checkpoint plus metrics log
    Train {
        /// Directory holding train-*/t10k-* IDX files
        #[arg(long)]
        data: Option<std::path::PathBuf>,
        /// Train on the first N images only
        #[arg(long)]
        train_limit: Option<usize>,
    },
    /// Finite-difference check of every differentiable operation
    Gradcheck {
        #[arg(long)]
        tolerance: Option<f64>,
        /// Only this operation
        #[arg(long)]
        op: Option<String>,
    },
    /// Align, embed and store every image of a landmark manifest
    Embed {
        #[arg(long)]
        checkpoint: Option<std::path::PathBuf>,
        #[arg(long)]
        manifest: Option<std::path::PathBuf>,
        /// Base directory for relative image paths (default: manifest directory)
        #[arg(long)]
        image_root: Option<std::path::PathBuf>,
    },
    /// Score a pair list (or all pairs) from an embedding store
    Eval {
        #[arg(long)]
        store: Option<std::path::PathBuf>,
        #[arg(long)]
        pairs: Option<std::path::PathBuf>,
        #[arg(long)]
        folds: Option<std::path::PathBuf>,
    },
    /// Dump 2D test-set features as `x y label`
    Features2d {
        #[arg(long)]
        checkpoint: Option<std::path::PathBuf>,
        #[arg(long)]
        data: Option<std::path::PathBuf>,
        /// Dump only the first N test samples
        #[arg(long)]
        limit: Option<usize>,
    },
}

fn exit_code(err: &Error) -> u8 {
    match err {
        Error::Usage(_) | Error::Invalid(_) => 1,
        Error::Io(_) | Error::Format { .. } | Error::Shape { .. } => 2,
        Error::Divergence { .. } => 3,
    }
}

fn run(cli: Cli) -> visage_core::Result<u8> {
    let mut config = RunConfig::load(cli.flags.config.as_deref())?;
    config.apply_flags(&cli.flags)?;
    let set = |slot: &mut Option<std::path::PathBuf>, v: Option<std::path::PathBuf>| {
        if v.is_some() {
            *slot = v;
        }
    };
    match cli.command {
        Command::Train { data, train_limit } => {
            if let Some(d) = data {
                config.data = d;
            }
            if let Some(n) = train_limit {
                config.train_limit = n;
            }
            commands::train(&config).map(|_| 0)
        }
        Command::Gradcheck { tolerance, op } => {
            if let Some(t) = tolerance {
                config.tolerance = t;
            }
            if op.is_some() {
                config.op = op;
            }
            commands::gradcheck(&config)
        }
        Command::Embed { checkpoint, manifest, image_root } => {
            set(&mut config.checkpoint, checkpoint);
            set(&mut config.manifest, manifest);
            set(&mut config.image_root, image_root);
            commands::embed(&config).map(|_| 0)
        }
        Command::Eval { store, pairs, folds } => {
            set(&mut config.store, store);
            set(&mut config.pairs, pairs);
            set(&mut config.folds, folds);
            commands::eval(&config).map(|_| 0)
        }
        Command::Features2d { checkpoint, data, limit } => {
            set(&mut config.checkpoint, checkpoint);
            if let Some(d) = data {
                config.data = d;
            }
            if let Some(n) = limit {
                config.limit = n;
            }
            commands::features2d(&config).map(|_| 0)
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
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
