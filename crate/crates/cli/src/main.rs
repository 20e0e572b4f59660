//! `archlens`: index labeled diagram corpora, evaluate a design diagram, and
//! run the recognition-rate protocol.
//!
//! Exit codes: 0 success, 1 runtime or I/O failure, 2 invalid input
//! (flags, config, dataset layout, knowledge base, degenerate index).

mod commands;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

#[derive(Parser, Debug)]
#[command(
    name = "archlens",
    version,
    about = "Architecture diagram recognition and quality-attribute evaluation"
)]
struct Cli {
    /// More log output on stderr (-v info, -vv debug).
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    verbose: u8,

    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Clone)]
pub struct ConfigArgs {
    /// TOML file with [preprocess], [sift] and [matching] tables.
    #[arg(long, value_name = "FILE")]
    pub config: Option<PathBuf>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Extract features from <DATASET>/<label>/<image> files and write an index.
    Index {
        dataset: PathBuf,
        index: PathBuf,
        #[command(flatten)]
        config: ConfigArgs,
        /// Accept images below the minimum size, with a warning.
        #[arg(long)]
        gate_override: bool,
        /// Also compute and store the pairwise score matrix.
        #[arg(long)]
        pairwise: bool,
    },
    /// Classify one diagram and report quality-attribute strengths, weaknesses and tactics.
    Evaluate {
        index: PathBuf,
        kb: PathBuf,
        image: PathBuf,
        #[command(flatten)]
        config: ConfigArgs,
        /// Write the report as JSON.
        #[arg(long, value_name = "FILE")]
        out: Option<PathBuf>,
        /// Number of nearest records listed as evidence.
        #[arg(long, default_value_t = 5)]
        top_k: usize,
        /// Rank-1 scores above this are flagged as low confidence.
        #[arg(long, default_value_t = archlens_core::knowledge::DEFAULT_CONFIDENCE_THRESHOLD)]
        min_confidence: f64,
        /// Accept a query image below the minimum size, with a warning.
        #[arg(long)]
        gate_override: bool,
        /// Also recommend tactics for this quality attribute (repeatable).
        #[arg(long = "qa", value_name = "QA")]
        qa: Vec<String>,
    },
    /// Leave-one-out recognition rate, score distributions and the class-subset curve.
    Crr {
        index: PathBuf,
        #[command(flatten)]
        config: ConfigArgs,
        /// Write JSON Lines, one record per class, subset and summary.
        #[arg(long, value_name = "FILE")]
        out: Option<PathBuf>,
        /// Evaluate recognition rate over k-class subsets for every k.
        #[arg(long)]
        subset_curve: bool,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Subsets evaluated per k when enumerating all would exceed this.
        #[arg(long, default_value_t = archlens_core::evaluation::DEFAULT_SAMPLE_CAP)]
        sample_cap: usize,
    },
    /// Validate a knowledge-base file and print its size.
    KbValidate { kb: PathBuf },
    /// Summarize an index: records per label, keypoint counts, score distributions.
    Stats {
        index: PathBuf,
        #[command(flatten)]
        config: ConfigArgs,
        /// Write the summary as JSON.
        #[arg(long, value_name = "FILE")]
        out: Option<PathBuf>,
    },
    /// Write a synthetic labeled diagram corpus for trying the tool out.
    Synth {
        out_dir: PathBuf,
        #[arg(long, default_value_t = 10)]
        per_class: usize,
        #[arg(long, default_value_t = 400)]
        size: u32,
        /// Per-image departure from the family template, 0 to 1.
        #[arg(long, default_value_t = 0.3)]
        variation: f32,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

/// Error classified by exit code.
pub enum Failure {
    Runtime(anyhow::Error),
    Invalid(anyhow::Error),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Runtime(_) => 1,
            Failure::Invalid(_) => 2,
        }
    }
}

pub fn invalid(e: impl Into<anyhow::Error>) -> Failure {
    Failure::Invalid(e.into())
}

pub fn runtime(e: impl Into<anyhow::Error>) -> Failure {
    Failure::Runtime(e.into())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => log::LevelFilter::Warn,
        1 => log::LevelFilter::Info,
        _ => log::LevelFilter::Debug,
    };
    env_logger::Builder::new()
        .filter_level(level)
        .format_timestamp(None)
        .target(env_logger::Target::Stderr)
        .init();

    let result = match cli.command {
        Command::Index {
            dataset,
            index,
            config,
            gate_override,
            pairwise,
        } => commands::index(&dataset, &index, &config, gate_override, pairwise),
        Command::Evaluate {
            index,
            kb,
            image,
            config,
            out,
            top_k,
            min_confidence,
            gate_override,
            qa,
        } => commands::evaluate(commands::EvaluateArgs {
            index,
            kb,
            image,
            config,
            out,
            top_k,
            min_confidence,
            gate_override,
            qa,
        }),
        Command::Crr {
            index,
            config,
            out,
            subset_curve,
            seed,
            sample_cap,
        } => commands::crr(
            &index,
            &config,
            out.as_deref(),
            subset_curve,
            seed,
            sample_cap,
        ),
        Command::KbValidate { kb } => commands::kb_validate(&kb),
        Command::Stats { index, config, out } => commands::stats(&index, &config, out.as_deref()),
        Command::Synth {
            out_dir,
            per_class,
            size,
            variation,
            seed,
        } => commands::synth(&out_dir, per_class, size, variation, seed),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            let (Failure::Runtime(e) | Failure::Invalid(e)) = &f;
            eprintln!("error: {e:#}");
            ExitCode::from(f.code())
        }
    }
}
