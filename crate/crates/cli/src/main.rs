use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

mod commands;

#[derive(Parser)]
#[command(name = "scnet", version, about = "Sparse band-split music source separation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Print the band plan of each down-sampling block and the width cascade.
    PlanBands {
        #[arg(long)]
        freq_bins: usize,
        /// Low, mid and high fractions of the input bins.
        #[arg(long, value_delimiter = ',', default_values_t = [0.175, 0.392, 0.433])]
        proportions: Vec<f64>,
        #[arg(long, value_delimiter = ',', default_values_t = [1, 4, 16])]
        strides: Vec<usize>,
        #[arg(long, default_value_t = 1)]
        blocks: usize,
    },
    /// Train on a stem dataset and write a checkpoint.
    Train {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Overrides `train.seed` (also seeds the weight init).
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Separate a WAV file into `<source>.wav` files.
    Separate {
        #[arg(long)]
        ckpt: PathBuf,
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        out_dir: PathBuf,
    },
    /// Score estimated stems against references.
    EvalSdr {
        #[arg(long)]
        ref_dir: PathBuf,
        #[arg(long)]
        est_dir: PathBuf,
        #[arg(long, default_value_t = 1.0)]
        chunk_seconds: f64,
    },
    /// Time separation of synthetic audio.
    BenchRtf {
        #[command(flatten)]
        model: ModelSource,
        #[arg(long, default_value_t = 10.0)]
        seconds: f64,
        #[arg(long, default_value_t = 5)]
        reps: usize,
        #[arg(long, default_value_t = 1)]
        warmup: usize,
    },
    /// Analytic parameter count with a per-module breakdown.
    ParamCount {
        /// Run config; the built-in defaults when omitted.
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Write a synthetic stem dataset, one track per fixture kind.
    MakeFixtures {
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Run config supplying sources and sample rate.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, default_value_t = 4.0)]
        seconds: f64,
    },
}

#[derive(Args)]
#[group(required = true, multiple = false)]
struct ModelSource {
    /// Trained checkpoint.
    #[arg(long)]
    ckpt: Option<PathBuf>,
    /// Run config; benchmarks a freshly initialised model.
    #[arg(long)]
    config: Option<PathBuf>,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let res = match cli.command {
        Command::PlanBands { freq_bins, proportions, strides, blocks } => {
            commands::plan_bands(freq_bins, &proportions, &strides, blocks)
        }
        Command::Train { config, data, out, seed } => commands::train(&config, &data, &out, seed),
        Command::Separate { ckpt, input, out_dir } => commands::separate(&ckpt, &input, &out_dir),
        Command::EvalSdr { ref_dir, est_dir, chunk_seconds } => commands::eval_sdr(&ref_dir, &est_dir, chunk_seconds),
        Command::BenchRtf { model, seconds, reps, warmup } => {
            commands::bench_rtf(model.ckpt.as_deref(), model.config.as_deref(), seconds, reps, warmup)
        }
        Command::ParamCount { config } => commands::param_count(config.as_deref()),
        Command::MakeFixtures { out, seed, config, seconds } => {
            commands::make_fixtures(&out, seed, config.as_deref(), seconds)
        }
    };
    match res {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
