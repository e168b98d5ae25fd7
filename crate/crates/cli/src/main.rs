mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

/// Volumetric environment representation pipeline: synthetic scenes,
/// annotation, encoding, navigation and evaluation.
#[derive(Parser, Debug)]
#[command(name = "ver", version)]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug)]
pub struct Global {
    /// Config file of `key = value` lines (default: $VER_CONFIG).
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,
    /// Override one config key; repeatable.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    sets: Vec<String>,
    /// Seed for generation, parameters and sampling (overrides `seed`).
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads for per-viewpoint annotation and per-episode simulation.
    #[arg(long, global = true, default_value_t = 1, value_parser = clap::value_parser!(u64).range(1..))]
    jobs: u64,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Generate a synthetic scene archive (and optionally episodes).
    GenScene {
        #[arg(long, value_name = "DIR")]
        out: PathBuf,
        /// Also write navigation episodes to this file.
        #[arg(long, value_name = "FILE")]
        episodes: Option<PathBuf>,
    },
    /// Build occupancy, box and layout annotations for viewpoints.
    Annotate {
        #[arg(long, value_name = "DIR")]
        scene: PathBuf,
        /// Node id or `all`.
        #[arg(long, default_value = "all")]
        viewpoint: String,
        /// Output file (default: <scene>/annotations.bin).
        #[arg(long, value_name = "FILE")]
        out: Option<PathBuf>,
    },
    /// Encode the views at one viewpoint into a feature pyramid and score the heads.
    Encode {
        #[arg(long, value_name = "DIR")]
        scene: PathBuf,
        #[arg(long)]
        viewpoint: u32,
        /// Parameter file or `seed:N`.
        #[arg(long, default_value = "seed:0")]
        params: String,
        #[arg(long, value_name = "FILE")]
        out: PathBuf,
        /// Write the parameters used (encoder and heads) to this file.
        #[arg(long, value_name = "FILE")]
        params_out: Option<PathBuf>,
    },
    /// One policy decision from a pyramid, an instruction and a memory graph.
    PolicyStep {
        /// Pyramid file written by `encode`.
        #[arg(long, value_name = "FILE")]
        ver: PathBuf,
        /// Instruction file or `seed:N`.
        #[arg(long)]
        instr: String,
        #[arg(long, value_name = "FILE")]
        graph: PathBuf,
        /// Parameter file or `seed:N`.
        #[arg(long, default_value = "seed:0")]
        params: String,
        /// Fused distribution output (default: stdout).
        #[arg(long, value_name = "FILE")]
        out: Option<PathBuf>,
        /// Write the updated memory graph here.
        #[arg(long, value_name = "FILE")]
        graph_out: Option<PathBuf>,
        #[arg(long, value_name = "FILE")]
        params_out: Option<PathBuf>,
    },
    /// Run episodes with the full agent and write trajectories.
    Simulate {
        #[arg(long, value_name = "DIR")]
        scene: PathBuf,
        #[arg(long, value_name = "FILE")]
        episodes: PathBuf,
        /// Parameter file or `seed:N`.
        #[arg(long, default_value = "seed:0")]
        encoder_params: String,
        /// Parameter file or `seed:N`.
        #[arg(long, default_value = "seed:1")]
        policy_params: String,
        /// `argmax` or `sample`.
        #[arg(long, default_value = "argmax")]
        mode: String,
        #[arg(long, value_name = "FILE")]
        out: PathBuf,
    },
    /// Navigation and perception metrics.
    Evaluate {
        #[arg(long, value_name = "FILE", requires_all = ["episodes", "scene"])]
        trajectories: Option<PathBuf>,
        #[arg(long, value_name = "FILE", requires = "trajectories")]
        episodes: Option<PathBuf>,
        #[arg(long, value_name = "DIR", requires = "trajectories")]
        scene: Option<PathBuf>,
        /// Predicted and ground-truth annotation files, `pred,gt`.
        #[arg(long, value_name = "PRED,GT")]
        perception: Option<String>,
        /// Text report (default: stdout).
        #[arg(long, value_name = "FILE")]
        out: Option<PathBuf>,
        /// JSON report.
        #[arg(long, value_name = "FILE")]
        json: Option<PathBuf>,
    },
    /// Run the acceptance checks and print one line per criterion.
    Selfcheck {
        /// Criterion numbers to run (default: all).
        #[arg(long, value_parser = clap::value_parser!(u8).range(1..=9))]
        only: Vec<u8>,
    },
}

/// Failure kinds mapped to exit codes.
pub enum Failure {
    Usage(String),
    Runtime(String),
}

impl From<ver_core::Error> for Failure {
    fn from(e: ver_core::Error) -> Self {
        Failure::Runtime(e.to_string())
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match commands::run(&cli.global, cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(2)
        }
        Err(Failure::Runtime(m)) => {
            eprintln!("error: {}", m.replace('\n', " "));
            ExitCode::from(1)
        }
    }
}
