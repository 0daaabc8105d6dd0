use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use serde_json::json;

use pedlead::error::Error;
use pedlead::lagcorr::{Mode, DEFAULT_TAU_MAX_S};
use pedlead::network::{DEFAULT_THRESHOLD, DEFAULT_WINDOWS};
use pedlead::preprocess::{
    KinematicsConfig, DEFAULT_HEADING_CUTOFF_HZ, DEFAULT_SPEED_CUTOFF_HZ, FILTER_ORDER,
};
use pedlead::report::{self, Emit, RunConfig};
use pedlead::simulate::{self, SimConfig};

#[derive(Parser)]
#[command(
    name = "pedlead",
    version,
    about = "Leadership and influence analysis of walking groups"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Heading,
    Speed,
    Both,
}

#[derive(Clone, Copy, PartialEq, ValueEnum)]
enum EmitArg {
    Json,
    Csv,
    Svg,
    Dot,
}

#[derive(Subcommand)]
enum Command {
    /// Analyze trial CSV files or directories of them.
    Analyze {
        #[arg(required = true)]
        inputs: Vec<PathBuf>,
        #[arg(long, value_enum, default_value = "both")]
        mode: ModeArg,
        /// Half-window in samples; defaults per mode.
        #[arg(long)]
        omega: Option<usize>,
        /// Largest lag in seconds.
        #[arg(long, default_value_t = DEFAULT_TAU_MAX_S)]
        tau_max: f64,
        #[arg(long, default_value_t = DEFAULT_WINDOWS)]
        windows: usize,
        /// Edge weight threshold applied after DPI pruning.
        #[arg(long, default_value_t = DEFAULT_THRESHOLD)]
        theta: f64,
        #[arg(long, default_value_t = DEFAULT_HEADING_CUTOFF_HZ)]
        heading_cutoff: f64,
        #[arg(long, default_value_t = DEFAULT_SPEED_CUTOFF_HZ)]
        speed_cutoff: f64,
        /// Seconds dropped from the start of each trial.
        #[arg(long, default_value_t = 0.0)]
        truncate_head: f64,
        /// Seconds dropped from the end of each trial.
        #[arg(long, default_value_t = 0.0)]
        truncate_tail: f64,
        #[arg(long, short)]
        out: PathBuf,
        #[arg(long, value_enum, value_delimiter = ',', default_value = "json,csv")]
        emit: Vec<EmitArg>,
    },
    /// Generate synthetic trials from a JSON config (one object or an array).
    Simulate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, short)]
        out: PathBuf,
        /// Base seed; trial k of the config gets `seed + k`.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Aggregate leadership reports by position and by agent.
    Summarize {
        #[arg(required = true)]
        inputs: Vec<PathBuf>,
        #[arg(long, short)]
        out: PathBuf,
    },
    /// Render a heatmap CSV to SVG.
    Render {
        heatmap: PathBuf,
        #[arg(long, short)]
        out: PathBuf,
    },
}

fn fail(error: impl std::fmt::Display) -> ExitCode {
    let body = json!({ "status": "error", "error": error.to_string() });
    eprintln!("{}", serde_json::to_string_pretty(&body).expect("json"));
    ExitCode::FAILURE
}

fn load_configs(path: &Path) -> Result<Vec<SimConfig>, Error> {
    let text = fs::read_to_string(path).map_err(|e| Error::Io {
        path: path.to_owned(),
        source: e,
    })?;
    let json_err = |e| Error::Json {
        path: path.to_owned(),
        source: e,
    };
    let value: serde_json::Value = serde_json::from_str(&text).map_err(json_err)?;
    if value.is_array() {
        serde_json::from_value(value).map_err(json_err)
    } else {
        serde_json::from_value(value)
            .map(|c| vec![c])
            .map_err(json_err)
    }
}

fn main() -> ExitCode {
    match Cli::parse().command {
        Command::Analyze {
            inputs,
            mode,
            omega,
            tau_max,
            windows,
            theta,
            heading_cutoff,
            speed_cutoff,
            truncate_head,
            truncate_tail,
            out,
            emit,
        } => {
            let config = RunConfig {
                modes: match mode {
                    ModeArg::Heading => vec![Mode::Heading],
                    ModeArg::Speed => vec![Mode::Speed],
                    ModeArg::Both => Mode::BOTH.to_vec(),
                },
                omega,
                tau_max_s: tau_max,
                windows,
                theta,
                kinematics: KinematicsConfig {
                    heading_cutoff_hz: heading_cutoff,
                    speed_cutoff_hz: speed_cutoff,
                    order: FILTER_ORDER,
                },
                truncate_head_s: truncate_head,
                truncate_tail_s: truncate_tail,
                emit: Emit {
                    json: emit.contains(&EmitArg::Json),
                    csv: emit.contains(&EmitArg::Csv),
                    svg: emit.contains(&EmitArg::Svg),
                    dot: emit.contains(&EmitArg::Dot),
                },
            };
            match report::run_analyze(&inputs, &config, &out) {
                Ok(summary) if summary.ok() => {
                    println!("{}", serde_json::to_string_pretty(&summary).expect("json"));
                    ExitCode::SUCCESS
                }
                Ok(summary) => {
                    eprintln!("{}", serde_json::to_string_pretty(&summary).expect("json"));
                    ExitCode::FAILURE
                }
                Err(e) => fail(e),
            }
        }
        Command::Simulate { config, out, seed } => {
            let mut configs = match load_configs(&config) {
                Ok(c) => c,
                Err(e) => return fail(e),
            };
            if let Some(base) = seed {
                for (k, c) in configs.iter_mut().enumerate() {
                    c.seed = base + k as u64;
                }
            }
            match simulate::corpus(&configs, &out) {
                Ok(corpus) => {
                    println!("wrote {} trials to {}", corpus.trials.len(), out.display());
                    ExitCode::SUCCESS
                }
                Err(e) => fail(e),
            }
        }
        Command::Summarize { inputs, out } => match report::summarize(&inputs, &out) {
            Ok(s) => {
                for f in &s.files {
                    println!("{}", f.display());
                }
                ExitCode::SUCCESS
            }
            Err(e) => fail(e),
        },
        Command::Render { heatmap, out } => match report::render_heatmap_file(&heatmap, &out) {
            Ok(()) => ExitCode::SUCCESS,
            Err(e) => fail(e),
        },
    }
}
