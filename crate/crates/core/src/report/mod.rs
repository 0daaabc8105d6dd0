//! End-to-end analysis of trial files and the artifacts it emits.

mod artifacts;
mod svg;

use std::collections::HashSet;
use std::fs;
use std::io::BufReader;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lagcorr::{correlation_map, AnalysisParams, CorrelationMap, Mode, DEFAULT_TAU_MAX_S};
use crate::leadership::{leadership_index, LeadershipScore, PairProfiles};
use crate::network::{reconstruct, WindowNetworks, DEFAULT_THRESHOLD, DEFAULT_WINDOWS};
use crate::preprocess::{derive_kinematics, KinematicSeries, KinematicsConfig};
use crate::trajectory::{load_trial, truncate, Trial, TrialFormat};

pub use artifacts::{
    leadership_report, network_report, read_leadership_report, summarize, write_atomic,
    AuditParams, EdgeRecord, LeadershipReport, NetworkReport, NetworkWindowRecord, SummaryOutput,
    SCHEMA_VERSION,
};
pub use svg::{render_heatmap_file, render_heatmap_svg};

/// Which artifact families to write.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Emit {
    pub json: bool,
    pub csv: bool,
    pub svg: bool,
    pub dot: bool,
}

impl Default for Emit {
    fn default() -> Self {
        Emit {
            json: true,
            csv: true,
            svg: false,
            dot: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub modes: Vec<Mode>,
    /// Overrides the per-mode default half-window.
    pub omega: Option<usize>,
    pub tau_max_s: f64,
    pub windows: usize,
    pub theta: f64,
    pub kinematics: KinematicsConfig,
    pub truncate_head_s: f64,
    pub truncate_tail_s: f64,
    pub emit: Emit,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            modes: Mode::BOTH.to_vec(),
            omega: None,
            tau_max_s: DEFAULT_TAU_MAX_S,
            windows: DEFAULT_WINDOWS,
            theta: DEFAULT_THRESHOLD,
            kinematics: KinematicsConfig::default(),
            truncate_head_s: 0.0,
            truncate_tail_s: 0.0,
            emit: Emit::default(),
        }
    }
}

impl RunConfig {
    pub fn params(&self, mode: Mode, sample_rate_hz: f64) -> AnalysisParams {
        let mut p = AnalysisParams::for_mode(mode, sample_rate_hz);
        if let Some(omega) = self.omega {
            p.omega = omega;
        }
        p.tau_max_s = self.tau_max_s;
        p
    }

    pub fn validate(&self) -> Result<()> {
        if self.modes.is_empty() {
            return Err(Error::Config("no analysis mode selected".into()));
        }
        if self.windows == 0 {
            return Err(Error::Config("windows must be at least 1".into()));
        }
        if !(0.0..=1.0).contains(&self.theta) {
            return Err(Error::Config(format!(
                "theta {} outside [0, 1]",
                self.theta
            )));
        }
        if self.tau_max_s.is_nan() || self.tau_max_s <= 0.0 {
            return Err(Error::Config(format!(
                "tau_max {} must be positive",
                self.tau_max_s
            )));
        }
        Ok(())
    }
}

/// Results of one correlation mode on one trial.
#[derive(Debug, Clone)]
pub struct ModeAnalysis {
    pub params: AnalysisParams,
    /// One map per ordered pair, in `(i, j)` lexicographic order.
    pub maps: Vec<CorrelationMap>,
    pub profiles: PairProfiles,
    pub scores: Vec<LeadershipScore>,
    pub networks: Vec<WindowNetworks>,
}

#[derive(Debug, Clone)]
pub struct TrialAnalysis {
    pub name: String,
    /// The trial after truncation.
    pub trial: Trial,
    pub kinematics: Vec<KinematicSeries>,
    pub modes: Vec<ModeAnalysis>,
}

impl TrialAnalysis {
    pub fn mode(&self, mode: Mode) -> Option<&ModeAnalysis> {
        self.modes.iter().find(|m| m.params.mode == mode)
    }
}

/// Correlation maps, delay profiles, leadership indices and windowed
/// networks for one mode.
pub fn analyze_mode(
    trial: &Trial,
    kinematics: &[KinematicSeries],
    mode: Mode,
    config: &RunConfig,
) -> Result<ModeAnalysis> {
    let params = config.params(mode, trial.sample_rate_hz);
    let n = trial.n_agents();
    let pairs: Vec<(usize, usize)> = (0..n)
        .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
        .collect();
    let maps = pairs
        .par_iter()
        .map(|&pair| correlation_map(kinematics, pair, &params))
        .collect::<Result<Vec<_>>>()?;
    let profiles = PairProfiles::from_maps(n, &maps);
    let scores = (0..n)
        .map(|a| leadership_index(&profiles, &trial.agents, a))
        .collect::<Result<Vec<_>>>()?;
    let networks = reconstruct(&profiles, &trial.agents, config.windows, config.theta)?;
    Ok(ModeAnalysis {
        params,
        maps,
        profiles,
        scores,
        networks,
    })
}

/// Truncates, derives kinematics, and analyzes every configured mode.
pub fn analyze_trial(name: &str, trial: &Trial, config: &RunConfig) -> Result<TrialAnalysis> {
    config.validate()?;
    let trial = truncate(trial, config.truncate_head_s, config.truncate_tail_s)?;
    let kinematics = derive_kinematics(&trial, &config.kinematics)?;
    let modes = config
        .modes
        .iter()
        .map(|&mode| analyze_mode(&trial, &kinematics, mode, config))
        .collect::<Result<Vec<_>>>()?;
    Ok(TrialAnalysis {
        name: name.to_owned(),
        trial,
        kinematics,
        modes,
    })
}

pub fn load_trial_file(path: &Path) -> Result<Trial> {
    let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    load_trial(BufReader::new(file), TrialFormat::LongCsv).map_err(|e| match e {
        Error::Parse { line, message } => Error::Parse {
            line,
            message: format!("{}: {message}", path.display()),
        },
        other => other,
    })
}

/// Expands directories into their `.csv` files, sorted.
pub fn collect_inputs(inputs: &[PathBuf], extension: &str) -> Result<Vec<PathBuf>> {
    let mut out = Vec::new();
    for input in inputs {
        if input.is_dir() {
            let mut found = Vec::new();
            walk(input, extension, &mut found)?;
            found.sort();
            out.extend(found);
        } else {
            out.push(input.clone());
        }
    }
    Ok(out)
}

fn walk(dir: &Path, extension: &str, out: &mut Vec<PathBuf>) -> Result<()> {
    for entry in fs::read_dir(dir).map_err(|e| Error::io(dir, e))? {
        let path = entry.map_err(|e| Error::io(dir, e))?.path();
        if path.is_dir() {
            walk(&path, extension, out)?;
        } else if path.extension().is_some_and(|e| e == extension) {
            out.push(path);
        }
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Failure {
    pub input: String,
    pub error: String,
}

/// Outcome of an `analyze` run, also written as `summary.json`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RunSummary {
    pub schema_version: u32,
    pub status: String,
    pub processed: Vec<String>,
    pub failures: Vec<Failure>,
}

impl RunSummary {
    pub fn ok(&self) -> bool {
        self.failures.is_empty()
    }
}

/// Analyzes every input trial concurrently, writing artifacts under
/// `out_dir/<trial name>/`. A failing trial is recorded in the summary and
/// does not affect the others.
pub fn run_analyze(inputs: &[PathBuf], config: &RunConfig, out_dir: &Path) -> Result<RunSummary> {
    config.validate()?;
    let files = collect_inputs(inputs, "csv")?;
    if files.is_empty() {
        return Err(Error::Config("no input trials".into()));
    }
    fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;

    let mut names = HashSet::new();
    let jobs: Vec<(PathBuf, String, bool)> = files
        .into_iter()
        .map(|path| {
            let name = path
                .file_stem()
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_else(|| "trial".into());
            let unique = names.insert(name.clone());
            (path, name, unique)
        })
        .collect();

    let results: Vec<(String, Result<()>)> = jobs
        .par_iter()
        .map(|(path, name, unique)| {
            let outcome = if !unique {
                Err(Error::Config(format!(
                    "another input is also named {name:?}"
                )))
            } else {
                load_trial_file(path)
                    .and_then(|trial| analyze_trial(name, &trial, config))
                    .and_then(|analysis| {
                        artifacts::write_trial_artifacts(&analysis, config, &out_dir.join(name))
                    })
            };
            (path.display().to_string(), outcome)
        })
        .collect();

    let mut processed = Vec::new();
    let mut failures = Vec::new();
    for (input, outcome) in results {
        match outcome {
            Ok(()) => processed.push(input),
            Err(e) => failures.push(Failure {
                input,
                error: e.to_string(),
            }),
        }
    }
    let summary = RunSummary {
        schema_version: SCHEMA_VERSION,
        status: if failures.is_empty() { "ok" } else { "error" }.into(),
        processed,
        failures,
    };
    let text = serde_json::to_string_pretty(&summary).expect("summary serializes");
    write_atomic(&out_dir.join("summary.json"), (text + "\n").as_bytes())?;
    Ok(summary)
}
