//! Multi-agent planar trajectories: the long CSV format, validation and
//! endpoint truncation.
//!
//! A long CSV file holds one row per agent per sample:
//!
//! ```text
//! # fs=60
//! # position:P1=FL
//! # ipd=2
//! # condition=heading
//! # sequence=LR
//! time,id,x,y
//! 0,P1,0.0,1.0
//! 0,P2,1.0,1.0
//! ...
//! ```

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt;
use std::io::{BufRead, Write};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lagcorr::{default_omega, Mode};

/// Planar point or vector, `[x, y]`.
pub type Vec2 = [f64; 2];

/// Tolerance on sample timestamps, in seconds.
pub const TIME_TOLERANCE_S: f64 = 1e-6;

/// Raw step speeds above this are reported as implausible for walking.
pub const PLAUSIBLE_SPEED_MPS: f64 = 10.0;

pub const CSV_HEADER: &str = "time,id,x,y";

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct AgentId(pub String);

impl AgentId {
    pub fn new(id: impl Into<String>) -> Self {
        AgentId(id.into())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for AgentId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<&str> for AgentId {
    fn from(s: &str) -> Self {
        AgentId(s.to_owned())
    }
}

/// Slot in the square starting formation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Position {
    FL,
    FR,
    BL,
    BR,
}

impl Position {
    pub const ALL: [Position; 4] = [Position::FL, Position::FR, Position::BL, Position::BR];

    pub fn as_str(self) -> &'static str {
        match self {
            Position::FL => "FL",
            Position::FR => "FR",
            Position::BL => "BL",
            Position::BR => "BR",
        }
    }

    pub fn is_front(self) -> bool {
        matches!(self, Position::FL | Position::FR)
    }
}

impl fmt::Display for Position {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Position {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "FL" => Ok(Position::FL),
            "FR" => Ok(Position::FR),
            "BL" => Ok(Position::BL),
            "BR" => Ok(Position::BR),
            other => Err(format!("unknown formation position {other:?}")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Condition {
    Heading,
    Speed,
    Control,
}

impl Condition {
    pub fn as_str(self) -> &'static str {
        match self {
            Condition::Heading => "heading",
            Condition::Speed => "speed",
            Condition::Control => "control",
        }
    }
}

impl FromStr for Condition {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "heading" => Ok(Condition::Heading),
            "speed" => Ok(Condition::Speed),
            "control" => Ok(Condition::Control),
            other => Err(format!("unknown condition {other:?}")),
        }
    }
}

/// Optional experimental metadata attached to a trial.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TrialMeta {
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub positions: BTreeMap<AgentId, Position>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ipd_m: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub condition: Option<Condition>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sequence_tag: Option<String>,
}

/// Per-agent 2D position series sampled on a common uniform time base.
///
/// Fields are public so that callers can assemble trials by hand; use
/// [`Trial::new`] to get the invariants checked.
#[derive(Debug, Clone, PartialEq)]
pub struct Trial {
    pub agents: Vec<AgentId>,
    pub sample_rate_hz: f64,
    /// `positions[agent][sample]`, metres.
    pub positions: Vec<Vec<Vec2>>,
    pub meta: TrialMeta,
}

/// Minimum number of samples a trial must hold at the given sampling rate:
/// two full heading-correlation windows.
pub fn min_samples(sample_rate_hz: f64) -> usize {
    2 * (2 * default_omega(Mode::Heading, sample_rate_hz) + 1)
}

impl Trial {
    pub fn new(
        agents: Vec<AgentId>,
        sample_rate_hz: f64,
        positions: Vec<Vec<Vec2>>,
        meta: TrialMeta,
    ) -> Result<Self> {
        let trial = Trial {
            agents,
            sample_rate_hz,
            positions,
            meta,
        };
        trial.check()?;
        Ok(trial)
    }

    pub fn n_agents(&self) -> usize {
        self.agents.len()
    }

    /// Samples per agent (the length of the first agent's series).
    pub fn len(&self) -> usize {
        self.positions.first().map_or(0, Vec::len)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn dt(&self) -> f64 {
        1.0 / self.sample_rate_hz
    }

    pub fn agent_index(&self, id: &AgentId) -> Option<usize> {
        self.agents.iter().position(|a| a == id)
    }

    pub fn position_of(&self, agent: usize) -> Option<Position> {
        self.meta.positions.get(&self.agents[agent]).copied()
    }

    /// Turns the first hard violation reported by [`validate`] into an error.
    fn check(&self) -> Result<()> {
        for d in validate(self) {
            if d.severity == Severity::Warning {
                continue;
            }
            return Err(match d.kind {
                DiagnosticKind::TooShort => Error::Range(d.message),
                DiagnosticKind::BadSampleRate => Error::Timing(d.message),
                _ => Error::Structure(d.message),
            });
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TrialFormat {
    LongCsv,
}

/// Reads a trial from `reader`.
pub fn load_trial<R: BufRead>(reader: R, format: TrialFormat) -> Result<Trial> {
    match format {
        TrialFormat::LongCsv => load_long_csv(reader),
    }
}

fn parse_err(line: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        line,
        message: message.into(),
    }
}

fn load_long_csv<R: BufRead>(reader: R) -> Result<Trial> {
    let mut header_fs: Option<f64> = None;
    let mut meta = TrialMeta::default();
    let mut saw_header = false;
    let mut agents: Vec<AgentId> = Vec::new();
    let mut index_of: HashMap<String, usize> = HashMap::new();
    // (time, x, y) rows per agent in file order
    let mut rows: Vec<Vec<(f64, f64, f64)>> = Vec::new();

    for (lineno, line) in reader.lines().enumerate() {
        let lineno = lineno + 1;
        let line = line.map_err(|e| parse_err(lineno, e.to_string()))?;
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        if let Some(comment) = line.strip_prefix('#') {
            parse_comment(comment.trim(), lineno, &mut header_fs, &mut meta)?;
            continue;
        }
        if !saw_header {
            if line != CSV_HEADER {
                return Err(parse_err(
                    lineno,
                    format!("expected header {CSV_HEADER:?}, found {line:?}"),
                ));
            }
            saw_header = true;
            continue;
        }
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        if fields.len() != 4 {
            return Err(parse_err(
                lineno,
                format!("expected 4 fields, found {}", fields.len()),
            ));
        }
        let num = |s: &str, what: &str| -> Result<f64> {
            let v: f64 = s
                .parse()
                .map_err(|_| parse_err(lineno, format!("invalid {what} {s:?}")))?;
            if !v.is_finite() {
                return Err(parse_err(lineno, format!("non-finite {what} {s:?}")));
            }
            Ok(v)
        };
        let time = num(fields[0], "time")?;
        let id = fields[1];
        if id.is_empty() {
            return Err(parse_err(lineno, "empty agent id"));
        }
        let x = num(fields[2], "x")?;
        let y = num(fields[3], "y")?;
        let idx = *index_of.entry(id.to_owned()).or_insert_with(|| {
            agents.push(AgentId::new(id));
            rows.push(Vec::new());
            agents.len() - 1
        });
        rows[idx].push((time, x, y));
    }

    if !saw_header {
        return Err(parse_err(0, "missing header line"));
    }
    if agents.is_empty() {
        return Err(Error::Structure("no data rows".into()));
    }

    for series in &mut rows {
        series.sort_by(|a, b| a.0.total_cmp(&b.0));
    }
    let len = rows[0].len();
    for (agent, series) in agents.iter().zip(&rows) {
        if series.len() != len {
            return Err(Error::Structure(format!(
                "ragged input: agent {agent} has {} samples, agent {} has {len}",
                series.len(),
                agents[0]
            )));
        }
    }
    if len < 2 {
        return Err(Error::Structure("fewer than two samples per agent".into()));
    }

    let times: Vec<f64> = rows[0].iter().map(|r| r.0).collect();
    for (agent, series) in agents.iter().zip(&rows).skip(1) {
        if let Some(k) = series
            .iter()
            .zip(&times)
            .position(|(r, t)| (r.0 - t).abs() > TIME_TOLERANCE_S)
        {
            return Err(Error::Timing(format!(
                "agent {agent} sample {k} at t={} does not match t={}",
                series[k].0, times[k]
            )));
        }
    }

    let mut steps: Vec<f64> = times.windows(2).map(|w| w[1] - w[0]).collect();
    let dt = match header_fs {
        Some(fs) => 1.0 / fs,
        None => {
            steps.sort_by(f64::total_cmp);
            steps[steps.len() / 2]
        }
    };
    if dt <= 0.0 {
        return Err(Error::Timing("duplicate timestamps".into()));
    }
    for (k, w) in times.windows(2).enumerate() {
        let step = w[1] - w[0];
        if (step - dt).abs() > TIME_TOLERANCE_S {
            return Err(Error::Timing(format!(
                "time step {step} s between samples {k} and {} deviates from {dt} s",
                k + 1
            )));
        }
    }
    let sample_rate_hz = header_fs.unwrap_or(1.0 / dt);

    for id in meta.positions.keys() {
        if !index_of.contains_key(id.as_str()) {
            return Err(Error::Structure(format!(
                "formation label for unknown agent {id}"
            )));
        }
    }

    let positions = rows
        .into_iter()
        .map(|series| series.into_iter().map(|(_, x, y)| [x, y]).collect())
        .collect();
    Trial::new(agents, sample_rate_hz, positions, meta)
}

fn parse_comment(
    comment: &str,
    lineno: usize,
    fs: &mut Option<f64>,
    meta: &mut TrialMeta,
) -> Result<()> {
    if let Some(v) = comment.strip_prefix("fs=") {
        let hz: f64 = v
            .trim()
            .parse()
            .map_err(|_| parse_err(lineno, format!("invalid fs {v:?}")))?;
        if !(hz.is_finite() && hz > 0.0) {
            return Err(parse_err(lineno, format!("fs must be positive, got {v}")));
        }
        *fs = Some(hz);
    } else if let Some(v) = comment.strip_prefix("position:") {
        let (id, label) = v
            .split_once('=')
            .ok_or_else(|| parse_err(lineno, format!("malformed position comment {v:?}")))?;
        let pos: Position = label.trim().parse().map_err(|e| parse_err(lineno, e))?;
        meta.positions.insert(AgentId::new(id.trim()), pos);
    } else if let Some(v) = comment.strip_prefix("ipd=") {
        let ipd: f64 = v
            .trim()
            .parse()
            .map_err(|_| parse_err(lineno, format!("invalid ipd {v:?}")))?;
        meta.ipd_m = Some(ipd);
    } else if let Some(v) = comment.strip_prefix("condition=") {
        meta.condition = Some(v.trim().parse().map_err(|e| parse_err(lineno, e))?);
    } else if let Some(v) = comment.strip_prefix("sequence=") {
        meta.sequence_tag = Some(v.trim().to_owned());
    }
    // other comments are free text
    Ok(())
}

/// Writes `trial` in the long CSV format. Coordinates use the shortest
/// representation that reads back to the same `f64`.
pub fn write_trial<W: Write>(trial: &Trial, mut w: W) -> std::io::Result<()> {
    writeln!(w, "# fs={}", trial.sample_rate_hz)?;
    for (id, pos) in &trial.meta.positions {
        writeln!(w, "# position:{id}={pos}")?;
    }
    if let Some(ipd) = trial.meta.ipd_m {
        writeln!(w, "# ipd={ipd}")?;
    }
    if let Some(c) = trial.meta.condition {
        writeln!(w, "# condition={}", c.as_str())?;
    }
    if let Some(tag) = &trial.meta.sequence_tag {
        writeln!(w, "# sequence={tag}")?;
    }
    writeln!(w, "{CSV_HEADER}")?;
    let dt = trial.dt();
    for t in 0..trial.len() {
        let time = t as f64 * dt;
        for (id, series) in trial.agents.iter().zip(&trial.positions) {
            let [x, y] = series[t];
            writeln!(w, "{time},{id},{x},{y}")?;
        }
    }
    Ok(())
}

/// Drops `round(head_s·fs)` leading and `round(tail_s·fs)` trailing samples
/// from every agent.
pub fn truncate(trial: &Trial, head_s: f64, tail_s: f64) -> Result<Trial> {
    if !(head_s >= 0.0 && tail_s >= 0.0) {
        return Err(Error::Range(format!(
            "truncation must be non-negative, got head={head_s} tail={tail_s}"
        )));
    }
    let head = (head_s * trial.sample_rate_hz).round() as usize;
    let tail = (tail_s * trial.sample_rate_hz).round() as usize;
    let len = trial.len();
    let min = min_samples(trial.sample_rate_hz);
    let remaining = len.saturating_sub(head + tail);
    if head + tail > len || remaining < min {
        return Err(Error::Range(format!(
            "truncating {head}+{tail} of {len} samples leaves {remaining}, minimum is {min}"
        )));
    }
    let positions = trial
        .positions
        .iter()
        .map(|s| s[head..len - tail].to_vec())
        .collect();
    Ok(Trial {
        positions,
        ..trial.clone()
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Severity {
    Violation,
    Warning,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DiagnosticKind {
    NonFinite,
    Ragged,
    DuplicateAgent,
    TooShort,
    BadSampleRate,
    BadFormation,
    ImplausibleSpeed,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Diagnostic {
    pub kind: DiagnosticKind,
    pub severity: Severity,
    pub agent: Option<AgentId>,
    pub index: Option<usize>,
    pub message: String,
}

impl Diagnostic {
    fn violation(kind: DiagnosticKind, message: String) -> Self {
        Diagnostic {
            kind,
            severity: Severity::Violation,
            agent: None,
            index: None,
            message,
        }
    }
}

/// Lists every invariant violation of `trial`, plus plausibility warnings
/// for bursts of raw step speed above [`PLAUSIBLE_SPEED_MPS`].
pub fn validate(trial: &Trial) -> Vec<Diagnostic> {
    let mut out = Vec::new();
    let fs = trial.sample_rate_hz;
    let fs_ok = fs.is_finite() && fs > 0.0;
    if !fs_ok {
        out.push(Diagnostic::violation(
            DiagnosticKind::BadSampleRate,
            format!("sample rate must be positive, got {fs}"),
        ));
    }
    if trial.agents.is_empty() {
        out.push(Diagnostic::violation(
            DiagnosticKind::Ragged,
            "trial has no agents".into(),
        ));
    }
    if trial.agents.len() != trial.positions.len() {
        out.push(Diagnostic::violation(
            DiagnosticKind::Ragged,
            format!(
                "{} agent ids but {} position series",
                trial.agents.len(),
                trial.positions.len()
            ),
        ));
    }

    let mut seen = HashSet::new();
    for id in &trial.agents {
        if !seen.insert(id) {
            out.push(Diagnostic {
                agent: Some(id.clone()),
                ..Diagnostic::violation(
                    DiagnosticKind::DuplicateAgent,
                    format!("duplicate agent id {id}"),
                )
            });
        }
    }

    let len = trial.len();
    for (id, series) in trial.agents.iter().zip(&trial.positions) {
        if series.len() != len {
            out.push(Diagnostic {
                agent: Some(id.clone()),
                ..Diagnostic::violation(
                    DiagnosticKind::Ragged,
                    format!("agent {id} has {} samples, expected {len}", series.len()),
                )
            });
        }
    }
    if fs_ok {
        let min = min_samples(fs);
        if len < min {
            out.push(Diagnostic::violation(
                DiagnosticKind::TooShort,
                format!("{len} samples per agent, minimum is {min}"),
            ));
        }
    }

    for (id, series) in trial.agents.iter().zip(&trial.positions) {
        for (k, p) in series.iter().enumerate() {
            if !(p[0].is_finite() && p[1].is_finite()) {
                out.push(Diagnostic {
                    agent: Some(id.clone()),
                    index: Some(k),
                    ..Diagnostic::violation(
                        DiagnosticKind::NonFinite,
                        format!("agent {id} sample {k} is not finite"),
                    )
                });
            }
        }
    }

    if !trial.meta.positions.is_empty() {
        let known: HashSet<&AgentId> = trial.agents.iter().collect();
        for id in trial.meta.positions.keys() {
            if !known.contains(id) {
                out.push(Diagnostic::violation(
                    DiagnosticKind::BadFormation,
                    format!("formation label for unknown agent {id}"),
                ));
            }
        }
        if trial.agents.len() == 4 {
            let labels: HashSet<Position> = trial
                .agents
                .iter()
                .filter_map(|a| trial.meta.positions.get(a).copied())
                .collect();
            if labels.len() != 4 {
                out.push(Diagnostic::violation(
                    DiagnosticKind::BadFormation,
                    "formation labels are not a bijection onto FL, FR, BL, BR".into(),
                ));
            }
        }
    }

    if fs_ok {
        for (id, series) in trial.agents.iter().zip(&trial.positions) {
            let mut in_burst = false;
            for (k, w) in series.windows(2).enumerate() {
                let step = ((w[1][0] - w[0][0]).powi(2) + (w[1][1] - w[0][1]).powi(2)).sqrt();
                let speed = step * fs;
                // NaN compares false and is reported above
                let fast = speed > PLAUSIBLE_SPEED_MPS;
                if fast && !in_burst {
                    out.push(Diagnostic {
                        kind: DiagnosticKind::ImplausibleSpeed,
                        severity: Severity::Warning,
                        agent: Some(id.clone()),
                        index: Some(k),
                        message: format!(
                            "agent {id} moves at {speed:.1} m/s between samples {k} and {}",
                            k + 1
                        ),
                    });
                }
                in_burst = fast;
            }
        }
    }
    out
}
