use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lagcorr::{optimal_delay, write_heatmap_csv, Mode, TIE_TOLERANCE};
use crate::leadership::{aggregate, Grouping, LeadershipScore};
use crate::network::InfluenceNetwork;
use crate::numfmt::{fmt_num, round_sig};
use crate::preprocess::MIN_HEADING_SPEED;
use crate::trajectory::{AgentId, TrialMeta};

use super::svg::render_heatmap_svg;
use super::{collect_inputs, ModeAnalysis, RunConfig, TrialAnalysis};

pub const SCHEMA_VERSION: u32 = 1;

/// Every numeric setting that shaped a result.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuditParams {
    pub sample_rate_hz: f64,
    pub omega: usize,
    pub tau_max_s: f64,
    pub max_lag: usize,
    pub windows: usize,
    pub theta: f64,
    pub heading_cutoff_hz: f64,
    pub speed_cutoff_hz: f64,
    pub filter_order: usize,
    pub truncate_head_s: f64,
    pub truncate_tail_s: f64,
    pub min_heading_speed: f64,
    pub tie_tolerance: f64,
}

impl AuditParams {
    fn new(analysis: &TrialAnalysis, mode: &ModeAnalysis, config: &RunConfig) -> Self {
        let fs = analysis.trial.sample_rate_hz;
        AuditParams {
            sample_rate_hz: fs,
            omega: mode.params.omega,
            tau_max_s: mode.params.tau_max_s,
            max_lag: mode.params.max_lag(fs),
            windows: config.windows,
            theta: config.theta,
            heading_cutoff_hz: config.kinematics.heading_cutoff_hz,
            speed_cutoff_hz: config.kinematics.speed_cutoff_hz,
            filter_order: config.kinematics.order,
            truncate_head_s: config.truncate_head_s,
            truncate_tail_s: config.truncate_tail_s,
            min_heading_speed: MIN_HEADING_SPEED,
            tie_tolerance: TIE_TOLERANCE,
        }
    }

    /// `key=value` lines for CSV headers.
    fn header_lines(&self, mode: Option<Mode>) -> Vec<String> {
        let mut lines = Vec::new();
        if let Some(m) = mode {
            lines.push(format!("mode={m}"));
        }
        lines.extend([
            format!("fs={}", fmt_num(self.sample_rate_hz)),
            format!("tau_max_s={}", fmt_num(self.tau_max_s)),
            format!("windows={}", self.windows),
            format!("theta={}", fmt_num(self.theta)),
            format!("heading_cutoff_hz={}", fmt_num(self.heading_cutoff_hz)),
            format!("speed_cutoff_hz={}", fmt_num(self.speed_cutoff_hz)),
            format!("filter_order={}", self.filter_order),
            format!("truncate_head_s={}", fmt_num(self.truncate_head_s)),
            format!("truncate_tail_s={}", fmt_num(self.truncate_tail_s)),
            format!("min_heading_speed={}", fmt_num(self.min_heading_speed)),
            format!("tie_tolerance={}", fmt_num(self.tie_tolerance)),
        ]);
        lines
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LeadershipReport {
    pub schema_version: u32,
    pub trial: String,
    pub mode: Mode,
    pub params: AuditParams,
    pub meta: TrialMeta,
    pub agents: Vec<AgentId>,
    pub scores: Vec<LeadershipScore>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EdgeRecord {
    pub from: AgentId,
    pub to: AgentId,
    pub weight: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetworkWindowRecord {
    pub index: usize,
    /// First sample of the window.
    pub start: usize,
    /// One past the last sample.
    pub end: usize,
    pub nodes: Vec<AgentId>,
    /// Edges after DPI pruning and thresholding.
    pub edges: Vec<EdgeRecord>,
    pub after_dpi: Vec<EdgeRecord>,
    /// All ordered-pair weights before pruning.
    pub raw: Vec<EdgeRecord>,
    pub undefined: Vec<(AgentId, AgentId)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetworkReport {
    pub schema_version: u32,
    pub trial: String,
    pub mode: Mode,
    pub params: AuditParams,
    pub windows: Vec<NetworkWindowRecord>,
}

fn edge_records(net: &InfluenceNetwork) -> Vec<EdgeRecord> {
    net.edges
        .iter()
        .map(|(&(i, j), &w)| EdgeRecord {
            from: net.nodes[i].clone(),
            to: net.nodes[j].clone(),
            weight: round_sig(w),
        })
        .collect()
}

fn rounded_score(s: &LeadershipScore) -> LeadershipScore {
    LeadershipScore {
        index_percent: round_sig(s.index_percent),
        per_pair_fractions: s
            .per_pair_fractions
            .iter()
            .map(|(k, v)| (k.clone(), round_sig(*v)))
            .collect(),
        ..s.clone()
    }
}

/// Leadership scores of one mode with the settings that produced them.
pub fn leadership_report(
    analysis: &TrialAnalysis,
    mode: &ModeAnalysis,
    config: &RunConfig,
) -> LeadershipReport {
    LeadershipReport {
        schema_version: SCHEMA_VERSION,
        trial: analysis.name.clone(),
        mode: mode.params.mode,
        params: AuditParams::new(analysis, mode, config),
        meta: analysis.trial.meta.clone(),
        agents: analysis.trial.agents.clone(),
        scores: mode.scores.iter().map(rounded_score).collect(),
    }
}

/// Windowed networks of one mode at every pruning stage.
pub fn network_report(
    analysis: &TrialAnalysis,
    mode: &ModeAnalysis,
    config: &RunConfig,
) -> NetworkReport {
    let agents = &analysis.trial.agents;
    let windows = mode
        .networks
        .iter()
        .enumerate()
        .map(|(index, w)| NetworkWindowRecord {
            index,
            start: w.raw.window.start,
            end: w.raw.window.end,
            nodes: agents.clone(),
            edges: edge_records(&w.pruned),
            after_dpi: edge_records(&w.after_dpi),
            raw: edge_records(&w.raw),
            undefined: w
                .raw
                .undefined
                .iter()
                .map(|&(i, j)| (agents[i].clone(), agents[j].clone()))
                .collect(),
        })
        .collect();
    NetworkReport {
        schema_version: SCHEMA_VERSION,
        trial: analysis.name.clone(),
        mode: mode.params.mode,
        params: AuditParams::new(analysis, mode, config),
        windows,
    }
}

/// Writes `bytes` to a sibling temporary file and renames it into place.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    let tmp = PathBuf::from(tmp);
    fs::write(&tmp, bytes).map_err(|e| Error::io(&tmp, e))?;
    fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
}

fn json_bytes<T: Serialize>(value: &T) -> Vec<u8> {
    let mut v = serde_json::to_vec_pretty(value).expect("report serializes");
    v.push(b'\n');
    v
}

fn file_token(id: &AgentId) -> String {
    id.as_str()
        .chars()
        .map(|c| {
            if c.is_ascii_alphanumeric() || c == '-' {
                c
            } else {
                '_'
            }
        })
        .collect()
}

pub(super) fn write_trial_artifacts(
    analysis: &TrialAnalysis,
    config: &RunConfig,
    dir: &Path,
) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let trial = &analysis.trial;
    let agents = &trial.agents;

    if config.emit.csv {
        let first = analysis.modes.first().expect("at least one mode");
        let params = AuditParams::new(analysis, first, config);
        let mut buf = Vec::new();
        for line in params.header_lines(None) {
            writeln!(buf, "# {line}").unwrap();
        }
        writeln!(buf, "t,id,heading_x,heading_y,speed").unwrap();
        for t in 0..trial.len() {
            for k in &analysis.kinematics {
                let (hx, hy) = match k.heading[t] {
                    Some([x, y]) => (fmt_num(x), fmt_num(y)),
                    None => (String::new(), String::new()),
                };
                writeln!(buf, "{t},{},{hx},{hy},{}", k.agent, fmt_num(k.speed[t])).unwrap();
            }
        }
        write_atomic(&dir.join("kinematics.csv"), &buf)?;
    }

    for mode in &analysis.modes {
        let m = mode.params.mode;
        let params = AuditParams::new(analysis, mode, config);

        if config.emit.csv || config.emit.svg {
            let heat_dir = dir.join("heatmaps");
            fs::create_dir_all(&heat_dir).map_err(|e| Error::io(&heat_dir, e))?;
            for map in &mode.maps {
                let (i, j) = map.pair;
                let stem = format!("{m}_{}_{}", file_token(&agents[i]), file_token(&agents[j]));
                if config.emit.csv {
                    let mut header =
                        vec![format!("from={}", agents[i]), format!("to={}", agents[j])];
                    header.extend(params.header_lines(None));
                    let mut buf = Vec::new();
                    write_heatmap_csv(map, &header, &mut buf)
                        .map_err(|e| Error::io(&heat_dir, e))?;
                    write_atomic(&heat_dir.join(format!("{stem}.csv")), &buf)?;
                }
                if config.emit.svg {
                    let title = format!(
                        "{} {m}: {} \u{2192} {}",
                        analysis.name, agents[i], agents[j]
                    );
                    let svg =
                        render_heatmap_svg(map, &optimal_delay(map), trial.sample_rate_hz, &title);
                    write_atomic(&heat_dir.join(format!("{stem}.svg")), svg.as_bytes())?;
                }
            }
        }

        if config.emit.json {
            let report = leadership_report(analysis, mode, config);
            write_atomic(
                &dir.join(format!("leadership_{m}.json")),
                &json_bytes(&report),
            )?;
            let report = network_report(analysis, mode, config);
            write_atomic(&dir.join(format!("network_{m}.json")), &json_bytes(&report))?;
        }

        if config.emit.dot {
            for (k, w) in mode.networks.iter().enumerate() {
                let dot = w.pruned.to_dot(&format!("{}_{m}_w{k}", analysis.name));
                write_atomic(&dir.join(format!("network_{m}_w{k}.dot")), dot.as_bytes())?;
            }
        }
    }
    Ok(())
}

pub fn read_leadership_report(path: &Path) -> Result<LeadershipReport> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::Json {
        path: path.to_owned(),
        source: e,
    })
}

/// Files written by [`summarize`] and the number of scores each grouping
/// had to skip for lack of metadata.
#[derive(Debug, Clone, PartialEq)]
pub struct SummaryOutput {
    pub files: Vec<PathBuf>,
    pub skipped: BTreeMap<(Mode, Grouping), usize>,
    pub reports_read: usize,
}

/// Aggregates leadership reports found under `inputs` into
/// `aggregate_<mode>_<grouping>.csv` files with rows `group,mean,sem,n`.
pub fn summarize(inputs: &[PathBuf], out_dir: &Path) -> Result<SummaryOutput> {
    let files: Vec<PathBuf> = collect_inputs(inputs, "json")?
        .into_iter()
        .filter(|p| {
            p.file_name()
                .and_then(|n| n.to_str())
                .is_some_and(|n| n.starts_with("leadership_"))
        })
        .collect();
    if files.is_empty() {
        return Err(Error::Config("no leadership reports found".into()));
    }
    let reports = files
        .iter()
        .map(|p| read_leadership_report(p))
        .collect::<Result<Vec<_>>>()?;

    fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    let mut written = Vec::new();
    let mut skipped = BTreeMap::new();
    for mode in Mode::BOTH {
        let entries: Vec<(&TrialMeta, &LeadershipScore)> = reports
            .iter()
            .filter(|r| r.mode == mode)
            .flat_map(|r| r.scores.iter().map(move |s| (&r.meta, s)))
            .collect();
        if entries.is_empty() {
            continue;
        }
        for grouping in [Grouping::ByPosition, Grouping::ByAgent] {
            let report = aggregate(entries.iter().copied(), grouping);
            let mut buf = Vec::new();
            writeln!(buf, "# mode={mode}").unwrap();
            writeln!(buf, "# grouping={}", grouping.as_str()).unwrap();
            writeln!(buf, "# skipped={}", report.skipped).unwrap();
            writeln!(buf, "group,mean,sem,n").unwrap();
            for (group, cell) in &report.cells {
                writeln!(
                    buf,
                    "{group},{},{},{}",
                    fmt_num(cell.mean_percent),
                    fmt_num(cell.sem_percent),
                    cell.n_trials
                )
                .unwrap();
            }
            let path = out_dir.join(format!("aggregate_{mode}_{}.csv", grouping.as_str()));
            write_atomic(&path, &buf)?;
            written.push(path);
            skipped.insert((mode, grouping), report.skipped);
        }
    }
    Ok(SummaryOutput {
        files: written,
        skipped,
        reports_read: reports.len(),
    })
}
