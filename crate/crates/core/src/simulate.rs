//! Synthetic group walks with a known leader-follower structure.
//!
//! Agents start on the vertices of a square and walk forward. Agents with
//! no influencers follow their own script of smooth heading and speed
//! ramps. Every other agent relaxes its heading and speed toward its
//! influencers' states as they were `delay_s` earlier, at `gain` per second
//! per edge, on top of any script of its own. Noise perturbs the motion
//! actually taken at each sample, not the internal state others react to.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::f64::consts::PI;
use std::fs;
use std::io::{self, BufWriter, Write};
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::trajectory::{write_trial, AgentId, Condition, Position, Trial, TrialMeta, Vec2};

/// Duration of every scripted heading or speed change, seconds.
pub const RAMP_S: f64 = 1.0;

pub const MANIFEST_FILE: &str = "manifest.json";
pub const MANIFEST_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CouplingEdge {
    pub from: AgentId,
    pub to: AgentId,
    pub delay_s: f64,
    /// Relaxation rate contributed by this edge, 1/s.
    pub gain: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "action", rename_all = "snake_case")]
pub enum Action {
    TurnLeft { angle_deg: f64 },
    TurnRight { angle_deg: f64 },
    SpeedUp { delta: f64 },
    SlowDown { delta: f64 },
}

impl Action {
    /// (heading change in radians, speed change in m/s)
    fn deltas(self) -> (f64, f64) {
        match self {
            Action::TurnLeft { angle_deg } => (angle_deg.to_radians(), 0.0),
            Action::TurnRight { angle_deg } => (-angle_deg.to_radians(), 0.0),
            Action::SpeedUp { delta } => (0.0, delta),
            Action::SlowDown { delta } => (0.0, -delta),
        }
    }

    fn amount(self) -> f64 {
        match self {
            Action::TurnLeft { angle_deg } | Action::TurnRight { angle_deg } => angle_deg,
            Action::SpeedUp { delta } | Action::SlowDown { delta } => delta,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScriptEvent {
    pub agent: AgentId,
    /// Start of the ramp, seconds.
    pub time_s: f64,
    #[serde(flatten)]
    pub action: Action,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct NoiseSpec {
    /// Standard deviation of the per-sample heading jitter, degrees.
    pub heading_deg: f64,
    /// Standard deviation of the per-sample speed jitter, m/s.
    pub speed: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimConfig {
    pub name: Option<String>,
    pub n_agents: usize,
    /// Agent ids; `P1..Pn` when empty.
    pub agents: Vec<AgentId>,
    /// Square slots. Four-agent configs without one get P1..P4 = FL, FR, BL, BR.
    pub formation: BTreeMap<AgentId, Position>,
    pub ipd_m: f64,
    pub coupling: Vec<CouplingEdge>,
    pub script: Vec<ScriptEvent>,
    pub noise: NoiseSpec,
    /// m/s
    pub initial_speed: f64,
    /// Walking direction, degrees counter-clockwise from +x.
    pub initial_heading_deg: f64,
    pub duration_s: f64,
    pub fs_hz: f64,
    pub seed: u64,
    pub condition: Option<Condition>,
    pub sequence: Option<String>,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            name: None,
            n_agents: 4,
            agents: Vec::new(),
            formation: BTreeMap::new(),
            ipd_m: 2.0,
            coupling: Vec::new(),
            script: Vec::new(),
            noise: NoiseSpec::default(),
            initial_speed: 1.3,
            initial_heading_deg: 90.0,
            duration_s: 20.0,
            fs_hz: 60.0,
            seed: 0,
            condition: None,
            sequence: None,
        }
    }
}

impl SimConfig {
    pub fn agent_ids(&self) -> Vec<AgentId> {
        if self.agents.is_empty() {
            (1..=self.n_agents)
                .map(|k| AgentId::new(format!("P{k}")))
                .collect()
        } else {
            self.agents.clone()
        }
    }

    /// Formation actually used: the configured one, or the default square
    /// assignment for four agents.
    pub fn resolved_formation(&self) -> BTreeMap<AgentId, Position> {
        let ids = self.agent_ids();
        if self.formation.is_empty() && ids.len() == 4 {
            ids.into_iter().zip(Position::ALL).collect()
        } else {
            self.formation.clone()
        }
    }

    pub fn sample_count(&self) -> usize {
        (self.duration_s * self.fs_hz).round() as usize
    }

    pub fn edge(mut self, from: &str, to: &str, delay_s: f64, gain: f64) -> Self {
        self.coupling.push(CouplingEdge {
            from: from.into(),
            to: to.into(),
            delay_s,
            gain,
        });
        self
    }

    pub fn event(mut self, agent: &str, time_s: f64, action: Action) -> Self {
        self.script.push(ScriptEvent {
            agent: agent.into(),
            time_s,
            action,
        });
        self
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if !(self.fs_hz.is_finite() && self.fs_hz > 0.0) {
            return bad(format!("fs_hz must be positive, got {}", self.fs_hz));
        }
        if !(self.duration_s.is_finite() && self.duration_s > 0.0) || self.sample_count() < 2 {
            return bad(format!("duration_s {} too short", self.duration_s));
        }
        let ids = self.agent_ids();
        if ids.is_empty() {
            return bad("no agents".into());
        }
        if !self.agents.is_empty() && self.agents.len() != self.n_agents {
            return bad(format!(
                "n_agents is {} but {} agent ids are listed",
                self.n_agents,
                self.agents.len()
            ));
        }
        let known: HashSet<&AgentId> = ids.iter().collect();
        if known.len() != ids.len() {
            return bad("duplicate agent ids".into());
        }
        if !(self.initial_speed.is_finite() && self.initial_speed >= 0.0) {
            return bad(format!(
                "initial_speed must be non-negative, got {}",
                self.initial_speed
            ));
        }
        if !(self.noise.heading_deg >= 0.0 && self.noise.speed >= 0.0) {
            return bad("noise levels must be non-negative".into());
        }
        let formation = self.resolved_formation();
        if !formation.is_empty() {
            if formation.keys().any(|a| !known.contains(a)) {
                return bad("formation names an unknown agent".into());
            }
            let slots: HashSet<Position> = formation.values().copied().collect();
            if formation.len() != ids.len() || slots.len() != ids.len() {
                return bad("formation must give every agent its own slot".into());
            }
            if ![1.0, 2.0, 4.0].contains(&self.ipd_m) {
                return bad(format!("ipd_m must be 1, 2 or 4, got {}", self.ipd_m));
            }
        } else if !(self.ipd_m.is_finite() && self.ipd_m > 0.0) {
            return bad(format!("ipd_m must be positive, got {}", self.ipd_m));
        }
        for e in &self.coupling {
            if !known.contains(&e.from) || !known.contains(&e.to) {
                return bad(format!(
                    "coupling {} -> {} names an unknown agent",
                    e.from, e.to
                ));
            }
            if e.from == e.to {
                return bad(format!("self-coupling on {}", e.from));
            }
            if !(e.delay_s.is_finite() && e.delay_s >= 0.0) {
                return bad(format!("delay_s must be non-negative, got {}", e.delay_s));
            }
            if !(e.gain.is_finite() && e.gain >= 0.0) {
                return bad(format!("gain must be non-negative, got {}", e.gain));
            }
        }
        for ev in &self.script {
            if !known.contains(&ev.agent) {
                return bad(format!("script names unknown agent {}", ev.agent));
            }
            if !(ev.time_s >= 0.0 && ev.time_s < self.duration_s) {
                return bad(format!("event at {} s lies outside the trial", ev.time_s));
            }
            if !(ev.action.amount().is_finite() && ev.action.amount() >= 0.0) {
                return bad("event amounts must be non-negative".into());
            }
        }
        self.update_order(&ids).map(|_| ())
    }

    /// Agents ordered so that every influencer precedes its followers.
    fn update_order(&self, ids: &[AgentId]) -> Result<Vec<usize>> {
        let index: HashMap<&AgentId, usize> = ids.iter().enumerate().map(|(k, a)| (a, k)).collect();
        let mut indegree = vec![0usize; ids.len()];
        let mut followers: Vec<Vec<usize>> = vec![Vec::new(); ids.len()];
        for e in &self.coupling {
            let (f, t) = (index[&e.from], index[&e.to]);
            followers[f].push(t);
            indegree[t] += 1;
        }
        let mut ready: Vec<usize> = (0..ids.len()).filter(|&k| indegree[k] == 0).rev().collect();
        let mut order = Vec::with_capacity(ids.len());
        while let Some(k) = ready.pop() {
            order.push(k);
            for &t in &followers[k] {
                indegree[t] -= 1;
                if indegree[t] == 0 {
                    ready.push(t);
                }
            }
        }
        if order.len() != ids.len() {
            return Err(Error::Config("coupling graph has a cycle".into()));
        }
        Ok(order)
    }

    fn start_positions(&self, ids: &[AgentId]) -> Vec<Vec2> {
        let theta = self.initial_heading_deg.to_radians();
        let fwd = [theta.cos(), theta.sin()];
        let left = [-theta.sin(), theta.cos()];
        let h = self.ipd_m / 2.0;
        let formation = self.resolved_formation();
        ids.iter()
            .enumerate()
            .map(|(k, id)| {
                let (f, l) = match formation.get(id) {
                    Some(Position::FL) => (h, h),
                    Some(Position::FR) => (h, -h),
                    Some(Position::BL) => (-h, h),
                    Some(Position::BR) => (-h, -h),
                    // abreast, left to right
                    None => (0.0, -(k as f64) * self.ipd_m),
                };
                [f * fwd[0] + l * left[0], f * fwd[1] + l * left[1]]
            })
            .collect()
    }
}

fn ramp(x: f64) -> f64 {
    if x <= 0.0 {
        0.0
    } else if x >= 1.0 {
        1.0
    } else {
        0.5 * (1.0 - (PI * x).cos())
    }
}

fn wrap_angle(a: f64) -> f64 {
    let r = (a + PI).rem_euclid(2.0 * PI) - PI;
    if r == -PI {
        PI
    } else {
        r
    }
}

/// A simulated trial plus the internal states that produced it.
#[derive(Debug, Clone, PartialEq)]
pub struct SimRun {
    pub trial: Trial,
    /// `heading_rad[agent][sample]`: direction of the step taken from
    /// `sample` to `sample + 1`, before noise.
    pub heading_rad: Vec<Vec<f64>>,
    pub speed: Vec<Vec<f64>>,
}

struct Influence {
    source: usize,
    lag: usize,
    rate: f64,
}

pub fn simulate_trial(config: &SimConfig) -> Result<Trial> {
    simulate_run(config).map(|r| r.trial)
}

pub fn simulate_run(config: &SimConfig) -> Result<SimRun> {
    config.validate()?;
    let ids = config.agent_ids();
    let n_agents = ids.len();
    let n = config.sample_count();
    let fs = config.fs_hz;
    let dt = 1.0 / fs;
    let order = config.update_order(&ids)?;
    let index: HashMap<&AgentId, usize> = ids.iter().enumerate().map(|(k, a)| (a, k)).collect();

    let mut influences: Vec<Vec<Influence>> = (0..n_agents).map(|_| Vec::new()).collect();
    for e in &config.coupling {
        influences[index[&e.to]].push(Influence {
            source: index[&e.from],
            lag: (e.delay_s * fs).round() as usize,
            rate: e.gain * dt,
        });
    }
    // explicit Euler is only stable for a total step fraction <= 1
    for inf in &mut influences {
        let total: f64 = inf.iter().map(|i| i.rate).sum();
        if total > 1.0 {
            inf.iter_mut().for_each(|i| i.rate /= total);
        }
    }

    let mut events: Vec<Vec<(f64, f64, f64)>> = vec![Vec::new(); n_agents];
    for ev in &config.script {
        let (dh, ds) = ev.action.deltas();
        events[index[&ev.agent]].push((ev.time_s, dh, ds));
    }
    let offsets = |agent: usize, t: f64| -> (f64, f64) {
        events[agent]
            .iter()
            .fold((0.0, 0.0), |(h, s), &(t0, dh, ds)| {
                let r = ramp((t - t0) / RAMP_S);
                (h + dh * r, s + ds * r)
            })
    };

    let theta0 = config.initial_heading_deg.to_radians();
    let mut heading = vec![vec![theta0; n]; n_agents];
    let mut speed = vec![vec![config.initial_speed; n]; n_agents];
    for step in 0..n - 1 {
        let (t_now, t_next) = (step as f64 * dt, (step + 1) as f64 * dt);
        for &a in &order {
            let (h_now, s_now) = offsets(a, t_now);
            let (h_next, s_next) = offsets(a, t_next);
            if influences[a].is_empty() {
                heading[a][step + 1] = theta0 + h_next;
                speed[a][step + 1] = (config.initial_speed + s_next).max(0.0);
                continue;
            }
            let (th, sp) = (heading[a][step], speed[a][step]);
            let mut new_h = th + (h_next - h_now);
            let mut new_s = sp + (s_next - s_now);
            for inf in &influences[a] {
                let k = (step + 1).saturating_sub(inf.lag);
                new_h += inf.rate * wrap_angle(heading[inf.source][k] - th);
                new_s += inf.rate * (speed[inf.source][k] - sp);
            }
            heading[a][step + 1] = new_h;
            speed[a][step + 1] = new_s.max(0.0);
        }
    }

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let heading_noise = Normal::new(0.0, config.noise.heading_deg.to_radians())
        .map_err(|e| Error::Config(e.to_string()))?;
    let speed_noise =
        Normal::new(0.0, config.noise.speed).map_err(|e| Error::Config(e.to_string()))?;
    let mut positions: Vec<Vec<Vec2>> = config
        .start_positions(&ids)
        .into_iter()
        .map(|p| {
            let mut v = Vec::with_capacity(n);
            v.push(p);
            v
        })
        .collect();
    for step in 0..n - 1 {
        for a in 0..n_agents {
            let th = heading[a][step] + heading_noise.sample(&mut rng);
            let sp = (speed[a][step] + speed_noise.sample(&mut rng)).max(0.0);
            let [x, y] = positions[a][step];
            positions[a].push([x + sp * dt * th.cos(), y + sp * dt * th.sin()]);
        }
    }

    let meta = TrialMeta {
        positions: config.resolved_formation(),
        ipd_m: Some(config.ipd_m),
        condition: config.condition,
        sequence_tag: config.sequence.clone(),
    };
    let trial = Trial::new(ids, fs, positions, meta)?;
    Ok(SimRun {
        trial,
        heading_rad: heading,
        speed,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub file: String,
    /// Full generating config, including the ground-truth coupling.
    pub config: SimConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub schema_version: u32,
    pub trials: Vec<ManifestEntry>,
}

#[derive(Debug, Clone)]
pub struct Corpus {
    pub trials: Vec<Trial>,
    pub manifest: Manifest,
}

pub fn trial_name(config: &SimConfig, index: usize) -> String {
    config
        .name
        .clone()
        .unwrap_or_else(|| format!("trial_{:03}", index + 1))
}

/// Simulates every config and writes `<name>.csv` per trial plus
/// `manifest.json` into `out_dir`.
pub fn corpus(configs: &[SimConfig], out_dir: &Path) -> Result<Corpus> {
    let names: Vec<String> = configs
        .iter()
        .enumerate()
        .map(|(k, c)| trial_name(c, k))
        .collect();
    let mut seen = HashSet::new();
    for name in &names {
        if !seen.insert(name) {
            return Err(Error::io(
                out_dir.join(format!("{name}.csv")),
                io::Error::new(io::ErrorKind::AlreadyExists, "duplicate output name"),
            ));
        }
    }
    fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;

    let trials = configs
        .par_iter()
        .zip(&names)
        .map(|(config, name)| {
            let trial = simulate_trial(config)?;
            let path = out_dir.join(format!("{name}.csv"));
            let file = fs::File::create(&path).map_err(|e| Error::io(&path, e))?;
            let mut w = BufWriter::new(file);
            write_trial(&trial, &mut w)
                .and_then(|_| w.flush())
                .map_err(|e| Error::io(&path, e))?;
            Ok(trial)
        })
        .collect::<Result<Vec<_>>>()?;

    let manifest = Manifest {
        schema_version: MANIFEST_SCHEMA_VERSION,
        trials: configs
            .iter()
            .zip(&names)
            .map(|(config, name)| ManifestEntry {
                file: format!("{name}.csv"),
                config: config.clone(),
            })
            .collect(),
    };
    let path = out_dir.join(MANIFEST_FILE);
    let text = serde_json::to_string_pretty(&manifest).map_err(|e| Error::Json {
        path: path.clone(),
        source: e,
    })?;
    fs::write(&path, text + "\n").map_err(|e| Error::io(&path, e))?;
    Ok(Corpus { trials, manifest })
}
