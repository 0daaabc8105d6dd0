use std::ops::Range;

use crate::error::Result;
use crate::trajectory::{AgentId, Trial, Vec2};

use super::butterworth::{design_lowpass, filtfilt, FilterSpec, Lowpass};

/// Headings are left undefined where the heading-filtered speed is below
/// this, in m/s.
pub const MIN_HEADING_SPEED: f64 = 0.05;

pub const DEFAULT_HEADING_CUTOFF_HZ: f64 = 0.6;
pub const DEFAULT_SPEED_CUTOFF_HZ: f64 = 1.0;
pub const FILTER_ORDER: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KinematicsConfig {
    pub heading_cutoff_hz: f64,
    pub speed_cutoff_hz: f64,
    pub order: usize,
}

impl Default for KinematicsConfig {
    fn default() -> Self {
        KinematicsConfig {
            heading_cutoff_hz: DEFAULT_HEADING_CUTOFF_HZ,
            speed_cutoff_hz: DEFAULT_SPEED_CUTOFF_HZ,
            order: FILTER_ORDER,
        }
    }
}

/// Filtered heading and speed of one agent, sample-aligned with the
/// source positions.
#[derive(Debug, Clone, PartialEq)]
pub struct KinematicSeries {
    pub agent: AgentId,
    pub sample_rate_hz: f64,
    /// Unit heading vectors; `None` where the agent is (nearly) stationary.
    pub heading: Vec<Option<Vec2>>,
    /// m/s
    pub speed: Vec<f64>,
    pub valid: Range<usize>,
}

impl KinematicSeries {
    pub fn len(&self) -> usize {
        self.speed.len()
    }

    pub fn is_empty(&self) -> bool {
        self.speed.is_empty()
    }

    /// Heading as an angle in radians, counter-clockwise from +x.
    pub fn heading_angle(&self, t: usize) -> Option<f64> {
        self.heading[t].map(|h| h[1].atan2(h[0]))
    }
}

/// Derivative by central differences in the interior and one-sided
/// differences at both ends.
pub fn differentiate(x: &[f64], sample_rate_hz: f64) -> Vec<f64> {
    let n = x.len();
    match n {
        0 => Vec::new(),
        1 => vec![0.0],
        _ => (0..n)
            .map(|t| match t {
                0 => (x[1] - x[0]) * sample_rate_hz,
                t if t == n - 1 => (x[n - 1] - x[n - 2]) * sample_rate_hz,
                t => (x[t + 1] - x[t - 1]) * sample_rate_hz / 2.0,
            })
            .collect(),
    }
}

fn filtered_velocity(xs: &[f64], ys: &[f64], filter: &Lowpass, fs: f64) -> Result<Vec<Vec2>> {
    let vx = differentiate(&filtfilt(xs, filter)?, fs);
    let vy = differentiate(&filtfilt(ys, filter)?, fs);
    Ok(vx.into_iter().zip(vy).map(|(x, y)| [x, y]).collect())
}

/// Filters each agent's positions twice, at the heading and at the speed
/// cutoff, and differentiates both to velocities. Heading comes from the
/// first, speed from the second.
pub fn derive_kinematics(trial: &Trial, config: &KinematicsConfig) -> Result<Vec<KinematicSeries>> {
    let fs = trial.sample_rate_hz;
    let heading_filter =
        design_lowpass(&FilterSpec::new(config.order, config.heading_cutoff_hz, fs))?;
    let speed_filter = design_lowpass(&FilterSpec::new(config.order, config.speed_cutoff_hz, fs))?;

    trial
        .agents
        .iter()
        .zip(&trial.positions)
        .map(|(agent, series)| {
            let xs: Vec<f64> = series.iter().map(|p| p[0]).collect();
            let ys: Vec<f64> = series.iter().map(|p| p[1]).collect();
            let heading = filtered_velocity(&xs, &ys, &heading_filter, fs)?
                .into_iter()
                .map(|[vx, vy]| {
                    let norm = vx.hypot(vy);
                    (norm >= MIN_HEADING_SPEED).then(|| [vx / norm, vy / norm])
                })
                .collect();
            let speed = filtered_velocity(&xs, &ys, &speed_filter, fs)?
                .into_iter()
                .map(|[vx, vy]| vx.hypot(vy))
                .collect();
            Ok(KinematicSeries {
                agent: agent.clone(),
                sample_rate_hz: fs,
                heading,
                speed,
                valid: 0..series.len(),
            })
        })
        .collect()
}
