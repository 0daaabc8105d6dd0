//! Time-dependent delayed correlation between pairs of agents.
//!
//! For an ordered pair `(i, j)`, lag `tau` and time `t` the map holds the
//! mean over the window `t-omega ..= t+omega` of either the heading dot
//! product `h_i(s) . h_j(s + tau)` or the speed gap `|s_i(s) - s_j(s + tau)|`.
//! A positive optimal lag means `j` reproduces what `i` did earlier: `i`
//! leads.

use std::fmt;
use std::io::{BufRead, Write};
use std::ops::Range;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numfmt::fmt_num;
use crate::preprocess::KinematicSeries;
use crate::trajectory::Vec2;

/// Default lag search bound, seconds.
pub const DEFAULT_TAU_MAX_S: f64 = 2.0;

/// Correlation values closer than this are treated as tied.
pub const TIE_TOLERANCE: f64 = 1e-9;

const REFERENCE_RATE_HZ: f64 = 60.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Heading,
    Speed,
}

impl Mode {
    pub const BOTH: [Mode; 2] = [Mode::Heading, Mode::Speed];

    pub fn as_str(self) -> &'static str {
        match self {
            Mode::Heading => "heading",
            Mode::Speed => "speed",
        }
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Mode {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "heading" => Ok(Mode::Heading),
            "speed" => Ok(Mode::Speed),
            other => Err(format!("unknown mode {other:?}")),
        }
    }
}

/// Half-window in samples: 40 for heading and 20 for speed at 60 Hz,
/// scaled to keep the same duration at other rates.
pub fn default_omega(mode: Mode, sample_rate_hz: f64) -> usize {
    let base = match mode {
        Mode::Heading => 40.0,
        Mode::Speed => 20.0,
    };
    ((base * sample_rate_hz / REFERENCE_RATE_HZ).round() as usize).max(1)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AnalysisParams {
    pub omega: usize,
    pub tau_max_s: f64,
    pub mode: Mode,
}

impl AnalysisParams {
    pub fn for_mode(mode: Mode, sample_rate_hz: f64) -> Self {
        AnalysisParams {
            omega: default_omega(mode, sample_rate_hz),
            tau_max_s: DEFAULT_TAU_MAX_S,
            mode,
        }
    }

    /// Lag bound `L` in samples.
    pub fn max_lag(&self, sample_rate_hz: f64) -> usize {
        (self.tau_max_s * sample_rate_hz).round() as usize
    }

    pub fn validate(&self, sample_rate_hz: f64) -> Result<()> {
        if self.omega == 0 {
            return Err(Error::Config("omega must be at least 1".into()));
        }
        if self.tau_max_s.is_nan() || self.tau_max_s * sample_rate_hz < 1.0 {
            return Err(Error::Config(format!(
                "tau_max {} s is below one sample at {} Hz",
                self.tau_max_s, sample_rate_hz
            )));
        }
        Ok(())
    }
}

/// Dot product of two unit headings, clamped to [-1, 1].
pub fn directional_alignment(h_i: Vec2, h_j: Vec2) -> f64 {
    (h_i[0] * h_j[0] + h_i[1] * h_j[1]).clamp(-1.0, 1.0)
}

pub fn speed_gap(s_i: f64, s_j: f64) -> f64 {
    (s_i - s_j).abs()
}

/// Correlation values over a time × lag grid for one ordered pair.
///
/// Rows cover every `t` for which the whole lag range fits inside the
/// series; a cell is undefined when its window touches an undefined
/// sample.
#[derive(Debug, Clone, PartialEq)]
pub struct CorrelationMap {
    pub pair: (usize, usize),
    pub mode: Mode,
    pub omega: usize,
    pub max_lag: usize,
    pub times: Range<usize>,
    // row-major, NaN marks undefined cells
    values: Vec<f64>,
}

impl CorrelationMap {
    pub fn lag_count(&self) -> usize {
        2 * self.max_lag + 1
    }

    pub fn lags(&self) -> impl Iterator<Item = isize> {
        let l = self.max_lag as isize;
        -l..=l
    }

    pub fn get(&self, t: usize, tau: isize) -> Option<f64> {
        if !self.times.contains(&t) || tau.unsigned_abs() > self.max_lag {
            return None;
        }
        let v = self.values[self.offset(t, tau)];
        (!v.is_nan()).then_some(v)
    }

    fn offset(&self, t: usize, tau: isize) -> usize {
        (t - self.times.start) * self.lag_count() + (tau + self.max_lag as isize) as usize
    }

    /// Values for time `t` indexed by `tau + max_lag`, NaN where undefined.
    pub fn row(&self, t: usize) -> &[f64] {
        let start = (t - self.times.start) * self.lag_count();
        &self.values[start..start + self.lag_count()]
    }

    pub fn defined_cells(&self) -> usize {
        self.values.iter().filter(|v| !v.is_nan()).count()
    }

    /// `(t, tau, value)` for every defined cell, time-major.
    pub fn iter_defined(&self) -> impl Iterator<Item = (usize, isize, f64)> + '_ {
        let width = self.lag_count();
        let l = self.max_lag as isize;
        let t0 = self.times.start;
        self.values
            .iter()
            .enumerate()
            .filter(|(_, v)| !v.is_nan())
            .map(move |(k, &v)| (t0 + k / width, (k % width) as isize - l, v))
    }
}

/// Compensated running sum: `hi + lo` carries the prefix sum to roughly
/// twice working precision, so window sums taken as prefix differences
/// stay accurate to the last bit of the window mean.
fn two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    let bb = s - a;
    (s, (a - (s - bb)) + (b - bb))
}

fn windowed_map<F>(n: usize, omega: usize, max_lag: usize, sample: F) -> (Range<usize>, Vec<f64>)
where
    F: Fn(usize, usize) -> Option<f64>,
{
    let reach = omega + max_lag;
    if n <= 2 * reach {
        return (reach..reach, Vec::new());
    }
    let times = reach..n - reach;
    let width = 2 * max_lag + 1;
    let window = (2 * omega + 1) as f64;
    let mut values = vec![f64::NAN; times.len() * width];

    let mut hi = vec![0.0; n + 1];
    let mut lo = vec![0.0; n + 1];
    let mut bad = vec![0usize; n + 1];
    for (col, lag) in (-(max_lag as isize)..=max_lag as isize).enumerate() {
        for s in 0..n {
            let j = s as isize + lag;
            let v = if (0..n as isize).contains(&j) {
                sample(s, j as usize)
            } else {
                None
            };
            let (h, e) = two_sum(hi[s], v.unwrap_or(0.0));
            hi[s + 1] = h;
            lo[s + 1] = lo[s] + e;
            bad[s + 1] = bad[s] + usize::from(v.is_none());
        }
        for (row, t) in times.clone().enumerate() {
            let (a, b) = (t - omega, t + omega + 1);
            if bad[b] == bad[a] {
                let sum = (hi[b] - hi[a]) + (lo[b] - lo[a]);
                values[row * width + col] = sum / window;
            }
        }
    }
    (times, values)
}

/// Builds the correlation map of ordered pair `(i, j)`.
pub fn correlation_map(
    kin: &[KinematicSeries],
    pair: (usize, usize),
    params: &AnalysisParams,
) -> Result<CorrelationMap> {
    let (i, j) = pair;
    if i >= kin.len() || j >= kin.len() {
        return Err(Error::Config(format!(
            "pair ({i}, {j}) out of range for {} agents",
            kin.len()
        )));
    }
    let fs = kin[i].sample_rate_hz;
    params.validate(fs)?;
    let n = kin[i].len().min(kin[j].len());
    let max_lag = params.max_lag(fs);
    let (times, mut values) = match params.mode {
        Mode::Heading => {
            let (a, b) = (&kin[i].heading, &kin[j].heading);
            windowed_map(n, params.omega, max_lag, |s, u| {
                Some(directional_alignment(a[s]?, b[u]?))
            })
        }
        Mode::Speed => {
            let (a, b) = (&kin[i].speed, &kin[j].speed);
            windowed_map(n, params.omega, max_lag, |s, u| Some(speed_gap(a[s], b[u])))
        }
    };
    for v in values.iter_mut().filter(|v| !v.is_nan()) {
        *v = match params.mode {
            Mode::Heading => v.clamp(-1.0, 1.0),
            Mode::Speed => v.max(0.0),
        };
    }
    if values.iter().all(|v| v.is_nan()) {
        return Err(Error::EmptyMap(i, j));
    }
    Ok(CorrelationMap {
        pair,
        mode: params.mode,
        omega: params.omega,
        max_lag,
        times,
        values,
    })
}

/// Optimal lag per time for one ordered pair, in samples.
#[derive(Debug, Clone, PartialEq)]
pub struct DelayProfile {
    pub pair: (usize, usize),
    pub times: Range<usize>,
    pub max_lag: usize,
    pub tau_star: Vec<Option<isize>>,
}

impl DelayProfile {
    pub fn get(&self, t: usize) -> Option<isize> {
        if self.times.contains(&t) {
            self.tau_star[t - self.times.start]
        } else {
            None
        }
    }

    pub fn defined_count(&self) -> usize {
        self.tau_star.iter().filter(|v| v.is_some()).count()
    }

    pub fn iter_defined(&self) -> impl Iterator<Item = (usize, isize)> + '_ {
        let t0 = self.times.start;
        self.tau_star
            .iter()
            .enumerate()
            .filter_map(move |(k, v)| v.map(|tau| (t0 + k, tau)))
    }

    /// Profile of the reversed pair with every lag negated.
    pub fn reversed(&self) -> DelayProfile {
        DelayProfile {
            pair: (self.pair.1, self.pair.0),
            times: self.times.clone(),
            max_lag: self.max_lag,
            tau_star: self.tau_star.iter().map(|v| v.map(|tau| -tau)).collect(),
        }
    }
}

/// Lags in tie-break preference order: 0, -1, 1, -2, 2, ...
fn preference_order(max_lag: usize) -> impl Iterator<Item = isize> {
    std::iter::once(0).chain((1..=max_lag as isize).flat_map(|k| [-k, k]))
}

/// Picks, for every time, the lag maximizing the heading correlation or
/// minimizing the speed gap. Values within [`TIE_TOLERANCE`] of the
/// extremum are ties, resolved toward the smallest `|tau|` and then the
/// negative lag.
pub fn optimal_delay(map: &CorrelationMap) -> DelayProfile {
    let l = map.max_lag as isize;
    let tau_star = map
        .times
        .clone()
        .map(|t| {
            let row = map.row(t);
            let defined = row.iter().filter(|v| !v.is_nan());
            let best = match map.mode {
                Mode::Heading => defined.copied().fold(f64::NEG_INFINITY, f64::max),
                Mode::Speed => defined.copied().fold(f64::INFINITY, f64::min),
            };
            if !best.is_finite() {
                return None;
            }
            preference_order(map.max_lag).find(|&tau| {
                let v = row[(tau + l) as usize];
                !v.is_nan() && (v - best).abs() <= TIE_TOLERANCE
            })
        })
        .collect();
    DelayProfile {
        pair: map.pair,
        times: map.times.clone(),
        max_lag: map.max_lag,
        tau_star,
    }
}

/// Writes the defined cells as `t,tau,value` rows (sample indices), after
/// `# key=value` comment lines describing the map and any extra `header`
/// lines supplied by the caller.
pub fn write_heatmap_csv<W: Write>(
    map: &CorrelationMap,
    header: &[String],
    mut w: W,
) -> std::io::Result<()> {
    for line in header {
        writeln!(w, "# {line}")?;
    }
    writeln!(w, "# pair={},{}", map.pair.0, map.pair.1)?;
    writeln!(w, "# mode={}", map.mode)?;
    writeln!(w, "# omega={}", map.omega)?;
    writeln!(w, "# max_lag={}", map.max_lag)?;
    writeln!(w, "# times={}..{}", map.times.start, map.times.end)?;
    writeln!(w, "t,tau,value")?;
    let lag_text: Vec<String> = map.lags().map(|tau| format!(",{tau},")).collect();
    let mut line = String::new();
    for t in map.times.clone() {
        let t_text = t.to_string();
        for (col, &v) in map.row(t).iter().enumerate() {
            if v.is_nan() {
                continue;
            }
            line.push_str(&t_text);
            line.push_str(&lag_text[col]);
            line.push_str(&fmt_num(v));
            line.push('\n');
        }
        w.write_all(line.as_bytes())?;
        line.clear();
    }
    Ok(())
}

/// Reads a heatmap written by [`write_heatmap_csv`].
pub fn read_heatmap_csv<R: BufRead>(reader: R) -> Result<CorrelationMap> {
    let mut pair = None;
    let mut mode = None;
    let mut omega = None;
    let mut max_lag = None;
    let mut times = None;
    let mut cells = Vec::new();
    let mut saw_header = false;
    let perr = |line: usize, message: String| Error::Parse { line, message };

    for (k, line) in reader.lines().enumerate() {
        let lineno = k + 1;
        let line = line.map_err(|e| perr(lineno, e.to_string()))?;
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        if let Some(c) = line.strip_prefix('#') {
            let Some((key, value)) = c.trim().split_once('=') else {
                continue;
            };
            let bad = || perr(lineno, format!("invalid {key} {value:?}"));
            match key {
                "pair" => {
                    let (a, b) = value.split_once(',').ok_or_else(bad)?;
                    pair = Some((a.parse().map_err(|_| bad())?, b.parse().map_err(|_| bad())?));
                }
                "mode" => mode = Some(value.parse::<Mode>().map_err(|_| bad())?),
                "omega" => omega = Some(value.parse::<usize>().map_err(|_| bad())?),
                "max_lag" => max_lag = Some(value.parse::<usize>().map_err(|_| bad())?),
                "times" => {
                    let (a, b) = value.split_once("..").ok_or_else(bad)?;
                    times =
                        Some(a.parse::<usize>().map_err(|_| bad())?..b.parse().map_err(|_| bad())?);
                }
                _ => {}
            }
            continue;
        }
        if !saw_header {
            if line != "t,tau,value" {
                return Err(perr(
                    lineno,
                    format!("expected header \"t,tau,value\", found {line:?}"),
                ));
            }
            saw_header = true;
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        let parsed = match fields.as_slice() {
            [t, tau, v] => t
                .parse::<usize>()
                .ok()
                .zip(tau.parse::<isize>().ok())
                .zip(v.parse::<f64>().ok()),
            _ => None,
        };
        let ((t, tau), v) =
            parsed.ok_or_else(|| perr(lineno, format!("malformed row {line:?}")))?;
        cells.push((lineno, t, tau, v));
    }

    let missing = |what: &str| Error::Structure(format!("heatmap is missing `# {what}=`"));
    let pair = pair.ok_or_else(|| missing("pair"))?;
    let mode = mode.ok_or_else(|| missing("mode"))?;
    let omega = omega.ok_or_else(|| missing("omega"))?;
    let max_lag = max_lag.ok_or_else(|| missing("max_lag"))?;
    let times = times.ok_or_else(|| missing("times"))?;
    let mut map = CorrelationMap {
        pair,
        mode,
        omega,
        max_lag,
        values: vec![f64::NAN; times.len() * (2 * max_lag + 1)],
        times,
    };
    for (lineno, t, tau, v) in cells {
        if !map.times.contains(&t) || tau.unsigned_abs() > max_lag {
            return Err(perr(
                lineno,
                format!("cell ({t}, {tau}) outside the declared grid"),
            ));
        }
        let off = map.offset(t, tau);
        map.values[off] = v;
    }
    Ok(map)
}
