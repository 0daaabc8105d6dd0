//! Pairwise lead fractions, the individual leadership index, and
//! aggregation of indices across trials.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lagcorr::{optimal_delay, CorrelationMap, DelayProfile, Mode, TIE_TOLERANCE};
use crate::trajectory::{AgentId, TrialMeta};

/// Delay profiles of every ordered pair of a trial, keyed by `(i, j)`.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct PairProfiles {
    pub n_agents: usize,
    pub profiles: BTreeMap<(usize, usize), DelayProfile>,
}

impl PairProfiles {
    pub fn new(n_agents: usize) -> Self {
        PairProfiles {
            n_agents,
            profiles: BTreeMap::new(),
        }
    }

    pub fn insert(&mut self, profile: DelayProfile) {
        self.profiles.insert(profile.pair, profile);
    }

    pub fn get(&self, i: usize, j: usize) -> Option<&DelayProfile> {
        self.profiles.get(&(i, j))
    }

    /// Builds the profiles of every pair from the maps of both directions.
    ///
    /// At each time the direction with the stronger optimum decides the
    /// lag and the other direction receives its negation, so the two
    /// profiles mirror each other and at most one agent of a pair leads.
    /// Optima equal within [`TIE_TOLERANCE`] but with conflicting lags give
    /// 0 to both; a time undefined in either direction is undefined in
    /// both. A pair with a single map uses it and its negation.
    pub fn from_maps<'a, I>(n_agents: usize, maps: I) -> Self
    where
        I: IntoIterator<Item = &'a CorrelationMap>,
    {
        let by_pair: BTreeMap<(usize, usize), &CorrelationMap> =
            maps.into_iter().map(|m| (m.pair, m)).collect();
        let mut out = PairProfiles::new(n_agents);
        for (&(i, j), &forward) in &by_pair {
            match by_pair.get(&(j, i)) {
                Some(&backward) if i < j => {
                    let (p, q) = reconcile(forward, backward);
                    out.insert(p);
                    out.insert(q);
                }
                Some(_) => {}
                None => {
                    let p = optimal_delay(forward);
                    out.insert(p.reversed());
                    out.insert(p);
                }
            }
        }
        out
    }

    /// Times at which every pair has a defined optimal lag.
    pub fn common_defined_times(&self) -> Vec<usize> {
        let Some(first) = self.profiles.values().next() else {
            return Vec::new();
        };
        first
            .iter_defined()
            .map(|(t, _)| t)
            .filter(|&t| self.profiles.values().all(|p| p.get(t).is_some()))
            .collect()
    }
}

/// Mirrored profiles of `forward` and `backward`, the maps of one pair in
/// both directions.
fn reconcile(forward: &CorrelationMap, backward: &CorrelationMap) -> (DelayProfile, DelayProfile) {
    assert_eq!(
        forward.times, backward.times,
        "maps of one pair share their time grid"
    );
    let strength = |map: &CorrelationMap, t: usize, tau: isize| {
        let v = map.get(t, tau).expect("optimum lies on a defined cell");
        match map.mode {
            Mode::Heading => v,
            Mode::Speed => -v,
        }
    };
    let (mut p, mut q) = (optimal_delay(forward), optimal_delay(backward));
    for (k, t) in forward.times.clone().enumerate() {
        let lag = match (p.tau_star[k], q.tau_star[k]) {
            (Some(a), Some(b)) if a == -b => Some(a),
            (Some(a), Some(b)) => {
                let (sa, sb) = (strength(forward, t, a), strength(backward, t, b));
                Some(if (sa - sb).abs() <= TIE_TOLERANCE {
                    0
                } else if sa > sb {
                    a
                } else {
                    -b
                })
            }
            _ => None,
        };
        p.tau_star[k] = lag;
        q.tau_star[k] = lag.map(|a| -a);
    }
    (p, q)
}

/// Fraction of the non-zero optimal lags of `profile` that are positive.
/// Zero lags count for neither side; a profile with only zero lags yields 0.
pub fn lead_fraction(profile: &DelayProfile) -> Result<f64> {
    let mut positive = 0usize;
    let mut nonzero = 0usize;
    let mut defined = 0usize;
    for (_, tau) in profile.iter_defined() {
        defined += 1;
        if tau != 0 {
            nonzero += 1;
            if tau > 0 {
                positive += 1;
            }
        }
    }
    if defined == 0 {
        return Err(Error::UndefinedScore(format!(
            "pair ({}, {}) has no defined delay",
            profile.pair.0, profile.pair.1
        )));
    }
    Ok(if nonzero == 0 {
        0.0
    } else {
        positive as f64 / nonzero as f64
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LeadershipScore {
    pub agent: AgentId,
    pub index_percent: f64,
    pub per_pair_fractions: BTreeMap<AgentId, f64>,
    pub defined_samples: usize,
    /// Set when some partner's profile was missing or empty and the index
    /// averages over fewer pairs.
    #[serde(default)]
    pub partial: bool,
}

/// Individual leadership index of `agent`: the mean over partners of the
/// lead fraction, in percent.
pub fn leadership_index(
    profiles: &PairProfiles,
    agents: &[AgentId],
    agent: usize,
) -> Result<LeadershipScore> {
    let mut fractions = BTreeMap::new();
    let mut defined_samples = 0;
    let mut partial = false;
    for other in (0..agents.len()).filter(|&o| o != agent) {
        match profiles.get(agent, other).map(|p| (p, lead_fraction(p))) {
            Some((p, Ok(f))) => {
                defined_samples += p.defined_count();
                fractions.insert(agents[other].clone(), f);
            }
            _ => partial = true,
        }
    }
    if fractions.is_empty() {
        return Err(Error::UndefinedScore(format!(
            "agent {} has no defined pair",
            agents[agent]
        )));
    }
    let mean = fractions.values().sum::<f64>() / fractions.len() as f64;
    Ok(LeadershipScore {
        agent: agents[agent].clone(),
        index_percent: 100.0 * mean,
        per_pair_fractions: fractions,
        defined_samples,
        partial,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Grouping {
    ByPosition,
    ByAgent,
}

impl Grouping {
    pub fn as_str(self) -> &'static str {
        match self {
            Grouping::ByPosition => "by_position",
            Grouping::ByAgent => "by_agent",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AggregateCell {
    pub mean_percent: f64,
    pub sem_percent: f64,
    pub n_trials: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregateReport {
    pub grouping: Grouping,
    pub cells: BTreeMap<String, AggregateCell>,
    /// Scores dropped because their trial lacked the grouping key.
    pub skipped: usize,
}

/// Mean and standard error of the mean (sample standard deviation over
/// `sqrt(n)`) of the leadership index per group.
pub fn aggregate<'a, I>(scores: I, grouping: Grouping) -> AggregateReport
where
    I: IntoIterator<Item = (&'a TrialMeta, &'a LeadershipScore)>,
{
    let mut groups: BTreeMap<String, Vec<f64>> = BTreeMap::new();
    let mut skipped = 0;
    for (meta, score) in scores {
        let key = match grouping {
            Grouping::ByAgent => Some(score.agent.to_string()),
            Grouping::ByPosition => meta.positions.get(&score.agent).map(|p| p.to_string()),
        };
        match key {
            Some(k) => groups.entry(k).or_default().push(score.index_percent),
            None => skipped += 1,
        }
    }
    let cells = groups
        .into_iter()
        .map(|(k, xs)| {
            let n = xs.len();
            let mean = xs.iter().sum::<f64>() / n as f64;
            let sem = if n > 1 {
                let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
                (var / n as f64).sqrt()
            } else {
                0.0
            };
            (
                k,
                AggregateCell {
                    mean_percent: mean,
                    sem_percent: sem,
                    n_trials: n,
                },
            )
        })
        .collect();
    AggregateReport {
        grouping,
        cells,
        skipped,
    }
}
