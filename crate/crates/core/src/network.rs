//! Windowed influence networks and their pruning.
//!
//! An edge `i -> j` carries the fraction of a window's samples in which
//! `i` leads `j`. Pruning first drops null edges, then removes every
//! transitive shortcut `i -> k` that is strictly weaker than both legs of
//! a path `i -> j -> k` (data processing inequality), then applies a
//! weight threshold.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::ops::Range;

use crate::error::{Error, Result};
use crate::leadership::PairProfiles;
use crate::numfmt::fmt_num;
use crate::trajectory::AgentId;

pub const DEFAULT_WINDOWS: usize = 5;
pub const DEFAULT_THRESHOLD: f64 = 0.15;

#[derive(Debug, Clone, PartialEq)]
pub struct InfluenceNetwork {
    /// Sample interval `[start, end)` the weights were counted over.
    pub window: Range<usize>,
    pub nodes: Vec<AgentId>,
    pub edges: BTreeMap<(usize, usize), f64>,
    /// Pairs with no defined sample in the window; their weight is 0.
    pub undefined: BTreeSet<(usize, usize)>,
}

impl InfluenceNetwork {
    pub fn weight(&self, from: usize, to: usize) -> f64 {
        self.edges.get(&(from, to)).copied().unwrap_or(0.0)
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    /// Graphviz rendering with pen width proportional to weight.
    pub fn to_dot(&self, name: &str) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "digraph \"{name}\" {{");
        for node in &self.nodes {
            let _ = writeln!(out, "  \"{node}\";");
        }
        for (&(i, j), &w) in &self.edges {
            let _ = writeln!(
                out,
                "  \"{}\" -> \"{}\" [weight={}, penwidth={}, label=\"{}\"];",
                self.nodes[i],
                self.nodes[j],
                fmt_num(w),
                fmt_num(0.5 + 4.5 * w),
                fmt_num(w)
            );
        }
        out.push_str("}\n");
        out
    }
}

/// Splits `0..len` into `n` contiguous intervals whose lengths differ by at
/// most one, the longer ones first.
pub fn window_partition(len: usize, n: usize) -> Result<Vec<Range<usize>>> {
    if n == 0 {
        return Err(Error::Range("need at least one window".into()));
    }
    if len < n {
        return Err(Error::Range(format!(
            "{len} samples cannot fill {n} windows"
        )));
    }
    let base = len / n;
    let extra = len % n;
    let mut start = 0;
    Ok((0..n)
        .map(|k| {
            let w = base + usize::from(k < extra);
            let r = start..start + w;
            start += w;
            r
        })
        .collect())
}

/// Weight of every ordered pair over the sample interval `window`: the
/// share of defined samples in which the pair's optimal lag is positive.
pub fn edge_weights(
    profiles: &PairProfiles,
    nodes: &[AgentId],
    window: Range<usize>,
) -> InfluenceNetwork {
    let mut edges = BTreeMap::new();
    let mut undefined = BTreeSet::new();
    for i in 0..nodes.len() {
        for j in (0..nodes.len()).filter(|&j| j != i) {
            let (mut leading, mut defined) = (0usize, 0usize);
            if let Some(p) = profiles.get(i, j) {
                for t in window.clone() {
                    if let Some(tau) = p.get(t) {
                        defined += 1;
                        leading += usize::from(tau > 0);
                    }
                }
            }
            if defined == 0 {
                undefined.insert((i, j));
                edges.insert((i, j), 0.0);
            } else {
                edges.insert((i, j), leading as f64 / defined as f64);
            }
        }
    }
    InfluenceNetwork {
        window,
        nodes: nodes.to_vec(),
        edges,
        undefined,
    }
}

/// Drops null edges, then removes `i -> k` wherever `i -> j` and `j -> k`
/// exist and both are strictly heavier. All removals are decided on the
/// input weights and applied together.
pub fn dpi_prune(net: &InfluenceNetwork) -> InfluenceNetwork {
    let live: BTreeMap<(usize, usize), f64> = net
        .edges
        .iter()
        .filter(|(_, &w)| w > 0.0)
        .map(|(&k, &w)| (k, w))
        .collect();
    let n = net.nodes.len();
    let mut doomed = BTreeSet::new();
    for (&(i, k), &w_ik) in &live {
        for j in (0..n).filter(|&j| j != i && j != k) {
            if let (Some(&w_ij), Some(&w_jk)) = (live.get(&(i, j)), live.get(&(j, k))) {
                if w_ik < w_ij && w_ik < w_jk {
                    doomed.insert((i, k));
                    break;
                }
            }
        }
    }
    InfluenceNetwork {
        edges: live
            .into_iter()
            .filter(|(e, _)| !doomed.contains(e))
            .collect(),
        ..net.clone()
    }
}

/// Removes edges lighter than `theta`.
pub fn threshold(net: &InfluenceNetwork, theta: f64) -> Result<InfluenceNetwork> {
    if !(0.0..=1.0).contains(&theta) {
        return Err(Error::Range(format!("threshold {theta} outside [0, 1]")));
    }
    Ok(InfluenceNetwork {
        edges: net
            .edges
            .iter()
            .filter(|(_, &w)| w >= theta)
            .map(|(&k, &w)| (k, w))
            .collect(),
        ..net.clone()
    })
}

/// One reconstruction window: raw weights, after DPI, after threshold.
#[derive(Debug, Clone, PartialEq)]
pub struct WindowNetworks {
    pub raw: InfluenceNetwork,
    pub after_dpi: InfluenceNetwork,
    pub pruned: InfluenceNetwork,
}

/// Partitions the times at which every pair is defined into `n_windows`
/// windows and reconstructs one pruned network per window.
pub fn reconstruct(
    profiles: &PairProfiles,
    nodes: &[AgentId],
    n_windows: usize,
    theta: f64,
) -> Result<Vec<WindowNetworks>> {
    let common = profiles.common_defined_times();
    let parts = window_partition(common.len(), n_windows)?;
    parts
        .into_iter()
        .map(|r| {
            let window = common[r.start]..common[r.end - 1] + 1;
            let raw = edge_weights(profiles, nodes, window);
            let after_dpi = dpi_prune(&raw);
            let pruned = threshold(&after_dpi, theta)?;
            Ok(WindowNetworks {
                raw,
                after_dpi,
                pruned,
            })
        })
        .collect()
}
