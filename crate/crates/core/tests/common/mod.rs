//! Simulated scenarios with known coupling shared by the integration
//! suites.
#![allow(dead_code)]

use pedlead::simulate::{Action, NoiseSpec, SimConfig};
use pedlead::trajectory::{AgentId, Position};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const FS: f64 = 60.0;
/// Coupling gain at which a single influence becomes a pure delay line.
pub const PURE_DELAY_GAIN: f64 = FS;
pub const EVENT_TIME_S: f64 = 5.0;

/// Leader `L` turns once at [`EVENT_TIME_S`]; follower `F` copies it
/// `delay_s` later.
pub fn delay_pair(delay_s: f64, heading_noise_deg: f64, seed: u64) -> SimConfig {
    SimConfig {
        n_agents: 2,
        agents: vec![AgentId::new("L"), AgentId::new("F")],
        duration_s: 12.0,
        noise: NoiseSpec {
            heading_deg: heading_noise_deg,
            speed: 0.0,
        },
        seed,
        ..SimConfig::default()
    }
    .edge("L", "F", delay_s, PURE_DELAY_GAIN)
    .event("L", EVENT_TIME_S, Action::TurnLeft { angle_deg: 40.0 })
}

/// Alternating turns and speed changes by `agent`, one every 2 s from 2 s.
pub fn busy_script(mut config: SimConfig, agent: &str, rng: &mut ChaCha8Rng) -> SimConfig {
    let mut t = 2.0;
    let mut k = 0;
    while t < config.duration_s - 3.0 {
        let angle = rng.gen_range(20.0..45.0);
        let delta = rng.gen_range(0.2..0.4);
        let action = match k % 4 {
            0 => Action::TurnLeft { angle_deg: angle },
            1 => Action::SpeedUp { delta },
            2 => Action::TurnRight { angle_deg: angle },
            _ => Action::SlowDown { delta },
        };
        config = config.event(agent, t + rng.gen_range(-0.3..0.3), action);
        t += 2.0;
        k += 1;
    }
    config
}

fn noise() -> NoiseSpec {
    NoiseSpec {
        heading_deg: 1.0,
        speed: 0.01,
    }
}

/// Square formation P1..P4 = FL, FR, BL, BR. A front agent (FL on even
/// `index`, FR on odd) initiates; the other front agent follows it and the
/// back row follows both front agents.
pub fn front_row_trial(index: usize) -> SimConfig {
    let mut rng = ChaCha8Rng::seed_from_u64(1000 + index as u64);
    let (lead, other) = if index.is_multiple_of(2) {
        ("P1", "P2")
    } else {
        ("P2", "P1")
    };
    let config = SimConfig {
        name: Some(format!("front_{index:02}")),
        duration_s: 24.0,
        noise: noise(),
        seed: 2000 + index as u64,
        sequence: Some(format!("S{}", index % 6)),
        ..SimConfig::default()
    }
    .edge(lead, other, 0.5, PURE_DELAY_GAIN)
    .edge("P1", "P3", 0.5, PURE_DELAY_GAIN)
    .edge("P2", "P3", 0.5, PURE_DELAY_GAIN)
    .edge("P1", "P4", 0.5, PURE_DELAY_GAIN)
    .edge("P2", "P4", 0.5, PURE_DELAY_GAIN);
    busy_script(config, lead, &mut rng)
}

/// An initiator at a random slot drives everyone else; back-row agents
/// also watch the non-initiating front agents.
pub fn self_appointed_trial(seed: u64) -> (SimConfig, AgentId) {
    let mut rng = ChaCha8Rng::seed_from_u64(5000 + seed);
    let initiator = rng.gen_range(0..4usize);
    initiator_trial(initiator, seed, &mut rng)
}

/// Like [`self_appointed_trial`] with the initiator fixed at slot
/// `initiator` (0..4 = FL, FR, BL, BR).
pub fn initiator_trial(initiator: usize, seed: u64, rng: &mut ChaCha8Rng) -> (SimConfig, AgentId) {
    let ids = ["P1", "P2", "P3", "P4"];
    let lead = ids[initiator];
    let mut config = SimConfig {
        name: Some(format!("initiator_{seed:02}")),
        duration_s: 24.0,
        noise: noise(),
        seed: 6000 + seed,
        ..SimConfig::default()
    };
    for (k, id) in ids.iter().enumerate() {
        if k != initiator {
            config = config.edge(lead, id, rng.gen_range(0.3..0.8), 20.0);
        }
    }
    for back in [2, 3].into_iter().filter(|&b| b != initiator) {
        for front in [0, 1].into_iter().filter(|&f| f != initiator) {
            config = config.edge(ids[front], ids[back], rng.gen_range(0.3..0.8), 10.0);
        }
    }
    (busy_script(config, lead, rng), AgentId::new(lead))
}

/// No scripted changes, no coupling, no noise.
pub fn null_control(seed: u64) -> SimConfig {
    SimConfig {
        name: Some(format!("control_{seed:02}")),
        duration_s: 12.0,
        seed,
        condition: Some(pedlead::trajectory::Condition::Control),
        ..SimConfig::default()
    }
}

/// Agents `A -> B -> C` abreast, with `A` scripted.
/// Noiseless chain A→B→C with sparse alternating turns by A. Straight
/// stretches between turns tie at zero lag, so the indirect A→C link is
/// resolved over a shorter span than the direct links.
pub fn chain(delay_ab: f64, delay_bc: f64, gap_s: f64) -> SimConfig {
    let mut config = SimConfig {
        n_agents: 3,
        agents: vec![AgentId::new("A"), AgentId::new("B"), AgentId::new("C")],
        duration_s: 40.0,
        ..SimConfig::default()
    }
    .edge("A", "B", delay_ab, PURE_DELAY_GAIN)
    .edge("B", "C", delay_bc, PURE_DELAY_GAIN);
    let mut at = 4.0;
    let mut left = true;
    while at < 34.0 {
        let angle_deg = 35.0;
        let action = if left {
            Action::TurnLeft { angle_deg }
        } else {
            Action::TurnRight { angle_deg }
        };
        config = config.event("A", at, action);
        at += gap_s;
        left = !left;
    }
    config
}

pub fn position_of(index: usize) -> Position {
    Position::ALL[index]
}

/// Median of a non-empty slice.
pub fn median(xs: &mut [f64]) -> f64 {
    xs.sort_by(f64::total_cmp);
    let m = xs.len() / 2;
    if xs.len() % 2 == 1 {
        xs[m]
    } else {
        0.5 * (xs[m - 1] + xs[m])
    }
}
