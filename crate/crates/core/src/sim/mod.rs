//! Discrete-event Monte Carlo of the single-source system under any drop
//! policy. Serves as the oracle for the closed forms in [`crate::analytic`].

mod engine;
mod trace;

use std::fmt;

use rand::Rng;
use rand_distr::Exp1;
use rayon::prelude::*;

pub use trace::{EventKind, EventTrace, TraceEvent};

use crate::analytic::{RandomizedPolicy, Threshold};
use crate::distributions::TransferDistribution;
use crate::error::{require_rate, AoiError, Result};
use crate::estimate::{mean_and_half_width, AaoiEstimate, SampleMoments};
use crate::rng::stream;
use engine::{segment_area, Engine, NoEvents};

#[derive(Debug, Clone, PartialEq)]
pub enum DropPolicy {
    Dnp,
    Dop,
    /// DNP for the next cycle when the age at delivery is at least the threshold.
    Threshold(Threshold),
    Randomized(RandomizedPolicy),
}

impl fmt::Display for DropPolicy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DropPolicy::Dnp => f.write_str("dnp"),
            DropPolicy::Dop => f.write_str("dop"),
            DropPolicy::Threshold(t) => write!(f, "threshold({t})"),
            DropPolicy::Randomized(p) => write!(f, "randomized({} pieces)", p.values().len()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum StopRule {
    /// Whole renewal cycles per replication.
    Cycles(u64),
    /// Simulated time per replication; the last partial cycle is included.
    Horizon(f64),
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimConfig {
    pub dist: TransferDistribution,
    pub lambda: f64,
    pub policy: DropPolicy,
    pub stop: StopRule,
    pub seed: u64,
    pub replications: u32,
}

/// Number of batches used for the interval when there is a single replication.
pub const BATCHES: usize = 32;

impl SimConfig {
    pub fn new(dist: TransferDistribution, lambda: f64, policy: DropPolicy) -> Self {
        SimConfig { dist, lambda, policy, stop: StopRule::Cycles(100_000), seed: 0, replications: 1 }
    }

    pub fn validate(&self) -> Result<()> {
        require_rate("lambda", self.lambda)?;
        if self.replications == 0 {
            return Err(AoiError::InvalidParameter("replications must be >= 1".into()));
        }
        match self.stop {
            StopRule::Cycles(0) => return Err(AoiError::InvalidParameter("cycles must be >= 1".into())),
            StopRule::Horizon(h) if !(h > 0.0 && h.is_finite()) => {
                return Err(AoiError::InvalidParameter(format!("horizon must be finite and > 0, got {h}")))
            }
            _ => {}
        }
        if let DropPolicy::Randomized(p) = &self.policy {
            if let Some(v) = p.values().iter().find(|v| !(0.0..=1.0).contains(*v)) {
                return Err(AoiError::InvalidPolicy(format!("probability {v} outside [0, 1]")));
            }
        }
        Ok(())
    }
}

/// `(area, time)` per batch for one replication.
fn run_replication(cfg: &SimConfig, index: u64, batches: usize) -> Vec<(f64, f64)> {
    let mut engine = Engine::new(&cfg.dist, cfg.lambda, &cfg.policy, stream(cfg.seed, index));
    let mut out = vec![(0.0, 0.0); batches];
    match cfg.stop {
        StopRule::Cycles(n) => {
            for i in 0..n {
                let c = engine.cycle(&mut NoEvents);
                let b = (i * batches as u64 / n) as usize;
                out[b].0 += segment_area(c.age_at_start, c.start, c.end);
                out[b].1 += c.end - c.start;
            }
        }
        StopRule::Horizon(h) => {
            let width = h / batches as f64;
            let mut cur = 0;
            loop {
                let c = engine.cycle(&mut NoEvents);
                let end = c.end.min(h);
                // split the segment at batch boundaries
                let mut a = c.start;
                while a < end {
                    let edge = if cur == batches - 1 { end } else { ((cur + 1) as f64 * width).min(end) };
                    out[cur].0 += segment_area(c.age_at_start + a - c.start, a, edge);
                    out[cur].1 += edge - a;
                    a = edge;
                    if cur < batches - 1 && a >= (cur + 1) as f64 * width {
                        cur += 1;
                    }
                }
                if c.end >= h {
                    break;
                }
            }
        }
    }
    out
}

/// Time-average age estimated over independent replications, each on its own
/// random stream. A single replication gets a batch-means interval.
pub fn simulate_policy(cfg: &SimConfig) -> Result<AaoiEstimate> {
    cfg.validate()?;
    if cfg.replications == 1 {
        let parts = run_replication(cfg, 0, BATCHES);
        let ratios: Vec<f64> = parts.iter().filter(|p| p.1 > 0.0).map(|p| p.0 / p.1).collect();
        let (area, time) = parts.iter().fold((0.0, 0.0), |acc, p| (acc.0 + p.0, acc.1 + p.1));
        let (_, half_width) = mean_and_half_width(&ratios);
        return Ok(AaoiEstimate { value: area / time, half_width, replications: 1, seed: Some(cfg.seed) });
    }
    let values: Vec<f64> = (0..cfg.replications as u64)
        .into_par_iter()
        .map(|i| {
            let p = run_replication(cfg, i, 1)[0];
            p.0 / p.1
        })
        .collect();
    Ok(AaoiEstimate::from_replicates(&values, cfg.seed))
}

/// Event-level record of the first `max_events` events of replication 0.
pub fn simulate_trace(cfg: &SimConfig, max_events: usize) -> Result<EventTrace> {
    cfg.validate()?;
    if max_events == 0 {
        return Err(AoiError::InvalidParameter("max_events must be >= 1".into()));
    }
    let mut engine = Engine::new(&cfg.dist, cfg.lambda, &cfg.policy, stream(cfg.seed, 0));
    let mut trace = EventTrace::default();
    while trace.events.len() < max_events {
        engine.cycle(&mut trace);
    }
    trace.events.truncate(max_events);
    Ok(trace)
}

/// Sample moments of the DOP service time `Γ` and cycle `ξ + Γ`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GammaStructure {
    pub gamma: SampleMoments,
    pub cycle: SampleMoments,
}

impl GammaStructure {
    pub fn mean_gamma(&self) -> f64 {
        self.gamma.mean()
    }
    pub fn mean_gamma_sq(&self) -> f64 {
        self.gamma.mean_sq()
    }
    pub fn mean_cycle(&self) -> f64 {
        self.cycle.mean()
    }
    pub fn mean_cycle_sq(&self) -> f64 {
        self.cycle.mean_sq()
    }
}

/// Draws `n_cycles` DOP cycles straight from the interruption loop: restart
/// the transfer whenever an exponential gap is shorter than it.
pub fn simulate_gamma_structure(
    dist: &TransferDistribution,
    lambda: f64,
    n_cycles: u64,
    seed: u64,
) -> Result<GammaStructure> {
    require_rate("lambda", lambda)?;
    if n_cycles == 0 {
        return Err(AoiError::InvalidParameter("n_cycles must be >= 1".into()));
    }
    let mut rng = stream(seed, 0);
    let mut out = GammaStructure { gamma: SampleMoments::default(), cycle: SampleMoments::default() };
    for _ in 0..n_cycles {
        let idle = rng.sample::<f64, _>(Exp1) / lambda;
        let mut g = 0.0;
        loop {
            let t = dist.sample(&mut rng);
            let gap = rng.sample::<f64, _>(Exp1) / lambda;
            if gap > t {
                g += t;
                break;
            }
            g += gap;
        }
        out.gamma.push(g);
        out.cycle.push(idle + g);
    }
    Ok(out)
}
