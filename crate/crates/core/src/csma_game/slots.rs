use rand::Rng;
use rand_distr::Exp1;

use super::{AttemptProfile, ChannelModel, BATCHES};
use crate::error::{AoiError, Result};
use crate::estimate::{mean_and_half_width, AaoiEstimate};
use crate::rng::stream;

#[derive(Debug, Clone, PartialEq)]
pub enum SourceOutcome {
    Estimate(AaoiEstimate),
    /// Too few deliveries to form an average; the age grows without bound.
    Diverged { deliveries: u64 },
}

impl SourceOutcome {
    pub fn estimate(&self) -> Option<&AaoiEstimate> {
        match self {
            SourceOutcome::Estimate(e) => Some(e),
            SourceOutcome::Diverged { .. } => None,
        }
    }

    pub fn is_diverged(&self) -> bool {
        matches!(self, SourceOutcome::Diverged { .. })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CsmaSimResult {
    pub sources: Vec<SourceOutcome>,
    pub deliveries: Vec<u64>,
    pub clamps: u64,
}

/// Slot-by-slot simulation: attempts, gains, the winner and its transfer, and
/// per-source age integration. At each own delivery the age drops to the
/// transfer time plus the age `ξ_s ~ Exp(λ_s)` of the stored packet. Averages
/// are taken over whole renewal cycles (first to last own delivery).
pub fn simulate_csma(channel: &ChannelModel, q: &AttemptProfile, horizon_slots: u64, seed: u64) -> Result<CsmaSimResult> {
    channel.validate()?;
    let q = q.as_slice();
    let n = channel.sources();
    if q.len() != n {
        return Err(AoiError::InvalidParameter(format!("profile has {} entries for {} sources", q.len(), n)));
    }
    if horizon_slots == 0 {
        return Err(AoiError::InvalidParameter("horizon_slots must be >= 1".into()));
    }
    let mut rng = stream(seed, 0);
    let mut gains = vec![0.0; n];
    let mut attempts = vec![false; n];
    let mut now = 0.0;
    let mut last: Vec<Option<(f64, f64)>> = vec![None; n];
    let mut area = vec![[0.0; BATCHES]; n];
    let mut time = vec![[0.0; BATCHES]; n];
    let mut deliveries = vec![0u64; n];
    let mut clamps = 0;
    for slot in 0..horizon_slots {
        for s in 0..n {
            attempts[s] = rng.random::<f64>() < q[s];
            gains[s] = channel.draw_gain(s, &mut rng);
        }
        now += 1.0;
        let Some(w) = channel.winner(&gains, |s| attempts[s]) else { continue };
        let (t, clamped) = channel.transfer_time(w, gains[w]);
        clamps += u64::from(clamped);
        now += t;
        let b = (slot * BATCHES as u64 / horizon_slots) as usize;
        if let Some((at, g)) = last[w] {
            let len = now - at;
            area[w][b] += len * (g + 0.5 * len);
            time[w][b] += len;
        }
        let xi = rng.sample::<f64, _>(Exp1) / channel.lambda[w];
        last[w] = Some((now, t + xi));
        deliveries[w] += 1;
    }
    let sources = (0..n)
        .map(|s| {
            if deliveries[s] < 2 {
                return SourceOutcome::Diverged { deliveries: deliveries[s] };
            }
            let total_area: f64 = area[s].iter().sum();
            let total_time: f64 = time[s].iter().sum();
            let ratios: Vec<f64> = (0..BATCHES).filter(|&b| time[s][b] > 0.0).map(|b| area[s][b] / time[s][b]).collect();
            let half_width = if ratios.len() >= 2 { mean_and_half_width(&ratios).1 } else { f64::INFINITY };
            SourceOutcome::Estimate(AaoiEstimate {
                value: total_area / total_time,
                half_width,
                replications: ratios.len() as u32,
                seed: Some(seed),
            })
        })
        .collect();
    Ok(CsmaSimResult { sources, deliveries, clamps })
}
