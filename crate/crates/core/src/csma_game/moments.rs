use rand::Rng;
use rayon::prelude::*;

use super::{AttemptProfile, ChannelModel, SlotMoments, SuccessStats, BATCHES};
use crate::error::{AoiError, Result};
use crate::estimate::{mean_and_half_width, AaoiEstimate, SampleMoments};
use crate::multisource::CycleMomentEstimate;
use crate::rng::stream;

/// Which expression supplies `E[Rc_s²]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SecondMomentForm {
    /// First-step analysis on i.i.d. attempt slots.
    FirstStep,
    /// The published aggregate of geometric and binomial moments, taken literally.
    Printed,
}

/// `(E[N], E[N²])` of a geometric count with success `φ`, and
/// `(E[M], E[NM])` for the binomial thinning with per-slot probability `φ'`.
pub fn geometric_moments(phi: f64, phi_other: f64) -> (f64, f64, f64, f64) {
    (1.0 / phi, (2.0 - phi) / (phi * phi), phi_other / phi, 2.0 * phi_other / (phi * phi))
}

/// `(E[Rc_s], E[Rc_s²])` from slot statistics.
pub fn csma_cycle_moments(m: &SlotMoments, s: usize, form: SecondMomentForm) -> Result<(f64, f64)> {
    let phi = m.phi[s];
    if !(phi > 0.0) {
        return Err(AoiError::NoSuccessProbability { source_index: s });
    }
    let n = m.phi.len();
    let load: f64 = (0..n).map(|i| m.phi[i] * m.t1[i]).sum();
    let mean = (1.0 + load) / phi;
    let second = match form {
        SecondMomentForm::FirstStep => {
            let x2 = 1.0 + 2.0 * load + (0..n).map(|i| m.phi[i] * m.t2[i]).sum::<f64>();
            let x_fail = (1.0 - phi) + (load - phi * m.t1[s]);
            (x2 + 2.0 * x_fail * mean) / phi
        }
        SecondMomentForm::Printed => {
            let (en, en2, _, _) = geometric_moments(phi, 0.0);
            let others: Vec<usize> = (0..n).filter(|&i| i != s).collect();
            let sum_t1: f64 = others.iter().map(|&i| m.t1[i]).sum();
            let mut v = en2 + m.t2[s];
            for &i in &others {
                let (_, _, em, enm) = geometric_moments(phi, m.phi[i]);
                v += em * m.t2[i] + 2.0 * (enm - em) * m.t1[i];
            }
            v + (en2 - 3.0 * en + 2.0) * sum_t1 * sum_t1 + 2.0 * en * m.t1[s] + 2.0 * (en - 1.0) * m.t1[s] * sum_t1
        }
    };
    Ok((mean, second))
}

fn aaoi_one(channel: &ChannelModel, m: &SlotMoments, s: usize, form: SecondMomentForm) -> Result<f64> {
    let (d, c) = csma_cycle_moments(m, s, form)?;
    Ok(m.t1[s] + 1.0 / channel.lambda[s] + 0.5 * c / d)
}

/// Per-source average age `E[T̲_s] + 1/λ_s + E[Rc_s²]/(2E[Rc_s])`, with a
/// batch-means interval from the per-batch statistics.
pub fn aaoi_csma(channel: &ChannelModel, stats: &SuccessStats, form: SecondMomentForm) -> Result<Vec<AaoiEstimate>> {
    (0..channel.sources())
        .map(|s| {
            let value = aaoi_one(channel, &stats.pooled, s, form)?;
            let per: Vec<f64> = stats.batches.iter().filter_map(|b| aaoi_one(channel, b, s, form).ok()).collect();
            let half_width = if per.len() >= 2 { mean_and_half_width(&per).1 } else { f64::INFINITY };
            Ok(AaoiEstimate { value, half_width, replications: per.len() as u32, seed: None })
        })
        .collect()
}

/// Samples renewal cycles of every source from the slot decomposition: each
/// slot is won by source `s'` with probability `φ_s'` (nobody otherwise), and a
/// win adds a transfer time resampled from that source's winning draws. `φ` and
/// the winning draws come from the joint Monte Carlo run that
/// `StatsBackend::JointMc { seed, n_slots }` performs.
pub fn structural_cycle_moments(
    channel: &ChannelModel,
    q: &AttemptProfile,
    seed: u64,
    n_slots: u64,
    cycles: u64,
) -> Result<Vec<CycleMomentEstimate>> {
    channel.validate()?;
    let n = channel.sources();
    if q.as_slice().len() != n {
        return Err(AoiError::InvalidParameter(format!("profile has {} entries for {} sources", q.as_slice().len(), n)));
    }
    if n_slots < 10_000 {
        return Err(AoiError::InvalidParameter(format!("n_slots must be >= 1e4, got {n_slots}")));
    }
    let pools = winning_times(channel, q.as_slice(), seed, n_slots);
    let cumulative: Vec<f64> = pools
        .iter()
        .scan(0.0, |acc, p| {
            *acc += p.len() as f64 / n_slots as f64;
            Some(*acc)
        })
        .collect();
    (0..n)
        .map(|s| {
            if pools[s].is_empty() {
                return Err(AoiError::NoSuccessProbability { source_index: s });
            }
            let m = (0..BATCHES as u64)
                .into_par_iter()
                .map(|b| {
                    let k = cycles / BATCHES as u64 + u64::from(b < cycles % BATCHES as u64);
                    let mut rng = stream(seed.wrapping_add(1 + s as u64), b);
                    let mut acc = SampleMoments::default();
                    for _ in 0..k {
                        let mut rc = 0.0;
                        loop {
                            rc += 1.0;
                            let u: f64 = rng.random();
                            let w = cumulative.partition_point(|&c| c <= u);
                            if w < n {
                                rc += pools[w][rng.random_range(0..pools[w].len())];
                            }
                            if w == s {
                                break;
                            }
                        }
                        acc.push(rc);
                    }
                    acc
                })
                .reduce(SampleMoments::default, |mut a, b| {
                    a.merge(&b);
                    a
                });
            Ok(CycleMomentEstimate { mean: m.mean(), second: m.mean_sq(), mean_se: m.mean_se(), second_se: m.mean_sq_se() })
        })
        .collect()
}

/// Winning transfer times per source, drawn exactly as the joint Monte Carlo backend draws them.
fn winning_times(channel: &ChannelModel, q: &[f64], seed: u64, n_slots: u64) -> Vec<Vec<f64>> {
    let n = channel.sources();
    let shards: Vec<Vec<Vec<f64>>> = (0..BATCHES as u64)
        .into_par_iter()
        .map(|b| {
            let m = n_slots / BATCHES as u64 + u64::from(b < n_slots % BATCHES as u64);
            let mut rng = stream(seed, b);
            let mut pools = vec![Vec::new(); n];
            let mut gains = vec![0.0; n];
            let mut attempts = vec![false; n];
            for _ in 0..m {
                for s in 0..n {
                    attempts[s] = rng.random::<f64>() < q[s];
                    gains[s] = channel.draw_gain(s, &mut rng);
                }
                if let Some(w) = channel.winner(&gains, |s| attempts[s]) {
                    pools[w].push(channel.transfer_time(w, gains[w]).0);
                }
            }
            pools
        })
        .collect();
    let mut pools = vec![Vec::new(); n];
    for shard in shards {
        for (p, v) in pools.iter_mut().zip(shard) {
            p.extend(v);
        }
    }
    pools
}
