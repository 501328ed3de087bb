use rayon::prelude::*;

use super::{ChannelModel, SlotMoments, SuccessStats, BATCHES};
use crate::error::{AoiError, Result};
use crate::rng::stream;

/// Largest source count the subset table accepts (2^S rows).
pub const MAX_TABLE_SOURCES: usize = 12;

/// Win counts and transfer-time sums per attempt subset and source, from gain
/// vectors shared by all subsets. Mixing the rows with the subset
/// probabilities under a profile `q` gives the slot statistics at `q`, so one
/// table serves every profile and `φ_s` is exactly linear in `q_s`.
#[derive(Debug, Clone, PartialEq)]
pub struct SubsetTable {
    sources: usize,
    draws_per_batch: Vec<u64>,
    /// `[batch][mask * sources + s]`
    wins: Vec<Vec<f64>>,
    st: Vec<Vec<f64>>,
    st2: Vec<Vec<f64>>,
    pub clamps: u64,
}

impl SubsetTable {
    pub fn build(channel: &ChannelModel, seed: u64, n_draws: u64) -> Result<Self> {
        channel.validate()?;
        let n = channel.sources();
        if n > MAX_TABLE_SOURCES {
            return Err(AoiError::InvalidParameter(format!("subset table supports at most {MAX_TABLE_SOURCES} sources")));
        }
        if n_draws < BATCHES as u64 {
            return Err(AoiError::InvalidParameter(format!("n_draws must be >= {BATCHES}")));
        }
        let rows = 1usize << n;
        let shards: Vec<(u64, Vec<f64>, Vec<f64>, Vec<f64>, u64)> = (0..BATCHES as u64)
            .into_par_iter()
            .map(|b| {
                let m = n_draws / BATCHES as u64 + u64::from(b < n_draws % BATCHES as u64);
                let mut rng = stream(seed, b);
                let mut wins = vec![0.0; rows * n];
                let mut st = vec![0.0; rows * n];
                let mut st2 = vec![0.0; rows * n];
                let mut clamps = 0;
                let mut gains = vec![0.0; n];
                let mut times = vec![(0.0, false); n];
                let mut sum = vec![0.0; rows];
                let mut best = vec![0usize; rows];
                for _ in 0..m {
                    for s in 0..n {
                        gains[s] = channel.draw_gain(s, &mut rng);
                        times[s] = channel.transfer_time(s, gains[s]);
                    }
                    for mask in 1..rows {
                        let low = mask.trailing_zeros() as usize;
                        let rest = mask & (mask - 1);
                        sum[mask] = sum[rest] + gains[low];
                        best[mask] = if rest == 0 || gains[low] > gains[best[rest]] { low } else { best[rest] };
                        let w = best[mask];
                        if gains[w] > channel.theta * (sum[mask] - gains[w] + channel.noise) {
                            let (t, clamped) = times[w];
                            let i = mask * n + w;
                            wins[i] += 1.0;
                            st[i] += t;
                            st2[i] += t * t;
                            clamps += u64::from(clamped);
                        }
                    }
                }
                (m, wins, st, st2, clamps)
            })
            .collect();
        let mut table = SubsetTable { sources: n, draws_per_batch: Vec::new(), wins: Vec::new(), st: Vec::new(), st2: Vec::new(), clamps: 0 };
        for (m, w, a, b, c) in shards {
            table.draws_per_batch.push(m);
            table.wins.push(w);
            table.st.push(a);
            table.st2.push(b);
            table.clamps += c;
        }
        Ok(table)
    }

    pub fn sources(&self) -> usize {
        self.sources
    }

    pub fn total_draws(&self) -> u64 {
        self.draws_per_batch.iter().sum()
    }

    fn subset_probabilities(&self, q: &[f64]) -> Vec<f64> {
        let rows = 1usize << self.sources;
        let mut p = vec![1.0; rows];
        for (mask, pm) in p.iter_mut().enumerate() {
            for (s, &qs) in q.iter().enumerate() {
                *pm *= if mask >> s & 1 == 1 { qs } else { 1.0 - qs };
            }
        }
        p
    }

    fn mix(&self, p: &[f64], batches: &[usize]) -> SlotMoments {
        let n = self.sources;
        let (mut wins, mut st, mut st2) = (vec![0.0; n], vec![0.0; n], vec![0.0; n]);
        let mut draws = 0.0;
        for &b in batches {
            draws += self.draws_per_batch[b] as f64;
            for (mask, &pm) in p.iter().enumerate().skip(1) {
                if pm == 0.0 {
                    continue;
                }
                for s in 0..n {
                    let i = mask * n + s;
                    wins[s] += pm * self.wins[b][i];
                    st[s] += pm * self.st[b][i];
                    st2[s] += pm * self.st2[b][i];
                }
            }
        }
        SlotMoments::from_sums(draws, &wins, &st, &st2)
    }

    /// Slot statistics at profile `q`.
    pub fn evaluate(&self, q: &[f64]) -> Result<SuccessStats> {
        if q.len() != self.sources {
            return Err(AoiError::InvalidParameter(format!("profile has {} entries for {} sources", q.len(), self.sources)));
        }
        if let Some(v) = q.iter().find(|v| !(0.0..=1.0).contains(*v)) {
            return Err(AoiError::InvalidParameter(format!("attempt probability {v} outside [0, 1]")));
        }
        let p = self.subset_probabilities(q);
        let all: Vec<usize> = (0..self.wins.len()).collect();
        let pooled = self.mix(&p, &all);
        let batches = (0..self.wins.len()).map(|b| self.mix(&p, &[b])).collect();
        Ok(SuccessStats::from_batches(pooled, batches, self.clamps))
    }
}
