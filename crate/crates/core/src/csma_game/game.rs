use rayon::prelude::*;

use super::moments::{aaoi_csma, csma_cycle_moments, SecondMomentForm};
use super::{ChannelModel, SlotMoments, SubsetTable, SuccessStats};
use crate::error::{AoiError, Result};
use crate::estimate::{mean_and_half_width, AaoiEstimate};
use crate::optimize::{golden_section, grid_then_golden};

/// Grid used by the best-response scans inside equilibrium search.
pub const BEST_RESPONSE_GRID: usize = 51;

/// Average ages as a function of the attempt profile, backed by one subset
/// table, so every profile is evaluated on the same channel draws.
#[derive(Debug, Clone)]
pub struct GameEvaluator {
    pub channel: ChannelModel,
    pub table: SubsetTable,
    pub form: SecondMomentForm,
}

impl GameEvaluator {
    pub fn new(channel: ChannelModel, seed: u64, n_draws: u64, form: SecondMomentForm) -> Result<Self> {
        let table = SubsetTable::build(&channel, seed, n_draws)?;
        Ok(GameEvaluator { channel, table, form })
    }

    /// Same table, different arrival rates.
    pub fn with_lambda(&self, lambda: Vec<f64>) -> Result<Self> {
        let channel = self.channel.with_lambda(lambda);
        channel.validate()?;
        Ok(GameEvaluator { channel, table: self.table.clone(), form: self.form })
    }

    pub fn sources(&self) -> usize {
        self.channel.sources()
    }

    pub fn stats(&self, q: &[f64]) -> Result<SuccessStats> {
        self.table.evaluate(q)
    }

    pub fn aaoi(&self, q: &[f64]) -> Result<Vec<AaoiEstimate>> {
        aaoi_csma(&self.channel, &self.stats(q)?, self.form)
    }

    fn pooled(&self, q: &[f64]) -> Option<SlotMoments> {
        self.table.evaluate(q).ok().map(|s| s.pooled)
    }

    fn age(&self, m: &SlotMoments, s: usize) -> f64 {
        match csma_cycle_moments(m, s, self.form) {
            Ok((d, c)) => m.t1[s] + 1.0 / self.channel.lambda[s] + 0.5 * c / d,
            Err(_) => f64::INFINITY,
        }
    }

    /// Average age of source `s`; `+inf` when it never succeeds.
    pub fn payoff(&self, q: &[f64], s: usize) -> f64 {
        self.pooled(q).map_or(f64::INFINITY, |m| self.age(&m, s))
    }

    /// Mean of the per-source average ages; `+inf` if any source never succeeds.
    pub fn social(&self, q: &[f64]) -> f64 {
        match self.pooled(q) {
            Some(m) => (0..self.sources()).map(|s| self.age(&m, s)).sum::<f64>() / self.sources() as f64,
            None => f64::INFINITY,
        }
    }

    pub fn social_estimate(&self, q: &[f64]) -> Result<AaoiEstimate> {
        let stats = self.stats(q)?;
        let n = self.sources();
        let social = |m: &SlotMoments| (0..n).map(|s| self.age(m, s)).sum::<f64>() / n as f64;
        let value = social(&stats.pooled);
        if !value.is_finite() {
            let s = (0..n).find(|&s| stats.pooled.phi[s] == 0.0).unwrap_or(0);
            return Err(AoiError::NoSuccessProbability { source_index: s });
        }
        let per: Vec<f64> = stats.batches.iter().map(social).filter(|v| v.is_finite()).collect();
        let half_width = if per.len() >= 2 { mean_and_half_width(&per).1 } else { f64::INFINITY };
        Ok(AaoiEstimate { value, half_width, replications: per.len() as u32, seed: None })
    }
}

fn with_component(q: &[f64], s: usize, x: f64) -> Vec<f64> {
    let mut v = q.to_vec();
    v[s] = x;
    v
}

/// Attempt probability in `[0, 1]` minimizing source `s`'s age with the
/// others fixed; grid scan then golden-section, ties toward larger `q_s`.
pub fn best_response(eval: &GameEvaluator, q: &[f64], s: usize, grid_size: usize) -> Result<f64> {
    if grid_size < 11 {
        return Err(AoiError::InvalidParameter(format!("grid_size must be >= 11, got {grid_size}")));
    }
    if s >= eval.sources() || q.len() != eval.sources() {
        return Err(AoiError::InvalidParameter("profile or source index does not match the channel".into()));
    }
    Ok(grid_then_golden(|x| eval.payoff(&with_component(q, s, x), s), 0.0, 1.0, grid_size, 1e-7).0)
}

#[derive(Debug, Clone, PartialEq)]
pub struct NashResult {
    pub profile: Vec<f64>,
    pub aaoi: Vec<AaoiEstimate>,
    pub converged: bool,
    pub rounds: usize,
}

/// Synchronous best-response iteration from `init`. Stops when no component
/// moves by `tol` or more, or after `max_rounds`; non-convergence is reported
/// with the last profile.
pub fn nash_equilibrium(eval: &GameEvaluator, init: &[f64], tol: f64, max_rounds: usize) -> Result<NashResult> {
    if !(tol > 0.0) {
        return Err(AoiError::InvalidParameter(format!("tol must be > 0, got {tol}")));
    }
    let mut q = init.to_vec();
    let mut converged = false;
    let mut rounds = 0;
    while rounds < max_rounds {
        rounds += 1;
        let next = (0..eval.sources())
            .into_par_iter()
            .map(|s| best_response(eval, &q, s, BEST_RESPONSE_GRID))
            .collect::<Result<Vec<f64>>>()?;
        let moved = q.iter().zip(&next).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        q = next;
        if moved < tol {
            converged = true;
            break;
        }
    }
    let aaoi = eval.aaoi(&q)?;
    Ok(NashResult { profile: q, aaoi, converged, rounds })
}

#[derive(Debug, Clone, PartialEq)]
pub struct CooperativeResult {
    pub profile: Vec<f64>,
    pub social: AaoiEstimate,
    /// Best symmetric profile found before coordinate descent, for symmetric channels.
    pub symmetric_optimum: Option<f64>,
}

fn coordinate_descent(eval: &GameEvaluator, start: Vec<f64>) -> (Vec<f64>, f64) {
    let mut q = start;
    let mut cur = eval.social(&q);
    for _ in 0..100 {
        let mut moved = false;
        for s in 0..q.len() {
            let (x, v) = grid_then_golden(|x| eval.social(&with_component(&q, s, x)), 0.0, 1.0, 41, 1e-7);
            if v < cur - 1e-12 * cur.abs() {
                moved |= (x - q[s]).abs() > 1e-6;
                q[s] = x;
                cur = v;
            }
        }
        if !moved {
            break;
        }
    }
    (q, cur)
}

/// Profile minimizing the mean age across sources. Coordinate descent runs
/// from all-ones, all-0.5 and the supplied equilibrium. Symmetric channels are
/// first searched over symmetric profiles; an asymmetric profile replaces the
/// symmetric optimum only if it improves on it by more than the Monte Carlo
/// half-width.
pub fn cooperative_optimum(eval: &GameEvaluator, equilibrium: Option<&[f64]>) -> Result<CooperativeResult> {
    let n = eval.sources();
    let mut starts = vec![vec![1.0; n], vec![0.5; n]];
    if let Some(e) = equilibrium {
        starts.push(e.to_vec());
    }
    let mut best: Option<(Vec<f64>, f64)> = None;
    for start in starts {
        let (q, v) = coordinate_descent(eval, start);
        if best.as_ref().is_none_or(|b| v < b.1 - 1e-12 * b.1.abs()) {
            best = Some((q, v));
        }
    }
    let (mut profile, best_value) = best.expect("at least one start");
    let mut symmetric_optimum = None;
    if eval.channel.is_symmetric() {
        let f = |x: f64| eval.social(&vec![x; n]);
        let (x, fx) = grid_then_golden(f, 0.0, 1.0, 101, 1e-8);
        let (y, fy) = golden_section(f, (x - 0.01).max(0.0), (x + 0.01).min(1.0), 1e-9);
        let (x, fx) = if fy < fx { (y, fy) } else { (x, fx) };
        symmetric_optimum = Some(x);
        let symmetric = vec![x; n];
        let hw = eval.social_estimate(&symmetric).map_or(0.0, |e| e.half_width);
        if best_value >= fx - hw {
            profile = symmetric;
        }
    }
    let social = eval.social_estimate(&profile)?;
    Ok(CooperativeResult { profile, social, symmetric_optimum })
}

/// Common arrival rate at which the mean age at `profile` equals `target`.
/// Ages depend on λ only through `1/λ_s`, so this is a closed-form shift;
/// `None` when the target is below the λ → ∞ limit.
pub fn calibrate_common_lambda(eval: &GameEvaluator, profile: &[f64], target: f64) -> Option<f64> {
    let n = eval.sources() as f64;
    let inv: f64 = eval.channel.lambda.iter().map(|l| 1.0 / l).sum::<f64>() / n;
    let base = eval.social(profile) - inv;
    (target > base && base.is_finite()).then(|| 1.0 / (target - base))
}
