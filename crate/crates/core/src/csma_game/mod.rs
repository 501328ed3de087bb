//! Saturated sources with one storage contending in unit-length control slots
//! over Rayleigh channels. A slot is won by the attempter with the largest
//! channel gain if its SINR clears the detection threshold; the winner then
//! transfers for `T = C/ln(1 + |H|²/σ_n²)`.

mod closed;
mod game;
mod moments;
mod slots;
mod table;

pub use closed::{phi_exact_theta_ge_one, phi_low_noise, phi_solo, phi_two_source};
pub use game::{
    best_response, calibrate_common_lambda, cooperative_optimum, nash_equilibrium, CooperativeResult,
    GameEvaluator, NashResult,
};
pub use moments::{aaoi_csma, csma_cycle_moments, geometric_moments, structural_cycle_moments, SecondMomentForm};
pub use slots::{simulate_csma, CsmaSimResult, SourceOutcome};
pub use table::SubsetTable;

use rand::Rng;
use rand_distr::Exp1;
use rayon::prelude::*;

use crate::error::{require_rate, AoiError, Result};
use crate::estimate::mean_and_half_width;
use crate::rng::{stream, SimRng};

/// Default cap on a drawn transfer time.
pub const DEFAULT_T_CAP: f64 = 1e6;
/// Batches (and worker shards) behind every Monte Carlo interval in this module.
pub const BATCHES: usize = 32;

#[derive(Debug, Clone, PartialEq)]
pub struct ChannelModel {
    /// `|H_s|²` is exponential with mean `2σ_s²`.
    pub sigma2: Vec<f64>,
    pub rate_const: Vec<f64>,
    pub noise: f64,
    pub theta: f64,
    pub lambda: Vec<f64>,
    pub t_cap: f64,
}

impl ChannelModel {
    pub fn new(sigma2: Vec<f64>, rate_const: Vec<f64>, noise: f64, theta: f64, lambda: Vec<f64>) -> Result<Self> {
        let c = ChannelModel { sigma2, rate_const, noise, theta, lambda, t_cap: DEFAULT_T_CAP };
        c.validate()?;
        Ok(c)
    }

    pub fn symmetric(sources: usize, sigma2: f64, rate_const: f64, noise: f64, theta: f64, lambda: f64) -> Result<Self> {
        Self::new(vec![sigma2; sources], vec![rate_const; sources], noise, theta, vec![lambda; sources])
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.sigma2.len();
        if n == 0 || self.rate_const.len() != n || self.lambda.len() != n {
            return Err(AoiError::InvalidParameter("sigma2, rate_const and lambda need one entry per source".into()));
        }
        for s in 0..n {
            require_rate(&format!("sigma2[{s}]"), self.sigma2[s])?;
            require_rate(&format!("rate_const[{s}]"), self.rate_const[s])?;
            require_rate(&format!("lambda[{s}]"), self.lambda[s])?;
        }
        require_rate("noise", self.noise)?;
        require_rate("theta", self.theta)?;
        require_rate("t_cap", self.t_cap)?;
        Ok(())
    }

    pub fn sources(&self) -> usize {
        self.sigma2.len()
    }

    pub fn with_theta(&self, theta: f64) -> Self {
        ChannelModel { theta, ..self.clone() }
    }

    pub fn with_lambda(&self, lambda: Vec<f64>) -> Self {
        ChannelModel { lambda, ..self.clone() }
    }

    /// Channel and rate constants identical across sources (λ may differ).
    pub fn is_symmetric(&self) -> bool {
        self.sigma2.windows(2).all(|w| w[0] == w[1]) && self.rate_const.windows(2).all(|w| w[0] == w[1])
    }

    pub(crate) fn draw_gain(&self, s: usize, rng: &mut SimRng) -> f64 {
        2.0 * self.sigma2[s] * rng.sample::<f64, _>(Exp1)
    }

    /// Transfer time for gain `h`, and whether it hit the cap.
    pub(crate) fn transfer_time(&self, s: usize, h: f64) -> (f64, bool) {
        let t = self.rate_const[s] / (h / self.noise).ln_1p();
        if t.is_finite() && t <= self.t_cap {
            (t, false)
        } else {
            (self.t_cap, true)
        }
    }

    /// Winner of a slot among attempters (bitmask), if its SINR clears θ.
    pub(crate) fn winner(&self, gains: &[f64], attempt: impl Fn(usize) -> bool) -> Option<usize> {
        let mut best: Option<usize> = None;
        let mut total = 0.0;
        for (s, &h) in gains.iter().enumerate() {
            if attempt(s) {
                total += h;
                if best.is_none_or(|b| h > gains[b]) {
                    best = Some(s);
                }
            }
        }
        let w = best?;
        (gains[w] > self.theta * (total - gains[w] + self.noise)).then_some(w)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AttemptProfile {
    q: Vec<f64>,
}

impl AttemptProfile {
    pub fn new(q: Vec<f64>) -> Result<Self> {
        if let Some(v) = q.iter().find(|v| !(0.0..=1.0).contains(*v)) {
            return Err(AoiError::InvalidParameter(format!("attempt probability {v} outside [0, 1]")));
        }
        Ok(AttemptProfile { q })
    }

    pub fn uniform(sources: usize, q: f64) -> Result<Self> {
        Self::new(vec![q; sources])
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.q
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.q
    }
}

/// `(φ, E[T̲], E[T̲²])` per source.
#[derive(Debug, Clone, PartialEq)]
pub struct SlotMoments {
    pub phi: Vec<f64>,
    pub t1: Vec<f64>,
    pub t2: Vec<f64>,
}

impl SlotMoments {
    pub(crate) fn from_sums(n: f64, wins: &[f64], st: &[f64], st2: &[f64]) -> Self {
        let phi = wins.iter().map(|w| w / n).collect();
        let t1 = wins.iter().zip(st).map(|(w, t)| if *w > 0.0 { t / w } else { 0.0 }).collect();
        let t2 = wins.iter().zip(st2).map(|(w, t)| if *w > 0.0 { t / w } else { 0.0 }).collect();
        SlotMoments { phi, t1, t2 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FastPath {
    /// Exact for θ ≥ 1.
    ThetaAtLeastOne,
    /// Approximation for θ < 1 and small noise.
    LowNoise,
    /// Exact when nobody else attempts.
    Solo,
    /// Approximation for two sources.
    TwoSource,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FastPathCheck {
    pub path: FastPath,
    pub source: usize,
    pub closed_form: f64,
    pub estimate: f64,
    pub half_width: f64,
}

impl FastPathCheck {
    pub fn is_exact(&self) -> bool {
        matches!(self.path, FastPath::ThetaAtLeastOne | FastPath::Solo)
    }

    /// Within `k` standard errors (the half-width is a 95% interval).
    pub fn agrees(&self, k: f64) -> bool {
        (self.closed_form - self.estimate).abs() <= k * self.half_width / 1.96 + 1e-15
    }
}

/// Success probabilities and conditional transfer moments, pooled and per batch.
#[derive(Debug, Clone, PartialEq)]
pub struct SuccessStats {
    pub pooled: SlotMoments,
    pub batches: Vec<SlotMoments>,
    pub phi_half_width: Vec<f64>,
    pub t1_half_width: Vec<f64>,
    pub t2_half_width: Vec<f64>,
    pub clamps: u64,
    pub checks: Vec<FastPathCheck>,
}

impl SuccessStats {
    pub fn phi(&self) -> &[f64] {
        &self.pooled.phi
    }
    pub fn t1(&self) -> &[f64] {
        &self.pooled.t1
    }
    pub fn t2(&self) -> &[f64] {
        &self.pooled.t2
    }

    pub(crate) fn from_batches(pooled: SlotMoments, batches: Vec<SlotMoments>, clamps: u64) -> Self {
        let n = pooled.phi.len();
        let hw = |f: &dyn Fn(&SlotMoments) -> f64| mean_and_half_width(&batches.iter().map(f).collect::<Vec<_>>()).1;
        let phi_half_width = (0..n).map(|s| hw(&|b| b.phi[s])).collect();
        let t1_half_width = (0..n).map(|s| hw(&|b| b.t1[s])).collect();
        let t2_half_width = (0..n).map(|s| hw(&|b| b.t2[s])).collect();
        SuccessStats { pooled, batches, phi_half_width, t1_half_width, t2_half_width, clamps, checks: Vec::new() }
    }

    fn require_success(&self, q: &[f64]) -> Result<()> {
        for (s, (&p, &qs)) in self.pooled.phi.iter().zip(q).enumerate() {
            if qs > 0.0 && p == 0.0 {
                return Err(AoiError::NoSuccessProbability { source_index: s });
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StatsBackend {
    /// Joint draws of attempts and gains, `n_slots` in total.
    JointMc { seed: u64, n_slots: u64 },
    /// Attempt-subset table built from `n_draws` gain vectors, mixed over q.
    Stratified { seed: u64, n_draws: u64 },
}

/// Per-shard accumulator of winning counts and transfer-time sums.
#[derive(Debug, Clone)]
struct Sums {
    wins: Vec<f64>,
    st: Vec<f64>,
    st2: Vec<f64>,
    clamps: u64,
}

fn joint_mc(channel: &ChannelModel, q: &[f64], seed: u64, n_slots: u64) -> SuccessStats {
    let n = channel.sources();
    let shards: Vec<(u64, Sums)> = (0..BATCHES as u64)
        .into_par_iter()
        .map(|b| {
            let m = n_slots / BATCHES as u64 + u64::from(b < n_slots % BATCHES as u64);
            let mut rng = stream(seed, b);
            let mut acc = Sums { wins: vec![0.0; n], st: vec![0.0; n], st2: vec![0.0; n], clamps: 0 };
            let mut gains = vec![0.0; n];
            let mut attempts = vec![false; n];
            for _ in 0..m {
                for s in 0..n {
                    attempts[s] = rng.random::<f64>() < q[s];
                    gains[s] = channel.draw_gain(s, &mut rng);
                }
                if let Some(w) = channel.winner(&gains, |s| attempts[s]) {
                    let (t, clamped) = channel.transfer_time(w, gains[w]);
                    acc.wins[w] += 1.0;
                    acc.st[w] += t;
                    acc.st2[w] += t * t;
                    acc.clamps += u64::from(clamped);
                }
            }
            (m, acc)
        })
        .collect();
    let mut total = Sums { wins: vec![0.0; n], st: vec![0.0; n], st2: vec![0.0; n], clamps: 0 };
    let mut batches = Vec::with_capacity(BATCHES);
    for (m, s) in &shards {
        for i in 0..n {
            total.wins[i] += s.wins[i];
            total.st[i] += s.st[i];
            total.st2[i] += s.st2[i];
        }
        total.clamps += s.clamps;
        batches.push(SlotMoments::from_sums(*m as f64, &s.wins, &s.st, &s.st2));
    }
    let pooled = SlotMoments::from_sums(n_slots as f64, &total.wins, &total.st, &total.st2);
    SuccessStats::from_batches(pooled, batches, total.clamps)
}

/// Estimates `φ_s`, `E[T̲_s]`, `E[T̲_s²]` for every source at attempt profile `q`.
/// With `fast_paths_allowed`, closed forms that apply to this configuration are
/// evaluated and attached as cross-checks; the Monte Carlo values are reported.
pub fn success_stats(
    channel: &ChannelModel,
    q: &AttemptProfile,
    backend: StatsBackend,
    fast_paths_allowed: bool,
) -> Result<SuccessStats> {
    channel.validate()?;
    let q = q.as_slice();
    if q.len() != channel.sources() {
        return Err(AoiError::InvalidParameter(format!("profile has {} entries for {} sources", q.len(), channel.sources())));
    }
    let mut stats = match backend {
        StatsBackend::JointMc { seed, n_slots } => {
            if n_slots < 10_000 {
                return Err(AoiError::InvalidParameter(format!("n_slots must be >= 1e4, got {n_slots}")));
            }
            joint_mc(channel, q, seed, n_slots)
        }
        StatsBackend::Stratified { seed, n_draws } => SubsetTable::build(channel, seed, n_draws)?.evaluate(q)?,
    };
    stats.require_success(q)?;
    if fast_paths_allowed {
        stats.checks = closed::applicable_checks(channel, q, &stats);
    }
    Ok(stats)
}
