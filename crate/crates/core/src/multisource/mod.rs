//! Several sources without storage sharing one carrier-sensed channel. An
//! idle channel goes to the first arrival; arrivals that find it busy are
//! lost, except that under DOP the transmitting source restarts on its own
//! new arrivals.

mod des;

pub use des::simulate_multisource;

use rand::Rng;
use rand_distr::Exp1;
use rayon::prelude::*;

use crate::analytic::gamma_cycle_moments;
use crate::distributions::TransferDistribution;
use crate::error::{guard_probability, require_rate, AoiError, Result};
use crate::estimate::{AaoiEstimate, SampleMoments};
use crate::rng::{stream, SimRng};

#[derive(Debug, Clone, PartialEq)]
pub struct SourceConfig {
    pub lambda: f64,
    pub dist: TransferDistribution,
}

impl SourceConfig {
    pub fn new(lambda: f64, dist: TransferDistribution) -> Self {
        SourceConfig { lambda, dist }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scheme {
    Dnp,
    Dop,
}

/// How the cycle second moment is obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MomentBackend {
    /// The published expression, taken literally.
    Paper,
    /// First-step analysis on the cycle decomposition.
    Corrected,
    /// Direct sampling of the cycle decomposition.
    StructuralMc { seed: u64, cycles: u64 },
}

/// Mean age right after a DOP delivery.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PostAge {
    /// `E[Γ_s]`, substituting the DOP busy time for the transfer time.
    BusyTime,
    /// `E[T_s | T_s ≤ ξ_s]`, the uninterrupted transfer that got through.
    Uninterrupted,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MultisourceOptions {
    pub backend: MomentBackend,
    pub post_age: PostAge,
}

impl Default for MultisourceOptions {
    fn default() -> Self {
        MultisourceOptions { backend: MomentBackend::Corrected, post_age: PostAge::Uninterrupted }
    }
}

/// First two cycle moments; standard errors are zero for closed forms.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CycleMomentEstimate {
    pub mean: f64,
    pub second: f64,
    pub mean_se: f64,
    pub second_se: f64,
}

/// Per-source busy-time moments `(E[B], E[B²])` and post-delivery age mean.
#[derive(Debug, Clone, Copy)]
struct BusyMoments {
    m1: f64,
    m2: f64,
    post_uninterrupted: f64,
}

fn validate(sources: &[SourceConfig]) -> Result<()> {
    if sources.is_empty() {
        return Err(AoiError::InvalidParameter("at least one source is required".into()));
    }
    for (i, s) in sources.iter().enumerate() {
        require_rate(&format!("lambda[{i}]"), s.lambda)?;
    }
    Ok(())
}

fn busy_moments(src: &SourceConfig, scheme: Scheme) -> Result<BusyMoments> {
    match scheme {
        Scheme::Dnp => {
            let m = src.dist.moments()?;
            Ok(BusyMoments { m1: m.m1, m2: m.m2, post_uninterrupted: m.m1 })
        }
        Scheme::Dop => {
            let g = gamma_cycle_moments(&src.dist, src.lambda)?;
            let gamma = guard_probability(src.dist.exp_weighted_moment(src.lambda, 0)?)?;
            let post = src.dist.exp_weighted_moment(src.lambda, 1)? / gamma;
            Ok(BusyMoments { m1: g.mean_gamma, m2: g.second_gamma, post_uninterrupted: post })
        }
    }
}

/// `(E[ξ_s; ξ_s ≤ min_{s'≠s} ξ_{s'}], E[ξ_s²; ξ_s ≤ min_{s'≠s} ξ_{s'}]) = (λ_s/λ_Σ², 2λ_s/λ_Σ³)`
/// for independent exponentials with the given rates.
pub fn min_exponential_moments(rates: &[f64], s: usize) -> (f64, f64) {
    let total: f64 = rates.iter().sum();
    (rates[s] / (total * total), 2.0 * rates[s] / (total * total * total))
}

fn closed_form(sources: &[SourceConfig], busy: &[BusyMoments], s: usize, corrected: bool) -> CycleMomentEstimate {
    let total: f64 = sources.iter().map(|x| x.lambda).sum();
    let ls = sources[s].lambda;
    let load: f64 = sources.iter().zip(busy).map(|(x, b)| x.lambda * b.m1).sum();
    let load2: f64 = sources.iter().zip(busy).map(|(x, b)| x.lambda * b.m2).sum();
    let others_rate: f64 = total - ls;
    let others_load: f64 = load - ls * busy[s].m1;
    let mean = (1.0 + load) / ls;
    let switch = if corrected { others_rate / total } else { others_rate };
    let second = (2.0 / total + load2 + 2.0 * load / total + 2.0 * mean * (switch + others_load)) / ls;
    CycleMomentEstimate { mean, second, mean_se: 0.0, second_se: 0.0 }
}

/// Draws a DOP busy period for a source restarting at rate `lambda`.
fn sample_dop_busy(dist: &TransferDistribution, lambda: f64, rng: &mut SimRng) -> (f64, f64) {
    let mut busy = 0.0;
    loop {
        let t = dist.sample(rng);
        let gap = rng.sample::<f64, _>(Exp1) / lambda;
        if gap > t {
            return (busy + t, t);
        }
        busy += gap;
    }
}

const SHARDS: u64 = 64;

fn structural(sources: &[SourceConfig], s: usize, scheme: Scheme, seed: u64, cycles: u64) -> CycleMomentEstimate {
    let total: f64 = sources.iter().map(|x| x.lambda).sum();
    let cumulative: Vec<f64> = sources
        .iter()
        .scan(0.0, |acc, x| {
            *acc += x.lambda / total;
            Some(*acc)
        })
        .collect();
    let m = (0..SHARDS)
        .into_par_iter()
        .map(|shard| {
            let n = cycles / SHARDS + u64::from(shard < cycles % SHARDS);
            let mut rng = stream(seed, shard);
            let mut acc = SampleMoments::default();
            for _ in 0..n {
                let mut rc = 0.0;
                loop {
                    rc += rng.sample::<f64, _>(Exp1) / total;
                    let u: f64 = rng.random();
                    let w = cumulative.partition_point(|&c| c <= u).min(sources.len() - 1);
                    rc += match scheme {
                        Scheme::Dnp => sources[w].dist.sample(&mut rng),
                        Scheme::Dop => sample_dop_busy(&sources[w].dist, sources[w].lambda, &mut rng).0,
                    };
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
    CycleMomentEstimate { mean: m.mean(), second: m.mean_sq(), mean_se: m.mean_se(), second_se: m.mean_sq_se() }
}

/// Renewal-cycle moments of source `s`.
pub fn cycle_moments_multisource(
    sources: &[SourceConfig],
    s: usize,
    scheme: Scheme,
    backend: MomentBackend,
) -> Result<CycleMomentEstimate> {
    validate(sources)?;
    if s >= sources.len() {
        return Err(AoiError::InvalidParameter(format!("source index {s} out of range")));
    }
    match backend {
        MomentBackend::Paper | MomentBackend::Corrected => {
            let busy = sources.iter().map(|x| busy_moments(x, scheme)).collect::<Result<Vec<_>>>()?;
            Ok(closed_form(sources, &busy, s, backend == MomentBackend::Corrected))
        }
        MomentBackend::StructuralMc { seed, cycles } => {
            if cycles == 0 {
                return Err(AoiError::InvalidParameter("cycles must be >= 1".into()));
            }
            if scheme == Scheme::Dop {
                for x in sources {
                    guard_probability(x.dist.exp_weighted_moment(x.lambda, 0)?)?;
                }
            }
            Ok(structural(sources, s, scheme, seed, cycles))
        }
    }
}

/// Per-source average age, `E[G] + E[Rc²]/(2E[Rc])`, with the default
/// options (first-step second moment, uninterrupted post-delivery age).
pub fn aaoi_multisource(sources: &[SourceConfig], scheme: Scheme) -> Result<Vec<AaoiEstimate>> {
    aaoi_multisource_with(sources, scheme, MultisourceOptions::default())
}

pub fn aaoi_multisource_with(
    sources: &[SourceConfig],
    scheme: Scheme,
    options: MultisourceOptions,
) -> Result<Vec<AaoiEstimate>> {
    validate(sources)?;
    let busy = sources.iter().map(|x| busy_moments(x, scheme)).collect::<Result<Vec<_>>>()?;
    (0..sources.len())
        .map(|s| {
            let post = match (scheme, options.post_age) {
                (Scheme::Dop, PostAge::BusyTime) => busy[s].m1,
                _ => busy[s].post_uninterrupted,
            };
            let c = cycle_moments_multisource(sources, s, scheme, options.backend)?;
            let value = post + 0.5 * c.second / c.mean;
            let seed = match options.backend {
                MomentBackend::StructuralMc { seed, .. } => Some(seed),
                _ => None,
            };
            // delta method on the ratio, first-order in each moment's error
            let half_width = 1.96 * 0.5 * ((c.second_se / c.mean).powi(2) + (c.second * c.mean_se / (c.mean * c.mean)).powi(2)).sqrt();
            Ok(AaoiEstimate { value, half_width, replications: u32::from(seed.is_some()), seed })
        })
        .collect()
}

/// Agreement of the closed-form second moments with the sampled one for one source.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SecondMomentReport {
    pub source: usize,
    pub paper: f64,
    pub corrected: f64,
    pub sampled: f64,
    pub sampled_se: f64,
    pub paper_z: f64,
    pub corrected_z: f64,
}

impl SecondMomentReport {
    pub fn paper_consistent(&self) -> bool {
        self.paper_z.abs() <= 3.0
    }

    pub fn corrected_consistent(&self) -> bool {
        self.corrected_z.abs() <= 3.0
    }
}

/// Compares both closed-form second moments with the structural sampler for every source.
pub fn second_moment_diagnostic(
    sources: &[SourceConfig],
    scheme: Scheme,
    seed: u64,
    cycles: u64,
) -> Result<Vec<SecondMomentReport>> {
    (0..sources.len())
        .map(|s| {
            let p = cycle_moments_multisource(sources, s, scheme, MomentBackend::Paper)?;
            let c = cycle_moments_multisource(sources, s, scheme, MomentBackend::Corrected)?;
            let m = cycle_moments_multisource(sources, s, scheme, MomentBackend::StructuralMc { seed: seed.wrapping_add(s as u64), cycles })?;
            let se = m.second_se.max(f64::MIN_POSITIVE);
            Ok(SecondMomentReport {
                source: s,
                paper: p.second,
                corrected: c.second,
                sampled: m.second,
                sampled_se: m.second_se,
                paper_z: (p.second - m.second) / se,
                corrected_z: (c.second - m.second) / se,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests;
