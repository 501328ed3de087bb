//! Closed-form single-source average age under drop-new (DNP), drop-old (DOP),
//! threshold and stationary randomized policies.
//!
//! The renewal structure: under DNP a cycle is an idle period `ξ ~ Exp(λ)`
//! followed by one uninterrupted transfer `T`. Under DOP the cycle is `ξ`
//! followed by `Γ`, the time until some transfer finishes before the next
//! arrival preempts it.

mod criteria;
mod policy;

pub use criteria::{
    classify_optimal_policy, dnp_beats_dop, erlang_matching_cycle_means, find_crossover,
    table1_criterion, uniform_criterion_margin, weibull_criterion_margin, DnpDopComparison,
    ErlangMatch, PolicyVerdict, Verdict,
};
pub use policy::{
    aaoi_smr, aaoi_threshold, lower_bound, optimize_threshold, threshold_terms, BoundKind,
    RandomizedPolicy, Threshold, ThresholdOptimum, TwoStateTerms,
};

use crate::distributions::TransferDistribution;
use crate::error::{guard_probability, require_rate, Result};
use crate::estimate::AaoiEstimate;

/// First two moments of the DOP service time `Γ` and of the DOP renewal cycle `ξ + Γ`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GammaCycleMoments {
    pub mean_gamma: f64,
    pub second_gamma: f64,
    pub mean_cycle: f64,
    pub second_cycle: f64,
}

/// Cycle mean `d`, cycle second moment `c` and post-delivery age mean `b`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CycleMoments {
    pub d: f64,
    pub c: f64,
    pub b: f64,
}

impl CycleMoments {
    /// Age averaged over a stream of i.i.d. cycles of this type.
    pub fn aaoi(&self) -> f64 {
        self.b + 0.5 * self.c / self.d
    }
}

/// Every constant the two-scheme analysis needs, for one `(T, λ)` pair.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SchemeConstants {
    pub rate: f64,
    /// `γ = E[e^{-λT}] = P(T ≤ ξ)`.
    pub gamma: f64,
    pub d_n: f64,
    pub d_o: f64,
    pub c_n: f64,
    pub c_o: f64,
    pub b_n: f64,
    pub b_o: f64,
    pub mean: f64,
    pub second: f64,
    /// `E[T e^{-λT}]`.
    pub weighted_mean: f64,
}

impl SchemeConstants {
    pub fn dnp(&self) -> CycleMoments {
        CycleMoments { d: self.d_n, c: self.c_n, b: self.b_n }
    }

    pub fn dop(&self) -> CycleMoments {
        CycleMoments { d: self.d_o, c: self.c_o, b: self.b_o }
    }

    /// `c_n d_o - c_o d_n` assembled from the constants.
    pub fn cross_difference(&self) -> f64 {
        self.c_n * self.d_o - self.c_o * self.d_n
    }

    /// The same difference through its reduced closed form.
    pub fn cross_difference_closed_form(&self) -> f64 {
        let (l, g) = (self.rate, self.gamma);
        self.second / (l * g)
            + (1.0 / l + self.mean) * (self.weighted_mean - (1.0 - g) / l) * 2.0 / (l * g * g)
    }

    /// `ρ = λ E[T]`.
    pub fn load(&self) -> f64 {
        self.rate * self.mean
    }
}

pub fn scheme_constants(dist: &TransferDistribution, lambda: f64) -> Result<SchemeConstants> {
    require_rate("lambda", lambda)?;
    let m = dist.moments()?;
    let gamma = guard_probability(dist.exp_weighted_moment(lambda, 0)?)?;
    let weighted_mean = dist.exp_weighted_moment(lambda, 1)?;
    let gc = cycle_from_gamma(lambda, gamma, weighted_mean);
    Ok(SchemeConstants {
        rate: lambda,
        gamma,
        d_n: 1.0 / lambda + m.m1,
        d_o: gc.mean_cycle,
        c_n: 2.0 / (lambda * lambda) + 2.0 * m.m1 / lambda + m.m2,
        c_o: gc.second_cycle,
        b_n: m.m1,
        b_o: weighted_mean / gamma,
        mean: m.m1,
        second: m.m2,
        weighted_mean,
    })
}

fn cycle_from_gamma(lambda: f64, gamma: f64, weighted_mean: f64) -> GammaCycleMoments {
    let lg = lambda * gamma;
    let tail = 2.0 * weighted_mean / (lambda * gamma * gamma);
    GammaCycleMoments {
        mean_gamma: (1.0 - gamma) / lg,
        second_gamma: 2.0 * (1.0 - gamma) / (lg * lg) - tail,
        mean_cycle: 1.0 / lg,
        second_cycle: 2.0 / (lg * lg) - tail,
    }
}

pub fn gamma_cycle_moments(dist: &TransferDistribution, lambda: f64) -> Result<GammaCycleMoments> {
    require_rate("lambda", lambda)?;
    let gamma = guard_probability(dist.exp_weighted_moment(lambda, 0)?)?;
    let weighted_mean = dist.exp_weighted_moment(lambda, 1)?;
    Ok(cycle_from_gamma(lambda, gamma, weighted_mean))
}

/// `E[T] + 1/λ + E[T²]/(2E[T]) · ρ/(1+ρ)` with `ρ = λE[T]`.
pub fn aaoi_dnp(dist: &TransferDistribution, lambda: f64) -> Result<AaoiEstimate> {
    require_rate("lambda", lambda)?;
    let m = dist.moments()?;
    let rho = lambda * m.m1;
    Ok(AaoiEstimate::exact(m.m1 + 1.0 / lambda + m.m2 / (2.0 * m.m1) * rho / (1.0 + rho)))
}

/// `1/(λγ)`, the mean DOP renewal cycle.
pub fn aaoi_dop(dist: &TransferDistribution, lambda: f64) -> Result<AaoiEstimate> {
    require_rate("lambda", lambda)?;
    let gamma = guard_probability(dist.exp_weighted_moment(lambda, 0)?)?;
    Ok(AaoiEstimate::exact(1.0 / (lambda * gamma)))
}
