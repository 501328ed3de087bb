use std::fmt;
use std::str::FromStr;

use super::{aaoi_dnp, scheme_constants, SchemeConstants};
use crate::distributions::TransferDistribution;
use crate::error::{require_rate, AoiError, Result, DENOMINATOR_FLOOR};
use crate::estimate::AaoiEstimate;
use crate::optimize::golden_section;

/// Age threshold of the threshold policy. DNP is used for the next cycle when
/// the age at a delivery is at least the threshold, DOP otherwise, so `0`
/// means always DNP and `inf` always DOP.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct Threshold(f64);

impl Threshold {
    pub const ZERO: Threshold = Threshold(0.0);
    pub const INFINITE: Threshold = Threshold(f64::INFINITY);

    pub fn new(theta: f64) -> Result<Self> {
        if theta >= 0.0 {
            Ok(Threshold(theta))
        } else {
            Err(AoiError::InvalidParameter(format!("threshold must be >= 0, got {theta}")))
        }
    }

    pub fn value(self) -> f64 {
        self.0
    }

    pub fn is_infinite(self) -> bool {
        self.0.is_infinite()
    }
}

impl fmt::Display for Threshold {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_infinite() {
            f.write_str("inf")
        } else {
            write!(f, "{}", self.0)
        }
    }
}

impl FromStr for Threshold {
    type Err = AoiError;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if s.eq_ignore_ascii_case("inf") {
            return Ok(Threshold::INFINITE);
        }
        let v: f64 = s.parse().map_err(|_| AoiError::InvalidParameter(format!("bad threshold '{s}'")))?;
        Threshold::new(v)
    }
}

/// Piecewise-constant probability of picking DNP as a function of the age at a
/// delivery epoch. `values[i]` applies on `[breakpoints[i-1], breakpoints[i])`,
/// with `0` and `+inf` as outer ends.
#[derive(Debug, Clone, PartialEq)]
pub struct RandomizedPolicy {
    breakpoints: Vec<f64>,
    values: Vec<f64>,
}

impl RandomizedPolicy {
    pub fn new(breakpoints: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        if values.len() != breakpoints.len() + 1 {
            return Err(AoiError::InvalidPolicy(format!(
                "{} breakpoints need {} values, got {}",
                breakpoints.len(),
                breakpoints.len() + 1,
                values.len()
            )));
        }
        if breakpoints.iter().any(|b| !b.is_finite() || *b < 0.0) {
            return Err(AoiError::InvalidPolicy("breakpoints must be finite and >= 0".into()));
        }
        if breakpoints.windows(2).any(|w| w[0] >= w[1]) {
            return Err(AoiError::InvalidPolicy("breakpoints must be strictly increasing".into()));
        }
        if let Some(v) = values.iter().find(|v| !(0.0..=1.0).contains(*v)) {
            return Err(AoiError::InvalidPolicy(format!("probability {v} outside [0, 1]")));
        }
        Ok(RandomizedPolicy { breakpoints, values })
    }

    pub fn constant(p: f64) -> Result<Self> {
        Self::new(Vec::new(), vec![p])
    }

    /// The threshold policy written as `α(g) = 1{g ≥ θ}`.
    pub fn threshold(theta: Threshold) -> Self {
        if theta.is_infinite() {
            RandomizedPolicy { breakpoints: Vec::new(), values: vec![0.0] }
        } else {
            RandomizedPolicy { breakpoints: vec![theta.value()], values: vec![0.0, 1.0] }
        }
    }

    pub fn breakpoints(&self) -> &[f64] {
        &self.breakpoints
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn prob_dnp(&self, age: f64) -> f64 {
        self.values[self.breakpoints.partition_point(|&b| b <= age)]
    }

    /// `(lo, hi, α)` for each constant piece.
    pub fn pieces(&self) -> impl Iterator<Item = (f64, f64, f64)> + '_ {
        self.values.iter().enumerate().map(move |(i, &v)| {
            let lo = if i == 0 { 0.0 } else { self.breakpoints[i - 1] };
            let hi = self.breakpoints.get(i).copied().unwrap_or(f64::INFINITY);
            (lo, hi, v)
        })
    }
}

/// The two-state scheme chain at delivery epochs under a policy, and the
/// per-cycle age areas that go with it. State 0 is DNP, state 1 DOP.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TwoStateTerms {
    /// Probability of switching DNP to DOP.
    pub p: f64,
    /// Probability of switching DOP to DNP.
    pub q: f64,
    /// Stationary share of DNP cycles.
    pub pi_dnp: f64,
    pub beta_dnp: f64,
    pub beta_dop: f64,
}

impl TwoStateTerms {
    fn aaoi(&self, k: &SchemeConstants) -> Result<f64> {
        let (p0, p1) = (self.pi_dnp, 1.0 - self.pi_dnp);
        let den = k.d_n * p0 + k.d_o * p1;
        if den < DENOMINATOR_FLOOR {
            return Err(AoiError::DegenerateConditioning { probability: den });
        }
        Ok((self.beta_dnp * p0 + self.beta_dop * p1) / den)
    }
}

fn two_state(dist: &TransferDistribution, k: &SchemeConstants, policy: &RandomizedPolicy) -> TwoStateTerms {
    let l = k.rate;
    // α-weighted plain and e^{-λT}-weighted moments of orders 0 and 1.
    let (mut a0, mut a1, mut w0, mut w1) = (0.0, 0.0, 0.0, 0.0);
    for (lo, hi, v) in policy.pieces() {
        if v == 0.0 || hi <= lo {
            continue;
        }
        a0 += v * dist.partial_moment(0, 0.0, lo, hi);
        a1 += v * dist.partial_moment(1, 0.0, lo, hi);
        w0 += v * dist.partial_moment(0, l, lo, hi);
        w1 += v * dist.partial_moment(1, l, lo, hi);
    }
    let p = (1.0 - a0).max(0.0);
    let q = (w0 / k.gamma).clamp(0.0, 1.0);
    let pi_dnp = if p + q < DENOMINATOR_FLOOR { 1.0 } else { q / (q + p) };
    let beta_dnp = k.d_n * a1 + k.d_o * (k.mean - a1) + 0.5 * k.c_n;
    let beta_dop = (k.d_n * w1 + k.d_o * (k.weighted_mean - w1)) / k.gamma + 0.5 * k.c_o;
    TwoStateTerms { p, q, pi_dnp, beta_dnp, beta_dop }
}

pub fn threshold_terms(dist: &TransferDistribution, lambda: f64, theta: f64) -> Result<TwoStateTerms> {
    let theta = Threshold::new(theta)?;
    let k = scheme_constants(dist, lambda)?;
    Ok(two_state(dist, &k, &RandomizedPolicy::threshold(theta)))
}

/// Average age under the threshold policy. `theta = f64::INFINITY` is DOP.
pub fn aaoi_threshold(dist: &TransferDistribution, lambda: f64, theta: f64) -> Result<AaoiEstimate> {
    let theta = Threshold::new(theta)?;
    require_rate("lambda", lambda)?;
    let k = scheme_constants(dist, lambda)?;
    let terms = two_state(dist, &k, &RandomizedPolicy::threshold(theta));
    if terms.p + terms.q < DENOMINATOR_FLOOR && !theta.is_infinite() {
        return aaoi_dnp(dist, lambda);
    }
    Ok(AaoiEstimate::exact(terms.aaoi(&k)?))
}

/// Average age under a stationary randomized policy.
pub fn aaoi_smr(dist: &TransferDistribution, lambda: f64, policy: &RandomizedPolicy) -> Result<AaoiEstimate> {
    let k = scheme_constants(dist, lambda)?;
    let terms = two_state(dist, &k, policy);
    if terms.p + terms.q < DENOMINATOR_FLOOR {
        return aaoi_dnp(dist, lambda);
    }
    Ok(AaoiEstimate::exact(terms.aaoi(&k)?))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BoundKind {
    /// Valid for every threshold when `d_n ≥ d_o`.
    Old,
    /// Valid for every threshold when `d_n < d_o`.
    New,
}

/// Lower bound on the threshold-policy age evaluated at the policy's DNP share.
pub fn lower_bound(dist: &TransferDistribution, lambda: f64, theta: f64, which: BoundKind) -> Result<f64> {
    let k = scheme_constants(dist, lambda)?;
    let pi = two_state(dist, &k, &RandomizedPolicy::threshold(Threshold::new(theta)?)).pi_dnp;
    let lead = match which {
        BoundKind::Old => k.d_o,
        BoundKind::New => k.d_n,
    };
    let num = lead * (k.b_n * pi + k.b_o * (1.0 - pi)) + 0.5 * (k.c_n * pi + k.c_o * (1.0 - pi));
    Ok(num / (k.d_n * pi + k.d_o * (1.0 - pi)))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ThresholdOptimum {
    pub theta: Threshold,
    pub aaoi: AaoiEstimate,
}

/// Minimizes the threshold-policy age over `{0, …, theta_max, inf}` with a
/// grid scan and golden-section refinement of the best finite bracket.
pub fn optimize_threshold(
    dist: &TransferDistribution,
    lambda: f64,
    theta_max: f64,
    grid_size: usize,
) -> Result<ThresholdOptimum> {
    if !(theta_max > 0.0 && theta_max.is_finite()) {
        return Err(AoiError::InvalidParameter(format!("theta_max must be finite and > 0, got {theta_max}")));
    }
    if grid_size < 16 {
        return Err(AoiError::InvalidParameter(format!("grid_size must be >= 16, got {grid_size}")));
    }
    let k = scheme_constants(dist, lambda)?;
    let eval = |theta: f64| -> f64 {
        let terms = two_state(dist, &k, &RandomizedPolicy::threshold(Threshold(theta)));
        if terms.p + terms.q < DENOMINATOR_FLOOR && theta.is_finite() {
            return k.dnp().aaoi();
        }
        terms.aaoi(&k).unwrap_or(f64::INFINITY)
    };
    let step = theta_max / (grid_size - 1) as f64;
    let grid: Vec<f64> = (0..grid_size).map(|i| if i == grid_size - 1 { theta_max } else { step * i as f64 }).collect();
    let vals: Vec<f64> = grid.iter().map(|&t| eval(t)).collect();
    let mut best = 0;
    for i in 1..grid_size {
        if vals[i] < vals[best] {
            best = i;
        }
    }
    let dop = eval(f64::INFINITY);
    if dop < vals[best] {
        return Ok(ThresholdOptimum { theta: Threshold::INFINITE, aaoi: AaoiEstimate::exact(dop) });
    }
    let lo = grid[best.saturating_sub(1)];
    let hi = grid[(best + 1).min(grid_size - 1)];
    let (t, v) = golden_section(eval, lo, hi, 1e-7 * theta_max);
    let (theta, value) = if v < vals[best] { (t, v) } else { (grid[best], vals[best]) };
    Ok(ThresholdOptimum { theta: Threshold(theta), aaoi: AaoiEstimate::exact(value) })
}
