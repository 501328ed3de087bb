//! Transfer-time laws and every expectation the closed forms need.
//!
//! All expectations funnel through [`TransferDistribution::partial_moment`],
//! which evaluates `E[T^k e^{-λT}; lo ≤ T < hi]`. Families with a closed form
//! (exponential, hyper-exponential, Erlang, point masses, finite atom lists, and
//! the unweighted uniform, Weibull and log-normal cases) take a fast path; the
//! rest fall back to adaptive Gauss–Kronrod quadrature.

pub mod quadrature;
pub mod special;

use std::fmt;

use rand::Rng;
use rand_distr::{Exp1, StandardNormal};

use crate::error::{AoiError, Result};
use special::{ln_factorial, normal_cdf, regularized_gamma_int};

const QUAD_REL_TOL: f64 = 1e-11;
/// Upper end of the Weibull integration variable `u = (t/scale)^shape`; `e^{-200}` is far below any tolerance.
const WEIBULL_U_MAX: f64 = 200.0;
const LOGNORMAL_Z_LIMIT: f64 = 40.0;

/// The parametric family behind a [`TransferDistribution`].
#[derive(Debug, Clone, PartialEq)]
pub enum Family {
    Exponential { rate: f64 },
    /// Mixture of exponentials, `(weight, rate)` per branch.
    HyperExponential { branches: Vec<(f64, f64)> },
    /// Uniform on `[0, max]`.
    Uniform { max: f64 },
    Weibull { scale: f64, shape: f64 },
    Erlang { shape: u32, rate: f64 },
    LogNormal { log_mean: f64, log_sd: f64 },
    Deterministic { value: f64 },
    /// Finite list of `(value, probability)` atoms sorted by value.
    Empirical { atoms: Vec<(f64, f64)> },
}

/// Which side of a threshold a restricted expectation covers.
///
/// `Below` is `T < θ` and `Above` is `T ≥ θ`, so `θ = 0` always puts the full
/// mass above.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    Below,
    Above,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Moments {
    pub m1: f64,
    pub m2: f64,
}

impl Moments {
    pub fn variance(&self) -> f64 {
        self.m2 - self.m1 * self.m1
    }
}

/// A validated, immutable transfer-time law.
#[derive(Debug, Clone, PartialEq)]
pub struct TransferDistribution {
    family: Family,
    /// Cumulative atom weights, only populated for `Empirical`.
    cumulative: Vec<f64>,
}

fn positive(name: &str, v: f64) -> Result<()> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(AoiError::InvalidDistribution(format!("{name} must be finite and > 0, got {v}")))
    }
}

impl TransferDistribution {
    fn plain(family: Family) -> Self {
        TransferDistribution { family, cumulative: Vec::new() }
    }

    pub fn exponential(rate: f64) -> Result<Self> {
        positive("rate", rate)?;
        Ok(Self::plain(Family::Exponential { rate }))
    }

    pub fn hyper_exponential(branches: Vec<(f64, f64)>) -> Result<Self> {
        if branches.is_empty() {
            return Err(AoiError::InvalidDistribution("hyper-exponential needs at least one branch".into()));
        }
        let mut total = 0.0;
        for &(p, rate) in &branches {
            if !(p.is_finite() && p >= 0.0) {
                return Err(AoiError::InvalidDistribution(format!("branch weight {p} is negative")));
            }
            positive("branch rate", rate)?;
            total += p;
        }
        if (total - 1.0).abs() > 1e-12 {
            return Err(AoiError::InvalidDistribution(format!("branch weights sum to {total}, not 1")));
        }
        Ok(Self::plain(Family::HyperExponential { branches }))
    }

    pub fn uniform(max: f64) -> Result<Self> {
        positive("max", max)?;
        Ok(Self::plain(Family::Uniform { max }))
    }

    pub fn weibull(scale: f64, shape: f64) -> Result<Self> {
        positive("scale", scale)?;
        positive("shape", shape)?;
        Ok(Self::plain(Family::Weibull { scale, shape }))
    }

    pub fn erlang(shape: u32, rate: f64) -> Result<Self> {
        if shape == 0 {
            return Err(AoiError::InvalidDistribution("Erlang shape must be >= 1".into()));
        }
        positive("rate", rate)?;
        Ok(Self::plain(Family::Erlang { shape, rate }))
    }

    pub fn log_normal(log_mean: f64, log_sd: f64) -> Result<Self> {
        if !log_mean.is_finite() {
            return Err(AoiError::InvalidDistribution(format!("log-mean {log_mean} is not finite")));
        }
        positive("log-sd", log_sd)?;
        Ok(Self::plain(Family::LogNormal { log_mean, log_sd }))
    }

    pub fn deterministic(value: f64) -> Result<Self> {
        positive("value", value)?;
        Ok(Self::plain(Family::Deterministic { value }))
    }

    /// Equal-weight atoms at the given samples.
    pub fn empirical(samples: &[f64]) -> Result<Self> {
        if samples.is_empty() {
            return Err(AoiError::InvalidDistribution("empirical law needs at least one sample".into()));
        }
        let w = 1.0 / samples.len() as f64;
        Self::discrete(samples.iter().map(|&v| (v, w)).collect())
    }

    /// Weighted atoms; weights are renormalized after validation.
    pub fn discrete(mut atoms: Vec<(f64, f64)>) -> Result<Self> {
        if atoms.is_empty() {
            return Err(AoiError::InvalidDistribution("discrete law needs at least one atom".into()));
        }
        for &(v, p) in &atoms {
            if !(v.is_finite() && v >= 0.0) {
                return Err(AoiError::InvalidDistribution(format!("atom {v} is negative or not finite")));
            }
            if !(p.is_finite() && p >= 0.0) {
                return Err(AoiError::InvalidDistribution(format!("atom weight {p} is invalid")));
            }
        }
        atoms.sort_by(|a, b| a.0.total_cmp(&b.0));
        let mut merged: Vec<(f64, f64)> = Vec::with_capacity(atoms.len());
        for (v, p) in atoms {
            match merged.last_mut() {
                Some(last) if last.0 == v => last.1 += p,
                _ => merged.push((v, p)),
            }
        }
        let total: f64 = merged.iter().map(|a| a.1).sum();
        if !(total > 0.0) {
            return Err(AoiError::InvalidDistribution("atom weights sum to zero".into()));
        }
        if merged.iter().all(|a| a.0 == 0.0) {
            return Err(AoiError::InvalidDistribution("all mass at zero gives a zero mean transfer time".into()));
        }
        let mut acc = 0.0;
        let mut cumulative = Vec::with_capacity(merged.len());
        for a in merged.iter_mut() {
            a.1 /= total;
            acc += a.1;
            cumulative.push(acc);
        }
        Ok(TransferDistribution { family: Family::Empirical { atoms: merged }, cumulative })
    }

    /// Poisson law with the given mean, truncated where the upper tail mass drops below 1e-12.
    pub fn poisson(mean: f64) -> Result<Self> {
        positive("mean", mean)?;
        let mut atoms = Vec::new();
        let mut log_p = -mean;
        let mut cum = 0.0;
        let mut k = 0u32;
        loop {
            let p = log_p.exp();
            atoms.push((f64::from(k), p));
            cum += p;
            if 1.0 - cum < 1e-12 && f64::from(k) > mean {
                break;
            }
            k += 1;
            log_p += mean.ln() - f64::from(k).ln();
            if k > 100_000 {
                break;
            }
        }
        Self::discrete(atoms)
    }

    pub fn family(&self) -> &Family {
        &self.family
    }

    /// True when every closed-form fast path applies at every weight.
    pub fn has_closed_form_weighting(&self) -> bool {
        matches!(
            self.family,
            Family::Exponential { .. }
                | Family::HyperExponential { .. }
                | Family::Erlang { .. }
                | Family::Deterministic { .. }
                | Family::Empirical { .. }
        )
    }

    /// `E[T^order · e^{-λT}; lo ≤ T < hi]` with `λ ≥ 0`.
    pub fn partial_moment(&self, order: u32, lambda: f64, lo: f64, hi: f64) -> f64 {
        let lo = lo.max(0.0);
        if !(hi > lo) {
            return 0.0;
        }
        match &self.family {
            Family::Exponential { rate } => erlang_partial(1, *rate, order, lambda, lo, hi),
            Family::Erlang { shape, rate } => erlang_partial(*shape, *rate, order, lambda, lo, hi),
            Family::HyperExponential { branches } => branches
                .iter()
                .map(|&(p, rate)| p * erlang_partial(1, rate, order, lambda, lo, hi))
                .sum(),
            Family::Deterministic { value } => atom_term(*value, order, lambda, lo, hi),
            Family::Empirical { atoms } => {
                atoms.iter().map(|&(v, p)| p * atom_term(v, order, lambda, lo, hi)).sum()
            }
            Family::Uniform { max } if lambda == 0.0 => {
                let a = lo.min(*max);
                let b = hi.min(*max);
                let k1 = f64::from(order + 1);
                (b.powf(k1) - a.powf(k1)) / (k1 * max)
            }
            Family::Weibull { scale, shape } if lambda == 0.0 => {
                let a = f64::from(order) / shape + 1.0;
                let coef = scale.powi(order as i32) * statrs::function::gamma::gamma(a);
                let ua = (lo / scale).powf(*shape);
                let ub = (hi / scale).powf(*shape);
                coef * gamma_interval(a, ua, ub)
            }
            Family::LogNormal { log_mean, log_sd } if lambda == 0.0 => {
                let k = f64::from(order);
                let coef = (k * log_mean + 0.5 * k * k * log_sd * log_sd).exp();
                let shift = log_mean + k * log_sd * log_sd;
                let za = if lo > 0.0 { (lo.ln() - shift) / log_sd } else { f64::NEG_INFINITY };
                let zb = if hi.is_finite() { (hi.ln() - shift) / log_sd } else { f64::INFINITY };
                coef * normal_interval(za, zb)
            }
            _ => self.partial_moment_by_quadrature(order, lambda, lo, hi),
        }
    }

    /// Same quantity as [`partial_moment`](Self::partial_moment), always by
    /// quadrature for continuous families (exact sums for atoms).
    pub fn partial_moment_by_quadrature(&self, order: u32, lambda: f64, lo: f64, hi: f64) -> f64 {
        let lo = lo.max(0.0);
        if !(hi > lo) {
            return 0.0;
        }
        let k = order as i32;
        let g = |t: f64| if t > 0.0 || k == 0 { t.powi(k) * (-lambda * t).exp() } else { 0.0 };
        match &self.family {
            Family::Weibull { scale, shape } => {
                let ua = (lo / scale).powf(*shape);
                let ub = (hi / scale).powf(*shape).min(WEIBULL_U_MAX);
                let inv = 1.0 / shape;
                quadrature::integrate(|u| g(scale * u.powf(inv)) * (-u).exp(), ua, ub, QUAD_REL_TOL, 0.0)
            }
            Family::LogNormal { log_mean, log_sd } => {
                let za = if lo > 0.0 { (lo.ln() - log_mean) / log_sd } else { f64::NEG_INFINITY };
                let zb = if hi.is_finite() { (hi.ln() - log_mean) / log_sd } else { f64::INFINITY };
                let za = za.max(-LOGNORMAL_Z_LIMIT);
                let zb = zb.min(LOGNORMAL_Z_LIMIT);
                let norm = 1.0 / (2.0 * std::f64::consts::PI).sqrt();
                quadrature::integrate(
                    |z| g((log_mean + log_sd * z).exp()) * norm * (-0.5 * z * z).exp(),
                    za,
                    zb,
                    QUAD_REL_TOL,
                    0.0,
                )
            }
            Family::Deterministic { .. } | Family::Empirical { .. } => self.partial_moment(order, lambda, lo, hi),
            _ => {
                let upper = hi.min(self.quadrature_upper());
                quadrature::integrate(|t| g(t) * self.density(t), lo, upper, QUAD_REL_TOL, 0.0)
            }
        }
    }

    /// Density for the families integrated directly in `t`.
    fn density(&self, t: f64) -> f64 {
        if t < 0.0 {
            return 0.0;
        }
        match &self.family {
            Family::Exponential { rate } => rate * (-rate * t).exp(),
            Family::Erlang { shape, rate } => {
                if t == 0.0 {
                    return if *shape == 1 { *rate } else { 0.0 };
                }
                let m = f64::from(*shape);
                (m * rate.ln() + (m - 1.0) * t.ln() - rate * t - ln_factorial(shape - 1)).exp()
            }
            Family::HyperExponential { branches } => {
                branches.iter().map(|&(p, r)| p * r * (-r * t).exp()).sum()
            }
            Family::Uniform { max } => {
                if t <= *max {
                    1.0 / max
                } else {
                    0.0
                }
            }
            _ => f64::NAN,
        }
    }

    /// Point past which the density-based integrands are negligible.
    fn quadrature_upper(&self) -> f64 {
        match &self.family {
            Family::Exponential { rate } => 90.0 / rate,
            Family::Erlang { shape, rate } => {
                let m = f64::from(*shape);
                (m + 90.0 + 15.0 * m.sqrt()) / rate
            }
            Family::HyperExponential { branches } => {
                let slowest = branches.iter().filter(|b| b.0 > 0.0).map(|b| b.1).fold(f64::INFINITY, f64::min);
                90.0 / slowest
            }
            Family::Uniform { max } => *max,
            _ => f64::INFINITY,
        }
    }

    /// `P(T < x)`.
    pub fn prob_below(&self, x: f64) -> f64 {
        self.partial_moment(0, 0.0, 0.0, x)
    }

    pub fn moments(&self) -> Result<Moments> {
        let m1 = self.partial_moment(1, 0.0, 0.0, f64::INFINITY);
        let m2 = self.partial_moment(2, 0.0, 0.0, f64::INFINITY);
        if !(m1.is_finite() && m1 > 0.0) {
            return Err(AoiError::NonfiniteMoment { order: 1 });
        }
        if !(m2.is_finite() && m2 > 0.0) {
            return Err(AoiError::NonfiniteMoment { order: 2 });
        }
        Ok(Moments { m1, m2 })
    }

    pub fn mean(&self) -> f64 {
        self.partial_moment(1, 0.0, 0.0, f64::INFINITY)
    }

    /// `E[T^order · e^{-λT}]`. Order 0 is `γ = P(T ≤ ξ)` for `ξ ~ Exp(λ)`.
    pub fn exp_weighted_moment(&self, lambda: f64, order: u32) -> Result<f64> {
        crate::error::require_rate("λ", lambda)?;
        Ok(self.partial_moment(order, lambda, 0.0, f64::INFINITY))
    }

    /// `E[T; T < θ]` or `E[T; T ≥ θ]`.
    pub fn restricted_mean(&self, theta: f64, side: Side) -> f64 {
        match side {
            Side::Below => self.partial_moment(1, 0.0, 0.0, theta),
            Side::Above => self.partial_moment(1, 0.0, theta, f64::INFINITY),
        }
    }

    /// `E[T; side | T ≤ ξ] = E[T e^{-λT}; side] / γ`.
    pub fn conditional_restricted_mean(&self, lambda: f64, theta: f64, side: Side) -> Result<f64> {
        let gamma = crate::error::guard_probability(self.exp_weighted_moment(lambda, 0)?)?;
        let num = match side {
            Side::Below => self.partial_moment(1, lambda, 0.0, theta),
            Side::Above => self.partial_moment(1, lambda, theta, f64::INFINITY),
        };
        Ok(num / gamma)
    }

    /// One draw. The same generator state always yields the same value.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match &self.family {
            Family::Exponential { rate } => rng.sample::<f64, _>(Exp1) / rate,
            Family::Erlang { shape, rate } => {
                (0..*shape).map(|_| rng.sample::<f64, _>(Exp1)).sum::<f64>() / rate
            }
            Family::HyperExponential { branches } => {
                let u: f64 = rng.random();
                let mut acc = 0.0;
                let mut chosen = branches[branches.len() - 1].1;
                for &(p, rate) in branches {
                    acc += p;
                    if u < acc {
                        chosen = rate;
                        break;
                    }
                }
                rng.sample::<f64, _>(Exp1) / chosen
            }
            Family::Uniform { max } => max * rng.random::<f64>(),
            Family::Weibull { scale, shape } => scale * rng.sample::<f64, _>(Exp1).powf(1.0 / shape),
            Family::LogNormal { log_mean, log_sd } => {
                (log_mean + log_sd * rng.sample::<f64, _>(StandardNormal)).exp()
            }
            Family::Deterministic { value } => *value,
            Family::Empirical { atoms } => {
                let u: f64 = rng.random();
                let idx = self.cumulative.partition_point(|&c| c <= u).min(atoms.len() - 1);
                atoms[idx].0
            }
        }
    }
}

impl fmt::Display for TransferDistribution {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.family {
            Family::Exponential { rate } => write!(f, "exponential(rate={rate})"),
            Family::HyperExponential { branches } => {
                write!(f, "hyper-exponential(")?;
                for (i, (p, r)) in branches.iter().enumerate() {
                    if i > 0 {
                        write!(f, ";")?;
                    }
                    write!(f, "{p}@{r}")?;
                }
                write!(f, ")")
            }
            Family::Uniform { max } => write!(f, "uniform(0,{max})"),
            Family::Weibull { scale, shape } => write!(f, "weibull(scale={scale},shape={shape})"),
            Family::Erlang { shape, rate } => write!(f, "erlang(shape={shape},rate={rate})"),
            Family::LogNormal { log_mean, log_sd } => write!(f, "log-normal({log_mean},{log_sd})"),
            Family::Deterministic { value } => write!(f, "deterministic({value})"),
            Family::Empirical { atoms } => write!(f, "empirical({} atoms)", atoms.len()),
        }
    }
}

fn atom_term(v: f64, order: u32, lambda: f64, lo: f64, hi: f64) -> f64 {
    if v >= lo && v < hi {
        v.powi(order as i32) * (-lambda * v).exp()
    } else {
        0.0
    }
}

/// `E[T^k e^{-λT}; lo ≤ T < hi]` for `T ~ Erlang(m, ν)`.
fn erlang_partial(m: u32, nu: f64, k: u32, lambda: f64, lo: f64, hi: f64) -> f64 {
    let s = nu + lambda;
    let mk = m + k;
    let mf = f64::from(m);
    // ν^m / s^{m+k} · (m+k-1)! / (m-1)!
    let log_coef = mf * nu.ln() - f64::from(mk) * s.ln() + ln_factorial(mk - 1) - ln_factorial(m - 1);
    let (pa, qa) = regularized_gamma_int(mk, s * lo);
    let (pb, qb) = if hi.is_finite() { regularized_gamma_int(mk, s * hi) } else { (1.0, 0.0) };
    let mass = if pa > 0.5 { qa - qb } else { pb - pa };
    log_coef.exp() * mass.max(0.0)
}

/// `P(a, ub) - P(a, ua)` with the complement used in the upper tail.
fn gamma_interval(a: f64, ua: f64, ub: f64) -> f64 {
    use statrs::function::gamma::{gamma_lr, gamma_ur};
    let q_at = |u: f64| if u.is_finite() { gamma_ur(a, u) } else { 0.0 };
    let p_at = |u: f64| if u.is_finite() { gamma_lr(a, u) } else { 1.0 };
    if ua == 0.0 {
        p_at(ub)
    } else if ua > a {
        (q_at(ua) - q_at(ub)).max(0.0)
    } else {
        (p_at(ub) - p_at(ua)).max(0.0)
    }
}

fn normal_interval(za: f64, zb: f64) -> f64 {
    if za > 0.0 {
        (normal_cdf(-za) - normal_cdf(-zb)).max(0.0)
    } else {
        (normal_cdf(zb) - normal_cdf(za)).max(0.0)
    }
}

#[cfg(test)]
mod tests;
