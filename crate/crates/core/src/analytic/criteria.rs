use super::scheme_constants;
use crate::distributions::{Family, TransferDistribution};
use crate::error::{require_rate, AoiError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verdict {
    DopOptimal,
    DnpOptimal,
    Undetermined,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PolicyVerdict {
    pub verdict: Verdict,
    pub d_n: f64,
    pub d_o: f64,
    /// `ρE[T²]/(2E[T]) − (1+ρ)(d_o − d_n)(1 − λE[Te^{-λT}])`; DNP is optimal
    /// when this is nonpositive and `d_n < d_o`.
    pub theorem2_lhs: f64,
}

/// Sufficient conditions for optimality of DOP (`d_n ≥ d_o`) or of DNP over all
/// threshold and randomized policies.
pub fn classify_optimal_policy(dist: &TransferDistribution, lambda: f64) -> Result<PolicyVerdict> {
    let k = scheme_constants(dist, lambda)?;
    let rho = k.load();
    let lhs = rho * k.second / (2.0 * k.mean) - (1.0 + rho) * (k.d_o - k.d_n) * (1.0 - lambda * k.weighted_mean);
    let verdict = if k.d_n >= k.d_o {
        Verdict::DopOptimal
    } else if lhs <= 0.0 {
        Verdict::DnpOptimal
    } else {
        Verdict::Undetermined
    };
    Ok(PolicyVerdict { verdict, d_n: k.d_n, d_o: k.d_o, theorem2_lhs: lhs })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DnpDopComparison {
    pub dnp_better: bool,
    /// `1 − R`; positive exactly when DNP has the smaller age.
    pub margin: f64,
}

/// DNP beats DOP iff `R = (E[T²]/(2E[T]²)·ρ²/(1+ρ) + 1 + ρ)·γ < 1`.
/// Unlike the age formulas this stays defined when `γ` underflows.
pub fn dnp_beats_dop(dist: &TransferDistribution, lambda: f64) -> Result<DnpDopComparison> {
    require_rate("lambda", lambda)?;
    let m = dist.moments()?;
    let gamma = dist.exp_weighted_moment(lambda, 0)?;
    let rho = lambda * m.m1;
    let r = (m.m2 / (2.0 * m.m1 * m.m1) * rho * rho / (1.0 + rho) + 1.0 + rho) * gamma;
    Ok(DnpDopComparison { dnp_better: r < 1.0, margin: 1.0 - r })
}

const SCAN_POINTS: usize = 400;

/// Arrival rate in `[lo, hi]` where the DNP/DOP comparison flips, located on a
/// log-spaced scan and refined by bisection.
pub fn find_crossover(dist: &TransferDistribution, lo: f64, hi: f64) -> Result<f64> {
    require_rate("lo", lo)?;
    require_rate("hi", hi)?;
    if hi <= lo {
        return Err(AoiError::InvalidParameter(format!("empty scan interval [{lo}, {hi}]")));
    }
    let margin = |l: f64| dnp_beats_dop(dist, l).map(|c| c.margin);
    let ratio = (hi / lo).ln();
    let mut prev_rate = lo;
    let mut prev = margin(lo)?;
    for i in 1..SCAN_POINTS {
        let rate = if i == SCAN_POINTS - 1 { hi } else { lo * (ratio * i as f64 / (SCAN_POINTS - 1) as f64).exp() };
        let m = margin(rate)?;
        if prev == 0.0 {
            return Ok(prev_rate);
        }
        if (prev < 0.0) != (m < 0.0) {
            let (mut a, mut b, mut fa) = (prev_rate, rate, prev);
            while b - a > 1e-10 * b.max(1.0) {
                let mid = 0.5 * (a + b);
                let fm = margin(mid)?;
                if (fm < 0.0) == (fa < 0.0) {
                    a = mid;
                    fa = fm;
                } else {
                    b = mid;
                }
            }
            return Ok(0.5 * (a + b));
        }
        prev_rate = rate;
        prev = m;
    }
    Err(AoiError::NoSignChange { lo, hi })
}

/// Uniform(0, φ) with `x = λφ`: positive when DOP has the smaller age.
pub fn uniform_criterion_margin(x: f64) -> f64 {
    x / (3.0 * (2.0 + x)) + 1.0 / x + 0.5 - 1.0 / (1.0 - (-x).exp())
}

/// Weibull with scale μ and shape k, `ρ = λμ`: positive when DOP has the smaller age.
pub fn weibull_criterion_margin(rho: f64, shape: f64) -> Result<f64> {
    let w1 = statrs::function::gamma::gamma(1.0 + 1.0 / shape);
    let w2 = statrs::function::gamma::gamma(1.0 + 2.0 / shape);
    let w_rho = TransferDistribution::weibull(1.0, shape)?.exp_weighted_moment(rho, 0)?;
    let lhs = rho * rho * w2 / (2.0 * (1.0 + rho * w1)) + 1.0 + rho * w1;
    Ok(lhs - 1.0 / w_rho)
}

/// Table-form verdict "DOP is no worse than DNP" for the families that have
/// one: exponential and hyper-exponential (always), uniform and Weibull
/// (explicit criterion). `None` for other families.
pub fn table1_criterion(dist: &TransferDistribution, lambda: f64) -> Result<Option<bool>> {
    require_rate("lambda", lambda)?;
    Ok(match dist.family() {
        Family::Exponential { .. } | Family::HyperExponential { .. } => Some(true),
        Family::Uniform { max } => Some(uniform_criterion_margin(lambda * max) >= 0.0),
        Family::Weibull { scale, shape } => Some(weibull_criterion_margin(lambda * scale, *shape)? >= 0.0),
        _ => None,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct ErlangMatch {
    pub dist: TransferDistribution,
    pub shape: u32,
    pub transfer_rate: f64,
    pub lambda: f64,
}

/// Erlang transfer law and arrival rate whose DNP and DOP cycle means equal
/// `d_n` and `d_o`. With `x = λ/ν` the ratio `d_o/d_n = (1+x)^m/(1+mx)`,
/// increasing in `x`, so `x` is found by bisection.
pub fn erlang_matching_cycle_means(shape: u32, d_n: f64, d_o: f64) -> Result<ErlangMatch> {
    if shape < 2 {
        return Err(AoiError::InvalidParameter("Erlang shape must be >= 2 to separate d_n and d_o".into()));
    }
    if !(d_n > 0.0 && d_o > d_n && d_o.is_finite()) {
        return Err(AoiError::InvalidParameter(format!("need 0 < d_n < d_o, got d_n={d_n}, d_o={d_o}")));
    }
    let m = shape as f64;
    let target = d_o / d_n;
    let f = |x: f64| (1.0 + x).powf(m) / (1.0 + m * x);
    let mut hi = 1.0;
    while f(hi) < target {
        hi *= 2.0;
    }
    let mut lo = 0.0;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if f(mid) < target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let x = 0.5 * (lo + hi);
    let lambda = (1.0 + m * x) / d_n;
    let transfer_rate = lambda / x;
    Ok(ErlangMatch { dist: TransferDistribution::erlang(shape, transfer_rate)?, shape, transfer_rate, lambda })
}
