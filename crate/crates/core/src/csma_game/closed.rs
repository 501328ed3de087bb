use super::{ChannelModel, FastPath, FastPathCheck, SuccessStats};

/// Exact success probability when `θ ≥ 1` (clearing θ implies having the largest gain).
pub fn phi_exact_theta_ge_one(channel: &ChannelModel, q: &[f64], s: usize) -> f64 {
    let (ss, th) = (channel.sigma2[s], channel.theta);
    let others: f64 = (0..q.len())
        .filter(|&l| l != s)
        .map(|l| 1.0 - q[l] + q[l] * ss / (ss + th * channel.sigma2[l]))
        .product();
    q[s] * (-0.5 * th * channel.noise / ss).exp() * others
}

/// Small-noise approximation for `θ < 1`: `q_s E[Π_{s'≠s}(1 − q_s' e^{−|H_s|²/(2σ_s'²)})]`,
/// expanded over subsets of the other sources.
pub fn phi_low_noise(channel: &ChannelModel, q: &[f64], s: usize) -> f64 {
    let others: Vec<usize> = (0..q.len()).filter(|&l| l != s).collect();
    let ss = channel.sigma2[s];
    let mut sum = 0.0;
    for mask in 0u64..(1u64 << others.len()) {
        let mut weight = 1.0;
        let mut inv = 0.0;
        for (k, &l) in others.iter().enumerate() {
            if mask >> k & 1 == 1 {
                weight *= -q[l];
                inv += 1.0 / channel.sigma2[l];
            }
        }
        sum += weight / (1.0 + ss * inv);
    }
    q[s] * sum
}

/// Exact when every other source has `q = 0`.
pub fn phi_solo(channel: &ChannelModel, q: &[f64], s: usize) -> f64 {
    q[s] * (-0.5 * channel.theta * channel.noise / channel.sigma2[s]).exp()
}

/// Two-source approximation `q_1(1 − q_2 mσ_2²/(mσ_2² + σ_1²))`, `m = max(θ, 1)`.
pub fn phi_two_source(channel: &ChannelModel, q: &[f64], s: usize) -> f64 {
    let o = 1 - s;
    let m = channel.theta.max(1.0);
    let so = m * channel.sigma2[o];
    q[s] * (1.0 - q[o] * so / (so + channel.sigma2[s]))
}

pub(crate) fn applicable_checks(channel: &ChannelModel, q: &[f64], stats: &SuccessStats) -> Vec<FastPathCheck> {
    let n = q.len();
    let mut out = Vec::new();
    let mut push = |path, s: usize, closed_form: f64| {
        out.push(FastPathCheck {
            path,
            source: s,
            closed_form,
            estimate: stats.pooled.phi[s],
            half_width: stats.phi_half_width[s],
        })
    };
    for s in 0..n {
        if (0..n).all(|l| l == s || q[l] == 0.0) {
            push(FastPath::Solo, s, phi_solo(channel, q, s));
        }
        if channel.theta >= 1.0 {
            push(FastPath::ThetaAtLeastOne, s, phi_exact_theta_ge_one(channel, q, s));
        } else if n <= 16 {
            push(FastPath::LowNoise, s, phi_low_noise(channel, q, s));
        }
        if n == 2 {
            push(FastPath::TwoSource, s, phi_two_source(channel, q, s));
        }
    }
    out
}
