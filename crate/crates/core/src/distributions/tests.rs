use super::*;
use crate::rng;
use proptest::prelude::*;

/// Composite Simpson rule, kept separate from the Gauss–Kronrod engine under test.
fn simpson<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, n: usize) -> f64 {
    let n = if n % 2 == 1 { n + 1 } else { n };
    let h = (b - a) / n as f64;
    let mut s = f(a) + f(b);
    for i in 1..n {
        let x = a + i as f64 * h;
        s += if i % 2 == 1 { 4.0 } else { 2.0 } * f(x);
    }
    s * h / 3.0
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(1e-300)
}

fn family_grid() -> Vec<TransferDistribution> {
    vec![
        TransferDistribution::exponential(1.3).unwrap(),
        TransferDistribution::hyper_exponential(vec![(0.3, 1.0), (0.7, 4.0)]).unwrap(),
        TransferDistribution::uniform(2.0).unwrap(),
        TransferDistribution::weibull(1.0, 2.0).unwrap(),
        TransferDistribution::weibull(0.8, 0.6).unwrap(),
        TransferDistribution::erlang(3, 2.0).unwrap(),
        TransferDistribution::log_normal(-0.2, 0.5).unwrap(),
        TransferDistribution::deterministic(0.7).unwrap(),
        TransferDistribution::empirical(&[0.2, 0.5, 0.5, 1.7, 3.0]).unwrap(),
        TransferDistribution::poisson(2.5).unwrap(),
    ]
}

#[test]
fn exponential_moments() {
    let m = TransferDistribution::exponential(2.0).unwrap().moments().unwrap();
    assert!((m.m1 - 0.5).abs() < 1e-15);
    assert!((m.m2 - 0.5).abs() < 1e-15);
}

#[test]
fn deterministic_moments() {
    let m = TransferDistribution::deterministic(3.0).unwrap().moments().unwrap();
    assert_eq!((m.m1, m.m2), (3.0, 9.0));
}

#[test]
fn weibull_moments_are_gamma_values() {
    let m = TransferDistribution::weibull(1.0, 2.0).unwrap().moments().unwrap();
    // Γ(1.5) = √π / 2
    assert!((m.m1 - 0.886_226_925_452_758).abs() < 1e-12);
    assert!((m.m2 - 1.0).abs() < 1e-12);
}

#[test]
fn moments_match_simpson_for_continuous_families() {
    let cases: Vec<(TransferDistribution, Box<dyn Fn(f64) -> f64>, f64)> = vec![
        (TransferDistribution::uniform(2.0).unwrap(), Box::new(|_| 0.5), 2.0),
        (
            TransferDistribution::erlang(3, 2.0).unwrap(),
            Box::new(|t: f64| 8.0 * t * t * (-2.0 * t).exp() / 2.0),
            60.0,
        ),
        (
            TransferDistribution::weibull(1.0, 2.0).unwrap(),
            Box::new(|t: f64| 2.0 * t * (-(t * t)).exp()),
            12.0,
        ),
    ];
    for (d, pdf, upper) in cases {
        let m = d.moments().unwrap();
        let m1 = simpson(|t| t * pdf(t), 0.0, upper, 200_000);
        let m2 = simpson(|t| t * t * pdf(t), 0.0, upper, 200_000);
        assert!(rel(m.m1, m1) < 1e-9, "{d}: {} vs {m1}", m.m1);
        assert!(rel(m.m2, m2) < 1e-9, "{d}: {} vs {m2}", m.m2);
    }
}

#[test]
fn log_normal_moments_closed_form() {
    let d = TransferDistribution::log_normal(0.3, 0.8).unwrap();
    let m = d.moments().unwrap();
    assert!(rel(m.m1, (0.3f64 + 0.32).exp()) < 1e-12);
    assert!(rel(m.m2, (0.6f64 + 1.28).exp()) < 1e-12);
}

#[test]
fn gamma_for_exponential_by_conditioning() {
    // ∫ μ e^{-μt} e^{-λt} dt with μ = λ = 1
    let oracle = simpson(|t| (-2.0 * t).exp(), 0.0, 60.0, 200_000);
    let d = TransferDistribution::exponential(1.0).unwrap();
    let g = d.exp_weighted_moment(1.0, 0).unwrap();
    assert!((g - 0.5).abs() < 1e-15);
    assert!((oracle - 0.5).abs() < 1e-10);
}

#[test]
fn deterministic_weighted_moment() {
    let d = TransferDistribution::deterministic(1.7).unwrap();
    let v = d.exp_weighted_moment(0.4, 1).unwrap();
    assert!((v - 1.7 * (-0.68f64).exp()).abs() < 1e-15);
}

#[test]
fn hyper_exponential_gamma() {
    let d = TransferDistribution::hyper_exponential(vec![(0.3, 1.0), (0.7, 4.0)]).unwrap();
    let g = d.exp_weighted_moment(2.0, 0).unwrap();
    let expected = 0.3 / 3.0 + 0.7 * 4.0 / 6.0;
    assert!((g - expected).abs() < 1e-15);
    assert!((expected - 0.566_666_666_666_666_7).abs() < 1e-15);
    let quad = d.partial_moment_by_quadrature(0, 2.0, 0.0, f64::INFINITY);
    assert!(rel(quad, expected) < 1e-9);
}

#[test]
fn exp_weighted_moment_rejects_nonpositive_rate() {
    let d = TransferDistribution::exponential(1.0).unwrap();
    assert!(d.exp_weighted_moment(0.0, 0).is_err());
    assert!(d.exp_weighted_moment(-1.0, 1).is_err());
}

#[test]
fn restricted_means() {
    let u = TransferDistribution::uniform(2.0).unwrap();
    assert!((u.restricted_mean(1.0, Side::Below) - 0.25).abs() < 1e-15);
    for d in family_grid() {
        assert!((d.restricted_mean(0.0, Side::Above) - d.mean()).abs() < 1e-12, "{d}");
        assert_eq!(d.restricted_mean(0.0, Side::Below), 0.0);
    }
    let e = TransferDistribution::exponential(1.0).unwrap();
    let ln2 = std::f64::consts::LN_2;
    let oracle = simpson(|t| t * (-t).exp(), 0.0, ln2, 20_000);
    let closed = 1.0 - 0.5 * (ln2 + 1.0);
    assert!((oracle - closed).abs() < 1e-12);
    assert!((e.restricted_mean(ln2, Side::Below) - oracle).abs() < 1e-12);
    assert!((closed - 0.153_426_409_720_027_3).abs() < 1e-12);
}

#[test]
fn conditional_restricted_means() {
    for d in family_grid() {
        let lambda = 0.9;
        let full = d.conditional_restricted_mean(lambda, 0.0, Side::Above).unwrap();
        let b_o = d.exp_weighted_moment(lambda, 1).unwrap() / d.exp_weighted_moment(lambda, 0).unwrap();
        assert!(rel(full, b_o) < 1e-12, "{d}");
    }
    let c = 1.3;
    let det = TransferDistribution::deterministic(c).unwrap();
    assert!((det.conditional_restricted_mean(0.5, 2.0 * c, Side::Below).unwrap() - c).abs() < 1e-15);

    let e = TransferDistribution::exponential(1.0).unwrap();
    let oracle = simpson(|t| t * (-2.0 * t).exp(), 0.0, 1.0, 20_000) / 0.5;
    let v = e.conditional_restricted_mean(1.0, 1.0, Side::Below).unwrap();
    assert!((v - oracle).abs() < 1e-12, "{v} vs {oracle}");
}

#[test]
fn sampling_deterministic_is_constant() {
    let d = TransferDistribution::deterministic(2.5).unwrap();
    let mut r = rng::stream(1, 0);
    assert!((0..1000).all(|_| d.sample(&mut r) == 2.5));
}

#[test]
fn sampling_exponential_mean_within_clt_bound() {
    let mu = 1.7;
    let d = TransferDistribution::exponential(mu).unwrap();
    let mut r = rng::stream(7, 3);
    let n = 1_000_000;
    let mean = (0..n).map(|_| d.sample(&mut r)).sum::<f64>() / n as f64;
    let sigma = (1.0 / mu) / (n as f64).sqrt();
    assert!((mean - 1.0 / mu).abs() < 3.0 * sigma, "{mean}");
}

#[test]
fn sampling_uniform_passes_ks() {
    let phi = 3.0;
    let d = TransferDistribution::uniform(phi).unwrap();
    let mut r = rng::stream(11, 0);
    let n = 100_000;
    let mut xs: Vec<f64> = (0..n).map(|_| d.sample(&mut r)).collect();
    xs.sort_by(f64::total_cmp);
    let ks = xs
        .iter()
        .enumerate()
        .map(|(i, x)| {
            let f = x / phi;
            (f - i as f64 / n as f64).abs().max(((i + 1) as f64 / n as f64 - f).abs())
        })
        .fold(0.0, f64::max);
    // 1% critical value of the Kolmogorov distribution
    assert!(ks < 1.628 / (n as f64).sqrt(), "{ks}");
}

#[test]
fn sampling_is_reproducible() {
    for d in family_grid() {
        let mut a = rng::stream(99, 5);
        let mut b = rng::stream(99, 5);
        let xa: Vec<f64> = (0..200).map(|_| d.sample(&mut a)).collect();
        let xb: Vec<f64> = (0..200).map(|_| d.sample(&mut b)).collect();
        assert_eq!(xa, xb);
        assert!(xa.iter().all(|x| *x >= 0.0));
    }
}

#[test]
fn sample_means_track_moments() {
    for d in family_grid() {
        let mut r = rng::stream(5, 0);
        let n = 200_000;
        let mut acc = crate::estimate::SampleMoments::default();
        for _ in 0..n {
            acc.push(d.sample(&mut r));
        }
        let m = d.moments().unwrap();
        assert!((acc.mean() - m.m1).abs() < 4.0 * acc.mean_se() + 1e-12, "{d}: {} vs {}", acc.mean(), m.m1);
    }
}

#[test]
fn gamma_in_unit_interval_and_decreasing() {
    for d in family_grid() {
        let gs: Vec<f64> = [0.1, 1.0, 10.0].iter().map(|&l| d.exp_weighted_moment(l, 0).unwrap()).collect();
        for g in &gs {
            assert!(*g > 0.0 && *g <= 1.0, "{d}: {g}");
        }
        assert!(gs[0] > gs[1] && gs[1] > gs[2], "{d}: {gs:?}");
    }
}

#[test]
fn theorem_two_footnote_positivity() {
    for d in family_grid() {
        for &l in &[0.01, 0.1, 1.0, 10.0, 100.0] {
            let v = 1.0 - l * d.exp_weighted_moment(l, 1).unwrap();
            assert!(v > 0.0, "{d} λ={l}");
        }
    }
}

#[test]
fn quadrature_agrees_with_closed_forms() {
    let closed = vec![
        TransferDistribution::exponential(0.7).unwrap(),
        TransferDistribution::exponential(5.0).unwrap(),
        TransferDistribution::hyper_exponential(vec![(0.2, 0.5), (0.5, 2.0), (0.3, 9.0)]).unwrap(),
        TransferDistribution::erlang(1, 1.0).unwrap(),
        TransferDistribution::erlang(4, 3.0).unwrap(),
        TransferDistribution::erlang(12, 1.5).unwrap(),
        TransferDistribution::weibull(1.4, 3.0).unwrap(),
        TransferDistribution::weibull(0.5, 0.7).unwrap(),
        TransferDistribution::log_normal(0.1, 0.9).unwrap(),
        TransferDistribution::uniform(1.5).unwrap(),
    ];
    for d in closed {
        for &lambda in &[0.0, 0.1, 1.0, 10.0] {
            // Weighted Weibull/log-normal/uniform only have the quadrature path.
            if lambda > 0.0 && !d.has_closed_form_weighting() {
                continue;
            }
            for order in 0..=2 {
                for &(lo, hi) in &[(0.0, f64::INFINITY), (0.0, 0.8), (0.8, f64::INFINITY), (0.3, 1.1)] {
                    let a = d.partial_moment(order, lambda, lo, hi);
                    let b = d.partial_moment_by_quadrature(order, lambda, lo, hi);
                    let tol = 1e-7 * a.abs().max(1e-12);
                    assert!((a - b).abs() <= tol, "{d} k={order} λ={lambda} [{lo},{hi}): {a} vs {b}");
                }
            }
        }
    }
}

#[test]
fn weighted_quadrature_families_match_simpson() {
    let u = TransferDistribution::uniform(2.0).unwrap();
    let oracle = simpson(|t| t * (-1.5 * t).exp() * 0.5, 0.0, 2.0, 20_000);
    assert!(rel(u.exp_weighted_moment(1.5, 1).unwrap(), oracle) < 1e-10);
    let w = TransferDistribution::weibull(1.0, 2.0).unwrap();
    let oracle = simpson(|t| t * t * (-0.5 * t).exp() * 2.0 * t * (-(t * t)).exp(), 0.0, 12.0, 200_000);
    assert!(rel(w.exp_weighted_moment(0.5, 2).unwrap(), oracle) < 1e-9);
}

#[test]
fn poisson_moments() {
    let d = TransferDistribution::poisson(2.5).unwrap();
    let m = d.moments().unwrap();
    assert!((m.m1 - 2.5).abs() < 1e-9);
    assert!((m.m2 - (2.5 + 6.25)).abs() < 1e-9);
}

#[test]
fn invalid_parameters_rejected() {
    assert!(TransferDistribution::exponential(0.0).is_err());
    assert!(TransferDistribution::exponential(f64::NAN).is_err());
    assert!(TransferDistribution::hyper_exponential(vec![(0.5, 1.0), (0.4, 2.0)]).is_err());
    assert!(TransferDistribution::hyper_exponential(vec![(1.2, 1.0), (-0.2, 2.0)]).is_err());
    assert!(TransferDistribution::uniform(-1.0).is_err());
    assert!(TransferDistribution::erlang(0, 1.0).is_err());
    assert!(TransferDistribution::weibull(1.0, 0.0).is_err());
    assert!(TransferDistribution::log_normal(0.0, 0.0).is_err());
    assert!(TransferDistribution::empirical(&[]).is_err());
    assert!(TransferDistribution::empirical(&[1.0, -0.5]).is_err());
    assert!(TransferDistribution::empirical(&[0.0, 0.0]).is_err());
}

fn arb_distribution() -> impl Strategy<Value = TransferDistribution> {
    prop_oneof![
        (0.1f64..10.0).prop_map(|r| TransferDistribution::exponential(r).unwrap()),
        (0.05f64..0.95, 0.1f64..5.0, 0.1f64..5.0)
            .prop_map(|(p, a, b)| TransferDistribution::hyper_exponential(vec![(p, a), (1.0 - p, b)]).unwrap()),
        (0.1f64..5.0).prop_map(|m| TransferDistribution::uniform(m).unwrap()),
        (0.2f64..3.0, 0.5f64..4.0).prop_map(|(s, k)| TransferDistribution::weibull(s, k).unwrap()),
        (1u32..8, 0.2f64..5.0).prop_map(|(m, r)| TransferDistribution::erlang(m, r).unwrap()),
        (-1.0f64..1.0, 0.1f64..1.2).prop_map(|(m, s)| TransferDistribution::log_normal(m, s).unwrap()),
        (0.1f64..5.0).prop_map(|c| TransferDistribution::deterministic(c).unwrap()),
        proptest::collection::vec(0.0f64..5.0, 1..20)
            .prop_filter("nonzero", |v| v.iter().any(|x| *x > 0.0))
            .prop_map(|v| TransferDistribution::empirical(&v).unwrap()),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn restricted_sides_sum_to_mean(d in arb_distribution(), theta in 0.0f64..6.0) {
        let total = d.restricted_mean(theta, Side::Below) + d.restricted_mean(theta, Side::Above);
        prop_assert!((total - d.mean()).abs() < 1e-9, "{} θ={}: {} vs {}", d, theta, total, d.mean());
    }

    #[test]
    fn variance_nonnegative(d in arb_distribution()) {
        let m = d.moments().unwrap();
        prop_assert!(m.variance() >= -1e-12 * m.m2);
    }
}
