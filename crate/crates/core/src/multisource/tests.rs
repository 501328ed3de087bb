use super::*;
use crate::analytic::{aaoi_dnp, aaoi_dop, scheme_constants};
use crate::sim::{simulate_policy, DropPolicy, SimConfig, StopRule};

fn exp_source(lambda: f64, mean: f64) -> SourceConfig {
    SourceConfig::new(lambda, TransferDistribution::exponential(1.0 / mean).unwrap())
}

fn three() -> Vec<SourceConfig> {
    vec![exp_source(0.5, 1.0), exp_source(1.0, 0.5), exp_source(2.0, 0.25)]
}

fn mixed() -> Vec<SourceConfig> {
    vec![
        SourceConfig::new(0.4, TransferDistribution::uniform(1.5).unwrap()),
        SourceConfig::new(0.9, TransferDistribution::erlang(2, 3.0).unwrap()),
    ]
}

#[test]
fn min_of_exponentials_identities() {
    let rates = [0.5, 1.0, 2.0];
    let (m1, m2) = min_exponential_moments(&rates, 0);
    assert!((m1 - 0.5 / 3.5f64.powi(2)).abs() < 1e-15);
    assert!((m2 - 1.0 / 3.5f64.powi(3)).abs() < 1e-15);
    let mut rng = stream(42, 0);
    let (mut a, mut b) = (SampleMoments::default(), SampleMoments::default());
    for _ in 0..1_000_000 {
        let x: Vec<f64> = rates.iter().map(|r| rng.sample::<f64, _>(Exp1) / r).collect();
        let win = x[0] <= x[1].min(x[2]);
        a.push(if win { x[0] } else { 0.0 });
        b.push(if win { x[0] * x[0] } else { 0.0 });
    }
    assert!((a.mean() - m1).abs() < 3.0 * a.mean_se());
    assert!((b.mean() - m2).abs() < 3.0 * b.mean_se());
}

#[test]
fn single_source_degenerates() {
    for d in [TransferDistribution::uniform(2.0).unwrap(), TransferDistribution::erlang(3, 1.5).unwrap()] {
        let src = vec![SourceConfig::new(0.8, d.clone())];
        let k = scheme_constants(&d, 0.8).unwrap();
        for backend in [MomentBackend::Paper, MomentBackend::Corrected] {
            let c = cycle_moments_multisource(&src, 0, Scheme::Dnp, backend).unwrap();
            assert!((c.mean - k.d_n).abs() < 1e-12 && (c.second - k.c_n).abs() < 1e-9);
            let c = cycle_moments_multisource(&src, 0, Scheme::Dop, backend).unwrap();
            assert!((c.mean - k.d_o).abs() < 1e-9 && (c.second - k.c_o).abs() < 1e-9);
        }
        let a = aaoi_multisource(&src, Scheme::Dnp).unwrap()[0].value;
        assert!((a - aaoi_dnp(&d, 0.8).unwrap().value).abs() < 1e-9);
        let a = aaoi_multisource(&src, Scheme::Dop).unwrap()[0].value;
        assert!((a - aaoi_dop(&d, 0.8).unwrap().value).abs() < 1e-9);
    }
}

#[test]
fn identical_sources_are_symmetric_and_permutation_equivariant() {
    let two = vec![exp_source(0.7, 0.6), exp_source(0.7, 0.6)];
    let a = aaoi_multisource(&two, Scheme::Dnp).unwrap();
    assert_eq!(a[0].value, a[1].value);
    let base = aaoi_multisource(&three(), Scheme::Dop).unwrap();
    let mut perm = three();
    perm.rotate_left(1);
    let p = aaoi_multisource(&perm, Scheme::Dop).unwrap();
    for i in 0..3 {
        assert!((base[(i + 1) % 3].value - p[i].value).abs() < 1e-12);
    }
}

#[test]
fn adding_a_source_lengthens_cycles() {
    let mut src = mixed();
    let before: Vec<f64> = (0..2).map(|s| cycle_moments_multisource(&src, s, Scheme::Dnp, MomentBackend::Paper).unwrap().mean).collect();
    src.push(exp_source(0.05, 2.0));
    for s in 0..2 {
        let after = cycle_moments_multisource(&src, s, Scheme::Dnp, MomentBackend::Paper).unwrap().mean;
        assert!(after > before[s]);
    }
}

#[test]
fn first_moments_match_structural_sampler() {
    for scheme in [Scheme::Dnp, Scheme::Dop] {
        for src in [three(), mixed()] {
            for s in 0..src.len() {
                let p = cycle_moments_multisource(&src, s, scheme, MomentBackend::Paper).unwrap();
                let m = cycle_moments_multisource(&src, s, scheme, MomentBackend::StructuralMc { seed: 3, cycles: 400_000 }).unwrap();
                assert!((p.mean - m.mean).abs() < 3.0 * m.mean_se, "{scheme:?} s={s}: {} vs {} ± {}", p.mean, m.mean, m.mean_se);
            }
        }
    }
}

#[test]
fn corrected_second_moment_matches_sampler_and_printed_one_does_not() {
    for scheme in [Scheme::Dnp, Scheme::Dop] {
        let rep = second_moment_diagnostic(&three(), scheme, 8, 400_000).unwrap();
        for r in &rep {
            assert!(r.corrected_consistent(), "{r:?}");
            assert!(!r.paper_consistent(), "{r:?}");
        }
    }
}

#[test]
fn printed_and_corrected_coincide_at_unit_total_rate() {
    let src = vec![exp_source(0.25, 1.0), exp_source(0.75, 0.5)];
    for s in 0..2 {
        let p = cycle_moments_multisource(&src, s, Scheme::Dnp, MomentBackend::Paper).unwrap();
        let c = cycle_moments_multisource(&src, s, Scheme::Dnp, MomentBackend::Corrected).unwrap();
        assert!((p.second - c.second).abs() < 1e-12);
    }
}

#[test]
fn structural_backend_age_agrees_with_closed_form() {
    let exact = aaoi_multisource(&three(), Scheme::Dnp).unwrap();
    let opts = MultisourceOptions { backend: MomentBackend::StructuralMc { seed: 12, cycles: 400_000 }, post_age: PostAge::Uninterrupted };
    let mc = aaoi_multisource_with(&three(), Scheme::Dnp, opts).unwrap();
    for (e, m) in exact.iter().zip(&mc) {
        assert!((e.value - m.value).abs() < 1.5 * m.half_width, "{e:?} {m:?}");
        assert_eq!(m.seed, Some(12));
    }
}

#[test]
fn simulator_single_source_matches_single_source_engine() {
    let d = TransferDistribution::uniform(2.0).unwrap();
    let ms = simulate_multisource(&[SourceConfig::new(0.9, d.clone())], Scheme::Dnp, 400_000.0, 1).unwrap();
    let mut cfg = SimConfig::new(d, 0.9, DropPolicy::Dnp);
    cfg.stop = StopRule::Horizon(400_000.0);
    cfg.seed = 2;
    let single = simulate_policy(&cfg).unwrap();
    let joint = (ms[0].half_width.powi(2) + single.half_width.powi(2)).sqrt();
    assert!((ms[0].value - single.value).abs() < 3.0 * joint, "{:?} {single:?}", ms[0]);
}

#[test]
fn simulator_symmetric_pair() {
    let two = vec![exp_source(0.7, 0.6), exp_source(0.7, 0.6)];
    let e = simulate_multisource(&two, Scheme::Dop, 300_000.0, 5).unwrap();
    let joint = (e[0].half_width.powi(2) + e[1].half_width.powi(2)).sqrt();
    assert!((e[0].value - e[1].value).abs() < 3.0 * joint);
}

#[test]
fn simulator_matches_corrected_pipeline() {
    for (scheme, seed) in [(Scheme::Dnp, 21), (Scheme::Dop, 22)] {
        let sim = simulate_multisource(&three(), scheme, 400_000.0, seed).unwrap();
        let exact = aaoi_multisource(&three(), scheme).unwrap();
        for (s, e) in sim.iter().zip(&exact) {
            assert!((s.value - e.value).abs() <= (3.0 * s.half_width).max(0.02 * e.value), "{scheme:?}: {s:?} vs {e:?}");
            assert!((s.value - e.value).abs() <= 3.0 * s.half_width, "{scheme:?}: {s:?} vs {e:?}");
        }
    }
}

#[test]
fn dop_post_age_is_the_uninterrupted_transfer() {
    let sim = simulate_multisource(&three(), Scheme::Dop, 2_000_000.0, 31).unwrap();
    let busy = aaoi_multisource_with(&three(), Scheme::Dop, MultisourceOptions { backend: MomentBackend::Corrected, post_age: PostAge::BusyTime }).unwrap();
    let unint = aaoi_multisource(&three(), Scheme::Dop).unwrap();
    for s in 0..3 {
        assert!((sim[s].value - unint[s].value).abs() < 3.0 * sim[s].half_width);
        assert!((sim[s].value - busy[s].value).abs() > 10.0 * sim[s].half_width, "s={s} {:?} {:?} {:?}", sim[s], busy[s], unint[s]);
    }
}

#[test]
fn simulator_is_deterministic() {
    let a = simulate_multisource(&mixed(), Scheme::Dnp, 10_000.0, 9).unwrap();
    assert_eq!(a, simulate_multisource(&mixed(), Scheme::Dnp, 10_000.0, 9).unwrap());
}

#[test]
fn bad_inputs() {
    assert!(aaoi_multisource(&[], Scheme::Dnp).is_err());
    assert!(cycle_moments_multisource(&three(), 3, Scheme::Dnp, MomentBackend::Paper).is_err());
    assert!(simulate_multisource(&three(), Scheme::Dnp, 0.0, 1).is_err());
}
