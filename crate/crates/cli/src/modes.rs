//! One runner per experiment mode; each returns a result table.

use std::path::Path;

use aoi_core::analytic::{
    aaoi_dnp, aaoi_dop, aaoi_smr, aaoi_threshold, classify_optimal_policy, dnp_beats_dop, find_crossover,
    optimize_threshold, scheme_constants, table1_criterion, Verdict,
};
use aoi_core::csma_game::{
    calibrate_common_lambda, cooperative_optimum, nash_equilibrium, ChannelModel, GameEvaluator,
};
use aoi_core::multisource::{
    aaoi_multisource_with, second_moment_diagnostic, simulate_multisource, MultisourceOptions, SourceConfig,
};
use aoi_core::rng::stream;
use aoi_core::sim::{simulate_policy, DropPolicy, SimConfig};
use aoi_core::TransferDistribution;
use rand::Rng;
use rayon::prelude::*;

use crate::config::{DistSpec, ExperimentConfig, Mode, SimulationSpec};
use crate::output::{join, Cell, Report};
use crate::CliError;

/// A finished table and whether an iterative search failed to converge.
pub struct Outcome {
    pub report: Report,
    pub nonconverged: bool,
}

impl From<Report> for Outcome {
    fn from(report: Report) -> Self {
        Outcome { report, nonconverged: false }
    }
}

pub fn run_mode(cfg: &ExperimentConfig, base: &Path) -> Result<Outcome, CliError> {
    match cfg.mode {
        Mode::SingleAnalytic => single_analytic(cfg, base).map(Into::into),
        Mode::ThetaSweep => theta_sweep(cfg, base).map(Into::into),
        Mode::Simulate => simulate(cfg, base).map(Into::into),
        Mode::Multisource => multisource(cfg, base).map(Into::into),
        Mode::CsmaGame => csma_game(cfg),
        Mode::Crossover => crossover(cfg, base).map(Into::into),
        Mode::Table1 => report_table1(cfg).map(Into::into),
    }
}

fn distribution<'a>(cfg: &'a ExperimentConfig, base: &Path) -> Result<(TransferDistribution, &'a DistSpec), CliError> {
    let spec = cfg.distribution.as_ref().ok_or_else(|| CliError::Config("missing distribution".into()))?;
    Ok((spec.build(base)?, spec))
}

fn lambdas(cfg: &ExperimentConfig) -> Vec<f64> {
    cfg.lambda.as_ref().map(|l| l.to_vec()).unwrap_or_default()
}

fn policy_aaoi(dist: &TransferDistribution, lambda: f64, policy: &DropPolicy) -> aoi_core::Result<f64> {
    Ok(match policy {
        DropPolicy::Dnp => aaoi_dnp(dist, lambda)?.value,
        DropPolicy::Dop => aaoi_dop(dist, lambda)?.value,
        DropPolicy::Threshold(t) => aaoi_threshold(dist, lambda, t.value())?.value,
        DropPolicy::Randomized(p) => aaoi_smr(dist, lambda, p)?.value,
    })
}

fn verdict_name(v: Verdict) -> &'static str {
    match v {
        Verdict::DopOptimal => "dop-optimal",
        Verdict::DnpOptimal => "dnp-optimal",
        Verdict::Undetermined => "undetermined",
    }
}

/// Threshold search range: far past where either cycle length matters.
fn theta_search_max(dist: &TransferDistribution, lambda: f64) -> f64 {
    50.0 * (dist.mean() + 1.0 / lambda)
}

fn single_analytic(cfg: &ExperimentConfig, base: &Path) -> Result<Report, CliError> {
    let (dist, _) = distribution(cfg, base)?;
    let policy = cfg.policy.as_ref().map(|p| p.build()).transpose()?;
    let mut report = Report::new(vec![
        "lambda", "rho", "gamma", "d_n", "d_o", "c_n", "c_o", "aaoi_dnp", "aaoi_dop", "verdict", "theorem2_lhs",
        "dnp_better", "policy", "aaoi_policy", "theta_opt", "aaoi_opt",
    ]);
    let rows: Vec<Vec<Cell>> = lambdas(cfg)
        .par_iter()
        .map(|&lambda| -> aoi_core::Result<Vec<Cell>> {
            let k = scheme_constants(&dist, lambda)?;
            let v = classify_optimal_policy(&dist, lambda)?;
            let cmp = dnp_beats_dop(&dist, lambda)?;
            let opt = optimize_threshold(&dist, lambda, theta_search_max(&dist, lambda), 400)?;
            let (name, value) = match &policy {
                Some(p) => (Cell::from(p.to_string()), Cell::from(policy_aaoi(&dist, lambda, p)?)),
                None => (Cell::Empty, Cell::Empty),
            };
            Ok(vec![
                lambda.into(),
                k.load().into(),
                k.gamma.into(),
                k.d_n.into(),
                k.d_o.into(),
                k.c_n.into(),
                k.c_o.into(),
                aaoi_dnp(&dist, lambda)?.value.into(),
                aaoi_dop(&dist, lambda)?.value.into(),
                verdict_name(v.verdict).into(),
                v.theorem2_lhs.into(),
                cmp.dnp_better.into(),
                name,
                value,
                opt.theta.value().into(),
                opt.aaoi.value.into(),
            ])
        })
        .collect::<aoi_core::Result<_>>()?;
    report.rows = rows;
    Ok(report)
}

fn sim_config(
    cfg: &ExperimentConfig,
    dist: &TransferDistribution,
    lambda: f64,
    policy: DropPolicy,
    spec: &SimulationSpec,
) -> Result<SimConfig, CliError> {
    let mut sc = SimConfig::new(dist.clone(), lambda, policy);
    sc.stop = spec.stop()?;
    sc.seed = cfg.seed;
    sc.replications = cfg.replications;
    Ok(sc)
}

fn theta_sweep(cfg: &ExperimentConfig, base: &Path) -> Result<Report, CliError> {
    let (dist, _) = distribution(cfg, base)?;
    let thetas = cfg.sweep.as_ref().expect("validated").theta.values();
    let cells: Vec<(f64, f64)> = lambdas(cfg).iter().flat_map(|&l| thetas.iter().map(move |&t| (l, t))).collect();
    let mut report = Report::new(vec!["lambda", "theta", "aaoi_analytic", "aaoi_sim", "ci_half_width"]);
    report.rows = cells
        .par_iter()
        .map(|&(lambda, theta)| -> Result<Vec<Cell>, CliError> {
            let analytic = aaoi_threshold(&dist, lambda, theta)?.value;
            let (sim, hw) = match &cfg.simulation {
                Some(spec) => {
                    let policy = DropPolicy::Threshold(aoi_core::analytic::Threshold::new(theta)?);
                    let e = simulate_policy(&sim_config(cfg, &dist, lambda, policy, spec)?)?;
                    (Some(e.value), Some(e.half_width))
                }
                None => (None, None),
            };
            Ok(vec![lambda.into(), theta.into(), analytic.into(), sim.into(), hw.into()])
        })
        .collect::<Result<_, _>>()?;
    Ok(report)
}

fn simulate(cfg: &ExperimentConfig, base: &Path) -> Result<Report, CliError> {
    let (dist, _) = distribution(cfg, base)?;
    let policy = cfg.policy.as_ref().expect("validated").build()?;
    let spec = cfg.simulation.clone().unwrap_or_default();
    let mut report =
        Report::new(vec!["lambda", "policy", "aaoi_sim", "ci_half_width", "replications", "seed", "aaoi_analytic"]);
    report.rows = lambdas(cfg)
        .par_iter()
        .map(|&lambda| -> Result<Vec<Cell>, CliError> {
            let e = simulate_policy(&sim_config(cfg, &dist, lambda, policy.clone(), &spec)?)?;
            let analytic = policy_aaoi(&dist, lambda, &policy)?;
            Ok(vec![
                lambda.into(),
                policy.to_string().into(),
                e.value.into(),
                e.half_width.into(),
                u64::from(e.replications).into(),
                cfg.seed.into(),
                analytic.into(),
            ])
        })
        .collect::<Result<_, _>>()?;
    Ok(report)
}

fn multisource(cfg: &ExperimentConfig, base: &Path) -> Result<Report, CliError> {
    let ms = cfg.multisource.as_ref().expect("validated");
    let sources: Vec<SourceConfig> = ms
        .sources
        .iter()
        .map(|s| Ok(SourceConfig::new(s.lambda, s.distribution.build(base)?)))
        .collect::<Result<_, CliError>>()?;
    let options = MultisourceOptions { backend: ms.backend(cfg.seed), post_age: ms.post_age.into() };
    let mut report = Report::new(vec![
        "scheme", "source", "lambda", "aaoi_analytic", "analytic_half_width", "aaoi_sim", "sim_half_width",
        "second_paper", "second_corrected", "second_sampled", "sampled_se",
    ]);
    for &scheme in &ms.schemes {
        let analytic = aaoi_multisource_with(&sources, scheme.into(), options)?;
        let sim = match ms.horizon {
            Some(h) => Some(simulate_multisource(&sources, scheme.into(), h, cfg.seed)?),
            None => None,
        };
        let diag = if ms.diagnostic { Some(second_moment_diagnostic(&sources, scheme.into(), cfg.seed, ms.cycles)?) } else { None };
        for (s, a) in analytic.iter().enumerate() {
            let e = sim.as_ref().map(|v| v[s]);
            let d = diag.as_ref().map(|v| v[s]);
            report.push(vec![
                serde_json::to_value(scheme).expect("scheme").as_str().unwrap_or("").into(),
                s.into(),
                sources[s].lambda.into(),
                a.value.into(),
                a.half_width.into(),
                e.map(|e| e.value).into(),
                e.map(|e| e.half_width).into(),
                d.map(|d| d.paper).into(),
                d.map(|d| d.corrected).into(),
                d.map(|d| d.sampled).into(),
                d.map(|d| d.sampled_se).into(),
            ]);
        }
    }
    Ok(report)
}

fn csma_game(cfg: &ExperimentConfig) -> Result<Outcome, CliError> {
    let c = cfg.csma.as_ref().expect("validated");
    let n = c.source_count()?;
    let mut channel = ChannelModel::new(
        c.sigma2.expand(n, "csma.sigma2")?,
        c.rate_const.expand(n, "csma.rate_const")?,
        c.noise,
        c.theta.values()[0],
        c.lambda.expand(n, "csma.lambda")?,
    )
    .map_err(|e| CliError::Config(e.to_string()))?;
    if let Some(cap) = c.t_cap {
        channel.t_cap = cap;
        channel.validate().map_err(|e| CliError::Config(e.to_string()))?;
    }
    let init = c.init.expand(n, "csma.init")?;
    if init.iter().any(|q| !(0.0..=1.0).contains(q)) {
        return Err(CliError::Config("csma.init must lie in [0, 1]".into()));
    }
    let mut report = Report::new(vec![
        "theta", "lambda", "ne_profile", "ne_aaoi", "ne_social", "ne_converged", "ne_rounds", "coop_profile",
        "coop_aaoi", "coop_social", "coop_half_width", "calibrated_lambda",
    ]);
    let rows: Vec<(Vec<Cell>, bool)> = c
        .theta
        .values()
        .par_iter()
        .map(|&theta| -> Result<(Vec<Cell>, bool), CliError> {
            let eval = GameEvaluator::new(channel.with_theta(theta), cfg.seed, c.n_draws, c.form.into())?;
            let ne = nash_equilibrium(&eval, &init, c.tol, c.max_rounds)?;
            let coop = cooperative_optimum(&eval, Some(&ne.profile))?;
            let coop_aaoi = eval.aaoi(&coop.profile)?;
            let calibrated = c.calibrate_target.and_then(|t| calibrate_common_lambda(&eval, &coop.profile, t));
            let row = vec![
                theta.into(),
                join(&eval.channel.lambda).into(),
                join(&ne.profile).into(),
                join(&ne.aaoi.iter().map(|a| a.value).collect::<Vec<_>>()).into(),
                eval.social(&ne.profile).into(),
                ne.converged.into(),
                ne.rounds.into(),
                join(&coop.profile).into(),
                join(&coop_aaoi.iter().map(|a| a.value).collect::<Vec<_>>()).into(),
                coop.social.value.into(),
                coop.social.half_width.into(),
                calibrated.into(),
            ];
            Ok((row, ne.converged))
        })
        .collect::<Result<_, _>>()?;
    let nonconverged = rows.iter().any(|r| !r.1);
    report.rows = rows.into_iter().map(|r| r.0).collect();
    Ok(Outcome { report, nonconverged })
}

fn crossover(cfg: &ExperimentConfig, base: &Path) -> Result<Report, CliError> {
    let (dist, spec) = distribution(cfg, base)?;
    let range = cfg.crossover.clone().unwrap_or_default();
    let lambda = find_crossover(&dist, range.lo, range.hi)?;
    let scale = spec.scale(&dist);
    let mut report = Report::new(vec!["family", "lambda_star", "scale", "lambda_times_scale", "rho_star"]);
    report.push(vec![
        spec.family_name().into(),
        lambda.into(),
        scale.into(),
        (lambda * scale).into(),
        (lambda * dist.mean()).into(),
    ]);
    Ok(report)
}

/// Random hyper-exponential laws: 2 to 4 branches, rates log-uniform on [0.1, 10].
fn random_hyper_exponentials(seed: u64, count: usize) -> Vec<Vec<[f64; 2]>> {
    let mut rng = stream(seed, 0x7ab1e1);
    (0..count)
        .map(|_| {
            let k = rng.random_range(2..=4);
            let w: Vec<f64> = (0..k).map(|_| rng.random::<f64>() + 1e-3).collect();
            let total: f64 = w.iter().sum();
            w.iter().map(|wi| [wi / total, 10f64.powf(rng.random_range(-1.0..1.0))]).collect()
        })
        .collect()
}

fn describe(spec: &DistSpec) -> String {
    match spec {
        DistSpec::Exponential { rate } => format!("rate={rate}"),
        DistSpec::HyperExponential { branches } => {
            branches.iter().map(|b| format!("{:.6}@{:.6}", b[0], b[1])).collect::<Vec<_>>().join(";")
        }
        DistSpec::Uniform { max } => format!("max={max}"),
        DistSpec::Weibull { scale, shape } => format!("scale={scale};shape={shape}"),
        other => other.family_name().to_string(),
    }
}

/// Table-1 verdicts: the closed-form criterion next to the direct comparison
/// of the two average ages, per family, parameter and arrival rate.
pub fn report_table1(cfg: &ExperimentConfig) -> Result<Report, CliError> {
    let t = cfg.table1.as_ref().expect("validated");
    let mut specs: Vec<DistSpec> = t.exponential_rates.iter().map(|&rate| DistSpec::Exponential { rate }).collect();
    specs.extend(random_hyper_exponentials(cfg.seed, t.hyperexponential_random).into_iter().map(|branches| DistSpec::HyperExponential { branches }));
    specs.extend(t.uniform_max.iter().map(|&max| DistSpec::Uniform { max }));
    for &scale in &t.weibull_scale {
        specs.extend(t.weibull_shapes.iter().map(|&shape| DistSpec::Weibull { scale, shape }));
    }
    let cells: Vec<(&DistSpec, f64)> = specs.iter().flat_map(|s| t.lambda.iter().map(move |&l| (s, l))).collect();
    let mut report = Report::new(vec!["family", "parameters", "lambda", "d_n", "d_o", "criterion", "direct", "agree"]);
    let name = |dop: bool| if dop { "dop" } else { "dnp" };
    report.rows = cells
        .par_iter()
        .map(|&(spec, lambda)| -> Result<Vec<Cell>, CliError> {
            let dist = spec.build(Path::new("."))?;
            let k = scheme_constants(&dist, lambda)?;
            let criterion = table1_criterion(&dist, lambda)?;
            let direct_dop = !dnp_beats_dop(&dist, lambda)?.dnp_better;
            let agree = criterion.is_none_or(|c| c == direct_dop);
            Ok(vec![
                spec.family_name().into(),
                describe(spec).into(),
                lambda.into(),
                k.d_n.into(),
                k.d_o.into(),
                criterion.map_or(Cell::Empty, |c| name(c).into()),
                name(direct_dop).into(),
                agree.into(),
            ])
        })
        .collect::<Result<_, _>>()?;
    let disagreements = report.rows.iter().filter(|r| r[7] == Cell::Bool(false)).count();
    if disagreements > 0 {
        eprintln!("warning: {disagreements} table-1 cells where the criterion and the direct comparison disagree");
    }
    Ok(report)
}
