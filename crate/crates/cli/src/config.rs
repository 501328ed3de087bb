//! Experiment configuration: schema, overrides, validation and hashing.

use std::fmt;
use std::path::{Path, PathBuf};

use aoi_core::analytic::{RandomizedPolicy, Threshold};
use aoi_core::csma_game::SecondMomentForm;
use aoi_core::multisource::{MomentBackend, PostAge, Scheme};
use aoi_core::sim::{DropPolicy, StopRule};
use aoi_core::TransferDistribution;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    SingleAnalytic,
    ThetaSweep,
    Simulate,
    Multisource,
    CsmaGame,
    Crossover,
    Table1,
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = serde_json::to_value(self).expect("mode serializes");
        f.write_str(s.as_str().unwrap_or("?"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    #[default]
    Csv,
    Json,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSpec {
    pub path: Option<PathBuf>,
    #[serde(default)]
    pub format: Format,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "kebab-case", deny_unknown_fields)]
pub enum DistSpec {
    Exponential { rate: f64 },
    /// Branches as `[weight, rate]` pairs.
    HyperExponential { branches: Vec<[f64; 2]> },
    Uniform { max: f64 },
    Weibull { scale: f64, shape: f64 },
    Erlang { shape: u32, rate: f64 },
    LogNormal { log_mean: f64, log_sd: f64 },
    Deterministic { value: f64 },
    /// Samples inline, or read from a whitespace/comma separated file
    /// (relative paths resolve against the config file).
    Empirical { samples: Option<Vec<f64>>, path: Option<PathBuf> },
}

impl DistSpec {
    pub fn build(&self, base: &Path) -> Result<TransferDistribution, CliError> {
        let d = match self {
            DistSpec::Exponential { rate } => TransferDistribution::exponential(*rate),
            DistSpec::HyperExponential { branches } => {
                TransferDistribution::hyper_exponential(branches.iter().map(|b| (b[0], b[1])).collect())
            }
            DistSpec::Uniform { max } => TransferDistribution::uniform(*max),
            DistSpec::Weibull { scale, shape } => TransferDistribution::weibull(*scale, *shape),
            DistSpec::Erlang { shape, rate } => TransferDistribution::erlang(*shape, *rate),
            DistSpec::LogNormal { log_mean, log_sd } => TransferDistribution::log_normal(*log_mean, *log_sd),
            DistSpec::Deterministic { value } => TransferDistribution::deterministic(*value),
            DistSpec::Empirical { samples, path } => {
                let values = match (samples, path) {
                    (Some(s), None) => s.clone(),
                    (None, Some(p)) => read_samples(&base.join(p))?,
                    _ => return Err(CliError::Config("empirical distribution needs exactly one of samples or path".into())),
                };
                TransferDistribution::empirical(&values)
            }
        };
        d.map_err(|e| CliError::Config(e.to_string()))
    }

    /// Natural time scale used to report crossovers: the uniform upper end, the
    /// Weibull scale, the mean otherwise.
    pub fn scale(&self, dist: &TransferDistribution) -> f64 {
        match self {
            DistSpec::Uniform { max } => *max,
            DistSpec::Weibull { scale, .. } => *scale,
            _ => dist.mean(),
        }
    }

    pub fn family_name(&self) -> &'static str {
        match self {
            DistSpec::Exponential { .. } => "exponential",
            DistSpec::HyperExponential { .. } => "hyper-exponential",
            DistSpec::Uniform { .. } => "uniform",
            DistSpec::Weibull { .. } => "weibull",
            DistSpec::Erlang { .. } => "erlang",
            DistSpec::LogNormal { .. } => "log-normal",
            DistSpec::Deterministic { .. } => "deterministic",
            DistSpec::Empirical { .. } => "empirical",
        }
    }
}

fn read_samples(path: &Path) -> Result<Vec<f64>, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
    text.split(|c: char| c.is_whitespace() || c == ',')
        .filter(|t| !t.is_empty())
        .map(|t| t.parse::<f64>().map_err(|e| CliError::Config(format!("{}: bad sample {t:?}: {e}", path.display()))))
        .collect()
}

/// A threshold value; `+∞` is written as the token `"inf"`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ThetaValue(pub f64);

impl ThetaValue {
    pub fn value(self) -> f64 {
        self.0
    }
}

impl Serialize for ThetaValue {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        if self.0 == f64::INFINITY {
            s.serialize_str("inf")
        } else {
            s.serialize_f64(self.0)
        }
    }
}

impl<'de> Deserialize<'de> for ThetaValue {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Number(f64),
            Text(String),
        }
        match Raw::deserialize(d)? {
            Raw::Number(v) => Ok(ThetaValue(v)),
            Raw::Text(t) if t == "inf" => Ok(ThetaValue(f64::INFINITY)),
            Raw::Text(t) => Err(serde::de::Error::custom(format!("expected a number or \"inf\", got {t:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Grid {
    List(Vec<ThetaValue>),
    Range {
        start: f64,
        stop: f64,
        points: usize,
        #[serde(default)]
        log: bool,
        /// Append `inf` after the range.
        #[serde(default)]
        include_inf: bool,
    },
}

impl Grid {
    pub fn values(&self) -> Vec<f64> {
        match self {
            Grid::List(v) => v.iter().map(|t| t.value()).collect(),
            Grid::Range { start, stop, points, log, include_inf } => {
                let n = *points;
                let mut out: Vec<f64> = (0..n)
                    .map(|i| {
                        let f = if n == 1 { 0.0 } else { i as f64 / (n - 1) as f64 };
                        if *log {
                            start * (stop / start).powf(f)
                        } else {
                            start + (stop - start) * f
                        }
                    })
                    .collect();
                if *include_inf {
                    out.push(f64::INFINITY);
                }
                out
            }
        }
    }

    fn check(&self, name: &str, positive: bool) -> Result<(), CliError> {
        if let Grid::Range { start, stop, log, .. } = self {
            if *log && !(*start > 0.0 && *stop > 0.0) {
                return Err(CliError::Config(format!("{name}: log grid needs positive ends")));
            }
        }
        check_sorted(name, &self.values(), positive)
    }
}

fn check_sorted(name: &str, v: &[f64], positive: bool) -> Result<(), CliError> {
    if v.is_empty() {
        return Err(CliError::Config(format!("{name}: grid is empty")));
    }
    if v.iter().any(|x| x.is_nan() || *x < 0.0 || (positive && *x <= 0.0)) {
        return Err(CliError::Config(format!("{name}: grid values must be {}", if positive { "> 0" } else { ">= 0" })));
    }
    if v.windows(2).any(|w| w[1] <= w[0]) {
        return Err(CliError::Config(format!("{name}: grid must be strictly increasing")));
    }
    Ok(())
}

/// A scalar or a list.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum OneOrMany {
    One(f64),
    Many(Vec<f64>),
}

impl OneOrMany {
    pub fn to_vec(&self) -> Vec<f64> {
        match self {
            OneOrMany::One(v) => vec![*v],
            OneOrMany::Many(v) => v.clone(),
        }
    }

    /// Broadcast to `n` entries.
    pub fn expand(&self, n: usize, name: &str) -> Result<Vec<f64>, CliError> {
        match self {
            OneOrMany::One(v) => Ok(vec![*v; n]),
            OneOrMany::Many(v) if v.len() == n => Ok(v.clone()),
            OneOrMany::Many(v) => Err(CliError::Config(format!("{name} has {} entries for {n} sources", v.len()))),
        }
    }

    fn len(&self) -> Option<usize> {
        match self {
            OneOrMany::One(_) => None,
            OneOrMany::Many(v) => Some(v.len()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum PolicySpec {
    Dnp,
    Dop,
    Threshold { theta: ThetaValue },
    /// Piecewise-constant probability of choosing DNP: `values[i]` on
    /// `[breakpoints[i-1], breakpoints[i])`.
    Randomized { breakpoints: Vec<f64>, values: Vec<f64> },
}

impl PolicySpec {
    pub fn build(&self) -> Result<DropPolicy, CliError> {
        let err = |e: aoi_core::AoiError| CliError::Config(e.to_string());
        Ok(match self {
            PolicySpec::Dnp => DropPolicy::Dnp,
            PolicySpec::Dop => DropPolicy::Dop,
            PolicySpec::Threshold { theta } => DropPolicy::Threshold(Threshold::new(theta.value()).map_err(err)?),
            PolicySpec::Randomized { breakpoints, values } => {
                DropPolicy::Randomized(RandomizedPolicy::new(breakpoints.clone(), values.clone()).map_err(err)?)
            }
        })
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulationSpec {
    pub cycles: Option<u64>,
    pub horizon: Option<f64>,
}

impl SimulationSpec {
    pub fn stop(&self) -> Result<StopRule, CliError> {
        match (self.cycles, self.horizon) {
            (Some(c), None) => Ok(StopRule::Cycles(c)),
            (None, Some(h)) => Ok(StopRule::Horizon(h)),
            (None, None) => Ok(StopRule::Cycles(1_000_000)),
            _ => Err(CliError::Config("simulation: give cycles or horizon, not both".into())),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSpec {
    pub theta: Grid,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SchemeSpec {
    Dnp,
    Dop,
}

impl From<SchemeSpec> for Scheme {
    fn from(s: SchemeSpec) -> Self {
        match s {
            SchemeSpec::Dnp => Scheme::Dnp,
            SchemeSpec::Dop => Scheme::Dop,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BackendSpec {
    Paper,
    #[default]
    Corrected,
    Structural,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PostAgeSpec {
    BusyTime,
    #[default]
    Uninterrupted,
}

impl From<PostAgeSpec> for PostAge {
    fn from(p: PostAgeSpec) -> Self {
        match p {
            PostAgeSpec::BusyTime => PostAge::BusyTime,
            PostAgeSpec::Uninterrupted => PostAge::Uninterrupted,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SourceSpec {
    pub lambda: f64,
    pub distribution: DistSpec,
}

fn default_schemes() -> Vec<SchemeSpec> {
    vec![SchemeSpec::Dnp, SchemeSpec::Dop]
}

fn default_cycles() -> u64 {
    1_000_000
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MultisourceSpec {
    pub sources: Vec<SourceSpec>,
    #[serde(default = "default_schemes")]
    pub schemes: Vec<SchemeSpec>,
    #[serde(default)]
    pub backend: BackendSpec,
    #[serde(default)]
    pub post_age: PostAgeSpec,
    /// Cycles for the structural sampler and the second-moment diagnostic.
    #[serde(default = "default_cycles")]
    pub cycles: u64,
    /// Run the discrete-event simulator over this horizon.
    pub horizon: Option<f64>,
    #[serde(default)]
    pub diagnostic: bool,
}

impl MultisourceSpec {
    pub fn backend(&self, seed: u64) -> MomentBackend {
        match self.backend {
            BackendSpec::Paper => MomentBackend::Paper,
            BackendSpec::Corrected => MomentBackend::Corrected,
            BackendSpec::Structural => MomentBackend::StructuralMc { seed, cycles: self.cycles },
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FormSpec {
    #[default]
    FirstStep,
    Printed,
}

impl From<FormSpec> for SecondMomentForm {
    fn from(f: FormSpec) -> Self {
        match f {
            FormSpec::FirstStep => SecondMomentForm::FirstStep,
            FormSpec::Printed => SecondMomentForm::Printed,
        }
    }
}

fn default_draws() -> u64 {
    1_000_000
}
fn default_tol() -> f64 {
    1e-4
}
fn default_rounds() -> usize {
    50
}
fn default_init() -> OneOrMany {
    OneOrMany::One(0.5)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CsmaSpec {
    /// Number of sources; needed only when every per-source field is a scalar.
    pub sources: Option<usize>,
    pub sigma2: OneOrMany,
    pub rate_const: OneOrMany,
    pub noise: f64,
    pub theta: Grid,
    pub lambda: OneOrMany,
    #[serde(default = "default_draws")]
    pub n_draws: u64,
    #[serde(default = "default_init")]
    pub init: OneOrMany,
    #[serde(default = "default_tol")]
    pub tol: f64,
    #[serde(default = "default_rounds")]
    pub max_rounds: usize,
    #[serde(default)]
    pub form: FormSpec,
    pub t_cap: Option<f64>,
    /// Target social age for the common-λ calibration diagnostic.
    pub calibrate_target: Option<f64>,
}

impl CsmaSpec {
    pub fn source_count(&self) -> Result<usize, CliError> {
        let lens: Vec<usize> = [&self.sigma2, &self.rate_const, &self.lambda, &self.init].iter().filter_map(|v| v.len()).collect();
        let n = self.sources.or_else(|| lens.first().copied()).ok_or_else(|| {
            CliError::Config("csma: set sources or give a per-source list".into())
        })?;
        if n == 0 || lens.iter().any(|&l| l != n) {
            return Err(CliError::Config("csma: per-source lists disagree on the number of sources".into()));
        }
        Ok(n)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CrossoverSpec {
    #[serde(default = "default_lo")]
    pub lo: f64,
    #[serde(default = "default_hi")]
    pub hi: f64,
}

fn default_lo() -> f64 {
    1e-3
}
fn default_hi() -> f64 {
    1e3
}

impl Default for CrossoverSpec {
    fn default() -> Self {
        CrossoverSpec { lo: default_lo(), hi: default_hi() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Table1Spec {
    pub lambda: Vec<f64>,
    #[serde(default = "unit_list")]
    pub exponential_rates: Vec<f64>,
    /// Random hyper-exponential parameterizations drawn from the run seed.
    #[serde(default = "default_hyper")]
    pub hyperexponential_random: usize,
    #[serde(default = "unit_list")]
    pub uniform_max: Vec<f64>,
    #[serde(default = "default_shapes")]
    pub weibull_shapes: Vec<f64>,
    #[serde(default = "unit_list")]
    pub weibull_scale: Vec<f64>,
}

fn unit_list() -> Vec<f64> {
    vec![1.0]
}
fn default_hyper() -> usize {
    50
}
fn default_shapes() -> Vec<f64> {
    vec![0.5, 1.0, 2.0, 3.0, 5.0]
}

fn default_replications() -> u32 {
    1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub mode: Mode,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_replications")]
    pub replications: u32,
    #[serde(default)]
    pub output: OutputSpec,
    pub distribution: Option<DistSpec>,
    pub lambda: Option<OneOrMany>,
    pub policy: Option<PolicySpec>,
    pub sweep: Option<SweepSpec>,
    pub simulation: Option<SimulationSpec>,
    pub multisource: Option<MultisourceSpec>,
    pub csma: Option<CsmaSpec>,
    pub crossover: Option<CrossoverSpec>,
    pub table1: Option<Table1Spec>,
}

fn need<'a, T>(v: &'a Option<T>, mode: Mode, key: &str) -> Result<&'a T, CliError> {
    v.as_ref().ok_or_else(|| CliError::Config(format!("mode {mode} requires `{key}`")))
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<(), CliError> {
        let m = self.mode;
        if self.replications == 0 {
            return Err(CliError::Config("replications must be >= 1".into()));
        }
        match m {
            Mode::SingleAnalytic | Mode::ThetaSweep | Mode::Simulate => {
                need(&self.distribution, m, "distribution")?;
                check_sorted("lambda", &need(&self.lambda, m, "lambda")?.to_vec(), true)?;
                if m == Mode::ThetaSweep {
                    need(&self.sweep, m, "sweep")?.theta.check("sweep.theta", false)?;
                }
                if m == Mode::Simulate {
                    need(&self.policy, m, "policy")?.build()?;
                }
                if let Some(s) = &self.simulation {
                    s.stop()?;
                }
                if let Some(p) = &self.policy {
                    p.build()?;
                }
            }
            Mode::Multisource => {
                let ms = need(&self.multisource, m, "multisource")?;
                if ms.sources.is_empty() || ms.schemes.is_empty() {
                    return Err(CliError::Config("multisource: sources and schemes must be nonempty".into()));
                }
            }
            Mode::CsmaGame => {
                let c = need(&self.csma, m, "csma")?;
                c.source_count()?;
                c.theta.check("csma.theta", true)?;
                if !(c.tol > 0.0) {
                    return Err(CliError::Config("csma.tol must be > 0".into()));
                }
            }
            Mode::Crossover => {
                need(&self.distribution, m, "distribution")?;
            }
            Mode::Table1 => {
                let t = need(&self.table1, m, "table1")?;
                check_sorted("table1.lambda", &t.lambda, true)?;
                for (name, v) in [
                    ("table1.exponential_rates", &t.exponential_rates),
                    ("table1.uniform_max", &t.uniform_max),
                    ("table1.weibull_shapes", &t.weibull_shapes),
                    ("table1.weibull_scale", &t.weibull_scale),
                ] {
                    check_sorted(name, v, true)?;
                }
            }
        }
        Ok(())
    }

    /// Canonical single-line JSON form embedded in outputs.
    pub fn canonical(&self) -> String {
        serde_json::to_string(self).expect("config serializes")
    }

    pub fn hash(&self) -> String {
        hex::encode(Sha256::digest(self.canonical().as_bytes()))
    }

    pub fn from_canonical(s: &str) -> Result<Self, CliError> {
        let cfg: ExperimentConfig = serde_json::from_str(s).map_err(|e| CliError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }
}

/// Sets `path` (dot separated) in a TOML tree. The value is parsed as a TOML
/// value and falls back to a bare string.
pub fn apply_override(root: &mut toml::Table, path: &str, raw: &str) -> Result<(), CliError> {
    let value = toml::from_str::<toml::Table>(&format!("v = {raw}"))
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(raw.to_string()));
    let keys: Vec<&str> = path.split('.').collect();
    if keys.iter().any(|k| k.is_empty()) {
        return Err(CliError::Config(format!("bad override key {path:?}")));
    }
    let (last, parents) = keys.split_last().expect("nonempty");
    let mut table = root;
    for k in parents {
        let entry = table.entry(k.to_string()).or_insert_with(|| toml::Value::Table(toml::Table::new()));
        table = entry
            .as_table_mut()
            .ok_or_else(|| CliError::Config(format!("override {path:?}: {k} is not a table")))?;
    }
    table.insert(last.to_string(), value);
    Ok(())
}

/// Parses `KEY=VALUE`.
pub fn split_assignment(s: &str) -> Result<(&str, &str), CliError> {
    s.split_once('=')
        .map(|(k, v)| (k.trim(), v.trim()))
        .ok_or_else(|| CliError::Config(format!("override {s:?} is not KEY=VALUE")))
}

pub fn load(path: &Path, overrides: &[(String, String)]) -> Result<ExperimentConfig, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
    let mut root: toml::Table = toml::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
    for (k, v) in overrides {
        apply_override(&mut root, k, v)?;
    }
    let cfg: ExperimentConfig = toml::Value::Table(root).try_into().map_err(|e: toml::de::Error| CliError::Config(e.to_string()))?;
    cfg.validate()?;
    Ok(cfg)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn overrides_create_tables_and_parse_values() {
        let mut t = toml::Table::new();
        apply_override(&mut t, "a.b.c", "3").unwrap();
        apply_override(&mut t, "a.name", "word").unwrap();
        apply_override(&mut t, "a.list", "[1, \"inf\"]").unwrap();
        assert_eq!(t["a"]["b"]["c"].as_integer(), Some(3));
        assert_eq!(t["a"]["name"].as_str(), Some("word"));
        assert_eq!(t["a"]["list"].as_array().unwrap().len(), 2);
        apply_override(&mut t, "a.b.c", "4.5").unwrap();
        assert_eq!(t["a"]["b"]["c"].as_float(), Some(4.5));
        assert!(apply_override(&mut t, "a.name.x", "1").is_err());
        assert!(apply_override(&mut t, "a..x", "1").is_err());
    }

    #[test]
    fn theta_tokens_round_trip() {
        let g: Grid = serde_json::from_str("[0.0, 1.5, \"inf\"]").unwrap();
        assert_eq!(g.values(), vec![0.0, 1.5, f64::INFINITY]);
        assert_eq!(serde_json::to_string(&g).unwrap(), "[0.0,1.5,\"inf\"]");
        assert!(serde_json::from_str::<Grid>("[\"big\"]").is_err());
        let g: Grid = toml::from_str::<toml::Table>("g = [0.5, inf]").unwrap()["g"].clone().try_into().unwrap();
        assert_eq!(g.values(), vec![0.5, f64::INFINITY]);
    }

    #[test]
    fn ranges_expand() {
        let g = Grid::Range { start: 1.0, stop: 100.0, points: 3, log: true, include_inf: true };
        let v = g.values();
        assert!((v[1] - 10.0).abs() < 1e-12 && v[3].is_infinite());
    }
}
