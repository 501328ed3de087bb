//! Experiment runner for `aoi-core`: reads a TOML experiment file, applies
//! command line overrides, runs one mode and writes a CSV or JSON table that
//! embeds the effective config, its SHA-256 and the seed.

pub mod config;
pub mod modes;
pub mod output;

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use aoi_core::AoiError;
use clap::Parser;

/// Exit statuses.
pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_NUMERICAL: i32 = 3;
pub const EXIT_NONCONVERGENCE: i32 = 4;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error("{name}: {source}", name = .source.name())]
    Numerical {
        #[from]
        source: AoiError,
    },
    #[error("io error: {0}")]
    Io(String),
}

impl From<io::Error> for CliError {
    fn from(e: io::Error) -> Self {
        CliError::Io(e.to_string())
    }
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) | CliError::Io(_) => EXIT_CONFIG,
            CliError::Numerical { .. } => EXIT_NUMERICAL,
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "aoi", version, about = "Average age of information experiments")]
pub struct Cli {
    /// Experiment file (TOML).
    #[arg(long, required_unless_present = "verify")]
    pub config: Option<PathBuf>,
    /// single-analytic | theta-sweep | simulate | multisource | csma-game | crossover | table1
    #[arg(long)]
    pub mode: Option<String>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub replications: Option<u32>,
    /// Output file; standard output when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// csv | json
    #[arg(long)]
    pub format: Option<String>,
    /// Dotted-path override, e.g. `--set distribution.max=2`; repeatable, last wins.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub set: Vec<String>,
    /// Check that a result file's embedded config matches its embedded hash.
    #[arg(long, value_name = "RESULT", conflicts_with = "config")]
    pub verify: Option<PathBuf>,
}

impl Cli {
    /// Named flags first, then `--set` in order.
    pub fn overrides(&self) -> Result<Vec<(String, String)>, CliError> {
        let quote = |s: &str| format!("{s:?}");
        let mut out = Vec::new();
        if let Some(m) = &self.mode {
            out.push(("mode".into(), quote(m)));
        }
        if let Some(s) = self.seed {
            out.push(("seed".into(), s.to_string()));
        }
        if let Some(r) = self.replications {
            out.push(("replications".into(), r.to_string()));
        }
        if let Some(p) = &self.out {
            out.push(("output.path".into(), quote(&p.to_string_lossy())));
        }
        if let Some(f) = &self.format {
            out.push(("output.format".into(), quote(f)));
        }
        for s in &self.set {
            let (k, v) = config::split_assignment(s)?;
            out.push((k.to_string(), v.to_string()));
        }
        Ok(out)
    }
}

fn execute(cli: &Cli) -> Result<i32, CliError> {
    if let Some(path) = &cli.verify {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        let hash = output::verify(&text)?;
        println!("verified {hash}");
        return Ok(EXIT_OK);
    }
    let path = cli.config.as_ref().expect("clap enforces --config");
    let cfg = config::load(path, &cli.overrides()?)?;
    let base = path.parent().unwrap_or(Path::new("."));
    let outcome = modes::run_mode(&cfg, base)?;
    match &cfg.output.path {
        Some(p) => {
            let mut w = BufWriter::new(File::create(p).map_err(|e| CliError::Io(format!("{}: {e}", p.display())))?);
            output::write_report(&mut w, &cfg, &outcome.report)?;
            w.flush()?;
        }
        None => output::write_report(io::stdout().lock(), &cfg, &outcome.report)?,
    }
    if outcome.nonconverged {
        eprintln!("error: NonConvergence: best-response iteration did not converge; partial results written");
        return Ok(EXIT_NONCONVERGENCE);
    }
    Ok(EXIT_OK)
}

/// Runs the command line and returns the process exit status.
pub fn run(cli: &Cli) -> i32 {
    match execute(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
