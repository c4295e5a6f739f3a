//! Flag resolution: CLI arguments override config-file entries, which
//! override defaults. Config files are flat `key=value` lines using the long
//! flag names.

use std::collections::HashMap;
use std::path::PathBuf;

use serde::Serialize;

use bayesdr::error::{Error, Result};

#[derive(Debug, Clone, clap::Args)]
pub struct RunArgs {
    /// Flat key=value config file; command-line flags take precedence
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Input CSV (header row required)
    #[arg(long)]
    pub input: Option<PathBuf>,
    /// Name of the treatment column
    #[arg(long)]
    pub treatment_col: Option<String>,
    /// Name of the outcome column
    #[arg(long)]
    pub outcome_col: Option<String>,
    /// Covariate-effect family: linear|spline|gp|auto
    #[arg(long)]
    pub prior: Option<String>,
    /// Spline degrees of freedom
    #[arg(long)]
    pub df: Option<usize>,
    /// GP kernel bandwidth
    #[arg(long)]
    pub phi: Option<f64>,
    /// Treatment-term polynomial degree (continuous treatments)
    #[arg(long)]
    pub t_degree: Option<usize>,
    /// Total MCMC iterations
    #[arg(long)]
    pub draws: Option<usize>,
    /// Burn-in iterations
    #[arg(long)]
    pub burnin: Option<usize>,
    /// Thinning interval
    #[arg(long)]
    pub thin: Option<usize>,
    /// Number of bootstrap datasets M
    #[arg(long)]
    pub bootstrap: Option<usize>,
    /// Confidence level
    #[arg(long)]
    pub level: Option<f64>,
    /// Number of curve grid points
    #[arg(long)]
    pub grid: Option<usize>,
    /// Master RNG seed
    #[arg(long)]
    pub seed: Option<u64>,
    /// Worker threads (default: hardware parallelism)
    #[arg(long)]
    pub threads: Option<usize>,
    /// Output path (JSON; curve also writes a CSV next to it)
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// ate: dr|ipw|reg; curve: dr|reg
    #[arg(long)]
    pub estimator: Option<String>,
    /// fit: outcome|treatment
    #[arg(long)]
    pub role: Option<String>,
    /// simulate: scenario name
    #[arg(long)]
    pub scenario: Option<String>,
    /// simulate: number of replications
    #[arg(long)]
    pub reps: Option<usize>,
    /// simulate: sample size per replication
    #[arg(long)]
    pub n: Option<usize>,
    /// simulate: number of covariates
    #[arg(long)]
    pub p: Option<usize>,
    /// simulate: comma-separated method list (dr,ipw,reg / dr,reg1,reg3,reggp)
    #[arg(long)]
    pub methods: Option<String>,
    /// simulate: also dump per-replication results as CSV
    #[arg(long)]
    pub dump_reps: bool,
}

/// Fully resolved configuration; embedded verbatim in every report.
#[derive(Debug, Clone, Serialize)]
pub struct RunConfig {
    pub subcommand: String,
    pub input: Option<String>,
    pub treatment_col: Option<String>,
    pub outcome_col: Option<String>,
    pub prior: String,
    pub df: usize,
    pub phi: f64,
    pub t_degree: usize,
    pub draws: usize,
    pub burnin: usize,
    pub thin: usize,
    pub bootstrap: usize,
    pub level: f64,
    pub grid: usize,
    pub seed: u64,
    /// Execution-environment knob; results are thread-count invariant, so it
    /// is not part of the serialized (re-runnable) configuration.
    #[serde(skip)]
    pub threads: usize,
    pub out: Option<String>,
    pub estimator: String,
    pub role: String,
    pub scenario: Option<String>,
    pub reps: usize,
    pub n: usize,
    pub p: usize,
    pub methods: String,
    pub dump_reps: bool,
}

fn parse_as<T: std::str::FromStr>(key: &str, raw: &str) -> Result<T> {
    raw.parse()
        .map_err(|_| Error::InvalidConfig(format!("config key '{key}': bad value '{raw}'")))
}

impl RunArgs {
    /// Merge the config file under the CLI flags and apply defaults.
    pub fn resolve(mut self, subcommand: &str) -> Result<RunConfig> {
        if let Some(path) = &self.config {
            let text = std::fs::read_to_string(path).map_err(|e| {
                Error::InvalidConfig(format!("cannot read config {}: {e}", path.display()))
            })?;
            let mut kv = HashMap::new();
            for (lineno, line) in text.lines().enumerate() {
                let line = line.trim();
                if line.is_empty() || line.starts_with('#') {
                    continue;
                }
                let (k, v) = line.split_once('=').ok_or_else(|| {
                    Error::InvalidConfig(format!("config line {}: expected key=value", lineno + 1))
                })?;
                kv.insert(k.trim().to_string(), v.trim().to_string());
            }
            for (k, v) in kv {
                match k.as_str() {
                    "input" => fill(&mut self.input, PathBuf::from(&v)),
                    "treatment-col" => fill(&mut self.treatment_col, v),
                    "outcome-col" => fill(&mut self.outcome_col, v),
                    "prior" => fill(&mut self.prior, v),
                    "df" => fill(&mut self.df, parse_as(&k, &v)?),
                    "phi" => fill(&mut self.phi, parse_as(&k, &v)?),
                    "t-degree" => fill(&mut self.t_degree, parse_as(&k, &v)?),
                    "draws" => fill(&mut self.draws, parse_as(&k, &v)?),
                    "burnin" => fill(&mut self.burnin, parse_as(&k, &v)?),
                    "thin" => fill(&mut self.thin, parse_as(&k, &v)?),
                    "bootstrap" => fill(&mut self.bootstrap, parse_as(&k, &v)?),
                    "level" => fill(&mut self.level, parse_as(&k, &v)?),
                    "grid" => fill(&mut self.grid, parse_as(&k, &v)?),
                    "seed" => fill(&mut self.seed, parse_as(&k, &v)?),
                    "threads" => fill(&mut self.threads, parse_as(&k, &v)?),
                    "out" => fill(&mut self.out, PathBuf::from(&v)),
                    "estimator" => fill(&mut self.estimator, v),
                    "role" => fill(&mut self.role, v),
                    "scenario" => fill(&mut self.scenario, v),
                    "reps" => fill(&mut self.reps, parse_as(&k, &v)?),
                    "n" => fill(&mut self.n, parse_as(&k, &v)?),
                    "p" => fill(&mut self.p, parse_as(&k, &v)?),
                    "methods" => fill(&mut self.methods, v),
                    "dump-reps" => {
                        if !self.dump_reps {
                            self.dump_reps = parse_as(&k, &v)?;
                        }
                    }
                    other => {
                        return Err(Error::InvalidConfig(format!(
                            "unknown config key '{other}'"
                        )))
                    }
                }
            }
        }
        let threads = self.threads.unwrap_or_else(|| {
            std::thread::available_parallelism()
                .map(|v| v.get())
                .unwrap_or(1)
        });
        Ok(RunConfig {
            subcommand: subcommand.to_string(),
            input: self.input.map(|p| p.display().to_string()),
            treatment_col: self.treatment_col,
            outcome_col: self.outcome_col,
            prior: self.prior.unwrap_or_else(|| "auto".into()),
            df: self.df.unwrap_or(3),
            phi: self.phi.unwrap_or(1.0),
            t_degree: self.t_degree.unwrap_or(3),
            draws: self.draws.unwrap_or(2000),
            burnin: self.burnin.unwrap_or(1000),
            thin: self.thin.unwrap_or(2),
            bootstrap: self.bootstrap.unwrap_or(100),
            level: self.level.unwrap_or(0.95),
            grid: self.grid.unwrap_or(20),
            seed: self.seed.unwrap_or(1),
            threads,
            out: self.out.map(|p| p.display().to_string()),
            estimator: self.estimator.unwrap_or_else(|| "dr".into()),
            role: self.role.unwrap_or_else(|| "outcome".into()),
            scenario: self.scenario,
            reps: self.reps.unwrap_or(100),
            n: self.n.unwrap_or(100),
            p: self.p.unwrap_or(100),
            methods: self.methods.unwrap_or_else(|| "dr".into()),
            dump_reps: self.dump_reps,
        })
    }
}

fn fill<T>(slot: &mut Option<T>, value: T) {
    if slot.is_none() {
        *slot = Some(value);
    }
}
