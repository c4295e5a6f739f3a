//! Command-line front end: fit models on CSV data, estimate treatment
//! effects and exposure-response curves, and run simulation scenarios.
//!
//! stdout carries exactly one JSON document in non-simulate modes; logs and
//! error JSON go to stderr. Exit codes: 2 config error, 3 data error,
//! 4 numeric failure.

mod config;

use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use serde::Serialize;
use serde_json::json;

use bayesdr::data::{read_csv, Dataset, RngStream};
use bayesdr::error::{Error, Result};
use bayesdr::inference::{default_grid, AteEstimator, CurveMethod};
use bayesdr::pipeline::{
    fit_roles, run_ate, run_curve, BayesAteMethod, BayesCurveMethod, FamilyChoice, FitSettings,
};
use bayesdr::samplers::Role;
use bayesdr::sim::{metrics_from_raw, run_replications_raw, Method, Scenario, ScenarioId};

use config::{RunArgs, RunConfig};

#[derive(Parser)]
#[command(name = "bayesdr", version, about = "Bayesian doubly robust causal effect estimation")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Estimate the average treatment effect of a binary treatment
    Ate(RunArgs),
    /// Estimate the exposure-response curve of a continuous treatment
    Curve(RunArgs),
    /// Fit one model and report WAIC and inclusion probabilities
    Fit(RunArgs),
    /// Fit all three families for both models and report the WAIC table
    Waic(RunArgs),
    /// Run a simulation scenario and write a metrics table
    Simulate(RunArgs),
}

fn main() {
    let cli = Cli::parse();
    let (name, args) = match cli.cmd {
        Cmd::Ate(a) => ("ate", a),
        Cmd::Curve(a) => ("curve", a),
        Cmd::Fit(a) => ("fit", a),
        Cmd::Waic(a) => ("waic", a),
        Cmd::Simulate(a) => ("simulate", a),
    };
    let code = match run(name, args) {
        Ok(()) => 0,
        Err(e) => {
            let payload = json!({"error": {"kind": e.kind(), "message": e.to_string()}});
            eprintln!("{payload}");
            e.exit_code()
        }
    };
    std::process::exit(code);
}

fn run(name: &str, args: RunArgs) -> Result<()> {
    let cfg = args.resolve(name)?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.threads)
        .build_global()
        .map_err(|e| Error::InvalidConfig(format!("thread pool: {e}")))?;
    match name {
        "ate" => cmd_ate(&cfg),
        "curve" => cmd_curve(&cfg),
        "fit" => cmd_fit(&cfg),
        "waic" => cmd_waic(&cfg),
        "simulate" => cmd_simulate(&cfg),
        _ => unreachable!(),
    }
}

fn load_dataset(cfg: &RunConfig) -> Result<Dataset> {
    let input = cfg
        .input
        .as_ref()
        .ok_or_else(|| Error::InvalidConfig("--input is required".into()))?;
    let tcol = cfg
        .treatment_col
        .as_ref()
        .ok_or_else(|| Error::InvalidConfig("--treatment-col is required".into()))?;
    let ycol = cfg
        .outcome_col
        .as_ref()
        .ok_or_else(|| Error::InvalidConfig("--outcome-col is required".into()))?;
    read_csv(Path::new(input), tcol, ycol)
}

fn fit_settings(cfg: &RunConfig) -> Result<FitSettings> {
    Ok(FitSettings {
        family: FamilyChoice::parse(&cfg.prior)?,
        df: cfg.df,
        phi: cfg.phi,
        t_degree: cfg.t_degree,
        n_iter: cfg.draws,
        burn_in: cfg.burnin,
        thin: cfg.thin,
    })
}

/// Serialize with a stable layout and emit: one document on stdout, plus an
/// optional copy at --out.
fn emit<T: Serialize>(doc: &T, out: Option<&str>) -> Result<()> {
    let text = serde_json::to_string_pretty(doc).map_err(|e| Error::Numeric(e.to_string()))?;
    println!("{text}");
    if let Some(path) = out {
        std::fs::write(path, format!("{text}\n"))?;
    }
    Ok(())
}

fn version() -> &'static str {
    env!("CARGO_PKG_VERSION")
}

fn cmd_ate(cfg: &RunConfig) -> Result<()> {
    let data = load_dataset(cfg)?;
    let estimator = match cfg.estimator.as_str() {
        "dr" => AteEstimator::DoublyRobust,
        "ipw" => AteEstimator::Ipw,
        "reg" => AteEstimator::Regression,
        other => {
            return Err(Error::InvalidConfig(format!(
                "unknown estimator '{other}' (expected dr|ipw|reg)"
            )))
        }
    };
    let settings = fit_settings(cfg)?;
    let out = run_ate(
        &data,
        estimator,
        &settings,
        cfg.bootstrap,
        cfg.level,
        &RngStream::new(cfg.seed),
    )?;
    let doc = json!({
        "version": version(),
        "config": cfg,
        "report": out.report,
        "models": {"outcome": out.outcome, "treatment": out.treatment},
    });
    emit(&doc, cfg.out.as_deref())
}

fn cmd_curve(cfg: &RunConfig) -> Result<()> {
    let data = load_dataset(cfg)?;
    let method = match cfg.estimator.as_str() {
        "dr" => CurveMethod::DrPseudo,
        "reg" => CurveMethod::RegMarginal,
        other => {
            return Err(Error::InvalidConfig(format!(
                "unknown estimator '{other}' (expected dr|reg)"
            )))
        }
    };
    let settings = fit_settings(cfg)?;
    let grid = default_grid(&data.t().to_vec(), cfg.grid);
    let out = run_curve(
        &data,
        method,
        &settings,
        &grid,
        cfg.bootstrap,
        cfg.level,
        &RngStream::new(cfg.seed),
    )?;
    let doc = json!({
        "version": version(),
        "config": cfg,
        "report": out.report,
        "models": {"outcome": out.outcome, "treatment": out.treatment},
    });
    emit(&doc, cfg.out.as_deref())?;
    if let Some(path) = cfg.out.as_deref() {
        let mut csv = String::from("t,point,lo,hi\n");
        for pt in &out.report.points {
            csv.push_str(&format!("{},{},{},{}\n", pt.t, pt.point, pt.lo, pt.hi));
        }
        std::fs::write(curve_csv_path(path), csv)?;
    }
    Ok(())
}

fn curve_csv_path(out: &str) -> PathBuf {
    let p = PathBuf::from(out);
    p.with_extension("csv")
}

fn cmd_fit(cfg: &RunConfig) -> Result<()> {
    let data = load_dataset(cfg)?;
    let role = match cfg.role.as_str() {
        "outcome" => Role::Outcome,
        "treatment" => Role::Treatment,
        other => {
            return Err(Error::InvalidConfig(format!(
                "unknown role '{other}' (expected outcome|treatment)"
            )))
        }
    };
    let settings = fit_settings(cfg)?;
    let (of, tf) = fit_roles(
        &data,
        &settings,
        &RngStream::new(cfg.seed).substream(1),
        role == Role::Outcome,
        role == Role::Treatment,
    )?;
    let fitted = match role {
        Role::Outcome => of,
        Role::Treatment => tf,
    }
    .expect("requested role fitted");
    let doc = json!({
        "version": version(),
        "config": cfg,
        "model": fitted.report,
        "sigma2_mean": mean(&fitted.draws.sigma2_trace()),
        "draws_kept": fitted.draws.b(),
    });
    emit(&doc, cfg.out.as_deref())
}

fn cmd_waic(cfg: &RunConfig) -> Result<()> {
    let data = load_dataset(cfg)?;
    let mut settings = fit_settings(cfg)?;
    settings.family = FamilyChoice::Auto;
    let (of, tf) = fit_roles(
        &data,
        &settings,
        &RngStream::new(cfg.seed).substream(1),
        true,
        true,
    )?;
    let of = of.expect("outcome fitted");
    let tf = tf.expect("treatment fitted");
    let doc = json!({
        "version": version(),
        "config": cfg,
        "outcome": {"selected": of.report.family, "table": of.report.waic_table},
        "treatment": {"selected": tf.report.family, "table": tf.report.waic_table},
    });
    emit(&doc, cfg.out.as_deref())
}

fn cmd_simulate(cfg: &RunConfig) -> Result<()> {
    let scenario_name = cfg
        .scenario
        .as_ref()
        .ok_or_else(|| Error::InvalidConfig("--scenario is required".into()))?;
    let id = ScenarioId::parse(scenario_name)?;
    let scenario = Scenario::new(id, cfg.n, cfg.p)?;
    let settings = fit_settings(cfg)?;

    let mut methods: Vec<Box<dyn Method>> = Vec::new();
    for token in cfg.methods.split(',').map(str::trim).filter(|s| !s.is_empty()) {
        methods.push(build_method(token, id, &settings, cfg)?);
    }
    if methods.is_empty() {
        return Err(Error::InvalidConfig("no methods requested".into()));
    }
    let method_refs: Vec<&dyn Method> = methods.iter().map(|m| m.as_ref()).collect();

    eprintln!(
        "simulate: scenario={} n={} p={} reps={} methods={}",
        scenario_name, cfg.n, cfg.p, cfg.reps, cfg.methods
    );
    let raw = run_replications_raw(&scenario, &method_refs, cfg.reps, &RngStream::new(cfg.seed));
    let table = metrics_from_raw(&scenario, &raw)?;

    let prefix = cfg.out.clone().unwrap_or_else(|| "bayesdr_simulate".into());
    let doc = json!({
        "version": version(),
        "config": cfg,
        "metrics": table,
    });
    let json_path = format!("{prefix}.json");
    let csv_path = format!("{prefix}.csv");
    std::fs::write(
        &json_path,
        format!(
            "{}\n",
            serde_json::to_string_pretty(&doc).map_err(|e| Error::Numeric(e.to_string()))?
        ),
    )?;
    std::fs::write(&csv_path, table.to_csv())?;
    if cfg.dump_reps {
        let mut csv =
            String::from("rep,method,target,truth,point,se,lo,hi,var_outer,var_inner,error\n");
        for r in &raw {
            match &r.estimates {
                Some(es) => {
                    for (g, e) in es.iter().enumerate() {
                        csv.push_str(&format!(
                            "{},{},{},{},{},{},{},{},{},{},\n",
                            r.rep,
                            r.method,
                            g,
                            e.truth,
                            e.point,
                            e.se,
                            e.lo,
                            e.hi,
                            e.var_outer,
                            e.var_inner
                        ));
                    }
                }
                None => {
                    csv.push_str(&format!(
                        "{},{},,,,,,,,,{}\n",
                        r.rep,
                        r.method,
                        r.error.clone().unwrap_or_default()
                    ));
                }
            }
        }
        std::fs::write(format!("{prefix}_reps.csv"), csv)?;
    }
    println!(
        "{}",
        serde_json::to_string_pretty(&doc).map_err(|e| Error::Numeric(e.to_string()))?
    );
    eprintln!("simulate: wrote {json_path} and {csv_path}");
    Ok(())
}

fn build_method(
    token: &str,
    id: ScenarioId,
    settings: &FitSettings,
    cfg: &RunConfig,
) -> Result<Box<dyn Method>> {
    let is_curve = id.is_curve();
    let m = cfg.bootstrap;
    let level = cfg.level;
    Ok(match (token, is_curve) {
        ("dr", false) => Box::new(BayesAteMethod {
            label: "bayes_dr".into(),
            estimator: AteEstimator::DoublyRobust,
            fit: settings.clone(),
            m_boot: m,
            level,
        }),
        ("ipw", false) => Box::new(BayesAteMethod {
            label: "ipw".into(),
            estimator: AteEstimator::Ipw,
            fit: settings.clone(),
            m_boot: m,
            level,
        }),
        ("reg", false) => Box::new(BayesAteMethod {
            label: "reg".into(),
            estimator: AteEstimator::Regression,
            fit: settings.clone(),
            m_boot: m,
            level,
        }),
        ("dr", true) => Box::new(BayesCurveMethod {
            label: "bayes_dr".into(),
            method: CurveMethod::DrPseudo,
            fit: settings.clone(),
            m_boot: m,
            level,
        }),
        ("reg1", true) => Box::new(BayesCurveMethod {
            label: "reg_1".into(),
            method: CurveMethod::RegMarginal,
            fit: FitSettings {
                family: FamilyChoice::Linear,
                t_degree: 1,
                ..settings.clone()
            },
            m_boot: m,
            level,
        }),
        ("reg3", true) => Box::new(BayesCurveMethod {
            label: "reg_3".into(),
            method: CurveMethod::RegMarginal,
            fit: FitSettings {
                family: FamilyChoice::Spline,
                ..settings.clone()
            },
            m_boot: m,
            level,
        }),
        ("reggp", true) => Box::new(BayesCurveMethod {
            label: "reg_gp".into(),
            method: CurveMethod::RegMarginal,
            fit: FitSettings {
                family: FamilyChoice::Gp,
                ..settings.clone()
            },
            m_boot: m,
            level,
        }),
        (other, _) => {
            return Err(Error::InvalidConfig(format!(
                "method '{other}' not available for scenario '{}'",
                id.name()
            )))
        }
    })
}

fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}
