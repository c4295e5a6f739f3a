//! Data-generating processes and the replication harness: generate, fit,
//! estimate, and aggregate bias / coverage / SE-ratio metrics.

use std::sync::OnceLock;

use ndarray::{Array1, Array2};
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::Serialize;

use crate::data::{Dataset, RngStream, VarKind};
use crate::error::{Error, Result};
use crate::inference::default_grid;
use crate::stats::norm_cdf;

/// Number of curve evaluation locations.
pub const GRID_POINTS: usize = 20;

/// Which of the four misspecification cells to generate: each model's truth
/// is either linear (so the linear fit is correct) or quadratic in the
/// covariates (so the linear fit is misspecified).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum MisspecVariant {
    BothCorrect,
    TreatmentMisspec,
    OutcomeMisspec,
    BothMisspec,
}

impl MisspecVariant {
    pub const ALL: [MisspecVariant; 4] = [
        MisspecVariant::BothCorrect,
        MisspecVariant::TreatmentMisspec,
        MisspecVariant::OutcomeMisspec,
        MisspecVariant::BothMisspec,
    ];
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ScenarioId {
    LinearBinary,
    NonlinearBinary,
    Continuous,
    AppxE1,
    AppxE2,
    AppxE3,
    AppxE4,
    MisspecG(MisspecVariant),
}

impl ScenarioId {
    pub fn parse(s: &str) -> Result<Self> {
        Ok(match s {
            "linear_binary" => ScenarioId::LinearBinary,
            "nonlinear_binary" => ScenarioId::NonlinearBinary,
            "continuous" => ScenarioId::Continuous,
            "appx_e1" => ScenarioId::AppxE1,
            "appx_e2" => ScenarioId::AppxE2,
            "appx_e3" => ScenarioId::AppxE3,
            "appx_e4" => ScenarioId::AppxE4,
            "misspec_both_correct" => ScenarioId::MisspecG(MisspecVariant::BothCorrect),
            "misspec_treatment" => ScenarioId::MisspecG(MisspecVariant::TreatmentMisspec),
            "misspec_outcome" => ScenarioId::MisspecG(MisspecVariant::OutcomeMisspec),
            "misspec_both" => ScenarioId::MisspecG(MisspecVariant::BothMisspec),
            other => return Err(Error::InvalidConfig(format!("unknown scenario '{other}'"))),
        })
    }

    pub fn name(&self) -> String {
        match self {
            ScenarioId::LinearBinary => "linear_binary".into(),
            ScenarioId::NonlinearBinary => "nonlinear_binary".into(),
            ScenarioId::Continuous => "continuous".into(),
            ScenarioId::AppxE1 => "appx_e1".into(),
            ScenarioId::AppxE2 => "appx_e2".into(),
            ScenarioId::AppxE3 => "appx_e3".into(),
            ScenarioId::AppxE4 => "appx_e4".into(),
            ScenarioId::MisspecG(v) => match v {
                MisspecVariant::BothCorrect => "misspec_both_correct".into(),
                MisspecVariant::TreatmentMisspec => "misspec_treatment".into(),
                MisspecVariant::OutcomeMisspec => "misspec_outcome".into(),
                MisspecVariant::BothMisspec => "misspec_both".into(),
            },
        }
    }

    /// Is the estimand an exposure-response curve rather than a scalar ATE?
    pub fn is_curve(&self) -> bool {
        matches!(self, ScenarioId::Continuous | ScenarioId::AppxE4)
    }

    fn min_p(&self) -> usize {
        match self {
            ScenarioId::Continuous => 3,
            ScenarioId::AppxE2 | ScenarioId::AppxE3 => 1,
            ScenarioId::MisspecG(_) => 3,
            _ => 5,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Scenario {
    pub id: ScenarioId,
    pub n: usize,
    pub p: usize,
}

impl Scenario {
    pub fn new(id: ScenarioId, n: usize, p: usize) -> Result<Self> {
        if p < id.min_p() {
            return Err(Error::InvalidConfig(format!(
                "scenario {} needs p >= {}",
                id.name(),
                id.min_p()
            )));
        }
        if n < 10 {
            return Err(Error::InvalidConfig("scenario n must be >= 10".into()));
        }
        Ok(Scenario { id, n, p })
    }

    /// True estimand: a scalar ATE or the exposure-response curve oracle
    /// with its fixed evaluation grid.
    pub fn truth(&self) -> Truth {
        match self.id {
            ScenarioId::LinearBinary
            | ScenarioId::NonlinearBinary
            | ScenarioId::AppxE1
            | ScenarioId::AppxE2
            | ScenarioId::MisspecG(_) => Truth::Ate(1.0),
            ScenarioId::AppxE3 => Truth::Ate(10.0),
            ScenarioId::Continuous => Truth::Curve(CurveTruth {
                t_poly: [5.0, 0.0, -0.1, 0.05],
                kappa: *KAPPA_CONTINUOUS.get_or_init(|| mc_kappa(self.id)),
                grid: reference_grid(self.id),
            }),
            ScenarioId::AppxE4 => Truth::Curve(CurveTruth {
                t_poly: [5.0, -0.1, 0.0, 0.05],
                kappa: *KAPPA_E4.get_or_init(|| mc_kappa(self.id)),
                grid: reference_grid(self.id),
            }),
        }
    }
}

/// The true estimand of a scenario.
#[derive(Debug, Clone, Serialize)]
pub enum Truth {
    Ate(f64),
    Curve(CurveTruth),
}

impl Truth {
    pub fn ate(&self) -> Option<f64> {
        match self {
            Truth::Ate(v) => Some(*v),
            Truth::Curve(_) => None,
        }
    }

    pub fn curve(&self) -> Option<&CurveTruth> {
        match self {
            Truth::Curve(c) => Some(c),
            Truth::Ate(_) => None,
        }
    }
}

/// E[Y(t)] = t_poly(t) + kappa, where kappa is the Monte Carlo mean of the
/// treatment-free covariate terms (the DGPs are additive in t).
#[derive(Debug, Clone, Serialize)]
pub struct CurveTruth {
    pub t_poly: [f64; 4],
    pub kappa: f64,
    pub grid: Vec<f64>,
}

impl CurveTruth {
    pub fn oracle(&self, t: f64) -> f64 {
        self.t_poly[0] + t * (self.t_poly[1] + t * (self.t_poly[2] + t * self.t_poly[3])) + self.kappa
    }
}

static KAPPA_CONTINUOUS: OnceLock<f64> = OnceLock::new();
static KAPPA_E4: OnceLock<f64> = OnceLock::new();
static GRID_CONTINUOUS: OnceLock<Vec<f64>> = OnceLock::new();
static GRID_E4: OnceLock<Vec<f64>> = OnceLock::new();

/// E[Y(t)] at one t by brute force: Monte Carlo integration of the outcome
/// mean over 10^6 covariate draws, with the t terms held fixed.
pub fn curve_oracle(scenario: &Scenario, t: f64) -> Result<f64> {
    match scenario.truth() {
        Truth::Curve(c) => Ok(c.oracle(t)),
        Truth::Ate(_) => Err(Error::InvalidConfig(
            "curve oracle is only defined for continuous-treatment scenarios".into(),
        )),
    }
}

fn mc_kappa(id: ScenarioId) -> f64 {
    let draws = 1_000_000usize;
    let mut rng = RngStream::new(0xC0FFEE).substream(match id {
        ScenarioId::Continuous => 1,
        ScenarioId::AppxE4 => 2,
        _ => unreachable!(),
    })
    .rng();
    let mut acc = 0.0;
    match id {
        ScenarioId::Continuous => {
            // X equicorrelated at 0.3
            for _ in 0..draws {
                let z0: f64 = rng.sample(StandardNormal);
                let mut x = [0.0; 3];
                for xv in &mut x {
                    let z: f64 = rng.sample(StandardNormal);
                    *xv = 0.3f64.sqrt() * z0 + 0.7f64.sqrt() * z;
                }
                acc += 0.6 * x[0]
                    + 0.4 * x[0].exp()
                    + (0.65 * x[1]).abs().ln()
                    + 0.5 * (1.0 + x[2]) * (1.0 + x[2]);
            }
        }
        ScenarioId::AppxE4 => {
            for _ in 0..draws {
                let x1: f64 = rng.sample(StandardNormal);
                let x2: f64 = rng.sample(StandardNormal);
                let x5: f64 = rng.sample(StandardNormal);
                acc += 0.5 * x1 + 0.5 * x2 - 0.3 * x5;
            }
        }
        _ => unreachable!(),
    }
    acc / draws as f64
}

fn reference_grid(id: ScenarioId) -> Vec<f64> {
    let cache = match id {
        ScenarioId::Continuous => &GRID_CONTINUOUS,
        ScenarioId::AppxE4 => &GRID_E4,
        _ => unreachable!(),
    };
    cache
        .get_or_init(|| {
            // fixed evaluation locations from a large reference sample of the
            // marginal treatment distribution
            let n_ref = 100_000usize;
            let mut rng = RngStream::new(0xC0FFEE).substream(match id {
                ScenarioId::Continuous => 11,
                ScenarioId::AppxE4 => 12,
                _ => unreachable!(),
            })
            .rng();
            let mut t = Vec::with_capacity(n_ref);
            for _ in 0..n_ref {
                let mu = match id {
                    ScenarioId::Continuous => {
                        let z0: f64 = rng.sample(StandardNormal);
                        let mut x = [0.0; 3];
                        for xv in &mut x {
                            let z: f64 = rng.sample(StandardNormal);
                            *xv = 0.3f64.sqrt() * z0 + 0.7f64.sqrt() * z;
                        }
                        0.6 * x[0] * x[0] + 0.6 * x[0] + (0.65 * x[1]).abs().exp()
                            - 0.8 * x[2] * x[2]
                    }
                    ScenarioId::AppxE4 => {
                        let x1: f64 = rng.sample(StandardNormal);
                        let x2: f64 = rng.sample(StandardNormal);
                        let x4: f64 = rng.sample(StandardNormal);
                        0.4 * x1 + 0.6 * x2 - 0.5 * x4
                    }
                    _ => unreachable!(),
                };
                let eps: f64 = rng.sample(StandardNormal);
                t.push(mu + eps);
            }
            default_grid(&t, GRID_POINTS)
        })
        .clone()
}

/// Equicorrelated covariates: Sigma_jj = 1, Sigma_jk = 0.3.
fn equicorrelated_x(n: usize, p: usize, rng: &mut impl Rng) -> Array2<f64> {
    let a = 0.3f64.sqrt();
    let b = 0.7f64.sqrt();
    let mut x = Array2::zeros((n, p));
    for i in 0..n {
        let z0: f64 = rng.sample(StandardNormal);
        for j in 0..p {
            let z: f64 = rng.sample(StandardNormal);
            x[[i, j]] = a * z0 + b * z;
        }
    }
    x
}

/// Generate one replication dataset; bitwise reproducible per stream.
pub fn generate(scenario: &Scenario, stream: &RngStream) -> Result<(Dataset, Truth)> {
    let mut rng = stream.rng();
    let n = scenario.n;
    let p = scenario.p;
    let (x, t, y, t_kind) = match scenario.id {
        ScenarioId::LinearBinary | ScenarioId::NonlinearBinary | ScenarioId::AppxE1 => {
            let x = equicorrelated_x(n, p, &mut rng);
            let mut t = Array1::zeros(n);
            let mut y = Array1::zeros(n);
            for i in 0..n {
                let (prop, mu0) = match scenario.id {
                    ScenarioId::LinearBinary => (
                        norm_cdf(0.15 * x[[i, 0]] + 0.2 * x[[i, 1]] - 0.4 * x[[i, 4]]),
                        0.75 * x[[i, 0]] + x[[i, 1]] + 0.6 * x[[i, 2]]
                            - 0.8 * x[[i, 3]]
                            - 0.7 * x[[i, 4]],
                    ),
                    ScenarioId::NonlinearBinary => (
                        norm_cdf(0.15 * x[[i, 0]] - 0.4 * x[[i, 1]] - 0.5 * x[[i, 4]]),
                        0.8 * x[[i, 0]]
                            + 0.4 * x[[i, 1]].powi(3)
                            + 0.25 * x[[i, 1]].abs().exp()
                            + 0.8 * x[[i, 4]] * x[[i, 4]]
                            - 1.5 * x[[i, 4]].sin(),
                    ),
                    ScenarioId::AppxE1 => (
                        norm_cdf(
                            0.35 * x[[i, 0]] + 0.2 * x[[i, 1]] - 0.3 * x[[i, 2]]
                                - 0.4 * x[[i, 4]],
                        ),
                        0.45 * x[[i, 0]] + 0.7 * x[[i, 1]] - 0.6 * x[[i, 2]]
                            + 1.3 * x[[i, 3]]
                            - 0.5 * x[[i, 4]],
                    ),
                    _ => unreachable!(),
                };
                t[i] = if rng.random::<f64>() < prop { 1.0 } else { 0.0 };
                let eps: f64 = rng.sample(StandardNormal);
                y[i] = t[i] + mu0 + eps;
            }
            (x, t, y, VarKind::Binary)
        }
        ScenarioId::AppxE2 => {
            let x = equicorrelated_x(n, p, &mut rng);
            let coef: Vec<f64> = (1..=p).map(|j| 1.0 / (j * j) as f64).collect();
            let mut t = Array1::zeros(n);
            let mut y = Array1::zeros(n);
            for i in 0..n {
                let xb: f64 = (0..p).map(|j| coef[j] * x[[i, j]]).sum();
                t[i] = if rng.random::<f64>() < norm_cdf(xb) { 1.0 } else { 0.0 };
                let eps: f64 = rng.sample(StandardNormal);
                y[i] = t[i] + xb + eps;
            }
            (x, t, y, VarKind::Binary)
        }
        ScenarioId::AppxE3 => {
            // 20 cluster centers; treated probability 0.25 for the first 10
            // clusters and 0.75 for the rest
            let mut centers = Array2::zeros((20, p));
            for k in 0..20 {
                for j in 0..p {
                    centers[[k, j]] = rng.sample::<f64, _>(StandardNormal);
                }
            }
            let norm2: f64 = (1..=p).map(|j| 1.0 / (j * j) as f64).sum();
            let scale = (18.0 / norm2).sqrt();
            let beta: Vec<f64> = (1..=p).map(|j| scale / j as f64).collect();
            let mut x = Array2::zeros((n, p));
            let mut t = Array1::zeros(n);
            let mut y = Array1::zeros(n);
            for i in 0..n {
                let k = rng.random_range(0..20usize);
                for j in 0..p {
                    let z: f64 = rng.sample(StandardNormal);
                    x[[i, j]] = centers[[k, j]] + z;
                }
                let prob = if k < 10 { 0.25 } else { 0.75 };
                t[i] = if rng.random::<f64>() < prob { 1.0 } else { 0.0 };
                let xb: f64 = (0..p).map(|j| beta[j] * x[[i, j]]).sum();
                let eps: f64 = rng.sample(StandardNormal);
                y[i] = 10.0 * t[i] + xb + eps;
            }
            (x, t, y, VarKind::Binary)
        }
        ScenarioId::Continuous => {
            let x = equicorrelated_x(n, p, &mut rng);
            let mut t = Array1::zeros(n);
            let mut y = Array1::zeros(n);
            for i in 0..n {
                let mu_t = 0.6 * x[[i, 0]] * x[[i, 0]] + 0.6 * x[[i, 0]]
                    + (0.65 * x[[i, 1]]).abs().exp()
                    - 0.8 * x[[i, 2]] * x[[i, 2]];
                let e1: f64 = rng.sample(StandardNormal);
                t[i] = mu_t + e1;
                let mu_y = 5.0 + 0.05 * t[i].powi(3) - 0.1 * t[i] * t[i]
                    + 0.6 * x[[i, 0]]
                    + 0.4 * x[[i, 0]].exp()
                    + (0.65 * x[[i, 1]]).abs().ln()
                    + 0.5 * (1.0 + x[[i, 2]]) * (1.0 + x[[i, 2]]);
                let e2: f64 = rng.sample(StandardNormal);
                y[i] = mu_y + e2;
            }
            (x, t, y, VarKind::Continuous)
        }
        ScenarioId::AppxE4 => {
            let mut x = Array2::zeros((n, p));
            for v in x.iter_mut() {
                *v = rng.sample::<f64, _>(StandardNormal);
            }
            let mut t = Array1::zeros(n);
            let mut y = Array1::zeros(n);
            for i in 0..n {
                let mu_t = 0.4 * x[[i, 0]] + 0.6 * x[[i, 1]] - 0.5 * x[[i, 3]];
                let e1: f64 = rng.sample(StandardNormal);
                t[i] = mu_t + e1;
                let mu_y = 5.0 - 0.1 * t[i] + 0.05 * t[i].powi(3)
                    + 0.5 * x[[i, 0]]
                    + 0.5 * x[[i, 1]]
                    - 0.3 * x[[i, 4]];
                let e2: f64 = rng.sample(StandardNormal);
                y[i] = mu_y + e2;
            }
            (x, t, y, VarKind::Continuous)
        }
        ScenarioId::MisspecG(variant) => {
            let x = equicorrelated_x(n, p, &mut rng);
            let t_misspec = matches!(
                variant,
                MisspecVariant::TreatmentMisspec | MisspecVariant::BothMisspec
            );
            let y_misspec = matches!(
                variant,
                MisspecVariant::OutcomeMisspec | MisspecVariant::BothMisspec
            );
            let mut t = Array1::zeros(n);
            let mut y = Array1::zeros(n);
            for i in 0..n {
                let (x1, x2, x3) = (x[[i, 0]], x[[i, 1]], x[[i, 2]]);
                let prop = if t_misspec {
                    norm_cdf(0.3 * x1 * x1 + 0.3 * x2 * x2 - 0.3 * x3 * x3 - 0.3)
                } else {
                    norm_cdf(0.3 * x1 + 0.3 * x2 - 0.3 * x3)
                };
                t[i] = if rng.random::<f64>() < prop { 1.0 } else { 0.0 };
                let mu0 = if y_misspec {
                    0.8 * x1 * x1 + 0.6 * x2 * x2 - 0.7 * x3 * x3
                } else {
                    0.8 * x1 + 0.6 * x2 - 0.7 * x3
                };
                let eps: f64 = rng.sample(StandardNormal);
                y[i] = t[i] + mu0 + eps;
            }
            (x, t, y, VarKind::Binary)
        }
    };
    let y_kind = VarKind::Continuous;
    let data = Dataset::from_raw(x, t, y, t_kind, y_kind)?;
    Ok((data, scenario.truth()))
}

/// One estimate at one target (the scalar ATE, or one curve location).
#[derive(Debug, Clone, Serialize)]
pub struct TargetEstimate {
    pub truth: f64,
    pub point: f64,
    pub se: f64,
    pub lo: f64,
    pub hi: f64,
    pub var_outer: f64,
    pub var_inner: f64,
}

/// A method the harness can replicate: fit + estimate on one dataset,
/// returning one entry per target.
pub trait Method: Sync {
    fn name(&self) -> String;
    fn run(&self, data: &Dataset, truth: &Truth, stream: &RngStream) -> Result<Vec<TargetEstimate>>;
}

/// Aggregated replication metrics for one method. Curve scenarios average
/// each metric over the grid locations.
#[derive(Debug, Clone, Serialize)]
pub struct MethodMetrics {
    pub method: String,
    pub abs_bias: f64,
    pub variance: f64,
    pub mse: f64,
    pub coverage: f64,
    pub se_ratio: f64,
    pub n_reps: usize,
    pub n_failed: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct MetricsTable {
    pub scenario: String,
    pub n: usize,
    pub p: usize,
    pub rows: Vec<MethodMetrics>,
}

impl MetricsTable {
    pub fn to_csv(&self) -> String {
        let mut out = String::from(
            "scenario,n,p,method,abs_bias,variance,mse,coverage,se_ratio,n_reps,n_failed\n",
        );
        for r in &self.rows {
            out.push_str(&format!(
                "{},{},{},{},{},{},{},{},{},{},{}\n",
                self.scenario,
                self.n,
                self.p,
                r.method,
                r.abs_bias,
                r.variance,
                r.mse,
                r.coverage,
                r.se_ratio,
                r.n_reps,
                r.n_failed
            ));
        }
        out
    }
}

/// Raw per-replication results for one method.
#[derive(Debug, Clone, Serialize)]
pub struct RepResult {
    pub rep: usize,
    pub method: String,
    pub estimates: Option<Vec<TargetEstimate>>,
    pub error: Option<String>,
}

/// Run R replications of every method; replications parallelize over the rep
/// index with per-rep substreams, so results do not depend on thread count.
pub fn run_replications_raw(
    scenario: &Scenario,
    methods: &[&dyn Method],
    r: usize,
    stream: &RngStream,
) -> Vec<RepResult> {
    let results: Vec<Vec<RepResult>> = (0..r)
        .into_par_iter()
        .map(|rep| {
            let rep_stream = stream.substream(rep as u64);
            let mut out = Vec::with_capacity(methods.len());
            match generate(scenario, &rep_stream.substream(0)) {
                Ok((data, truth)) => {
                    for (k, method) in methods.iter().enumerate() {
                        let run = method.run(&data, &truth, &rep_stream.substream(k as u64 + 1));
                        out.push(match run {
                            Ok(estimates) => RepResult {
                                rep,
                                method: method.name(),
                                estimates: Some(estimates),
                                error: None,
                            },
                            Err(e) => RepResult {
                                rep,
                                method: method.name(),
                                estimates: None,
                                error: Some(e.to_string()),
                            },
                        });
                    }
                }
                Err(e) => {
                    for method in methods {
                        out.push(RepResult {
                            rep,
                            method: method.name(),
                            estimates: None,
                            error: Some(e.to_string()),
                        });
                    }
                }
            }
            out
        })
        .collect();
    results.into_iter().flatten().collect()
}

/// Aggregate raw results into a metrics table.
pub fn metrics_from_raw(scenario: &Scenario, raw: &[RepResult]) -> Result<MetricsTable> {
    let mut methods: Vec<String> = Vec::new();
    for r in raw {
        if !methods.contains(&r.method) {
            methods.push(r.method.clone());
        }
    }
    let mut rows = Vec::with_capacity(methods.len());
    for m in &methods {
        let ok: Vec<&Vec<TargetEstimate>> = raw
            .iter()
            .filter(|r| &r.method == m)
            .filter_map(|r| r.estimates.as_ref())
            .collect();
        let n_failed = raw
            .iter()
            .filter(|r| &r.method == m && r.estimates.is_none())
            .count();
        if ok.len() < 2 {
            return Err(Error::Numeric(format!(
                "method {m} completed fewer than 2 replications"
            )));
        }
        let g = ok[0].len();
        if ok.iter().any(|e| e.len() != g) {
            return Err(Error::Numeric("inconsistent target counts across reps".into()));
        }
        let reps = ok.len() as f64;
        let mut abs_bias = 0.0;
        let mut variance = 0.0;
        let mut mse = 0.0;
        let mut coverage = 0.0;
        let mut se_ratio = 0.0;
        for gi in 0..g {
            let truth = ok[0][gi].truth;
            let points: Vec<f64> = ok.iter().map(|e| e[gi].point).collect();
            let mean = points.iter().sum::<f64>() / reps;
            let var = points.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (reps - 1.0);
            let mse_g = points.iter().map(|v| (v - truth).powi(2)).sum::<f64>() / reps;
            let cov_g = ok
                .iter()
                .filter(|e| e[gi].lo <= truth && truth <= e[gi].hi)
                .count() as f64
                / reps;
            let mean_se = ok.iter().map(|e| e[gi].se).sum::<f64>() / reps;
            abs_bias += (mean - truth).abs();
            variance += var;
            mse += mse_g;
            coverage += cov_g;
            se_ratio += mean_se / var.sqrt();
        }
        let gf = g as f64;
        rows.push(MethodMetrics {
            method: m.clone(),
            abs_bias: abs_bias / gf,
            variance: variance / gf,
            mse: mse / gf,
            coverage: coverage / gf,
            se_ratio: se_ratio / gf,
            n_reps: ok.len(),
            n_failed,
        });
    }
    Ok(MetricsTable {
        scenario: scenario.id.name(),
        n: scenario.n,
        p: scenario.p,
        rows,
    })
}

pub fn run_replications(
    scenario: &Scenario,
    methods: &[&dyn Method],
    r: usize,
    stream: &RngStream,
) -> Result<MetricsTable> {
    let raw = run_replications_raw(scenario, methods, r, stream);
    metrics_from_raw(scenario, &raw)
}
