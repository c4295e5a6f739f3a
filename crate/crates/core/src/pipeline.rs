//! High-level orchestration shared by the CLI and the simulation harness:
//! fit treatment/outcome models (one family or WAIC-selected), then run the
//! scalar or curve estimation pipeline.

use serde::Serialize;

use crate::data::{Dataset, RngStream};
use crate::error::{Error, Result};
use crate::inference::{
    estimate_ate, estimate_curve, AteEstimator, CurveMethod, CurveReport, EstimateReport,
};
use crate::samplers::{
    fit_model_with_design, McmcConfig, ModelDesign, PosteriorDraws, PriorFamily, PriorSpec, Role,
};
use crate::sim::{Method, TargetEstimate, Truth};
use crate::waic::{pointwise_loglik, select_model, waic, WaicResult};

/// Covariate-effect family selection: one fixed family, or all three fitted
/// with the minimum-WAIC model kept per role.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum FamilyChoice {
    Linear,
    Spline,
    Gp,
    Auto,
}

impl FamilyChoice {
    pub fn parse(s: &str) -> Result<Self> {
        Ok(match s {
            "linear" => FamilyChoice::Linear,
            "spline" => FamilyChoice::Spline,
            "gp" => FamilyChoice::Gp,
            "auto" => FamilyChoice::Auto,
            other => {
                return Err(Error::InvalidConfig(format!(
                    "unknown prior family '{other}' (expected linear|spline|gp|auto)"
                )))
            }
        })
    }
}

/// Model-fitting settings resolved from the CLI or harness configuration.
#[derive(Debug, Clone, Serialize)]
pub struct FitSettings {
    pub family: FamilyChoice,
    pub df: usize,
    pub phi: f64,
    pub t_degree: usize,
    pub n_iter: usize,
    pub burn_in: usize,
    pub thin: usize,
}

impl Default for FitSettings {
    fn default() -> Self {
        FitSettings {
            family: FamilyChoice::Auto,
            df: 3,
            phi: 1.0,
            t_degree: 3,
            n_iter: 2000,
            burn_in: 1000,
            thin: 2,
        }
    }
}

impl FitSettings {
    pub fn families(&self) -> Vec<PriorFamily> {
        match self.family {
            FamilyChoice::Linear => vec![PriorFamily::Linear],
            FamilyChoice::Spline => vec![PriorFamily::Spline { df: self.df }],
            FamilyChoice::Gp => vec![PriorFamily::Gp { phi: self.phi }],
            FamilyChoice::Auto => vec![
                PriorFamily::Linear,
                PriorFamily::Spline { df: self.df },
                PriorFamily::Gp { phi: self.phi },
            ],
        }
    }

    fn mcmc(&self, seed: u64) -> McmcConfig {
        McmcConfig {
            n_iter: self.n_iter,
            burn_in: self.burn_in,
            thin: self.thin,
            seed,
        }
    }

    fn prior_for(&self, family: PriorFamily, p: usize) -> PriorSpec {
        let mut prior = PriorSpec::new(family, p);
        prior.t_degree = self.t_degree;
        prior
    }
}

/// One row of the per-role WAIC comparison.
#[derive(Debug, Clone, Serialize)]
pub struct WaicEntry {
    pub family: String,
    pub waic: f64,
    pub ratio_to_min: f64,
    pub selected: bool,
}

/// Summary of one fitted role, including the WAIC table when several
/// families were tried.
#[derive(Debug, Clone, Serialize)]
pub struct ModelReport {
    pub role: Role,
    pub family: String,
    pub waic: f64,
    pub inclusion: Vec<f64>,
    pub waic_table: Vec<WaicEntry>,
}

pub struct FittedRole {
    pub draws: PosteriorDraws,
    pub report: ModelReport,
}

/// Outcome and treatment fits, either possibly absent.
pub type FittedPair = (Option<FittedRole>, Option<FittedRole>);

/// Fit the requested roles, selecting the minimum-WAIC family per role when
/// several are in play. Kernel/spline designs are built once per family and
/// shared between roles.
pub fn fit_roles(
    data: &Dataset,
    settings: &FitSettings,
    stream: &RngStream,
    need_outcome: bool,
    need_treatment: bool,
) -> Result<FittedPair> {
    let families = settings.families();
    let mut outcome_fits: Vec<(PosteriorDraws, WaicResult)> = Vec::new();
    let mut treatment_fits: Vec<(PosteriorDraws, WaicResult)> = Vec::new();
    for (k, &family) in families.iter().enumerate() {
        let design = ModelDesign::build(data, family)?;
        let prior = settings.prior_for(family, data.p());
        if need_outcome {
            let cfg = settings.mcmc(stream.substream(10 + k as u64).seed());
            let draws = fit_model_with_design(&design, data, Role::Outcome, &prior, &cfg)?;
            let w = waic(&pointwise_loglik(&draws, data, Role::Outcome))?;
            outcome_fits.push((draws, w));
        }
        if need_treatment {
            let cfg = settings.mcmc(stream.substream(20 + k as u64).seed());
            let draws = fit_model_with_design(&design, data, Role::Treatment, &prior, &cfg)?;
            let w = waic(&pointwise_loglik(&draws, data, Role::Treatment))?;
            treatment_fits.push((draws, w));
        }
    }
    let pick = |fits: Vec<(PosteriorDraws, WaicResult)>, role: Role| -> Option<FittedRole> {
        if fits.is_empty() {
            return None;
        }
        let waics: Vec<WaicResult> = fits.iter().map(|(_, w)| w.clone()).collect();
        let best = select_model(&waics);
        let min_waic = waics[best].waic;
        let table: Vec<WaicEntry> = fits
            .iter()
            .enumerate()
            .map(|(i, (d, w))| WaicEntry {
                family: d.family().name().to_string(),
                waic: w.waic,
                ratio_to_min: w.waic / min_waic,
                selected: i == best,
            })
            .collect();
        let (draws, w) = fits.into_iter().nth(best).unwrap();
        let report = ModelReport {
            role,
            family: draws.family().name().to_string(),
            waic: w.waic,
            inclusion: draws.inclusion().to_vec(),
            waic_table: table,
        };
        Some(FittedRole { draws, report })
    };
    Ok((
        pick(outcome_fits, Role::Outcome),
        pick(treatment_fits, Role::Treatment),
    ))
}

#[derive(Debug, Clone, Serialize)]
pub struct AteOutput {
    pub report: EstimateReport,
    pub outcome: Option<ModelReport>,
    pub treatment: Option<ModelReport>,
}

/// Full binary-treatment pipeline: fit the needed models, then point
/// estimate, delta matrix, variance, and interval.
pub fn run_ate(
    data: &Dataset,
    estimator: AteEstimator,
    settings: &FitSettings,
    m_boot: usize,
    level: f64,
    stream: &RngStream,
) -> Result<AteOutput> {
    let need_outcome = !matches!(estimator, AteEstimator::Ipw);
    let need_treatment = !matches!(estimator, AteEstimator::Regression);
    let (of, tf) = fit_roles(
        data,
        settings,
        &stream.substream(1),
        need_outcome,
        need_treatment,
    )?;
    let report = estimate_ate(
        estimator,
        data,
        of.as_ref().map(|f| &f.draws),
        tf.as_ref().map(|f| &f.draws),
        m_boot,
        level,
        &stream.substream(2),
    )?;
    Ok(AteOutput {
        report,
        outcome: of.map(|f| f.report),
        treatment: tf.map(|f| f.report),
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct CurveOutput {
    pub report: CurveReport,
    pub outcome: ModelReport,
    pub treatment: Option<ModelReport>,
}

/// Full continuous-treatment pipeline over a treatment grid.
pub fn run_curve(
    data: &Dataset,
    method: CurveMethod,
    settings: &FitSettings,
    grid: &[f64],
    m_boot: usize,
    level: f64,
    stream: &RngStream,
) -> Result<CurveOutput> {
    let need_treatment = matches!(method, CurveMethod::DrPseudo);
    let (of, tf) = fit_roles(data, settings, &stream.substream(1), true, need_treatment)?;
    let of = of.expect("outcome fit requested");
    let report = estimate_curve(
        method,
        data,
        &of.draws,
        tf.as_ref().map(|f| &f.draws),
        grid,
        m_boot,
        level,
        &stream.substream(2),
    )?;
    Ok(CurveOutput {
        report,
        outcome: of.report,
        treatment: tf.map(|f| f.report),
    })
}

/// Harness method: the binary-treatment pipeline as a replicable [`Method`].
pub struct BayesAteMethod {
    pub label: String,
    pub estimator: AteEstimator,
    pub fit: FitSettings,
    pub m_boot: usize,
    pub level: f64,
}

impl Method for BayesAteMethod {
    fn name(&self) -> String {
        self.label.clone()
    }

    fn run(
        &self,
        data: &Dataset,
        truth: &Truth,
        stream: &RngStream,
    ) -> Result<Vec<TargetEstimate>> {
        let truth_v = truth
            .ate()
            .ok_or_else(|| Error::InvalidConfig("scalar method on curve scenario".into()))?;
        let out = run_ate(data, self.estimator, &self.fit, self.m_boot, self.level, stream)?;
        let r = &out.report;
        Ok(vec![TargetEstimate {
            truth: truth_v,
            point: r.point,
            se: r.var_total.sqrt(),
            lo: r.ci.0,
            hi: r.ci.1,
            var_outer: r.var_outer,
            var_inner: r.var_inner,
        }])
    }
}

/// Harness method: the exposure-response pipeline evaluated on the
/// scenario's fixed grid.
pub struct BayesCurveMethod {
    pub label: String,
    pub method: CurveMethod,
    pub fit: FitSettings,
    pub m_boot: usize,
    pub level: f64,
}

impl Method for BayesCurveMethod {
    fn name(&self) -> String {
        self.label.clone()
    }

    fn run(
        &self,
        data: &Dataset,
        truth: &Truth,
        stream: &RngStream,
    ) -> Result<Vec<TargetEstimate>> {
        let curve = truth
            .curve()
            .ok_or_else(|| Error::InvalidConfig("curve method on scalar scenario".into()))?;
        let out = run_curve(
            data,
            self.method,
            &self.fit,
            &curve.grid,
            self.m_boot,
            self.level,
            stream,
        )?;
        Ok(out
            .report
            .points
            .iter()
            .map(|pt| TargetEstimate {
                truth: curve.oracle(pt.t),
                point: pt.point,
                se: pt.var_total.sqrt(),
                lo: pt.lo,
                hi: pt.hi,
                var_outer: pt.var_outer,
                var_inner: pt.var_inner,
            })
            .collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::{generate, Scenario, ScenarioId};

    #[test]
    fn linear_ate_pipeline_recovers_truth_roughly() {
        let sc = Scenario::new(ScenarioId::LinearBinary, 200, 10).unwrap();
        let (data, _) = generate(&sc, &RngStream::new(5)).unwrap();
        let settings = FitSettings {
            family: FamilyChoice::Linear,
            n_iter: 1000,
            burn_in: 500,
            thin: 2,
            ..FitSettings::default()
        };
        let out = run_ate(
            &data,
            AteEstimator::DoublyRobust,
            &settings,
            40,
            0.95,
            &RngStream::new(7),
        )
        .unwrap();
        assert!(
            (out.report.point - 1.0).abs() < 0.6,
            "point {}",
            out.report.point
        );
        assert!(out.report.var_total > 0.0);
        assert!(out.report.ci.0 < out.report.ci.1);
        let or = out.outcome.unwrap();
        assert_eq!(or.family, "linear");
        assert_eq!(or.waic_table.len(), 1);
    }

    #[test]
    fn auto_mode_reports_three_families() {
        let sc = Scenario::new(ScenarioId::LinearBinary, 80, 6).unwrap();
        let (data, _) = generate(&sc, &RngStream::new(6)).unwrap();
        let settings = FitSettings {
            family: FamilyChoice::Auto,
            n_iter: 400,
            burn_in: 200,
            thin: 2,
            ..FitSettings::default()
        };
        let (of, tf) = fit_roles(&data, &settings, &RngStream::new(8), true, true).unwrap();
        let of = of.unwrap();
        let tf = tf.unwrap();
        assert_eq!(of.report.waic_table.len(), 3);
        assert_eq!(tf.report.waic_table.len(), 3);
        assert_eq!(
            of.report.waic_table.iter().filter(|e| e.selected).count(),
            1
        );
        let min_ratio = of
            .report
            .waic_table
            .iter()
            .map(|e| e.ratio_to_min)
            .fold(f64::INFINITY, f64::min);
        assert!((min_ratio - 1.0).abs() < 1e-12);
    }

    #[test]
    fn pipeline_is_deterministic() {
        let sc = Scenario::new(ScenarioId::LinearBinary, 60, 5).unwrap();
        let (data, _) = generate(&sc, &RngStream::new(9)).unwrap();
        let settings = FitSettings {
            family: FamilyChoice::Linear,
            n_iter: 300,
            burn_in: 100,
            thin: 2,
            ..FitSettings::default()
        };
        let a = run_ate(
            &data,
            AteEstimator::DoublyRobust,
            &settings,
            20,
            0.95,
            &RngStream::new(11),
        )
        .unwrap();
        let b = run_ate(
            &data,
            AteEstimator::DoublyRobust,
            &settings,
            20,
            0.95,
            &RngStream::new(11),
        )
        .unwrap();
        assert_eq!(a.report.point, b.report.point);
        assert_eq!(a.report.var_total, b.report.var_total);
        assert_eq!(a.report.ci, b.report.ci);
    }
}
