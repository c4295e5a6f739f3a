//! Point estimates from posterior draws, the bootstrap-by-draw delta matrix,
//! the two-term variance decomposition, and confidence intervals.

use ndarray::Array2;
use rayon::prelude::*;
use serde::Serialize;

use crate::data::{BootstrapIndex, Dataset, RngStream, VarKind};
use crate::error::{Error, Result};
use crate::estimators::{
    dr_binary_rowwise, fit_curve, ipw_binary_rowwise, reg_binary_rowwise, BinaryFitted,
    DENSITY_FLOOR,
};
use crate::samplers::{PosteriorDraws, Role};
use crate::stats::{norm_pdf, norm_quantile};

/// Maximum redraw attempts when a bootstrap resample loses a treatment arm.
pub const MAX_REDRAWS: usize = 100;

/// An estimator evaluated on (bootstrap row multiset, posterior draw) cells.
pub trait DeltaEstimator: Sync {
    /// Number of posterior draws (columns of the delta matrix).
    fn n_draws(&self) -> usize;

    /// Evaluate the estimator on the given rows under draw `b`.
    fn evaluate(&self, indices: &[u32], b: usize) -> f64;

    /// Binary-treatment estimators need both arms present in a resample.
    fn requires_both_arms(&self) -> bool {
        false
    }
}

/// The M x B matrix of estimator evaluations: rows are bootstrap datasets,
/// columns are posterior draws.
#[derive(Debug, Clone)]
pub struct DeltaMatrix {
    values: Array2<f64>,
}

impl DeltaMatrix {
    pub fn from_values(values: Array2<f64>) -> Self {
        DeltaMatrix { values }
    }

    pub fn m(&self) -> usize {
        self.values.nrows()
    }

    pub fn b(&self) -> usize {
        self.values.ncols()
    }

    pub fn values(&self) -> &Array2<f64> {
        &self.values
    }
}

/// Mean of the estimator over posterior draws on the original data.
pub fn point_estimate(est: &dyn DeltaEstimator, n: usize) -> f64 {
    let identity: Vec<u32> = (0..n as u32).collect();
    let b = est.n_draws();
    (0..b).map(|bi| est.evaluate(&identity, bi)).sum::<f64>() / b as f64
}

/// Draw bootstrap indices for row `m`, redrawing (up to [`MAX_REDRAWS`]) when
/// the estimator needs both treatment arms and the resample lost one.
fn draw_row_indices(
    data: &Dataset,
    stream: &RngStream,
    m: usize,
    both_arms: bool,
) -> Result<Vec<u32>> {
    let row_stream = stream.substream(m as u64);
    let idx = BootstrapIndex::draw(data.n(), &row_stream);
    if !both_arms || has_both_arms(data, &idx.indices) {
        return Ok(idx.indices);
    }
    for attempt in 1..=MAX_REDRAWS {
        let idx = BootstrapIndex::draw(data.n(), &row_stream.substream(attempt as u64));
        if has_both_arms(data, &idx.indices) {
            return Ok(idx.indices);
        }
    }
    Err(Error::DegenerateBootstrap(MAX_REDRAWS))
}

fn has_both_arms(data: &Dataset, indices: &[u32]) -> bool {
    let t = data.t();
    let mut saw0 = false;
    let mut saw1 = false;
    for &i in indices {
        if t[i as usize] == 1.0 {
            saw1 = true;
        } else {
            saw0 = true;
        }
        if saw0 && saw1 {
            return true;
        }
    }
    false
}

/// Evaluate the estimator over M bootstrap resamples times all posterior
/// draws. Cell values depend only on (row stream, draw), so results are
/// identical for any worker count.
pub fn build_delta_matrix(
    est: &dyn DeltaEstimator,
    data: &Dataset,
    m_boot: usize,
    stream: &RngStream,
) -> Result<DeltaMatrix> {
    if m_boot < 2 {
        return Err(Error::TooFewRows);
    }
    let b = est.n_draws();
    if b < 2 {
        return Err(Error::TooFewCols);
    }
    let rows: Vec<Result<Vec<f64>>> = (0..m_boot)
        .into_par_iter()
        .map(|m| {
            let idx = draw_row_indices(data, stream, m, est.requires_both_arms())?;
            Ok((0..b).map(|bi| est.evaluate(&idx, bi)).collect())
        })
        .collect();
    let mut values = Array2::zeros((m_boot, b));
    for (m, row) in rows.into_iter().enumerate() {
        let row = row?;
        for (bi, v) in row.into_iter().enumerate() {
            values[[m, bi]] = v;
        }
    }
    Ok(DeltaMatrix { values })
}

/// (var_outer, var_inner): the variance over rows of the row means, plus the
/// mean over rows of the within-row variances. Sample variances use the n-1
/// denominator.
pub fn variance_estimate(dm: &DeltaMatrix) -> Result<(f64, f64)> {
    let m = dm.m();
    let b = dm.b();
    if m < 2 {
        return Err(Error::TooFewRows);
    }
    if b < 2 {
        return Err(Error::TooFewCols);
    }
    let mut row_means = Vec::with_capacity(m);
    let mut row_vars = Vec::with_capacity(m);
    for row in dm.values.rows() {
        let mean = row.sum() / b as f64;
        let var = row.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (b as f64 - 1.0);
        row_means.push(mean);
        row_vars.push(var);
    }
    let grand = row_means.iter().sum::<f64>() / m as f64;
    let var_outer = row_means
        .iter()
        .map(|v| (v - grand) * (v - grand))
        .sum::<f64>()
        / (m as f64 - 1.0);
    let var_inner = row_vars.iter().sum::<f64>() / m as f64;
    Ok((var_outer, var_inner))
}

/// Wald interval: point +/- z_(1+level)/2 * sqrt(var_total).
pub fn confidence_interval(point: f64, var_total: f64, level: f64) -> (f64, f64) {
    let z = norm_quantile(0.5 * (1.0 + level));
    let half = z * var_total.max(0.0).sqrt();
    (point - half, point + half)
}

#[derive(Debug, Clone, Serialize)]
pub struct Diagnostics {
    /// var_inner / var_total; the share of the total variance contributed by
    /// the posterior-spread correction term.
    pub correction_share: f64,
    /// True when var_total is zero and the interval degenerates to a point.
    pub degenerate_variance: bool,
}

/// Scalar estimate with the decomposed variance and a Wald interval.
#[derive(Debug, Clone, Serialize)]
pub struct EstimateReport {
    pub estimand: String,
    pub point: f64,
    pub var_outer: f64,
    pub var_inner: f64,
    pub var_total: f64,
    pub ci: (f64, f64),
    pub level: f64,
    #[serde(rename = "M")]
    pub m: usize,
    #[serde(rename = "B")]
    pub b: usize,
    pub seed: u64,
    pub diagnostics: Diagnostics,
}

/// Binary-treatment estimators built from posterior fitted values.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum AteEstimator {
    DoublyRobust,
    Ipw,
    Regression,
}

impl AteEstimator {
    pub fn estimand(&self) -> &'static str {
        match self {
            AteEstimator::DoublyRobust => "ate_dr",
            AteEstimator::Ipw => "ate_ipw",
            AteEstimator::Regression => "ate_reg",
        }
    }
}

/// Per-draw per-row estimator contributions; a cell evaluation is the mean of
/// the contributions over the resampled rows.
pub struct RowwiseCells {
    psi: Array2<f64>,
    both_arms: bool,
}

impl RowwiseCells {
    pub fn new(psi: Array2<f64>, both_arms: bool) -> Self {
        RowwiseCells { psi, both_arms }
    }
}

impl DeltaEstimator for RowwiseCells {
    fn n_draws(&self) -> usize {
        self.psi.nrows()
    }

    fn evaluate(&self, indices: &[u32], b: usize) -> f64 {
        let row = self.psi.row(b);
        let s: f64 = indices.iter().map(|&i| row[i as usize]).sum();
        s / indices.len() as f64
    }

    fn requires_both_arms(&self) -> bool {
        self.both_arms
    }
}

/// Assemble the per-row contributions of a binary-treatment estimator from
/// the treatment and outcome posterior draws.
pub fn ate_cells(
    kind: AteEstimator,
    data: &Dataset,
    outcome: Option<&PosteriorDraws>,
    treatment: Option<&PosteriorDraws>,
) -> Result<RowwiseCells> {
    if data.t_kind() != VarKind::Binary {
        return Err(Error::InvalidConfig(
            "binary-treatment estimator requires a binary treatment column".into(),
        ));
    }
    let t: Vec<f64> = data.t().to_vec();
    let y: Vec<f64> = data.y().to_vec();
    let n = data.n();

    let need_outcome = !matches!(kind, AteEstimator::Ipw);
    let need_treatment = !matches!(kind, AteEstimator::Regression);
    let od = if need_outcome {
        let od = outcome.ok_or_else(|| Error::InvalidConfig("outcome model required".into()))?;
        if od.role() != Role::Outcome {
            return Err(Error::InvalidConfig("outcome draws have the wrong role".into()));
        }
        Some(od)
    } else {
        None
    };
    let td = if need_treatment {
        let td =
            treatment.ok_or_else(|| Error::InvalidConfig("treatment model required".into()))?;
        if td.role() != Role::Treatment {
            return Err(Error::InvalidConfig(
                "treatment draws have the wrong role".into(),
            ));
        }
        Some(td)
    } else {
        None
    };
    if let (Some(a), Some(b)) = (od, td) {
        if a.b() != b.b() {
            return Err(Error::InvalidConfig(
                "outcome and treatment fits must keep the same number of draws".into(),
            ));
        }
    }

    let b_draws = od.map(|d| d.b()).or_else(|| td.map(|d| d.b())).unwrap();
    let p1 = td.map(|d| d.probabilities());
    let m1 = od.map(|d| d.counterfactual_mean(1.0));
    let m0 = od.map(|d| d.counterfactual_mean(0.0));

    let mut psi = Array2::zeros((b_draws, n));
    for bi in 0..b_draws {
        let p1_row = p1
            .as_ref()
            .map(|m| m.row(bi).to_vec())
            .unwrap_or_else(|| vec![0.5; n]);
        let m1_row = m1
            .as_ref()
            .map(|m| m.row(bi).to_vec())
            .unwrap_or_else(|| vec![0.0; n]);
        let m0_row = m0
            .as_ref()
            .map(|m| m.row(bi).to_vec())
            .unwrap_or_else(|| vec![0.0; n]);
        let fv = BinaryFitted::new(p1_row, m1_row, m0_row);
        let rows = match kind {
            AteEstimator::DoublyRobust => dr_binary_rowwise(&t, &y, &fv),
            AteEstimator::Ipw => ipw_binary_rowwise(&t, &y, &fv),
            AteEstimator::Regression => reg_binary_rowwise(&fv),
        };
        for (i, v) in rows.into_iter().enumerate() {
            psi[[bi, i]] = v;
        }
    }
    let both_arms = !matches!(kind, AteEstimator::Regression);
    Ok(RowwiseCells::new(psi, both_arms))
}

/// Full scalar pipeline: point estimate, delta matrix, variance
/// decomposition, and Wald interval.
pub fn estimate_ate(
    kind: AteEstimator,
    data: &Dataset,
    outcome: Option<&PosteriorDraws>,
    treatment: Option<&PosteriorDraws>,
    m_boot: usize,
    level: f64,
    stream: &RngStream,
) -> Result<EstimateReport> {
    validate_level(level)?;
    let cells = ate_cells(kind, data, outcome, treatment)?;
    let point = point_estimate(&cells, data.n());
    let dm = build_delta_matrix(&cells, data, m_boot, stream)?;
    let (var_outer, var_inner) = variance_estimate(&dm)?;
    Ok(assemble_report(
        kind.estimand().to_string(),
        point,
        var_outer,
        var_inner,
        level,
        m_boot,
        cells.n_draws(),
        stream,
    ))
}

fn validate_level(level: f64) -> Result<()> {
    if !level.is_finite() || level <= 0.0 || level >= 1.0 {
        return Err(Error::InvalidConfig("level must be in (0, 1)".into()));
    }
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn assemble_report(
    estimand: String,
    point: f64,
    var_outer: f64,
    var_inner: f64,
    level: f64,
    m: usize,
    b: usize,
    stream: &RngStream,
) -> EstimateReport {
    let var_total = var_outer + var_inner;
    let ci = confidence_interval(point, var_total, level);
    EstimateReport {
        estimand,
        point,
        var_outer,
        var_inner,
        var_total,
        ci,
        level,
        m,
        b,
        seed: stream.master_seed,
        diagnostics: Diagnostics {
            correction_share: if var_total > 0.0 {
                var_inner / var_total
            } else {
                0.0
            },
            degenerate_variance: var_total <= 0.0,
        },
    }
}

/// One grid point of an exposure-response curve estimate.
#[derive(Debug, Clone, Serialize)]
pub struct CurvePoint {
    pub t: f64,
    pub point: f64,
    pub var_outer: f64,
    pub var_inner: f64,
    pub var_total: f64,
    pub lo: f64,
    pub hi: f64,
}

/// Exposure-response curve estimate over a treatment grid.
#[derive(Debug, Clone, Serialize)]
pub struct CurveReport {
    pub estimand: String,
    pub level: f64,
    #[serde(rename = "M")]
    pub m: usize,
    #[serde(rename = "B")]
    pub b: usize,
    pub seed: u64,
    pub points: Vec<CurvePoint>,
}

/// How curve cells are evaluated: the doubly robust pseudo-outcome
/// regression, or direct marginalization of the outcome model.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum CurveMethod {
    DrPseudo,
    RegMarginal,
}

impl CurveMethod {
    pub fn estimand(&self) -> &'static str {
        match self {
            CurveMethod::DrPseudo => "curve_dr",
            CurveMethod::RegMarginal => "curve_reg",
        }
    }
}

/// Equally spaced grid between the q05 and q95 quantiles of T.
pub fn default_grid(t: &[f64], size: usize) -> Vec<f64> {
    let mut sorted = t.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let q = |p: f64| {
        let h = (sorted.len() as f64 - 1.0) * p;
        let lo = h.floor() as usize;
        if lo + 1 >= sorted.len() {
            sorted[sorted.len() - 1]
        } else {
            sorted[lo] + (h - lo as f64) * (sorted[lo + 1] - sorted[lo])
        }
    };
    let (lo, hi) = (q(0.05), q(0.95));
    (0..size)
        .map(|i| lo + (hi - lo) * i as f64 / (size.max(2) - 1) as f64)
        .collect()
}

/// Estimate the exposure-response curve at `grid`. Each (resample, draw)
/// cell either regresses pseudo-outcomes on a cubic in T (DR) or averages
/// the outcome model over the resampled covariate rows (regression); the
/// per-grid-point variance uses the same two-term decomposition as the
/// scalar case, and point estimates come from the original-data draws.
#[allow(clippy::too_many_arguments)]
pub fn estimate_curve(
    method: CurveMethod,
    data: &Dataset,
    outcome: &PosteriorDraws,
    treatment: Option<&PosteriorDraws>,
    grid: &[f64],
    m_boot: usize,
    level: f64,
    stream: &RngStream,
) -> Result<CurveReport> {
    validate_level(level)?;
    if data.t_kind() != VarKind::Continuous {
        return Err(Error::InvalidConfig(
            "curve estimation requires a continuous treatment".into(),
        ));
    }
    if outcome.role() != Role::Outcome {
        return Err(Error::InvalidConfig("outcome draws have the wrong role".into()));
    }
    if grid.len() < 2 {
        return Err(Error::InvalidConfig("grid needs at least 2 points".into()));
    }
    if m_boot < 2 {
        return Err(Error::TooFewRows);
    }
    let b_draws = outcome.b();
    if b_draws < 2 {
        return Err(Error::TooFewCols);
    }
    let td = match method {
        CurveMethod::DrPseudo => {
            let td = treatment
                .ok_or_else(|| Error::InvalidConfig("treatment model required".into()))?;
            if td.role() != Role::Treatment {
                return Err(Error::InvalidConfig(
                    "treatment draws have the wrong role".into(),
                ));
            }
            if td.b() != b_draws {
                return Err(Error::InvalidConfig(
                    "outcome and treatment fits must keep the same number of draws".into(),
                ));
            }
            Some(td)
        }
        CurveMethod::RegMarginal => None,
    };

    let n = data.n();
    let g = grid.len();
    let t: Vec<f64> = data.t().to_vec();
    let y: Vec<f64> = data.y().to_vec();

    // bootstrap rows are shared across draws
    let mut rows: Vec<Vec<u32>> = Vec::with_capacity(m_boot);
    for m in 0..m_boot {
        rows.push(draw_row_indices(data, stream, m, false)?);
    }
    let identity: Vec<u32> = (0..n as u32).collect();

    // per-draw cell evaluations, parallel over draws; each draw also
    // evaluates the original-data "row" for the point estimates
    let per_draw: Vec<Result<(Vec<f64>, Vec<Vec<f64>>)>> = (0..b_draws)
        .into_par_iter()
        .map(|bi| {
            let draw = &outcome.draws()[bi];
            // m(t, X_j) = a(t) + cov_part[j]
            let a_obs: Vec<f64> =
                t.iter().map(|&ti| outcome.treatment_term(bi, ti)).collect();
            let cov_part = &draw.cov_fit;

            let dens: Option<Array2<f64>> = td.map(|td| {
                let mu = td.fitted().row(bi);
                let var = td.draws()[bi].sigma2;
                let mut d = Array2::zeros((n, n));
                for i in 0..n {
                    for j in 0..n {
                        d[[i, j]] = norm_pdf(t[i], mu[j], var).max(DENSITY_FLOOR);
                    }
                }
                d
            });

            let eval_cell = |idx: &[u32]| -> Result<Vec<f64>> {
                match method {
                    CurveMethod::DrPseudo => {
                        let dens = dens.as_ref().unwrap();
                        let nn = idx.len() as f64;
                        let mut xi = Vec::with_capacity(idx.len());
                        let mut t_rows = Vec::with_capacity(idx.len());
                        let cov_mean = idx
                            .iter()
                            .map(|&j| cov_part[j as usize])
                            .sum::<f64>()
                            / nn;
                        for &iu in idx {
                            let i = iu as usize;
                            let dens_own = dens[[i, i]];
                            let dens_mean =
                                idx.iter().map(|&j| dens[[i, j as usize]]).sum::<f64>() / nn;
                            let m_own = a_obs[i] + cov_part[i];
                            let v = (y[i] - m_own) / dens_own * dens_mean + a_obs[i] + cov_mean;
                            xi.push(v);
                            t_rows.push(t[i]);
                        }
                        let fit = fit_curve(&xi, &t_rows)?;
                        Ok(fit.eval_grid(grid))
                    }
                    CurveMethod::RegMarginal => {
                        let nn = idx.len() as f64;
                        let cov_mean = idx
                            .iter()
                            .map(|&j| cov_part[j as usize])
                            .sum::<f64>()
                            / nn;
                        Ok(grid
                            .iter()
                            .map(|&gt| outcome.treatment_term(bi, gt) + cov_mean)
                            .collect())
                    }
                }
            };

            let original = eval_cell(&identity)?;
            let mut cells = Vec::with_capacity(m_boot);
            for idx in &rows {
                cells.push(eval_cell(idx)?);
            }
            Ok((original, cells))
        })
        .collect();

    let mut originals = Vec::with_capacity(b_draws);
    let mut matrices: Vec<Array2<f64>> = (0..g).map(|_| Array2::zeros((m_boot, b_draws))).collect();
    for (bi, item) in per_draw.into_iter().enumerate() {
        let (original, cells) = item?;
        originals.push(original);
        for (m, cell) in cells.iter().enumerate() {
            for (gi, &v) in cell.iter().enumerate() {
                matrices[gi][[m, bi]] = v;
            }
        }
    }

    let mut points = Vec::with_capacity(g);
    for (gi, &gt) in grid.iter().enumerate() {
        let point =
            originals.iter().map(|o| o[gi]).sum::<f64>() / b_draws as f64;
        let dm = DeltaMatrix::from_values(matrices[gi].clone());
        let (var_outer, var_inner) = variance_estimate(&dm)?;
        let var_total = var_outer + var_inner;
        let (lo, hi) = confidence_interval(point, var_total, level);
        points.push(CurvePoint {
            t: gt,
            point,
            var_outer,
            var_inner,
            var_total,
            lo,
            hi,
        });
    }
    Ok(CurveReport {
        estimand: method.estimand().to_string(),
        level,
        m: m_boot,
        b: b_draws,
        seed: stream.master_seed,
        points,
    })
}
