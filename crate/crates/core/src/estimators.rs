//! Causal estimators as pure functions of the data and fitted model values:
//! binary-treatment DR/IPW/regression estimators, the continuous-treatment
//! pseudo-outcome, and the cubic exposure-response curve fit.

use ndarray::Array2;

use crate::error::{Error, Result};
use crate::linalg::{chol_solve, cholesky};
use crate::stats::norm_pdf;

/// Propensities are clipped to [delta, 1 - delta] to enforce positivity.
pub const PROPENSITY_CLIP: f64 = 0.01;
/// Treatment-density evaluations are floored at this value.
pub const DENSITY_FLOOR: f64 = 1e-4;

/// Fitted values for a binary treatment: propensity and the two
/// counterfactual outcome means, aligned by row. Propensities are clipped at
/// construction.
#[derive(Debug, Clone)]
pub struct BinaryFitted {
    pub p1: Vec<f64>,
    pub m1: Vec<f64>,
    pub m0: Vec<f64>,
}

impl BinaryFitted {
    pub fn new(p1: Vec<f64>, m1: Vec<f64>, m0: Vec<f64>) -> Self {
        let p1 = p1
            .into_iter()
            .map(|p| p.clamp(PROPENSITY_CLIP, 1.0 - PROPENSITY_CLIP))
            .collect();
        BinaryFitted { p1, m1, m0 }
    }
}

#[inline]
fn dr_row(t: f64, y: f64, p1: f64, m1: f64, m0: f64) -> f64 {
    let p0 = 1.0 - p1;
    let w = t - p1;
    (t * y / p1 - w / p1 * m1) - ((1.0 - t) * y / p0 + w / p0 * m0)
}

/// Doubly robust ATE estimator for binary treatments.
pub fn dr_binary(t: &[f64], y: &[f64], fv: &BinaryFitted) -> f64 {
    let n = t.len() as f64;
    t.iter()
        .enumerate()
        .map(|(i, &ti)| dr_row(ti, y[i], fv.p1[i], fv.m1[i], fv.m0[i]))
        .sum::<f64>()
        / n
}

/// Per-row contributions whose mean is [`dr_binary`]; used to evaluate the
/// estimator on bootstrap row-multisets by lookup.
pub fn dr_binary_rowwise(t: &[f64], y: &[f64], fv: &BinaryFitted) -> Vec<f64> {
    t.iter()
        .enumerate()
        .map(|(i, &ti)| dr_row(ti, y[i], fv.p1[i], fv.m1[i], fv.m0[i]))
        .collect()
}

/// Inverse probability weighted estimator: the DR estimator with m == 0.
pub fn ipw_binary(t: &[f64], y: &[f64], fv: &BinaryFitted) -> f64 {
    let n = t.len() as f64;
    t.iter()
        .enumerate()
        .map(|(i, &ti)| dr_row(ti, y[i], fv.p1[i], 0.0, 0.0))
        .sum::<f64>()
        / n
}

pub fn ipw_binary_rowwise(t: &[f64], y: &[f64], fv: &BinaryFitted) -> Vec<f64> {
    t.iter()
        .enumerate()
        .map(|(i, &ti)| dr_row(ti, y[i], fv.p1[i], 0.0, 0.0))
        .collect()
}

/// Outcome-regression (g-computation) estimator: mean of m1 - m0.
pub fn reg_binary(fv: &BinaryFitted) -> f64 {
    let n = fv.m1.len() as f64;
    fv.m1.iter().zip(&fv.m0).map(|(a, b)| a - b).sum::<f64>() / n
}

pub fn reg_binary_rowwise(fv: &BinaryFitted) -> Vec<f64> {
    fv.m1.iter().zip(&fv.m0).map(|(a, b)| a - b).collect()
}

/// Fitted values for a continuous treatment, decomposed so that
/// m(t, X_j) = treatment_part(t) + cov_part[j]:
/// `m_t_at_obs[i]` is the treatment part evaluated at the observed T_i, and
/// the treatment density is Normal(mu_t[j], sigma_t^2).
#[derive(Debug, Clone)]
pub struct ContinuousFitted {
    pub mu_t: Vec<f64>,
    pub sigma_t: f64,
    pub m_t_at_obs: Vec<f64>,
    pub cov_part: Vec<f64>,
}

/// Pseudo-outcome from explicit matrices: m[i, j] = m(T_i, X_j) and
/// pi[i, j] = treatment density of T_i at covariate row j (already floored).
/// Both integrals run over the empirical covariate distribution.
pub fn pseudo_outcome_from_matrices(y: &[f64], m: &Array2<f64>, pi: &Array2<f64>) -> Vec<f64> {
    let n = y.len();
    (0..n)
        .map(|i| {
            let pi_mean = pi.row(i).sum() / n as f64;
            let m_mean = m.row(i).sum() / n as f64;
            (y[i] - m[[i, i]]) / pi[[i, i]] * pi_mean + m_mean
        })
        .collect()
}

/// Pseudo-outcome for the fitted-model decomposition; densities are floored
/// at [`DENSITY_FLOOR`].
pub fn pseudo_outcome(t: &[f64], y: &[f64], fv: &ContinuousFitted) -> Vec<f64> {
    let n = t.len();
    let var = fv.sigma_t * fv.sigma_t;
    let cov_mean = fv.cov_part.iter().sum::<f64>() / n as f64;
    (0..n)
        .map(|i| {
            let dens_own = norm_pdf(t[i], fv.mu_t[i], var).max(DENSITY_FLOOR);
            let dens_mean = fv
                .mu_t
                .iter()
                .map(|&mu| norm_pdf(t[i], mu, var).max(DENSITY_FLOOR))
                .sum::<f64>()
                / n as f64;
            let m_own = fv.m_t_at_obs[i] + fv.cov_part[i];
            (y[i] - m_own) / dens_own * dens_mean + fv.m_t_at_obs[i] + cov_mean
        })
        .collect()
}

/// Cubic polynomial fit of the exposure-response curve.
#[derive(Debug, Clone)]
pub struct CurveFit {
    pub coefs: [f64; 4],
}

impl CurveFit {
    pub fn eval(&self, t: f64) -> f64 {
        self.coefs[0] + t * (self.coefs[1] + t * (self.coefs[2] + t * self.coefs[3]))
    }

    pub fn eval_grid(&self, grid: &[f64]) -> Vec<f64> {
        grid.iter().map(|&t| self.eval(t)).collect()
    }
}

/// OLS of `xi` on (1, T, T^2, T^3) via the normal equations.
pub fn fit_curve(xi: &[f64], t: &[f64]) -> Result<CurveFit> {
    let n = t.len();
    {
        let mut distinct: Vec<f64> = t.to_vec();
        distinct.sort_by(|a, b| a.partial_cmp(b).unwrap());
        distinct.dedup();
        if distinct.len() < 4 {
            return Err(Error::RankDeficientCurve);
        }
    }
    let mut xtx = [0.0; 16];
    let mut xty = [0.0; 4];
    for i in 0..n {
        let mut pow = [1.0; 4];
        for k in 1..4 {
            pow[k] = pow[k - 1] * t[i];
        }
        for a in 0..4 {
            xty[a] += pow[a] * xi[i];
            for b in a..4 {
                xtx[a * 4 + b] += pow[a] * pow[b];
            }
        }
    }
    for a in 0..4 {
        for b in 0..a {
            xtx[a * 4 + b] = xtx[b * 4 + a];
        }
    }
    cholesky(&mut xtx, 4).map_err(|_| Error::RankDeficientCurve)?;
    chol_solve(&xtx, 4, &mut xty);
    Ok(CurveFit { coefs: xty })
}
