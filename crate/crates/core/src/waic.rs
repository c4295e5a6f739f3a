//! WAIC computation per fitted model and the min-WAIC selection rule across
//! flexibility levels.

use ndarray::Array2;
use serde::Serialize;

use crate::data::{Dataset, VarKind};
use crate::error::{Error, Result};
use crate::samplers::{PosteriorDraws, Role};
use crate::stats::{log_norm_cdf, norm_logpdf};

/// WAIC = -2 (lppd - p_waic), lower is better.
#[derive(Debug, Clone, Serialize)]
pub struct WaicResult {
    pub lppd: f64,
    pub p_waic: f64,
    pub waic: f64,
    /// Per-observation contributions -2 (lppd_i - p_waic_i).
    pub per_obs: Vec<f64>,
}

/// B x n pointwise log-likelihood of the observed response under each draw.
/// Continuous responses use the Normal density at the per-draw fitted mean
/// and sigma^2; binary responses use the Bernoulli mass at Phi(linear
/// predictor), marginalizing the probit latent variable.
pub fn pointwise_loglik(draws: &PosteriorDraws, data: &Dataset, role: Role) -> Array2<f64> {
    debug_assert_eq!(draws.role(), role);
    let response = match role {
        Role::Outcome => data.y(),
        Role::Treatment => data.t(),
    };
    let kind = match role {
        Role::Outcome => data.y_kind(),
        Role::Treatment => data.t_kind(),
    };
    let b = draws.b();
    let n = draws.n();
    let fitted = draws.fitted();
    let mut out = Array2::zeros((b, n));
    match kind {
        VarKind::Continuous => {
            let sigma2 = draws.sigma2_trace();
            for bi in 0..b {
                for i in 0..n {
                    out[[bi, i]] = norm_logpdf(response[i], fitted[[bi, i]], sigma2[bi]);
                }
            }
        }
        VarKind::Binary => {
            for bi in 0..b {
                for i in 0..n {
                    let sign = 2.0 * response[i] - 1.0;
                    out[[bi, i]] = log_norm_cdf(sign * fitted[[bi, i]]);
                }
            }
        }
    }
    out
}

/// WAIC from a B x n pointwise log-likelihood matrix, using the pointwise
/// posterior-variance penalty and log-sum-exp for the lppd.
pub fn waic(loglik: &Array2<f64>) -> Result<WaicResult> {
    let b = loglik.nrows();
    let n = loglik.ncols();
    if b < 2 {
        return Err(Error::RequiresTwoDraws);
    }
    let mut lppd = 0.0;
    let mut p_waic = 0.0;
    let mut per_obs = Vec::with_capacity(n);
    for i in 0..n {
        let col = loglik.column(i);
        let max = col.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let sum_exp: f64 = col.iter().map(|&v| (v - max).exp()).sum();
        let lppd_i = max + (sum_exp / b as f64).ln();
        let mean: f64 = col.sum() / b as f64;
        let var: f64 = col.iter().map(|&v| (v - mean) * (v - mean)).sum::<f64>() / (b as f64 - 1.0);
        lppd += lppd_i;
        p_waic += var;
        per_obs.push(-2.0 * (lppd_i - var));
    }
    Ok(WaicResult {
        lppd,
        p_waic,
        waic: -2.0 * (lppd - p_waic),
        per_obs,
    })
}

/// Index of the minimum WAIC. Inputs must be ordered from least to most
/// flexible (linear, spline, gp); exact ties resolve to the less flexible
/// family.
pub fn select_model(results: &[WaicResult]) -> usize {
    let mut best = 0;
    for (i, r) in results.iter().enumerate().skip(1) {
        if r.waic < results[best].waic {
            best = i;
        }
    }
    best
}
