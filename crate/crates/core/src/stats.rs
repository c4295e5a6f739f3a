//! Shared scalar probability helpers.

use statrs::distribution::{ContinuousCDF, Normal};
use statrs::function::erf::erfc;

pub const LN_2PI: f64 = 1.837877066409345483560659472811;

/// Standard normal CDF.
pub fn norm_cdf(x: f64) -> f64 {
    0.5 * erfc(-x / std::f64::consts::SQRT_2)
}

/// log of the standard normal CDF, stable far into the left tail.
pub fn log_norm_cdf(x: f64) -> f64 {
    if x >= -10.0 {
        norm_cdf(x).ln()
    } else {
        // Mills-ratio asymptotic expansion
        let x2 = x * x;
        let series = 1.0 - 1.0 / x2 + 3.0 / (x2 * x2) - 15.0 / (x2 * x2 * x2)
            + 105.0 / (x2 * x2 * x2 * x2);
        -0.5 * x2 - (-x).ln() - 0.5 * LN_2PI + series.ln()
    }
}

/// Standard normal quantile.
pub fn norm_quantile(p: f64) -> f64 {
    Normal::standard().inverse_cdf(p)
}

/// Normal density with mean `mu` and variance `var`.
pub fn norm_pdf(x: f64, mu: f64, var: f64) -> f64 {
    let r = x - mu;
    (-0.5 * r * r / var).exp() / (2.0 * std::f64::consts::PI * var).sqrt()
}

/// Normal log-density with mean `mu` and variance `var`.
pub fn norm_logpdf(x: f64, mu: f64, var: f64) -> f64 {
    let r = x - mu;
    -0.5 * (LN_2PI + var.ln()) - 0.5 * r * r / var
}
