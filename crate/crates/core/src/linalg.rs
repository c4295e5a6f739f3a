//! Small dense symmetric solves used in the Gibbs updates and cubic curve
//! fits. Matrices here are tiny (treatment blocks and spline coefficient
//! blocks), stored row-major.

use crate::error::{Error, Result};

/// In-place Cholesky of a d x d SPD matrix (row-major); lower triangle of the
/// result holds L, the upper triangle is left stale.
pub fn cholesky(a: &mut [f64], d: usize) -> Result<()> {
    for i in 0..d {
        for j in 0..=i {
            let mut s = a[i * d + j];
            for k in 0..j {
                s -= a[i * d + k] * a[j * d + k];
            }
            if i == j {
                if s <= 0.0 {
                    return Err(Error::Numeric("matrix not positive definite".into()));
                }
                a[i * d + i] = s.sqrt();
            } else {
                a[i * d + j] = s / a[j * d + j];
            }
        }
    }
    Ok(())
}

/// Solve L L' x = b in place given the factor from [`cholesky`].
pub fn chol_solve(l: &[f64], d: usize, b: &mut [f64]) {
    for i in 0..d {
        let mut s = b[i];
        for k in 0..i {
            s -= l[i * d + k] * b[k];
        }
        b[i] = s / l[i * d + i];
    }
    for i in (0..d).rev() {
        let mut s = b[i];
        for k in (i + 1)..d {
            s -= l[k * d + i] * b[k];
        }
        b[i] = s / l[i * d + i];
    }
}

/// Solve L' x = b in place; used to turn iid normals into a draw with
/// covariance (L L')^-1.
pub fn chol_lt_solve(l: &[f64], d: usize, b: &mut [f64]) {
    for i in (0..d).rev() {
        let mut s = b[i];
        for k in (i + 1)..d {
            s -= l[k * d + i] * b[k];
        }
        b[i] = s / l[i * d + i];
    }
}

/// log det(L L') = 2 sum log L_ii.
pub fn chol_logdet(l: &[f64], d: usize) -> f64 {
    (0..d).map(|i| l[i * d + i].ln()).sum::<f64>() * 2.0
}
