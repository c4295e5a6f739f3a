//! Design representations for the three flexibility levels: identity
//! (linear), spline bases, and Gaussian-process kernel matrices with
//! eigendecomposition precomputed so MCMC never inverts an n x n matrix.

use nalgebra::DMatrix;
use ndarray::{Array1, Array2, ArrayView1};

use crate::error::{Error, Result};

/// Eigenvalues below this are floored before any reciprocal is taken;
/// exponential kernels on nearly-duplicated points are numerically
/// rank-deficient.
pub const EIG_FLOOR: f64 = 1e-12;

/// Centered spline basis for one covariate.
#[derive(Debug, Clone)]
pub struct SplineBasis {
    values: Array2<f64>,
    knots: Vec<f64>,
    boundary: (f64, f64),
    col_means: Vec<f64>,
}

impl SplineBasis {
    /// n x df matrix of centered basis values.
    pub fn values(&self) -> &Array2<f64> {
        &self.values
    }

    pub fn df(&self) -> usize {
        self.values.ncols()
    }

    /// Full knot vector (boundary knots repeated degree+1 times); empty for
    /// the polynomial fallback used when df < 3.
    pub fn knots(&self) -> &[f64] {
        &self.knots
    }

    pub fn boundary(&self) -> (f64, f64) {
        self.boundary
    }

    pub fn col_means(&self) -> &[f64] {
        &self.col_means
    }
}

/// Cubic B-spline basis with `df` columns and interior knots at equispaced
/// quantiles, columns centered so a global intercept stays identifiable.
/// For df < 3 a centered polynomial basis of that degree is used instead.
pub fn spline_basis(x: ArrayView1<'_, f64>, df: usize) -> Result<SplineBasis> {
    let n = x.len();
    if df < 1 {
        return Err(Error::InvalidConfig("spline df must be >= 1".into()));
    }
    let lo = x.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = x.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if !lo.is_finite() || !hi.is_finite() || hi <= lo {
        return Err(Error::ZeroVarianceColumn(0));
    }

    let (mut values, knots) = if df < 3 {
        let mut v = Array2::zeros((n, df));
        for (i, &xi) in x.iter().enumerate() {
            for k in 0..df {
                v[[i, k]] = xi.powi(k as i32 + 1);
            }
        }
        (v, Vec::new())
    } else {
        let degree = 3usize;
        let n_interior = df - 3;
        let mut sorted: Vec<f64> = x.to_vec();
        sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let interior: Vec<f64> = (1..=n_interior)
            .map(|k| quantile_type7(&sorted, k as f64 / (n_interior as f64 + 1.0)))
            .collect();
        let mut knots = Vec::with_capacity(2 * (degree + 1) + n_interior);
        knots.extend(std::iter::repeat_n(lo, degree + 1));
        knots.extend(interior);
        knots.extend(std::iter::repeat_n(hi, degree + 1));
        let nbasis = knots.len() - degree - 1; // df + 1 including the dropped one
        let mut v = Array2::zeros((n, df));
        let mut row = vec![0.0; nbasis];
        for (i, &xi) in x.iter().enumerate() {
            bspline_row(&knots, degree, xi, &mut row);
            // drop the first basis function; its span is absorbed by the intercept
            for k in 0..df {
                v[[i, k]] = row[k + 1];
            }
        }
        (v, knots)
    };

    let mut col_means = Vec::with_capacity(values.ncols());
    for mut col in values.columns_mut() {
        let mean = col.sum() / n as f64;
        col.mapv_inplace(|v| v - mean);
        col_means.push(mean);
    }
    Ok(SplineBasis {
        values,
        knots,
        boundary: (lo, hi),
        col_means,
    })
}

/// Type-7 quantile of pre-sorted data.
fn quantile_type7(sorted: &[f64], p: f64) -> f64 {
    let n = sorted.len();
    let h = (n as f64 - 1.0) * p;
    let lo = h.floor() as usize;
    if lo + 1 >= n {
        return sorted[n - 1];
    }
    sorted[lo] + (h - lo as f64) * (sorted[lo + 1] - sorted[lo])
}

/// All B-spline basis values at `x` written into `row` (length = number of
/// basis functions). Iterative de Boor triangle over the active span.
fn bspline_row(knots: &[f64], degree: usize, x: f64, row: &mut [f64]) {
    let nbasis = knots.len() - degree - 1;
    row.iter_mut().for_each(|v| *v = 0.0);
    // locate span, clamping into the valid range so the right boundary is closed
    let x = x.clamp(knots[degree], knots[nbasis]);
    let mut span = nbasis - 1;
    for i in degree..nbasis {
        if x < knots[i + 1] {
            span = i;
            break;
        }
    }
    let mut n = vec![0.0; degree + 1];
    let mut left = vec![0.0; degree + 1];
    let mut right = vec![0.0; degree + 1];
    n[0] = 1.0;
    for j in 1..=degree {
        left[j] = x - knots[span + 1 - j];
        right[j] = knots[span + j] - x;
        let mut saved = 0.0;
        for r in 0..j {
            let denom = right[r + 1] + left[j - r];
            let temp = if denom != 0.0 { n[r] / denom } else { 0.0 };
            n[r] = saved + right[r + 1] * temp;
            saved = left[j - r] * temp;
        }
        n[j] = saved;
    }
    for (r, &v) in n.iter().enumerate() {
        row[span - degree + r] = v;
    }
}

/// Exponential-kernel covariance for one covariate, with its
/// eigendecomposition attached.
#[derive(Debug, Clone)]
pub struct GpKernel {
    sigma: Array2<f64>,
    eigvecs: Array2<f64>,
    eigvals: Vec<f64>,
    phi: f64,
}

impl GpKernel {
    /// Eigendecompose an already-built symmetric PSD covariance matrix.
    /// Eigenvalues are clamped at zero and sorted descending.
    pub fn from_covariance(sigma: Array2<f64>) -> Result<GpKernel> {
        let n = sigma.nrows();
        if n != sigma.ncols() {
            return Err(Error::Numeric("kernel matrix must be square".into()));
        }
        let m = DMatrix::from_fn(n, n, |i, j| sigma[[i, j]]);
        let eig = m.symmetric_eigen();
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| eig.eigenvalues[b].partial_cmp(&eig.eigenvalues[a]).unwrap());
        let mut eigvecs = Array2::zeros((n, n));
        let mut eigvals = Vec::with_capacity(n);
        for (k, &idx) in order.iter().enumerate() {
            eigvals.push(eig.eigenvalues[idx].max(0.0));
            for i in 0..n {
                eigvecs[[i, k]] = eig.eigenvectors[(i, idx)];
            }
        }
        Ok(GpKernel {
            sigma,
            eigvecs,
            eigvals,
            phi: f64::NAN,
        })
    }

    pub fn n(&self) -> usize {
        self.sigma.nrows()
    }

    pub fn sigma(&self) -> &Array2<f64> {
        &self.sigma
    }

    /// Orthogonal eigenvector matrix A (columns ordered by descending eigenvalue).
    pub fn eigvecs(&self) -> &Array2<f64> {
        &self.eigvecs
    }

    /// Eigenvalues, descending, clamped at zero.
    pub fn eigvals(&self) -> &[f64] {
        &self.eigvals
    }

    pub fn phi(&self) -> f64 {
        self.phi
    }

    /// A' v in the eigenbasis.
    pub fn to_eigenbasis(&self, v: ArrayView1<'_, f64>) -> Array1<f64> {
        self.eigvecs.t().dot(&v)
    }

    /// A v back from the eigenbasis.
    pub fn from_eigenbasis(&self, v: ArrayView1<'_, f64>) -> Array1<f64> {
        self.eigvecs.dot(&v)
    }

    /// log det of Sigma with floored eigenvalues.
    pub fn log_det(&self) -> f64 {
        self.eigvals.iter().map(|&b| b.max(EIG_FLOOR).ln()).sum()
    }
}

/// Build the kernel matrix K(z, z') = exp(-|z - z'| / phi) for one covariate.
pub fn gp_kernel(x: ArrayView1<'_, f64>, phi: f64) -> Result<GpKernel> {
    if !phi.is_finite() || phi <= 0.0 {
        return Err(Error::NonPositiveBandwidth);
    }
    let n = x.len();
    let mut sigma = Array2::zeros((n, n));
    for i in 0..n {
        sigma[[i, i]] = 1.0;
        for j in (i + 1)..n {
            let v = (-(x[i] - x[j]).abs() / phi).exp();
            sigma[[i, j]] = v;
            sigma[[j, i]] = v;
        }
    }
    let mut kernel = GpKernel::from_covariance(sigma)?;
    kernel.phi = phi;
    Ok(kernel)
}

/// (I + Sigma^-1 / tau2)^-1 computed in the eigenbasis, so only a diagonal is
/// inverted. Eigenvalues are floored at [`EIG_FLOOR`] first. The result is
/// exactly symmetric.
pub fn woodbury_inverse(kernel: &GpKernel, tau2: f64) -> Array2<f64> {
    let n = kernel.n();
    debug_assert!(tau2 > 0.0);
    // scale columns of A by sqrt(d_i), then S = As As'
    let mut scaled = kernel.eigvecs.clone();
    for (k, mut col) in scaled.columns_mut().into_iter().enumerate() {
        let b = kernel.eigvals[k].max(EIG_FLOOR);
        let d = tau2 * b / (tau2 * b + 1.0);
        let s = d.sqrt();
        col.mapv_inplace(|v| v * s);
    }
    let mut out = Array2::zeros((n, n));
    for i in 0..n {
        let ri = scaled.row(i);
        for j in i..n {
            let v = ri.dot(&scaled.row(j));
            out[[i, j]] = v;
            out[[j, i]] = v;
        }
    }
    out
}
