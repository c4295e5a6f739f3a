//! Precomputed per-covariate design information shared by treatment and
//! outcome model fits on the same dataset.

use ndarray::{Array1, Array2};
use rayon::prelude::*;

use crate::bases::{gp_kernel, spline_basis, GpKernel};
use crate::data::Dataset;
use crate::error::Result;
use crate::samplers::PriorFamily;

pub enum CovariateRep {
    Linear { x: Array1<f64>, xtx: f64 },
    Spline { basis: Array2<f64>, gram: Array2<f64> },
    Gp { kernel: GpKernel },
}

impl CovariateRep {
    /// Effect dimension: q coefficients, or n function values for a GP.
    pub fn effect_len(&self, n: usize) -> usize {
        match self {
            CovariateRep::Linear { .. } => 1,
            CovariateRep::Spline { basis, .. } => basis.ncols(),
            CovariateRep::Gp { .. } => n,
        }
    }
}

/// Covariate representations for one prior family on one dataset. Building
/// this is the expensive part for GP priors (p kernel eigendecompositions),
/// so it is shared between the treatment and outcome fits.
pub struct ModelDesign {
    pub family: PriorFamily,
    pub reps: Vec<CovariateRep>,
    pub n: usize,
}

impl ModelDesign {
    pub fn build(data: &Dataset, family: PriorFamily) -> Result<Self> {
        let n = data.n();
        let reps: Vec<Result<CovariateRep>> = (0..data.p())
            .into_par_iter()
            .map(|j| {
                let col = data.x().column(j);
                Ok(match family {
                    PriorFamily::Linear => {
                        let x = col.to_owned();
                        let xtx = x.dot(&x);
                        CovariateRep::Linear { x, xtx }
                    }
                    PriorFamily::Spline { df } => {
                        let b = spline_basis(col, df)?;
                        let basis = b.values().clone();
                        let gram = basis.t().dot(&basis);
                        CovariateRep::Spline { basis, gram }
                    }
                    PriorFamily::Gp { phi } => CovariateRep::Gp {
                        kernel: gp_kernel(col, phi)?,
                    },
                })
            })
            .collect();
        let reps = reps.into_iter().collect::<Result<Vec<_>>>()?;
        Ok(ModelDesign { family, reps, n })
    }

    pub fn p(&self) -> usize {
        self.reps.len()
    }
}
