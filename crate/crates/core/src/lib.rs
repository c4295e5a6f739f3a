//! Bayesian doubly robust estimation of causal effects in high dimensions.
//!
//! The crate fits sparse Bayesian treatment and outcome models (spike-and-slab
//! priors over linear, spline, or Gaussian-process covariate effects), plugs
//! posterior draws into doubly robust / IPW / regression estimators, and
//! quantifies uncertainty by evaluating each estimator over a grid of
//! bootstrap resamples times posterior draws.

pub mod bases;
pub mod data;
pub mod error;
pub mod estimators;
pub mod inference;
mod linalg;
pub mod pipeline;
pub mod samplers;
pub mod sim;
pub mod stats;
pub mod waic;

pub use data::{BootstrapIndex, Dataset, DatasetView, RngStream, VarKind};
pub use error::{Error, Result};
pub use samplers::{fit_model, McmcConfig, PosteriorDraws, PriorFamily, PriorSpec, Role};
