//! Sparse autoregressive modelling by penalized conditional maximum likelihood.
//!
//! The crate fits AR(p) models `X_t = φ_1 X_{t-1} + … + φ_p X_{t-p} + Z_t` with
//! Gaussian or Student-t innovations, selecting lags and estimating
//! coefficients at once through a SCAD or LASSO penalty. The penalized
//! problem is solved by the one-step local linear approximation: an
//! unpenalized pilot fit sets per-lag ℓ₁ weights, and a weighted-ℓ₁ proximal
//! Newton solver produces exact zeros.
//!
//! Around the estimator sit the pieces needed to study it: stationary
//! simulation, a holdout tuner, sandwich standard errors, an FPE order
//! selection baseline, k-step forecast scoring and a reproducible Monte Carlo
//! harness.

pub mod ar;
pub mod error;
pub mod estimator;
pub mod forecast;
pub mod innovations;
pub mod io;
pub mod likelihood;
pub mod montecarlo;
pub mod numeric;
pub mod penalty;
pub mod selection;

pub use ar::{check_causality, sample_autocov, simulate, theoretical_autocov, ArModel, AutocovKernel, Causality, TimeSeries};
pub use error::{Error, Result};
pub use estimator::{
    fit_mle, fit_pcmle, gaussian_scale_estimate, sandwich_se, solve_weighted_l1, tune, FitOptions, FitResult, Method, TuningGrid,
};
pub use innovations::InnovationFamily;
pub use likelihood::ConditionalLikelihood;
pub use penalty::{Penalty, PenaltyKind};
