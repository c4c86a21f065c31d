//! GLS-based estimation of time-varying AR/VAR coefficient paths.
//!
//! A model whose coefficient vector follows a random walk,
//!
//! ```text
//! y_t = Z_t beta_t + eps_t
//! beta_t = beta_{t-1} + eta_t
//! ```
//!
//! can be estimated by stacking the observation rows with the random-walk
//! rows into one large regression and solving it by (feasible) generalized
//! least squares. The resulting path equals the fixed-interval Kalman
//! smoother output, but needs no filtering recursions and extends naturally
//! to jointly estimated fixed intercepts, non-Gaussian coefficient
//! innovations, and heteroskedastic observation noise.
//!
//! The crate provides:
//!
//! - [`model`]: the model dimensions, the stacked system, and the
//!   structure-exploiting operators (nothing dense is materialized on the
//!   production path);
//! - [`smoother`]: the direct conditional-expectation smoother and an
//!   independent forward-filter/backward-smoother implementation;
//! - [`estimator`]: OLS/GLS on the stacked regression, joint intercept
//!   estimation, residual covariances, the iterated feasible-GLS pipeline,
//!   and the log-likelihood (banded and dense evaluations);
//! - [`simulation`]: the Monte Carlo study with Gaussian, mixture, and
//!   stochastic-volatility error regimes plus the accuracy metric tables;
//! - [`validate`]: the numerical identity suite tying all routes together;
//! - [`cli`]: the `tvgls` binary's subcommands.
//!
//! Start with the runnable examples (`cargo run --release --example
//! smoother_equivalence`) for end-to-end usage.

pub mod cli;
pub mod csvio;
pub mod error;
pub mod estimator;
pub mod linalg;
pub mod model;
pub mod simulation;
pub mod smoother;
pub mod validate;

pub use error::{Error, Result};
pub use estimator::{
    default_b0, estimate_gls, estimate_ols, estimate_with_intercepts, fgls_pipeline,
    log_likelihood, log_likelihood_dense, residual_covariances, smoothed_variance, CovEstimates,
    EstimateSet, Method, VarianceMode,
};
pub use model::{
    apply_c, apply_c_inverse, build_regressors, compute_omega, CoefficientPath, InterceptMode,
    ModelSpec, ObservationSet, StackedSystem, DEFAULT_DENSE_CAP,
};
pub use simulation::{
    compute_metrics, lower_median, run_replications, sample_mixture, simulate_replication,
    simulate_tvvar, DgpConfig, ErrorKind, MetricTable, MixtureParams, RepMetrics, SimulatedPath,
    SvParams,
};
pub use smoother::{
    filter_forward, regression_lemma, smooth_direct, smooth_recursive, stacked_identity,
    FilterResult, SmoothedResult,
};
pub use validate::{run_identity_suite, IdentityCheck, SuiteConfig};
