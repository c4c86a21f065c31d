//! Two independent routes to the smoothed coefficient path: a direct
//! conditional-expectation formula working on the dense observation
//! covariance (validation-capped), and a forward filter with a
//! fixed-interval backward pass that scales to long samples.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::linalg::{symmetrize, DenseSpd};
use crate::model::{compute_omega, q_prefix_sums, StackedSystem};

/// Smoothed path with per-period uncertainty.
#[derive(Debug, Clone)]
pub struct SmoothedResult {
    pub beta: Vec<DVector<f64>>,
    /// Per-period covariance of the smoothed coefficients.
    pub mse_blocks: Vec<DMatrix<f64>>,
    /// Full covariance across periods; only the dense route produces it.
    pub full_mse: Option<DMatrix<f64>>,
    pub loglik: f64,
}

/// Gaussian conditioning: given joint moments of (b, y), return the mean and
/// variance of b conditional on the observed deviation `y - E[y]`.
pub fn regression_lemma(
    mean_b: &DVector<f64>,
    cov_b: &DMatrix<f64>,
    cov_by: &DMatrix<f64>,
    cov_y: &DMatrix<f64>,
    y_dev: &DVector<f64>,
) -> Result<(DVector<f64>, DMatrix<f64>)> {
    let chol = DenseSpd::factor(cov_y)?;
    let gain = chol.solve_mat(&cov_by.transpose()).transpose(); // Cov(b,y) Var(y)^{-1}
    let cond_mean = mean_b + &gain * y_dev;
    let cond_var = symmetrize(&(cov_b - &gain * cov_by.transpose()));
    Ok((cond_mean, cond_var))
}

/// The stacked identity map `[I_k; I_k; ...; I_k]` ((n*k) x k) carrying a
/// fixed intercept into every observation row.
pub fn stacked_identity(n: usize, k: usize) -> DMatrix<f64> {
    let mut ident = DMatrix::zeros(n * k, k);
    for t in 0..n {
        ident
            .view_mut((t * k, 0), (k, k))
            .copy_from(&DMatrix::identity(k, k));
    }
    ident
}

/// Dense pieces shared by the validation-only routes: the factorized
/// observation covariance, `Z (CQC')`, and `CQC'` itself.
pub(crate) struct DenseDecomp {
    pub omega_chol: DenseSpd,
    pub zw: DMatrix<f64>,
    pub w: DMatrix<f64>,
}

pub(crate) fn dense_decomp(sys: &StackedSystem, cap: usize) -> Result<DenseDecomp> {
    sys.check_dense_cap(cap)?;
    let n = sys.n();
    let k = sys.k();
    let m = sys.m();
    let omega = compute_omega(sys, cap)?;
    let omega_chol = DenseSpd::factor(&omega)?;
    let prefixes = q_prefix_sums(sys);
    let mut zw = DMatrix::zeros(n * k, n * m);
    let mut w = DMatrix::zeros(n * m, n * m);
    for t in 0..n {
        for s in 0..n {
            // (CQC')_{t,s} is the prefix sum of Q up to min(t, s).
            let p_min = &prefixes[t.min(s)];
            zw.view_mut((t * k, s * m), (k, m))
                .copy_from(&(&sys.z_blocks()[t] * p_min));
            w.view_mut((t * m, s * m), (m, m)).copy_from(p_min);
        }
    }
    Ok(DenseDecomp { omega_chol, zw, w })
}

/// Smoothed path from the dense conditional-expectation formula
/// `Cb0* + CQC'Z' Omega^{-1} (Y - Z C b0*)`, with covariance
/// `CQC' - CQC'Z' Omega^{-1} Z CQC'`. Validation-capped.
pub fn smooth_direct(sys: &StackedSystem, cap: usize) -> Result<SmoothedResult> {
    let parts = dense_decomp(sys, cap)?;
    let n = sys.n();
    let k = sys.k();
    let m = sys.m();

    // Residual against the prior path, which sits at b0 in every period.
    let mut resid = DVector::zeros(n * k);
    for t in 0..n {
        let r = &sys.y_blocks()[t] - &sys.z_blocks()[t] * sys.b0();
        resid.rows_mut(t * k, k).copy_from(&r);
    }

    let alpha = parts.omega_chol.solve_vec(&resid);
    let correction = parts.zw.transpose() * &alpha;
    let mut beta = Vec::with_capacity(n);
    for t in 0..n {
        beta.push(sys.b0() + correction.rows(t * m, m).into_owned());
    }

    let omega_inv_zw = parts.omega_chol.solve_mat(&parts.zw);
    let full = symmetrize(&(&parts.w - parts.zw.transpose() * omega_inv_zw));
    let mse_blocks = (0..n)
        .map(|t| full.view((t * m, t * m), (m, m)).into_owned())
        .collect();

    let loglik = -0.5
        * ((n * k) as f64 * (2.0 * std::f64::consts::PI).ln()
            + parts.omega_chol.log_det()
            + resid.dot(&alpha));

    Ok(SmoothedResult {
        beta,
        mse_blocks,
        full_mse: Some(full),
        loglik,
    })
}

/// One step of the forward filter, kept for the backward pass.
#[derive(Debug, Clone)]
struct FilterStep {
    predicted_mean: DVector<f64>,
    predicted_cov: DMatrix<f64>,
    filtered_mean: DVector<f64>,
    filtered_cov: DMatrix<f64>,
}

/// Forward filtering result over the effective sample.
#[derive(Debug, Clone)]
pub struct FilterResult {
    pub filtered: Vec<DVector<f64>>,
    pub filtered_cov: Vec<DMatrix<f64>>,
    pub loglik: f64,
    steps: Vec<FilterStep>,
}

/// Run the forward filter. The coefficient transition is the identity with
/// state noise `Q_t`; the initial state is pinned at `b0` with zero
/// covariance.
pub fn filter_forward(sys: &StackedSystem) -> Result<FilterResult> {
    let n = sys.n();
    let k = sys.k();
    let m = sys.m();
    let mut mean = sys.b0().clone();
    let mut cov = DMatrix::zeros(m, m);
    let mut steps = Vec::with_capacity(n);
    let mut loglik = 0.0;
    let ln2pi = (2.0 * std::f64::consts::PI).ln();

    for t in 0..n {
        let predicted_mean = mean.clone();
        let predicted_cov = symmetrize(&(&cov + &sys.q_blocks()[t]));

        let z = &sys.z_blocks()[t];
        let innovation = &sys.y_blocks()[t] - z * &predicted_mean;
        let pz_t = &predicted_cov * z.transpose();
        let f = symmetrize(&(z * &pz_t + &sys.h_blocks()[t]));
        let f_chol = DenseSpd::factor(&f).map_err(|_| Error::FilterDiverged { step: t })?;

        let gain = f_chol.solve_mat(&pz_t.transpose()).transpose(); // P Z' F^{-1}
        mean = &predicted_mean + &gain * &innovation;

        // Joseph-form update keeps the covariance symmetric PSD.
        let i_kz = DMatrix::identity(m, m) - &gain * z;
        cov = &i_kz * &predicted_cov * i_kz.transpose()
            + &gain * &sys.h_blocks()[t] * gain.transpose();
        cov = symmetrize(&cov);

        let alpha = f_chol.solve_vec(&innovation);
        loglik -= 0.5 * (k as f64 * ln2pi + f_chol.log_det() + innovation.dot(&alpha));

        steps.push(FilterStep {
            predicted_mean,
            predicted_cov,
            filtered_mean: mean.clone(),
            filtered_cov: cov.clone(),
        });
    }

    Ok(FilterResult {
        filtered: steps.iter().map(|s| s.filtered_mean.clone()).collect(),
        filtered_cov: steps.iter().map(|s| s.filtered_cov.clone()).collect(),
        loglik,
        steps,
    })
}

/// Fixed-interval smoothing: forward filter plus backward recursion. Agrees
/// with [`smooth_direct`] wherever the dense route is allowed to run, and
/// scales to arbitrary sample lengths.
pub fn smooth_recursive(sys: &StackedSystem) -> Result<SmoothedResult> {
    let filter = filter_forward(sys)?;
    let n = sys.n();
    let steps = &filter.steps;

    let mut beta = vec![DVector::zeros(sys.m()); n];
    let mut mse = vec![DMatrix::zeros(sys.m(), sys.m()); n];
    beta[n - 1] = steps[n - 1].filtered_mean.clone();
    mse[n - 1] = steps[n - 1].filtered_cov.clone();

    for t in (0..n - 1).rev() {
        let next = &steps[t + 1];
        let pred_chol = DenseSpd::factor(&next.predicted_cov)
            .map_err(|_| Error::FilterDiverged { step: t + 1 })?;
        // Smoother gain J = P_{t|t} (P_{t+1|t})^{-1}; transition is identity.
        let j = pred_chol
            .solve_mat(&steps[t].filtered_cov.transpose())
            .transpose();
        beta[t] = &steps[t].filtered_mean + &j * (&beta[t + 1] - &next.predicted_mean);
        let dp = &mse[t + 1] - &next.predicted_cov;
        mse[t] = symmetrize(&(&steps[t].filtered_cov + &j * dp * j.transpose()));
    }

    Ok(SmoothedResult {
        beta,
        mse_blocks: mse,
        full_mse: None,
        loglik: filter.loglik,
    })
}
