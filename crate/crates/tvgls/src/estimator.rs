//! Coefficient-path estimation on the stacked regression: OLS, exact GLS,
//! the joint estimator with time-invariant intercepts, residual covariance
//! estimation, the iterated feasible-GLS pipeline, and the log-likelihood.
//!
//! The production solve path never forms the dense observation covariance:
//! the normal-equations matrix `Z'H^{-1}Z + C^{-1}'Q^{-1}C^{-1}` has `m x m`
//! blocks only on the tridiagonal, so everything runs through the
//! block-tridiagonal backend in O(n m^3).

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::linalg::{symmetrize, BlockTridiag, DenseSpd, StaircaseLs, StaircaseRows};
use crate::model::{
    CoefficientPath, InterceptMode, ModelSpec, ObservationSet, StackedSystem,
};
use crate::smoother::{dense_decomp, stacked_identity};

/// Which estimator produced a result.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    Ols,
    Fgls1,
    Fgls2,
    ExactGls,
}

impl Method {
    pub fn label(&self) -> &'static str {
        match self {
            Method::Ols => "ols",
            Method::Fgls1 => "fgls1",
            Method::Fgls2 => "fgls2",
            Method::ExactGls => "gls",
        }
    }
}

/// Time-invariant residual covariance estimates.
#[derive(Debug, Clone)]
pub struct CovEstimates {
    pub h: DMatrix<f64>,
    pub q: DMatrix<f64>,
}

impl CovEstimates {
    /// Enforce positive definiteness with the one-shot jitter policy: on a
    /// Cholesky failure add `1e-10 * (trace/dim)` to the diagonal once and
    /// retry; a second failure is a hard error. Returns whether jitter fired.
    pub fn into_spd(mut self) -> Result<(Self, bool)> {
        let fired_h = jitter_spd(&mut self.h, "H")?;
        let fired_q = jitter_spd(&mut self.q, "Q")?;
        Ok((self, fired_h || fired_q))
    }
}

fn jitter_spd(a: &mut DMatrix<f64>, context: &'static str) -> Result<bool> {
    if DenseSpd::factor(a).is_ok() {
        return Ok(false);
    }
    let dim = a.nrows() as f64;
    let bump = 1e-10 * (a.trace() / dim);
    for i in 0..a.nrows() {
        a[(i, i)] += bump;
    }
    if DenseSpd::factor(a).is_ok() {
        Ok(true)
    } else {
        Err(Error::JitterExhausted { context })
    }
}

/// A fitted coefficient path with its uncertainty, the covariance estimates
/// the fit produced, and a log-likelihood value.
///
/// For the feasible methods (`Ols`, `Fgls1`, `Fgls2`) `h_hat`/`q_hat` are
/// the residual covariance estimates after the jitter policy and `loglik`
/// is evaluated at them; this is the value the iterated procedure tracks
/// from step to step. For `ExactGls` the weights are known, so `loglik` is
/// evaluated at the weights used for the solve and `h_hat`/`q_hat` carry
/// the raw residual covariances as diagnostics.
#[derive(Debug, Clone)]
pub struct EstimateSet {
    pub method: Method,
    pub path: CoefficientPath,
    /// Covariance of the intercept estimate, when intercepts are estimated.
    pub v_cov: Option<DMatrix<f64>>,
    /// Per-period cross covariance between the path and the intercepts.
    pub beta_v_cov: Option<Vec<DMatrix<f64>>>,
    /// Per-period covariance of the estimated path.
    pub mse_blocks: Vec<DMatrix<f64>>,
    pub loglik: f64,
    pub h_hat: DMatrix<f64>,
    pub q_hat: DMatrix<f64>,
    pub jitter_fired: bool,
}

/// Whitening factor: with `A = L L'`, returns `L^{-1}` so that
/// `||L^{-1} r||^2 = r' A^{-1} r`.
fn inverse_sqrt(a: &DMatrix<f64>, pivot_base: usize) -> Result<DMatrix<f64>> {
    let chol = DenseSpd::factor(a).map_err(|e| match e {
        Error::NotPositiveDefinite { pivot } => Error::NotPositiveDefinite {
            pivot: pivot_base + pivot,
        },
        other => other,
    })?;
    let dim = a.nrows();
    let mut l_inv = DMatrix::identity(dim, dim);
    for j in 0..dim {
        let mut col = l_inv.column(j).into_owned();
        for i in 0..dim {
            let mut s = col[i];
            for t in 0..i {
                s -= chol.l()[(i, t)] * col[t];
            }
            col[i] = s / chol.l()[(i, i)];
        }
        l_inv.column_mut(j).copy_from(&col);
    }
    Ok(l_inv)
}

/// Square-root sweep over the weighted stacked regression. This is the
/// production solve: it never forms the normal equations, whose condition
/// number is the square of the stacked system's.
pub(crate) fn staircase_factor(sys: &StackedSystem) -> Result<StaircaseLs> {
    let n = sys.n();
    let k = sys.k();
    let m = sys.m();
    let mut q_inv_sqrt = Vec::with_capacity(n);
    for (t, q) in sys.q_blocks().iter().enumerate() {
        q_inv_sqrt.push(inverse_sqrt(q, t * m)?);
    }
    let prior = (q_inv_sqrt[0].clone(), &q_inv_sqrt[0] * sys.b0());
    let mut periods = Vec::with_capacity(n);
    for t in 0..n {
        let h_inv_sqrt = inverse_sqrt(&sys.h_blocks()[t], t * k)?;
        periods.push(StaircaseRows {
            design: &h_inv_sqrt * &sys.z_blocks()[t],
            target: &h_inv_sqrt * &sys.y_blocks()[t],
            diff_next: (t + 1 < n).then(|| q_inv_sqrt[t + 1].clone()),
        });
    }
    StaircaseLs::factor(prior, periods)
}

/// Assemble the block-tridiagonal normal equations and right-hand side for
/// the stacked regression under the system's weights. Used by the
/// validation suites and the Cholesky solver backend; the production solve
/// goes through [`staircase_factor`].
pub(crate) fn normal_equations(sys: &StackedSystem) -> Result<(BlockTridiag, DVector<f64>)> {
    let n = sys.n();
    let k = sys.k();
    let m = sys.m();
    let mut q_inv = Vec::with_capacity(n);
    for (t, q) in sys.q_blocks().iter().enumerate() {
        let chol = DenseSpd::factor(q).map_err(|_| Error::NotPositiveDefinite { pivot: t * m })?;
        q_inv.push(chol.inverse());
    }
    let mut diag = Vec::with_capacity(n);
    let mut sub = Vec::with_capacity(n - 1);
    let mut rhs = DVector::zeros(n * m);
    for t in 0..n {
        let h_chol =
            DenseSpd::factor(&sys.h_blocks()[t]).map_err(|_| Error::NotPositiveDefinite {
                pivot: t * k,
            })?;
        let z = &sys.z_blocks()[t];
        let hinv_z = h_chol.solve_mat(z);
        let mut d = symmetrize(&(z.transpose() * &hinv_z)) + &q_inv[t];
        if t + 1 < n {
            d += &q_inv[t + 1];
            sub.push(-q_inv[t + 1].clone());
        }
        diag.push(d);
        let w = hinv_z.transpose() * &sys.y_blocks()[t];
        rhs.rows_mut(t * m, m).copy_from(&w);
    }
    // The prior row contributes Q_1^{-1} b0 to the first block.
    let head = rhs.rows(0, m) + &q_inv[0] * sys.b0();
    rhs.rows_mut(0, m).copy_from(&head);
    Ok((BlockTridiag { diag, sub }, rhs))
}

fn split_blocks(x: &DVector<f64>, m: usize) -> Vec<DVector<f64>> {
    (0..x.len() / m).map(|t| x.rows(t * m, m).into_owned()).collect()
}

/// GLS on the stacked regression with the system's weights. For models with
/// a separate time-invariant intercept vector, the intercepts are estimated
/// jointly.
pub fn estimate_gls(sys: &StackedSystem) -> Result<EstimateSet> {
    estimate_core(sys, Method::ExactGls)
}

/// OLS: GLS with identity weights on both error blocks.
pub fn estimate_ols(sys: &StackedSystem) -> Result<EstimateSet> {
    let identity = sys.with_constant_weights(
        &DMatrix::identity(sys.k(), sys.k()),
        &DMatrix::identity(sys.m(), sys.m()),
    )?;
    estimate_core(&identity, Method::Ols)
}

/// Joint GLS for the intercept-augmented model. Requires a system built with
/// [`InterceptMode::TimeInvariant`].
pub fn estimate_with_intercepts(sys: &StackedSystem) -> Result<EstimateSet> {
    if sys.spec().intercept() != InterceptMode::TimeInvariant {
        return Err(Error::invalid(
            "intercept_mode",
            "joint intercept estimation requires the time-invariant intercept model",
        ));
    }
    estimate_core(sys, Method::ExactGls)
}

pub(crate) fn estimate_core(sys: &StackedSystem, method: Method) -> Result<EstimateSet> {
    match sys.spec().intercept() {
        InterceptMode::TimeInvariant => estimate_with_v(sys, method),
        _ => estimate_plain(sys, method),
    }
}

fn estimate_plain(sys: &StackedSystem, method: Method) -> Result<EstimateSet> {
    let solved = staircase_factor(sys).map(|fac| (fac.solve_path(), fac.inverse_diag_blocks()));
    let (beta, mse_blocks) = match solved {
        Ok(out) => out,
        // Degenerate weights can still defeat the square-root sweep; the
        // smoother route computes the identical estimator without ever
        // inverting Q, so reroute before giving up.
        Err(Error::NotPositiveDefinite { .. }) => {
            let sm = crate::smoother::smooth_recursive(sys)?;
            (sm.beta, sm.mse_blocks)
        }
        Err(other) => return Err(other),
    };
    let path = CoefficientPath { beta, v: None };
    finish_estimate(sys, method, path, None, None, mse_blocks)
}

fn estimate_with_v(sys: &StackedSystem, method: Method) -> Result<EstimateSet> {
    let n = sys.n();
    let k = sys.k();
    let m = sys.m();
    let fac = staircase_factor(sys)?;

    // Blocks of Z'H^{-1} stacked into an (n*m) x k matrix, plus the k x k
    // information aggregates of the intercept rows.
    let mut e = DMatrix::zeros(n * m, k);
    let mut sum_hinv = DMatrix::zeros(k, k);
    let mut c_y = DVector::zeros(k);
    for t in 0..n {
        let h_chol = DenseSpd::factor(&sys.h_blocks()[t])?;
        let hinv = h_chol.inverse();
        e.view_mut((t * m, 0), (m, k))
            .copy_from(&(sys.z_blocks()[t].transpose() * &hinv));
        sum_hinv += &hinv;
        c_y += &hinv * &sys.y_blocks()[t];
    }

    let x = fac.solve_normal_mat(&e);
    let u_blocks = fac.solve_path();
    let mut u = DVector::zeros(n * m);
    for (t, block) in u_blocks.iter().enumerate() {
        u.rows_mut(t * m, m).copy_from(block);
    }
    // Schur complement on the intercept block; this equals the information
    // matrix of v against the full observation covariance.
    let f = symmetrize(&(&sum_hinv - e.transpose() * &x));
    let f_chol = DenseSpd::factor(&f)?;
    let v_hat = f_chol.solve_vec(&(&c_y - e.transpose() * &u));
    let beta_stacked = &u - &x * &v_hat;
    let beta = split_blocks(&beta_stacked, m);

    let f_inv = f_chol.inverse();
    let a_inv_diag = fac.inverse_diag_blocks();
    let mut mse_blocks = Vec::with_capacity(n);
    let mut beta_v_cov = Vec::with_capacity(n);
    for (t, a_block) in a_inv_diag.iter().enumerate() {
        let x_t = x.view((t * m, 0), (m, k)).into_owned();
        let xf = &x_t * &f_inv;
        mse_blocks.push(symmetrize(&(a_block + &xf * x_t.transpose())));
        beta_v_cov.push(-xf);
    }

    let path = CoefficientPath {
        beta,
        v: Some(v_hat),
    };
    finish_estimate(sys, method, path, Some(f_inv), Some(beta_v_cov), mse_blocks)
}

fn finish_estimate(
    sys: &StackedSystem,
    method: Method,
    path: CoefficientPath,
    v_cov: Option<DMatrix<f64>>,
    beta_v_cov: Option<Vec<DMatrix<f64>>>,
    mse_blocks: Vec<DMatrix<f64>>,
) -> Result<EstimateSet> {
    let raw = residual_covariances(&path, sys);
    let (loglik, h_hat, q_hat, jitter_fired) = match method {
        Method::ExactGls => {
            let loglik = log_likelihood(sys, path.v.as_ref())?;
            (loglik, raw.h, raw.q, false)
        }
        _ => {
            let (cov, jitter_fired) = raw.into_spd()?;
            let lik_sys = sys.with_constant_weights(&cov.h, &cov.q)?;
            let loglik = log_likelihood(&lik_sys, path.v.as_ref())?;
            (loglik, cov.h, cov.q, jitter_fired)
        }
    };
    Ok(EstimateSet {
        method,
        path,
        v_cov,
        beta_v_cov,
        mse_blocks,
        loglik,
        h_hat,
        q_hat,
        jitter_fired,
    })
}

/// Time-invariant residual covariances from a fitted path: observation
/// residuals `y_t - Z_t beta_t (- v)` and state residuals, with the first
/// state residual taken against `b0`. Raw averages; no jitter applied.
pub fn residual_covariances(path: &CoefficientPath, sys: &StackedSystem) -> CovEstimates {
    let n = sys.n();
    let k = sys.k();
    let m = sys.m();
    let mut h = DMatrix::zeros(k, k);
    let mut q = DMatrix::zeros(m, m);
    for t in 0..n {
        let mut eps = &sys.y_blocks()[t] - &sys.z_blocks()[t] * &path.beta[t];
        if let Some(v) = &path.v {
            eps -= v;
        }
        h += &eps * eps.transpose();
        let eta = if t == 0 {
            &path.beta[0] - sys.b0()
        } else {
            &path.beta[t] - &path.beta[t - 1]
        };
        q += &eta * eta.transpose();
    }
    let scale = 1.0 / n as f64;
    CovEstimates {
        h: h * scale,
        q: q * scale,
    }
}

/// Log-likelihood of the observed sample under the system's weights,
/// evaluated without forming the dense observation covariance:
///
/// ```text
/// log|Omega| = log|H| + log|Q| + log|Z'H^{-1}Z + C^{-1}'Q^{-1}C^{-1}|
/// r'Omega^{-1} r = r'H^{-1}r - w'A^{-1}w,   w = Z'H^{-1}r
/// ```
///
/// with `r = Y - Z C b0* (- Iv)`. The dense twin is
/// [`log_likelihood_dense`]; the two must agree and the banded value is the
/// authoritative one.
pub fn log_likelihood(sys: &StackedSystem, v: Option<&DVector<f64>>) -> Result<f64> {
    let n = sys.n();
    let k = sys.k();
    if let Some(v) = v {
        if v.len() != k {
            return Err(Error::invalid(
                "v",
                format!("intercept vector has length {}, expected {}", v.len(), k),
            ));
        }
    }
    let shifted;
    let sys = match v {
        Some(v) => {
            shifted = sys.with_shifted_response(v);
            &shifted
        }
        None => sys,
    };
    // The sweep's minimized residual IS the quadratic form against the
    // full observation covariance: min over beta of the weighted stacked
    // residual equals (Y - ZCb0*)' Omega^{-1} (Y - ZCb0*).
    let fac = match staircase_factor(sys) {
        Ok(fac) => fac,
        // The forward filter evaluates the identical likelihood by the
        // prediction-error decomposition and never inverts Q.
        Err(Error::NotPositiveDefinite { .. }) => {
            return Ok(crate::smoother::filter_forward(sys)?.loglik);
        }
        Err(other) => return Err(other),
    };
    let mut logdet_h = 0.0;
    let mut logdet_q = 0.0;
    for t in 0..n {
        logdet_h += DenseSpd::factor(&sys.h_blocks()[t])?.log_det();
        logdet_q += DenseSpd::factor(&sys.q_blocks()[t])?.log_det();
    }
    let ln2pi = (2.0 * std::f64::consts::PI).ln();
    Ok(-0.5
        * ((n * k) as f64 * ln2pi
            + logdet_h
            + logdet_q
            + fac.log_det_normal()
            + fac.ssr()))
}

/// Dense-covariance evaluation of the same likelihood; validation only.
pub fn log_likelihood_dense(
    sys: &StackedSystem,
    v: Option<&DVector<f64>>,
    cap: usize,
) -> Result<f64> {
    let parts = dense_decomp(sys, cap)?;
    let n = sys.n();
    let k = sys.k();
    let mut r = DVector::zeros(n * k);
    for t in 0..n {
        let mut rt = &sys.y_blocks()[t] - &sys.z_blocks()[t] * sys.b0();
        if let Some(v) = v {
            rt -= v;
        }
        r.rows_mut(t * k, k).copy_from(&rt);
    }
    let alpha = parts.omega_chol.solve_vec(&r);
    let ln2pi = (2.0 * std::f64::consts::PI).ln();
    Ok(-0.5 * ((n * k) as f64 * ln2pi + parts.omega_chol.log_det() + r.dot(&alpha)))
}

/// Which variance the dense formulas should produce.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VarianceMode {
    /// Covariance of the smoothed path when the intercepts are known.
    Kalman,
    /// Covariance of the jointly estimated path, which adds the uncertainty
    /// from estimating the intercepts.
    Gls,
}

/// Dense full-path covariance under the requested convention; validation
/// only. The two modes differ by a positive-semidefinite term that vanishes
/// as the intercept information grows.
pub fn smoothed_variance(
    sys: &StackedSystem,
    mode: VarianceMode,
    cap: usize,
) -> Result<DMatrix<f64>> {
    let parts = dense_decomp(sys, cap)?;
    let base = &parts.w - parts.zw.transpose() * parts.omega_chol.solve_mat(&parts.zw);
    let base = symmetrize(&base);
    match mode {
        VarianceMode::Kalman => Ok(base),
        VarianceMode::Gls => {
            let ident = stacked_identity(sys.n(), sys.k());
            let omega_inv_i = parts.omega_chol.solve_mat(&ident);
            let f = symmetrize(&(ident.transpose() * &omega_inv_i));
            let f_chol = DenseSpd::factor(&f)?;
            let g = parts.zw.transpose() * &omega_inv_i; // (n*m) x k
            let correction = &g * f_chol.solve_mat(&g.transpose());
            Ok(symmetrize(&(base + correction)))
        }
    }
}

/// Full-sample time-invariant fit used as the default initial coefficient
/// vector: regress `y_t` on the (intercept-augmented) lag row over the whole
/// sample and lay the coefficients out to match the design blocks.
pub fn default_b0(y: &ObservationSet, spec: &ModelSpec) -> Result<DVector<f64>> {
    let k = spec.k();
    let p = spec.p();
    // Always fit with an intercept column; drop it afterwards when the
    // model keeps intercepts separate (or has none).
    let with_const = spec.intercept() != InterceptMode::None;
    let len = k * p + usize::from(with_const);
    let mut s_xx = DMatrix::zeros(len, len);
    let mut s_yx = DMatrix::zeros(k, len);
    for t in (p + 1)..=spec.t_total() {
        let mut x = DVector::zeros(len);
        let mut at = 0;
        if with_const {
            x[0] = 1.0;
            at = 1;
        }
        for lag in 1..=p {
            let row = &y.rows()[t - 1 - lag];
            for i in 0..k {
                x[at + i] = row[i];
            }
            at += k;
        }
        s_xx += &x * x.transpose();
        s_yx += &y.rows()[t - 1] * x.transpose();
    }
    let s_xx_chol = DenseSpd::factor(&s_xx)?;
    let b = s_xx_chol.solve_mat(&s_yx.transpose()).transpose(); // k x len
    let keep = match spec.intercept() {
        InterceptMode::TimeVarying => 0..len,
        InterceptMode::TimeInvariant => 1..len,
        InterceptMode::None => 0..len,
    };
    let mut b0 = DVector::zeros(spec.m());
    for (out_col, col) in keep.enumerate() {
        for r in 0..k {
            b0[out_col * k + r] = b[(r, col)];
        }
    }
    Ok(b0)
}

/// The iterated feasible-GLS procedure: an OLS pass, then up to two
/// re-weighted passes, each using the covariance estimates produced by the
/// previous one. `steps = 0` returns the OLS fit alone.
pub fn fgls_pipeline(
    y: &ObservationSet,
    spec: &ModelSpec,
    steps: usize,
    b0: Option<DVector<f64>>,
) -> Result<Vec<EstimateSet>> {
    if steps > 2 {
        return Err(Error::invalid("steps", "steps must be 0, 1, or 2"));
    }
    let b0 = match b0 {
        Some(b0) => b0,
        None => default_b0(y, spec)?,
    };
    let base = StackedSystem::new(*spec, y, b0)?;
    let mut out = Vec::with_capacity(steps + 1);
    out.push(estimate_core(&base, Method::Ols)?);
    if steps >= 1 {
        let sys1 = base.with_constant_weights(&out[0].h_hat, &out[0].q_hat)?;
        out.push(estimate_core(&sys1, Method::Fgls1)?);
    }
    if steps >= 2 {
        let sys2 = base.with_constant_weights(&out[1].h_hat, &out[1].q_hat)?;
        out.push(estimate_core(&sys2, Method::Fgls2)?);
    }
    Ok(out)
}
