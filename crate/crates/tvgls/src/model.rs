//! Domain types for the time-varying AR/VAR model and the block-structured
//! matrices of its stacked regression form.
//!
//! The model is
//!
//! ```text
//! y_t = Z_t beta_t + eps_t        eps_t ~ N(0, H_t)
//! beta_t = beta_{t-1} + eta_t     eta_t ~ N(0, Q_t)
//! ```
//!
//! over the effective sample `t = p+1, ..., T` (n = T - p periods). Stacking
//! the observation rows with the random-walk rows gives one big regression
//! whose design is block diagonal in `Z_t` on top and the block
//! first-difference operator below. `C` denotes the inverse of that
//! differencing operator (block cumulative sum); neither is ever materialized
//! on the production path.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Cap on `n * k` above which the dense validation-only routines refuse to
/// build the full observation covariance.
pub const DEFAULT_DENSE_CAP: usize = 2000;

/// How intercepts enter the model.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InterceptMode {
    /// No intercept anywhere.
    None,
    /// Intercepts live inside `beta_t` (a leading column of ones in the
    /// regressor row), so they drift with the other coefficients.
    TimeVarying,
    /// A fixed intercept vector `v` estimated jointly with the path.
    TimeInvariant,
}

/// Dimensions and intercept convention; validated once, then shared by every
/// operation.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ModelSpec {
    k: usize,
    p: usize,
    t_total: usize,
    intercept: InterceptMode,
}

impl ModelSpec {
    pub fn new(k: usize, p: usize, t_total: usize, intercept: InterceptMode) -> Result<Self> {
        if k == 0 {
            return Err(Error::invalid("k", "variable count must be at least 1"));
        }
        if t_total <= p {
            return Err(Error::invalid(
                "T",
                format!("need T > p, got T = {t_total}, p = {p}"),
            ));
        }
        if t_total - p < 2 {
            return Err(Error::invalid(
                "T",
                format!("effective sample n = T - p = {} is below 2", t_total - p),
            ));
        }
        let spec = ModelSpec {
            k,
            p,
            t_total,
            intercept,
        };
        if spec.m() == 0 {
            return Err(Error::invalid(
                "p",
                "p = 0 without a time-varying intercept leaves no coefficients",
            ));
        }
        Ok(spec)
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn p(&self) -> usize {
        self.p
    }

    pub fn t_total(&self) -> usize {
        self.t_total
    }

    pub fn intercept(&self) -> InterceptMode {
        self.intercept
    }

    /// Effective sample length `n = T - p`.
    pub fn n(&self) -> usize {
        self.t_total - self.p
    }

    /// Coefficient dimension per period: `k(kp+1)` when the intercept column
    /// is part of the regressor row, `k^2 p` otherwise.
    pub fn m(&self) -> usize {
        self.k * self.regressor_len()
    }

    /// Length of the regressor row `x_t` (`Z_t = x_t' ⊗ I_k`).
    pub fn regressor_len(&self) -> usize {
        match self.intercept {
            InterceptMode::TimeVarying => self.k * self.p + 1,
            InterceptMode::None | InterceptMode::TimeInvariant => self.k * self.p,
        }
    }

    fn has_intercept_column(&self) -> bool {
        self.intercept == InterceptMode::TimeVarying
    }
}

/// The observed series: `T` vectors of length `k`.
#[derive(Debug, Clone)]
pub struct ObservationSet {
    data: Vec<DVector<f64>>,
}

impl ObservationSet {
    pub fn new(data: Vec<DVector<f64>>) -> Result<Self> {
        if data.is_empty() {
            return Err(Error::invalid("y", "observation set is empty"));
        }
        let k = data[0].len();
        for (t, y) in data.iter().enumerate() {
            if y.len() != k {
                return Err(Error::invalid(
                    "y",
                    format!("row {} has length {}, expected {}", t + 1, y.len(), k),
                ));
            }
            if y.iter().any(|v| !v.is_finite()) {
                return Err(Error::invalid(
                    "y",
                    format!("row {} contains a non-finite value", t + 1),
                ));
            }
        }
        Ok(ObservationSet { data })
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    /// Number of variables per period.
    pub fn width(&self) -> usize {
        self.data[0].len()
    }

    pub fn rows(&self) -> &[DVector<f64>] {
        &self.data
    }
}

/// A coefficient path over the effective sample, plus the fixed intercepts
/// when those are estimated separately.
#[derive(Debug, Clone)]
pub struct CoefficientPath {
    pub beta: Vec<DVector<f64>>,
    pub v: Option<DVector<f64>>,
}

impl CoefficientPath {
    pub fn n(&self) -> usize {
        self.beta.len()
    }

    pub fn m(&self) -> usize {
        self.beta.first().map_or(0, |b| b.len())
    }
}

/// The regressor row `x_t = [1?, y'_{t-1}, ..., y'_{t-p}]` for period `t`
/// (1-based); `Z_t = x_t' ⊗ I_k`.
fn regressor_row(y: &ObservationSet, spec: &ModelSpec, t: usize) -> DVector<f64> {
    let k = spec.k();
    let mut x = DVector::zeros(spec.regressor_len());
    let mut at = 0;
    if spec.has_intercept_column() {
        x[0] = 1.0;
        at = 1;
    }
    for lag in 1..=spec.p() {
        let y_lag = &y.rows()[t - 1 - lag];
        for i in 0..k {
            x[at + i] = y_lag[i];
        }
        at += k;
    }
    x
}

/// Expand a regressor row into the `k x m` design block `x' ⊗ I_k`.
fn kron_row_identity(x: &DVector<f64>, k: usize) -> DMatrix<f64> {
    let mut z = DMatrix::zeros(k, x.len() * k);
    for (j, &xj) in x.iter().enumerate() {
        for r in 0..k {
            z[(r, j * k + r)] = xj;
        }
    }
    z
}

/// Build the `n` design blocks `Z_{p+1}, ..., Z_T` from the raw series.
pub fn build_regressors(y: &ObservationSet, spec: &ModelSpec) -> Result<Vec<DMatrix<f64>>> {
    if y.len() != spec.t_total() {
        return Err(Error::invalid(
            "y",
            format!(
                "observation set has {} rows, model expects T = {}",
                y.len(),
                spec.t_total()
            ),
        ));
    }
    if y.width() != spec.k() {
        return Err(Error::invalid(
            "y",
            format!(
                "observation rows have length {}, model expects k = {}",
                y.width(),
                spec.k()
            ),
        ));
    }
    let blocks = (spec.p() + 1..=spec.t_total())
        .map(|t| kron_row_identity(&regressor_row(y, spec, t), spec.k()))
        .collect();
    Ok(blocks)
}

/// Apply the block cumulative-sum operator (turn increments into levels).
pub fn apply_c(x: &DVector<f64>, m: usize) -> Result<DVector<f64>> {
    check_block_len(x.len(), m)?;
    let mut out = x.clone();
    let n = x.len() / m;
    for t in 1..n {
        for i in 0..m {
            out[t * m + i] += out[(t - 1) * m + i];
        }
    }
    Ok(out)
}

/// Apply the block first-difference operator (inverse of [`apply_c`]).
pub fn apply_c_inverse(x: &DVector<f64>, m: usize) -> Result<DVector<f64>> {
    check_block_len(x.len(), m)?;
    let mut out = x.clone();
    let n = x.len() / m;
    for t in (1..n).rev() {
        for i in 0..m {
            let prev = out[(t - 1) * m + i];
            out[t * m + i] -= prev;
        }
    }
    Ok(out)
}

fn check_block_len(len: usize, m: usize) -> Result<()> {
    if m == 0 || len == 0 || !len.is_multiple_of(m) {
        return Err(Error::invalid(
            "x",
            format!("length {len} is not a positive multiple of block size {m}"),
        ));
    }
    Ok(())
}

/// The stacked regression system over the effective sample: design blocks,
/// per-period error covariances, the initial coefficient vector, and the
/// stacked response.
#[derive(Debug, Clone)]
pub struct StackedSystem {
    spec: ModelSpec,
    z_blocks: Vec<DMatrix<f64>>,
    h_blocks: Vec<DMatrix<f64>>,
    q_blocks: Vec<DMatrix<f64>>,
    y_blocks: Vec<DVector<f64>>,
    b0: DVector<f64>,
}

impl StackedSystem {
    /// Assemble the system with identity error weights. `b0` is the known
    /// initial coefficient vector the random walk starts from.
    pub fn new(spec: ModelSpec, y: &ObservationSet, b0: DVector<f64>) -> Result<Self> {
        let z_blocks = build_regressors(y, &spec)?;
        if b0.len() != spec.m() {
            return Err(Error::invalid(
                "b0",
                format!("length {} does not match m = {}", b0.len(), spec.m()),
            ));
        }
        let y_blocks = y.rows()[spec.p()..].to_vec();
        let h_blocks = vec![DMatrix::identity(spec.k(), spec.k()); spec.n()];
        let q_blocks = vec![DMatrix::identity(spec.m(), spec.m()); spec.n()];
        Ok(StackedSystem {
            spec,
            z_blocks,
            h_blocks,
            q_blocks,
            y_blocks,
            b0,
        })
    }

    /// Same system re-weighted with one covariance pair used for every
    /// period (the time-invariant assumption of the feasible-GLS steps).
    pub fn with_constant_weights(&self, h: &DMatrix<f64>, q: &DMatrix<f64>) -> Result<Self> {
        let n = self.n();
        self.with_weights(vec![h.clone(); n], vec![q.clone(); n])
    }

    /// Same system re-weighted with per-period covariances.
    pub fn with_weights(
        &self,
        h_blocks: Vec<DMatrix<f64>>,
        q_blocks: Vec<DMatrix<f64>>,
    ) -> Result<Self> {
        let n = self.n();
        if h_blocks.len() != n || q_blocks.len() != n {
            return Err(Error::invalid(
                "weights",
                format!(
                    "expected {} blocks, got {} H and {} Q",
                    n,
                    h_blocks.len(),
                    q_blocks.len()
                ),
            ));
        }
        for (t, h) in h_blocks.iter().enumerate() {
            check_cov_block("H", t, h, self.k())?;
        }
        for (t, q) in q_blocks.iter().enumerate() {
            check_cov_block("Q", t, q, self.m())?;
        }
        Ok(StackedSystem {
            spec: self.spec,
            z_blocks: self.z_blocks.clone(),
            h_blocks,
            q_blocks,
            y_blocks: self.y_blocks.clone(),
            b0: self.b0.clone(),
        })
    }

    pub fn spec(&self) -> &ModelSpec {
        &self.spec
    }

    pub fn n(&self) -> usize {
        self.spec.n()
    }

    pub fn k(&self) -> usize {
        self.spec.k()
    }

    pub fn m(&self) -> usize {
        self.spec.m()
    }

    pub fn z_blocks(&self) -> &[DMatrix<f64>] {
        &self.z_blocks
    }

    pub fn h_blocks(&self) -> &[DMatrix<f64>] {
        &self.h_blocks
    }

    pub fn q_blocks(&self) -> &[DMatrix<f64>] {
        &self.q_blocks
    }

    pub fn y_blocks(&self) -> &[DVector<f64>] {
        &self.y_blocks
    }

    pub fn b0(&self) -> &DVector<f64> {
        &self.b0
    }

    /// The stacked response as one vector of length `n*k`.
    pub fn y_stacked(&self) -> DVector<f64> {
        let k = self.k();
        let mut y = DVector::zeros(self.n() * k);
        for (t, block) in self.y_blocks.iter().enumerate() {
            y.rows_mut(t * k, k).copy_from(block);
        }
        y
    }

    /// The initial coefficient vector embedded at the head of an otherwise
    /// zero stacked vector of length `n*m`.
    pub fn b0_star(&self) -> DVector<f64> {
        let mut v = DVector::zeros(self.n() * self.m());
        v.rows_mut(0, self.m()).copy_from(&self.b0);
        v
    }

    /// Copy of the system with a constant vector subtracted from every
    /// response block (used to evaluate intercept-adjusted residual models).
    pub(crate) fn with_shifted_response(&self, v: &DVector<f64>) -> StackedSystem {
        let mut out = self.clone();
        for block in &mut out.y_blocks {
            *block -= v;
        }
        out
    }

    /// Enforce the dense-validation size guard.
    pub fn check_dense_cap(&self, cap: usize) -> Result<()> {
        let size = self.n() * self.k();
        if size > cap {
            return Err(Error::DenseCapExceeded { size, cap });
        }
        Ok(())
    }
}

fn check_cov_block(name: &'static str, t: usize, block: &DMatrix<f64>, dim: usize) -> Result<()> {
    if block.nrows() != dim || block.ncols() != dim {
        return Err(Error::invalid(
            "weights",
            format!(
                "{name} block {t} is {}x{}, expected {dim}x{dim}",
                block.nrows(),
                block.ncols()
            ),
        ));
    }
    let sym_tol = 1e-8 * (1.0 + block.amax());
    for i in 0..dim {
        for j in (i + 1)..dim {
            if (block[(i, j)] - block[(j, i)]).abs() > sym_tol {
                return Err(Error::invalid(
                    "weights",
                    format!("{name} block {t} is not symmetric at ({i},{j})"),
                ));
            }
        }
    }
    if block.clone().cholesky().is_none() {
        return Err(Error::invalid(
            "weights",
            format!("{name} block {t} is not positive definite"),
        ));
    }
    Ok(())
}

/// Dense observation covariance `Omega = H + Z C Q C' Z'`, for validation
/// suites only; refuses to run above `cap`.
pub fn compute_omega(sys: &StackedSystem, cap: usize) -> Result<DMatrix<f64>> {
    sys.check_dense_cap(cap)?;
    let n = sys.n();
    let k = sys.k();
    let prefixes = q_prefix_sums(sys);
    let mut omega = DMatrix::zeros(n * k, n * k);
    for s in 0..n {
        for t in 0..n {
            // (C Q C')_{s,t} is the prefix sum of Q up to min(s, t).
            let block = &sys.z_blocks()[s] * &prefixes[s.min(t)] * sys.z_blocks()[t].transpose();
            omega.view_mut((s * k, t * k), (k, k)).copy_from(&block);
        }
        let diag = omega.view((s * k, s * k), (k, k)) + &sys.h_blocks()[s];
        omega.view_mut((s * k, s * k), (k, k)).copy_from(&diag);
    }
    Ok(omega)
}

/// Prefix sums `P_r = Q_1 + ... + Q_r`; the (s,t) block of `C Q C'` is
/// `P_{min(s,t)}`.
pub(crate) fn q_prefix_sums(sys: &StackedSystem) -> Vec<DMatrix<f64>> {
    let mut prefixes = Vec::with_capacity(sys.n());
    let mut acc = DMatrix::zeros(sys.m(), sys.m());
    for q in sys.q_blocks() {
        acc += q;
        prefixes.push(acc.clone());
    }
    prefixes
}
