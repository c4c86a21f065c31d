//! Numerical identity suite: the equivalence of the GLS solve with both
//! smoother routes, the intercept-estimator identities, the partitioned
//! coefficient-weight reductions behind them, and the solver/likelihood
//! dual-path agreements. Every check reports its worst deviation over a set
//! of randomly drawn instances so a regression localizes to one identity.

use nalgebra::{DMatrix, DVector};
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::estimator::{
    estimate_gls, estimate_with_intercepts, log_likelihood, log_likelihood_dense,
    normal_equations, smoothed_variance, VarianceMode,
};
use crate::linalg::DenseSpd;
use crate::model::{
    apply_c, apply_c_inverse, compute_omega, InterceptMode, ModelSpec, ObservationSet,
    StackedSystem, DEFAULT_DENSE_CAP,
};
use crate::smoother::{smooth_direct, smooth_recursive, stacked_identity};

/// Outcome of one identity check, aggregated over all instances.
#[derive(Debug, Clone)]
pub struct IdentityCheck {
    pub name: &'static str,
    pub max_dev: f64,
    pub tol: f64,
}

impl IdentityCheck {
    pub fn passed(&self) -> bool {
        self.max_dev.is_finite() && self.max_dev <= self.tol
    }
}

/// Suite configuration.
#[derive(Debug, Clone)]
pub struct SuiteConfig {
    pub instances: usize,
    pub seed: u64,
    pub cap: usize,
    /// When set, replaces every check's own tolerance.
    pub tol_override: Option<f64>,
}

impl Default for SuiteConfig {
    fn default() -> Self {
        SuiteConfig {
            instances: 25,
            seed: 1,
            cap: DEFAULT_DENSE_CAP,
            tol_override: None,
        }
    }
}

/// Randomly drawn instance dimensions.
#[derive(Debug, Clone, Copy)]
pub struct InstanceDims {
    pub k: usize,
    pub p: usize,
    pub n: usize,
}

pub fn random_dims(rng: &mut impl Rng) -> InstanceDims {
    InstanceDims {
        k: rng.random_range(1..=3),
        p: rng.random_range(1..=2),
        n: rng.random_range(10..=40),
    }
}

fn random_spd(rng: &mut impl Rng, dim: usize) -> DMatrix<f64> {
    let r = DMatrix::from_fn(dim, dim, |_, _| rng.random_range(-0.4..0.4));
    &r * r.transpose() + DMatrix::identity(dim, dim) * 0.6
}

/// A fully random system: random data, random initial vector, and distinct
/// random SPD weights per period.
pub fn random_system(
    rng: &mut impl Rng,
    dims: InstanceDims,
    intercept: InterceptMode,
) -> StackedSystem {
    let t_total = dims.n + dims.p;
    let spec = ModelSpec::new(dims.k, dims.p, t_total, intercept).expect("valid dims");
    let y = ObservationSet::new(
        (0..t_total)
            .map(|_| DVector::from_fn(dims.k, |_, _| rng.random_range(-1.0..1.0)))
            .collect(),
    )
    .expect("finite data");
    let b0 = DVector::from_fn(spec.m(), |_, _| rng.random_range(-0.3..0.3));
    let sys = StackedSystem::new(spec, &y, b0).expect("consistent system");
    let h: Vec<_> = (0..dims.n).map(|_| random_spd(rng, dims.k)).collect();
    let q: Vec<_> = (0..dims.n).map(|_| random_spd(rng, spec.m())).collect();
    sys.with_weights(h, q).expect("spd weights")
}

/// Dense block-diagonal assembly.
pub fn dense_block_diag(blocks: &[DMatrix<f64>]) -> DMatrix<f64> {
    let rows: usize = blocks.iter().map(|b| b.nrows()).sum();
    let cols: usize = blocks.iter().map(|b| b.ncols()).sum();
    let mut out = DMatrix::zeros(rows, cols);
    let (mut r, mut c) = (0, 0);
    for b in blocks {
        out.view_mut((r, c), (b.nrows(), b.ncols())).copy_from(b);
        r += b.nrows();
        c += b.ncols();
    }
    out
}

/// Dense stacked design (block diagonal in the per-period blocks).
pub fn dense_design(sys: &StackedSystem) -> DMatrix<f64> {
    dense_block_diag(sys.z_blocks())
}

/// Dense block cumulative-sum operator (identity blocks on and below the
/// diagonal). Validation only.
pub fn dense_c(n: usize, m: usize) -> DMatrix<f64> {
    let mut c = DMatrix::zeros(n * m, n * m);
    for i in 0..n {
        for j in 0..=i {
            c.view_mut((i * m, j * m), (m, m))
                .copy_from(&DMatrix::identity(m, m));
        }
    }
    c
}

/// Dense block first-difference operator. Validation only.
pub fn dense_c_inv(n: usize, m: usize) -> DMatrix<f64> {
    let mut c = DMatrix::zeros(n * m, n * m);
    let eye = DMatrix::identity(m, m);
    for i in 0..n {
        c.view_mut((i * m, i * m), (m, m)).copy_from(&eye);
        if i > 0 {
            c.view_mut((i * m, (i - 1) * m), (m, m)).copy_from(&(-&eye));
        }
    }
    c
}

fn max_abs(a: &DMatrix<f64>) -> f64 {
    a.iter().fold(0.0f64, |acc, v| acc.max(v.abs()))
}

fn rel_dev_paths(a: &[DVector<f64>], b: &[DVector<f64>]) -> f64 {
    let scale = b
        .iter()
        .fold(0.0f64, |acc, v| acc.max(v.amax()))
        .max(1e-300);
    let dev = a
        .iter()
        .zip(b)
        .fold(0.0f64, |acc, (x, y)| acc.max((x - y).amax()));
    dev / scale
}

fn rel_dev_blocks(a: &[DMatrix<f64>], b: &[DMatrix<f64>]) -> f64 {
    let scale = b.iter().fold(0.0f64, |acc, v| acc.max(max_abs(v))).max(1e-300);
    let dev = a
        .iter()
        .zip(b)
        .fold(0.0f64, |acc, (x, y)| acc.max(max_abs(&(x - y))));
    dev / scale
}

struct Tally {
    checks: Vec<IdentityCheck>,
}

impl Tally {
    fn new() -> Self {
        Tally { checks: Vec::new() }
    }

    fn record(&mut self, name: &'static str, dev: f64, tol: f64) {
        if let Some(existing) = self.checks.iter_mut().find(|c| c.name == name) {
            if dev.is_nan() || dev > existing.max_dev {
                existing.max_dev = dev;
            }
        } else {
            self.checks.push(IdentityCheck {
                name,
                max_dev: dev,
                tol,
            });
        }
    }
}

/// Run every identity on `instances` random instances and report the worst
/// deviation per identity.
pub fn run_identity_suite(cfg: &SuiteConfig) -> Result<Vec<IdentityCheck>> {
    let mut tally = Tally::new();
    for r in 0..cfg.instances {
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        rng.set_stream(r as u64);
        let dims = random_dims(&mut rng);

        let plain_mode = if r % 2 == 0 {
            InterceptMode::None
        } else {
            InterceptMode::TimeVarying
        };
        let plain = random_system(&mut rng, dims, plain_mode);
        check_c_round_trip(&mut tally, &mut rng, &plain);
        check_omega_shape(&mut tally, &plain, cfg.cap)?;
        check_inversion_lemma(&mut tally, &mut rng);
        check_smoother_equivalence(&mut tally, &plain, cfg.cap)?;
        check_solver_backends(&mut tally, &mut rng, &plain)?;
        check_likelihood_dual_path(&mut tally, &plain, cfg.cap)?;
        check_ols_rescaling(&mut tally, &plain)?;
        if dims.n <= 30 {
            check_normal_equation_assembly(&mut tally, &plain)?;
        }

        let with_v = random_system(&mut rng, dims, InterceptMode::TimeInvariant);
        check_intercept_identities(&mut tally, &with_v, cfg.cap)?;
    }
    if let Some(tol) = cfg.tol_override {
        for check in &mut tally.checks {
            check.tol = tol;
        }
    }
    Ok(tally.checks)
}

/// Convenience wrapper: error on the first failed check.
pub fn require_all_pass(cfg: &SuiteConfig) -> Result<Vec<IdentityCheck>> {
    let checks = run_identity_suite(cfg)?;
    for check in &checks {
        if !check.passed() {
            return Err(Error::IdentityBreach {
                name: check.name,
                max_dev: check.max_dev,
                tol: check.tol,
                seed: cfg.seed,
            });
        }
    }
    Ok(checks)
}

fn check_c_round_trip(tally: &mut Tally, rng: &mut impl Rng, sys: &StackedSystem) {
    let m = sys.m();
    let x = DVector::from_fn(sys.n() * m, |_, _| rng.random_range(-1.0..1.0));
    let fwd = apply_c_inverse(&apply_c(&x, m).unwrap(), m).unwrap();
    let bwd = apply_c(&apply_c_inverse(&x, m).unwrap(), m).unwrap();
    let dev = (&fwd - &x).amax().max((&bwd - &x).amax());
    tally.record("c_round_trip", dev, 1e-12);
}

fn check_omega_shape(tally: &mut Tally, sys: &StackedSystem, cap: usize) -> Result<()> {
    let omega = compute_omega(sys, cap)?;
    let asym = max_abs(&(&omega - omega.transpose())) / max_abs(&omega).max(1e-300);
    tally.record("omega_symmetry", asym, 1e-14);
    let spd = if DenseSpd::factor(&omega).is_ok() { 0.0 } else { 1.0 };
    tally.record("omega_positive_definite", spd, 0.5);
    Ok(())
}

fn check_inversion_lemma(tally: &mut Tally, rng: &mut impl Rng) {
    // (S - T U^{-1} V)^{-1} = S^{-1} + S^{-1} T (U - V S^{-1} T)^{-1} V S^{-1}
    let s = random_spd(rng, 4);
    let u = random_spd(rng, 3);
    let t = DMatrix::from_fn(4, 3, |_, _| rng.random_range(-0.3..0.3));
    let v = DMatrix::from_fn(3, 4, |_, _| rng.random_range(-0.3..0.3));
    let s_inv = DenseSpd::factor(&s).unwrap().inverse();
    let u_inv = DenseSpd::factor(&u).unwrap().inverse();
    let lhs = match (&s - &t * &u_inv * &v).try_inverse() {
        Some(inv) => inv,
        None => return, // singular draw; skip
    };
    let inner = match (&u - &v * &s_inv * &t).try_inverse() {
        Some(inv) => inv,
        None => return,
    };
    let rhs = &s_inv + &s_inv * &t * inner * &v * &s_inv;
    let dev = max_abs(&(lhs - rhs));
    tally.record("matrix_inversion_lemma", dev, 1e-8);
}

fn check_smoother_equivalence(tally: &mut Tally, sys: &StackedSystem, cap: usize) -> Result<()> {
    let gls = estimate_gls(sys)?;
    let direct = smooth_direct(sys, cap)?;
    let recursive = smooth_recursive(sys)?;
    let path_dev = rel_dev_paths(&gls.path.beta, &direct.beta)
        .max(rel_dev_paths(&recursive.beta, &direct.beta))
        .max(rel_dev_paths(&gls.path.beta, &recursive.beta));
    tally.record("smoother_equivalence_path", path_dev, 1e-8);
    let mse_dev = rel_dev_blocks(&gls.mse_blocks, &direct.mse_blocks)
        .max(rel_dev_blocks(&recursive.mse_blocks, &direct.mse_blocks))
        .max(rel_dev_blocks(&gls.mse_blocks, &recursive.mse_blocks));
    tally.record("smoother_equivalence_mse", mse_dev, 1e-7);
    // The dense variance formula and the dense smoother state the same
    // expression; keep them pinned together.
    let var = smoothed_variance(sys, VarianceMode::Kalman, cap)?;
    let dev = max_abs(&(&var - direct.full_mse.as_ref().unwrap()));
    tally.record("kalman_variance_matches_smoother", dev, 1e-9);
    Ok(())
}

fn check_solver_backends(
    tally: &mut Tally,
    rng: &mut impl Rng,
    sys: &StackedSystem,
) -> Result<()> {
    let (a, _) = normal_equations(sys)?;
    let dense = a.to_dense();
    let rhs = DVector::from_fn(dense.nrows(), |_, _| rng.random_range(-1.0..1.0));
    let x_block = a.factor()?.solve_vec(&rhs);
    let x_dense = DenseSpd::factor(&dense)?.solve_vec(&rhs);
    let dev = (&x_block - &x_dense).amax() / x_dense.amax().max(1e-300);
    tally.record("solver_backend_agreement", dev, 1e-8);
    Ok(())
}

fn check_likelihood_dual_path(tally: &mut Tally, sys: &StackedSystem, cap: usize) -> Result<()> {
    let banded = log_likelihood(sys, None)?;
    let dense = log_likelihood_dense(sys, None, cap)?;
    tally.record("likelihood_dual_path", (banded - dense).abs(), 1e-6);
    Ok(())
}

fn check_ols_rescaling(tally: &mut Tally, sys: &StackedSystem) -> Result<()> {
    let est = estimate_gls(sys)?;
    let scaled = sys.with_weights(
        sys.h_blocks().iter().map(|h| h * 5.25).collect(),
        sys.q_blocks().iter().map(|q| q * 5.25).collect(),
    )?;
    let est_scaled = estimate_gls(&scaled)?;
    let dev = est
        .path
        .beta
        .iter()
        .zip(&est_scaled.path.beta)
        .fold(0.0f64, |acc, (a, b)| acc.max((a - b).amax()));
    tally.record("weight_rescaling_invariance", dev, 1e-10);
    Ok(())
}

fn check_normal_equation_assembly(tally: &mut Tally, sys: &StackedSystem) -> Result<()> {
    let (a, _) = normal_equations(sys)?;
    let blockwise = a.to_dense();

    let n = sys.n();
    let m = sys.m();
    let zd = dense_design(sys);
    let hd_inv = dense_block_diag(
        &sys.h_blocks()
            .iter()
            .map(|h| DenseSpd::factor(h).unwrap().inverse())
            .collect::<Vec<_>>(),
    );
    let qd_inv = dense_block_diag(
        &sys.q_blocks()
            .iter()
            .map(|q| DenseSpd::factor(q).unwrap().inverse())
            .collect::<Vec<_>>(),
    );
    let c_inv = dense_c_inv(n, m);
    let dense = zd.transpose() * &hd_inv * &zd + c_inv.transpose() * &qd_inv * &c_inv;
    let dev = max_abs(&(&blockwise - &dense)) / max_abs(&dense).max(1e-300);
    tally.record("normal_equation_assembly", dev, 1e-12);
    Ok(())
}

/// All identities that involve jointly estimated intercepts: the direct
/// ML formula for the intercept, the path reconstruction, the variance
/// split, and the four partitioned coefficient-weight reductions.
fn check_intercept_identities(tally: &mut Tally, sys: &StackedSystem, cap: usize) -> Result<()> {
    let n = sys.n();
    let k = sys.k();
    let m = sys.m();
    let est = estimate_with_intercepts(sys)?;
    let v_hat = est.path.v.clone().expect("intercepts estimated");

    // Dense ingredients.
    let omega = compute_omega(sys, cap)?;
    let omega_chol = DenseSpd::factor(&omega)?;
    let omega_inv = omega_chol.inverse();
    let ident = stacked_identity(n, k);
    let zd = dense_design(sys);
    let cd = dense_c(n, m);
    let c_inv = dense_c_inv(n, m);
    let w = &cd * dense_block_diag(sys.q_blocks()) * cd.transpose(); // CQC'
    let wz = &w * zd.transpose(); // CQC'Z'
    let mut y = DVector::zeros(n * k);
    let mut zcb0 = DVector::zeros(n * k);
    for t in 0..n {
        y.rows_mut(t * k, k).copy_from(&sys.y_blocks()[t]);
        zcb0.rows_mut(t * k, k)
            .copy_from(&(&sys.z_blocks()[t] * sys.b0()));
    }

    let omega_inv_i = &omega_inv * &ident;
    let f_tilde = ident.transpose() * &omega_inv_i; // I' Omega^{-1} I
    let f_tilde_chol = DenseSpd::factor(&f_tilde)?;
    let f_tilde_inv = f_tilde_chol.inverse();

    // Direct ML formula for the intercepts.
    let v_direct = &f_tilde_inv * ident.transpose() * &omega_inv * (&y - &zcb0);
    tally.record(
        "intercept_ml_equivalence",
        (&v_hat - &v_direct).amax(),
        1e-8,
    );

    // Path reconstruction from the smoothing formula with the estimated
    // intercepts plugged in.
    let resid = &y - &ident * &v_hat - &zcb0;
    let correction = &wz * &omega_inv * &resid;
    let mut beta_direct = Vec::with_capacity(n);
    for t in 0..n {
        beta_direct.push(sys.b0() + correction.rows(t * m, m).into_owned());
    }
    tally.record(
        "intercept_path_identity",
        rel_dev_paths(&est.path.beta, &beta_direct),
        1e-8,
    );

    // Variance split: the joint variance exceeds the known-intercept
    // variance by a PSD term tied to the intercept information.
    let var_kalman = smoothed_variance(sys, VarianceMode::Kalman, cap)?;
    let var_gls = smoothed_variance(sys, VarianceMode::Gls, cap)?;
    let diff = &var_gls - &var_kalman;
    let min_eig = diff
        .symmetric_eigenvalues()
        .iter()
        .fold(f64::INFINITY, |a, &b| a.min(b));
    tally.record("variance_difference_psd", (-min_eig).max(0.0), 1e-10);
    let term = &wz * &omega_inv_i * &f_tilde_inv * omega_inv_i.transpose() * wz.transpose();
    tally.record(
        "variance_difference_term",
        max_abs(&(&diff - &term)) / max_abs(&var_kalman).max(1e-300),
        1e-8,
    );

    // Three-term correction: subtracting the intercept-induced spread from
    // the joint variance recovers the known-intercept variance.
    let mut cross = DMatrix::zeros(n * m, k); // Cov(beta_hat, v_hat), stacked
    for (t, block) in est.beta_v_cov.as_ref().unwrap().iter().enumerate() {
        cross.view_mut((t * m, 0), (m, k)).copy_from(block);
    }
    let v_cov = est.v_cov.as_ref().unwrap();
    let v_cov_chol = DenseSpd::factor(v_cov)?;
    let mut recovered = DMatrix::zeros(n * m, n * m);
    for t in 0..n {
        recovered
            .view_mut((t * m, t * m), (m, m))
            .copy_from(&est.mse_blocks[t]);
    }
    // Only the diagonal blocks are materialized on the banded route, so the
    // correction identity is checked blockwise.
    let corr = &cross * v_cov_chol.solve_mat(&cross.transpose());
    let mut block_dev = 0.0f64;
    for t in 0..n {
        let lhs = recovered.view((t * m, t * m), (m, m)) - corr.view((t * m, t * m), (m, m));
        let rhs = var_kalman.view((t * m, t * m), (m, m));
        block_dev = block_dev.max(max_abs(&(lhs - rhs)));
    }
    tally.record("variance_three_term_correction", block_dev, 1e-8);

    // Cross covariance against its closed form.
    let cross_direct = -(&wz * &omega_inv_i * &f_tilde_inv);
    tally.record(
        "path_intercept_cross_covariance",
        max_abs(&(&cross - &cross_direct)),
        1e-8,
    );

    // Partitioned-inverse reductions. Quantities named after the blocks of
    // the joint normal equations: G is the coefficient block, B/E the
    // off-diagonal blocks, F the intercept Schur complement.
    let hd_inv = dense_block_diag(
        &sys.h_blocks()
            .iter()
            .map(|h| DenseSpd::factor(h).unwrap().inverse())
            .collect::<Vec<_>>(),
    );
    let qd_inv = dense_block_diag(
        &sys.q_blocks()
            .iter()
            .map(|q| DenseSpd::factor(q).unwrap().inverse())
            .collect::<Vec<_>>(),
    );
    let g = zd.transpose() * &hd_inv * &zd + c_inv.transpose() * &qd_inv * &c_inv;
    let g_inv = DenseSpd::factor(&g)?.inverse();
    let b = ident.transpose() * &hd_inv * &zd; // k x nm
    let e = b.transpose();
    let f = ident.transpose() * &hd_inv * &ident - &b * &g_inv * &e;
    let f_inv = match f.clone().try_inverse() {
        Some(inv) => inv,
        None => return Ok(()),
    };

    // The Schur complement inverse equals the intercept covariance under
    // the observation metric.
    tally.record(
        "intercept_information_inverse",
        max_abs(&(&f_inv - &f_tilde_inv)),
        1e-8,
    );

    // Reduction of the intercept weight on the data.
    let lhs1 = &f_inv * ident.transpose() * &hd_inv
        - &f_inv * &b * &g_inv * zd.transpose() * &hd_inv;
    let rhs1 = &f_tilde_inv * ident.transpose() * &omega_inv;
    tally.record("vhat_data_weight_reduction", max_abs(&(lhs1 - rhs1)), 1e-8);

    // Reduction of the intercept weight on the initial-vector rows.
    let lhs2 = &f_inv * &b * &g_inv * c_inv.transpose() * &qd_inv;
    let rhs2 = &f_tilde_inv * ident.transpose() * &omega_inv * &zd * &cd;
    tally.record("vhat_prior_weight_reduction", max_abs(&(lhs2 - rhs2)), 1e-8);

    // Reduction of the path weight on the data.
    let gef = &g_inv * &e * &f_inv;
    let lhs3 = -(&gef * ident.transpose() * &hd_inv)
        + (&g_inv + &gef * &b * &g_inv) * zd.transpose() * &hd_inv;
    let proj = DMatrix::identity(n * k, n * k) - &ident * &f_tilde_inv * ident.transpose() * &omega_inv;
    let rhs3 = &wz * &omega_inv * &proj;
    tally.record("beta_data_weight_reduction", max_abs(&(lhs3 - rhs3)), 1e-8);

    // Reduction of the path weight on the initial-vector rows.
    let lhs4 = (&g_inv + &gef * &b * &g_inv) * c_inv.transpose() * &qd_inv;
    let rhs4 = (DMatrix::identity(n * m, n * m) - &wz * &omega_inv * &zd
        + &wz * &omega_inv * &ident * &f_tilde_inv * ident.transpose() * &omega_inv * &zd)
        * &cd;
    tally.record("beta_prior_weight_reduction", max_abs(&(lhs4 - rhs4)), 1e-8);

    Ok(())
}
