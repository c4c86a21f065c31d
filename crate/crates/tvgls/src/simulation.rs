//! Monte Carlo study: data generation under four error regimes, the
//! per-coefficient accuracy metrics, and the replication harness with
//! deterministic, thread-count-independent aggregation.

use nalgebra::DVector;
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::estimator::{fgls_pipeline, Method};
use crate::model::{CoefficientPath, InterceptMode, ModelSpec, ObservationSet};

/// Absolute value beyond which a simulated path counts as explosive.
///
/// Random-walk coefficients occasionally wander into explosive territory;
/// once a sample is dominated by an explosive mode, consecutive regressor
/// rows become collinear and the path estimate degrades by orders of
/// magnitude regardless of solver. Rejected paths are regenerated from the
/// next substream and counted.
pub const EXPLOSION_THRESHOLD: f64 = 1e6;
/// Consecutive rejected paths tolerated before giving up on a configuration.
pub const MAX_REJECTIONS: usize = 1000;
/// Substream slots reserved per replication (one per regeneration attempt).
const SUBSTREAMS_PER_REPLICATION: u64 = 1024;

/// Distribution of the coefficient innovations and observation noise.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    /// Both error vectors i.i.d. normal.
    Gaussian,
    /// Coefficient innovations drawn from a two-component normal mixture,
    /// producing occasional abrupt coefficient breaks.
    Mixture,
    /// Observation noise with a random-walk log variance per element.
    SvRandomWalk,
    /// Observation noise with an AR(1) log variance per element.
    SvAutoregressive,
}

impl ErrorKind {
    pub fn label(&self) -> &'static str {
        match self {
            ErrorKind::Gaussian => "gaussian",
            ErrorKind::Mixture => "mixture",
            ErrorKind::SvRandomWalk => "sv-rw",
            ErrorKind::SvAutoregressive => "sv-ar",
        }
    }
}

/// Two-component normal mixture for the coefficient innovations.
#[derive(Debug, Clone, Copy)]
pub struct MixtureParams {
    /// Probability of the small-variance component.
    pub bern_p: f64,
    pub sd_small: f64,
    pub sd_large: f64,
}

impl Default for MixtureParams {
    fn default() -> Self {
        MixtureParams {
            bern_p: 0.95,
            sd_small: 0.03,
            sd_large: 0.1,
        }
    }
}

/// Log-variance process of the observation noise for the SV regimes.
#[derive(Debug, Clone, Copy)]
pub struct SvParams {
    /// Persistence of the log variance; 1 is a random walk.
    pub rho: f64,
    /// Standard deviation of the log-variance innovations.
    pub e_sd: f64,
    pub log_h0: f64,
}

impl Default for SvParams {
    fn default() -> Self {
        SvParams {
            rho: 1.0,
            e_sd: 0.02,
            log_h0: 0.0,
        }
    }
}

/// Full description of one simulation cell.
#[derive(Debug, Clone, Copy)]
pub struct DgpConfig {
    pub spec: ModelSpec,
    /// Observation noise standard deviation (ignored by the SV regimes,
    /// where the volatility process sets the scale).
    pub h_scale: f64,
    /// Coefficient innovation standard deviation (ignored by the mixture
    /// regime, which draws from the two-component mixture instead).
    pub q_scale: f64,
    pub error_kind: ErrorKind,
    pub mixture: MixtureParams,
    pub sv: SvParams,
    pub seed: u64,
}

impl DgpConfig {
    /// The benchmark design: three variables, two lags, time-varying
    /// intercepts (21 coefficients per period).
    pub fn benchmark(t_total: usize, h_scale: f64, q_scale: f64, seed: u64) -> Result<Self> {
        let spec = ModelSpec::new(3, 2, t_total, InterceptMode::TimeVarying)?;
        DgpConfig::new(spec, h_scale, q_scale, ErrorKind::Gaussian, seed)
    }

    pub fn new(
        spec: ModelSpec,
        h_scale: f64,
        q_scale: f64,
        error_kind: ErrorKind,
        seed: u64,
    ) -> Result<Self> {
        let sv = SvParams {
            rho: match error_kind {
                ErrorKind::SvAutoregressive => 0.9,
                _ => 1.0,
            },
            ..SvParams::default()
        };
        let cfg = DgpConfig {
            spec,
            h_scale,
            q_scale,
            error_kind,
            mixture: MixtureParams::default(),
            sv,
            seed,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn with_error_kind(mut self, kind: ErrorKind) -> Self {
        self.error_kind = kind;
        self.sv.rho = match kind {
            ErrorKind::SvAutoregressive => 0.9,
            _ => self.sv.rho,
        };
        self
    }

    pub fn with_rho(mut self, rho: f64) -> Self {
        self.sv.rho = rho;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !self.h_scale.is_finite() || self.h_scale <= 0.0 {
            return Err(Error::invalid("h_scale", "must be positive and finite"));
        }
        if !self.q_scale.is_finite() || self.q_scale < 0.0 {
            return Err(Error::invalid("q_scale", "must be non-negative and finite"));
        }
        if self.mixture.bern_p <= 0.0 || self.mixture.bern_p >= 1.0 || self.mixture.bern_p.is_nan()
        {
            return Err(Error::invalid("bern_p", "must be strictly inside (0, 1)"));
        }
        if self.mixture.sd_small <= 0.0 || self.mixture.sd_large <= 0.0 {
            return Err(Error::invalid("mixture", "component deviations must be positive"));
        }
        if self.sv.rho <= 0.0 || self.sv.rho > 1.0 || self.sv.rho.is_nan() {
            return Err(Error::invalid("rho", "must be in (0, 1]"));
        }
        if self.sv.e_sd < 0.0 || self.sv.e_sd.is_nan() {
            return Err(Error::invalid("e_sd", "must be non-negative"));
        }
        Ok(())
    }

    /// Signal-to-noise ratio of the homoskedastic design: the ratio of the
    /// average innovation variance to the average observation variance.
    pub fn snr(&self) -> f64 {
        (self.q_scale / self.h_scale).powi(2)
    }
}

/// One generated sample: the observed series, the true coefficient path
/// over the effective sample, and how many explosive draws were discarded.
#[derive(Debug, Clone)]
pub struct SimulatedPath {
    pub observations: ObservationSet,
    pub beta_true: CoefficientPath,
    pub rejections: usize,
}

/// One draw from the two-component mixture; also reports whether the
/// large-variance component fired.
pub fn sample_mixture(rng: &mut impl Rng, params: &MixtureParams) -> (f64, bool) {
    let large = rng.random::<f64>() >= params.bern_p;
    let sd = if large { params.sd_large } else { params.sd_small };
    let z: f64 = rng.sample(StandardNormal);
    (sd * z, large)
}

/// Generate one sample with the replication-0 substream.
pub fn simulate_tvvar(cfg: &DgpConfig) -> Result<SimulatedPath> {
    simulate_replication(cfg, 0)
}

/// Generate the sample for a given replication index. Every replication
/// owns a block of RNG substreams so results are independent of scheduling
/// order; rejected explosive paths move to the next substream in the block.
pub fn simulate_replication(cfg: &DgpConfig, rep: usize) -> Result<SimulatedPath> {
    cfg.validate()?;
    let base = rep as u64 * SUBSTREAMS_PER_REPLICATION;
    for attempt in 0..MAX_REJECTIONS {
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        rng.set_stream(base + attempt as u64);
        if let Some((observations, beta_true)) = generate_once(cfg, &mut rng) {
            return Ok(SimulatedPath {
                observations,
                beta_true,
                rejections: attempt,
            });
        }
    }
    Err(Error::ExplosiveConfiguration {
        attempts: MAX_REJECTIONS,
        seed: cfg.seed,
    })
}

/// One generation attempt; `None` marks an explosive path.
fn generate_once(
    cfg: &DgpConfig,
    rng: &mut ChaCha8Rng,
) -> Option<(ObservationSet, CoefficientPath)> {
    let spec = &cfg.spec;
    let k = spec.k();
    let p = spec.p();
    let n = spec.n();
    let m = spec.m();
    let len = spec.regressor_len();
    let has_const = spec.intercept() == InterceptMode::TimeVarying;

    // Coefficients start the random walk at zero.
    let mut beta = DVector::<f64>::zeros(m);
    let mut beta_path = Vec::with_capacity(n);
    // Pre-sample rows are zero vectors; the recursion fills the rest.
    let mut rows: Vec<DVector<f64>> = vec![DVector::zeros(k); p];
    let mut log_h = DVector::from_element(k, cfg.sv.log_h0);

    for _ in 0..n {
        // Innovation to the coefficient path.
        for i in 0..m {
            let step = match cfg.error_kind {
                ErrorKind::Mixture => sample_mixture(rng, &cfg.mixture).0,
                _ => cfg.q_scale * rng.sample::<f64, _>(StandardNormal),
            };
            beta[i] += step;
        }
        beta_path.push(beta.clone());

        // Observation noise.
        let mut eps = DVector::zeros(k);
        match cfg.error_kind {
            ErrorKind::SvRandomWalk | ErrorKind::SvAutoregressive => {
                for i in 0..k {
                    let e: f64 = rng.sample(StandardNormal);
                    log_h[i] = cfg.sv.rho * log_h[i] + cfg.sv.e_sd * e;
                    let xi: f64 = rng.sample(StandardNormal);
                    eps[i] = (log_h[i] / 2.0).exp() * xi;
                }
            }
            _ => {
                for i in 0..k {
                    eps[i] = cfg.h_scale * rng.sample::<f64, _>(StandardNormal);
                }
            }
        }

        // Regressor row from the history, then the observation equation.
        let prev = rows.len();
        let mut x = DVector::zeros(len);
        let mut at = 0;
        if has_const {
            x[0] = 1.0;
            at = 1;
        }
        for lag in 1..=p {
            let row = &rows[prev - lag];
            for i in 0..k {
                x[at + i] = row[i];
            }
            at += k;
        }
        let mut y_t = eps;
        for (j, &xj) in x.iter().enumerate() {
            if xj != 0.0 {
                for r in 0..k {
                    y_t[r] += xj * beta[j * k + r];
                }
            }
        }
        if y_t.iter().any(|v| !v.is_finite() || v.abs() > EXPLOSION_THRESHOLD) {
            return None;
        }
        rows.push(y_t);
    }

    let observations = ObservationSet::new(rows).ok()?;
    let beta_true = CoefficientPath {
        beta: beta_path,
        v: None,
    };
    Some((observations, beta_true))
}

/// Per-replication accuracy summaries for one estimated path against the
/// truth: time means, time standard deviations (n-1 denominator), mean
/// absolute deviation, and the deviation ratio.
#[derive(Debug, Clone)]
pub struct RepMetrics {
    pub mean_true: Vec<f64>,
    pub sd_true: Vec<f64>,
    pub mean_est: Vec<f64>,
    pub sd_est: Vec<f64>,
    pub dist: Vec<f64>,
    /// `None` where the true path has zero deviation, making the ratio
    /// undefined.
    pub rat: Vec<Option<f64>>,
}

pub fn compute_metrics(true_path: &[DVector<f64>], est_path: &[DVector<f64>]) -> Result<RepMetrics> {
    if true_path.len() != est_path.len() || true_path.is_empty() {
        return Err(Error::invalid(
            "paths",
            format!(
                "path lengths differ: {} vs {}",
                true_path.len(),
                est_path.len()
            ),
        ));
    }
    let n = true_path.len();
    let m = true_path[0].len();
    if est_path[0].len() != m {
        return Err(Error::invalid(
            "paths",
            format!(
                "coefficient dimensions differ: {} vs {}",
                m,
                est_path[0].len()
            ),
        ));
    }
    let mean_sd = |path: &[DVector<f64>], i: usize| {
        let mean = path.iter().map(|b| b[i]).sum::<f64>() / n as f64;
        let ss = path.iter().map(|b| (b[i] - mean).powi(2)).sum::<f64>();
        let sd = if n > 1 { (ss / (n - 1) as f64).sqrt() } else { 0.0 };
        (mean, sd)
    };
    let mut out = RepMetrics {
        mean_true: Vec::with_capacity(m),
        sd_true: Vec::with_capacity(m),
        mean_est: Vec::with_capacity(m),
        sd_est: Vec::with_capacity(m),
        dist: Vec::with_capacity(m),
        rat: Vec::with_capacity(m),
    };
    for i in 0..m {
        let (mt, st) = mean_sd(true_path, i);
        let (me, se) = mean_sd(est_path, i);
        let dist = true_path
            .iter()
            .zip(est_path)
            .map(|(t, e)| (t[i] - e[i]).abs())
            .sum::<f64>()
            / n as f64;
        out.mean_true.push(mt);
        out.sd_true.push(st);
        out.mean_est.push(me);
        out.sd_est.push(se);
        out.dist.push(dist);
        out.rat.push(if st > 0.0 { Some(se / st) } else { None });
    }
    Ok(out)
}

/// Replication averages of the per-coefficient metrics for one method,
/// alongside the matching truth aggregates.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricTable {
    pub method: Method,
    /// Replications that produced an estimate (failures excluded).
    pub n_reps: usize,
    pub seed: u64,
    /// Explosive paths regenerated across all replications.
    pub rejections: usize,
    pub m_true: Vec<f64>,
    pub s_true: Vec<f64>,
    pub m_est: Vec<f64>,
    pub s_est: Vec<f64>,
    pub dist: Vec<f64>,
    pub rat: Vec<f64>,
    /// Per-coefficient count of replications where the ratio was undefined.
    pub rat_excluded: Vec<usize>,
}

impl MetricTable {
    pub fn median_m_true(&self) -> f64 {
        lower_median(&self.m_true)
    }

    pub fn median_s_true(&self) -> f64 {
        lower_median(&self.s_true)
    }

    pub fn median_m(&self) -> f64 {
        lower_median(&self.m_est)
    }

    pub fn median_s(&self) -> f64 {
        lower_median(&self.s_est)
    }

    pub fn median_dist(&self) -> f64 {
        lower_median(&self.dist)
    }

    pub fn median_rat(&self) -> f64 {
        let finite: Vec<f64> = self.rat.iter().copied().filter(|v| v.is_finite()).collect();
        lower_median(&finite)
    }
}

/// Exact order statistic: the middle element, or the lower of the two
/// middle elements for even lengths. NaN for empty input.
pub fn lower_median(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        return f64::NAN;
    }
    let mut sorted = xs.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap_or(std::cmp::Ordering::Equal));
    sorted[(sorted.len() - 1) / 2]
}

struct RepOutcome {
    rejections: usize,
    per_method: Vec<RepMetrics>,
}

/// Run `n_reps` replications of simulate-then-estimate and aggregate the
/// per-coefficient metrics. Replications run in parallel on `threads`
/// workers (0 = library default) but are merged in replication order, so
/// the output is bit-identical for any worker count.
pub fn run_replications(
    cfg: &DgpConfig,
    n_reps: usize,
    steps: usize,
    threads: usize,
) -> Result<Vec<MetricTable>> {
    if n_reps == 0 {
        return Err(Error::invalid("reps", "need at least one replication"));
    }
    cfg.validate()?;
    let one_rep = |rep: usize| -> Result<RepOutcome> {
        let sim = simulate_replication(cfg, rep)?;
        let estimates = fgls_pipeline(&sim.observations, &cfg.spec, steps, None)?;
        let per_method = estimates
            .iter()
            .map(|est| compute_metrics(&sim.beta_true.beta, &est.path.beta))
            .collect::<Result<Vec<_>>>()?;
        Ok(RepOutcome {
            rejections: sim.rejections,
            per_method,
        })
    };
    let run = || {
        (0..n_reps)
            .into_par_iter()
            .map(one_rep)
            .collect::<Vec<Result<RepOutcome>>>()
    };
    let outcomes = if threads == 0 {
        run()
    } else {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .map_err(|e| Error::invalid("threads", e.to_string()))?;
        pool.install(run)
    };

    let n_methods = steps + 1;
    let m = cfg.spec.m();
    let mut ok = 0usize;
    let mut failed = 0usize;
    let mut first_failure: Option<String> = None;
    let mut rejections = 0usize;
    let mut sum_m_true = vec![0.0; m];
    let mut sum_s_true = vec![0.0; m];
    let mut sums: Vec<MethodSums> = (0..n_methods).map(|_| MethodSums::new(m)).collect();

    // Sequential merge in replication order keeps the result deterministic.
    for (rep, outcome) in outcomes.into_iter().enumerate() {
        match outcome {
            Ok(out) => {
                ok += 1;
                rejections += out.rejections;
                for i in 0..m {
                    sum_m_true[i] += out.per_method[0].mean_true[i];
                    sum_s_true[i] += out.per_method[0].sd_true[i];
                }
                for (acc, metrics) in sums.iter_mut().zip(&out.per_method) {
                    acc.add(metrics);
                }
            }
            Err(e) => {
                failed += 1;
                if first_failure.is_none() {
                    first_failure = Some(format!("replication {rep}: {e}"));
                }
            }
        }
    }
    if failed * 20 > n_reps {
        return Err(Error::TooManyFailures {
            failed,
            total: n_reps,
            first: first_failure.unwrap_or_default(),
        });
    }
    if ok == 0 {
        return Err(Error::TooManyFailures {
            failed,
            total: n_reps,
            first: first_failure.unwrap_or_default(),
        });
    }

    let scale = 1.0 / ok as f64;
    let m_true: Vec<f64> = sum_m_true.iter().map(|s| s * scale).collect();
    let s_true: Vec<f64> = sum_s_true.iter().map(|s| s * scale).collect();
    let methods = [Method::Ols, Method::Fgls1, Method::Fgls2];
    Ok(sums
        .into_iter()
        .enumerate()
        .map(|(j, acc)| acc.into_table(methods[j], ok, cfg.seed, rejections, &m_true, &s_true))
        .collect())
}

struct MethodSums {
    m_est: Vec<f64>,
    s_est: Vec<f64>,
    dist: Vec<f64>,
    rat: Vec<f64>,
    rat_n: Vec<usize>,
}

impl MethodSums {
    fn new(m: usize) -> Self {
        MethodSums {
            m_est: vec![0.0; m],
            s_est: vec![0.0; m],
            dist: vec![0.0; m],
            rat: vec![0.0; m],
            rat_n: vec![0; m],
        }
    }

    fn add(&mut self, metrics: &RepMetrics) {
        for i in 0..self.m_est.len() {
            self.m_est[i] += metrics.mean_est[i];
            self.s_est[i] += metrics.sd_est[i];
            self.dist[i] += metrics.dist[i];
            if let Some(r) = metrics.rat[i] {
                self.rat[i] += r;
                self.rat_n[i] += 1;
            }
        }
    }

    fn into_table(
        self,
        method: Method,
        n_reps: usize,
        seed: u64,
        rejections: usize,
        m_true: &[f64],
        s_true: &[f64],
    ) -> MetricTable {
        let scale = 1.0 / n_reps as f64;
        let m = self.m_est.len();
        let mut rat = vec![f64::NAN; m];
        let mut rat_excluded = vec![0usize; m];
        for i in 0..m {
            if self.rat_n[i] > 0 {
                rat[i] = self.rat[i] / self.rat_n[i] as f64;
            }
            rat_excluded[i] = n_reps - self.rat_n[i];
        }
        MetricTable {
            method,
            n_reps,
            seed,
            rejections,
            m_true: m_true.to_vec(),
            s_true: s_true.to_vec(),
            m_est: self.m_est.iter().map(|s| s * scale).collect(),
            s_est: self.s_est.iter().map(|s| s * scale).collect(),
            dist: self.dist.iter().map(|s| s * scale).collect(),
            rat,
            rat_excluded,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn benchmark_cfg(t: usize, h: f64, q: f64, seed: u64) -> DgpConfig {
        DgpConfig::benchmark(t, h, q, seed).unwrap()
    }

    #[test]
    fn snr_values() {
        assert!((benchmark_cfg(100, 0.02, 0.03, 1).snr() - 2.25).abs() < 1e-12);
        assert!((benchmark_cfg(100, 10.0, 0.03, 1).snr() - 9e-6).abs() < 1e-18);
        assert!((benchmark_cfg(100, 0.03, 0.03, 1).snr() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn zero_state_noise_freezes_the_path() {
        let cfg = benchmark_cfg(60, 0.02, 0.0, 7);
        let sim = simulate_tvvar(&cfg).unwrap();
        for b in &sim.beta_true.beta {
            assert_eq!(b.amax(), 0.0);
        }
        // With beta = 0 the observations are pure noise with sd h_scale.
        let flat: Vec<f64> = sim
            .observations
            .rows()
            .iter()
            .skip(2)
            .flat_map(|r| r.iter().copied())
            .collect();
        let var = flat.iter().map(|v| v * v).sum::<f64>() / flat.len() as f64;
        assert!((var.sqrt() - 0.02).abs() < 0.005, "sd {}", var.sqrt());
    }

    #[test]
    fn presample_rows_are_zero() {
        let cfg = benchmark_cfg(50, 0.2, 0.03, 3);
        let sim = simulate_tvvar(&cfg).unwrap();
        assert_eq!(sim.observations.len(), 50);
        assert_eq!(sim.beta_true.beta.len(), 48);
        assert_eq!(sim.observations.rows()[0].amax(), 0.0);
        assert_eq!(sim.observations.rows()[1].amax(), 0.0);
        assert!(sim.observations.rows()[2].amax() > 0.0);
    }

    #[test]
    fn mixture_large_component_frequency() {
        let params = MixtureParams::default();
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        let draws = 1_000_000;
        let mut large = 0usize;
        for _ in 0..draws {
            if sample_mixture(&mut rng, &params).1 {
                large += 1;
            }
        }
        let frac = large as f64 / draws as f64;
        assert!((frac - 0.05).abs() < 0.002, "large fraction {frac}");
    }

    #[test]
    fn degenerate_sv_reduces_to_unit_gaussian() {
        let mut cfg = benchmark_cfg(400, 1.0, 0.0, 11).with_error_kind(ErrorKind::SvRandomWalk);
        cfg.sv.e_sd = 0.0;
        let sim = simulate_tvvar(&cfg).unwrap();
        let flat: Vec<f64> = sim
            .observations
            .rows()
            .iter()
            .skip(2)
            .flat_map(|r| r.iter().copied())
            .collect();
        let var = flat.iter().map(|v| v * v).sum::<f64>() / flat.len() as f64;
        assert!((var - 1.0).abs() < 0.12, "variance {var}");
    }

    #[test]
    fn simulation_is_reproducible() {
        let cfg = benchmark_cfg(80, 0.2, 0.03, 5);
        let a = simulate_tvvar(&cfg).unwrap();
        let b = simulate_tvvar(&cfg).unwrap();
        for (ra, rb) in a.observations.rows().iter().zip(b.observations.rows()) {
            assert_eq!(ra, rb);
        }
        let c = simulate_replication(&cfg, 3).unwrap();
        assert_ne!(a.observations.rows()[5], c.observations.rows()[5]);
    }

    #[test]
    fn metrics_identity_and_shift() {
        let path: Vec<DVector<f64>> = (0..20)
            .map(|t| DVector::from_column_slice(&[(t as f64 * 0.7).sin(), t as f64 * 0.1]))
            .collect();
        let same = compute_metrics(&path, &path).unwrap();
        for i in 0..2 {
            assert_eq!(same.dist[i], 0.0);
            assert!((same.rat[i].unwrap() - 1.0).abs() < 1e-14);
        }
        let shifted: Vec<DVector<f64>> = path
            .iter()
            .map(|b| b + DVector::from_column_slice(&[0.5, 0.5]))
            .collect();
        let shift = compute_metrics(&path, &shifted).unwrap();
        for i in 0..2 {
            assert!((shift.dist[i] - 0.5).abs() < 1e-14);
            assert!((shift.rat[i].unwrap() - 1.0).abs() < 1e-14);
        }
    }

    #[test]
    fn metrics_scaled_deviation_matches_loop_oracle() {
        let path: Vec<DVector<f64>> = (0..30)
            .map(|t| DVector::from_column_slice(&[(t as f64 * 0.31).cos()]))
            .collect();
        let n = path.len() as f64;
        let mean = path.iter().map(|b| b[0]).sum::<f64>() / n;
        // est = 2 (true - mean) + mean.
        let est: Vec<DVector<f64>> = path
            .iter()
            .map(|b| DVector::from_column_slice(&[2.0 * (b[0] - mean) + mean]))
            .collect();
        let metrics = compute_metrics(&path, &est).unwrap();
        let mut expected_dist = 0.0;
        for b in &path {
            expected_dist += (b[0] - mean).abs();
        }
        expected_dist /= n;
        assert!((metrics.dist[0] - expected_dist).abs() < 1e-14);
        assert!((metrics.rat[0].unwrap() - 2.0).abs() < 1e-12);
    }

    #[test]
    fn zero_variance_truth_is_excluded_from_ratios() {
        let truth: Vec<DVector<f64>> = (0..10).map(|_| DVector::from_column_slice(&[1.0])).collect();
        let est: Vec<DVector<f64>> = (0..10)
            .map(|t| DVector::from_column_slice(&[t as f64]))
            .collect();
        let metrics = compute_metrics(&truth, &est).unwrap();
        assert!(metrics.rat[0].is_none());
    }

    #[test]
    fn lower_median_is_exact_order_statistic() {
        assert_eq!(lower_median(&[3.0, 1.0, 2.0]), 2.0);
        assert_eq!(lower_median(&[4.0, 1.0, 3.0, 2.0]), 2.0);
        assert!(lower_median(&[]).is_nan());
    }

    #[test]
    fn small_replication_run_aggregates() {
        let cfg = benchmark_cfg(100, 0.2, 0.03, 17);
        let tables = run_replications(&cfg, 3, 2, 1).unwrap();
        assert_eq!(tables.len(), 3);
        assert_eq!(tables[0].method, Method::Ols);
        assert_eq!(tables[2].method, Method::Fgls2);
        for table in &tables {
            assert_eq!(table.m_est.len(), 21);
            assert_eq!(table.n_reps, 3);
            assert!(table.median_dist().is_finite());
        }
        // Truth aggregates identical across methods.
        assert_eq!(tables[0].m_true, tables[1].m_true);
    }
}
