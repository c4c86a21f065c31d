//! Replication gate: every release-blocking check, one test per criterion,
//! each printing a PASS/FAIL line with the measured numbers.
//!
//! Monte Carlo cells run at N = 200 replications with a fixed seed; the
//! identity checks run on 25 random instances. Run with
//! `cargo test --test acceptance -- --nocapture` to see every line.

use std::sync::OnceLock;
use std::time::Instant;

use tvgls::validate::{random_dims, random_system, run_identity_suite, SuiteConfig};
use tvgls::{
    estimate_gls, fgls_pipeline, run_replications, simulate_replication, smooth_direct,
    smooth_recursive, DgpConfig, ErrorKind, IdentityCheck, InterceptMode, MetricTable,
    DEFAULT_DENSE_CAP,
};

use nalgebra::{DMatrix, DVector};
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;

const SEED: u64 = 20260809;
const REPS: usize = 200;

fn cell(t_total: usize, h_scale: f64, kind: ErrorKind) -> Vec<MetricTable> {
    let cfg = DgpConfig::benchmark(t_total, h_scale, 0.03, SEED)
        .unwrap()
        .with_error_kind(kind);
    run_replications(&cfg, REPS, 2, 0).expect("replication cell")
}

fn cell_h1() -> &'static Vec<MetricTable> {
    static CELL: OnceLock<Vec<MetricTable>> = OnceLock::new();
    CELL.get_or_init(|| cell(100, 1.0, ErrorKind::Gaussian))
}

fn cell_h002() -> &'static Vec<MetricTable> {
    static CELL: OnceLock<Vec<MetricTable>> = OnceLock::new();
    CELL.get_or_init(|| cell(100, 0.02, ErrorKind::Gaussian))
}

fn cell_snr225_t100() -> &'static Vec<MetricTable> {
    static CELL: OnceLock<Vec<MetricTable>> = OnceLock::new();
    CELL.get_or_init(|| cell(100, 0.002, ErrorKind::Gaussian))
}

fn cell_snr225_t250() -> &'static Vec<MetricTable> {
    static CELL: OnceLock<Vec<MetricTable>> = OnceLock::new();
    CELL.get_or_init(|| cell(250, 0.002, ErrorKind::Gaussian))
}

fn cell_h02() -> &'static Vec<MetricTable> {
    static CELL: OnceLock<Vec<MetricTable>> = OnceLock::new();
    CELL.get_or_init(|| cell(100, 0.2, ErrorKind::Gaussian))
}

fn identity_suite() -> &'static Vec<IdentityCheck> {
    static SUITE: OnceLock<Vec<IdentityCheck>> = OnceLock::new();
    SUITE.get_or_init(|| {
        run_identity_suite(&SuiteConfig {
            instances: 25,
            seed: SEED,
            ..SuiteConfig::default()
        })
        .expect("identity suite")
    })
}

fn rel_dev_paths(a: &[DVector<f64>], b: &[DVector<f64>]) -> f64 {
    let scale = b.iter().fold(0.0f64, |m, v| m.max(v.amax())).max(1e-300);
    a.iter()
        .zip(b)
        .fold(0.0f64, |m, (x, y)| m.max((x - y).amax()))
        / scale
}

fn rel_dev_blocks(a: &[DMatrix<f64>], b: &[DMatrix<f64>]) -> f64 {
    let scale = b
        .iter()
        .fold(0.0f64, |m, v| m.max(v.amax()))
        .max(1e-300);
    a.iter()
        .zip(b)
        .fold(0.0f64, |m, (x, y)| m.max((x - y).amax()))
        / scale
}

#[test]
fn criterion_1_smoother_equivalence() {
    let started = Instant::now();
    let mut worst_path = 0.0f64;
    let mut worst_mse = 0.0f64;
    for r in 0..25 {
        let mut rng = ChaCha8Rng::seed_from_u64(SEED);
        rng.set_stream(1_000 + r);
        let dims = random_dims(&mut rng);
        let mode = if r % 2 == 0 {
            InterceptMode::None
        } else {
            InterceptMode::TimeVarying
        };
        let sys = random_system(&mut rng, dims, mode);
        let gls = estimate_gls(&sys).unwrap();
        let direct = smooth_direct(&sys, DEFAULT_DENSE_CAP).unwrap();
        let recursive = smooth_recursive(&sys).unwrap();
        worst_path = worst_path
            .max(rel_dev_paths(&gls.path.beta, &direct.beta))
            .max(rel_dev_paths(&recursive.beta, &direct.beta))
            .max(rel_dev_paths(&gls.path.beta, &recursive.beta));
        worst_mse = worst_mse
            .max(rel_dev_blocks(&gls.mse_blocks, &direct.mse_blocks))
            .max(rel_dev_blocks(&recursive.mse_blocks, &direct.mse_blocks))
            .max(rel_dev_blocks(&gls.mse_blocks, &recursive.mse_blocks));
    }
    let elapsed = started.elapsed().as_secs_f64();
    let pass = worst_path <= 1e-8 && worst_mse <= 1e-7 && elapsed < 60.0;
    println!(
        "criterion 1 (three-route equivalence): {}: path dev {worst_path:.3e} (tol 1e-8), \
         mse dev {worst_mse:.3e} (tol 1e-7), runtime {elapsed:.1}s (< 60s)",
        if pass { "PASS" } else { "FAIL" }
    );
    assert!(pass);
}

#[test]
fn criterion_2_intercept_identities() {
    let suite = identity_suite();
    let required = [
        "intercept_ml_equivalence",
        "intercept_path_identity",
        "variance_difference_psd",
        "variance_difference_term",
        "variance_three_term_correction",
        "intercept_information_inverse",
        "path_intercept_cross_covariance",
        "vhat_data_weight_reduction",
        "vhat_prior_weight_reduction",
        "beta_data_weight_reduction",
        "beta_prior_weight_reduction",
    ];
    let mut ok = true;
    for name in required {
        let check = suite
            .iter()
            .find(|c| c.name == name)
            .unwrap_or_else(|| panic!("missing identity {name}"));
        if !check.passed() {
            ok = false;
        }
        println!(
            "criterion 2   {name}: {} (max dev {:.3e}, tol {:.0e})",
            if check.passed() { "PASS" } else { "FAIL" },
            check.max_dev,
            check.tol
        );
    }
    println!(
        "criterion 2 (intercept-estimator identities): {}",
        if ok { "PASS" } else { "FAIL" }
    );
    assert!(ok);
}

#[test]
fn criterion_3_benchmark_cells() {
    let h1 = cell_h1();
    let h002 = cell_h002();
    let rat_ols = h1[0].median_rat();
    let rat_f2 = h1[2].median_rat();
    let dist_ols = h002[0].median_dist();

    let ok_ols = (2.7..=3.7).contains(&rat_ols);
    let ok_f2 = (0.95..=1.35).contains(&rat_f2);
    let ok_dist = (0.11..=0.17).contains(&dist_ols);
    println!(
        "criterion 3   noise-dominated cell, OLS median rat {rat_ols:.3} in [2.7, 3.7]: {}",
        if ok_ols { "PASS" } else { "FAIL" }
    );
    println!(
        "criterion 3   noise-dominated cell, 2FGLS median rat {rat_f2:.3} in [0.95, 1.35]: {}",
        if ok_f2 { "PASS" } else { "FAIL" }
    );
    println!(
        "criterion 3   balanced cell, OLS median dist {dist_ols:.3} in [0.11, 0.17]: {}",
        if ok_dist { "PASS" } else { "FAIL" }
    );
    println!(
        "criterion 3 (benchmark cell reproduction): {}",
        if ok_ols && ok_f2 && ok_dist { "PASS" } else { "FAIL" }
    );
    // Known red: the documented two-pass re-weighting reaches a fixed point
    // in the noise-dominated cell (the second pass reproduces the first
    // pass's weights), so its path volatility stays near the OLS level
    // instead of contracting into the reference band. The first-pass and
    // OLS statistics reproduce the reference values to three decimals; see
    // the project notes for the full calibration.
    assert!(ok_ols && ok_f2 && ok_dist);
}

#[test]
fn criterion_4_sample_size_direction() {
    let t100 = cell_snr225_t100();
    let t250 = cell_snr225_t250();
    let (rat_small, rat_big) = (t100[0].median_rat(), t250[0].median_rat());
    let (dist_small, dist_big) = (t100[0].median_dist(), t250[0].median_dist());
    let ok = rat_big > rat_small && dist_big < dist_small;
    println!(
        "criterion 4 (sample-size direction at SNR 225): {}: OLS rat {rat_small:.3} -> {rat_big:.3} \
         (must rise), dist {dist_small:.3} -> {dist_big:.3} (must fall)",
        if ok { "PASS" } else { "FAIL" }
    );
    assert!(ok);
}

#[test]
fn criterion_5_no_pile_up() {
    let h02 = cell_h02();
    let h1 = cell_h1();
    let checks = [
        ("SNR 0.0225 OLS", h02[0].median_rat()),
        ("SNR 0.0225 1FGLS", h02[1].median_rat()),
        ("SNR 0.0009 OLS", h1[0].median_rat()),
        ("SNR 0.0009 1FGLS", h1[1].median_rat()),
    ];
    let ok = checks.iter().all(|(_, rat)| *rat > 1.0);
    for (name, rat) in &checks {
        println!("criterion 5   {name} median rat {rat:.3} > 1");
    }
    println!(
        "criterion 5 (no pile-up: low SNR overestimates, never collapses): {}",
        if ok { "PASS" } else { "FAIL" }
    );
    assert!(ok);
}

#[test]
fn criterion_6_sv_vs_ar_sv() {
    let rw = cell(100, 1.0, ErrorKind::SvRandomWalk);
    let ar = cell(100, 1.0, ErrorKind::SvAutoregressive);
    let mut worst = 0.0f64;
    let mut stats = Vec::new();
    for (a, b) in rw.iter().zip(&ar) {
        for (label, x, y) in [
            ("m", a.median_m(), b.median_m()),
            ("s", a.median_s(), b.median_s()),
            ("dist", a.median_dist(), b.median_dist()),
            ("rat", a.median_rat(), b.median_rat()),
        ] {
            let d = (x - y).abs();
            worst = worst.max(d);
            stats.push(format!("{}.{label} {:.3}/{:.3}", a.method.label(), x, y));
        }
    }
    worst = worst.max((rw[0].median_m_true() - ar[0].median_m_true()).abs());
    worst = worst.max((rw[0].median_s_true() - ar[0].median_s_true()).abs());
    let ok = worst < 0.1;
    println!("criterion 6   {}", stats.join(", "));
    println!(
        "criterion 6 (random-walk vs AR volatility, matched seeds): {}: max |diff| {worst:.4} < 0.1",
        if ok { "PASS" } else { "FAIL" }
    );
    assert!(ok);
}

#[test]
fn criterion_7_likelihood_ordering() {
    let cfg = DgpConfig::benchmark(100, 1.0, 0.03, SEED).unwrap();
    let mut wins = 0usize;
    let mut total = 0usize;
    for rep in 0..REPS {
        let sim = simulate_replication(&cfg, rep).unwrap();
        if let Ok(ests) = fgls_pipeline(&sim.observations, &cfg.spec, 2, None) {
            total += 1;
            if ests[2].loglik >= ests[1].loglik {
                wins += 1;
            }
        }
    }
    let ok = wins * 100 >= total * 60;
    println!(
        "criterion 7 (second re-weighted pass attains higher likelihood): {}: {wins}/{total} \
         replications (needs >= 60%)",
        if ok { "PASS" } else { "FAIL" }
    );
    assert!(ok);
}

#[test]
fn criterion_8_property_suites() {
    let suite = identity_suite();
    let required = [
        ("c_round_trip", 1e-12),
        ("solver_backend_agreement", 1e-8),
        ("likelihood_dual_path", 1e-6),
        ("weight_rescaling_invariance", 1e-10),
    ];
    let mut ok = true;
    for (name, tol) in required {
        let check = suite
            .iter()
            .find(|c| c.name == name)
            .unwrap_or_else(|| panic!("missing identity {name}"));
        let this_ok = check.max_dev <= tol;
        ok &= this_ok;
        println!(
            "criterion 8   {name}: {} (max dev {:.3e}, tol {tol:.0e})",
            if this_ok { "PASS" } else { "FAIL" },
            check.max_dev
        );
    }

    // Deterministic merge: bit-identical tables for any worker count.
    let cfg = DgpConfig::benchmark(60, 0.2, 0.03, 7).unwrap();
    let reference = run_replications(&cfg, 12, 2, 1).unwrap();
    for threads in [2, 3] {
        let other = run_replications(&cfg, 12, 2, threads).unwrap();
        let same = reference.iter().zip(&other).all(|(a, b)| tables_bit_equal(a, b));
        ok &= same;
        println!(
            "criterion 8   merge determinism with {threads} workers: {}",
            if same { "PASS" } else { "FAIL" }
        );
    }
    println!(
        "criterion 8 (property suites): {}",
        if ok { "PASS" } else { "FAIL" }
    );
    assert!(ok);
}

fn tables_bit_equal(a: &MetricTable, b: &MetricTable) -> bool {
    let v = |xs: &[f64], ys: &[f64]| {
        xs.len() == ys.len()
            && xs
                .iter()
                .zip(ys)
                .all(|(x, y)| x.to_bits() == y.to_bits())
    };
    a.method == b.method
        && a.n_reps == b.n_reps
        && a.rejections == b.rejections
        && v(&a.m_true, &b.m_true)
        && v(&a.s_true, &b.s_true)
        && v(&a.m_est, &b.m_est)
        && v(&a.s_est, &b.s_est)
        && v(&a.dist, &b.dist)
        && v(&a.rat, &b.rat)
        && a.rat_excluded == b.rat_excluded
}

#[test]
fn snr_monotonicity_of_overfitting() {
    // Supporting property: the OLS deviation ratio is non-decreasing in the
    // observation noise scale.
    let rats = [
        cell_h002()[0].median_rat(),
        cell_h02()[0].median_rat(),
        cell_h1()[0].median_rat(),
        cell(100, 10.0, ErrorKind::Gaussian)[0].median_rat(),
    ];
    let ok = rats.windows(2).all(|w| w[1] >= w[0]);
    println!(
        "snr monotonicity: {}: OLS median rat across rising noise scales: {rats:.3?}",
        if ok { "PASS" } else { "FAIL" }
    );
    assert!(ok);
}
