//! End-to-end checks of the command-line surface: file schemas, byte-level
//! determinism, error exit codes, and the simulate-then-estimate round
//! trip.

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn tvgls(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_tvgls"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn read_lines(path: &Path) -> Vec<String> {
    fs::read_to_string(path)
        .unwrap()
        .lines()
        .map(|s| s.to_string())
        .collect()
}

/// Parse a simple numeric CSV produced by the tool (skip the label column).
fn read_matrix(path: &Path) -> Vec<Vec<f64>> {
    read_lines(path)[1..]
        .iter()
        .map(|line| {
            line.split(',')
                .skip(1)
                .map(|v| v.parse::<f64>().unwrap())
                .collect()
        })
        .collect()
}

#[test]
fn simulate_is_byte_deterministic_with_expected_shapes() {
    let dir = tempfile::tempdir().unwrap();
    let out1 = dir.path().join("a");
    let out2 = dir.path().join("b");
    for out in [&out1, &out2] {
        let run = tvgls(&[
            "simulate",
            "--obs",
            "100",
            "--seed",
            "5",
            "--h-scale",
            "0.2",
            "--out-dir",
            out.to_str().unwrap(),
        ]);
        assert!(run.status.success(), "{run:?}");
    }
    let y1 = fs::read(out1.join("y.csv")).unwrap();
    let y2 = fs::read(out2.join("y.csv")).unwrap();
    assert_eq!(y1, y2, "same seed must give byte-identical output");

    assert_eq!(read_lines(&out1.join("y.csv")).len(), 101); // header + T
    assert_eq!(read_lines(&out1.join("beta_true.csv")).len(), 99); // header + (T - p)
    assert!(read_lines(&out1.join("y.csv"))[0].starts_with("t,y1,y2,y3"));
}

#[test]
fn simulate_zero_state_noise_gives_zero_coefficients() {
    let dir = tempfile::tempdir().unwrap();
    let run = tvgls(&[
        "simulate",
        "--obs",
        "50",
        "--q-scale",
        "0",
        "--seed",
        "3",
        "--out-dir",
        dir.path().to_str().unwrap(),
    ]);
    assert!(run.status.success());
    for row in read_matrix(&dir.path().join("beta_true.csv")) {
        assert!(row.iter().all(|v| *v == 0.0));
    }
}

#[test]
fn replicate_smoke_run_schema() {
    let dir = tempfile::tempdir().unwrap();
    let started = std::time::Instant::now();
    let run = tvgls(&[
        "replicate",
        "--obs",
        "100",
        "--reps",
        "1",
        "--seed",
        "2",
        "--h-scale",
        "0.2",
        "--out-dir",
        dir.path().to_str().unwrap(),
    ]);
    assert!(run.status.success(), "{run:?}");
    assert!(started.elapsed().as_secs() < 10, "smoke run too slow");
    let lines = read_lines(&dir.path().join("metrics.csv"));
    assert_eq!(lines[0], "method,stat,value,n_reps,seed,rejections");
    // 2 truth rows + 3 methods x 4 statistics.
    assert_eq!(lines.len(), 1 + 2 + 12);
    assert!(lines[1].starts_with("true,median_m,"));
    assert!(lines.iter().any(|l| l.starts_with("fgls2,median_rat,")));
}

#[test]
fn simulate_then_estimate_round_trip_recovers_the_path() {
    let dir = tempfile::tempdir().unwrap();
    let sim_dir = dir.path().join("sim");
    let est_dir = dir.path().join("est");
    let run = tvgls(&[
        "simulate",
        "--obs",
        "250",
        "--h-scale",
        "0.02",
        "--q-scale",
        "0.03",
        "--seed",
        "11",
        "--out-dir",
        sim_dir.to_str().unwrap(),
    ]);
    assert!(run.status.success());
    let run = tvgls(&[
        "estimate",
        "--data",
        sim_dir.join("y.csv").to_str().unwrap(),
        "--lags",
        "2",
        "--steps",
        "2",
        "--out-dir",
        est_dir.to_str().unwrap(),
    ]);
    assert!(run.status.success(), "{run:?}");

    let truth = read_matrix(&sim_dir.join("beta_true.csv"));
    let ols: Vec<Vec<f64>> = read_matrix(&est_dir.join("path_ols.csv"));
    assert_eq!(ols.len(), truth.len());
    let m = truth[0].len();
    assert_eq!(ols[0].len(), 2 * m); // coefficients plus standard errors

    // Median over coefficients of the mean absolute error.
    let n = truth.len() as f64;
    let mut dist: Vec<f64> = (0..m)
        .map(|i| {
            truth
                .iter()
                .zip(&ols)
                .map(|(t, e)| (t[i] - e[i]).abs())
                .sum::<f64>()
                / n
        })
        .collect();
    dist.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let median = dist[(dist.len() - 1) / 2];
    assert!(
        median <= 0.17,
        "round-trip median coefficient error {median} too large"
    );

    // The re-weighted passes deliver visibly less volatile paths: the
    // median over coefficients of the per-coefficient time standard
    // deviation shrinks.
    let fgls2 = read_matrix(&est_dir.join("path_fgls2.csv"));
    let volatility = |path: &[Vec<f64>]| {
        let rows = path.len() as f64;
        let mut sds: Vec<f64> = (0..m)
            .map(|i| {
                let mean = path.iter().map(|r| r[i]).sum::<f64>() / rows;
                (path.iter().map(|r| (r[i] - mean).powi(2)).sum::<f64>() / (rows - 1.0)).sqrt()
            })
            .collect();
        sds.sort_by(|a, b| a.partial_cmp(b).unwrap());
        sds[(sds.len() - 1) / 2]
    };
    assert!(
        volatility(&fgls2) < volatility(&ols),
        "re-weighted path should be less volatile than the OLS path: {} vs {}",
        volatility(&fgls2),
        volatility(&ols)
    );
}

#[test]
fn estimate_passes_date_labels_through_and_reports_intercepts() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("macro.csv");
    let mut text = String::from("quarter,r,pi\n");
    let mut state = (0.5f64, -0.3f64);
    for i in 0..80 {
        state = (
            0.8 * state.0 + 0.05 * ((i * 7 % 13) as f64 - 6.0) / 6.0,
            0.7 * state.1 + 0.04 * ((i * 5 % 11) as f64 - 5.0) / 5.0,
        );
        text.push_str(&format!(
            "19{}Q{},{},{}\n",
            60 + i / 4,
            i % 4 + 1,
            1.0 + state.0,
            0.5 + state.1
        ));
    }
    fs::write(&data, text).unwrap();
    let run = tvgls(&[
        "estimate",
        "--data",
        data.to_str().unwrap(),
        "--lags",
        "1",
        "--steps",
        "1",
        "--intercept-mode",
        "time-invariant",
        "--out-dir",
        dir.path().join("out").to_str().unwrap(),
    ]);
    assert!(run.status.success(), "{run:?}");
    let stdout = String::from_utf8_lossy(&run.stdout).to_string();
    assert!(stdout.contains("ols.intercept1="));
    assert!(stdout.contains("fgls1.loglik="));
    let lines = read_lines(&dir.path().join("out").join("path_fgls1.csv"));
    assert!(lines[1].starts_with("1960Q2,"), "labels must pass through: {}", lines[1]);
}

#[test]
fn estimate_rejects_malformed_input_with_line_numbers() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("bad.csv");
    fs::write(&data, "t,a,b\n1,0.1,0.2\n2,0.3\n3,0.4,0.5\n").unwrap();
    let run = tvgls(&[
        "estimate",
        "--data",
        data.to_str().unwrap(),
        "--out-dir",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(run.status.code(), Some(2));
    let stderr = String::from_utf8_lossy(&run.stderr).to_string();
    assert!(stderr.contains("line 3"), "stderr: {stderr}");

    // Too short a sample is also an input error.
    let short = dir.path().join("short.csv");
    fs::write(&short, "t,a\n1,0.1\n2,0.2\n3,0.3\n").unwrap();
    let run = tvgls(&[
        "estimate",
        "--data",
        short.to_str().unwrap(),
        "--lags",
        "2",
        "--out-dir",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(run.status.code(), Some(2));
}

#[test]
fn estimate_flags_degenerate_constant_series() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("const.csv");
    let mut text = String::from("t,a\n");
    for i in 0..40 {
        text.push_str(&format!("{},{}\n", i + 1, 2.5));
    }
    fs::write(&data, text).unwrap();
    let run = tvgls(&[
        "estimate",
        "--data",
        data.to_str().unwrap(),
        "--lags",
        "1",
        "--out-dir",
        dir.path().to_str().unwrap(),
    ]);
    // Collinear regressors: either a numerical error (exit 3) or a
    // successful run whose reported state covariance is numerically zero.
    match run.status.code() {
        Some(0) => {
            let stdout = String::from_utf8_lossy(&run.stdout).to_string();
            let trace_q = stdout
                .lines()
                .find_map(|l| l.strip_prefix("ols.trace_q="))
                .expect("summary includes the state covariance trace")
                .parse::<f64>()
                .unwrap();
            assert!(
                trace_q.abs() < 1e-12,
                "degenerate input should leave a near-zero state covariance, got {trace_q}"
            );
        }
        Some(3) => {}
        other => panic!("unexpected exit {other:?}"),
    }
}

#[test]
fn validate_reports_and_honors_tolerance_override() {
    let run = tvgls(&["validate", "--instances", "3", "--seed", "9"]);
    assert!(run.status.success(), "{run:?}");
    let stdout = String::from_utf8_lossy(&run.stdout).to_string();
    assert!(stdout.contains("check=smoother_equivalence_path"));
    assert!(stdout.contains("status=PASS"));
    assert!(!stdout.contains("status=FAIL"));

    // Identical seeds reproduce identical deviation numbers.
    let again = tvgls(&["validate", "--instances", "3", "--seed", "9"]);
    assert_eq!(run.stdout, again.stdout);

    // An absurdly tight tolerance must be honored and fail loudly.
    let tight = tvgls(&[
        "validate",
        "--instances",
        "2",
        "--seed",
        "9",
        "--tolerance",
        "1e-18",
    ]);
    assert_eq!(tight.status.code(), Some(3));
    let stdout = String::from_utf8_lossy(&tight.stdout).to_string();
    assert!(stdout.contains("status=FAIL"));
}

#[test]
fn replicate_is_reproducible_across_thread_counts() {
    let dir = tempfile::tempdir().unwrap();
    let mut outputs = Vec::new();
    for threads in ["1", "2"] {
        let out = dir.path().join(format!("t{threads}"));
        let run = tvgls(&[
            "replicate",
            "--obs",
            "60",
            "--reps",
            "8",
            "--seed",
            "13",
            "--h-scale",
            "0.2",
            "--threads",
            threads,
            "--out-dir",
            out.to_str().unwrap(),
        ]);
        assert!(run.status.success(), "{run:?}");
        outputs.push(fs::read(out.join("metrics.csv")).unwrap());
    }
    assert_eq!(outputs[0], outputs[1]);
}
