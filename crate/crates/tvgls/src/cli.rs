//! Command-line surface: simulate samples, reproduce the replication
//! tables, estimate user-supplied series, and run the identity suite.
//!
//! Exit-code contract: 0 on success, 2 on input/validation errors, 3 on
//! numerical failures.

use std::fs;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use nalgebra::DVector;

use crate::csvio::{fmt_float, read_data_csv, write_table, OutputFormat};
use crate::error::{Error, Result};
use crate::estimator::{fgls_pipeline, EstimateSet};
use crate::model::{InterceptMode, ModelSpec, ObservationSet};
use crate::simulation::{run_replications, simulate_tvvar, DgpConfig, ErrorKind, MetricTable};
use crate::validate::{run_identity_suite, SuiteConfig};

#[derive(Debug, Parser)]
#[command(
    name = "tvgls",
    about = "GLS-based estimation of time-varying AR/VAR coefficient paths",
    version
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate one sample from the time-varying VAR data generating process.
    Simulate(SimulateArgs),
    /// Run a Monte Carlo replication study and write the metric table.
    Replicate(ReplicateArgs),
    /// Estimate coefficient paths for a CSV series.
    Estimate(EstimateArgs),
    /// Run the numerical identity suite.
    Validate(ValidateArgs),
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum ErrorKindArg {
    Gaussian,
    Mixture,
    SvRw,
    SvAr,
}

impl From<ErrorKindArg> for ErrorKind {
    fn from(value: ErrorKindArg) -> Self {
        match value {
            ErrorKindArg::Gaussian => ErrorKind::Gaussian,
            ErrorKindArg::Mixture => ErrorKind::Mixture,
            ErrorKindArg::SvRw => ErrorKind::SvRandomWalk,
            ErrorKindArg::SvAr => ErrorKind::SvAutoregressive,
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum InterceptArg {
    None,
    TimeVarying,
    TimeInvariant,
}

impl From<InterceptArg> for InterceptMode {
    fn from(value: InterceptArg) -> Self {
        match value {
            InterceptArg::None => InterceptMode::None,
            InterceptArg::TimeVarying => InterceptMode::TimeVarying,
            InterceptArg::TimeInvariant => InterceptMode::TimeInvariant,
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum FormatArg {
    Csv,
    Tsv,
}

impl From<FormatArg> for OutputFormat {
    fn from(value: FormatArg) -> Self {
        match value {
            FormatArg::Csv => OutputFormat::Csv,
            FormatArg::Tsv => OutputFormat::Tsv,
        }
    }
}

/// Shared data-generating-process flags.
#[derive(Debug, Args)]
pub struct DgpArgs {
    /// Total number of observations T (includes the lag pre-sample).
    #[arg(long, default_value_t = 100)]
    pub obs: usize,
    /// Number of variables k.
    #[arg(long, default_value_t = 3)]
    pub vars: usize,
    /// Lag order p.
    #[arg(long, default_value_t = 2)]
    pub lags: usize,
    /// Observation noise standard deviation.
    #[arg(long, default_value_t = 0.02)]
    pub h_scale: f64,
    /// Coefficient innovation standard deviation.
    #[arg(long, default_value_t = 0.03)]
    pub q_scale: f64,
    #[arg(long, value_enum, default_value_t = ErrorKindArg::Gaussian)]
    pub error_kind: ErrorKindArg,
    /// Log-variance persistence for the SV regimes (defaults to the regime's
    /// own convention: 1.0 for the random walk, 0.9 for the AR case).
    #[arg(long)]
    pub rho: Option<f64>,
    #[arg(long, value_enum, default_value_t = InterceptArg::TimeVarying)]
    pub intercept_mode: InterceptArg,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
}

impl DgpArgs {
    fn to_config(&self) -> Result<DgpConfig> {
        let spec = ModelSpec::new(
            self.vars,
            self.lags,
            self.obs,
            self.intercept_mode.into(),
        )?;
        let mut cfg = DgpConfig::new(
            spec,
            self.h_scale,
            self.q_scale,
            self.error_kind.into(),
            self.seed,
        )?;
        if let Some(rho) = self.rho {
            cfg = cfg.with_rho(rho);
            cfg.validate()?;
        }
        Ok(cfg)
    }
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[command(flatten)]
    pub dgp: DgpArgs,
    #[arg(long, default_value = "out")]
    pub out_dir: PathBuf,
    #[arg(long, value_enum, default_value_t = FormatArg::Csv)]
    pub format: FormatArg,
}

#[derive(Debug, Args)]
pub struct ReplicateArgs {
    #[command(flatten)]
    pub dgp: DgpArgs,
    /// Number of Monte Carlo replications.
    #[arg(long, default_value_t = 200)]
    pub reps: usize,
    /// Feasible-GLS passes after OLS (0, 1, or 2).
    #[arg(long, default_value_t = 2)]
    pub steps: usize,
    /// Worker threads (0 = all logical cores).
    #[arg(long, default_value_t = 0)]
    pub threads: usize,
    #[arg(long, default_value = "out")]
    pub out_dir: PathBuf,
    #[arg(long, value_enum, default_value_t = FormatArg::Csv)]
    pub format: FormatArg,
}

#[derive(Debug, Args)]
pub struct EstimateArgs {
    /// Input CSV: header row, period labels in the first column, one
    /// numeric column per variable.
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long, default_value_t = 2)]
    pub lags: usize,
    #[arg(long, default_value_t = 2)]
    pub steps: usize,
    #[arg(long, value_enum, default_value_t = InterceptArg::TimeVarying)]
    pub intercept_mode: InterceptArg,
    /// Initial coefficient vector, comma separated (defaults to the
    /// full-sample time-invariant fit).
    #[arg(long)]
    pub b0: Option<String>,
    #[arg(long, default_value = "out")]
    pub out_dir: PathBuf,
    #[arg(long, value_enum, default_value_t = FormatArg::Csv)]
    pub format: FormatArg,
}

#[derive(Debug, Args)]
pub struct ValidateArgs {
    /// Number of random instances per identity.
    #[arg(long, default_value_t = 25)]
    pub instances: usize,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    /// Size cap for the dense validation routines (n*k).
    #[arg(long, default_value_t = crate::model::DEFAULT_DENSE_CAP)]
    pub cap: usize,
    /// Override every identity's tolerance.
    #[arg(long)]
    pub tolerance: Option<f64>,
}

pub fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Simulate(args) => cmd_simulate(&args),
        Command::Replicate(args) => cmd_replicate(&args),
        Command::Estimate(args) => cmd_estimate(&args),
        Command::Validate(args) => cmd_validate(&args),
    }
}

fn ensure_out_dir(dir: &PathBuf) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir.clone(), e))
}

pub fn cmd_simulate(args: &SimulateArgs) -> Result<()> {
    let cfg = args.dgp.to_config()?;
    let sim = simulate_tvvar(&cfg)?;
    ensure_out_dir(&args.out_dir)?;
    let format: OutputFormat = args.format.into();

    let k = cfg.spec.k();
    let mut header = vec!["t".to_string()];
    header.extend((1..=k).map(|i| format!("y{i}")));
    let rows: Vec<Vec<String>> = sim
        .observations
        .rows()
        .iter()
        .enumerate()
        .map(|(t, row)| {
            let mut fields = vec![format!("{}", t + 1)];
            fields.extend(row.iter().map(|v| fmt_float(*v)));
            fields
        })
        .collect();
    let y_path = args.out_dir.join(format!("y.{}", format.extension()));
    write_table(&y_path, format, &header, &rows)?;

    let m = cfg.spec.m();
    let mut header = vec!["t".to_string()];
    header.extend((1..=m).map(|i| format!("b{i}")));
    let rows: Vec<Vec<String>> = sim
        .beta_true
        .beta
        .iter()
        .enumerate()
        .map(|(t, b)| {
            let mut fields = vec![format!("{}", cfg.spec.p() + t + 1)];
            fields.extend(b.iter().map(|v| fmt_float(*v)));
            fields
        })
        .collect();
    let beta_path = args.out_dir.join(format!("beta_true.{}", format.extension()));
    write_table(&beta_path, format, &header, &rows)?;

    println!("y={}", y_path.display());
    println!("beta_true={}", beta_path.display());
    println!("rejections={}", sim.rejections);
    Ok(())
}

fn metric_rows(table: &MetricTable) -> Vec<(String, String, f64)> {
    let label = table.method.label().to_string();
    vec![
        (label.clone(), "median_m".into(), table.median_m()),
        (label.clone(), "median_s".into(), table.median_s()),
        (label.clone(), "median_dist".into(), table.median_dist()),
        (label, "median_rat".into(), table.median_rat()),
    ]
}

pub fn cmd_replicate(args: &ReplicateArgs) -> Result<()> {
    let cfg = args.dgp.to_config()?;
    if args.steps > 2 {
        return Err(Error::invalid("steps", "steps must be 0, 1, or 2"));
    }
    let tables = run_replications(&cfg, args.reps, args.steps, args.threads)?;
    ensure_out_dir(&args.out_dir)?;
    let format: OutputFormat = args.format.into();

    let header: Vec<String> = ["method", "stat", "value", "n_reps", "seed", "rejections"]
        .iter()
        .map(|s| s.to_string())
        .collect();
    let mut entries: Vec<(String, String, f64)> = vec![
        ("true".into(), "median_m".into(), tables[0].median_m_true()),
        ("true".into(), "median_s".into(), tables[0].median_s_true()),
    ];
    for table in &tables {
        entries.extend(metric_rows(table));
    }
    let rows: Vec<Vec<String>> = entries
        .into_iter()
        .map(|(method, stat, value)| {
            vec![
                method,
                stat,
                fmt_float(value),
                format!("{}", tables[0].n_reps),
                format!("{}", tables[0].seed),
                format!("{}", tables[0].rejections),
            ]
        })
        .collect();
    let path = args.out_dir.join(format!("metrics.{}", format.extension()));
    write_table(&path, format, &header, &rows)?;

    println!("metrics={}", path.display());
    for table in &tables {
        println!(
            "{}.median_dist={}",
            table.method.label(),
            fmt_float(table.median_dist())
        );
        println!(
            "{}.median_rat={}",
            table.method.label(),
            fmt_float(table.median_rat())
        );
    }
    Ok(())
}

fn parse_b0(text: &str, m: usize) -> Result<DVector<f64>> {
    let values: Vec<f64> = text
        .split(',')
        .map(|s| {
            s.trim()
                .parse::<f64>()
                .map_err(|_| Error::invalid("b0", format!("cannot parse '{}'", s.trim())))
        })
        .collect::<Result<_>>()?;
    if values.len() != m {
        return Err(Error::invalid(
            "b0",
            format!("expected {m} values, got {}", values.len()),
        ));
    }
    Ok(DVector::from_vec(values))
}

fn write_path_file(
    args: &EstimateArgs,
    labels: &[String],
    est: &EstimateSet,
    m: usize,
) -> Result<PathBuf> {
    let format: OutputFormat = args.format.into();
    let mut header = vec!["t".to_string()];
    header.extend((1..=m).map(|i| format!("b{i}")));
    header.extend((1..=m).map(|i| format!("se{i}")));
    let rows: Vec<Vec<String>> = est
        .path
        .beta
        .iter()
        .zip(&est.mse_blocks)
        .enumerate()
        .map(|(t, (b, mse))| {
            let mut fields = vec![labels[t].clone()];
            fields.extend(b.iter().map(|v| fmt_float(*v)));
            fields.extend((0..m).map(|i| fmt_float(mse[(i, i)].max(0.0).sqrt())));
            fields
        })
        .collect();
    let path = args.out_dir.join(format!(
        "path_{}.{}",
        est.method.label(),
        format.extension()
    ));
    write_table(&path, format, &header, &rows)?;
    Ok(path)
}

pub fn cmd_estimate(args: &EstimateArgs) -> Result<()> {
    if args.steps > 2 {
        return Err(Error::invalid("steps", "steps must be 0, 1, or 2"));
    }
    let data = read_data_csv(&args.data)?;
    let t_total = data.rows.len();
    if t_total <= args.lags + 2 {
        return Err(Error::Input {
            line: t_total + 1,
            message: format!(
                "{} data rows cannot identify a model with {} lags; need at least {}",
                t_total,
                args.lags,
                args.lags + 3
            ),
        });
    }
    let k = data.rows[0].len();
    let spec = ModelSpec::new(k, args.lags, t_total, args.intercept_mode.into())?;
    let y = ObservationSet::new(data.rows.clone())?;
    let b0 = match &args.b0 {
        Some(text) => Some(parse_b0(text, spec.m())?),
        None => None,
    };
    let estimates = fgls_pipeline(&y, &spec, args.steps, b0)?;
    ensure_out_dir(&args.out_dir)?;

    let effective_labels = &data.labels[spec.p()..];
    for est in &estimates {
        let path = write_path_file(args, effective_labels, est, spec.m())?;
        println!("{}.path={}", est.method.label(), path.display());
    }
    for est in &estimates {
        let label = est.method.label();
        let trace_h = est.h_hat.trace();
        let trace_q = est.q_hat.trace();
        println!("{label}.loglik={}", fmt_float(est.loglik));
        println!("{label}.trace_h={}", fmt_float(trace_h));
        println!("{label}.trace_q={}", fmt_float(trace_q));
        println!("{label}.snr_hat={}", fmt_float(trace_q / trace_h));
        if let Some(v) = &est.path.v {
            for (i, value) in v.iter().enumerate() {
                println!("{label}.intercept{}={}", i + 1, fmt_float(*value));
            }
        }
        if est.jitter_fired {
            println!("{label}.jitter=1");
        }
    }
    Ok(())
}

pub fn cmd_validate(args: &ValidateArgs) -> Result<()> {
    let cfg = SuiteConfig {
        instances: args.instances,
        seed: args.seed,
        cap: args.cap,
        tol_override: args.tolerance,
    };
    let checks = run_identity_suite(&cfg)?;
    for check in &checks {
        println!(
            "check={} max_dev={} tol={} status={}",
            check.name,
            fmt_float(check.max_dev),
            fmt_float(check.tol),
            if check.passed() { "PASS" } else { "FAIL" }
        );
    }
    if let Some(bad) = checks.iter().find(|c| !c.passed()) {
        return Err(Error::IdentityBreach {
            name: bad.name,
            max_dev: bad.max_dev,
            tol: bad.tol,
            seed: cfg.seed,
        });
    }
    Ok(())
}
