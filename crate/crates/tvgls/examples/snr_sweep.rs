//! A miniature replication sweep: how estimation accuracy responds to the
//! signal-to-noise ratio. For each observation-noise scale the harness runs
//! parallel replications and reports the median accuracy statistics per
//! method. Increase `REPS` for table-quality numbers.
//!
//! Run with: cargo run --release --example snr_sweep

use tvgls::{run_replications, DgpConfig};

const REPS: usize = 40;

fn main() -> tvgls::Result<()> {
    println!(
        "{:>8} {:>10} | {:>8} {:>8} | {:>8} {:>8} | {:>8} {:>8}",
        "h", "SNR", "ols rat", "dist", "f1 rat", "dist", "f2 rat", "dist"
    );
    for h_scale in [0.002, 0.02, 0.2, 1.0] {
        let cfg = DgpConfig::benchmark(100, h_scale, 0.03, 1)?;
        let tables = run_replications(&cfg, REPS, 2, 0)?;
        println!(
            "{:>8} {:>10.4} | {:>8.3} {:>8.3} | {:>8.3} {:>8.3} | {:>8.3} {:>8.3}",
            h_scale,
            cfg.snr(),
            tables[0].median_rat(),
            tables[0].median_dist(),
            tables[1].median_rat(),
            tables[1].median_dist(),
            tables[2].median_rat(),
            tables[2].median_dist(),
        );
    }
    println!("\nrat > 1: the estimated path moves more than the true one (over-fitting);");
    println!("rat < 1: the estimate is over-smoothed. Low SNR pushes OLS above 1, never");
    println!("toward zero, which is the no-pile-up behavior of the stacked regression.");
    Ok(())
}
