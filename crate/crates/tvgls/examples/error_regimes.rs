//! Non-Gaussian and heteroskedastic error regimes: coefficient innovations
//! from a two-component normal mixture (abrupt breaks), and observation
//! noise with random-walk or AR(1) stochastic log variance. Matched seeds
//! make the RW-vs-AR comparison a paired experiment.
//!
//! Run with: cargo run --release --example error_regimes

use tvgls::{run_replications, DgpConfig, ErrorKind};

fn main() -> tvgls::Result<()> {
    let reps = 40;
    for kind in [
        ErrorKind::Mixture,
        ErrorKind::SvRandomWalk,
        ErrorKind::SvAutoregressive,
    ] {
        let cfg = DgpConfig::benchmark(100, 0.02, 0.03, 9)?.with_error_kind(kind);
        let tables = run_replications(&cfg, reps, 2, 0)?;
        println!("== {} (rho = {})", kind.label(), cfg.sv.rho);
        for table in &tables {
            println!(
                "   {:<6} median s {:.3} (true {:.3})  dist {:.3}  rat {:.3}",
                table.method.label(),
                table.median_s(),
                table.median_s_true(),
                table.median_dist(),
                table.median_rat(),
            );
        }
    }
    println!("\nThe two stochastic-volatility runs share seeds; their statistics differ");
    println!("only marginally, while the mixture regime thickens the tails of the");
    println!("coefficient innovations without breaking the estimators.");
    Ok(())
}
