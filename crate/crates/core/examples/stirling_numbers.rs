//! Generalized Stirling numbers in log space and the cluster-count law they
//! induce for a fixed sample size.
//!
//! ```bash
//! cargo run -p gnbp --example stirling_numbers
//! ```

use gnbp::math::LogStirlingTable;
use gnbp::partition::cluster_count_pmf;
use gnbp::Params;

fn main() -> gnbp::Result<()> {
    let table = LogStirlingTable::new(6, 0.5)?;
    println!("S_0.5(n, l), n = 1..6");
    for n in 1..=6 {
        let row: Vec<String> = (1..=n).map(|l| format!("{:>9.4}", table.get(n, l).exp())).collect();
        println!("{}", row.join(""));
    }

    // still finite far beyond f64 range
    let big = LogStirlingTable::new(1000, -1.0)?;
    println!("ln S_-1(1000, 10) = {:.3}", big.get(1000, 10));

    let n = 20;
    let theta = Params::new(1.0, 0.5, 0.5)?;
    let t = LogStirlingTable::new(n, theta.a())?;
    let pmf = cluster_count_pmf(n, &theta, &t)?;
    println!("P(l | n = {n}) at {theta:?}:");
    for (l, p) in pmf.iter().enumerate().filter(|(_, p)| **p > 1e-3) {
        println!("  l = {l:>2}  {p:.4}");
    }
    Ok(())
}
