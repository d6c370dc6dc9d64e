//! Exact partitions of a fixed sample size via the size-dependent prediction
//! rule, compared against the exact cluster-count law.
//!
//! ```bash
//! cargo run -p gnbp --example sequential_sampler
//! ```

use gnbp::math::LogStirlingTable;
use gnbp::partition::{cluster_count_pmf, sequential_sample, LogRTable, RTableMode};
use gnbp::rng::seeded;
use gnbp::Params;

fn main() -> gnbp::Result<()> {
    let n = 10;
    let theta = Params::new(1.0, 0.5, 0.5)?;
    let rtable = LogRTable::build(n, &theta, RTableMode::Full)?;
    let mut rng = seeded(3);
    println!("{:?}", sequential_sample(n, &theta, &rtable, &mut rng)?.labels());

    let draws = 20_000;
    let mut hist = vec![0usize; n + 1];
    for _ in 0..draws {
        hist[sequential_sample(n, &theta, &rtable, &mut rng)?.n_clusters()] += 1;
    }
    let exact = cluster_count_pmf(n, &theta, &LogStirlingTable::new(n, theta.a())?)?;
    println!(" l  empirical  exact");
    for l in 1..=n {
        println!("{l:>2}  {:.4}     {:.4}", hist[l] as f64 / draws as f64, exact[l]);
    }
    Ok(())
}
