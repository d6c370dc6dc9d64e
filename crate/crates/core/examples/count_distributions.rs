//! The generalized negative binomial law of the sample size, the truncated
//! negative binomial law of cluster sizes, and the compound Poisson sampler
//! that ties them together.
//!
//! ```bash
//! cargo run -p gnbp --example count_distributions
//! ```

use gnbp::distributions::{
    expected_clusters, gnb_log_pmf, gnb_mean, gnb_variance, sample_cluster_structure,
    sample_crm_counts, tnb_log_pmf,
};
use gnbp::math::LogStirlingTable;
use gnbp::rng::seeded;
use gnbp::Params;

fn main() -> gnbp::Result<()> {
    let theta = Params::new(1.0, 0.5, 0.5)?;
    let table = LogStirlingTable::new(10, theta.a())?;
    println!("gNB at {theta:?}: mean {:.4}, variance {:.4}", gnb_mean(&theta), gnb_variance(&theta));
    for n in 0..=10 {
        let pn = gnb_log_pmf(n, &theta, &table)?.exp();
        let pu = if n > 0 { tnb_log_pmf(n, theta.a(), theta.p())?.exp() } else { 0.0 };
        println!("  n = {n:>2}  gNB {pn:.5}  TNB {pu:.5}");
    }

    let mut rng = seeded(11);
    let wide = Params::new(5.0, 0.5, 0.8)?;
    println!("E[l] = {:.4} at {wide:?}", expected_clusters(&wide));
    for _ in 0..3 {
        let s = sample_cluster_structure(&wide, &mut rng)?;
        println!("  compound Poisson draw: n = {}, sizes {:?}", s.n(), s.sizes());
    }

    let neg = Params::new(2.0, -1.0, 0.4)?;
    let s = sample_crm_counts(&neg, &mut rng)?;
    println!("finite-atom draw at {neg:?}: n = {}, sizes {:?}", s.n(), s.sizes());
    Ok(())
}
