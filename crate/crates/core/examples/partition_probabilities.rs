//! Partition probabilities for a fixed sample size: every set partition of
//! [4], their total mass, and the failure of the addition rule away from
//! a = 0.
//!
//! ```bash
//! cargo run -p gnbp --example partition_probabilities
//! ```

use gnbp::math::LogStirlingTable;
use gnbp::partition::{addition_rule_residual, gcrsf_log_eppf, set_partitions, PartitionBlocks};
use gnbp::{ClusterSizes, Params};

fn main() -> gnbp::Result<()> {
    let theta = Params::new(1.0, 0.5, 0.5)?;
    let table = LogStirlingTable::new(10, theta.a())?;
    let mut total = 0.0;
    for z in set_partitions(4) {
        let p = gcrsf_log_eppf(&z.cluster_sizes(), &theta, &table)?.exp();
        total += p;
        println!("{:<28} {p:.5}", format!("{:?}", PartitionBlocks::from(&z).blocks()));
    }
    println!("sum = {total:.12}");

    let prefix = ClusterSizes::new(vec![1, 1])?;
    for a in [0.0, 0.5] {
        let th = theta.with_a(a)?;
        let t = LogStirlingTable::new(10, a)?;
        let r = addition_rule_residual(&prefix, 10, &th, &t)?;
        println!("a = {a}: P({{1}},{{2}}) as a prefix of n = 10 minus at n = 2: {r:+.3e}");
    }
    Ok(())
}
