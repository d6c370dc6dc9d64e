//! Parse a frequency-count table, expand it, and subsample it.
//!
//! ```bash
//! cargo run -p gnbp --example frequency_counts
//! ```

use gnbp::data::{bundled, subsample_without_replacement, FrequencyCounts, BUNDLED_NAMES};
use gnbp::rng::seeded;

fn main() -> gnbp::Result<()> {
    let fc = FrequencyCounts::parse("multiplicity,count\n1,2\n2,1\n3,2\n")?;
    println!("n = {}, l = {}", fc.n(), fc.l());
    println!("sizes = {:?}", fc.to_cluster_sizes().sizes());
    println!("z     = {:?}", fc.to_assignments().labels());

    for name in BUNDLED_NAMES {
        let d = bundled(name)?;
        println!("{name:<22} n = {:>5}  l = {:>5}", d.n(), d.l());
    }

    let est = bundled("est-tomato")?.to_assignments();
    let mut rng = seeded(1);
    let sub = subsample_without_replacement(&est, 50, &mut rng)?;
    println!("size-50 EST subsample: {} distinct genes", sub.n_clusters());
    print!("{}", FrequencyCounts::from(&sub.cluster_sizes()).format());
    Ok(())
}
