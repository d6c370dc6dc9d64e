//! Collapsed Gibbs sweeps over the cluster labels of a fixed set of items.
//!
//! ```bash
//! cargo run -p gnbp --example gibbs_sampler
//! ```

use gnbp::partition::{gibbs_conditional, gibbs_sweep, Assignments};
use gnbp::rng::seeded;
use gnbp::Params;

fn main() -> gnbp::Result<()> {
    let theta = Params::new(2.0, 0.3, 0.5)?;
    let mut z = Assignments::new(vec![1; 12])?;
    println!("conditional of item 0: {:?}", gibbs_conditional(&z, 0, &theta));

    let mut rng = seeded(5);
    let mut clusters = 0.0;
    let sweeps = 5000;
    for t in 0..sweeps {
        z = gibbs_sweep(&z, &theta, &mut rng);
        if t < 5 {
            println!("{:?}", z.labels());
        }
        clusters += z.n_clusters() as f64;
    }
    println!("mean number of clusters over {sweeps} sweeps: {:.3}", clusters / sweeps as f64);
    Ok(())
}
