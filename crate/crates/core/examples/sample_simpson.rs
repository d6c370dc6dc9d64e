//! Sample estimate of Simpson's index on the bundled datasets.
//!
//! ```bash
//! cargo run -p gnbp --example sample_simpson
//! ```

use gnbp::data::{bundled, BUNDLED_NAMES};
use gnbp::diversity::simpson_sample_estimate;

fn main() -> gnbp::Result<()> {
    for name in BUNDLED_NAMES {
        let sizes = bundled(name)?.to_cluster_sizes();
        println!("{name:<22} S_hat = {:.5}", simpson_sample_estimate(&sizes)?);
    }
    Ok(())
}
