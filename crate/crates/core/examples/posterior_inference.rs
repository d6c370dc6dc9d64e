//! Posterior draws of (gamma0, a, p) and of Simpson's index for a T-cell
//! receptor repertoire.
//!
//! ```bash
//! cargo run -p gnbp --example posterior_inference
//! ```

use gnbp::cli::posterior_summary;
use gnbp::data::bundled;
use gnbp::diversity::{simpson_sample_estimate, DiversityConfig};
use gnbp::inference::{run_chain, AMode, ChainConfig};

fn main() -> gnbp::Result<()> {
    let sizes = bundled("tcr-treg-healthy-1")?.to_cluster_sizes();
    println!("sample estimate {:.4}", simpson_sample_estimate(&sizes)?);
    for a_mode in [AMode::Free, AMode::Fixed(0.0)] {
        let config = ChainConfig {
            seed: 1,
            a_mode,
            a_grid_step: 1e-3,
            ..Default::default()
        };
        let draws = run_chain(&sizes, &config, Some(&DiversityConfig::default()))?;
        let post = posterior_summary(&draws)?;
        let s = post.s_theta.expect("diversity requested");
        println!(
            "{a_mode}: a median {:+.3}, S median {:.4}, 95% [{:.4}, {:.4}]",
            post.a.median, s.median, s.p2_5, s.p97_5
        );
    }
    Ok(())
}
