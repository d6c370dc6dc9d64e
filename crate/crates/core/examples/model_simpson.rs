//! Model-based Simpson index: exact pair probabilities for each sample size,
//! and the index averaged over a random sample size by truncated summation
//! or Monte Carlo.
//!
//! ```bash
//! cargo run -p gnbp --example model_simpson
//! ```

use gnbp::diversity::{prob_distinct_pair_by_size, simpson_theta, DiversityConfig, DiversityMode};
use gnbp::rng::seeded;
use gnbp::Params;

fn main() -> gnbp::Result<()> {
    let theta = Params::new(1.0, 0.5, 0.5)?;
    let by_n = prob_distinct_pair_by_size(&theta, 50);
    for n in [2, 5, 10, 50] {
        println!("P(z1 != z2 | n = {n:>2}) = {:.6}", by_n[n]);
    }

    let mut rng = seeded(2);
    for mode in [DiversityMode::ExactTruncated, DiversityMode::MonteCarlo] {
        let cfg = DiversityConfig { mode, mc_draws: 10_000, ..Default::default() };
        let s = simpson_theta(&theta, &cfg, &mut rng)?;
        println!("{mode:?}: S = {:.6}  se {:?}  n_max {}", s.value, s.std_error, s.n_max);
    }
    Ok(())
}
