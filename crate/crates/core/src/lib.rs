//! Generalized negative binomial process (gNBP) species models.
//!
//! The gNBP mixes a generalized gamma process with a Poisson process. Its
//! marginal sample size follows the generalized negative binomial
//! distribution, the number of clusters is Poisson, and cluster sizes are
//! i.i.d. truncated negative binomial. The partition of a sample of size `n`
//! depends on `n` itself: the family violates the addition rule unless the
//! discount `a` is zero.
//!
//! This crate provides:
//!
//! - [`math`]: log-space kernels and generalized Stirling numbers.
//! - [`distributions`]: the gNB / TNB laws and the two generative samplers.
//! - [`partition`]: ECPF, EPPF, the `R` recursion, sequential and Gibbs
//!   partition samplers, cluster-count laws and the addition-rule audit.
//! - [`diversity`]: Simpson's index of diversity, both the sample estimate and
//!   the model-based pair-distinctness probabilities.
//! - [`inference`]: Gibbs / griddy-Gibbs MCMC over `(gamma0, a, p)`.
//! - [`data`]: frequency-count I/O and the bundled datasets.
//! - [`cli`]: the batch commands behind the `gnbp` binary.
//!
//! ```
//! use gnbp::data::bundled;
//! use gnbp::diversity::simpson_sample_estimate;
//!
//! let est = bundled("est-tomato").unwrap();
//! let s_hat = simpson_sample_estimate(&est.to_cluster_sizes()).unwrap();
//! assert!((s_hat - 0.99931).abs() < 5e-5);
//! ```

pub mod cli;
pub mod data;
pub mod distributions;
pub mod diversity;
mod error;
pub mod inference;
pub mod math;
pub mod partition;
pub mod rng;

pub use distributions::{ClusterSizes, Params};
pub use error::{Error, Result};
