//! Simpson's index of diversity: the probability that two individuals drawn
//! at random belong to different species.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::distributions::{expected_clusters, gnb_mean, sample_cluster_structure, ClusterSizes, Params};
use crate::error::{Error, Result};
use crate::math::{ln_factorial, log_add_exp};
use crate::partition::{LogRForward, LogRTable};

/// Above this gNB mean, [`DiversityMode::Auto`] switches to Monte Carlo.
pub const AUTO_MONTE_CARLO_MEAN: f64 = 500.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DiversityMode {
    /// Closed form at `a = 0`, exact-truncated while the gNB mean is at most
    /// [`AUTO_MONTE_CARLO_MEAN`], Monte Carlo beyond.
    Auto,
    ExactTruncated,
    MonteCarlo,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiversityConfig {
    pub mode: DiversityMode,
    pub tail_epsilon: f64,
    pub n_cap: usize,
    pub mc_draws: usize,
}

impl Default for DiversityConfig {
    fn default() -> Self {
        DiversityConfig {
            mode: DiversityMode::Auto,
            tail_epsilon: 1e-8,
            n_cap: 2000,
            mc_draws: 20,
        }
    }
}

impl DiversityConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.tail_epsilon > 0.0 && self.tail_epsilon < 1.0) {
            return Err(Error::param("tail_epsilon must lie in (0, 1)"));
        }
        if self.n_cap < 2 {
            return Err(Error::param("n_cap must be at least 2"));
        }
        if self.mc_draws < 1 {
            return Err(Error::param("mc_draws must be at least 1"));
        }
        Ok(())
    }
}

/// `Ŝ = 1 − Σ n_k (n_k − 1) / (n (n − 1))`.
pub fn simpson_sample_estimate(sizes: &ClusterSizes) -> Result<f64> {
    let n = sizes.n();
    if n < 2 {
        return Err(Error::InvalidData(format!(
            "Simpson's estimate needs n >= 2, got {n}"
        )));
    }
    let same: u128 = sizes
        .sizes()
        .iter()
        .map(|&c| c as u128 * (c as u128 - 1))
        .sum();
    let pairs = n as u128 * (n as u128 - 1);
    Ok(1.0 - same as f64 / pairs as f64)
}

/// `P(z_1 ≠ z_2 | n, θ) = gamma0 p^{−a} R(2, 2) / R(1, 1)`.
pub fn prob_distinct_pair(n: usize, params: &Params, rtable: &LogRTable) -> Result<f64> {
    if n < 2 {
        return Err(Error::param("pair probabilities need n >= 2"));
    }
    rtable.check(n, params, &[1, 2])?;
    Ok((params.ln_new_cluster_weight() + rtable.at(2, 2) - rtable.at(1, 1)).exp())
}

/// The same probability through `[1 + (1 − a) / (gamma0 p^{−a}) · R(2,1) / R(2,2)]^{−1}`.
pub fn prob_distinct_pair_complement(
    n: usize,
    params: &Params,
    rtable: &LogRTable,
) -> Result<f64> {
    if n < 2 {
        return Err(Error::param("pair probabilities need n >= 2"));
    }
    rtable.check(n, params, &[2])?;
    let ratio = ((1.0 - params.a()).ln() - params.ln_new_cluster_weight() + rtable.at(2, 1)
        - rtable.at(2, 2))
    .exp();
    Ok(1.0 / (1.0 + ratio))
}

/// `P(z_1 ≠ z_2 | n, θ)` for every `n` in `2..=max_n` from one forward pass;
/// entries `0` and `1` are `NaN`.
pub fn prob_distinct_pair_by_size(params: &Params, max_n: usize) -> Vec<f64> {
    let mut out = vec![f64::NAN; max_n.max(1) + 1];
    if max_n < 2 {
        return out;
    }
    let w = params.ln_new_cluster_weight();
    let mut r11 = LogRForward::new(params, 1, 1).expect("valid start");
    let mut r22 = LogRForward::new(params, 2, 2).expect("valid start");
    r11.advance();
    for slot in out.iter_mut().take(max_n + 1).skip(2) {
        *slot = (w + r22.log_total() - r11.log_total()).exp();
        r11.advance();
        r22.advance();
    }
    out
}

/// Model-based Simpson index `S_θ = P(z_1 ≠ z_2 | θ)` with `n ~ gNB(θ)`
/// conditioned on `n >= 2`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimpsonTheta {
    pub value: f64,
    /// Which evaluation actually ran (never `Auto`).
    pub mode: DiversityMode,
    /// Monte Carlo standard error; `None` for deterministic evaluations.
    pub std_error: Option<f64>,
    /// Largest sample size included in the exact sum.
    pub n_max: usize,
    /// gNB mass beyond `n_max`, bounding the truncation error.
    pub shortfall: f64,
    /// `true` when `n_cap` bound before `tail_epsilon` was reached.
    pub truncated: bool,
}

pub fn simpson_theta<R: Rng + ?Sized>(
    params: &Params,
    config: &DiversityConfig,
    rng: &mut R,
) -> Result<SimpsonTheta> {
    config.validate()?;
    match config.mode {
        DiversityMode::ExactTruncated => Ok(simpson_theta_exact(params, config)),
        DiversityMode::MonteCarlo => simpson_theta_monte_carlo(params, config, rng),
        DiversityMode::Auto => {
            if params.is_zero_discount() {
                let g = params.gamma0();
                Ok(SimpsonTheta {
                    value: g / (1.0 + g),
                    mode: DiversityMode::ExactTruncated,
                    std_error: None,
                    n_max: usize::MAX,
                    shortfall: 0.0,
                    truncated: false,
                })
            } else if gnb_mean(params) > AUTO_MONTE_CARLO_MEAN {
                simpson_theta_monte_carlo(params, config, rng)
            } else {
                Ok(simpson_theta_exact(params, config))
            }
        }
    }
}

fn simpson_theta_exact(params: &Params, config: &DiversityConfig) -> SimpsonTheta {
    let w = params.ln_new_cluster_weight();
    let ln_p = params.p().ln();
    let ln_g0 = -expected_clusters(params);
    // ln gNB(n) = n ln p − ln n! − gamma0 κ + ln(gamma0 p^{−a}) + ln R_n(1, 1)
    let mut r11 = LogRForward::new(params, 1, 1).expect("valid start");
    let mut r22 = LogRForward::new(params, 2, 2).expect("valid start");
    let ln_g1 = ln_p + ln_g0 + w + r11.log_total();
    let mut cum = ln_g0.exp() + ln_g1.exp();
    r11.advance();

    let mut ln_mass = f64::NEG_INFINITY;
    let mut ln_acc = f64::NEG_INFINITY;
    let mut n = 2;
    loop {
        let ln_r11 = r11.log_total();
        let ln_gnb = n as f64 * ln_p - ln_factorial(n) + ln_g0 + w + ln_r11;
        let ln_pair = w + r22.log_total() - ln_r11;
        ln_mass = log_add_exp(ln_mass, ln_gnb);
        ln_acc = log_add_exp(ln_acc, ln_gnb + ln_pair);
        cum += ln_gnb.exp();
        if cum >= 1.0 - config.tail_epsilon || n >= config.n_cap {
            break;
        }
        r11.advance();
        r22.advance();
        n += 1;
    }
    let shortfall = (1.0 - cum).max(0.0);
    let value = if ln_mass == f64::NEG_INFINITY {
        // all mass at n < 2 to double precision; fall back to the n = 2 term
        (w - log_add_exp(w, (1.0 - params.a()).ln())).exp()
    } else {
        (ln_acc - ln_mass).exp()
    };
    SimpsonTheta {
        value,
        mode: DiversityMode::ExactTruncated,
        std_error: None,
        n_max: n,
        shortfall,
        truncated: shortfall > config.tail_epsilon,
    }
}

fn simpson_theta_monte_carlo<R: Rng + ?Sized>(
    params: &Params,
    config: &DiversityConfig,
    rng: &mut R,
) -> Result<SimpsonTheta> {
    let max_attempts = 10_000 * config.mc_draws;
    let mut sizes = Vec::with_capacity(config.mc_draws);
    let mut attempts = 0;
    while sizes.len() < config.mc_draws {
        attempts += 1;
        if attempts > max_attempts {
            return Err(Error::Sampler(format!(
                "P(n >= 2) too small for rejection sampling at {params:?}"
            )));
        }
        let n = sample_cluster_structure(params, rng)?.n();
        if n >= 2 {
            sizes.push(n);
        }
    }
    let max_n = sizes.iter().copied().max().unwrap_or(2);
    let by_size = prob_distinct_pair_by_size(params, max_n);
    let values: Vec<f64> = sizes.iter().map(|&n| by_size[n]).collect();
    let k = values.len() as f64;
    let mean = values.iter().sum::<f64>() / k;
    let var = if values.len() > 1 {
        values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (k - 1.0)
    } else {
        0.0
    };
    Ok(SimpsonTheta {
        value: mean,
        mode: DiversityMode::MonteCarlo,
        std_error: Some((var / k).sqrt()),
        n_max: max_n,
        shortfall: 0.0,
        truncated: false,
    })
}

/// Mean, median and central 50% / 95% percentile ranges.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub mean: f64,
    pub median: f64,
    pub p25: f64,
    pub p75: f64,
    pub p2_5: f64,
    pub p97_5: f64,
}

impl Summary {
    pub fn covers_50(&self, x: f64) -> bool {
        self.p25 <= x && x <= self.p75
    }

    pub fn covers_95(&self, x: f64) -> bool {
        self.p2_5 <= x && x <= self.p97_5
    }
}

/// Percentile with linear interpolation between order statistics at
/// position `q (N − 1)`.
pub fn percentile(sorted: &[f64], q: f64) -> f64 {
    let h = q * (sorted.len() - 1) as f64;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

pub fn summarize(values: &[f64]) -> Result<Summary> {
    if values.is_empty() {
        return Err(Error::InvalidData("cannot summarize an empty sample".into()));
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    Ok(Summary {
        mean: values.iter().sum::<f64>() / values.len() as f64,
        median: percentile(&sorted, 0.5),
        p25: percentile(&sorted, 0.25),
        p75: percentile(&sorted, 0.75),
        p2_5: percentile(&sorted, 0.025),
        p97_5: percentile(&sorted, 0.975),
    })
}

/// Posterior summary of `S_θ` over MCMC draws `(θ_j, S_θj)`.
pub fn posterior_simpson(draws: &[(Params, f64)]) -> Result<Summary> {
    let values: Vec<f64> = draws.iter().map(|(_, s)| *s).collect();
    summarize(&values)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::distributions::gnb_log_pmf;
    use crate::math::LogStirlingTable;
    use crate::partition::RTableMode;
    use crate::rng::seeded;

    fn params(g: f64, a: f64, p: f64) -> Params {
        Params::new(g, a, p).unwrap()
    }

    fn sizes(v: Vec<usize>) -> ClusterSizes {
        ClusterSizes::new(v).unwrap()
    }

    #[test]
    fn sample_estimate_examples() {
        assert_eq!(simpson_sample_estimate(&sizes(vec![1; 20])).unwrap(), 1.0);
        assert_eq!(simpson_sample_estimate(&sizes(vec![9])).unwrap(), 0.0);
        assert!(simpson_sample_estimate(&sizes(vec![1])).is_err());
        let mut treg = vec![1; 40];
        treg.extend([2; 5]);
        treg.extend([3; 5]);
        treg.extend([4; 2]);
        treg.extend([5; 3]);
        let s = simpson_sample_estimate(&sizes(treg.clone())).unwrap();
        assert!((s - (1.0 - 124.0 / 7656.0)).abs() < 1e-15);
        treg.reverse();
        assert_eq!(simpson_sample_estimate(&sizes(treg)).unwrap(), s);
    }

    #[test]
    fn pair_probability_zero_discount() {
        let g = 1.9;
        let th = params(g, 0.0, 0.3);
        for n in [2, 10, 100] {
            let r = LogRTable::build(n, &th, RTableMode::Frontier { keep: vec![1, 2] }).unwrap();
            assert!((prob_distinct_pair(n, &th, &r).unwrap() - g / (1.0 + g)).abs() < 1e-12);
        }
    }

    #[test]
    fn pair_probability_two_forms_agree() {
        for th in [params(1.0, 0.5, 0.5), params(0.3, -2.0, 0.8), params(7.0, 0.9, 0.1)] {
            for n in [2, 3, 17, 120] {
                let r = LogRTable::build(n, &th, RTableMode::Frontier { keep: vec![1, 2] }).unwrap();
                let x = prob_distinct_pair(n, &th, &r).unwrap();
                let y = prob_distinct_pair_complement(n, &th, &r).unwrap();
                assert!((x - y).abs() < 1e-12);
                assert!(x > 0.0 && x < 1.0);
            }
        }
    }

    #[test]
    fn pair_probability_at_two() {
        let th = params(1.4, 0.3, 0.6);
        let r = LogRTable::build(2, &th, RTableMode::Full).unwrap();
        let w = 1.4 * 0.6f64.powf(-0.3);
        let want = w / (w + 0.7);
        assert!((prob_distinct_pair(2, &th, &r).unwrap() - want).abs() < 1e-14);
    }

    #[test]
    fn pair_probability_depends_on_size() {
        let th = params(1.0, 0.5, 0.5);
        let r10 = LogRTable::build(10, &th, RTableMode::Frontier { keep: vec![1, 2] }).unwrap();
        let r100 = LogRTable::build(100, &th, RTableMode::Frontier { keep: vec![1, 2] }).unwrap();
        let d = prob_distinct_pair(10, &th, &r10).unwrap() - prob_distinct_pair(100, &th, &r100).unwrap();
        assert!(d.abs() > 1e-4, "{d}");
    }

    #[test]
    fn series_matches_backward_tables() {
        let th = params(0.7, 0.4, 0.45);
        let series = prob_distinct_pair_by_size(&th, 60);
        for n in 2..=60 {
            let r = LogRTable::build(n, &th, RTableMode::Frontier { keep: vec![1, 2] }).unwrap();
            assert!((series[n] - prob_distinct_pair(n, &th, &r).unwrap()).abs() < 1e-12);
        }
    }

    #[test]
    fn exact_mode_matches_direct_sum() {
        let th = params(1.0, 0.5, 0.3);
        let cfg = DiversityConfig {
            mode: DiversityMode::ExactTruncated,
            ..Default::default()
        };
        let got = simpson_theta(&th, &cfg, &mut seeded(0)).unwrap();
        assert!(!got.truncated);
        assert!(got.shortfall <= cfg.tail_epsilon);

        let t = LogStirlingTable::new(got.n_max, th.a()).unwrap();
        let series = prob_distinct_pair_by_size(&th, got.n_max);
        let mut num = 0.0;
        let mut den = 0.0;
        for n in 2..=got.n_max {
            let g = gnb_log_pmf(n, &th, &t).unwrap().exp();
            num += g * series[n];
            den += g;
        }
        assert!((got.value - num / den).abs() < 1e-12);
    }

    #[test]
    fn exact_and_monte_carlo_agree() {
        let th = params(1.0, 0.5, 0.3);
        let exact = simpson_theta(
            &th,
            &DiversityConfig {
                mode: DiversityMode::ExactTruncated,
                ..Default::default()
            },
            &mut seeded(0),
        )
        .unwrap();
        let mc = simpson_theta(
            &th,
            &DiversityConfig {
                mode: DiversityMode::MonteCarlo,
                mc_draws: 10_000,
                ..Default::default()
            },
            &mut seeded(3),
        )
        .unwrap();
        let se = mc.std_error.unwrap();
        assert!((exact.value - mc.value).abs() < 3.0 * se, "{} vs {} ± {se}", exact.value, mc.value);
    }

    #[test]
    fn zero_discount_in_every_mode() {
        let g = 2.5;
        let th = params(g, 0.0, 0.4);
        let want = g / (1.0 + g);
        for mode in [DiversityMode::Auto, DiversityMode::ExactTruncated, DiversityMode::MonteCarlo] {
            let cfg = DiversityConfig {
                mode,
                mc_draws: 500,
                ..Default::default()
            };
            let got = simpson_theta(&th, &cfg, &mut seeded(1)).unwrap();
            assert!((got.value - want).abs() < 1e-9, "{mode:?}: {}", got.value);
        }
    }

    #[test]
    fn truncation_is_reported() {
        let th = params(50.0, 0.5, 0.9);
        let cfg = DiversityConfig {
            mode: DiversityMode::ExactTruncated,
            n_cap: 20,
            ..Default::default()
        };
        let got = simpson_theta(&th, &cfg, &mut seeded(0)).unwrap();
        assert!(got.truncated);
        assert_eq!(got.n_max, 20);
        assert!(got.shortfall > cfg.tail_epsilon);
    }

    #[test]
    fn n_cap_is_irrelevant_once_tail_is_met() {
        let th = params(2.0, -0.5, 0.6);
        let base = DiversityConfig {
            mode: DiversityMode::ExactTruncated,
            ..Default::default()
        };
        let a = simpson_theta(&th, &base, &mut seeded(0)).unwrap();
        let b = simpson_theta(&th, &DiversityConfig { n_cap: 100_000, ..base.clone() }, &mut seeded(0)).unwrap();
        assert_eq!(a.value, b.value);
    }

    #[test]
    fn summary_examples() {
        let s = summarize(&[0.3; 7]).unwrap();
        assert_eq!(s.mean, 0.3);
        assert_eq!(s.median, 0.3);
        assert_eq!(s.p2_5, s.p97_5);
        let xs: Vec<f64> = (1..=10).map(|k| k as f64 / 10.0).collect();
        let s = summarize(&xs).unwrap();
        assert!((s.median - 0.55).abs() < 1e-12);
        assert!((s.p2_5 - 0.1225).abs() < 1e-12);
        assert!((s.p97_5 - 0.9775).abs() < 1e-12);
        assert!(summarize(&[]).is_err());
    }

    #[test]
    fn config_validation() {
        assert!(DiversityConfig::default().validate().is_ok());
        assert!(DiversityConfig { tail_epsilon: 0.0, ..Default::default() }.validate().is_err());
        assert!(DiversityConfig { n_cap: 1, ..Default::default() }.validate().is_err());
        assert!(DiversityConfig { mc_draws: 0, ..Default::default() }.validate().is_err());
    }
}
