//! Marginal count laws of the gNBP and its generative samplers.

use rand::Rng;
use rand_distr::{Distribution, Gamma, Poisson};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::math::{
    is_zero_discount, ln_factorial, log_gamma_ratio_unchecked, log_sum_exp, LogStirlingTable,
};

/// The model triple `(gamma0, a, p)`.
///
/// `gamma0 > 0` is the mass of the base measure, `a < 1` the discount and
/// `p ∈ (0, 1)` the probability parameter. The generalized gamma scale is
/// `c = (1 − p) / p`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawParams", into = "RawParams")]
pub struct Params {
    gamma0: f64,
    a: f64,
    p: f64,
}

#[derive(Serialize, Deserialize)]
struct RawParams {
    gamma0: f64,
    a: f64,
    p: f64,
}

impl TryFrom<RawParams> for Params {
    type Error = Error;
    fn try_from(r: RawParams) -> Result<Self> {
        Params::new(r.gamma0, r.a, r.p)
    }
}

impl From<Params> for RawParams {
    fn from(p: Params) -> Self {
        RawParams {
            gamma0: p.gamma0,
            a: p.a,
            p: p.p,
        }
    }
}

impl Params {
    pub fn new(gamma0: f64, a: f64, p: f64) -> Result<Self> {
        if !(gamma0 > 0.0 && gamma0.is_finite()) {
            return Err(Error::param(format!("gamma0 must be positive, got {gamma0}")));
        }
        if !(a < 1.0 && a.is_finite()) {
            return Err(Error::param(format!("discount a must be < 1, got {a}")));
        }
        if !(p > 0.0 && p < 1.0) {
            return Err(Error::param(format!("p must lie in (0, 1), got {p}")));
        }
        Ok(Params { gamma0, a, p })
    }

    pub fn gamma0(&self) -> f64 {
        self.gamma0
    }

    pub fn a(&self) -> f64 {
        self.a
    }

    pub fn p(&self) -> f64 {
        self.p
    }

    pub fn with_gamma0(self, gamma0: f64) -> Result<Self> {
        Params::new(gamma0, self.a, self.p)
    }

    pub fn with_a(self, a: f64) -> Result<Self> {
        Params::new(self.gamma0, a, self.p)
    }

    pub fn with_p(self, p: f64) -> Result<Self> {
        Params::new(self.gamma0, self.a, p)
    }

    /// Generalized gamma scale `c = (1 − p) / p`.
    pub fn scale(&self) -> f64 {
        (1.0 - self.p) / self.p
    }

    /// `ln(gamma0 · p^{−a})`, the log weight of opening a new cluster.
    #[inline]
    pub fn ln_new_cluster_weight(&self) -> f64 {
        self.gamma0.ln() - self.a * self.p.ln()
    }

    pub fn is_zero_discount(&self) -> bool {
        is_zero_discount(self.a)
    }
}

/// Block sizes `(n_1, ..., n_l)` of a cluster structure.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
pub struct ClusterSizes {
    sizes: Vec<usize>,
}

impl ClusterSizes {
    pub fn new(sizes: Vec<usize>) -> Result<Self> {
        if sizes.contains(&0) {
            return Err(Error::InvalidData("cluster sizes must be positive".into()));
        }
        Ok(ClusterSizes { sizes })
    }

    pub fn empty() -> Self {
        ClusterSizes { sizes: Vec::new() }
    }

    pub fn sizes(&self) -> &[usize] {
        &self.sizes
    }

    /// Sample size `n = Σ n_k`.
    pub fn n(&self) -> usize {
        self.sizes.iter().sum()
    }

    /// Number of clusters `l`.
    pub fn l(&self) -> usize {
        self.sizes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sizes.is_empty()
    }

    /// `(size, multiplicity)` pairs sorted by size.
    pub fn histogram(&self) -> Vec<(usize, usize)> {
        let mut sorted = self.sizes.clone();
        sorted.sort_unstable();
        let mut out: Vec<(usize, usize)> = Vec::new();
        for s in sorted {
            match out.last_mut() {
                Some((size, count)) if *size == s => *count += 1,
                _ => out.push((s, 1)),
            }
        }
        out
    }

    /// `Σ_k ln(Γ(n_k − a) / Γ(1 − a))`.
    pub fn log_gamma_ratio_sum(&self, a: f64) -> f64 {
        self.histogram()
            .into_iter()
            .map(|(s, m)| m as f64 * log_gamma_ratio_unchecked(s, a))
            .sum()
    }

    pub fn into_sizes(self) -> Vec<usize> {
        self.sizes
    }
}

/// `ln κ` where `κ(a, p) = (1 − (1−p)^a) / (a p^a)`.
///
/// Evaluated in log space so that very negative discounts, where `(1−p)^a`
/// overflows, still give a finite answer.
pub fn log_kappa(a: f64, p: f64) -> f64 {
    let ln_q = (-p).ln_1p();
    if is_zero_discount(a) {
        return (-ln_q).ln();
    }
    let x = a * ln_q;
    let ln_num = if a > 0.0 {
        // 1 − e^x with x < 0
        (-x.exp_m1()).ln()
    } else if x > 30.0 {
        // e^x − 1 with x > 0
        x + (-(-x).exp()).ln_1p()
    } else {
        x.exp_m1().ln()
    };
    ln_num - a.abs().ln() - a * p.ln()
}

/// `κ(θ) = ∫(1 − e^{−s}) ρ(ds) = (1 − (1−p)^a) / (a p^a)`; `−ln(1−p)` at `a = 0`.
pub fn kappa(params: &Params) -> f64 {
    log_kappa(params.a, params.p).exp()
}

/// `gamma0 · κ(θ)`, the Poisson mean of the number of clusters.
pub fn expected_clusters(params: &Params) -> f64 {
    (params.gamma0.ln() + log_kappa(params.a, params.p)).exp()
}

/// `ln p_N(n | gamma0, a, p)`, the generalized negative binomial PMF.
pub fn gnb_log_pmf(n: usize, params: &Params, stirling: &LogStirlingTable) -> Result<f64> {
    stirling.check(n, params.a)?;
    let base = n as f64 * params.p.ln() - ln_factorial(n) - expected_clusters(params);
    Ok(base + log_partition_mass(n, params, stirling))
}

/// `ln Σ_{l=0}^n gamma0^l p^{−al} S_a(n, l)`. Caller checks the table.
pub(crate) fn log_partition_mass(n: usize, params: &Params, stirling: &LogStirlingTable) -> f64 {
    let w = params.ln_new_cluster_weight();
    let terms: Vec<f64> = (0..=n)
        .map(|l| l as f64 * w + stirling.get(n, l))
        .collect();
    log_sum_exp(&terms)
}

/// Mean of the gNB law, `gamma0 (p / (1 − p))^{1 − a}`.
pub fn gnb_mean(params: &Params) -> f64 {
    params.gamma0 * (params.p / (1.0 - params.p)).powf(1.0 - params.a)
}

/// Variance of the gNB law, `mean · (1 − a p) / (1 − p)`.
pub fn gnb_variance(params: &Params) -> f64 {
    gnb_mean(params) * (1.0 - params.a * params.p) / (1.0 - params.p)
}

/// `ln p_U(u | a, p)`, the truncated negative binomial PMF of a cluster size.
///
/// Uses `Γ(u − a) / Γ(−a) · (1−p)^{−a} / (1 − (1−p)^{−a}) =
/// Γ(u − a) / Γ(1 − a) · p^{−a} / κ`, which removes the sign flip of both
/// `Γ(−a)` and the denominator at `a = 0`.
pub fn tnb_log_pmf(u: usize, a: f64, p: f64) -> Result<f64> {
    if u < 1 {
        return Err(Error::param("TNB support starts at u = 1"));
    }
    check_ap(a, p)?;
    Ok(tnb_log_pmf_unchecked(u, a, p))
}

fn tnb_log_pmf_unchecked(u: usize, a: f64, p: f64) -> f64 {
    log_gamma_ratio_unchecked(u, a) - ln_factorial(u) + (u as f64 - a) * p.ln() - log_kappa(a, p)
}

fn check_ap(a: f64, p: f64) -> Result<()> {
    if !(a < 1.0) {
        return Err(Error::param(format!("discount a must be < 1, got {a}")));
    }
    if !(p > 0.0 && p < 1.0) {
        return Err(Error::param(format!("p must lie in (0, 1), got {p}")));
    }
    Ok(())
}

/// One draw from TNB(a, p) by an inverse-CDF walk over the PMF ratios
/// `p_U(u+1) / p_U(u) = p (u − a) / (u + 1)`.
pub fn tnb_sample<R: Rng + ?Sized>(a: f64, p: f64, rng: &mut R) -> u64 {
    let target: f64 = rng.random();
    let ln_p = p.ln();
    let mut u: u64 = 1;
    let mut ln_pmf = tnb_log_pmf_unchecked(1, a, p);
    let mut cum = ln_pmf.exp();
    while cum < target {
        let ratio_ln = ln_p + (u as f64 - a).ln() - (u as f64 + 1.0).ln();
        ln_pmf += ratio_ln;
        u += 1;
        let term = ln_pmf.exp();
        cum += term;
        // rounding can leave the total a hair below one
        if ratio_ln < 0.0 && term <= cum * 1e-17 {
            break;
        }
    }
    u
}

pub(crate) fn poisson_sample<R: Rng + ?Sized>(lambda: f64, rng: &mut R) -> Result<u64> {
    if lambda <= 0.0 {
        return Ok(0);
    }
    let d = Poisson::new(lambda)
        .map_err(|e| Error::Sampler(format!("Poisson({lambda}): {e}")))?;
    Ok(d.sample(rng) as u64)
}

/// Compound Poisson draw: `l ~ Po(gamma0 κ)`, then `l` i.i.d. TNB(a, p) sizes.
pub fn sample_cluster_structure<R: Rng + ?Sized>(
    params: &Params,
    rng: &mut R,
) -> Result<ClusterSizes> {
    let l = poisson_sample(expected_clusters(params), rng)?;
    let sizes = (0..l)
        .map(|_| tnb_sample(params.a, params.p, rng) as usize)
        .collect();
    Ok(ClusterSizes { sizes })
}

/// Finite-atom generalized gamma process draw for `a < 0`, thinned by Poisson
/// counts: `K ~ Po(−gamma0 c^a / a)`, `r_k ~ Gamma(−a, 1/c)`,
/// `n_k ~ Po(r_k)`, zeros dropped.
pub fn sample_crm_counts<R: Rng + ?Sized>(params: &Params, rng: &mut R) -> Result<ClusterSizes> {
    let a = params.a;
    if !(a < 0.0) {
        return Err(Error::param(format!(
            "finite-atom sampler needs a < 0, got {a}"
        )));
    }
    let c = params.scale();
    let atoms = poisson_sample(-params.gamma0 * c.powf(a) / a, rng)?;
    let weight = Gamma::new(-a, 1.0 / c).map_err(|e| Error::Sampler(e.to_string()))?;
    let mut sizes = Vec::new();
    for _ in 0..atoms {
        let r = weight.sample(rng);
        let count = poisson_sample(r, rng)?;
        if count > 0 {
            sizes.push(count as usize);
        }
    }
    Ok(ClusterSizes { sizes })
}
