use super::rtable::{LogRTable, RTableMode};
use super::Assignments;
use crate::distributions::{expected_clusters, ClusterSizes, Params};
use crate::error::{Error, Result};
use crate::math::{ln_factorial, log_sum_exp, LogStirlingTable};

/// `ln Σ_{l=0}^n gamma0^l p^{−al} S_a(n, l)`, the normalizer shared by the
/// EPPF, the cluster-count law and the gNB PMF.
pub fn log_partition_mass(n: usize, params: &Params, stirling: &LogStirlingTable) -> Result<f64> {
    stirling.check(n, params.a())?;
    Ok(crate::distributions::log_partition_mass(n, params, stirling))
}

/// Log ECPF: the joint probability of a canonical label sequence with these
/// block sizes and its sample size `n`.
pub fn ecpf_log(sizes: &ClusterSizes, params: &Params) -> f64 {
    let n = sizes.n();
    let l = sizes.l() as f64;
    -ln_factorial(n) - expected_clusters(params)
        + l * params.gamma0().ln()
        + (n as f64 - params.a() * l) * params.p().ln()
        + sizes.log_gamma_ratio_sum(params.a())
}

/// Log EPPF of one set partition with these block sizes, given the sample
/// size `n = Σ n_k` (the generalized Chinese restaurant sampling formula).
pub fn gcrsf_log_eppf(
    sizes: &ClusterSizes,
    params: &Params,
    stirling: &LogStirlingTable,
) -> Result<f64> {
    let n = sizes.n();
    let z = log_partition_mass(n, params, stirling)?;
    Ok(sizes.l() as f64 * params.ln_new_cluster_weight() + sizes.log_gamma_ratio_sum(params.a())
        - z)
}

/// PMF of the number of clusters in a sample of size `n`, indexed `0..=n`.
pub fn cluster_count_pmf(
    n: usize,
    params: &Params,
    stirling: &LogStirlingTable,
) -> Result<Vec<f64>> {
    stirling.check(n, params.a())?;
    let w = params.ln_new_cluster_weight();
    let mut logw: Vec<f64> = (0..=n).map(|l| l as f64 * w + stirling.get(n, l)).collect();
    crate::math::normalize_log_weights(&mut logw);
    Ok(logw)
}

/// `ln p(z_{1:i} | n)`: the marginal law of the first `i` labels in a sample
/// of size `n`.
pub fn subset_marginal_log(
    prefix: &Assignments,
    n: usize,
    params: &Params,
    stirling: &LogStirlingTable,
    rtable: &LogRTable,
) -> Result<f64> {
    let i = prefix.len();
    if i < 1 || i > n {
        return Err(Error::param(format!("prefix length {i} outside 1..={n}")));
    }
    rtable.check(n, params, &[i])?;
    let z = log_partition_mass(n, params, stirling)?;
    Ok(prefix_log_weight(&prefix.cluster_sizes(), params, rtable) - z)
}

fn prefix_log_weight(sizes: &ClusterSizes, params: &Params, rtable: &LogRTable) -> f64 {
    let l = sizes.l();
    rtable.at(sizes.n(), l)
        + l as f64 * params.ln_new_cluster_weight()
        + sizes.log_gamma_ratio_sum(params.a())
}

/// PMF of the number of clusters among the first `i` of `n` elements,
/// indexed `0..=i`.
pub fn subset_cluster_count_pmf(
    i: usize,
    n: usize,
    params: &Params,
    stirling: &LogStirlingTable,
    rtable: &LogRTable,
) -> Result<Vec<f64>> {
    if i < 1 || i > n {
        return Err(Error::param(format!("i = {i} outside 1..={n}")));
    }
    rtable.check(n, params, &[i])?;
    stirling.check(i, params.a())?;
    let w = params.ln_new_cluster_weight();
    let mut logw: Vec<f64> = std::iter::once(f64::NEG_INFINITY)
        .chain((1..=i).map(|l| l as f64 * w + stirling.get(i, l) + rtable.at(i, l)))
        .collect();
    crate::math::normalize_log_weights(&mut logw);
    Ok(logw)
}

/// Addition-rule audit for a partition `Π_m` with the given block sizes.
///
/// Returns `Σ_ext p(ext | n) − p(Π_m | m)`, summing over the one-element
/// extensions of `Π_m` to `[m + 1]` (join any block or open a new one) under
/// sample size `n > m`. Zero means the family is sampling-consistent here.
pub fn addition_rule_residual(
    sizes: &ClusterSizes,
    n: usize,
    params: &Params,
    stirling: &LogStirlingTable,
) -> Result<f64> {
    let m = sizes.n();
    if m < 1 || m >= n {
        return Err(Error::param(format!("need 1 <= m < n, got m = {m}, n = {n}")));
    }
    let rtable = LogRTable::build(n, params, RTableMode::Frontier { keep: vec![m + 1] })?;
    let z = log_partition_mass(n, params, stirling)?;
    let mut terms = Vec::with_capacity(sizes.l() + 1);
    for k in 0..=sizes.l() {
        let mut ext = sizes.sizes().to_vec();
        match ext.get_mut(k) {
            Some(s) => *s += 1,
            None => ext.push(1),
        }
        let ext = ClusterSizes::new(ext)?;
        terms.push(prefix_log_weight(&ext, params, &rtable) - z);
    }
    let extended = log_sum_exp(&terms).exp();
    let base = gcrsf_log_eppf(sizes, params, stirling)?.exp();
    Ok(extended - base)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::distributions::gnb_log_pmf;
    use crate::partition::set_partitions;

    fn params(g: f64, a: f64, p: f64) -> Params {
        Params::new(g, a, p).unwrap()
    }

    #[test]
    fn ecpf_single_element() {
        let th = params(1.6, 0.3, 0.45);
        let want = -expected_clusters(&th) + 1.6f64.ln() + 0.7 * 0.45f64.ln();
        let got = ecpf_log(&ClusterSizes::new(vec![1]).unwrap(), &th);
        assert!((got - want).abs() < 1e-14);
    }

    #[test]
    fn ecpf_enumeration_recovers_gnb() {
        let th = params(1.0, 0.5, 0.5);
        let t = LogStirlingTable::new(6, 0.5).unwrap();
        for n in 1..=6 {
            let total: f64 = set_partitions(n).map(|z| ecpf_log(&z.cluster_sizes(), &th).exp()).sum();
            let want = gnb_log_pmf(n, &th, &t).unwrap().exp();
            assert!((total - want).abs() < 1e-12 * want.max(1e-300) * 10.0, "n={n}");
        }
    }

    #[test]
    fn ecpf_zero_discount_factorization() {
        let th = params(1.4, 0.0, 0.3);
        let sizes = ClusterSizes::new(vec![3, 1, 2]).unwrap();
        // ∏ (n_k − 1)! = 2! 0! 1!
        let want = 1.4 * 0.7f64.ln() + 3.0 * 1.4f64.ln() + 6.0 * 0.3f64.ln() + 2f64.ln()
            - ln_factorial(6);
        assert!((ecpf_log(&sizes, &th) - want).abs() < 1e-12);
    }

    #[test]
    fn eppf_examples() {
        let th = params(2.0, 0.5, 0.3);
        let t = LogStirlingTable::new(4, 0.5).unwrap();
        let one = ClusterSizes::new(vec![1]).unwrap();
        assert!(gcrsf_log_eppf(&one, &th, &t).unwrap().abs() < 1e-15);
        let total: f64 = set_partitions(4)
            .map(|z| gcrsf_log_eppf(&z.cluster_sizes(), &th, &t).unwrap().exp())
            .sum();
        assert!((total - 1.0).abs() < 1e-10);

        let g = 1.8;
        let th = params(g, 0.0, 0.7);
        let t = LogStirlingTable::new(2, 0.0).unwrap();
        let same = gcrsf_log_eppf(&ClusterSizes::new(vec![2]).unwrap(), &th, &t).unwrap();
        assert!((same.exp() - 1.0 / (1.0 + g)).abs() < 1e-14);
    }

    #[test]
    fn eppf_equals_ecpf_over_gnb() {
        let th = params(3.0, -0.7, 0.4);
        let t = LogStirlingTable::new(20, th.a()).unwrap();
        for sizes in [vec![5, 1, 1], vec![20], vec![1; 9], vec![4, 4, 3, 2]] {
            let s = ClusterSizes::new(sizes).unwrap();
            let lhs = gcrsf_log_eppf(&s, &th, &t).unwrap();
            let rhs = ecpf_log(&s, &th) - gnb_log_pmf(s.n(), &th, &t).unwrap();
            assert!((lhs - rhs).abs() < 1e-12);
        }
    }

    #[test]
    fn cluster_count_examples() {
        let th = params(1.0, 0.5, 0.5);
        let t = LogStirlingTable::new(10, 0.5).unwrap();
        let pmf = cluster_count_pmf(1, &th, &t).unwrap();
        assert_eq!(pmf[0], 0.0);
        assert!((pmf[1] - 1.0).abs() < 1e-15);

        let pmf = cluster_count_pmf(3, &th, &t).unwrap();
        let w = 0.5f64.powf(-0.5);
        let raw = [w * 0.75, w * w * 1.5, w * w * w];
        let s: f64 = raw.iter().sum();
        for l in 1..=3 {
            assert!((pmf[l] - raw[l - 1] / s).abs() < 1e-14);
        }
        let pmf = cluster_count_pmf(10, &th, &t).unwrap();
        assert!((pmf.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn subset_marginal_properties() {
        let th = params(1.0, 0.5, 0.5);
        let n = 6;
        let t = LogStirlingTable::new(n, 0.5).unwrap();
        let r = LogRTable::build(n, &th, RTableMode::Full).unwrap();

        for z in set_partitions(n) {
            let full = subset_marginal_log(&z, n, &th, &t, &r).unwrap();
            let eppf = gcrsf_log_eppf(&z.cluster_sizes(), &th, &t).unwrap();
            assert!((full - eppf).abs() < 1e-12);
        }

        for prefix in set_partitions(3) {
            let base = subset_marginal_log(&prefix, n, &th, &t, &r).unwrap().exp();
            let mut sum = 0.0;
            for k in 1..=prefix.n_clusters() + 1 {
                let mut labels = prefix.labels().to_vec();
                labels.push(k);
                let ext = Assignments::new(labels).unwrap();
                sum += subset_marginal_log(&ext, n, &th, &t, &r).unwrap().exp();
            }
            assert!((sum - base).abs() < 1e-12);
        }
    }

    #[test]
    fn subset_marginal_is_size_free_at_zero_discount() {
        let th = params(1.3, 0.0, 0.5);
        let t = LogStirlingTable::new(15, 0.0).unwrap();
        let z = Assignments::new(vec![1, 2, 1, 3]).unwrap();
        let r4 = LogRTable::build(4, &th, RTableMode::Full).unwrap();
        let at_i = subset_marginal_log(&z, 4, &th, &t, &r4).unwrap();
        for n in 5..=15 {
            let r = LogRTable::build(n, &th, RTableMode::Frontier { keep: vec![4] }).unwrap();
            let at_n = subset_marginal_log(&z, n, &th, &t, &r).unwrap();
            assert!((at_n - at_i).abs() < 1e-10);
        }
    }

    #[test]
    fn subset_cluster_count_reduces_and_normalizes() {
        let th = params(1.0, 0.5, 0.5);
        let t = LogStirlingTable::new(10, 0.5).unwrap();
        let r = LogRTable::build(10, &th, RTableMode::Full).unwrap();
        let at_n = subset_cluster_count_pmf(10, 10, &th, &t, &r).unwrap();
        let direct = cluster_count_pmf(10, &th, &t).unwrap();
        for (x, y) in at_n.iter().zip(&direct) {
            assert!((x - y).abs() < 1e-12);
        }
        for i in 1..=10 {
            let pmf = subset_cluster_count_pmf(i, 10, &th, &t, &r).unwrap();
            assert!((pmf.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn addition_rule_holds_only_at_zero_discount() {
        let t0 = LogStirlingTable::new(30, 0.0).unwrap();
        let th0 = params(1.0, 0.0, 0.5);
        for sizes in [vec![1, 1], vec![2], vec![3, 1, 1]] {
            let s = ClusterSizes::new(sizes).unwrap();
            for n in [s.n() + 1, 10, 30] {
                let r = addition_rule_residual(&s, n, &th0, &t0).unwrap();
                assert!(r.abs() < 1e-10, "{r}");
            }
        }
        let th = params(1.0, 0.5, 0.5);
        let t = LogStirlingTable::new(10, 0.5).unwrap();
        let s = ClusterSizes::new(vec![1, 1]).unwrap();
        let r = addition_rule_residual(&s, 10, &th, &t).unwrap();
        assert!(r.abs() > 1e-3, "{r}");
        assert!(addition_rule_residual(&s, 2, &th, &t).is_err());
    }
}
