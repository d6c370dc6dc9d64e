use rand::Rng;

use super::rtable::LogRTable;
use super::Assignments;
use crate::distributions::Params;
use crate::error::{Error, Result};

fn draw_index<R: Rng + ?Sized>(weights: &[f64], rng: &mut R) -> usize {
    let total: f64 = weights.iter().sum();
    let mut u = rng.random::<f64>() * total;
    for (k, &w) in weights.iter().enumerate() {
        if u < w {
            return k;
        }
        u -= w;
    }
    // rounding: fall back to the last positive weight
    weights.iter().rposition(|&w| w > 0.0).unwrap_or(0)
}

/// `P(z_{i+1} = k | z_{1:i}, n)` for the occupied clusters (in label order)
/// followed by the new-cluster probability. `counts` are the block sizes of
/// `z_{1:i}`, so `i = Σ counts`.
pub fn sequential_step_probabilities(
    counts: &[usize],
    params: &Params,
    rtable: &LogRTable,
) -> Result<Vec<f64>> {
    let i: usize = counts.iter().sum();
    let n = rtable.n();
    if i < 1 || i >= n {
        return Err(Error::param(format!("step index {i} outside 1..{n}")));
    }
    rtable.check(n, params, &[i, i + 1])?;
    Ok(step_probabilities(counts, i, params, rtable))
}

fn step_probabilities(counts: &[usize], i: usize, params: &Params, rtable: &LogRTable) -> Vec<f64> {
    let l = counts.len();
    let denom = rtable.at(i, l);
    let join = (rtable.at(i + 1, l) - denom).exp();
    let mut probs: Vec<f64> = counts
        .iter()
        .map(|&c| (c as f64 - params.a()) * join)
        .collect();
    probs.push((params.ln_new_cluster_weight() + rtable.at(i + 1, l + 1) - denom).exp());
    probs
}

/// Exact draw of a partition of `[n]` from the gCRSF by sequential
/// allocation. The table must be the full `R` table for `(n, params)`.
pub fn sequential_sample<R: Rng + ?Sized>(
    n: usize,
    params: &Params,
    rtable: &LogRTable,
    rng: &mut R,
) -> Result<Assignments> {
    rtable.check_all_rows(n, params)?;
    let mut labels = Vec::with_capacity(n);
    let mut counts: Vec<usize> = vec![1];
    labels.push(1);
    for i in 1..n {
        let probs = step_probabilities(&counts, i, params, rtable);
        let k = draw_index(&probs, rng);
        if k == counts.len() {
            counts.push(1);
        } else {
            counts[k] += 1;
        }
        labels.push(k + 1);
    }
    Ok(Assignments { labels })
}

/// Normalized full conditional of element `i` (0-based) given the rest:
/// the clusters of `z^{−i}` in order of first appearance, then a new cluster.
pub fn gibbs_conditional(z: &Assignments, i: usize, params: &Params) -> Vec<f64> {
    let rest: Vec<usize> = z
        .labels()
        .iter()
        .enumerate()
        .filter(|&(j, _)| j != i)
        .map(|(_, &k)| k)
        .collect();
    let rest = Assignments::canonicalize(&rest);
    let mut w: Vec<f64> = rest
        .counts()
        .into_iter()
        .map(|c| c as f64 - params.a())
        .collect();
    w.push(params.ln_new_cluster_weight().exp());
    let total: f64 = w.iter().sum();
    w.iter_mut().for_each(|x| *x /= total);
    w
}

/// One systematic Gibbs sweep over every element, reassigning by weights
/// `n_k^{−i} − a` for occupied clusters and `gamma0 p^{−a}` for a new one.
/// Labels are re-canonicalized once at the end.
pub fn gibbs_sweep<R: Rng + ?Sized>(z: &Assignments, params: &Params, rng: &mut R) -> Assignments {
    let mut labels: Vec<usize> = z.labels().iter().map(|&k| k - 1).collect();
    let mut counts = z.counts();
    let new_weight = params.ln_new_cluster_weight().exp();
    let a = params.a();
    let mut weights = Vec::with_capacity(counts.len() + 1);
    for i in 0..labels.len() {
        counts[labels[i]] -= 1;
        weights.clear();
        weights.extend(
            counts
                .iter()
                .map(|&c| if c > 0 { c as f64 - a } else { 0.0 }),
        );
        weights.push(new_weight);
        let k = draw_index(&weights, rng);
        let k = if k == counts.len() {
            match counts.iter().position(|&c| c == 0) {
                Some(empty) => empty,
                None => {
                    counts.push(0);
                    counts.len() - 1
                }
            }
        } else {
            k
        };
        counts[k] += 1;
        labels[i] = k;
    }
    Assignments::canonicalize(&labels)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::math::LogStirlingTable;
    use crate::partition::{cluster_count_pmf, RTableMode};
    use crate::rng::seeded;

    fn params(g: f64, a: f64, p: f64) -> Params {
        Params::new(g, a, p).unwrap()
    }

    #[test]
    fn step_probabilities_sum_to_one() {
        let th = params(1.2, 0.6, 0.35);
        let n = 25;
        let r = LogRTable::build(n, &th, RTableMode::Full).unwrap();
        let mut rng = seeded(9);
        for _ in 0..50 {
            let z = sequential_sample(n, &th, &r, &mut rng).unwrap();
            for i in 1..n {
                let counts = z.prefix(i).counts();
                let probs = sequential_step_probabilities(&counts, &th, &r).unwrap();
                assert!((probs.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn zero_discount_steps_are_crp() {
        let g = 2.3;
        let th = params(g, 0.0, 0.6);
        let r = LogRTable::build(30, &th, RTableMode::Full).unwrap();
        let counts = [4usize, 1, 7];
        let i = 12.0;
        let probs = sequential_step_probabilities(&counts, &th, &r).unwrap();
        for (k, &c) in counts.iter().enumerate() {
            assert!((probs[k] - c as f64 / (i + g)).abs() < 1e-10);
        }
        assert!((probs[3] - g / (i + g)).abs() < 1e-10);
    }

    #[test]
    fn sequential_sampler_matches_cluster_count_law() {
        let th = params(1.0, 0.5, 0.5);
        let n = 10;
        let r = LogRTable::build(n, &th, RTableMode::Full).unwrap();
        let t = LogStirlingTable::new(n, 0.5).unwrap();
        let exact = cluster_count_pmf(n, &th, &t).unwrap();
        let mut rng = seeded(21);
        let draws = 50_000;
        let mut hist = vec![0usize; n + 1];
        for _ in 0..draws {
            hist[sequential_sample(n, &th, &r, &mut rng).unwrap().n_clusters()] += 1;
        }
        let tv: f64 = hist
            .iter()
            .zip(&exact)
            .map(|(&h, &p)| (h as f64 / draws as f64 - p).abs())
            .sum::<f64>()
            / 2.0;
        assert!(tv < 0.02, "TV {tv}");
    }

    #[test]
    fn sequential_sampler_requires_full_table() {
        let th = params(1.0, 0.5, 0.5);
        let r = LogRTable::build(10, &th, RTableMode::Frontier { keep: vec![1, 2] }).unwrap();
        let mut rng = seeded(1);
        assert!(sequential_sample(10, &th, &r, &mut rng).is_err());
        let r = LogRTable::build(9, &th, RTableMode::Full).unwrap();
        assert!(sequential_sample(10, &th, &r, &mut rng).is_err());
    }

    #[test]
    fn gibbs_single_element_is_fixed() {
        let th = params(1.0, 0.5, 0.5);
        let z = Assignments::new(vec![1]).unwrap();
        let mut rng = seeded(4);
        for _ in 0..100 {
            assert_eq!(gibbs_sweep(&z, &th, &mut rng), z);
        }
    }

    #[test]
    fn gibbs_conditional_zero_discount_pair() {
        let th = params(1.0, 0.0, 0.5);
        let z = Assignments::new(vec![1, 1]).unwrap();
        let probs = gibbs_conditional(&z, 1, &th);
        assert!((probs[0] - 0.5).abs() < 1e-15);
        assert!((probs[1] - 0.5).abs() < 1e-15);
    }

    #[test]
    fn gibbs_keeps_canonical_form_and_size() {
        let th = params(2.0, 0.5, 0.3);
        let mut z = Assignments::new(vec![1, 1, 2, 1, 3, 2, 4]).unwrap();
        let mut rng = seeded(8);
        for _ in 0..200 {
            z = gibbs_sweep(&z, &th, &mut rng);
            assert_eq!(z.len(), 7);
            assert!(Assignments::new(z.labels().to_vec()).is_ok());
        }
    }
}
