//! Exchangeable random partitions under the gNBP.
//!
//! Labels follow order of appearance: `z_1 = 1` and every new cluster takes
//! the next unused label. A partition of `[n]` is fully described by its
//! block sizes as far as probabilities are concerned; the label sequence only
//! matters to the sequential and Gibbs samplers.

mod eppf;
mod rtable;
mod sampler;

pub use eppf::{
    addition_rule_residual, cluster_count_pmf, ecpf_log, gcrsf_log_eppf, log_partition_mass,
    subset_cluster_count_pmf, subset_marginal_log,
};
pub use rtable::{build_log_r_table, LogRForward, LogRTable, RTableMode};
pub use sampler::{
    gibbs_conditional, gibbs_sweep, sequential_sample, sequential_step_probabilities,
};

use crate::distributions::ClusterSizes;
use crate::error::{Error, Result};

/// A label sequence `z_1..z_n` in order-of-appearance canonical form.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Assignments {
    labels: Vec<usize>,
}

impl Assignments {
    /// Validates that `labels` is already canonical.
    pub fn new(labels: Vec<usize>) -> Result<Self> {
        let mut max = 0;
        for (i, &z) in labels.iter().enumerate() {
            if z == 0 || z > max + 1 {
                return Err(Error::InvalidData(format!(
                    "label {z} at position {} breaks order-of-appearance form",
                    i + 1
                )));
            }
            max = max.max(z);
        }
        Ok(Assignments { labels })
    }

    /// Relabels an arbitrary label sequence into canonical form.
    pub fn canonicalize<T: Copy + Eq + std::hash::Hash>(labels: &[T]) -> Self {
        let mut seen = std::collections::HashMap::new();
        let labels = labels
            .iter()
            .map(|z| {
                let next = seen.len() + 1;
                *seen.entry(*z).or_insert(next)
            })
            .collect();
        Assignments { labels }
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn n_clusters(&self) -> usize {
        self.labels.iter().copied().max().unwrap_or(0)
    }

    /// Block sizes indexed by label (`counts()[k - 1] = n_k`).
    pub fn counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.n_clusters()];
        for &z in &self.labels {
            counts[z - 1] += 1;
        }
        counts
    }

    pub fn cluster_sizes(&self) -> ClusterSizes {
        ClusterSizes::new(self.counts()).expect("canonical labels give positive sizes")
    }

    /// The first `i` labels, `z_{1:i}`.
    pub fn prefix(&self, i: usize) -> Assignments {
        Assignments {
            labels: self.labels[..i.min(self.len())].to_vec(),
        }
    }

    pub fn into_labels(self) -> Vec<usize> {
        self.labels
    }
}

/// A set partition `{A_1, ..., A_l}` of `{1, ..., n}`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PartitionBlocks {
    blocks: Vec<Vec<usize>>,
}

impl PartitionBlocks {
    pub fn new(mut blocks: Vec<Vec<usize>>) -> Result<Self> {
        blocks.iter_mut().for_each(|b| b.sort_unstable());
        blocks.sort_by_key(|b| b.first().copied());
        let n: usize = blocks.iter().map(Vec::len).sum();
        let mut seen = vec![false; n + 1];
        for b in &blocks {
            if b.is_empty() {
                return Err(Error::InvalidData("empty block".into()));
            }
            for &e in b {
                if e == 0 || e > n || seen[e] {
                    return Err(Error::InvalidData(format!(
                        "blocks do not partition 1..={n}"
                    )));
                }
                seen[e] = true;
            }
        }
        Ok(PartitionBlocks { blocks })
    }

    pub fn blocks(&self) -> &[Vec<usize>] {
        &self.blocks
    }

    pub fn to_assignments(&self) -> Assignments {
        let n: usize = self.blocks.iter().map(Vec::len).sum();
        let mut labels = vec![0; n];
        for (k, b) in self.blocks.iter().enumerate() {
            for &e in b {
                labels[e - 1] = k + 1;
            }
        }
        Assignments { labels }
    }
}

impl From<&Assignments> for PartitionBlocks {
    fn from(z: &Assignments) -> Self {
        let mut blocks = vec![Vec::new(); z.n_clusters()];
        for (i, &k) in z.labels.iter().enumerate() {
            blocks[k - 1].push(i + 1);
        }
        PartitionBlocks { blocks }
    }
}

/// Every set partition of `[n]` as a canonical label sequence, generated as
/// restricted-growth strings. There are Bell(n) of them; keep `n <= 10`.
pub fn set_partitions(n: usize) -> SetPartitions {
    SetPartitions {
        current: if n == 0 { None } else { Some(vec![1; n]) },
        maxes: vec![1; n],
        started: false,
    }
}

pub struct SetPartitions {
    current: Option<Vec<usize>>,
    // maxes[i] = max(z_1..=z_i)
    maxes: Vec<usize>,
    started: bool,
}

impl Iterator for SetPartitions {
    type Item = Assignments;

    fn next(&mut self) -> Option<Assignments> {
        let z = self.current.as_mut()?;
        if !self.started {
            self.started = true;
            return Some(Assignments { labels: z.clone() });
        }
        let n = z.len();
        // rightmost position that can still grow
        let mut i = n;
        while i > 1 {
            i -= 1;
            if z[i] <= self.maxes[i - 1] {
                z[i] += 1;
                self.maxes[i] = self.maxes[i - 1].max(z[i]);
                for j in i + 1..n {
                    z[j] = 1;
                    self.maxes[j] = self.maxes[i];
                }
                return Some(Assignments { labels: z.clone() });
            }
        }
        self.current = None;
        None
    }
}
