//! Frequency-count data: parsing, conversion and the bundled datasets.
//!
//! A frequency-count table lists, for each multiplicity `i`, the number
//! `m_i` of species observed exactly `i` times.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use rand::seq::index;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::distributions::ClusterSizes;
use crate::error::{Error, Result};
use crate::partition::Assignments;

const CSV_HEADER: &str = "multiplicity,count";

/// Sorted `(multiplicity, count)` entries with distinct multiplicities.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FrequencyCounts {
    entries: Vec<(usize, usize)>,
}

#[derive(Deserialize)]
struct JsonCounts {
    counts: Vec<(i64, i64)>,
}

impl FrequencyCounts {
    pub fn new(entries: Vec<(usize, usize)>) -> Result<Self> {
        if entries.is_empty() {
            return Err(Error::InvalidData("no frequency counts".into()));
        }
        let mut map = BTreeMap::new();
        for (i, m) in entries {
            if i == 0 || m == 0 {
                return Err(Error::InvalidData(format!(
                    "multiplicity and count must be positive, got ({i}, {m})"
                )));
            }
            if map.insert(i, m).is_some() {
                return Err(Error::InvalidData(format!("duplicate multiplicity {i}")));
            }
        }
        Ok(FrequencyCounts {
            entries: map.into_iter().collect(),
        })
    }

    /// Parses `i,m_i` lines (optional `multiplicity,count` header) or a JSON
    /// object `{"counts": [[i, m_i], ...]}`.
    pub fn parse(text: &str) -> Result<Self> {
        let trimmed = text.trim_start();
        if trimmed.starts_with('{') {
            let raw: JsonCounts = serde_json::from_str(trimmed)?;
            let entries = raw
                .counts
                .into_iter()
                .map(|(i, m)| {
                    let conv = |v: i64| {
                        usize::try_from(v).map_err(|_| {
                            Error::InvalidData(format!("negative value {v} in counts"))
                        })
                    };
                    Ok((conv(i)?, conv(m)?))
                })
                .collect::<Result<Vec<_>>>()?;
            return Self::new(entries);
        }

        let mut entries = Vec::new();
        for (idx, line) in text.lines().enumerate() {
            let line_no = idx + 1;
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            if entries.is_empty() && line.eq_ignore_ascii_case(CSV_HEADER) {
                continue;
            }
            let parse_err = |msg: String| Error::Parse { line: line_no, msg };
            let fields: Vec<&str> = line.split(',').map(str::trim).collect();
            if fields.len() != 2 {
                return Err(parse_err(format!("expected `i,m_i`, got `{line}`")));
            }
            let num = |s: &str| {
                s.parse::<usize>()
                    .map_err(|_| parse_err(format!("`{s}` is not a nonnegative integer")))
            };
            let (i, m) = (num(fields[0])?, num(fields[1])?);
            if i == 0 || m == 0 {
                return Err(parse_err(format!("values must be positive, got `{line}`")));
            }
            entries.push((i, m));
        }
        Self::new(entries)
    }

    /// CSV with header, one `i,m_i` row per entry.
    pub fn format(&self) -> String {
        let mut out = String::from(CSV_HEADER);
        out.push('\n');
        for &(i, m) in &self.entries {
            writeln!(out, "{i},{m}").unwrap();
        }
        out
    }

    pub fn entries(&self) -> &[(usize, usize)] {
        &self.entries
    }

    pub fn n(&self) -> usize {
        self.entries.iter().map(|&(i, m)| i * m).sum()
    }

    pub fn l(&self) -> usize {
        self.entries.iter().map(|&(_, m)| m).sum()
    }

    /// Block sizes in ascending order.
    pub fn to_cluster_sizes(&self) -> ClusterSizes {
        let sizes = self
            .entries
            .iter()
            .flat_map(|&(i, m)| std::iter::repeat_n(i, m))
            .collect();
        ClusterSizes::new(sizes).expect("entries are positive")
    }

    /// Blocks in ascending size order laid out contiguously, e.g.
    /// `{m_1 = 2, m_2 = 1, m_3 = 2}` gives `1,2,3,3,4,4,4,5,5,5`.
    pub fn to_assignments(&self) -> Assignments {
        let labels = self
            .to_cluster_sizes()
            .sizes()
            .iter()
            .enumerate()
            .flat_map(|(k, &s)| std::iter::repeat_n(k + 1, s))
            .collect();
        Assignments::new(labels).expect("contiguous blocks are canonical")
    }
}

impl From<&ClusterSizes> for FrequencyCounts {
    fn from(sizes: &ClusterSizes) -> Self {
        FrequencyCounts {
            entries: sizes.histogram(),
        }
    }
}

/// `m` positions drawn uniformly without replacement, kept in their original
/// order and relabeled to canonical form.
pub fn subsample_without_replacement<R: Rng + ?Sized>(
    z: &Assignments,
    m: usize,
    rng: &mut R,
) -> Result<Assignments> {
    if m < 1 || m > z.len() {
        return Err(Error::param(format!(
            "subsample size {m} outside 1..={}",
            z.len()
        )));
    }
    let mut picks = index::sample(rng, z.len(), m).into_vec();
    picks.sort_unstable();
    let labels: Vec<usize> = picks.into_iter().map(|j| z.labels()[j]).collect();
    Ok(Assignments::canonicalize(&labels))
}

pub const BUNDLED_NAMES: [&str; 3] = ["est-tomato", "tcr-treg-healthy-1", "tcr-treg-diabetic-1"];

/// Tomato-flower EST library, T-regulatory repertoires of a healthy and a
/// diabetic mouse.
pub fn bundled(name: &str) -> Result<FrequencyCounts> {
    let entries: Vec<(usize, usize)> = match name {
        "est-tomato" => {
            let mults = [1, 2, 3, 4, 5, 6, 7, 8, 9, 10, 11, 12, 13, 14, 16, 23, 27];
            let counts = [1434, 253, 71, 33, 11, 6, 2, 3, 1, 2, 2, 1, 1, 1, 2, 1, 1];
            mults.into_iter().zip(counts).collect()
        }
        "tcr-treg-healthy-1" => vec![(1, 40), (2, 5), (3, 5), (4, 2), (5, 3)],
        "tcr-treg-diabetic-1" => vec![(1, 8), (2, 1), (3, 2), (5, 1), (36, 1), (40, 1)],
        other => return Err(Error::UnknownDataset(other.to_string())),
    };
    FrequencyCounts::new(entries)
}
