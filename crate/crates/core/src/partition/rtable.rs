//! The `R_{n,θ}(i, j)` recursion behind the size-dependent prediction rule.
//!
//! `R(n, j) = 1` and, for `i < n`,
//! `R(i, j) = R(i+1, j) (i − a j) + R(i+1, j+1) gamma0 p^{−a}`.
//!
//! Unrolled, `R_n(i, j)` is the total weight of all lattice paths from
//! `(i, j)` to row `n` where a step `(m, k) -> (m+1, k)` weighs `m − a k` and
//! a step `(m, k) -> (m+1, k+1)` weighs `gamma0 p^{−a}`. [`LogRForward`]
//! walks those paths forwards, which yields `R_n(i, j)` for every `n` from a
//! single `O(N²)` pass.

use crate::distributions::Params;
use crate::error::{Error, Result};
use crate::math::log_add_exp;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum RTableMode {
    /// Keep every row `1..=n`; `O(n²)` memory.
    Full,
    /// Recurse down to the smallest requested row, keeping only the rows
    /// listed; `O(n)` memory.
    Frontier { keep: Vec<usize> },
}

/// `ln R_{n,θ}(i, j)` for `1 <= j <= i <= n`.
#[derive(Debug, Clone)]
pub struct LogRTable {
    n: usize,
    params: Params,
    // rows[i][j] for j in 1..=i; index 0 unused
    rows: Vec<Option<Vec<f64>>>,
}

impl LogRTable {
    pub fn build(n: usize, params: &Params, mode: RTableMode) -> Result<Self> {
        if n < 1 {
            return Err(Error::param("R table needs n >= 1"));
        }
        let (lowest, keep): (usize, Box<dyn Fn(usize) -> bool>) = match mode {
            RTableMode::Full => (1, Box::new(|_| true)),
            RTableMode::Frontier { keep } => {
                if let Some(&bad) = keep.iter().find(|&&i| i == 0 || i > n) {
                    return Err(Error::param(format!("row {bad} outside 1..={n}")));
                }
                let lowest = keep.iter().copied().min().unwrap_or(n);
                (lowest, Box::new(move |i| keep.contains(&i)))
            }
        };

        let a = params.a();
        let w_new = params.ln_new_cluster_weight();
        let mut rows: Vec<Option<Vec<f64>>> = vec![None; n + 1];
        let mut next = vec![0.0; n + 2];
        next[0] = f64::NEG_INFINITY;
        if keep(n) {
            rows[n] = Some(next[..=n].to_vec());
        }
        for i in (lowest..n).rev() {
            let mut cur = vec![f64::NEG_INFINITY; i + 1];
            for (j, slot) in cur.iter_mut().enumerate().skip(1) {
                let stay = i as f64 - a * j as f64;
                debug_assert!(stay > 0.0);
                *slot = log_add_exp(next[j] + stay.ln(), next[j + 1] + w_new);
            }
            if keep(i) {
                rows[i] = Some(cur.clone());
            }
            cur.push(f64::NEG_INFINITY);
            next = cur;
        }
        Ok(LogRTable {
            n,
            params: *params,
            rows,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn params(&self) -> &Params {
        &self.params
    }

    pub fn has_row(&self, i: usize) -> bool {
        matches!(self.rows.get(i), Some(Some(_)))
    }

    /// `ln R(i, j)`, or `None` if row `i` was not retained or `j` is outside
    /// `1..=i`.
    pub fn get(&self, i: usize, j: usize) -> Option<f64> {
        match self.rows.get(i) {
            Some(Some(row)) if (1..=i).contains(&j) => Some(row[j]),
            _ => None,
        }
    }

    pub(crate) fn at(&self, i: usize, j: usize) -> f64 {
        self.rows[i].as_ref().expect("row checked by caller")[j]
    }

    pub(crate) fn check(&self, n: usize, params: &Params, rows: &[usize]) -> Result<()> {
        if self.n != n {
            return Err(Error::TableMismatch(format!(
                "R table built for n = {}, need n = {n}",
                self.n
            )));
        }
        if &self.params != params {
            return Err(Error::TableMismatch(format!(
                "R table built for {:?}, need {:?}",
                self.params, params
            )));
        }
        if let Some(&i) = rows.iter().find(|&&i| !self.has_row(i)) {
            return Err(Error::TableMismatch(format!("R table lacks row {i}")));
        }
        Ok(())
    }

    pub(crate) fn check_all_rows(&self, n: usize, params: &Params) -> Result<()> {
        let rows: Vec<usize> = (1..=n).collect();
        self.check(n, params, &rows)
    }
}

pub fn build_log_r_table(n: usize, params: &Params, mode: RTableMode) -> Result<LogRTable> {
    LogRTable::build(n, params, mode)
}

/// Forward path sums giving `ln R_n(i0, j0)` for `n = i0, i0 + 1, ...`.
///
/// Weights are kept in linear space relative to a running log offset and
/// rescaled whenever they drift far from one.
#[derive(Debug, Clone)]
pub struct LogRForward {
    a: f64,
    w_new: f64,
    j0: usize,
    row_index: usize,
    log_offset: f64,
    total: f64,
    // weights over k = j0..=j0 + (row_index - i0)
    row: Vec<f64>,
}

impl LogRForward {
    pub fn new(params: &Params, i0: usize, j0: usize) -> Result<Self> {
        if j0 < 1 || j0 > i0 {
            return Err(Error::param(format!("need 1 <= j0 <= i0, got ({i0}, {j0})")));
        }
        Ok(LogRForward {
            a: params.a(),
            w_new: params.ln_new_cluster_weight().exp(),
            j0,
            row_index: i0,
            log_offset: 0.0,
            total: 1.0,
            row: vec![1.0],
        })
    }

    /// Current sample size `n` whose `ln R_n(i0, j0)` is [`Self::log_total`].
    pub fn n(&self) -> usize {
        self.row_index
    }

    pub fn log_total(&self) -> f64 {
        self.log_offset + self.total.ln()
    }

    /// Moves from sample size `n` to `n + 1`.
    pub fn advance(&mut self) {
        let m = self.row_index as f64;
        let mut prev_up = 0.0;
        let mut max: f64 = 0.0;
        let mut total = 0.0;
        for (offset, v) in self.row.iter_mut().enumerate() {
            let k = (self.j0 + offset) as f64;
            let old = *v;
            *v = old * (m - self.a * k) + prev_up;
            prev_up = old * self.w_new;
            max = max.max(*v);
            total += *v;
        }
        self.row.push(prev_up);
        max = max.max(prev_up);
        self.total = total + prev_up;
        self.row_index += 1;
        if !(1e-100..=1e100).contains(&max) {
            self.row.iter_mut().for_each(|v| *v /= max);
            self.total /= max;
            self.log_offset += max.ln();
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::math::ln_gamma;

    fn params(g: f64, a: f64, p: f64) -> Params {
        Params::new(g, a, p).unwrap()
    }

    #[test]
    fn boundary_row_is_one() {
        let th = params(2.0, 0.5, 0.3);
        let t = LogRTable::build(12, &th, RTableMode::Full).unwrap();
        for j in 1..=12 {
            assert_eq!(t.get(12, j), Some(0.0));
        }
        assert_eq!(t.get(3, 4), None);
        assert_eq!(t.get(3, 0), None);
    }

    #[test]
    fn zero_discount_closed_form() {
        let g = 1.7;
        let th = params(g, 0.0, 0.4);
        let n = 40;
        let t = LogRTable::build(n, &th, RTableMode::Full).unwrap();
        for i in 1..=n {
            let want = ln_gamma(n as f64 + g) - ln_gamma(i as f64 + g);
            for j in 1..=i {
                assert!((t.get(i, j).unwrap() - want).abs() < 1e-10, "i={i} j={j}");
            }
        }
    }

    #[test]
    fn recursion_holds_for_every_entry() {
        let th = params(0.8, -1.5, 0.6);
        let t = LogRTable::build(30, &th, RTableMode::Full).unwrap();
        let w = th.ln_new_cluster_weight();
        for i in 1..30 {
            for j in 1..=i {
                let rhs = log_add_exp(
                    t.get(i + 1, j).unwrap() + (i as f64 - th.a() * j as f64).ln(),
                    t.get(i + 1, j + 1).unwrap() + w,
                );
                assert!((t.get(i, j).unwrap() - rhs).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn frontier_matches_full() {
        let th = params(2.0, 0.5, 0.3);
        let full = LogRTable::build(60, &th, RTableMode::Full).unwrap();
        let lean = LogRTable::build(60, &th, RTableMode::Frontier { keep: vec![1, 2, 17] }).unwrap();
        for i in [1, 2, 17] {
            for j in 1..=i {
                assert_eq!(lean.get(i, j), full.get(i, j));
            }
        }
        assert!(!lean.has_row(3));
        assert!(lean.check(60, &th, &[1, 2]).is_ok());
        assert!(lean.check(60, &th, &[3]).is_err());
        assert!(lean.check(61, &th, &[1]).is_err());
        assert!(LogRTable::build(5, &th, RTableMode::Frontier { keep: vec![6] }).is_err());
    }

    #[test]
    fn forward_sums_match_backward_tables() {
        let th = params(1.3, 0.45, 0.55);
        for (i0, j0) in [(1usize, 1usize), (2, 2), (2, 1), (4, 2)] {
            let mut fwd = LogRForward::new(&th, i0, j0).unwrap();
            for n in i0..=35 {
                assert_eq!(fwd.n(), n);
                let t = LogRTable::build(n, &th, RTableMode::Frontier { keep: vec![i0] }).unwrap();
                let want = t.get(i0, j0).unwrap();
                assert!((fwd.log_total() - want).abs() < 1e-11, "({i0},{j0}) n={n}");
                fwd.advance();
            }
        }
    }
}
