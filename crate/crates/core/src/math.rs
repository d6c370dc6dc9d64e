//! Log-space scalar kernels and generalized Stirling numbers of the first kind.
//!
//! Raw Stirling numbers overflow `f64` near `n = 170`; everything here is kept
//! as natural logarithms.

use crate::error::{Error, Result};

/// Discounts with `|a|` below this are treated as exactly zero and routed to
/// the analytic `a -> 0` limits.
pub const ZERO_DISCOUNT_TOL: f64 = 1e-8;

/// Largest `n` for which [`log_gamma_ratio`] uses the explicit product.
const EXPLICIT_PRODUCT_MAX: usize = 32;

#[inline]
pub fn is_zero_discount(a: f64) -> bool {
    a.abs() < ZERO_DISCOUNT_TOL
}

/// `ln Γ(x)` for `x > 0`.
#[inline]
pub fn ln_gamma(x: f64) -> f64 {
    libm::lgamma(x)
}

/// `ln n!`
#[inline]
pub fn ln_factorial(n: usize) -> f64 {
    if n < 2 {
        0.0
    } else {
        libm::lgamma(n as f64 + 1.0)
    }
}

/// `ln(Γ(n − a) / Γ(1 − a)) = Σ_{i=1}^{n−1} ln(i − a)`.
pub fn log_gamma_ratio(n: usize, a: f64) -> Result<f64> {
    if n < 1 {
        return Err(Error::param("log_gamma_ratio needs n >= 1"));
    }
    if !(a < 1.0) {
        return Err(Error::param(format!("discount a must be < 1, got {a}")));
    }
    Ok(log_gamma_ratio_unchecked(n, a))
}

pub(crate) fn log_gamma_ratio_unchecked(n: usize, a: f64) -> f64 {
    if n <= EXPLICIT_PRODUCT_MAX {
        (1..n).map(|i| (i as f64 - a).ln()).sum()
    } else {
        ln_gamma(n as f64 - a) - ln_gamma(1.0 - a)
    }
}

/// `ln(e^x + e^y)`.
#[inline]
pub fn log_add_exp(x: f64, y: f64) -> f64 {
    let (hi, lo) = if x >= y { (x, y) } else { (y, x) };
    if lo == f64::NEG_INFINITY {
        return hi;
    }
    if hi == f64::INFINITY {
        return hi;
    }
    hi + (lo - hi).exp().ln_1p()
}

/// `ln Σ exp(v)`; `-inf` for empty or all-`-inf` input.
pub fn log_sum_exp(values: &[f64]) -> f64 {
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max.is_infinite() {
        return max;
    }
    let sum: f64 = values.iter().map(|&v| (v - max).exp()).sum();
    max + sum.ln()
}

/// Normalizes log weights in place into probabilities. Returns the log
/// normalizer.
pub fn normalize_log_weights(weights: &mut [f64]) -> f64 {
    let z = log_sum_exp(weights);
    for w in weights.iter_mut() {
        *w = (*w - z).exp();
    }
    z
}

/// A real number as `sign · exp(ln_abs)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SignedLog {
    pub sign: i8,
    pub ln_abs: f64,
}

impl SignedLog {
    pub const ZERO: SignedLog = SignedLog {
        sign: 0,
        ln_abs: f64::NEG_INFINITY,
    };

    pub fn from_f64(x: f64) -> Self {
        if x == 0.0 {
            Self::ZERO
        } else {
            SignedLog {
                sign: if x > 0.0 { 1 } else { -1 },
                ln_abs: x.abs().ln(),
            }
        }
    }

    pub fn mul(self, other: SignedLog) -> SignedLog {
        if self.sign == 0 || other.sign == 0 {
            return Self::ZERO;
        }
        SignedLog {
            sign: self.sign * other.sign,
            ln_abs: self.ln_abs + other.ln_abs,
        }
    }

    pub fn add(self, other: SignedLog) -> SignedLog {
        if self.sign == 0 {
            return other;
        }
        if other.sign == 0 {
            return self;
        }
        let (big, small) = if self.ln_abs >= other.ln_abs {
            (self, other)
        } else {
            (other, self)
        };
        let ratio = (small.ln_abs - big.ln_abs).exp();
        if big.sign == small.sign {
            SignedLog {
                sign: big.sign,
                ln_abs: big.ln_abs + ratio.ln_1p(),
            }
        } else if ratio == 1.0 {
            Self::ZERO
        } else {
            SignedLog {
                sign: big.sign,
                ln_abs: big.ln_abs + (-ratio).ln_1p(),
            }
        }
    }

    pub fn to_f64(self) -> f64 {
        self.sign as f64 * self.ln_abs.exp()
    }
}

/// `Γ(n + x) / Γ(x) = ∏_{i=0}^{n−1} (i + x)` in sign / log-magnitude form.
///
/// Defined for every real `x`, including nonpositive integers where the
/// gamma functions themselves have poles.
pub fn gamma_ratio_signed(n: usize, x: f64) -> SignedLog {
    let mut sign = 1i8;
    let mut ln_abs = 0.0;
    for i in 0..n {
        let f = i as f64 + x;
        if f == 0.0 {
            return SignedLog::ZERO;
        }
        if f < 0.0 {
            sign = -sign;
        }
        ln_abs += f.abs().ln();
    }
    SignedLog { sign, ln_abs }
}

/// Rows of `ln S_a(n, l)`, generalized Stirling numbers of the first kind.
///
/// Row `n` holds `l = 0..=n`; `S_a(0, 0) = 1` and `S_a(n, 0) = 0` for `n > 0`.
#[derive(Debug, Clone)]
pub struct LogStirlingTable {
    a: f64,
    rows: Vec<Vec<f64>>,
}

impl LogStirlingTable {
    pub fn new(max_n: usize, a: f64) -> Result<Self> {
        if max_n < 1 {
            return Err(Error::param("Stirling table needs max_n >= 1"));
        }
        if !(a < 1.0) {
            return Err(Error::param(format!("discount a must be < 1, got {a}")));
        }
        let mut table = LogStirlingTable {
            a,
            rows: vec![vec![0.0]],
        };
        table.extend_to(max_n);
        Ok(table)
    }

    pub fn a(&self) -> f64 {
        self.a
    }

    pub fn max_n(&self) -> usize {
        self.rows.len() - 1
    }

    /// Appends rows up to `max_n`; existing rows are kept.
    pub fn extend_to(&mut self, max_n: usize) {
        let a = self.a;
        while self.max_n() < max_n {
            let n = self.max_n();
            let prev = &self.rows[n];
            let mut next = Vec::with_capacity(n + 2);
            next.push(f64::NEG_INFINITY);
            for l in 1..=n {
                let stay = (n as f64 - a * l as f64).ln() + prev[l];
                next.push(log_add_exp(stay, prev[l - 1]));
            }
            next.push(0.0);
            self.rows.push(next);
        }
    }

    /// `ln S_a(n, l)`; `-inf` outside the support.
    #[inline]
    pub fn get(&self, n: usize, l: usize) -> f64 {
        match self.rows.get(n) {
            Some(row) if l <= n => row[l],
            Some(_) => f64::NEG_INFINITY,
            None => panic!("Stirling row {n} not computed (max_n = {})", self.max_n()),
        }
    }

    pub fn row(&self, n: usize) -> Option<&[f64]> {
        self.rows.get(n).map(|r| r.as_slice())
    }

    pub(crate) fn check(&self, n: usize, a: f64) -> Result<()> {
        if self.a != a {
            return Err(Error::TableMismatch(format!(
                "Stirling table built for a = {}, parameters have a = {a}",
                self.a
            )));
        }
        if n > self.max_n() {
            return Err(Error::TableMismatch(format!(
                "Stirling table covers n <= {}, need {n}",
                self.max_n()
            )));
        }
        Ok(())
    }
}

/// `build_stirling_table` from the module contract.
pub fn build_stirling_table(max_n: usize, a: f64) -> Result<LogStirlingTable> {
    LogStirlingTable::new(max_n, a)
}
