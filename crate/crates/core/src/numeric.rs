//! Log-domain arithmetic helpers.
//!
//! Multi-object likelihoods with dozens of measurements leave the range of
//! `f64` quickly, and the Panjer binomial branch produces terms of either
//! sign, so most kernels work with [`SignedLog`] values.

use std::ops::{Mul, Neg};

/// A real number stored as `sign * exp(ln_abs)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SignedLog {
    pub sign: i8,
    pub ln_abs: f64,
}

impl SignedLog {
    pub const ZERO: SignedLog = SignedLog { sign: 0, ln_abs: f64::NEG_INFINITY };
    pub const ONE: SignedLog = SignedLog { sign: 1, ln_abs: 0.0 };

    pub fn from_f64(x: f64) -> Self {
        if x == 0.0 {
            Self::ZERO
        } else {
            SignedLog { sign: if x > 0.0 { 1 } else { -1 }, ln_abs: x.abs().ln() }
        }
    }

    /// Positive value given by its logarithm.
    pub fn from_ln(ln: f64) -> Self {
        if ln == f64::NEG_INFINITY {
            Self::ZERO
        } else {
            SignedLog { sign: 1, ln_abs: ln }
        }
    }

    pub fn is_zero(&self) -> bool {
        self.sign == 0
    }

    pub fn to_f64(self) -> f64 {
        match self.sign {
            0 => 0.0,
            s => f64::from(s) * self.ln_abs.exp(),
        }
    }

    /// Logarithm of the value; `NaN` for negative values, `-inf` for zero.
    pub fn ln(self) -> f64 {
        match self.sign {
            1 => self.ln_abs,
            0 => f64::NEG_INFINITY,
            _ => f64::NAN,
        }
    }

    pub fn div(self, rhs: SignedLog) -> SignedLog {
        if self.sign == 0 {
            return Self::ZERO;
        }
        SignedLog { sign: self.sign * rhs.sign, ln_abs: self.ln_abs - rhs.ln_abs }
    }

    /// Ratio as a plain float. Zero denominators yield NaN or infinities.
    pub fn ratio(self, rhs: SignedLog) -> f64 {
        self.div(rhs).to_f64()
    }
}

impl Mul for SignedLog {
    type Output = SignedLog;
    fn mul(self, rhs: SignedLog) -> SignedLog {
        let sign = self.sign * rhs.sign;
        if sign == 0 {
            Self::ZERO
        } else {
            SignedLog { sign, ln_abs: self.ln_abs + rhs.ln_abs }
        }
    }
}

impl Neg for SignedLog {
    type Output = SignedLog;
    fn neg(self) -> SignedLog {
        SignedLog { sign: -self.sign, ln_abs: self.ln_abs }
    }
}

/// Sum of signed log values, max-shifted.
pub fn signed_sum(terms: &[SignedLog]) -> SignedLog {
    let max = terms.iter().fold(f64::NEG_INFINITY, |m, t| m.max(t.ln_abs));
    if max == f64::NEG_INFINITY {
        return SignedLog::ZERO;
    }
    let mut acc = 0.0;
    let mut comp = 0.0;
    for t in terms.iter().filter(|t| t.sign != 0) {
        let v = f64::from(t.sign) * (t.ln_abs - max).exp();
        // Neumaier compensation; alternating binomial-branch terms cancel.
        let s = acc + v;
        if acc.abs() >= v.abs() {
            comp += (acc - s) + v;
        } else {
            comp += (v - s) + acc;
        }
        acc = s;
    }
    let total = acc + comp;
    if total == 0.0 {
        SignedLog::ZERO
    } else {
        SignedLog { sign: if total > 0.0 { 1 } else { -1 }, ln_abs: total.abs().ln() + max }
    }
}

/// `ln(sum(exp(x)))` over plain logarithms; `-inf` for an empty or all `-inf` input.
pub fn log_sum_exp(values: &[f64]) -> f64 {
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    if max == f64::INFINITY {
        return f64::INFINITY;
    }
    let s: f64 = values.iter().map(|v| (v - max).exp()).sum();
    max + s.ln()
}

/// Compensated (Neumaier) summation.
pub fn neumaier_sum<I: IntoIterator<Item = f64>>(values: I) -> f64 {
    let mut sum = 0.0;
    let mut comp = 0.0;
    for v in values {
        let t = sum + v;
        if sum.abs() >= v.abs() {
            comp += (sum - t) + v;
        } else {
            comp += (v - t) + sum;
        }
        sum = t;
    }
    sum + comp
}

/// Table of `ln(n!)` for `n = 0..=n_max`.
pub fn ln_factorials(n_max: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(n_max + 1);
    let mut acc = 0.0;
    out.push(0.0);
    for k in 1..=n_max {
        acc += (k as f64).ln();
        out.push(acc);
    }
    out
}

const LN_FACTORIAL_TABLE: usize = 1024;

/// `ln n!`, tabulated for small `n`.
pub fn ln_factorial(n: usize) -> f64 {
    static TABLE: std::sync::OnceLock<Vec<f64>> = std::sync::OnceLock::new();
    let table = TABLE.get_or_init(|| (0..LN_FACTORIAL_TABLE).map(|k| statrs::function::gamma::ln_gamma(k as f64 + 1.0)).collect());
    match table.get(n) {
        Some(v) => *v,
        None => statrs::function::gamma::ln_gamma(n as f64 + 1.0),
    }
}
