//! Signed scalars stored as `sign * exp(log_magnitude)`.
//!
//! The infrared weight reaches magnitudes like `1/(z sqrt|ln z|)` with
//! `z` far below the smallest normal double, so every quantity that can
//! overflow or underflow is carried in this form until the final,
//! bounded matrix entry is exponentiated.

use std::cmp::Ordering;
use std::fmt;
use std::ops::{Div, Mul, Neg};

use serde::{Deserialize, Serialize};

/// `ln(e^a + e^b)` without overflow. `-inf` operands act as zero.
pub fn log_sum_exp(a: f64, b: f64) -> f64 {
    if a.is_nan() || b.is_nan() {
        return f64::NAN;
    }
    let (hi, lo) = if a >= b { (a, b) } else { (b, a) };
    if hi == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    if hi == f64::INFINITY {
        return f64::INFINITY;
    }
    hi + (lo - hi).exp().ln_1p()
}

/// `ln(e^a - e^b)` for `a >= b`; returns `-inf` when the operands are equal.
pub fn log_diff_exp(a: f64, b: f64) -> f64 {
    debug_assert!(a >= b || b == f64::NEG_INFINITY);
    if b == f64::NEG_INFINITY {
        return a;
    }
    let d = b - a;
    if d >= 0.0 {
        return f64::NEG_INFINITY;
    }
    // ln(1 - e^d), choosing the branch that keeps precision.
    let tail = if d > -std::f64::consts::LN_2 {
        (-d.exp_m1()).ln()
    } else {
        (-d.exp()).ln_1p()
    };
    a + tail
}

#[derive(Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LogScalar {
    sign: i8,
    log_magnitude: f64,
    /// Low-order part of the log, so that `log_magnitude + log_residual`
    /// carries the magnitude to full double precision even when the log
    /// itself is in the hundreds.
    #[serde(default)]
    log_residual: f64,
}

// Cody-Waite split of ln 2; `k * LN2_HI` is exact for |k| < 2^21.
const LN2_HI: f64 = 6.931_471_803_691_238e-1;
const LN2_LO: f64 = 1.908_214_929_270_587_7e-10;

/// Error-free sum: `a + b = s + e` exactly.
fn two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    let bb = s - a;
    let e = (a - (s - bb)) + (b - bb);
    (s, e)
}

/// `x * 2^k` for any integer `k`, rounding once at the end.
fn ldexp(x: f64, k: i32) -> f64 {
    let mut x = x;
    let mut k = k;
    while k > 1000 {
        x *= 2f64.powi(1000);
        k -= 1000;
    }
    while k < -1000 {
        x *= 2f64.powi(-1000);
        k += 1000;
    }
    x * 2f64.powi(k)
}

/// `ln|x|` as an unevaluated sum `hi + lo` accurate to about one ulp of `|x|`.
fn ln_split(x: f64) -> (f64, f64) {
    let mut y = x.abs();
    let mut e = 0i32;
    if y < f64::MIN_POSITIVE {
        y *= 2f64.powi(64);
        e -= 64;
    }
    let bits = y.to_bits();
    let biased = ((bits >> 52) & 0x7ff) as i32;
    e += biased - 1023;
    let m = f64::from_bits((bits & !(0x7ff << 52)) | (1023u64 << 52));
    let ef = f64::from(e);
    let a = ef * LN2_HI;
    let b = ef.mul_add(LN2_LO, m.ln());
    two_sum(a, b)
}

impl LogScalar {
    pub const ZERO: LogScalar = LogScalar {
        sign: 0,
        log_magnitude: f64::NEG_INFINITY,
        log_residual: 0.0,
    };
    pub const ONE: LogScalar = LogScalar {
        sign: 1,
        log_magnitude: 0.0,
        log_residual: 0.0,
    };

    fn split(sign: i8, hi: f64, lo: f64) -> Self {
        if sign == 0 || hi == f64::NEG_INFINITY {
            return Self::ZERO;
        }
        if !hi.is_finite() || !lo.is_finite() {
            return Self {
                sign: sign.signum(),
                log_magnitude: hi + lo,
                log_residual: 0.0,
            };
        }
        let (h, l) = two_sum(hi, lo);
        Self {
            sign: sign.signum(),
            log_magnitude: h,
            log_residual: l,
        }
    }

    /// Builds a value from its sign and natural-log magnitude.
    /// A zero sign or a `-inf` magnitude both yield exact zero.
    pub fn new(sign: i8, log_magnitude: f64) -> Self {
        Self::split(sign, log_magnitude, 0.0)
    }

    /// Positive value `exp(log_magnitude)`.
    pub fn from_ln(log_magnitude: f64) -> Self {
        Self::new(1, log_magnitude)
    }

    pub fn from_f64(x: f64) -> Self {
        if x == 0.0 {
            return Self::ZERO;
        }
        let sign = if x > 0.0 { 1 } else { -1 };
        if !x.is_finite() {
            return Self::new(sign, f64::INFINITY);
        }
        let (hi, lo) = ln_split(x);
        Self::split(sign, hi, lo)
    }

    /// Converts back to a double; underflows to zero and overflows to
    /// infinity exactly where `exp` does.
    pub fn to_f64(self) -> f64 {
        if self.sign == 0 {
            return 0.0;
        }
        let s = f64::from(self.sign);
        let hi = self.log_magnitude;
        if !hi.is_finite() {
            return s * hi.exp();
        }
        if hi > 710.0 {
            return s * f64::INFINITY;
        }
        if hi < -746.0 {
            return 0.0;
        }
        let k = (hi / std::f64::consts::LN_2).round();
        let r = (hi - k * LN2_HI) - k * LN2_LO + self.log_residual;
        s * ldexp(r.exp(), k as i32)
    }

    pub fn sign(self) -> i8 {
        self.sign
    }

    pub fn log_magnitude(self) -> f64 {
        self.log_magnitude + self.log_residual
    }

    pub fn is_zero(self) -> bool {
        self.sign == 0
    }

    /// Natural log of a strictly positive value.
    pub fn ln(self) -> Option<f64> {
        (self.sign > 0).then_some(self.log_magnitude())
    }

    pub fn abs(self) -> Self {
        Self {
            sign: self.sign.abs(),
            ..self
        }
    }

    fn scale_log(self, p: f64) -> (f64, f64) {
        let prod = self.log_magnitude * p;
        let err = self.log_magnitude.mul_add(p, -prod);
        (prod, err + self.log_residual * p)
    }

    pub fn sqrt(self) -> Option<Self> {
        match self.sign {
            0 => Some(Self::ZERO),
            1 => {
                let (h, l) = self.scale_log(0.5);
                Some(Self::split(1, h, l))
            }
            _ => None,
        }
    }

    pub fn powf(self, p: f64) -> Option<Self> {
        match self.sign {
            0 if p > 0.0 => Some(Self::ZERO),
            1 => {
                let (h, l) = self.scale_log(p);
                Some(Self::split(1, h, l))
            }
            _ => None,
        }
    }

    pub fn recip(self) -> Option<Self> {
        (self.sign != 0).then(|| Self::split(self.sign, -self.log_magnitude, -self.log_residual))
    }

    /// Sum through log-sum-exp; cancellation to exact zero is preserved.
    #[allow(clippy::should_implement_trait)]
    pub fn add(self, other: Self) -> Self {
        if self.sign == 0 {
            return other;
        }
        if other.sign == 0 {
            return self;
        }
        if !self.log_magnitude.is_finite() || !other.log_magnitude.is_finite() {
            let v = self.to_f64() + other.to_f64();
            return Self::from_f64(v);
        }
        let d = (other.log_magnitude - self.log_magnitude) + (other.log_residual - self.log_residual);
        let (big, small, d) = if d <= 0.0 { (self, other, d) } else { (other, self, -d) };
        if big.sign == small.sign {
            let t = d.exp().ln_1p();
            return Self::split(big.sign, big.log_magnitude, big.log_residual + t);
        }
        if d == 0.0 {
            return Self::ZERO;
        }
        let t = log_diff_exp(0.0, d);
        Self::split(big.sign, big.log_magnitude, big.log_residual + t)
    }

    #[allow(clippy::should_implement_trait)]
    pub fn sub(self, other: Self) -> Self {
        self.add(-other)
    }

    pub fn is_finite(self) -> bool {
        self.sign == 0 || self.log_magnitude.is_finite()
    }
}

impl Mul for LogScalar {
    type Output = LogScalar;
    fn mul(self, rhs: Self) -> Self {
        if self.sign == 0 || rhs.sign == 0 {
            return Self::ZERO;
        }
        let (h, e) = if self.log_magnitude.is_finite() && rhs.log_magnitude.is_finite() {
            two_sum(self.log_magnitude, rhs.log_magnitude)
        } else {
            (self.log_magnitude + rhs.log_magnitude, 0.0)
        };
        Self::split(self.sign * rhs.sign, h, e + self.log_residual + rhs.log_residual)
    }
}

impl Div for LogScalar {
    type Output = LogScalar;
    /// Division by zero yields a value with infinite magnitude.
    fn div(self, rhs: Self) -> Self {
        if self.sign == 0 {
            return Self::ZERO;
        }
        if rhs.sign == 0 {
            return Self::new(self.sign, f64::INFINITY);
        }
        self * rhs.recip().expect("nonzero")
    }
}

impl Neg for LogScalar {
    type Output = LogScalar;
    fn neg(self) -> Self {
        Self {
            sign: -self.sign,
            ..self
        }
    }
}

impl PartialOrd for LogScalar {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        match self.sign.cmp(&other.sign) {
            Ordering::Equal => match self.sign {
                0 => Some(Ordering::Equal),
                1 => self.log_magnitude().partial_cmp(&other.log_magnitude()),
                _ => other.log_magnitude().partial_cmp(&self.log_magnitude()),
            },
            ord => Some(ord),
        }
    }
}

impl From<f64> for LogScalar {
    fn from(x: f64) -> Self {
        Self::from_f64(x)
    }
}

impl fmt::Debug for LogScalar {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.sign {
            0 => write!(f, "LogScalar(0)"),
            s => write!(f, "LogScalar({}exp({}))", if s > 0 { "+" } else { "-" }, self.log_magnitude()),
        }
    }
}

impl fmt::Display for LogScalar {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.sign == 0 {
            return write!(f, "0");
        }
        // Render as mantissa x 10^exp so values beyond f64 range still print.
        let log10 = self.log_magnitude() / std::f64::consts::LN_10;
        let exp = log10.floor();
        let mantissa = 10f64.powf(log10 - exp);
        let sign = if self.sign < 0 { "-" } else { "" };
        write!(f, "{sign}{mantissa:.6}e{exp}")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lse_examples() {
        assert!((log_sum_exp(0.0, 0.0) - std::f64::consts::LN_2).abs() < 1e-15);
        assert!(log_sum_exp(-1000.0, 0.0).abs() < 1e-15);
        let direct = (3f64.exp() + 5f64.exp()).ln();
        assert!((log_sum_exp(3.0, 5.0) - direct).abs() < 1e-14);
        assert!((log_sum_exp(3.0, 5.0) - 5.126_928_011_042_972).abs() < 1e-12);
        assert_eq!(log_sum_exp(f64::NEG_INFINITY, 2.0), 2.0);
        assert_eq!(log_sum_exp(f64::NEG_INFINITY, f64::NEG_INFINITY), f64::NEG_INFINITY);
        assert_eq!(log_sum_exp(1e6, 1e6 - 1.0), log_sum_exp(1e6 - 1.0, 1e6));
    }

    #[test]
    fn round_trip() {
        for &x in &[1.0, -2.5, 1e-300, -7.25e250, 3.0e-320, 0.0] {
            let y = LogScalar::from_f64(x).to_f64();
            if x == 0.0 {
                assert_eq!(y, 0.0);
            } else if x.abs() > f64::MIN_POSITIVE {
                assert!(((y - x) / x).abs() < 1e-14, "{x} -> {y}");
            }
        }
    }

    #[test]
    fn arithmetic_beyond_double_range() {
        let tiny = LogScalar::from_ln(-1.0e5);
        let big = LogScalar::from_ln(1.0e5);
        let prod = tiny * big;
        assert!((prod.to_f64() - 1.0).abs() < 1e-12);
        let sum = tiny.add(tiny);
        assert!((sum.log_magnitude() - (-1.0e5 + std::f64::consts::LN_2)).abs() < 1e-9);
        assert!(tiny.add(-tiny).is_zero());
        let diff = LogScalar::from_f64(3.0).sub(LogScalar::from_f64(5.0));
        assert!((diff.to_f64() + 2.0).abs() < 1e-14);
        assert!(LogScalar::from_f64(-2.0) < LogScalar::from_f64(1.0));
        assert!(LogScalar::from_f64(-2.0) < LogScalar::from_f64(-1.0));
    }

    #[test]
    fn multiplication_chain_associativity() {
        let xs: Vec<LogScalar> = (0..1000)
            .map(|k| LogScalar::from_f64(if k % 3 == 0 { -1.0 } else { 1.0 } * (1.0 + 0.37 * k as f64)))
            .collect();
        let forward = xs.iter().fold(LogScalar::ONE, |acc, &x| acc * x);
        let backward = xs.iter().rev().fold(LogScalar::ONE, |acc, &x| acc * x);
        assert_eq!(forward.sign(), backward.sign());
        let rel = (forward.log_magnitude() - backward.log_magnitude()) / forward.log_magnitude();
        assert!(rel.abs() < 1e-12);
        let direct: f64 = (0..1000).map(|k| (1.0 + 0.37 * k as f64).ln()).sum();
        assert!(((forward.log_magnitude() - direct) / direct).abs() < 1e-12);
    }

    #[test]
    fn wide_range_addition() {
        let a = LogScalar::from_ln(9.9e5);
        let b = LogScalar::from_ln(-9.9e5);
        assert!(a.add(b).is_finite());
        assert!((a.add(a).log_magnitude() - (9.9e5 + std::f64::consts::LN_2)).abs() < 1e-9);
    }

    #[test]
    fn diff_exp_precision() {
        let v = log_diff_exp(0.0, -1e-10);
        assert!((v - (1e-10f64).ln()).abs() < 1e-6);
        let w = log_diff_exp(2.0, 1.0);
        assert!((w - (2f64.exp() - 1f64.exp()).ln()).abs() < 1e-14);
    }
}
