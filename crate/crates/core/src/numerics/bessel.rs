//! Modified Bessel functions `I_l`, `K_l` of integer order and `J_1`.
//!
//! Small arguments use normalized power series, `Î_l(x) = I_l(x) l!/(x/2)^l`
//! and `K̂_l(x) = K_l(x) x^l / (2^{l-1}(l-1)!)`, both equal to `1 + O(x^2 ln x)`.
//! Keeping the `-1` parts separately lets the kernel excess
//! `I_l(a)K_l(b) - a^l/(2l b^l)` be formed without cancellation.
//! Larger arguments use the exponentially convergent trapezoid rule on the
//! integral representations (scaled), or the Hankel expansion for `I_l`.

use super::logscalar::LogScalar;
use crate::error::{Error, Result};

const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;
/// Below this argument the normalized series are used.
const SERIES_LIMIT: f64 = 2.0;
/// Above this argument `e^{-x} I_l(x)` switches to the Hankel expansion.
const I_ASYMPTOTIC: f64 = 30.0;

/// Energy argument of the kernel: a finite value, a log-domain value, or
/// the `z -> 0` limit.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ZArg {
    Limit,
    Value(f64),
    Log(LogScalar),
}

impl ZArg {
    fn ln(self) -> Option<f64> {
        match self {
            ZArg::Limit => None,
            ZArg::Value(z) => Some(z.ln()),
            ZArg::Log(z) => z.ln(),
        }
    }
}

fn factorial(n: u32) -> f64 {
    (1..=n).fold(1.0, |acc, k| acc * f64::from(k))
}

/// `Î_l(x) - 1 = sum_{k>=1} l! (x^2/4)^k / (k! (k+l)!)`.
fn i_norm_minus_one(l: u32, x: f64) -> f64 {
    let t = 0.25 * x * x;
    let mut term = 1.0;
    let mut sum = 0.0;
    for k in 1..500u32 {
        term *= t / (f64::from(k) * f64::from(k + l));
        sum += term;
        if term < 1e-17 * sum {
            break;
        }
    }
    sum
}

/// `K̂_l(x) - 1` for `l >= 1`, series valid for moderate `x`.
fn k_norm_minus_one(l: u32, x: f64) -> f64 {
    debug_assert!(l >= 1);
    let t = 0.25 * x * x;
    let lf = l as i32;
    // finite part: sum_{k=1}^{l-1} (l-k-1)!/((l-1)! k!) (-t)^k
    let mut finite = 0.0;
    for k in 1..l {
        finite += factorial(l - k - 1) / (factorial(l - 1) * factorial(k)) * (-t).powi(k as i32);
    }
    let half_pow = (0.5 * x).powi(2 * lf);
    let sign_log = if l % 2 == 1 { 1.0 } else { -1.0 };
    let log_part = sign_log * 2.0 * half_pow / (factorial(l - 1) * factorial(l))
        * (0.5 * x).ln()
        * (1.0 + i_norm_minus_one(l, x));
    // digamma sum: psi(m+1) = -gamma + H_m
    let mut h_k = 0.0; // H_k
    let mut h_lk: f64 = (1..=l).map(|j| 1.0 / f64::from(j)).sum(); // H_{l+k}
    let mut coeff = 1.0 / factorial(l); // t^k / (k! (l+k)!)
    let mut series = 0.0;
    for k in 0..500u32 {
        if k > 0 {
            h_k += 1.0 / f64::from(k);
            h_lk += 1.0 / f64::from(l + k);
            coeff *= t / (f64::from(k) * f64::from(l + k));
        }
        let term = (h_k + h_lk - 2.0 * EULER_GAMMA) * coeff;
        series += term;
        if k > 2 && term.abs() < 1e-18 * series.abs() {
            break;
        }
    }
    let sign_series = if l.is_multiple_of(2) { 1.0 } else { -1.0 };
    let digamma_part = sign_series * half_pow / factorial(l - 1) * series;
    finite + log_part + digamma_part
}

/// `K_0(x)` by its series, for small `x`.
fn k0_series(x: f64) -> f64 {
    let t = 0.25 * x * x;
    let i0 = 1.0 + i_norm_minus_one(0, x);
    let mut coeff = 1.0;
    let mut h = 0.0;
    let mut sum = 0.0;
    for k in 1..500u32 {
        h += 1.0 / f64::from(k);
        coeff *= t / (f64::from(k) * f64::from(k));
        sum += h * coeff;
        if coeff * h < 1e-18 * sum.abs().max(1e-300) {
            break;
        }
    }
    -((0.5 * x).ln() + EULER_GAMMA) * i0 + sum
}

/// `e^{-x} I_l(x)` for `x >= 0`.
pub fn bessel_i_scaled(l: u32, x: f64) -> f64 {
    if x == 0.0 {
        return if l == 0 { 1.0 } else { 0.0 };
    }
    if x < I_ASYMPTOTIC {
        let lead = (0.5 * x).powi(l as i32) / factorial(l);
        (-x).exp() * lead * (1.0 + i_norm_minus_one(l, x))
    } else {
        // Hankel expansion: e^{-x} I_l(x) ~ (2 pi x)^{-1/2} sum (-1)^k a_k / x^k
        let mu = 4.0 * f64::from(l) * f64::from(l);
        let mut term = 1.0;
        let mut sum = 1.0;
        for k in 1..60 {
            let kk = f64::from(k);
            let next = -term * (mu - (2.0 * kk - 1.0).powi(2)) / (kk * 8.0 * x);
            if next.abs() > term.abs() {
                break;
            }
            term = next;
            sum += term;
            if term.abs() < 1e-17 * sum.abs() {
                break;
            }
        }
        sum / (2.0 * std::f64::consts::PI * x).sqrt()
    }
}

/// `e^{x} K_l(x)` for `x > 0`.
pub fn bessel_k_scaled(l: u32, x: f64) -> f64 {
    assert!(x > 0.0, "K_l needs a positive argument");
    if x <= SERIES_LIMIT {
        let k = if l == 0 {
            k0_series(x)
        } else {
            let norm = 2f64.powi(l as i32 - 1) * factorial(l - 1) / x.powi(l as i32);
            norm * (1.0 + k_norm_minus_one(l, x))
        };
        return x.exp() * k;
    }
    // e^x K_nu(x) = int_0^inf exp(-x (cosh t - 1)) cosh(nu t) dt, trapezoid in t.
    let h = 0.125;
    let nu = f64::from(l);
    let mut sum = 0.5;
    let mut k = 1;
    loop {
        let t = h * f64::from(k);
        let expo = -x * (t.cosh() - 1.0) + nu * t;
        let term = expo.exp() * 0.5 * (1.0 + (-2.0 * nu * t).exp());
        sum += term;
        if expo < -40.0 && t > 1.0 {
            break;
        }
        k += 1;
    }
    h * sum
}

pub fn bessel_i(l: u32, x: f64) -> f64 {
    if x < I_ASYMPTOTIC {
        (0.5 * x).powi(l as i32) / factorial(l) * (1.0 + i_norm_minus_one(l, x))
    } else {
        bessel_i_scaled(l, x) * x.exp()
    }
}

pub fn bessel_k(l: u32, x: f64) -> f64 {
    bessel_k_scaled(l, x) * (-x).exp()
}

fn check_radii(r_small: f64, r_large: f64) -> Result<()> {
    if !(r_small > 0.0 && r_small <= r_large && r_large.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "need 0 < r_small <= r_large, got {r_small}, {r_large}"
        )));
    }
    Ok(())
}

/// `I_l(z r_small) K_l(z r_large)`, the `l`-th angular component of the
/// planar resolvent kernel `K_0(z|x-y|)`.
///
/// The `z -> 0` limit is `r_small^l / (2 l r_large^l)` for `l >= 1`; for
/// `l = 0` it diverges logarithmically and is rejected.
pub fn bessel_i_k_product(l: u32, z: ZArg, r_small: f64, r_large: f64) -> Result<f64> {
    check_radii(r_small, r_large)?;
    let limit = |l: u32| (r_small / r_large).powi(l as i32) / (2.0 * f64::from(l));
    let ln_z = match z {
        ZArg::Limit => {
            if l == 0 {
                return Err(Error::Unsupported(
                    "l = 0 kernel has no z -> 0 limit (logarithmic divergence)".into(),
                ));
            }
            return Ok(limit(l));
        }
        other => other
            .ln()
            .ok_or_else(|| Error::InvalidArgument("energy parameter must be positive".into()))?,
    };
    let ln_b = ln_z + r_large.ln();
    if ln_b < -36.0 {
        // all corrections are O(b^2 ln b) < 1e-30 relative
        return Ok(if l == 0 {
            -(ln_b - std::f64::consts::LN_2) - EULER_GAMMA
        } else {
            limit(l)
        });
    }
    let z = ln_z.exp();
    let (a, b) = (z * r_small, z * r_large);
    if l == 0 {
        return Ok(if b <= SERIES_LIMIT {
            (1.0 + i_norm_minus_one(0, a)) * k0_series(b)
        } else {
            bessel_i_scaled(0, a) * bessel_k_scaled(0, b) * (a - b).exp()
        });
    }
    if b <= SERIES_LIMIT {
        let ia = 1.0 + i_norm_minus_one(l, a);
        let kb = 1.0 + k_norm_minus_one(l, b);
        Ok(limit(l) * ia * kb)
    } else {
        Ok(bessel_i_scaled(l, a) * bessel_k_scaled(l, b) * (a - b).exp())
    }
}

/// `I_l(z r_small) K_l(z r_large) - r_small^l/(2 l r_large^l)` for `l >= 1`,
/// accurate in relative terms even when it is far below the limit value.
pub fn bessel_i_k_product_excess(l: u32, z: ZArg, r_small: f64, r_large: f64) -> Result<f64> {
    check_radii(r_small, r_large)?;
    if l == 0 {
        return Err(Error::Unsupported("excess kernel is defined for l >= 1".into()));
    }
    let ln_z = match z {
        ZArg::Limit => return Ok(0.0),
        other => other
            .ln()
            .ok_or_else(|| Error::InvalidArgument("energy parameter must be positive".into()))?,
    };
    let limit = (r_small / r_large).powi(l as i32) / (2.0 * f64::from(l));
    let ln_b = ln_z + r_large.ln();
    if ln_b < -300.0 {
        // excess ~ b^2 ln b underflows
        return Ok(0.0);
    }
    let z = ln_z.exp();
    let (a, b) = (z * r_small, z * r_large);
    if b <= SERIES_LIMIT {
        let di = i_norm_minus_one(l, a);
        let dk = k_norm_minus_one(l, b);
        Ok(limit * (di + dk + di * dk))
    } else {
        Ok(bessel_i_scaled(l, a) * bessel_k_scaled(l, b) * (a - b).exp() - limit)
    }
}

/// `J_1(x)`.
pub fn bessel_j1(x: f64) -> f64 {
    if x.abs() < 1.0 {
        return 0.5 * x + bessel_j1_minus_linear(x);
    }
    // J_1(x) = (1/2pi) int_0^{2pi} cos(theta - x sin theta) dtheta; the
    // trapezoid rule is spectrally accurate for this periodic integrand.
    let m = 2 * ((x.abs().ceil() as usize) + 32);
    let h = 2.0 * std::f64::consts::PI / m as f64;
    let sum: f64 = (0..m)
        .map(|k| {
            let th = h * k as f64;
            (th - x * th.sin()).cos()
        })
        .sum();
    sum / m as f64
}

/// `J_1(x) - x/2`, without cancellation for small `x`.
pub fn bessel_j1_minus_linear(x: f64) -> f64 {
    if x.abs() >= 1.0 {
        return bessel_j1(x) - 0.5 * x;
    }
    let t = -0.25 * x * x;
    let mut term = 0.5 * x; // k = 0
    let mut sum = 0.0;
    for k in 1..60u32 {
        term *= t / (f64::from(k) * f64::from(k + 1));
        sum += term;
        if term.abs() < 1e-18 * sum.abs() {
            break;
        }
    }
    sum
}
