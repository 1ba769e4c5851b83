//! The infrared weight `g_z(s) = (1 - mu(sqrt(s^2 + z^2)))^{-1/2}` and its integral `xi`.

use serde::{Deserialize, Serialize};

use super::TwoBodySolution;
use crate::error::{invalid, Error, Result};
use crate::numerics::interp::Pchip;
use crate::numerics::logscalar::{log_sum_exp, LogScalar};
use crate::numerics::quadrature::reference_rule;

pub const DEFAULT_R_EPS: f64 = 0.2;
/// The infrared floor of the `xi` quadrature is `z` times this factor.
pub const DEFAULT_S_FLOOR_FACTOR: f64 = 1e-3;
/// Below this `z` the automatic mode uses the asymptotic law.
pub const NUMERIC_SWITCH_Z: f64 = 1e-6;

/// Panel width in `u = ln t` and Gauss points per panel for `xi`.
const XI_PANEL_WIDTH: f64 = 0.25;
const XI_POINTS: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum WeightMode {
    Numeric,
    Asymptotic,
}

/// Source of `1 - mu(w)`.
#[derive(Debug, Clone, PartialEq)]
pub enum MuModel {
    /// Interpolated table of `ln(1 - mu)` in `ln w`; below the table the
    /// two-term fit `1 - mu = -w^2 (A ln w + B)` takes over.
    Numeric {
        table: Pchip,
        fit_a: f64,
        fit_b: f64,
    },
    /// `1 - mu = -(pi/2) c0^2 w^2 ln w`.
    Asymptotic { c0_squared: f64 },
    /// Test hook: `g = 1` on `(0, r_eps]`.
    Unit,
}

#[derive(Debug, Clone, PartialEq)]
pub struct WeightSpec {
    pub mode: WeightMode,
    pub r_eps: f64,
    pub z: LogScalar,
    /// Upper envelope constant: `g^2 <= delta / ((s^2+z^2) |ln(s^2+z^2)|)`.
    pub delta: f64,
    /// Lower envelope constant.
    pub delta_prime: f64,
    pub mu_model: MuModel,
    pub s_floor_factor: f64,
}

fn check_r_eps(r_eps: f64) -> Result<()> {
    if !(r_eps > 0.0 && r_eps < 0.25) {
        return Err(invalid(format!("r_eps must lie in (0, 1/4), got {r_eps}")));
    }
    Ok(())
}

fn check_z(z: LogScalar, r_eps: f64) -> Result<()> {
    match z.ln() {
        Some(l) if l <= r_eps.ln() + 1e-12 => Ok(()),
        _ => Err(invalid(format!("z must lie in (0, r_eps], got {z}"))),
    }
}

impl WeightSpec {
    pub fn numeric(solution: &TwoBodySolution, r_eps: f64, z: LogScalar) -> Result<Self> {
        check_r_eps(r_eps)?;
        check_z(z, r_eps)?;
        let model = MuModel::Numeric {
            table: solution.mu_interpolant()?,
            fit_a: solution.slope_fit.coefficient,
            fit_b: solution.slope_fit.z2_coefficient,
        };
        Self::build(WeightMode::Numeric, r_eps, z, model)
    }

    pub fn asymptotic(c0_squared: f64, r_eps: f64, z: LogScalar) -> Result<Self> {
        check_r_eps(r_eps)?;
        check_z(z, r_eps)?;
        if !(c0_squared > 0.0) {
            return Err(invalid("c0_squared must be positive"));
        }
        Self::build(WeightMode::Asymptotic, r_eps, z, MuModel::Asymptotic { c0_squared })
    }

    /// Numeric at `z >= 1e-6`, asymptotic below.
    pub fn auto(solution: &TwoBodySolution, r_eps: f64, z: LogScalar) -> Result<Self> {
        if z >= LogScalar::from_f64(NUMERIC_SWITCH_Z) {
            Self::numeric(solution, r_eps, z)
        } else {
            Self::asymptotic(solution.c0_squared, r_eps, z)
        }
    }

    /// Test hook with `g = 1` on `(0, r_eps]`. `z` still sets the grid floor.
    pub fn unit(r_eps: f64, z: LogScalar) -> Result<Self> {
        if !(r_eps > 0.0) {
            return Err(invalid("r_eps must be positive"));
        }
        Ok(Self {
            mode: WeightMode::Numeric,
            r_eps,
            z,
            delta: f64::NAN,
            delta_prime: f64::NAN,
            mu_model: MuModel::Unit,
            s_floor_factor: DEFAULT_S_FLOOR_FACTOR,
        })
    }

    fn build(mode: WeightMode, r_eps: f64, z: LogScalar, mu_model: MuModel) -> Result<Self> {
        let mut spec = Self {
            mode,
            r_eps,
            z,
            delta: 0.0,
            delta_prime: 0.0,
            mu_model,
            s_floor_factor: DEFAULT_S_FLOOR_FACTOR,
        };
        let (lo, hi) = spec.envelope_range()?;
        spec.delta = hi;
        spec.delta_prime = lo;
        Ok(spec)
    }

    /// Moves the infrared floor to `z * factor`, with `factor` in `(0, 1]`.
    pub fn with_floor_factor(mut self, factor: f64) -> Result<Self> {
        if !(factor > 0.0 && factor <= 1.0) {
            return Err(invalid(format!("floor factor must lie in (0, 1], got {factor}")));
        }
        self.s_floor_factor = factor;
        Ok(self)
    }

    pub fn is_unit(&self) -> bool {
        matches!(self.mu_model, MuModel::Unit)
    }

    pub fn ln_z(&self) -> f64 {
        self.z.log_magnitude()
    }

    /// `ln(1 - mu(w))` from `ln w`.
    pub fn ln_one_minus_mu(&self, ln_w: f64) -> Result<f64> {
        match &self.mu_model {
            MuModel::Unit => Ok(0.0),
            MuModel::Asymptotic { c0_squared } => {
                if ln_w >= 0.0 {
                    return Err(Error::DegenerateWeight(format!(
                        "asymptotic law needs w < 1, got ln w = {ln_w}"
                    )));
                }
                Ok((0.5 * std::f64::consts::PI * c0_squared).ln() + 2.0 * ln_w + (-ln_w).ln())
            }
            MuModel::Numeric { table, fit_a, fit_b } => {
                if let Some(v) = table.evaluate(ln_w) {
                    return Ok(v);
                }
                let first = table.knots()[0];
                if ln_w < first {
                    let bracket = -(fit_a * ln_w + fit_b);
                    if !(bracket > 0.0) {
                        return Err(Error::DegenerateWeight(format!(
                            "fit gives 1 - mu <= 0 at ln w = {ln_w}"
                        )));
                    }
                    Ok(2.0 * ln_w + bracket.ln())
                } else {
                    Err(Error::DegenerateWeight(format!(
                        "w = e^{ln_w} lies above the tabulated range of mu"
                    )))
                }
            }
        }
    }

    /// `ln(s^2 + z^2)` from `ln s`.
    pub fn ln_w_squared(&self, ln_s: f64) -> f64 {
        log_sum_exp(2.0 * ln_s, 2.0 * self.ln_z())
    }

    /// `ln g_z(s)`; `-inf` above the cutoff.
    pub fn ln_g(&self, ln_s: f64) -> Result<f64> {
        if ln_s > self.r_eps.ln() + 1e-13 {
            return Ok(f64::NEG_INFINITY);
        }
        if self.is_unit() {
            return Ok(0.0);
        }
        Ok(-0.5 * self.ln_one_minus_mu(0.5 * self.ln_w_squared(ln_s))?)
    }

    /// `g_z(s)` in log form.
    pub fn weight_g(&self, s: f64) -> Result<LogScalar> {
        if !(s > 0.0) {
            return Err(invalid(format!("weight needs s > 0, got {s}")));
        }
        self.weight_g_ln(s.ln())
    }

    pub fn weight_g_ln(&self, ln_s: f64) -> Result<LogScalar> {
        Ok(LogScalar::from_ln(self.ln_g(ln_s)?))
    }

    /// `g^2 (s^2+z^2) |ln(s^2+z^2)|`, which the envelope constants bracket.
    pub fn envelope_ratio(&self, ln_s: f64) -> Result<f64> {
        let lw2 = self.ln_w_squared(ln_s);
        Ok((2.0 * self.ln_g(ln_s)? + lw2 + lw2.abs().ln()).exp())
    }

    /// Infimum and supremum of `2 w^2 |ln w| / (1 - mu(w))` over `w` in `(0, sqrt2 r_eps]`.
    fn envelope_range(&self) -> Result<(f64, f64)> {
        if self.is_unit() {
            return Ok((f64::NAN, f64::NAN));
        }
        let hi = (2f64.sqrt() * self.r_eps).ln();
        let lo = -700.0;
        let m = 4000;
        let (mut inf, mut sup) = (f64::INFINITY, 0.0f64);
        for k in 0..=m {
            let lw = lo + (hi - lo) * k as f64 / m as f64;
            let v = (2.0 * lw + (2.0 * lw.abs()).ln() - self.ln_one_minus_mu(lw)?).exp();
            inf = inf.min(v);
            sup = sup.max(v);
        }
        Ok((inf, sup))
    }

    /// Midpoint of the envelope constants; exact in asymptotic mode.
    pub fn delta_bar(&self) -> f64 {
        0.5 * (self.delta + self.delta_prime)
    }

    /// `ln` of the infrared floor `z * s_floor_factor`.
    pub fn ln_s_floor(&self) -> f64 {
        self.ln_z() + self.s_floor_factor.ln()
    }

    /// `int_0^s g^2 t dt` for `s` below the floor, from the envelope primitive
    /// `(delta_bar/2)(ln|ln z^2| - ln|ln(s^2+z^2)|)`.
    fn xi_tail(&self, ln_s: f64) -> f64 {
        if self.is_unit() {
            return 0.5 * (2.0 * ln_s).exp();
        }
        let lz2 = 2.0 * self.ln_z();
        let lw2 = self.ln_w_squared(ln_s);
        // ln|ln z^2| - ln|ln(s^2+z^2)| = -ln(1 - (lw2 - lz2)/|lz2|)
        let diff = -(-(lw2 - lz2) / lz2.abs()).ln_1p();
        0.5 * self.delta_bar() * diff
    }

    /// `int_{e^{lo}}^{e^{hi}} g^2 t dt` by composite Gauss in `u = ln t`.
    pub fn xi_between(&self, ln_lo: f64, ln_hi: f64) -> Result<f64> {
        if ln_hi <= ln_lo {
            return Ok(0.0);
        }
        let panels = ((ln_hi - ln_lo) / XI_PANEL_WIDTH).ceil().max(1.0) as usize;
        let h = (ln_hi - ln_lo) / panels as f64;
        let (x, w) = reference_rule(XI_POINTS);
        let mut total = 0.0;
        for p in 0..panels {
            let mid = ln_lo + h * (p as f64 + 0.5);
            for (t, wt) in x.iter().zip(&w) {
                let u = mid + 0.5 * h * t;
                total += 0.5 * h * wt * (2.0 * self.ln_g(u)? + 2.0 * u).exp();
            }
        }
        Ok(total)
    }

    /// `xi(s) = int_0^s g^2(t) t dt`.
    pub fn xi(&self, s: f64) -> Result<f64> {
        if !(s > 0.0) {
            return Err(invalid(format!("xi needs s > 0, got {s}")));
        }
        if s > self.r_eps * (1.0 + 1e-12) {
            return Err(invalid(format!("xi needs s <= r_eps = {}, got {s}", self.r_eps)));
        }
        self.xi_ln(s.ln().min(self.r_eps.ln()))
    }

    /// `xi` at `s = e^{ln_s}`, for arguments below double range.
    pub fn xi_ln(&self, ln_s: f64) -> Result<f64> {
        let floor = self.ln_s_floor();
        if ln_s <= floor {
            return Ok(self.xi_tail(ln_s));
        }
        Ok(self.xi_tail(floor) + self.xi_between(floor, ln_s)?)
    }

    /// `|ln|ln z^2||`, the double-log abscissa.
    pub fn double_log(&self) -> f64 {
        double_log_abscissa(self.ln_z())
    }
}

/// `L = |ln|ln z^2||` from `ln z`.
pub fn double_log_abscissa(ln_z: f64) -> f64 {
    (2.0 * ln_z).abs().ln().abs()
}
