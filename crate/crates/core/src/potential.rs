//! Pair potentials and the momentum-space profile of the resonance state.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::numerics::bessel::{bessel_j1, bessel_j1_minus_linear};
use crate::numerics::RadialGrid;

/// Strength giving a p-wave zero-energy resonance at unit coupling for the
/// exponential well with unit inverse range.
pub const RESONANT_ALPHA1: f64 = 3.792_282_802_328;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum PotentialKind {
    /// `v(r) = -alpha1 exp(-alpha2 r)`.
    Exponential,
    /// Linear interpolation of sampled values; zero beyond the last radius.
    Tabulated { radii: Vec<f64>, values: Vec<f64> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PotentialModel {
    #[serde(flatten)]
    pub kind: PotentialKind,
    pub alpha1: f64,
    pub alpha2: f64,
    pub coupling: f64,
}

impl Default for PotentialModel {
    fn default() -> Self {
        Self::exponential(RESONANT_ALPHA1, 1.0, 1.0).expect("valid default")
    }
}

impl PotentialModel {
    pub fn exponential(alpha1: f64, alpha2: f64, coupling: f64) -> Result<Self> {
        let m = Self {
            kind: PotentialKind::Exponential,
            alpha1,
            alpha2,
            coupling,
        };
        m.validate()?;
        Ok(m)
    }

    /// Tabulated `v` with envelope `alpha1 e^{-alpha2 r}`, checked at every node.
    pub fn tabulated(radii: Vec<f64>, values: Vec<f64>, alpha1: f64, alpha2: f64, coupling: f64) -> Result<Self> {
        let m = Self {
            kind: PotentialKind::Tabulated { radii, values },
            alpha1,
            alpha2,
            coupling,
        };
        m.validate()?;
        Ok(m)
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("alpha1", self.alpha1), ("alpha2", self.alpha2), ("coupling", self.coupling)] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(invalid(format!("{name} must be positive and finite, got {v}")));
            }
        }
        if let PotentialKind::Tabulated { radii, values } = &self.kind {
            if radii.len() < 2 || radii.len() != values.len() {
                return Err(invalid("tabulated potential needs >= 2 matching (radius, value) pairs"));
            }
            if radii[0] != 0.0 || radii.windows(2).any(|p| !(p[0] < p[1])) {
                return Err(invalid("tabulated radii must start at 0 and increase strictly"));
            }
            for (i, (&r, &v)) in radii.iter().zip(values).enumerate() {
                if v > 0.0 || !v.is_finite() {
                    return Err(invalid(format!("tabulated potential must be <= 0; node {i} has {v}")));
                }
                let envelope = self.alpha1 * (-self.alpha2 * r).exp();
                if v.abs() > envelope * (1.0 + 1e-12) {
                    return Err(invalid(format!(
                        "tabulated potential breaks the envelope at node {i}: |v({r})| = {} > {envelope}",
                        v.abs()
                    )));
                }
            }
        }
        Ok(())
    }

    /// Unscaled profile `v(r)`.
    fn profile(&self, r: f64) -> f64 {
        match &self.kind {
            PotentialKind::Exponential => -self.alpha1 * (-self.alpha2 * r).exp(),
            PotentialKind::Tabulated { radii, values } => {
                let last = radii.len() - 1;
                if r >= radii[last] {
                    return 0.0;
                }
                let k = radii.partition_point(|&x| x <= r) - 1;
                let t = (r - radii[k]) / (radii[k + 1] - radii[k]);
                values[k] + t * (values[k + 1] - values[k])
            }
        }
    }

    /// `lambda v(r)`.
    pub fn evaluate(&self, r: f64) -> Result<f64> {
        if !(r >= 0.0) {
            return Err(invalid(format!("radius must be >= 0, got {r}")));
        }
        Ok(self.coupling * self.profile(r))
    }

    /// `|lambda v(r)|^{1/2}` for `r >= 0`.
    pub fn sqrt_abs(&self, r: f64) -> f64 {
        (self.coupling * self.profile(r).abs()).sqrt()
    }

    pub fn with_coupling(&self, coupling: f64) -> Result<Self> {
        let mut m = self.clone();
        m.coupling = coupling;
        m.validate()?;
        Ok(m)
    }

    /// Radius beyond which the envelope is below `e^{-40}` of its peak.
    pub fn support_radius(&self) -> f64 {
        40.0 / self.alpha2
    }

    pub fn is_zero(&self) -> bool {
        match &self.kind {
            PotentialKind::Exponential => false,
            PotentialKind::Tabulated { values, .. } => values.iter().all(|&v| v == 0.0),
        }
    }
}

/// One sampled value of the radial profile `psi_0(p)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PsiSample {
    pub p: f64,
    pub value: Complex64,
}

/// Momentum profile of `psi_pm = |v|^{1/2} eta_pm`.
///
/// With the unitary planar transform, `psi_hat_pm(p) = psi_0(|p|) e^{pm i phi_p}`
/// and `psi_0(p) = -i F(p)`, `F(p) = int J_1(p r) |v|^{1/2} eta_0 r dr`.
/// `F` is real, so every product `psi_0^*(a) psi_0(b) = F(a) F(b)` is real.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PsiTransform {
    /// Limit of `psi_0(p)/p` at `p = 0`, equal to `-i c0/2`.
    pub psi0_slope: Complex64,
    pub samples: Vec<PsiSample>,
    pub alpha_bound: f64,
    pub beta_bound: f64,
    pub gamma_bound: f64,
    pub p_switch: f64,
    c0: f64,
    radii: Vec<f64>,
    /// `w_i |v(r_i)|^{1/2} eta_0(r_i)`, with `w_i` the `r dr` weight.
    weighted_profile: Vec<f64>,
    #[serde(skip)]
    omega_forced_zero: bool,
}

/// Largest `s` at which bounds on `omega` are sampled; every admissible cutoff is below it.
const OMEGA_SCAN_MAX: f64 = 0.25;

impl PsiTransform {
    /// Builds the transform from `eta_0` sampled on `grid`. `p_switch = None`
    /// uses the default `1e-3 alpha2`.
    pub fn new(potential: &PotentialModel, grid: &RadialGrid, eta0: &[f64], p_switch: Option<f64>) -> Result<Self> {
        if eta0.len() != grid.len() {
            return Err(Error::MissingState(format!(
                "eta0 has {} samples for a grid of {}",
                eta0.len(),
                grid.len()
            )));
        }
        let radii = grid.nodes().to_vec();
        let weighted_profile: Vec<f64> = radii
            .iter()
            .zip(grid.weights())
            .zip(eta0)
            .map(|((&r, &w), &e)| w * potential.sqrt_abs(r) * e)
            .collect();
        let c0 = radii.iter().zip(&weighted_profile).map(|(r, f)| r * f).sum();
        let p_switch = p_switch.unwrap_or(1e-3 * potential.alpha2);
        if !(p_switch > 0.0) {
            return Err(invalid("p_switch must be positive"));
        }
        let mut t = Self {
            psi0_slope: Complex64::new(0.0, -0.5 * c0),
            samples: Vec::new(),
            alpha_bound: 0.0,
            beta_bound: 0.0,
            gamma_bound: 0.0,
            p_switch,
            c0,
            radii,
            weighted_profile,
            omega_forced_zero: false,
        };
        t.fill_bounds(potential.alpha2);
        Ok(t)
    }

    /// `c0 = int s^2 eta_0(s) |v(s)|^{1/2} ds`.
    pub fn c0(&self) -> f64 {
        self.c0
    }

    pub fn c0_squared(&self) -> f64 {
        self.c0 * self.c0
    }

    /// Test hook: make `omega` vanish identically.
    pub fn force_omega_zero(&mut self) {
        self.omega_forced_zero = true;
    }

    pub fn omega_forced_zero(&self) -> bool {
        self.omega_forced_zero
    }

    /// `F(p)` by quadrature.
    fn f_quadrature(&self, p: f64) -> f64 {
        self.radii
            .iter()
            .zip(&self.weighted_profile)
            .map(|(&r, &f)| f * bessel_j1(p * r))
            .sum()
    }

    /// `G(p) = F(p)/p - c0/2`; zero below the switch, where the linear law is used.
    fn g_excess(&self, p: f64) -> f64 {
        if p < self.p_switch {
            return 0.0;
        }
        let s: f64 = self
            .radii
            .iter()
            .zip(&self.weighted_profile)
            .map(|(&r, &f)| f * bessel_j1_minus_linear(p * r))
            .sum();
        s / p
    }

    /// `F(p)`, real, with `psi_0 = -i F`.
    pub fn f_real(&self, p: f64) -> f64 {
        if p < self.p_switch {
            0.5 * self.c0 * p
        } else {
            self.f_quadrature(p)
        }
    }

    pub fn psi0(&self, p: f64) -> Result<Complex64> {
        if !(p >= 0.0) {
            return Err(invalid(format!("momentum must be >= 0, got {p}")));
        }
        Ok(Complex64::new(0.0, -self.f_real(p)))
    }

    /// Planar transform `psi_hat_+(p)` at the vector `(px, py)`.
    pub fn psi_hat_plus(&self, px: f64, py: f64) -> Complex64 {
        let p = px.hypot(py);
        if p == 0.0 {
            return Complex64::new(0.0, 0.0);
        }
        Complex64::new(0.0, -self.f_real(p)) * Complex64::new(px / p, py / p)
    }

    /// `omega(s) = s^{-2} psi_0^*(s/sqrt3) psi_0(2s/sqrt3) - c0^2/6`.
    pub fn omega(&self, s: f64) -> Result<f64> {
        if !(s > 0.0) {
            return Err(invalid(format!("omega needs s > 0, got {s}")));
        }
        Ok(self.omega_unchecked(s))
    }

    fn omega_unchecked(&self, s: f64) -> f64 {
        if self.omega_forced_zero {
            return 0.0;
        }
        let r3 = 3f64.sqrt();
        let g1 = self.g_excess(s / r3);
        let g2 = self.g_excess(2.0 * s / r3);
        (2.0 / 3.0) * (0.5 * self.c0 * (g1 + g2) + g1 * g2)
    }

    /// Residual imaginary part of `s^{-2} psi_0^*(s/sqrt3) psi_0(2s/sqrt3)`,
    /// from the complex product as written.
    pub fn omega_imaginary_residual(&self, s: f64) -> Result<f64> {
        let r3 = 3f64.sqrt();
        let prod = self.psi0(s / r3)?.conj() * self.psi0(2.0 * s / r3)?;
        Ok(prod.im / (s * s))
    }

    /// `P(s) = psi_0^*(s/sqrt3) psi_0(2s/sqrt3) = s^2 (c0^2/6 + omega(s))`.
    pub fn pair_product(&self, s: f64) -> f64 {
        s * s * (self.c0_squared() / 6.0 + self.omega_unchecked(s))
    }

    fn fill_bounds(&mut self, alpha2: f64) {
        // psi_0 samples and alpha
        let (lo, hi) = (self.p_switch.ln(), (50.0 * alpha2).ln());
        let m = 160;
        let mut alpha = 0.5 * self.c0.abs();
        self.samples = (0..m)
            .map(|k| {
                let p = (lo + (hi - lo) * k as f64 / (m - 1) as f64).exp();
                let f = self.f_real(p);
                alpha = alpha.max(f.abs() / p);
                PsiSample {
                    p,
                    value: Complex64::new(0.0, -f),
                }
            })
            .collect();
        self.alpha_bound = alpha;
        self.gamma_bound = self.omega_ratio_sup(OMEGA_SCAN_MAX, 120);
        self.beta_bound = self.near_additivity_sup(alpha2);
    }

    /// `sup |omega(s)|/s^2` on a log scan of `(0, s_max]`; omega vanishes below
    /// the switch so the scan starts there.
    pub fn omega_ratio_sup(&self, s_max: f64, points: usize) -> f64 {
        let lo = (0.5 * 3f64.sqrt() * self.p_switch).ln();
        let hi = s_max.ln();
        (0..points)
            .map(|k| {
                let s = (lo + (hi - lo) * k as f64 / (points - 1).max(1) as f64).exp();
                self.omega_unchecked(s).abs() / (s * s)
            })
            .fold(0.0, f64::max)
    }

    /// `sup |psi_hat(p+q) - psi_hat(p) - psi_hat(q)| / (|p||q|)` on a 2D sample.
    pub fn near_additivity_sup(&self, alpha2: f64) -> f64 {
        let mags: Vec<f64> = (0..8).map(|k| alpha2 * 1e-2 * 2f64.powi(k)).collect();
        let mut sup: f64 = 0.0;
        for &a in &mags {
            for &b in &mags {
                for j in 0..6 {
                    let th = std::f64::consts::PI * (j as f64 + 0.5) / 6.0;
                    let (px, py) = (a, 0.0);
                    let (qx, qy) = (b * th.cos(), b * th.sin());
                    let d = self.psi_hat_plus(px + qx, py + qy) - self.psi_hat_plus(px, py) - self.psi_hat_plus(qx, qy);
                    sup = sup.max(d.norm() / (a * b));
                }
            }
        }
        sup
    }

    /// Scales the underlying `eta_0` by `c` (tests of linearity).
    pub fn scaled(&self, c: f64, alpha2: f64) -> Self {
        let mut t = self.clone();
        t.c0 *= c;
        t.psi0_slope *= c;
        for f in &mut t.weighted_profile {
            *f *= c;
        }
        t.fill_bounds(alpha2);
        t
    }
}
