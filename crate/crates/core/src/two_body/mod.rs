//! Radial Birman-Schwinger operator of the pair, resonance tuning and `mu(z)`.

mod weight;

pub use weight::{double_log_abscissa, MuModel, WeightMode, WeightSpec, DEFAULT_R_EPS, DEFAULT_S_FLOOR_FACTOR, NUMERIC_SWITCH_Z};

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::numerics::bessel::{bessel_i_k_product, bessel_i_k_product_excess, ZArg};
use crate::numerics::eigen::{symmetric_eigen, Matrix};
use crate::numerics::interp::Pchip;
use crate::numerics::quadrature::reference_rule;
use crate::numerics::{GridScheme, RadialGrid};
use crate::potential::{PotentialModel, PsiTransform};

/// Gauss points per half-panel in the product-integration correction.
const CORRECTION_POINTS: usize = 24;

/// Default radial resolution used by `tune_resonance` callers.
pub const DEFAULT_RADIAL_NODES: usize = 800;
pub const DEFAULT_RADIAL_POINTS_PER_PANEL: usize = 8;

/// Uniform composite grid on `[0, 40/alpha2]`, the support scale of the potential.
pub fn default_radial_grid(potential: &PotentialModel, n: usize) -> Result<RadialGrid> {
    RadialGrid::uniform(0.0, potential.support_radius(), n, DEFAULT_RADIAL_POINTS_PER_PANEL)
}

/// Nystrom matrix of a radial kernel `|v|^{1/2} k(r, r') |v|^{1/2}` on
/// `L^2(r dr)`, in the symmetric variables `y_i = sqrt(w_i) f(r_i)`.
///
/// `k` has a derivative jump on the diagonal, which drags plain Gauss
/// Nystrom down to second order. On the panel that contains `r_i` the row
/// is therefore replaced by product integration: the panel is split at
/// `r_i`, and the kernel times the Lagrange basis of the panel nodes is
/// integrated with a fine Gauss rule on each side. The corrected operator
/// is then symmetrized.
fn assemble_radial<K>(grid: &RadialGrid, sqrt_v: &dyn Fn(f64) -> f64, kernel: K) -> Result<Matrix>
where
    K: Fn(f64, f64) -> Result<f64>,
{
    if grid.scheme() != GridScheme::UniformCompositeGauss {
        return Err(Error::Unsupported("the radial BS matrix needs a uniform composite grid".into()));
    }
    let n = grid.len();
    let r = grid.nodes();
    let sw: Vec<f64> = grid.weights().iter().map(|w| w.sqrt()).collect();
    let sv: Vec<f64> = r.iter().map(|&x| sqrt_v(x)).collect();
    let mut m = Matrix::zeros(n, n);
    for j in 0..n {
        for i in j..n {
            let k = kernel(r[j], r[i])?;
            let v = sw[i] * sv[i] * k * sv[j] * sw[j];
            m[(i, j)] = v;
            m[(j, i)] = v;
        }
    }
    let p = grid.points_per_panel();
    let (xq, wq) = reference_rule(CORRECTION_POINTS);
    let edges = grid.panel_edges();
    for panel in 0..grid.panel_count() {
        let (a, b) = (edges[panel], edges[panel + 1]);
        let idx = panel * p..(panel + 1) * p;
        let local = &r[idx.clone()];
        let denom: Vec<f64> = (0..p)
            .map(|j| (0..p).filter(|&m| m != j).map(|m| local[j] - local[m]).product())
            .collect();
        for i in idx.clone() {
            let ri = r[i];
            let mut q = vec![0.0; p];
            for (lo, hi) in [(a, ri), (ri, b)] {
                let half = 0.5 * (hi - lo);
                let mid = 0.5 * (hi + lo);
                for (t, w) in xq.iter().zip(&wq) {
                    let tt = mid + half * t;
                    let k = if tt < ri { kernel(tt, ri)? } else { kernel(ri, tt)? };
                    let f = half * w * k * sqrt_v(tt) * tt;
                    for j in 0..p {
                        let mut l = 1.0;
                        for (mm, &node) in local.iter().enumerate() {
                            if mm != j {
                                l *= tt - node;
                            }
                        }
                        q[j] += f * l / denom[j];
                    }
                }
            }
            for (jj, j) in idx.clone().enumerate() {
                m[(i, j)] = sw[i] * sv[i] * q[jj] / sw[j];
            }
        }
        for i in idx.clone() {
            for j in idx.clone() {
                if j > i {
                    let avg = 0.5 * (m[(i, j)] + m[(j, i)]);
                    m[(i, j)] = avg;
                    m[(j, i)] = avg;
                }
            }
        }
    }
    Ok(m)
}

/// Radial BS matrix in angular channel `l >= 1` with kernel `I_l(z r<) K_l(z r>)`.
pub fn bs_radial_matrix(potential: &PotentialModel, l: u32, z: ZArg, grid: &RadialGrid) -> Result<Matrix> {
    if l == 0 {
        return Err(Error::Unsupported(
            "l = 0 is absent on the antisymmetric two-body space".into(),
        ));
    }
    if grid.upper() < 0.5 * potential.support_radius() {
        return Err(invalid(format!(
            "grid ends at {} but the potential extends to ~{}",
            grid.upper(),
            potential.support_radius()
        )));
    }
    let sv = |r: f64| potential.sqrt_abs(r);
    assemble_radial(grid, &sv, |a, b| bessel_i_k_product(l, z, a, b))
}

/// The excess `k_l(z) - k_l(0)`, assembled without cancellation.
pub fn bs_radial_excess_matrix(potential: &PotentialModel, l: u32, z: ZArg, grid: &RadialGrid) -> Result<Matrix> {
    if l == 0 {
        return Err(Error::Unsupported("excess kernel needs l >= 1".into()));
    }
    let sv = |r: f64| potential.sqrt_abs(r);
    assemble_radial(grid, &sv, |a, b| bessel_i_k_product_excess(l, z, a, b))
}

/// One row of the `mu(z)` table.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MuPoint {
    pub z: f64,
    pub mu: f64,
    /// `1 - mu(z)`, computed directly so it keeps full relative precision.
    pub one_minus_mu: f64,
}

/// Two-term fit `mu - 1 = A z^2 ln z + B z^2`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SlopeFit {
    /// `A`, the coefficient of `z^2 ln z`.
    pub coefficient: f64,
    /// `B`, the coefficient of `z^2`.
    pub z2_coefficient: f64,
    /// `(pi/2) c0^2`.
    pub target: f64,
    /// `A / target`.
    pub ratio: f64,
    pub z_min: f64,
    pub z_max: f64,
    pub points: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TwoBodySolution {
    /// Potential with its coupling set to `lambda_star`.
    pub potential: PotentialModel,
    pub lambda_star: f64,
    pub grid: RadialGrid,
    /// `eta_0(r_i)`, normalized so `2 pi int eta_0^2 r dr = 1`.
    pub eta0: Vec<f64>,
    /// Second-largest eigenvalue of the tuned `k_1(0)`; the gap to 1 shows the
    /// top eigenvector is nondegenerate in the radial sector.
    pub second_eigenvalue: f64,
    /// Sorted by increasing `z`.
    pub mu_table: Vec<MuPoint>,
    pub c0_squared: f64,
    pub slope_fit: SlopeFit,
}

/// Fit window for the `z^2 ln z` coefficient.
pub const SLOPE_FIT_WINDOW: (f64, f64) = (1e-6, 1e-3);

/// Default `z` values tabulated after tuning: four per decade on `[1e-8, 1]`.
pub fn default_mu_z_values() -> Vec<f64> {
    (0..=32).map(|k| 10f64.powf(-8.0 + 0.25 * k as f64)).collect()
}

/// Tunes the coupling so the top eigenvalue of `lambda* k_1(0)` is 1 and
/// tabulates `mu(z)` on `z_values` (pass `None` for the default table).
pub fn tune_resonance(potential: &PotentialModel, grid: &RadialGrid, z_values: Option<&[f64]>) -> Result<TwoBodySolution> {
    if potential.is_zero() {
        return Err(Error::NoResonance("the potential vanishes identically".into()));
    }
    let unit = potential.with_coupling(1.0)?;
    let m0 = bs_radial_matrix(&unit, 1, ZArg::Limit, grid)?;
    let eig = symmetric_eigen(&m0, true)?;
    let n = grid.len();
    let top = eig.values[n - 1];
    if !(top > 0.0 && top.is_finite()) {
        return Err(Error::NoResonance(format!("top BS eigenvalue is {top}")));
    }
    let lambda_star = 1.0 / top;
    let second = if n > 1 { eig.values[n - 2] * lambda_star } else { 0.0 };
    let vecs = eig.vectors.expect("requested");
    let tuned = potential.with_coupling(lambda_star)?;
    // y_i = sqrt(w_i) eta(r_i); 2 pi sum y^2 = 1
    let mut y: Vec<f64> = (0..n).map(|i| vecs[(i, n - 1)]).collect();
    let norm = y.iter().map(|v| v * v).sum::<f64>().sqrt() * (2.0 * std::f64::consts::PI).sqrt();
    let sign = if y.iter().sum::<f64>() < 0.0 { -1.0 } else { 1.0 };
    for v in &mut y {
        *v *= sign / norm;
    }
    let eta0: Vec<f64> = y.iter().zip(grid.weights()).map(|(v, w)| v / w.sqrt()).collect();
    let c0: f64 = grid
        .nodes()
        .iter()
        .zip(grid.weights())
        .zip(&eta0)
        .map(|((&r, &w), &e)| w * r * tuned.sqrt_abs(r) * e)
        .sum();
    let mut sol = TwoBodySolution {
        potential: tuned,
        lambda_star,
        grid: grid.clone(),
        eta0,
        second_eigenvalue: second,
        mu_table: Vec::new(),
        c0_squared: c0 * c0,
        slope_fit: SlopeFit {
            coefficient: f64::NAN,
            z2_coefficient: f64::NAN,
            target: 0.5 * std::f64::consts::PI * c0 * c0,
            ratio: f64::NAN,
            z_min: SLOPE_FIT_WINDOW.0,
            z_max: SLOPE_FIT_WINDOW.1,
            points: 0,
        },
    };
    let default_z = default_mu_z_values();
    let zs = z_values.unwrap_or(&default_z);
    let (points, fit) = {
        let ctx = MuContext::new(&sol)?;
        let points = zs.iter().map(|&z| ctx.mu_point(z)).collect::<Result<Vec<_>>>()?;
        let fit = ctx.fit_slope(&points, sol.c0_squared)?;
        (points, fit)
    };
    for p in points {
        sol.insert_point(p);
    }
    sol.slope_fit = fit;
    Ok(sol)
}

/// Tuned operator `k(0)` and its top eigenvector, reused across many `z`.
pub struct MuContext<'a> {
    solution: &'a TwoBodySolution,
    k0: Matrix,
    y0: Vec<f64>,
}

impl<'a> MuContext<'a> {
    pub fn new(solution: &'a TwoBodySolution) -> Result<Self> {
        if solution.eta0.len() != solution.grid.len() {
            return Err(Error::MissingState("solution has no eta0 samples".into()));
        }
        let k0 = bs_radial_matrix(&solution.potential, 1, ZArg::Limit, &solution.grid)?;
        let mut y0: Vec<f64> = solution
            .eta0
            .iter()
            .zip(solution.grid.weights())
            .map(|(e, w)| e * w.sqrt())
            .collect();
        normalize(&mut y0);
        Ok(Self { solution, k0, y0 })
    }

    /// Top eigenvector of `k(z)` (unit, in symmetric variables) and `1 - mu(z)`.
    ///
    /// With `k(z) = k(0) + D` and `k(0) y0 = y0`, the eigen-equation gives
    /// `1 - mu = -<y0, D y> / <y0, y>` exactly; `D` comes from the excess
    /// kernel, so no `1 - (1 - tiny)` cancellation occurs.
    pub fn eigenpair(&self, z: f64) -> Result<(f64, Vec<f64>)> {
        if !(z >= 0.0) {
            return Err(invalid(format!("z must be >= 0, got {z}")));
        }
        if z == 0.0 {
            return Ok((0.0, self.y0.clone()));
        }
        let d = bs_radial_excess_matrix(&self.solution.potential, 1, ZArg::Value(z), &self.solution.grid)?;
        let k = &self.k0 + &d;
        let y = power_iteration(&k, &self.y0)?;
        let dy = mat_vec(&d, &y);
        let num = -dot(&self.y0, &dy);
        let den = dot(&self.y0, &y);
        Ok((num / den, y))
    }

    pub fn mu_point(&self, z: f64) -> Result<MuPoint> {
        let (omm, _) = self.eigenpair(z)?;
        Ok(MuPoint {
            z,
            mu: 1.0 - omm,
            one_minus_mu: omm,
        })
    }

    /// `||eta(z) - eta(0)||` in `L^2(R^2)` with `eta(z)` normalized like `eta_0`.
    pub fn eigenvector_deviation(&self, z: f64) -> Result<f64> {
        let (_, y) = self.eigenpair(z)?;
        let dev: f64 = y.iter().zip(&self.y0).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
        Ok(dev / (2.0 * std::f64::consts::PI).sqrt())
    }

    fn fit_slope(&self, table: &[MuPoint], c0_squared: f64) -> Result<SlopeFit> {
        let (lo, hi) = SLOPE_FIT_WINDOW;
        let pts: Vec<MuPoint> = table
            .iter()
            .copied()
            .filter(|p| p.z >= lo * (1.0 - 1e-12) && p.z <= hi * (1.0 + 1e-12))
            .collect();
        let pts = if pts.len() >= 3 {
            pts
        } else {
            (0..=12)
                .map(|k| self.mu_point(10f64.powf(-6.0 + 0.25 * k as f64)))
                .collect::<Result<Vec<_>>>()?
        };
        fit_two_term(&pts, c0_squared)
    }
}

/// Least squares of `(mu - 1)/z^2 = A ln z + B`.
pub fn fit_two_term(points: &[MuPoint], c0_squared: f64) -> Result<SlopeFit> {
    if points.len() < 3 {
        return Err(Error::InsufficientData("slope fit needs at least 3 points".into()));
    }
    let xs: Vec<f64> = points.iter().map(|p| p.z.ln()).collect();
    let ys: Vec<f64> = points.iter().map(|p| -p.one_minus_mu / (p.z * p.z)).collect();
    let (a, b) = linear_fit(&xs, &ys);
    let target = 0.5 * std::f64::consts::PI * c0_squared;
    Ok(SlopeFit {
        coefficient: a,
        z2_coefficient: b,
        target,
        ratio: a / target,
        z_min: points.iter().map(|p| p.z).fold(f64::INFINITY, f64::min),
        z_max: points.iter().map(|p| p.z).fold(0.0, f64::max),
        points: points.len(),
    })
}

/// Ordinary least squares `y = a x + b`.
pub(crate) fn linear_fit(xs: &[f64], ys: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let a = sxy / sxx;
    (a, my - a * mx)
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn normalize(v: &mut [f64]) {
    let n = dot(v, v).sqrt();
    for x in v {
        *x /= n;
    }
}

fn mat_vec(m: &Matrix, v: &[f64]) -> Vec<f64> {
    let col = faer::Col::<f64>::from_fn(v.len(), |i| v[i]);
    let out = m * &col;
    (0..m.nrows()).map(|i| out[i]).collect()
}

/// Dominant eigenvector from a good starting guess. Stops once the update
/// reaches rounding level.
fn power_iteration(m: &Matrix, start: &[f64]) -> Result<Vec<f64>> {
    let mut y = start.to_vec();
    normalize(&mut y);
    let floor = 1e-14;
    for _ in 0..500 {
        let mut next = mat_vec(m, &y);
        normalize(&mut next);
        let change = next.iter().zip(&y).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
        y = next;
        if change < floor {
            return Ok(y);
        }
    }
    Err(Error::Eigen("power iteration for mu(z) did not converge".into()))
}

impl TwoBodySolution {
    fn insert_point(&mut self, p: MuPoint) {
        match self.mu_table.binary_search_by(|q| q.z.total_cmp(&p.z)) {
            Ok(k) => self.mu_table[k] = p,
            Err(k) => self.mu_table.insert(k, p),
        }
    }

    /// `mu(z)`: the largest eigenvalue of the tuned `k_1(z)`, recorded in the table.
    pub fn mu_of_z(&mut self, z: f64) -> Result<f64> {
        if !(z >= 0.0) {
            return Err(invalid(format!("z must be >= 0, got {z}")));
        }
        if z == 0.0 {
            return Ok(1.0);
        }
        let p = MuContext::new(self)?.mu_point(z)?;
        self.insert_point(p);
        Ok(p.mu)
    }

    pub fn c0(&self) -> f64 {
        self.c0_squared.sqrt()
    }

    /// `2 pi sum w eta_0^2`, which is 1 by construction.
    pub fn eta0_norm_squared(&self) -> f64 {
        2.0 * std::f64::consts::PI
            * self.eta0.iter().zip(self.grid.weights()).map(|(e, w)| w * e * e).sum::<f64>()
    }

    /// Monotone interpolant of `ln(1 - mu)` against `ln z`.
    pub fn mu_interpolant(&self) -> Result<Pchip> {
        let pts: Vec<&MuPoint> = self.mu_table.iter().filter(|p| p.z > 0.0 && p.one_minus_mu > 0.0).collect();
        Pchip::new(
            pts.iter().map(|p| p.z.ln()).collect(),
            pts.iter().map(|p| p.one_minus_mu.ln()).collect(),
        )
    }

    pub fn psi_transform(&self, p_switch: Option<f64>) -> Result<PsiTransform> {
        PsiTransform::new(&self.potential, &self.grid, &self.eta0, p_switch)
    }

    /// Checks the invariants a loaded solution must satisfy.
    pub fn validate(&self) -> Result<()> {
        self.grid.validate()?;
        self.potential.validate()?;
        if self.eta0.len() != self.grid.len() {
            return Err(Error::MissingState("eta0 length does not match the grid".into()));
        }
        if !(self.c0_squared > 0.0) {
            return Err(invalid("c0_squared must be positive"));
        }
        if self.mu_table.windows(2).any(|p| !(p[0].z < p[1].z && p[0].mu > p[1].mu)) {
            return Err(invalid("mu_table must be strictly decreasing in z"));
        }
        Ok(())
    }

    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(self).map_err(|e| invalid(format!("serialize solution: {e}")))
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let sol: Self = serde_json::from_str(s).map_err(|e| invalid(format!("parse solution: {e}")))?;
        sol.validate()?;
        Ok(sol)
    }
}
