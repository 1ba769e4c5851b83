//! Eigenvalue and singular-value counting, the Weyl-type inequalities, and the
//! double-logarithmic fit of counts against `L = |ln|ln z^2||`.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::numerics::eigen::{eigenvalues_descending, frobenius_norm, singular_values, spectral_norm, Matrix};
use crate::numerics::logscalar::LogScalar;
use crate::two_body::double_log_abscissa;

fn check_threshold(a: f64) -> Result<()> {
    if !(a > 0.0) {
        return Err(invalid(format!("counting threshold must be positive, got {a}")));
    }
    Ok(())
}

/// Number of entries strictly greater than `a`.
pub fn count_above(eigenvalues: &[f64], a: f64) -> Result<usize> {
    check_threshold(a)?;
    Ok(eigenvalues.iter().filter(|&&v| v > a).count())
}

/// Number of singular values strictly greater than `a`.
pub fn singular_count(m: &Matrix, a: f64) -> Result<usize> {
    check_threshold(a)?;
    count_above(&singular_values(m)?, a)
}

/// `max{k : xi/(pi/2 + pi(k-1)) > a}`, the count of the closed-form step spectrum.
pub fn closed_form_count(xi: f64, a: f64) -> Result<usize> {
    check_threshold(a)?;
    if !(xi > 0.0) {
        return Ok(0);
    }
    // lambda_k > a  <=>  k < xi/(pi a) + 1/2
    let bound = xi / (PI * a) + 0.5;
    let k = bound.ceil() as usize;
    Ok(k.saturating_sub(1))
}

/// Limit slope of the count against `L` for `channels` copies of the plus channel.
pub fn channel_target_slope(channels: usize, a: f64) -> f64 {
    4.0 * channels as f64 / (3.0 * PI * a)
}

/// Limit slope of `n(-scriptT, a)` against `L`.
pub fn step_target_slope(c0_squared: f64, a: f64) -> f64 {
    2.0 / (PI * PI * c0_squared * a)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Inequality {
    /// `n(A1 + A2, a1 + a2) <= n(A1, a1) + n(A2, a2)`
    EigenSum,
    /// Same for singular counts.
    SingularSum,
    /// `n_mu(AB, a) <= n_mu(A, a/||B||)` and `n_mu(BA, a) <= n_mu(A, a/||B||)`
    Product,
    /// `n_mu(A, a) = n_mu(A^T, a)`
    Adjoint,
    /// `n_mu(A, a) <= ||A||_HS^2 / a^2`
    HilbertSchmidt,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Violation {
    pub trial: usize,
    pub inequality: Inequality,
    pub lhs: f64,
    pub rhs: f64,
    pub a1: f64,
    pub a2: f64,
    /// Row-major entries of the first operand.
    pub witness: Vec<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct WeylReport {
    pub trials: usize,
    pub dimension: usize,
    pub seed: u64,
    pub checks: usize,
    pub violations: Vec<Violation>,
}

impl WeylReport {
    pub fn passed(&self) -> bool {
        self.violations.is_empty()
    }
}

fn random_matrix(rng: &mut ChaCha8Rng, n: usize, symmetric: bool) -> Matrix {
    let scale = 1.0 / (n as f64).sqrt();
    let mut m = Matrix::from_fn(n, n, |_, _| scale * rng.gen_range(-1.0..1.0));
    if symmetric {
        for j in 0..n {
            for i in (j + 1)..n {
                m[(j, i)] = m[(i, j)];
            }
        }
    }
    m
}

fn flatten(m: &Matrix) -> Vec<f64> {
    (0..m.nrows())
        .flat_map(|i| (0..m.ncols()).map(move |j| (i, j)))
        .map(|(i, j)| m[(i, j)])
        .collect()
}

/// Randomized check of the counting inequalities. Deterministic for a given seed.
pub fn weyl_property_suite(trials: usize, dimension: usize, seed: u64) -> Result<WeylReport> {
    if trials == 0 || dimension == 0 {
        return Err(invalid("weyl suite needs trials >= 1 and dimension >= 1"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut violations = Vec::new();
    let mut checks = 0;
    for trial in 0..trials {
        let a1: f64 = rng.gen_range(0.05..1.0);
        let a2: f64 = rng.gen_range(0.05..1.0);
        let s1 = random_matrix(&mut rng, dimension, true);
        let s2 = random_matrix(&mut rng, dimension, true);
        let g1 = random_matrix(&mut rng, dimension, false);
        let g2 = random_matrix(&mut rng, dimension, false);
        let mut record = |inequality, lhs: usize, rhs: f64, witness: &Matrix| {
            checks += 1;
            let ok = match inequality {
                Inequality::Adjoint => lhs as f64 == rhs,
                _ => lhs as f64 <= rhs,
            };
            if !ok {
                violations.push(Violation {
                    trial,
                    inequality,
                    lhs: lhs as f64,
                    rhs,
                    a1,
                    a2,
                    witness: flatten(witness),
                });
            }
        };

        let e1 = eigenvalues_descending(&s1)?;
        let e2 = eigenvalues_descending(&s2)?;
        let e12 = eigenvalues_descending(&(&s1 + &s2))?;
        let lhs = count_above(&e12, a1 + a2)?;
        let rhs = count_above(&e1, a1)? + count_above(&e2, a2)?;
        record(Inequality::EigenSum, lhs, rhs as f64, &s1);

        let lhs = singular_count(&(&g1 + &g2), a1 + a2)?;
        let rhs = singular_count(&g1, a1)? + singular_count(&g2, a2)?;
        record(Inequality::SingularSum, lhs, rhs as f64, &g1);

        let b_norm = spectral_norm(&g2)?;
        let rhs = singular_count(&g1, a1 / b_norm)?;
        record(Inequality::Product, singular_count(&(&g1 * &g2), a1)?, rhs as f64, &g1);
        record(Inequality::Product, singular_count(&(&g2 * &g1), a1)?, rhs as f64, &g1);

        let lhs = singular_count(&g1, a2)?;
        let rhs = singular_count(&g1.transpose().to_owned(), a2)?;
        record(Inequality::Adjoint, lhs, rhs as f64, &g1);

        let hs = frobenius_norm(&g1).powi(2) / (a2 * a2);
        record(Inequality::HilbertSchmidt, lhs, hs, &g1);
    }
    Ok(WeylReport {
        trials,
        dimension,
        seed,
        checks,
        violations,
    })
}

/// Counts of one operator family along a decreasing list of `z`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CountingScan {
    pub label: String,
    pub z_list: Vec<LogScalar>,
    pub a: f64,
    pub counts: Vec<usize>,
    pub l_values: Vec<f64>,
    pub target: f64,
    pub fit: Option<DoubleLogFit>,
}

impl CountingScan {
    pub fn new(label: impl Into<String>, a: f64, target: f64) -> Result<Self> {
        check_threshold(a)?;
        Ok(Self {
            label: label.into(),
            z_list: Vec::new(),
            a,
            counts: Vec::new(),
            l_values: Vec::new(),
            target,
            fit: None,
        })
    }

    /// Appends a point; `z` must be below the previous one.
    pub fn push(&mut self, z: LogScalar, count: usize) -> Result<()> {
        let ln_z = z
            .ln()
            .ok_or_else(|| invalid(format!("scan needs z > 0, got {z}")))?;
        if let Some(prev) = self.z_list.last() {
            if !(ln_z < prev.log_magnitude()) {
                return Err(invalid("scan z values must be strictly decreasing"));
            }
        }
        self.z_list.push(z);
        self.counts.push(count);
        self.l_values.push(double_log_abscissa(ln_z));
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.counts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.counts.is_empty()
    }

    /// Counts never drop as `z` decreases.
    pub fn is_monotone(&self) -> bool {
        self.counts.windows(2).all(|p| p[0] <= p[1])
    }

    pub fn fit(&mut self) -> Result<DoubleLogFit> {
        let f = double_log_fit(&self.l_values, &self.counts, self.target)?;
        self.fit = Some(f.clone());
        Ok(f)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FitMethod {
    /// Line through the midpoints of the jumps between count plateaus.
    Staircase,
    /// Ordinary least squares on the raw points.
    LeastSquares,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DoubleLogFit {
    pub slope: f64,
    pub intercept: f64,
    /// RMS deviation of the raw counts from the fitted line.
    pub residual: f64,
    pub target: f64,
    pub relative_gap: f64,
    /// One count step across the sampled `L` range, the resolution of an integer staircase.
    pub slope_resolution: f64,
    pub method: FitMethod,
    pub points: usize,
    pub jumps: usize,
}

pub const MIN_FIT_POINTS: usize = 5;

fn least_squares(x: &[f64], y: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    let slope = if sxx > 0.0 { sxy / sxx } else { 0.0 };
    (slope, my - slope * mx)
}

/// Fits counts against `L`.
///
/// When the points show at least two jumps, the line is fitted through the jump
/// locations: each jump sits midway between the last point of one plateau and the
/// first point of the next, at the mean of the two counts. Otherwise raw least squares.
pub fn double_log_fit(l_values: &[f64], counts: &[usize], target: f64) -> Result<DoubleLogFit> {
    if l_values.len() != counts.len() {
        return Err(invalid("L values and counts differ in length"));
    }
    let mut pts: Vec<(f64, f64)> = l_values.iter().zip(counts).map(|(&l, &c)| (l, c as f64)).collect();
    pts.sort_by(|a, b| a.0.total_cmp(&b.0));
    pts.dedup_by(|a, b| a.0 == b.0);
    if pts.len() < MIN_FIT_POINTS {
        return Err(Error::InsufficientData(format!(
            "double-log fit needs {MIN_FIT_POINTS} points with distinct L, got {}",
            pts.len()
        )));
    }
    let jumps: Vec<(f64, f64)> = pts
        .windows(2)
        .filter(|p| p[0].1 != p[1].1)
        .map(|p| (0.5 * (p[0].0 + p[1].0), 0.5 * (p[0].1 + p[1].1)))
        .collect();
    let (method, (slope, intercept)) = if jumps.len() >= 2 {
        let (x, y): (Vec<f64>, Vec<f64>) = jumps.iter().copied().unzip();
        (FitMethod::Staircase, least_squares(&x, &y))
    } else {
        let (x, y): (Vec<f64>, Vec<f64>) = pts.iter().copied().unzip();
        (FitMethod::LeastSquares, least_squares(&x, &y))
    };
    let residual = (pts
        .iter()
        .map(|(l, c)| (c - slope * l - intercept).powi(2))
        .sum::<f64>()
        / pts.len() as f64)
        .sqrt();
    let span = pts[pts.len() - 1].0 - pts[0].0;
    Ok(DoubleLogFit {
        slope,
        intercept,
        residual,
        target,
        relative_gap: (slope - target) / target,
        slope_resolution: 1.0 / span,
        method,
        points: pts.len(),
        jumps: jumps.len(),
    })
}

/// One enactment of the stability sandwich
/// `n(ref, a + 2 eps) - cap <= n(K, a) <= n(ref, a - 2 eps) + cap`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StabilityCheck {
    pub a: f64,
    pub epsilon: f64,
    pub rank_cap: usize,
    pub reference_tight: usize,
    pub reference_loose: usize,
    pub count: usize,
    pub holds: bool,
}

pub fn lemma5_stability(reference: &[f64], perturbed: &[f64], a: f64, epsilon: f64, rank_cap: usize) -> Result<StabilityCheck> {
    if !(epsilon > 0.0 && 2.0 * epsilon < a) {
        return Err(invalid(format!("need 0 < 2 eps < a, got eps = {epsilon}, a = {a}")));
    }
    let tight = count_above(reference, a + 2.0 * epsilon)?;
    let loose = count_above(reference, a - 2.0 * epsilon)?;
    let count = count_above(perturbed, a)?;
    Ok(StabilityCheck {
        a,
        epsilon,
        rank_cap,
        reference_tight: tight,
        reference_loose: loose,
        count,
        holds: tight <= count + rank_cap && count <= loose + rank_cap,
    })
}

/// The sandwich at every point of a scan of `(reference, perturbed)` spectra.
pub fn lemma5_scan(spectra: &[(Vec<f64>, Vec<f64>)], a: f64, epsilon: f64, rank_cap: usize) -> Result<Vec<StabilityCheck>> {
    spectra
        .iter()
        .map(|(r, p)| lemma5_stability(r, p, a, epsilon, rank_cap))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn diag(v: &[f64]) -> Matrix {
        Matrix::from_fn(v.len(), v.len(), |i, j| if i == j { v[i] } else { 0.0 })
    }

    #[test]
    fn count_basics() {
        assert_eq!(count_above(&[], 1.0).unwrap(), 0);
        assert_eq!(count_above(&[2.0, 1.0, 0.5], 1.0).unwrap(), 1);
        assert!(count_above(&[1.0], 0.0).is_err());
        assert!(count_above(&[1.0], -1.0).is_err());
    }

    #[test]
    fn count_of_closed_form_list() {
        let list: Vec<f64> = (1..=20).map(|k| 10.0 / (0.5 * PI + PI * (k as f64 - 1.0))).collect();
        assert!((list[2] - 1.2732).abs() < 1e-4 && (list[3] - 0.9095).abs() < 1e-4);
        assert_eq!(count_above(&list, 1.0).unwrap(), 3);
        assert_eq!(closed_form_count(10.0, 1.0).unwrap(), 3);
    }

    #[test]
    fn singular_count_of_diagonal() {
        assert_eq!(singular_count(&diag(&[3.0, -2.0, 0.1]), 1.0).unwrap(), 2);
    }

    #[test]
    fn weyl_small_example() {
        let (a1, a2) = (diag(&[3.0, 0.0]), diag(&[0.0, 3.0]));
        let sum = eigenvalues_descending(&(&a1 + &a2)).unwrap();
        assert_eq!(count_above(&sum, 2.0).unwrap(), 2);
        let c1 = count_above(&eigenvalues_descending(&a1).unwrap(), 1.0).unwrap();
        let c2 = count_above(&eigenvalues_descending(&a2).unwrap(), 1.0).unwrap();
        assert_eq!(c1 + c2, 2);
    }

    #[test]
    fn product_with_scaled_identity() {
        let a = diag(&[3.0, 1.5, 0.9, 0.2]);
        let b = diag(&[2.0; 4]);
        for t in [0.5, 1.0, 2.0, 3.5] {
            assert_eq!(singular_count(&(&a * &b), t).unwrap(), singular_count(&a, t / 2.0).unwrap());
        }
    }

    #[test]
    fn suite_is_deterministic() {
        let a = weyl_property_suite(20, 6, 3).unwrap();
        let b = weyl_property_suite(20, 6, 3).unwrap();
        assert!(a.passed());
        assert_eq!(serde_json::to_string(&a).unwrap(), serde_json::to_string(&b).unwrap());
        assert!(weyl_property_suite(0, 6, 3).is_err());
    }

    #[test]
    fn synthetic_staircase_recovery() {
        let l: Vec<f64> = (0..=50).map(|k| 3.0 + 5.0 * k as f64 / 50.0).collect();
        let c: Vec<usize> = l.iter().map(|x| (0.8488 * x).round() as usize).collect();
        let f = double_log_fit(&l, &c, 0.8488).unwrap();
        assert_eq!(f.method, FitMethod::Staircase);
        assert!((f.slope - 0.8488).abs() < 0.1, "{}", f.slope);
    }

    #[test]
    fn fit_needs_five_points() {
        let e = double_log_fit(&[1.0, 2.0, 3.0, 4.0], &[0, 1, 2, 3], 1.0).unwrap_err();
        assert!(matches!(e, Error::InsufficientData(_)));
        let e = double_log_fit(&[1.0, 1.0, 1.0, 2.0, 2.0], &[0, 0, 0, 1, 1], 1.0).unwrap_err();
        assert!(matches!(e, Error::InsufficientData(_)));
    }

    #[test]
    fn scan_rejects_increasing_z() {
        let mut s = CountingScan::new("x", 1.0, 1.0).unwrap();
        s.push(LogScalar::from_f64(1e-10), 1).unwrap();
        assert!(s.push(LogScalar::from_f64(1e-9), 1).is_err());
        s.push(LogScalar::from_ln(-300.0), 2).unwrap();
        assert!(s.is_monotone());
        assert!(s.l_values[1] > s.l_values[0]);
    }

    #[test]
    fn zero_perturbation_sandwich() {
        let r: Vec<f64> = (1..=30).map(|k| 3.0 / k as f64).collect();
        let c = lemma5_stability(&r, &r, 1.0, 0.01, 0).unwrap();
        assert!(c.holds);
        assert!(lemma5_stability(&r, &r, 1.0, 0.6, 0).is_err());
    }
}
