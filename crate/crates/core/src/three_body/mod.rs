//! Reduced three-body operators on `L^2((0, r_eps]; x dx)` and their spectral comparison.
//!
//! Operators are discretized by Galerkin projection onto piecewise polynomials on the
//! panels of a log grid (see `panels`). An entry of a block is stored as
//! `e^{h_i + h_j} c_ij` with `h_i = ln g(s_i) + ln(W_i)/2` and `W` the `x dx`
//! quadrature weight, so entries stay finite for every representable `z`. For a
//! smooth kernel `c_ij` is close to `K(s_i, s_j)`, the symmetrized Nystrom value.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

mod panels;

use panels::{PanelGalerkin, Region};

use crate::counting::{count_above, singular_count};
use crate::error::{invalid, Error, Result};
use crate::numerics::eigen::{eigenvalues_descending, frobenius_norm, singular_values, Matrix};
use crate::numerics::grid::RadialGrid;
use crate::numerics::logscalar::LogScalar;
use crate::potential::PsiTransform;
use crate::two_body::{double_log_abscissa, MuModel, TwoBodySolution, WeightSpec};

pub const DEFAULT_THREE_BODY_NODES: usize = 2000;
pub const DEFAULT_POINTS_PER_PANEL: usize = 8;
/// Above this size the off-diagonal block's Gram matrix gives the spectrum of the
/// step operator instead of the full block matrix.
const GRAM_ROUTE_MIN: usize = 1000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum OperatorLabel {
    Tplus,
    Tminus,
    #[serde(rename = "scriptT")]
    ScriptT,
    #[serde(rename = "scriptTprime")]
    ScriptTPrime,
    B1,
    B2,
    B3,
    S,
    D,
}

impl OperatorLabel {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::Tplus => "Tplus",
            Self::Tminus => "Tminus",
            Self::ScriptT => "scriptT",
            Self::ScriptTPrime => "scriptTprime",
            Self::B1 => "B1",
            Self::B2 => "B2",
            Self::B3 => "B3",
            Self::S => "S",
            Self::D => "D",
        }
    }

    pub fn is_self_adjoint(self) -> bool {
        matches!(self, Self::Tplus | Self::Tminus | Self::ScriptT | Self::S | Self::D)
    }
}

impl fmt::Display for OperatorLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for OperatorLabel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "Tplus" => Self::Tplus,
            "Tminus" => Self::Tminus,
            "scriptT" => Self::ScriptT,
            "scriptTprime" => Self::ScriptTPrime,
            "B1" => Self::B1,
            "B2" => Self::B2,
            "B3" => Self::B3,
            "S" => Self::S,
            "D" => Self::D,
            other => return Err(invalid(format!("unknown operator label `{other}`"))),
        })
    }
}

/// Discretized operator with a 1x1 or 2x2 block structure. Missing blocks are zero.
#[derive(Debug, Clone)]
pub struct BlockOperator {
    pub label: OperatorLabel,
    pub grid: RadialGrid,
    /// `ln g(s_i) + ln(W_i)/2` at each node.
    pub log_weighting: Vec<f64>,
    blocks: Vec<Option<Matrix>>,
    block_dim: usize,
}

impl BlockOperator {
    fn new(label: OperatorLabel, grid: &RadialGrid, log_weighting: Vec<f64>, blocks: Vec<Option<Matrix>>) -> Self {
        let block_dim = if blocks.len() == 4 { 2 } else { 1 };
        Self {
            label,
            grid: grid.clone(),
            log_weighting,
            blocks,
            block_dim,
        }
    }

    pub fn block_dim(&self) -> usize {
        self.block_dim
    }

    /// Size of one block.
    pub fn n(&self) -> usize {
        self.grid.len()
    }

    pub fn dim(&self) -> usize {
        self.block_dim * self.n()
    }

    pub fn block(&self, row: usize, col: usize) -> Option<&Matrix> {
        self.blocks[row * self.block_dim + col].as_ref()
    }

    pub fn full_matrix(&self) -> Matrix {
        let n = self.n();
        let mut m = Matrix::zeros(self.dim(), self.dim());
        for r in 0..self.block_dim {
            for c in 0..self.block_dim {
                if let Some(b) = self.block(r, c) {
                    m.submatrix_mut(r * n, c * n, n, n).copy_from(b);
                }
            }
        }
        m
    }

    /// Eigenvalues, descending. The step operator uses `+-` singular values of its
    /// off-diagonal block, which is exact for its block structure.
    pub fn eigenvalues(&self) -> Result<Vec<f64>> {
        if !self.label.is_self_adjoint() {
            return Err(invalid(format!("{} is not self-adjoint", self.label)));
        }
        if self.label == OperatorLabel::ScriptT {
            if let Some(b) = self.block(0, 1) {
                return Ok(mirrored_spectrum(&off_diagonal_singular_values(b)?));
            }
        }
        eigenvalues_descending(&self.full_matrix())
    }

    /// Eigenvalues of the assembled full matrix, bypassing any structural shortcut.
    pub fn eigenvalues_dense(&self) -> Result<Vec<f64>> {
        eigenvalues_descending(&self.full_matrix())
    }

    pub fn singular_values(&self) -> Result<Vec<f64>> {
        singular_values(&self.full_matrix())
    }

    pub fn hs_norm(&self) -> f64 {
        self.blocks
            .iter()
            .flatten()
            .map(|b| frobenius_norm(b).powi(2))
            .sum::<f64>()
            .sqrt()
    }

    /// Largest `|A_ij - A_ji|` relative to the largest entry.
    pub fn symmetry_defect(&self) -> f64 {
        let m = self.full_matrix();
        let scale = crate::numerics::eigen::max_abs(&m);
        if scale == 0.0 {
            return 0.0;
        }
        let mut worst: f64 = 0.0;
        for j in 0..m.ncols() {
            for i in (j + 1)..m.nrows() {
                worst = worst.max((m[(i, j)] - m[(j, i)]).abs());
            }
        }
        worst / scale
    }
}

/// Singular values of a square block, by the Gram route for large blocks.
fn off_diagonal_singular_values(b: &Matrix) -> Result<Vec<f64>> {
    if b.nrows() < GRAM_ROUTE_MIN {
        return singular_values(b);
    }
    let gram = b * b.transpose();
    let gram = Matrix::from_fn(gram.nrows(), gram.ncols(), |i, j| 0.5 * (gram[(i, j)] + gram[(j, i)]));
    Ok(eigenvalues_descending(&gram)?
        .into_iter()
        .map(|v| v.max(0.0).sqrt())
        .collect())
}

/// `{sigma_k} u {-sigma_k}`, descending.
fn mirrored_spectrum(sigma: &[f64]) -> Vec<f64> {
    let mut v: Vec<f64> = sigma.iter().copied().chain(sigma.iter().map(|s| -s)).collect();
    v.sort_by(|a, b| b.total_cmp(a));
    v
}

/// Log grid in `s` from the infrared floor to the cutoff.
pub fn three_body_grid(spec: &WeightSpec, n: usize, points_per_panel: usize) -> Result<RadialGrid> {
    RadialGrid::logarithmic(spec.ln_s_floor(), spec.r_eps.ln(), n, points_per_panel)
}

/// `h_i = ln g(s_i) + ln(W_i)/2`. Nodes above the cutoff are rejected.
pub fn log_weighting(spec: &WeightSpec, grid: &RadialGrid) -> Result<Vec<f64>> {
    let cut = spec.r_eps.ln() + 1e-12;
    (0..grid.len())
        .map(|i| {
            let ln_s = grid.ln_node(i);
            if ln_s > cut {
                return Err(invalid(format!(
                    "grid node {} exceeds the cutoff r_eps = {}",
                    grid.nodes()[i],
                    spec.r_eps
                )));
            }
            Ok(spec.ln_g(ln_s)? + 0.5 * grid.ln_weights()[i])
        })
        .collect()
}

/// `s_i^2 / (s_i^2 + s_j^2)` from log nodes.
fn share(ln_si: f64, ln_sj: f64) -> f64 {
    1.0 / (1.0 + (2.0 * (ln_sj - ln_si)).exp())
}

/// `e^{h_i + h_j} f(i, j)`.
fn weighted(h: &[f64], f: impl Fn(usize, usize) -> f64) -> Matrix {
    let n = h.len();
    Matrix::from_fn(n, n, |i, j| {
        let v = f(i, j);
        if v == 0.0 {
            0.0
        } else {
            v * (h[i] + h[j]).exp()
        }
    })
}

/// Galerkin matrix of `chi_{s<=t} g(s) g(t)`.
fn step_upper_block(grid: &RadialGrid, h: &[f64]) -> Result<Matrix> {
    Ok(PanelGalerkin::new(grid, h, None)?.assemble(h, Region::Upper, |_, _| 1.0))
}

/// The step operator with off-diagonal kernels `chi_{s<=t} g(s) g(t)` and
/// `chi_{s>=t} g(s) g(t)`.
pub fn script_t_matrix(spec: &WeightSpec, grid: &RadialGrid) -> Result<BlockOperator> {
    let h = log_weighting(spec, grid)?;
    let upper = step_upper_block(grid, &h)?;
    let lower = upper.transpose().to_owned();
    Ok(BlockOperator::new(
        OperatorLabel::ScriptT,
        grid,
        h,
        vec![None, Some(upper), Some(lower), None],
    ))
}

/// Similar non-symmetric form with kernels `chi_{s<=t} g^2(t)` and `chi_{s>=t} g^2(t)`,
/// as the matrix acting on node values.
pub fn script_t_prime_matrix(spec: &WeightSpec, grid: &RadialGrid) -> Result<BlockOperator> {
    let h = log_weighting(spec, grid)?;
    let n = h.len();
    // conjugation of the symmetric form by diag(e^h)
    let sym = step_upper_block(grid, &h)?;
    let upper = Matrix::from_fn(n, n, |i, j| (h[j] - h[i]).exp() * sym[(i, j)]);
    let lower = Matrix::from_fn(n, n, |i, j| (h[j] - h[i]).exp() * sym[(j, i)]);
    Ok(BlockOperator::new(
        OperatorLabel::ScriptTPrime,
        grid,
        h,
        vec![None, Some(upper), Some(lower), None],
    ))
}

/// `xi(s_i)` at every node, accumulated panel by panel.
pub fn xi_at_nodes(spec: &WeightSpec, grid: &RadialGrid) -> Result<Vec<f64>> {
    let floor = spec.ln_s_floor();
    let mut out = Vec::with_capacity(grid.len());
    let mut ln_prev = floor;
    let mut acc = spec.xi_ln(floor)?;
    for i in 0..grid.len() {
        let ln_s = grid.ln_node(i);
        if ln_s <= floor {
            out.push(spec.xi_ln(ln_s)?);
            continue;
        }
        acc += spec.xi_between(ln_prev, ln_s)?;
        ln_prev = ln_s;
        out.push(acc);
    }
    Ok(out)
}

/// `xi(r_eps) / (pi/2 + pi (k-1))` for `k = 1..=count`.
pub fn closed_form_spectrum(xi_cutoff: f64, count: usize) -> Vec<f64> {
    (1..=count)
        .map(|k| xi_cutoff / (0.5 * PI + PI * (k as f64 - 1.0)))
        .collect()
}

/// Relative L2 mismatch between an eigenvector of the step operator at eigenvalue
/// `lambda != 0` and the profiles `(A cos(x/lambda), A sin(x/lambda))` in `x = xi(s)`,
/// with `A` fitted by least squares.
pub fn eigenvector_shape_residual(op: &BlockOperator, xi: &[f64], lambda: f64, vector: &[f64]) -> Result<f64> {
    let n = op.n();
    if vector.len() != 2 * n || xi.len() != n || !(lambda != 0.0 && lambda.is_finite()) {
        return Err(invalid("shape check needs a nonzero eigenvalue and matching lengths"));
    }
    let h = &op.log_weighting;
    // vector_i = sqrt(W_i) f(s_i) and the profile is f(s)/g(s), so the model vector is
    // e^{h_i} times the profile.
    let model: Vec<f64> = (0..2 * n)
        .map(|k| {
            let i = k % n;
            let x = xi[i] / lambda;
            let profile = if k < n { x.cos() } else { x.sin() };
            h[i].exp() * profile
        })
        .collect();
    let mm: f64 = model.iter().map(|m| m * m).sum();
    let vm: f64 = model.iter().zip(vector).map(|(m, v)| m * v).sum();
    let vv: f64 = vector.iter().map(|v| v * v).sum();
    let amp = vm / mm;
    let r: f64 = model.iter().zip(vector).map(|(m, v)| (v - amp * m).powi(2)).sum();
    Ok((r / vv).sqrt())
}

/// A two-body solution paired with a weight built from it.
#[derive(Debug, Clone)]
pub struct ChainContext {
    pub spec: WeightSpec,
    pub psi: PsiTransform,
    pub c0_squared: f64,
}

impl ChainContext {
    pub fn new(solution: &TwoBodySolution, spec: &WeightSpec, p_switch: Option<f64>) -> Result<Self> {
        check_provenance(solution, spec)?;
        Ok(Self {
            spec: spec.clone(),
            psi: solution.psi_transform(p_switch)?,
            c0_squared: solution.c0_squared,
        })
    }

    /// The same solution with another weight, reusing the `psi` transform, which
    /// does not depend on `z`.
    pub fn with_spec(&self, solution: &TwoBodySolution, spec: &WeightSpec) -> Result<Self> {
        check_provenance(solution, spec)?;
        if solution.c0_squared != self.c0_squared {
            return Err(invalid("chain context was built from another two-body solution"));
        }
        Ok(Self {
            spec: spec.clone(),
            psi: self.psi.clone(),
            c0_squared: self.c0_squared,
        })
    }

    /// Test hook: `omega = 0`, so pair products follow the linear law exactly.
    pub fn force_omega_zero(&mut self) {
        self.psi.force_omega_zero();
    }

    /// `2 pi c0^2 / 3`, the coupling of the limit operator.
    pub fn coupling(&self) -> f64 {
        2.0 * PI * self.c0_squared / 3.0
    }

    fn omega_at(&self, grid: &RadialGrid) -> Result<Vec<f64>> {
        grid.nodes().iter().map(|&s| self.psi.omega(s)).collect()
    }
}

fn check_provenance(solution: &TwoBodySolution, spec: &WeightSpec) -> Result<()> {
    let close = |a: f64, b: f64| (a - b).abs() <= 1e-12 * a.abs().max(b.abs());
    let ok = match &spec.mu_model {
        MuModel::Unit => true,
        MuModel::Asymptotic { c0_squared } => close(*c0_squared, solution.c0_squared),
        MuModel::Numeric { fit_a, fit_b, .. } => {
            close(*fit_a, solution.slope_fit.coefficient) && close(*fit_b, solution.slope_fit.z2_coefficient)
        }
    };
    if ok {
        Ok(())
    } else {
        Err(invalid("weight spec was not built from this two-body solution"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Channel {
    Plus,
    Minus,
}

/// Shared assembly data of the chain operators.
struct ChainNodes {
    h: Vec<f64>,
    c: f64,
    panels: PanelGalerkin,
}

impl ChainNodes {
    fn new(chain: &ChainContext, grid: &RadialGrid) -> Result<Self> {
        let h = log_weighting(&chain.spec, grid)?;
        let omega = chain.omega_at(grid)?;
        let panels = PanelGalerkin::new(grid, &h, Some(&omega))?;
        Ok(Self {
            h,
            c: chain.c0_squared / 6.0,
            panels,
        })
    }

    fn assemble(&self, region: Region, kernel: impl Fn(&panels::Point, &panels::Point) -> f64) -> Matrix {
        self.panels.assemble(&self.h, region, kernel)
    }

    /// `P(s_i) / (s_i^2 + s_j^2) g g` in weighted form, without the `-4 pi`.
    fn pair_kernel(&self) -> Matrix {
        let c = self.c;
        self.assemble(Region::Full, |x, y| (c + x.omega) * share(x.ln_s, y.ln_s))
    }
}

fn swap_blocks(blocks: Vec<Option<Matrix>>) -> Vec<Option<Matrix>> {
    let mut it = blocks.into_iter();
    let (b11, b12, b21, b22) = (it.next().unwrap(), it.next().unwrap(), it.next().unwrap(), it.next().unwrap());
    vec![b22, b21, b12, b11]
}

/// The channel operators. The minus channel is the block permutation of the plus channel.
pub fn t_pm_matrix(chain: &ChainContext, grid: &RadialGrid, channel: Channel) -> Result<BlockOperator> {
    let nodes = ChainNodes::new(chain, grid)?;
    let k21 = &nodes.pair_kernel() * (-4.0 * PI);
    let k12 = k21.transpose().to_owned();
    let k11 = &k12 + &k21;
    let blocks = vec![Some(k11), Some(k12), Some(k21), None];
    Ok(match channel {
        Channel::Plus => BlockOperator::new(OperatorLabel::Tplus, grid, nodes.h, blocks),
        Channel::Minus => BlockOperator::new(OperatorLabel::Tminus, grid, nodes.h, swap_blocks(blocks)),
    })
}

/// The remainder kernels and the finite-rank part.
#[derive(Debug, Clone)]
pub struct Remainders {
    pub b1: BlockOperator,
    pub b2: BlockOperator,
    pub b3: BlockOperator,
    pub s: BlockOperator,
}

pub fn remainder_ops(chain: &ChainContext, grid: &RadialGrid) -> Result<Remainders> {
    let nodes = ChainNodes::new(chain, grid)?;
    let c = nodes.c;
    let b1 = nodes.assemble(Region::Upper, |x, y| (c + x.omega) * share(x.ln_s, y.ln_s));
    let b2 = nodes.assemble(Region::Lower, |x, y| -(c + x.omega) * share(y.ln_s, x.ln_s));
    let b3 = nodes.assemble(Region::Upper, |x, _| x.omega);
    let s = finite_rank_part(&nodes);
    let h = nodes.h;
    Ok(Remainders {
        b1: BlockOperator::new(OperatorLabel::B1, grid, h.clone(), vec![Some(b1)]),
        b2: BlockOperator::new(OperatorLabel::B2, grid, h.clone(), vec![Some(b2)]),
        b3: BlockOperator::new(OperatorLabel::B3, grid, h.clone(), vec![Some(b3)]),
        s: BlockOperator::new(OperatorLabel::S, grid, h, s),
    })
}

/// Blocks of the rank-limited part, with separable kernels built from `1` and `omega`.
fn finite_rank_part(nodes: &ChainNodes) -> Vec<Option<Matrix>> {
    let c = nodes.c;
    let f = -4.0 * PI;
    let s11 = nodes.assemble(Region::Full, |x, y| f * (c + x.omega + y.omega));
    let s12 = nodes.assemble(Region::Full, |_, y| f * y.omega);
    let s21 = s12.transpose().to_owned();
    vec![Some(s11), Some(s12), Some(s21), None]
}

/// `[[B + B^T, B^T], [B, 0]]`, the pattern in which a lower-triangle kernel enters the
/// plus channel.
pub fn embed_remainder(b: &Matrix) -> Matrix {
    let n = b.nrows();
    let mut m = Matrix::zeros(2 * n, 2 * n);
    for i in 0..n {
        for j in 0..n {
            m[(i, j)] = b[(i, j)] + b[(j, i)];
            m[(i, n + j)] = b[(j, i)];
            m[(n + i, j)] = b[(i, j)];
        }
    }
    m
}

/// One row of the counting comparison at threshold `a`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CountingRow {
    pub a: f64,
    pub tplus: usize,
    pub limit: usize,
    /// Limit operator counted at `a (1 + eps)` and `a (1 - eps)`.
    pub limit_tight: usize,
    pub limit_loose: usize,
    pub finite_rank_plus: usize,
    pub finite_rank_minus: usize,
    pub remainder_plus: usize,
    pub remainder_minus: usize,
    pub lower_bound: i64,
    pub upper_bound: usize,
    pub discrepancy: usize,
    pub discrepancy_bound: usize,
    pub holds: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ComparisonReport {
    pub z: LogScalar,
    pub r_eps: f64,
    pub n: usize,
    pub double_log: f64,
    pub coupling: f64,
    pub tplus_eigenvalues: Vec<f64>,
    pub limit_eigenvalues: Vec<f64>,
    pub remainder_hs_norms: [f64; 3],
    pub finite_rank_singular_values: Vec<f64>,
    pub finite_rank: usize,
    /// Operator norm of `T+ - S + coupling * scriptT`.
    pub residual_norm: f64,
    /// `max_k |lambda_k(T+ - S) - lambda_k(-coupling scriptT)|`, bounded by `residual_norm`.
    pub weyl_deviation: f64,
    pub relative_eps: f64,
    pub counting: Vec<CountingRow>,
}

/// Numerical rank: singular values above `rel_tol * sigma_1`.
pub fn numerical_rank(sigma: &[f64], rel_tol: f64) -> usize {
    match sigma.first() {
        Some(&top) if top > 0.0 => sigma.iter().filter(|&&s| s > rel_tol * top).count(),
        _ => 0,
    }
}

pub const DEFAULT_RELATIVE_EPS: f64 = 0.1;
pub const FINITE_RANK_TOL: f64 = 1e-10;

/// Compares the plus channel against the limit operator `-(2 pi c0^2/3) scriptT`.
///
/// With `eta = eps a` the counting sandwich reads
/// `n(L, a(1+eps)) - n(-S, eta/2) - n(-R, eta/2) <= n(T+, a) <= n(L, a(1-eps)) + n(S, eta/2) + n(R, eta/2)`
/// where `R = T+ - S - L` collects the remainder kernels.
pub fn assemble_comparison(chain: &ChainContext, grid: &RadialGrid, thresholds: &[f64], relative_eps: f64) -> Result<ComparisonReport> {
    if !(relative_eps > 0.0 && relative_eps < 1.0) {
        return Err(invalid("relative_eps must lie in (0, 1)"));
    }
    let tplus = t_pm_matrix(chain, grid, Channel::Plus)?.full_matrix();
    let rem = remainder_ops(chain, grid)?;
    let step = script_t_matrix(&chain.spec, grid)?;
    let kappa = chain.coupling();
    let limit = &step.full_matrix() * (-kappa);
    let s_full = rem.s.full_matrix();

    let tplus_eigenvalues = eigenvalues_descending(&tplus)?;
    let limit_eigenvalues = eigenvalues_descending(&limit)?;
    let s_eigs = eigenvalues_descending(&s_full)?;
    let sigma_s = singular_values(&s_full)?;
    let finite_rank = numerical_rank(&sigma_s, FINITE_RANK_TOL);

    let mut r = &tplus - &s_full;
    let shifted_eigs = eigenvalues_descending(&r)?;
    r -= &limit;
    let r = Matrix::from_fn(r.nrows(), r.ncols(), |i, j| 0.5 * (r[(i, j)] + r[(j, i)]));
    let r_eigs = eigenvalues_descending(&r)?;
    let residual_norm = r_eigs.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let weyl_deviation = shifted_eigs
        .iter()
        .zip(&limit_eigenvalues)
        .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));

    let neg = |v: &[f64]| v.iter().map(|x| -x).collect::<Vec<_>>();
    let (s_neg, r_neg) = (neg(&s_eigs), neg(&r_eigs));
    let mut counting = Vec::with_capacity(thresholds.len());
    for &a in thresholds {
        let eta = relative_eps * a;
        let tp = count_above(&tplus_eigenvalues, a)?;
        let lim = count_above(&limit_eigenvalues, a)?;
        let tight = count_above(&limit_eigenvalues, a + eta)?;
        let loose = count_above(&limit_eigenvalues, a - eta)?;
        let frp = count_above(&s_eigs, 0.5 * eta)?;
        let frm = count_above(&s_neg, 0.5 * eta)?;
        let rp = count_above(&r_eigs, 0.5 * eta)?;
        let rm = count_above(&r_neg, 0.5 * eta)?;
        let lower = tight as i64 - frm as i64 - rm as i64;
        let upper = loose + frp + rp;
        let discrepancy = tp.abs_diff(lim);
        let discrepancy_bound = finite_rank + (loose - tight) + rp.max(rm);
        counting.push(CountingRow {
            a,
            tplus: tp,
            limit: lim,
            limit_tight: tight,
            limit_loose: loose,
            finite_rank_plus: frp,
            finite_rank_minus: frm,
            remainder_plus: rp,
            remainder_minus: rm,
            lower_bound: lower,
            upper_bound: upper,
            discrepancy,
            discrepancy_bound,
            holds: lower <= tp as i64 && tp <= upper && discrepancy <= discrepancy_bound,
        });
    }

    Ok(ComparisonReport {
        z: chain.spec.z,
        r_eps: chain.spec.r_eps,
        n: grid.len(),
        double_log: double_log_abscissa(chain.spec.ln_z()),
        coupling: kappa,
        tplus_eigenvalues,
        limit_eigenvalues,
        remainder_hs_norms: [rem.b1.hs_norm(), rem.b2.hs_norm(), rem.b3.hs_norm()],
        finite_rank_singular_values: sigma_s.iter().take(6).copied().collect(),
        finite_rank,
        residual_norm,
        weyl_deviation,
        relative_eps,
        counting,
    })
}

/// Right side of the Hilbert-Schmidt bound on the first remainder,
/// `(delta^2 alpha^4 pi / 16) / |ln 2 r_eps|`.
pub fn b1_hs_bound(delta: f64, alpha: f64, r_eps: f64) -> f64 {
    delta * delta * alpha.powi(4) * PI / 16.0 / (2.0 * r_eps).ln().abs()
}

/// Eigenvalues with singular counts at the given thresholds.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SpectrumReport {
    pub label: OperatorLabel,
    pub z: LogScalar,
    pub r_eps: f64,
    pub n: usize,
    pub eigenvalues: Vec<f64>,
    pub counting: Vec<(f64, usize)>,
    pub singular_counting: Vec<(f64, usize)>,
    pub double_log: f64,
    pub fit: Option<crate::counting::DoubleLogFit>,
}

impl SpectrumReport {
    pub fn new(op: &BlockOperator, spec: &WeightSpec, thresholds: &[f64]) -> Result<Self> {
        let eigenvalues = op.eigenvalues()?;
        let abs: Vec<f64> = eigenvalues.iter().map(|v| v.abs()).collect();
        let mut counting = Vec::new();
        let mut singular_counting = Vec::new();
        for &a in thresholds {
            counting.push((a, count_above(&eigenvalues, a)?));
            singular_counting.push((a, count_above(&abs, a)?));
        }
        Ok(Self {
            label: op.label,
            z: spec.z,
            r_eps: spec.r_eps,
            n: op.n(),
            eigenvalues,
            counting,
            singular_counting,
            double_log: spec.double_log(),
            fit: None,
        })
    }
}

/// Largest singular value of the Nystrom matrix of `1/(x^2 + y^2)` on
/// `L^2((0,1); x dx)` with `n` nodes.
pub fn d_norm_check(n: usize) -> Result<f64> {
    Ok(d_operator(n)?.eigenvalues()?[0])
}

pub const D_NORM_BOUND: f64 = PI / 4.0;
pub const D_NORM_TOLERANCE: f64 = 1e-3;

pub fn d_operator(n: usize) -> Result<BlockOperator> {
    if n < 16 {
        return Err(invalid(format!("D-norm check needs n >= 16, got {n}")));
    }
    let grid = RadialGrid::uniform(0.0, 1.0, n, 4)?;
    let x = grid.nodes();
    let h: Vec<f64> = grid.ln_weights().iter().map(|l| 0.5 * l).collect();
    let m = weighted(&h, |i, j| 1.0 / (x[i] * x[i] + x[j] * x[j]));
    Ok(BlockOperator::new(OperatorLabel::D, &grid, h, vec![Some(m)]))
}

/// Kernel of `W D W^{-1}` on `L^2((0, inf); dt)` with `[W f](t) = e^{-t} f(e^{-t})`.
pub fn transformed_d_kernel(t: f64, tp: f64) -> f64 {
    let (x, y) = ((-t).exp(), (-tp).exp());
    x * y / (x * x + y * y)
}

/// `||W f||` for `f` given as a function on `(0, 1)`, by quadrature on `t in [0, t_max]`.
pub fn transformed_norm<F: Fn(f64) -> f64>(f: F, t_max: f64, panels: usize) -> Result<f64> {
    let v = crate::numerics::quadrature::integrate(
        |t| {
            let x = (-t).exp();
            (x * f(x)).powi(2)
        },
        0.0,
        t_max,
        panels,
        12,
    )?;
    Ok(v.sqrt())
}

/// Step-operator spectrum for a single `z`; convenient for scans.
pub fn script_t_spectrum(spec: &WeightSpec, n: usize) -> Result<Vec<f64>> {
    let grid = three_body_grid(spec, n, DEFAULT_POINTS_PER_PANEL)?;
    script_t_matrix(spec, &grid)?.eigenvalues()
}

/// Singular count of the assembled operator.
pub fn operator_singular_count(op: &BlockOperator, a: f64) -> Result<usize> {
    singular_count(&op.full_matrix(), a)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit_spec() -> WeightSpec {
        WeightSpec::unit(1.0, LogScalar::from_f64(1e-3)).unwrap()
    }

    #[test]
    fn label_round_trip() {
        for l in [
            OperatorLabel::Tplus,
            OperatorLabel::Tminus,
            OperatorLabel::ScriptT,
            OperatorLabel::ScriptTPrime,
            OperatorLabel::B1,
            OperatorLabel::B2,
            OperatorLabel::B3,
            OperatorLabel::S,
            OperatorLabel::D,
        ] {
            assert_eq!(l.as_str().parse::<OperatorLabel>().unwrap(), l);
            let js = serde_json::to_string(&l).unwrap();
            assert_eq!(js, format!("\"{}\"", l.as_str()));
        }
        assert!("T+".parse::<OperatorLabel>().is_err());
    }

    #[test]
    fn unit_weight_step_operator() {
        let spec = unit_spec();
        let grid = RadialGrid::uniform(0.0, 1.0, 256, 4).unwrap();
        let op = script_t_matrix(&spec, &grid).unwrap();
        assert!(op.block(0, 0).is_none() && op.block(1, 1).is_none());
        assert!(op.symmetry_defect() < 1e-15);
        let e = op.eigenvalues().unwrap();
        let dense = op.eigenvalues_dense().unwrap();
        // sqrt(x) from the measure is not polynomial on the first panel, which limits
        // the projection to about 2e-8 here
        for k in 0..3 {
            let exact = 1.0 / (PI * (2 * k + 1) as f64);
            assert!((e[k] - exact).abs() < 1e-7, "{k}: {}", e[k]);
            assert!((e[k] - dense[k]).abs() < 1e-12);
            assert!((e[e.len() - 1 - k] + e[k]).abs() < 1e-12);
        }
    }

    #[test]
    fn rejects_grid_beyond_cutoff() {
        let spec = WeightSpec::unit(0.5, LogScalar::from_f64(1e-3)).unwrap();
        let grid = RadialGrid::uniform(0.0, 1.0, 32, 4).unwrap();
        assert!(matches!(script_t_matrix(&spec, &grid), Err(Error::InvalidArgument(_))));
    }

    #[test]
    fn prime_form_is_similar() {
        let spec = unit_spec();
        let grid = RadialGrid::uniform(0.0, 1.0, 64, 4).unwrap();
        let t = script_t_matrix(&spec, &grid).unwrap();
        let tp = script_t_prime_matrix(&spec, &grid).unwrap();
        let h = &t.log_weighting;
        let n = grid.len();
        let (a, b) = (t.full_matrix(), tp.full_matrix());
        for i in 0..2 * n {
            for j in 0..2 * n {
                let conj = (-h[i % n]).exp() * a[(i, j)] * h[j % n].exp();
                assert!((conj - b[(i, j)]).abs() < 1e-13);
            }
        }
    }

    #[test]
    fn embedding_matches_block_pattern() {
        let b = Matrix::from_fn(3, 3, |i, j| (i * 3 + j) as f64);
        let e = embed_remainder(&b);
        assert_eq!(e[(0, 1)], b[(0, 1)] + b[(1, 0)]);
        assert_eq!(e[(0, 4)], b[(1, 0)]);
        assert_eq!(e[(4, 0)], b[(1, 0)]);
        assert_eq!(e[(4, 4)], 0.0);
    }

    #[test]
    fn d_kernel_on_diagonal() {
        for t in [0.0, 0.7, 5.0, 40.0] {
            assert!((transformed_d_kernel(t, t) - 0.5).abs() < 1e-15);
            let d: f64 = 1.3;
            let sech = 1.0 / d.cosh();
            assert!((transformed_d_kernel(t, t + d) - 0.5 * sech).abs() < 1e-14);
        }
        assert!(d_norm_check(8).is_err());
    }

    #[test]
    fn numerical_rank_counts_gap() {
        assert_eq!(numerical_rank(&[2.0, 1.0, 1e-3, 1e-12], 1e-10), 3);
        assert_eq!(numerical_rank(&[], 1e-10), 0);
    }
}
