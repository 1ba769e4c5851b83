//! Galerkin assembly on the panels of a composite Gauss grid.
//!
//! On each panel the functions `l_i(v) / sqrt(w_i)`, with `l_i` the Lagrange basis on
//! the panel's Gauss nodes, are orthonormal in `L^2(dv)`. An operator with kernel
//! `K(s, t) g(s) g(t)` on `L^2(x dx)` becomes the kernel `phi(v) K phi(v')` on `L^2(dv)`,
//! `phi = g sqrt(m)` for the measure density `m`, and its matrix in this basis is
//! `(w_i w_j)^{-1/2} int int l_i(v) phi(v) K(v, v') l_j(v') phi(v') dv dv'`.
//!
//! A diagonal panel is split at `v = v'`, where the step functions jump, and each
//! triangle gets its own product rule; other panel pairs use a tensor Gauss rule.
//! All operators share the same quadrature points, so kernel identities that hold
//! pointwise hold for the assembled matrices too, and separable kernels give
//! matrices of the same rank.

use crate::error::{invalid, Result};
use crate::numerics::eigen::Matrix;
use crate::numerics::grid::{GridScheme, RadialGrid};
use crate::numerics::quadrature::gauss_legendre;

/// Points per axis of the triangle rule.
const TRIANGLE_POINTS: usize = 16;
/// Points per panel of the tensor rule between distinct panels.
const LINE_POINTS: usize = 16;

/// Support of a kernel, with `s` the row coordinate.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum Region {
    /// `s <= t`.
    Upper,
    /// `s >= t`.
    Lower,
    Full,
}

/// Data at one quadrature point: `ln s`, the interpolated `omega`, and the scaled
/// basis values `l_i(v) (phi(v)/phi_i) / w_i`.
#[derive(Debug, Clone)]
pub(crate) struct Point {
    pub ln_s: f64,
    pub omega: f64,
    basis: Vec<f64>,
}

struct PanelRule {
    start: usize,
    /// `(weight, lower point, upper point)` covering the triangle `v <= v'`.
    pairs: Vec<(f64, usize, usize)>,
    points: Vec<Point>,
    /// Tensor-rule points and their weights times the basis values, `LINE_POINTS x p`.
    line: Vec<Point>,
    line_basis: Vec<f64>,
}

pub(crate) struct PanelGalerkin {
    panels: Vec<PanelRule>,
    p: usize,
    n: usize,
}

fn lagrange(nodes: &[f64], k: usize, x: f64) -> f64 {
    nodes
        .iter()
        .enumerate()
        .filter(|&(m, _)| m != k)
        .map(|(_, &xm)| (x - xm) / (nodes[k] - xm))
        .product()
}

impl PanelGalerkin {
    /// `h` is the log weighting `ln g + ln(W)/2`; `omega` (if any) is sampled at the nodes.
    pub fn new(grid: &RadialGrid, h: &[f64], omega: Option<&[f64]>) -> Result<Self> {
        let p = grid.points_per_panel();
        let log = grid.scheme() == GridScheme::LogCompositeGauss;
        let coord: Vec<f64> = match grid.u_nodes() {
            Some(u) => u.to_vec(),
            None => grid.nodes().to_vec(),
        };
        let ln_g: Vec<f64> = h.iter().zip(grid.ln_weights()).map(|(h, w)| h - 0.5 * w).collect();
        // ln sqrt(m) for the x dx measure in the grid coordinate
        let half_ln_m = |v: f64| if log { v } else { 0.5 * v.ln() };
        let ln_s = |v: f64| if log { v } else { v.ln() };
        let (tq, wq) = gauss_legendre(TRIANGLE_POINTS, 0.0, 1.0)?;
        let (lq, lw) = gauss_legendre(LINE_POINTS, 0.0, 1.0)?;

        let mut panels = Vec::with_capacity(grid.panel_count());
        for (k, pair) in grid.panel_edges().windows(2).enumerate() {
            let (a, b) = (pair[0], pair[1]);
            let start = k * p;
            let nodes = &coord[start..start + p];
            let (gx, gw) = gauss_legendre(p, a, b)?;
            if gx.iter().zip(nodes).any(|(x, y)| (x - y).abs() > 1e-9 * (b - a)) {
                return Err(invalid("grid nodes do not match its panel rule"));
            }
            let make_point = |v: f64| {
                let ell: Vec<f64> = (0..p).map(|i| lagrange(nodes, i, v)).collect();
                let interp = |f: &[f64]| ell.iter().zip(f).map(|(l, y)| l * y).sum::<f64>();
                let lg = interp(&ln_g[start..start + p]);
                let omega = omega.map_or(0.0, |om| interp(&om[start..start + p]));
                let basis = (0..p)
                    .map(|i| {
                        let ratio = (lg - ln_g[start + i] + half_ln_m(v) - half_ln_m(nodes[i])).exp();
                        ell[i] * ratio / gw[i]
                    })
                    .collect();
                Point {
                    ln_s: ln_s(v),
                    omega,
                    basis,
                }
            };
            // outer v' on [a, b], inner v on [a, v']
            let mut points = Vec::with_capacity(TRIANGLE_POINTS * (TRIANGLE_POINTS + 1));
            let mut pairs = Vec::with_capacity(TRIANGLE_POINTS * TRIANGLE_POINTS);
            for (&to, &wo) in tq.iter().zip(&wq) {
                let outer = a + (b - a) * to;
                let hi = points.len();
                points.push(make_point(outer));
                for (&ti, &wi) in tq.iter().zip(&wq) {
                    let inner = a + (outer - a) * ti;
                    pairs.push(((b - a) * wo * (outer - a) * wi, points.len(), hi));
                    points.push(make_point(inner));
                }
            }
            let line: Vec<Point> = lq.iter().map(|&t| make_point(a + (b - a) * t)).collect();
            let line_basis = line
                .iter()
                .zip(&lw)
                .flat_map(|(pt, &w)| pt.basis.iter().map(move |v| (b - a) * w * v))
                .collect();
            panels.push(PanelRule {
                start,
                pairs,
                points,
                line,
                line_basis,
            });
        }
        Ok(Self {
            panels,
            p,
            n: grid.len(),
        })
    }

    /// Galerkin matrix of `kernel` (row point first) restricted to `region`, in the
    /// symmetric weighted form `e^{h_i + h_j} c_ij`.
    pub fn assemble(&self, h: &[f64], region: Region, kernel: impl Fn(&Point, &Point) -> f64) -> Matrix {
        let p = self.p;
        let mut m = Matrix::zeros(self.n, self.n);
        let mut c = vec![0.0; p * p];
        let mut kq = vec![0.0; LINE_POINTS * LINE_POINTS];
        let mut t = vec![0.0; LINE_POINTS * p];
        for (bi, row) in self.panels.iter().enumerate() {
            for (bj, col) in self.panels.iter().enumerate() {
                let active = match region {
                    Region::Full => true,
                    Region::Upper => bi <= bj,
                    Region::Lower => bi >= bj,
                };
                if !active {
                    continue;
                }
                c.iter_mut().for_each(|x| *x = 0.0);
                if bi == bj {
                    diagonal_block(&mut c, p, row, region, &kernel);
                } else {
                    for (a, x) in row.line.iter().enumerate() {
                        for (b, y) in col.line.iter().enumerate() {
                            kq[a * LINE_POINTS + b] = kernel(x, y);
                        }
                    }
                    // t = K B_col, c = B_row^T t
                    for a in 0..LINE_POINTS {
                        for j in 0..p {
                            t[a * p + j] = (0..LINE_POINTS)
                                .map(|b| kq[a * LINE_POINTS + b] * col.line_basis[b * p + j])
                                .sum();
                        }
                    }
                    for a in 0..LINE_POINTS {
                        for i in 0..p {
                            let r = row.line_basis[a * p + i];
                            for j in 0..p {
                                c[i * p + j] += r * t[a * p + j];
                            }
                        }
                    }
                }
                for i in 0..p {
                    for j in 0..p {
                        let (gi, gj) = (row.start + i, col.start + j);
                        let v = c[i * p + j];
                        if v != 0.0 {
                            m[(gi, gj)] = v * (h[gi] + h[gj]).exp();
                        }
                    }
                }
            }
        }
        m
    }
}

fn diagonal_block(c: &mut [f64], p: usize, panel: &PanelRule, region: Region, kernel: &impl Fn(&Point, &Point) -> f64) {
    for &(w, lo, hi) in &panel.pairs {
        let (x, y) = (&panel.points[lo], &panel.points[hi]);
        if region != Region::Lower {
            accumulate(c, p, w * kernel(x, y), &x.basis, &y.basis);
        }
        if region != Region::Upper {
            accumulate(c, p, w * kernel(y, x), &y.basis, &x.basis);
        }
    }
}

fn accumulate(c: &mut [f64], p: usize, k: f64, row: &[f64], col: &[f64]) {
    if k == 0.0 {
        return;
    }
    for i in 0..p {
        let r = k * row[i];
        for j in 0..p {
            c[i * p + j] += r * col[j];
        }
    }
}
