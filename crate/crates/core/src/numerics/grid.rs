use serde::{Deserialize, Serialize};

use super::quadrature::reference_rule;
use crate::error::{invalid, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GridScheme {
    /// Composite Gauss-Legendre in `x`.
    UniformCompositeGauss,
    /// Composite Gauss-Legendre in `u = ln x`.
    LogCompositeGauss,
}

/// Quadrature grid for the measure `x dx` on a radial interval.
///
/// `weights[i]` integrates against `x dx`, so `sum_i weights[i] f(nodes[i])`
/// approximates `int f(x) x dx`. Log grids also carry `u_nodes = ln(nodes)`
/// and all grids carry `ln_weights`, which stay exact when the weights
/// themselves are subnormal.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RadialGrid {
    scheme: GridScheme,
    nodes: Vec<f64>,
    weights: Vec<f64>,
    ln_weights: Vec<f64>,
    u_nodes: Option<Vec<f64>>,
    /// Panel boundaries in the scheme's own coordinate (`x` or `u`).
    panel_edges: Vec<f64>,
    points_per_panel: usize,
}

/// Smallest log-coordinate accepted; keeps every node a positive double.
pub const MIN_LOG_NODE: f64 = -700.0;

impl RadialGrid {
    /// Equal panels on `[a, b]` with `points_per_panel` Gauss nodes each.
    /// The node count is `n` rounded up to a whole number of panels.
    pub fn uniform(a: f64, b: f64, n: usize, points_per_panel: usize) -> Result<Self> {
        if !(0.0 <= a && a < b && b.is_finite()) {
            return Err(invalid(format!("uniform grid needs 0 <= a < b, got [{a}, {b}]")));
        }
        let (panels, p) = panel_layout(n, points_per_panel)?;
        let edges = equal_edges(a, b, panels);
        let (x, w) = reference_rule(p);
        let mut nodes = Vec::with_capacity(panels * p);
        let mut weights = Vec::with_capacity(panels * p);
        for pair in edges.windows(2) {
            let half = 0.5 * (pair[1] - pair[0]);
            let mid = 0.5 * (pair[1] + pair[0]);
            for (t, wt) in x.iter().zip(&w) {
                let node = mid + half * t;
                nodes.push(node);
                weights.push(half * wt * node);
            }
        }
        let ln_weights = weights.iter().map(|w: &f64| w.ln()).collect();
        Ok(Self {
            scheme: GridScheme::UniformCompositeGauss,
            nodes,
            weights,
            ln_weights,
            u_nodes: None,
            panel_edges: edges,
            points_per_panel: p,
        })
    }

    /// Equal panels in `u = ln x` between `ln_min` and `ln_max`.
    pub fn logarithmic(ln_min: f64, ln_max: f64, n: usize, points_per_panel: usize) -> Result<Self> {
        if !(ln_min < ln_max && ln_max.is_finite()) {
            return Err(invalid(format!(
                "log grid needs ln_min < ln_max, got [{ln_min}, {ln_max}]"
            )));
        }
        if ln_min < MIN_LOG_NODE {
            return Err(invalid(format!(
                "log grid lower end e^{ln_min} is below the representable floor e^{MIN_LOG_NODE}"
            )));
        }
        let (panels, p) = panel_layout(n, points_per_panel)?;
        let edges = equal_edges(ln_min, ln_max, panels);
        let (x, w) = reference_rule(p);
        let mut u_nodes = Vec::with_capacity(panels * p);
        let mut ln_weights = Vec::with_capacity(panels * p);
        for pair in edges.windows(2) {
            let half = 0.5 * (pair[1] - pair[0]);
            let mid = 0.5 * (pair[1] + pair[0]);
            for (t, wt) in x.iter().zip(&w) {
                let u = mid + half * t;
                u_nodes.push(u);
                // x dx = x^2 du
                ln_weights.push(2.0 * u + (half * wt).ln());
            }
        }
        let nodes = u_nodes.iter().map(|u: &f64| u.exp()).collect();
        let weights = ln_weights.iter().map(|l: &f64| l.exp()).collect();
        Ok(Self {
            scheme: GridScheme::LogCompositeGauss,
            nodes,
            weights,
            ln_weights,
            u_nodes: Some(u_nodes),
            panel_edges: edges,
            points_per_panel: p,
        })
    }

    pub fn scheme(&self) -> GridScheme {
        self.scheme
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn ln_weights(&self) -> &[f64] {
        &self.ln_weights
    }

    pub fn u_nodes(&self) -> Option<&[f64]> {
        self.u_nodes.as_deref()
    }

    /// `ln(node_i)`, exact for log grids.
    pub fn ln_node(&self, i: usize) -> f64 {
        match &self.u_nodes {
            Some(u) => u[i],
            None => self.nodes[i].ln(),
        }
    }

    pub fn panel_edges(&self) -> &[f64] {
        &self.panel_edges
    }

    pub fn points_per_panel(&self) -> usize {
        self.points_per_panel
    }

    pub fn panel_count(&self) -> usize {
        self.panel_edges.len() - 1
    }

    /// Upper end of the grid's interval.
    pub fn upper(&self) -> f64 {
        let last = *self.panel_edges.last().expect("grid has panels");
        match self.scheme {
            GridScheme::UniformCompositeGauss => last,
            GridScheme::LogCompositeGauss => last.exp(),
        }
    }

    /// `sum_i w_i f(x_i)`, the grid's approximation of `int f(x) x dx`.
    pub fn integrate<F: Fn(f64) -> f64>(&self, f: F) -> f64 {
        self.nodes.iter().zip(&self.weights).map(|(&x, &w)| w * f(x)).sum()
    }

    /// Checks the structural invariants; used by tests and after deserialization.
    pub fn validate(&self) -> Result<()> {
        let n = self.nodes.len();
        if n == 0 || self.weights.len() != n || self.ln_weights.len() != n {
            return Err(invalid("grid arrays are empty or have mismatched lengths"));
        }
        if self.nodes.iter().any(|&x| !(x > 0.0)) {
            return Err(invalid("grid nodes must be positive"));
        }
        if self.nodes.windows(2).any(|p| !(p[0] < p[1])) {
            return Err(invalid("grid nodes must be strictly increasing"));
        }
        if self.ln_weights.iter().any(|l| !l.is_finite()) {
            return Err(invalid("grid weights must be positive"));
        }
        if let Some(u) = &self.u_nodes {
            if u.len() != n {
                return Err(invalid("u_nodes length mismatch"));
            }
            for (ui, xi) in u.iter().zip(&self.nodes) {
                if (ui.exp() - xi).abs() > 4.0 * f64::EPSILON * xi {
                    return Err(invalid("u_nodes do not match ln(nodes)"));
                }
            }
        }
        Ok(())
    }
}

fn panel_layout(n: usize, points_per_panel: usize) -> Result<(usize, usize)> {
    if n == 0 || points_per_panel == 0 {
        return Err(invalid("grid needs n >= 1 and points_per_panel >= 1"));
    }
    let panels = n.div_ceil(points_per_panel);
    Ok((panels, points_per_panel))
}

fn equal_edges(a: f64, b: f64, panels: usize) -> Vec<f64> {
    let h = (b - a) / panels as f64;
    let mut edges: Vec<f64> = (0..=panels).map(|k| a + h * k as f64).collect();
    edges[panels] = b;
    edges
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn uniform_grid_invariants() {
        let g = RadialGrid::uniform(0.0, 2.0, 40, 4).unwrap();
        g.validate().unwrap();
        assert_eq!(g.len(), 40);
        // f(x) = x against x dx on [0, 2] -> 8/3
        assert!((g.integrate(|x| x) - 8.0 / 3.0).abs() < 1e-14);
        assert!((g.upper() - 2.0).abs() < 1e-15);
    }

    #[test]
    fn log_grid_invariants() {
        let g = RadialGrid::logarithmic((1e-6f64).ln(), (0.2f64).ln(), 300, 6).unwrap();
        g.validate().unwrap();
        let u = g.u_nodes().unwrap();
        for (ui, xi) in u.iter().zip(g.nodes()) {
            assert!((ui - xi.ln()).abs() < 1e-13);
        }
        let exact = (0.2f64.powi(3) - 1e-18) / 3.0;
        assert!(((g.integrate(|x| x) - exact) / exact).abs() < 1e-10);
    }

    #[test]
    fn composite_convergence_order() {
        // f = e^{-x} on [0,1] with measure x dx; exact 1 - 2/e.
        let exact = 1.0 - 2.0 / std::f64::consts::E;
        let err = |panels: usize| {
            let g = RadialGrid::uniform(0.0, 1.0, panels, 1).unwrap();
            (g.integrate(|x| (-x).exp()) - exact).abs()
        };
        let (e1, e2, e3) = (err(8), err(16), err(32));
        // midpoint rule: second order
        assert!((e1 / e2).log2() > 1.9 && (e2 / e3).log2() > 1.9);
        let err2 = |panels: usize| {
            let g = RadialGrid::uniform(0.0, 1.0, 2 * panels, 2).unwrap();
            (g.integrate(|x| (-x).exp()) - exact).abs()
        };
        let (f1, f2) = (err2(2), err2(4));
        assert!((f1 / f2).log2() > 3.8);
    }

    #[test]
    fn rejects_bad_bounds() {
        assert!(RadialGrid::uniform(1.0, 1.0, 10, 2).is_err());
        assert!(RadialGrid::uniform(-1.0, 1.0, 10, 2).is_err());
        assert!(RadialGrid::logarithmic(-800.0, 0.0, 10, 2).is_err());
        assert!(RadialGrid::logarithmic(0.0, -1.0, 10, 2).is_err());
    }
}
