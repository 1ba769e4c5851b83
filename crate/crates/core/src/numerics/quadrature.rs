use crate::error::{invalid, Result};

/// Gauss-Legendre rule with `n` points on `[a, b]`, nodes ascending.
///
/// Nodes are roots of `P_n` found by Newton iteration from the Chebyshev
/// guesses; weights are `2 / ((1 - x^2) P_n'(x)^2)` scaled to the interval.
pub fn gauss_legendre(n: usize, a: f64, b: f64) -> Result<(Vec<f64>, Vec<f64>)> {
    if n == 0 {
        return Err(invalid("gauss_legendre needs at least one node"));
    }
    if !(a < b) || !a.is_finite() || !b.is_finite() {
        return Err(invalid(format!("gauss_legendre interval [{a}, {b}] is empty")));
    }
    let (x, w) = reference_rule(n);
    let half = 0.5 * (b - a);
    let mid = 0.5 * (a + b);
    let nodes = x.iter().map(|&t| mid + half * t).collect();
    let weights = w.iter().map(|&v| half * v).collect();
    Ok((nodes, weights))
}

/// Reference rule on `[-1, 1]`.
pub(crate) fn reference_rule(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    let m = n.div_ceil(2);
    let nf = n as f64;
    for i in 0..m {
        let mut t = (std::f64::consts::PI * (i as f64 + 0.75) / (nf + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre_with_derivative(n, t);
            dp = d;
            let step = p / d;
            t -= step;
            if step.abs() <= 1e-16 * t.abs().max(1.0) {
                break;
            }
        }
        let (_, d) = legendre_with_derivative(n, t);
        dp = if d != 0.0 { d } else { dp };
        let wi = 2.0 / ((1.0 - t * t) * dp * dp);
        x[i] = -t;
        x[n - 1 - i] = t;
        w[i] = wi;
        w[n - 1 - i] = wi;
    }
    if n % 2 == 1 {
        x[n / 2] = 0.0;
    }
    (x, w)
}

/// `(P_n(t), P_n'(t))` by the three-term recurrence.
fn legendre_with_derivative(n: usize, t: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = t;
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * t * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let nf = n as f64;
    let d = nf * (t * p1 - p0) / (t * t - 1.0);
    (p1, d)
}

/// Composite rule: `points` Gauss nodes on each panel between consecutive edges.
pub fn composite_gauss(edges: &[f64], points: usize) -> Result<(Vec<f64>, Vec<f64>)> {
    if edges.len() < 2 {
        return Err(invalid("composite rule needs at least one panel"));
    }
    let mut nodes = Vec::with_capacity((edges.len() - 1) * points);
    let mut weights = Vec::with_capacity(nodes.capacity());
    for pair in edges.windows(2) {
        let (x, w) = gauss_legendre(points, pair[0], pair[1])?;
        nodes.extend(x);
        weights.extend(w);
    }
    Ok((nodes, weights))
}

/// Integrates `f` on `[a, b]` with `panels` equal panels of `points` nodes.
pub fn integrate<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, panels: usize, points: usize) -> Result<f64> {
    if panels == 0 {
        return Err(invalid("integrate needs at least one panel"));
    }
    let h = (b - a) / panels as f64;
    let (x, w) = reference_rule(points);
    let mut total = 0.0;
    for p in 0..panels {
        let lo = a + h * p as f64;
        let mid = lo + 0.5 * h;
        let mut acc = 0.0;
        for (t, wt) in x.iter().zip(&w) {
            acc += wt * f(mid + 0.5 * h * t);
        }
        total += 0.5 * h * acc;
    }
    Ok(total)
}
