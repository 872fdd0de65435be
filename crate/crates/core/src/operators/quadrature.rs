//! Gauss–Legendre quadrature and composite rules over breakpoint panels.

use crate::error::{Error, Result};

/// A Gauss–Legendre rule on the reference interval [-1, 1].
///
/// A rule with q nodes integrates polynomials up to degree 2q−1 exactly.
#[derive(Debug, Clone)]
pub struct QuadratureRule {
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl QuadratureRule {
    /// Computes the q-point Gauss–Legendre rule via Newton iteration on the
    /// Legendre polynomial P_q.
    pub fn gauss_legendre(q: usize) -> Result<Self> {
        if q == 0 {
            return Err(Error::InvalidParameter {
                name: "quadrature order",
                reason: "rule needs at least one node".into(),
            });
        }
        let mut nodes = vec![0.0; q];
        let mut weights = vec![0.0; q];
        let n = q as f64;
        // exploit symmetry: compute nodes in (0, 1], mirror to negatives
        for i in 0..q.div_ceil(2) {
            // Tricomi initial guess for the i-th root (descending order)
            let mut x =
                (std::f64::consts::PI * (i as f64 + 0.75) / (n + 0.5)).cos();
            for _ in 0..100 {
                let (p, d) = legendre_with_derivative(q, x);
                let dx = p / d;
                x -= dx;
                if dx.abs() < 1e-15 {
                    break;
                }
            }
            let (_, dp) = legendre_with_derivative(q, x);
            let w = 2.0 / ((1.0 - x * x) * dp * dp);
            nodes[i] = -x;
            weights[i] = w;
            nodes[q - 1 - i] = x;
            weights[q - 1 - i] = w;
        }
        if q % 2 == 1 {
            nodes[q / 2] = 0.0;
            let (_, d) = legendre_with_derivative(q, 0.0);
            weights[q / 2] = 2.0 / (d * d);
        }
        Ok(Self { nodes, weights })
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Highest polynomial degree integrated exactly.
    pub fn exactness_degree(&self) -> usize {
        2 * self.nodes.len() - 1
    }

    /// Nodes and weights mapped from [-1, 1] to [a, b].
    pub fn mapped(&self, a: f64, b: f64) -> impl Iterator<Item = (f64, f64)> + '_ {
        let mid = 0.5 * (a + b);
        let half = 0.5 * (b - a);
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(move |(&x, &w)| (mid + half * x, half * w))
    }

    /// Integrates f over [a, b] with a single panel.
    pub fn integrate(&self, a: f64, b: f64, f: impl Fn(f64) -> f64) -> f64 {
        self.mapped(a, b).map(|(x, w)| w * f(x)).sum()
    }
}

/// Evaluates (P_n(x), P_n'(x)) by the three-term recurrence.
fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

/// Builds the ascending list of panel edges for integrating over `(a, b)`
/// split at the given breakpoints (those falling strictly inside).
pub fn panels(a: f64, b: f64, breakpoints: &[f64]) -> Vec<f64> {
    let mut edges = vec![a];
    let mut pts: Vec<f64> = breakpoints
        .iter()
        .copied()
        .filter(|&p| p > a && p < b)
        .collect();
    pts.sort_by(|x, y| x.partial_cmp(y).unwrap());
    pts.dedup();
    edges.extend(pts);
    edges.push(b);
    edges
}

/// A fixed composite rule: the base rule applied on each panel. The node and
/// weight list is materialized once so that a functional built on this rule
/// is a fixed finite weighted sum of point evaluations.
#[derive(Debug, Clone)]
pub struct CompositeRule {
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl CompositeRule {
    pub fn new(a: f64, b: f64, breakpoints: &[f64], base: &QuadratureRule) -> Result<Self> {
        if !(a < b) {
            return Err(Error::InvalidParameter {
                name: "interval",
                reason: format!("need a < b, got [{a}, {b}]"),
            });
        }
        let edges = panels(a, b, breakpoints);
        let mut nodes = Vec::new();
        let mut weights = Vec::new();
        for w in edges.windows(2) {
            for (x, wt) in base.mapped(w[0], w[1]) {
                nodes.push(x);
                weights.push(wt);
            }
        }
        Ok(Self { nodes, weights })
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn points(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.nodes.iter().copied().zip(self.weights.iter().copied())
    }

    pub fn integrate(&self, f: impl Fn(f64) -> f64) -> f64 {
        self.points().map(|(x, w)| w * f(x)).sum()
    }
}
