//! Deterministic integration rules against the input density.

use crate::error::{Error, Result};
use crate::gp::InputPoint;

/// Nodes and weights of the `n`-point Gauss–Legendre rule on `[−1, 1]`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        // Tricomi initial guess, then Newton on P_n
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            let p = if n == 0 { 1.0 } else if n == 1 { x } else { p1 };
            let pm1 = if n == 1 { 1.0 } else { p0 };
            dp = n as f64 * (x * p - pm1) / (x * x - 1.0);
            let dx = p / dp;
            x -= dx;
            if dx.abs() < 1e-15 {
                break;
            }
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    (nodes, weights)
}

const PANEL_ORDER: usize = 8;

/// Composite Gauss–Legendre on `[lo, hi]` with about `n_nodes` nodes
/// (rounded up to whole 8-point panels).
pub fn composite_gauss_legendre(lo: f64, hi: f64, n_nodes: usize) -> (Vec<f64>, Vec<f64>) {
    let (gx, gw) = gauss_legendre(PANEL_ORDER);
    let panels = n_nodes.div_ceil(PANEL_ORDER).max(1);
    let h = (hi - lo) / panels as f64;
    let mut nodes = Vec::with_capacity(panels * PANEL_ORDER);
    let mut weights = Vec::with_capacity(panels * PANEL_ORDER);
    for p in 0..panels {
        let a = lo + p as f64 * h;
        for (x, w) in gx.iter().zip(&gw) {
            nodes.push(a + 0.5 * h * (x + 1.0));
            weights.push(0.5 * h * w);
        }
    }
    (nodes, weights)
}

/// A rule `∫ h(x) p_X(x) dx ≈ Σ_k w_k h(x_k)` with the density folded into
/// the weights.
#[derive(Clone, Debug)]
pub struct WeightedRule {
    pub nodes: Vec<InputPoint>,
    pub weights: Vec<f64>,
    /// Per-dimension node coordinates when the nodes form a tensor grid
    /// (row-major, last dimension fastest).
    pub axes: Option<Vec<Vec<f64>>>,
}

impl WeightedRule {
    /// Tensor composite Gauss–Legendre grid over `domain` with
    /// `nodes_per_dim` nodes per axis, weighted by `density`.
    pub fn tensor(domain: &[(f64, f64)], nodes_per_dim: usize, density: impl Fn(&InputPoint) -> f64) -> Result<Self> {
        let d = domain.len();
        if d == 0 || d > 2 {
            return Err(Error::Unsupported(format!("tensor quadrature in {d} dimensions")));
        }
        let rules: Vec<_> = domain.iter().map(|&(lo, hi)| composite_gauss_legendre(lo, hi, nodes_per_dim)).collect();
        let mut nodes = Vec::new();
        let mut weights = Vec::new();
        if d == 1 {
            for (x, w) in rules[0].0.iter().zip(&rules[0].1) {
                let p = InputPoint::from(*x);
                weights.push(w * density(&p));
                nodes.push(p);
            }
        } else {
            for (x, wx) in rules[0].0.iter().zip(&rules[0].1) {
                for (y, wy) in rules[1].0.iter().zip(&rules[1].1) {
                    let p = InputPoint::from([*x, *y]);
                    weights.push(wx * wy * density(&p));
                    nodes.push(p);
                }
            }
        }
        if weights.iter().any(|w| !w.is_finite() || *w < 0.0) {
            return Err(Error::NonFinite("quadrature weights".into()));
        }
        Ok(WeightedRule {
            nodes,
            weights,
            axes: Some(rules.into_iter().map(|r| r.0).collect()),
        })
    }

    /// Equal weights over samples drawn from the density.
    pub fn monte_carlo(samples: Vec<InputPoint>) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::InvalidArgument("empty sample set".into()));
        }
        let w = 1.0 / samples.len() as f64;
        Ok(WeightedRule {
            weights: vec![w; samples.len()],
            nodes: samples,
            axes: None,
        })
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn total_weight(&self) -> f64 {
        self.weights.iter().sum()
    }

    /// Weighted sum in node order.
    pub fn integrate(&self, values: &[f64]) -> f64 {
        self.weights.iter().zip(values).map(|(w, v)| w * v).sum()
    }
}
