//! Gauss–Legendre rules and piecewise (panelled) integration over unions of
//! intervals.

use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

/// Nodes and weights on `[-1, 1]`.
#[derive(Debug, Clone)]
pub struct GaussLegendre {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl GaussLegendre {
    /// Newton iteration on `P_n` from Chebyshev-like initial guesses.
    pub fn new(order: usize) -> Self {
        assert!(order >= 1, "Gauss-Legendre order must be positive");
        let n = order;
        let mut nodes = vec![0.0; n];
        let mut weights = vec![0.0; n];
        for i in 0..n.div_ceil(2) {
            let mut x = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
            let mut dp = 0.0;
            for _ in 0..100 {
                let (p, d) = legendre_with_derivative(n, x);
                dp = d;
                let dx = p / d;
                x -= dx;
                if dx.abs() < 1e-16 {
                    break;
                }
            }
            let (_, d) = legendre_with_derivative(n, x);
            if d != 0.0 {
                dp = d;
            }
            let w = 2.0 / ((1.0 - x * x) * dp * dp);
            nodes[i] = -x;
            nodes[n - 1 - i] = x;
            weights[i] = w;
            weights[n - 1 - i] = w;
        }
        if n % 2 == 1 {
            nodes[n / 2] = 0.0;
        }
        Self { nodes, weights }
    }

    pub fn order(&self) -> usize {
        self.nodes.len()
    }

    /// `∫_a^b f` with a single panel.
    pub fn integrate<F: Fn(f64) -> f64>(&self, a: f64, b: f64, f: F) -> f64 {
        let half = 0.5 * (b - a);
        let mid = 0.5 * (a + b);
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(x, w)| w * f(mid + half * x))
            .sum::<f64>()
            * half
    }
}

fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    if n == 0 {
        return (1.0, 0.0);
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

/// Description of a composite rule, recorded in reports.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuadratureSpec {
    /// Gauss–Legendre points per panel.
    pub order: usize,
    /// Half-width `L` of the integration window `[-L, L]`; `None` picks the
    /// Hermite window of the basis.
    pub window: Option<f64>,
    /// Maximum panel width; `None` picks it from the highest Hermite index.
    pub panel_width: Option<f64>,
}

impl Default for QuadratureSpec {
    fn default() -> Self {
        Self {
            order: 32,
            window: None,
            panel_width: None,
        }
    }
}

impl QuadratureSpec {
    pub fn with_order(order: usize) -> Self {
        Self {
            order,
            ..Self::default()
        }
    }

    pub fn resolved_window(&self, max_index: usize) -> f64 {
        self.window.unwrap_or_else(|| hermite_window(max_index))
    }

    pub fn resolved_panel_width(&self, max_index: usize) -> f64 {
        self.panel_width
            .unwrap_or_else(|| (8.0 / (2.0 * max_index as f64 + 1.0).sqrt()).min(1.0))
    }
}

/// Half-width outside which every `Φ_n` with `n < max_index` is below
/// roughly `1e-30`: the turning point `√(2n+1)` plus a fixed margin.
pub fn hermite_window(max_index: usize) -> f64 {
    (2.0 * max_index as f64 + 1.0).sqrt() + 8.0
}

/// Flattened composite rule over a set of disjoint intervals.
#[derive(Debug, Clone, Default)]
pub struct CompositeRule {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
    pub panels: usize,
}

impl CompositeRule {
    /// Splits every interval into equal panels no wider than `max_width`.
    pub fn over_intervals(intervals: &[(f64, f64)], rule: &GaussLegendre, max_width: f64) -> Self {
        let mut out = CompositeRule::default();
        for &(a, b) in intervals {
            if b <= a {
                continue;
            }
            let panels = ((b - a) / max_width).ceil().max(1.0) as usize;
            let h = (b - a) / panels as f64;
            for j in 0..panels {
                let lo = a + j as f64 * h;
                let mid = lo + 0.5 * h;
                for (x, w) in rule.nodes.iter().zip(&rule.weights) {
                    out.nodes.push(mid + 0.5 * h * x);
                    out.weights.push(0.5 * h * w);
                }
            }
            out.panels += panels;
        }
        out
    }

    pub fn integrate<F: Fn(f64) -> f64>(&self, f: F) -> f64 {
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(&x, &w)| w * f(x))
            .sum()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }
}
