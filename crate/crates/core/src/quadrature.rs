//! Gauss–Legendre panel rules.
//!
//! Every integral in the crate is a composite of fixed-order Gauss–Legendre
//! panels. Error estimates come from comparing a panel layout against the
//! same interval split twice as finely.

use std::sync::LazyLock;

/// Points per panel.
pub const GAUSS_ORDER: usize = 12;

/// Nodes and weights on [-1, 1].
#[derive(Debug, Clone)]
pub struct GaussLegendre {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl GaussLegendre {
    /// Builds the `n`-point rule by Newton iteration on P_n.
    pub fn new(n: usize) -> Self {
        assert!(n >= 1);
        let mut nodes = vec![0.0; n];
        let mut weights = vec![0.0; n];
        let m = (n + 1) / 2;
        for i in 0..m {
            let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
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
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

pub static GAUSS: LazyLock<GaussLegendre> = LazyLock::new(|| GaussLegendre::new(GAUSS_ORDER));

/// Quadrature nodes of `panels` equal-width panels covering `[a, b]`,
/// returned as `(t, weight)` pairs in ascending `t`.
pub fn panel_nodes(a: f64, b: f64, panels: usize) -> Vec<(f64, f64)> {
    let rule = &*GAUSS;
    let width = (b - a) / panels as f64;
    let half = 0.5 * width;
    let mut out = Vec::with_capacity(panels * rule.order());
    for p in 0..panels {
        let mid = a + (p as f64 + 0.5) * width;
        for (x, w) in rule.nodes.iter().zip(&rule.weights) {
            out.push((mid + half * x, half * w));
        }
    }
    out
}

/// Integral of `f` over one Gauss panel `[a, b]`.
pub fn panel_integral<F: FnMut(f64) -> f64>(a: f64, b: f64, mut f: F) -> f64 {
    let rule = &*GAUSS;
    let half = 0.5 * (b - a);
    let mid = 0.5 * (a + b);
    rule.nodes
        .iter()
        .zip(&rule.weights)
        .map(|(x, w)| half * w * f(mid + half * x))
        .sum()
}

/// Result of an adaptive panel integration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdaptiveResult {
    pub value: f64,
    pub error_estimate: f64,
    pub panels: usize,
    /// Sum of `|w f|` over the accepted panels, used for rounding estimates.
    pub magnitude: f64,
    pub converged: bool,
}

/// Adaptive bisection over `[a, b]`: a panel is accepted once its Gauss
/// value agrees with the sum over its two halves to within its share of
/// `tol`. Panels are processed in interval order so the result is
/// deterministic.
pub fn adaptive_bisection<F: FnMut(f64) -> f64>(
    a: f64,
    b: f64,
    tol: f64,
    max_panels: usize,
    mut f: F,
) -> AdaptiveResult {
    let total = (b - a).abs().max(f64::MIN_POSITIVE);
    let mut stack = vec![(a, b, panel_integral(a, b, &mut f))];
    let mut value = 0.0;
    let mut error = 0.0;
    let mut magnitude = 0.0;
    let mut panels = 1usize;
    let mut converged = true;
    while let Some((lo, hi, whole)) = stack.pop() {
        let mid = 0.5 * (lo + hi);
        let left = panel_integral(lo, mid, &mut f);
        let right = panel_integral(mid, hi, &mut f);
        let diff = (left + right - whole).abs();
        let share = (tol * (hi - lo).abs() / total).max(64.0 * f64::EPSILON * (left + right).abs());
        if diff <= share || panels >= max_panels || (hi - lo).abs() < 1e-12 * total {
            if diff > share {
                converged = false;
            }
            value += left + right;
            error += diff;
            magnitude += panel_integral(lo, hi, |t| f(t).abs());
        } else {
            panels += 1;
            // right pushed first so the left half is integrated first
            stack.push((mid, hi, right));
            stack.push((lo, mid, left));
        }
    }
    AdaptiveResult {
        value,
        error_estimate: error,
        panels,
        magnitude,
        converged,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn weights_sum_to_two() {
        let rule = GaussLegendre::new(12);
        let s: f64 = rule.weights.iter().sum();
        assert!((s - 2.0).abs() < 1e-14);
    }

    #[test]
    fn exact_for_degree_23() {
        let rule = GaussLegendre::new(12);
        let s: f64 = rule
            .nodes
            .iter()
            .zip(&rule.weights)
            .map(|(x, w)| w * x.powi(22))
            .sum();
        assert!((s - 2.0 / 23.0).abs() < 1e-14);
    }

    #[test]
    fn odd_order_has_center_node() {
        let rule = GaussLegendre::new(5);
        assert_eq!(rule.nodes[2], 0.0);
        assert!((rule.weights[2] - 128.0 / 225.0).abs() < 1e-14);
    }

    #[test]
    fn panels_integrate_oscillation() {
        let nodes = panel_nodes(0.0, 10.0, 40);
        let s: f64 = nodes.iter().map(|(t, w)| w * (3.0 * t).cos()).sum();
        assert!((s - (30.0f64).sin() / 3.0).abs() < 1e-13);
    }

    #[test]
    fn adaptive_handles_peak() {
        let r = adaptive_bisection(-1.0, 1.0, 1e-12, 10_000, |t| 1.0 / (1e-4 + t * t));
        let exact = 2.0 * (1.0f64 / 1e-2).atan() / 1e-2;
        assert!(r.converged);
        assert!((r.value - exact).abs() < 1e-9 * exact);
    }
}
