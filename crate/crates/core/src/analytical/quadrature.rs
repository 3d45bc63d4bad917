use std::f64::consts::PI;

use crate::error::{Error, Result};

/// Gauss-Legendre nodes per panel and panels per half-wire.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct QuadratureSpec {
    pub order: usize,
    pub panels: usize,
}

impl Default for QuadratureSpec {
    fn default() -> Self {
        Self { order: 32, panels: 1 }
    }
}

impl QuadratureSpec {
    pub fn new(order: usize, panels: usize) -> Result<Self> {
        let spec = Self { order, panels };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if self.order == 0 || self.panels == 0 {
            return Err(Error::Configuration(format!(
                "quadrature needs order >= 1 and panels >= 1, got order {} panels {}",
                self.order, self.panels
            )));
        }
        Ok(())
    }

    pub fn rule(&self) -> GaussLegendre {
        GaussLegendre::new(self.order)
    }
}

/// Gauss-Legendre rule on [-1, 1]. Nodes are stored in ascending order and
/// are exactly antisymmetric (`x[i] == -x[n-1-i]`).
#[derive(Debug, Clone)]
pub struct GaussLegendre {
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl GaussLegendre {
    pub fn new(n: usize) -> Self {
        assert!(n > 0, "Gauss-Legendre rule needs at least one node");
        let mut nodes = vec![0.0; n];
        let mut weights = vec![0.0; n];
        let nf = n as f64;
        for i in 0..n.div_ceil(2) {
            // Tricomi initial guess, then Newton on P_n.
            let mut x = (PI * (i as f64 + 0.75) / (nf + 0.5)).cos();
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
            if d.is_finite() {
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

    /// Nodes and weights mapped onto `[a, b]`.
    pub fn mapped(&self, a: f64, b: f64) -> impl Iterator<Item = (f64, f64)> + '_ {
        let half = 0.5 * (b - a);
        let mid = 0.5 * (a + b);
        self.nodes.iter().zip(&self.weights).map(move |(x, w)| (mid + half * x, half * w))
    }

    pub fn integrate<F: FnMut(f64) -> f64>(&self, a: f64, b: f64, mut f: F) -> f64 {
        self.mapped(a, b).map(|(x, w)| w * f(x)).sum()
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

/// Splits `[a, b]` into sub-panels that shrink geometrically toward the ends
/// flagged with a length scale. A scale marks a near-singular point of the
/// integrand at (or just outside) that end with the given width.
pub(crate) fn graded_panels(a: f64, b: f64, left: Option<f64>, right: Option<f64>, out: &mut Vec<(f64, f64)>) {
    const RATIO: f64 = 4.0;
    let len = b - a;
    let left = left.filter(|s| *s < 0.25 * len);
    let right = right.filter(|s| *s < 0.25 * len);
    match (left, right) {
        (None, None) => out.push((a, b)),
        (Some(_), Some(_)) => {
            let m = 0.5 * (a + b);
            graded_panels(a, m, left, None, out);
            graded_panels(m, b, None, right, out);
        }
        (Some(s), None) => {
            let mut x = a;
            let mut step = s;
            while x + RATIO * step < b {
                out.push((x, x + step));
                x += step;
                step *= RATIO - 1.0;
            }
            out.push((x, b));
        }
        (None, Some(s)) => {
            let start = out.len();
            graded_panels(-b, -a, Some(s), None, out);
            for p in &mut out[start..] {
                *p = (-p.1, -p.0);
            }
            out[start..].reverse();
        }
    }
}
