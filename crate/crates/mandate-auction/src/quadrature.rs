//! Composite Gauss-Legendre quadrature.
//!
//! Nodes and weights come from Newton's method on the Legendre three-term
//! recurrence, seeded with the Chebyshev angle approximation.

/// A Gauss-Legendre rule on the reference interval `[-1, 1]`.
#[derive(Debug, Clone)]
pub struct GaussLegendre {
    /// `(node, weight)` pairs.
    nodes: Vec<(f64, f64)>,
}

impl GaussLegendre {
    pub fn new(points: usize) -> Self {
        assert!(points >= 1, "a quadrature rule needs at least one node");
        let n = points;
        let mut nodes = vec![(0.0, 0.0); n];
        let half = n.div_ceil(2);
        for i in 0..half {
            let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
            let mut derivative = 1.0;
            for _ in 0..64 {
                let (value, d) = legendre_with_derivative(n, x);
                derivative = d;
                let dx = value / d;
                x -= dx;
                if dx.abs() <= 2.0 * f64::EPSILON * (1.0 + x.abs()) {
                    break;
                }
            }
            let weight = 2.0 / ((1.0 - x * x) * derivative * derivative);
            nodes[i] = (-x, weight);
            nodes[n - 1 - i] = (x, weight);
        }
        // Odd rules pin the middle node at zero exactly.
        if n % 2 == 1 {
            let (_, d) = legendre_with_derivative(n, 0.0);
            nodes[n / 2] = (0.0, 2.0 / (d * d));
        }
        Self { nodes }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Integrates `f` over `[a, b]` with a single panel.
    pub fn integrate<F: Fn(f64) -> f64>(&self, a: f64, b: f64, f: F) -> f64 {
        let mid = 0.5 * (a + b);
        let scale = 0.5 * (b - a);
        let sum: f64 = self
            .nodes
            .iter()
            .map(|&(x, w)| w * f(mid + scale * x))
            .sum();
        scale * sum
    }

    /// Integrates `f` over `[a, b]` split into equal-width panels.
    pub fn integrate_composite<F: Fn(f64) -> f64>(
        &self,
        a: f64,
        b: f64,
        panels: usize,
        f: F,
    ) -> f64 {
        let panels = panels.max(1);
        let width = (b - a) / panels as f64;
        (0..panels)
            .map(|k| {
                let lo = a + width * k as f64;
                let hi = if k + 1 == panels { b } else { lo + width };
                self.integrate(lo, hi, &f)
            })
            .sum()
    }
}

/// Legendre polynomial of degree `n` and its derivative at `x`.
fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let mut prev = 1.0;
    let mut current = x;
    for k in 2..=n {
        let k = k as f64;
        let next = ((2.0 * k - 1.0) * x * current - (k - 1.0) * prev) / k;
        prev = current;
        current = next;
    }
    let derivative = n as f64 * (x * current - prev) / (x * x - 1.0);
    (current, derivative)
}
