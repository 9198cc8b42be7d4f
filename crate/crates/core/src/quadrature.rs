//! Gauss–Legendre and trapezoidal rules.

use std::f64::consts::PI;
use std::ops::{Add, Mul};

/// Nodes and weights of an `n`-point Gauss–Legendre rule on `[-1, 1]`.
#[derive(Debug, Clone)]
pub struct GaussLegendre {
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl GaussLegendre {
    pub fn new(n: usize) -> Self {
        assert!(n >= 1, "Gauss-Legendre rule needs at least one node");
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
            dp = if d != 0.0 { d } else { dp };
            let w = 2.0 / ((1.0 - x * x) * dp * dp);
            nodes[i] = -x;
            nodes[n - 1 - i] = x;
            weights[i] = w;
            weights[n - 1 - i] = w;
        }
        Self { nodes, weights }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Composite rule: `[a, b]` split into `panels` equal sub-intervals.
    pub fn integrate<T, F>(&self, mut f: F, a: f64, b: f64, panels: usize) -> T
    where
        T: Copy + Default + Add<Output = T> + Mul<f64, Output = T>,
        F: FnMut(f64) -> T,
    {
        let h = (b - a) / panels as f64;
        let half = 0.5 * h;
        let mut total = T::default();
        for p in 0..panels {
            let mid = a + (p as f64 + 0.5) * h;
            let mut acc = T::default();
            for (x, w) in self.nodes.iter().zip(&self.weights) {
                acc = acc + f(mid + half * x) * *w;
            }
            total = total + acc * half;
        }
        total
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

/// Trapezoidal rule on a uniform grid of spacing `h`.
pub fn trapezoid_uniform(values: &[f64], h: f64) -> f64 {
    match values.len() {
        0 | 1 => 0.0,
        n => h * (values[1..n - 1].iter().sum::<f64>() + 0.5 * (values[0] + values[n - 1])),
    }
}

/// Trapezoidal rule on an arbitrary increasing grid.
pub fn trapezoid(x: &[f64], y: &[f64]) -> f64 {
    x.windows(2)
        .zip(y.windows(2))
        .map(|(xs, ys)| 0.5 * (xs[1] - xs[0]) * (ys[0] + ys[1]))
        .sum()
}

/// `n` evenly spaced points from `start` to `stop` inclusive.
pub fn linspace(start: f64, stop: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![start],
        _ => {
            let h = (stop - start) / (n - 1) as f64;
            (0..n).map(|i| start + i as f64 * h).collect()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rule_integrates_polynomials_exactly() {
        for n in [1usize, 2, 5, 8, 12] {
            let gl = GaussLegendre::new(n);
            let sum_w: f64 = gl.weights.iter().sum();
            assert!((sum_w - 2.0).abs() < 1e-13, "n = {n}");
            // degree 2n-1
            let deg = 2 * n - 1;
            let got: f64 = gl.integrate(|x| x.powi(deg as i32) + x.powi(deg as i32 - 1), 0.0, 1.0, 1);
            let exact = 1.0 / (deg as f64 + 1.0) + 1.0 / deg as f64;
            assert!((got - exact).abs() < 1e-13, "n = {n}: {got} vs {exact}");
        }
    }

    #[test]
    fn composite_rule_converges_on_oscillatory_integrand() {
        let gl = GaussLegendre::new(8);
        let got: f64 = gl.integrate(|x| (10.0 * x).cos(), 0.0, 3.0, 16);
        assert!((got - (30.0f64).sin() / 10.0).abs() < 1e-12);
    }

    #[test]
    fn trapezoid_on_gaussian() {
        let x = linspace(-8.0, 8.0, 401);
        let y: Vec<f64> = x.iter().map(|v| (-v * v).exp()).collect();
        let a = trapezoid(&x, &y);
        let b = trapezoid_uniform(&y, x[1] - x[0]);
        assert!((a - PI.sqrt()).abs() < 1e-12);
        assert!((a - b).abs() < 1e-12);
    }
}
