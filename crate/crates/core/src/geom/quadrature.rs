//! Gauss–Legendre quadrature on the moment interval (0, 1).
//!
//! For an S¹-invariant integrand the integral over P¹ against `ω_FS` is the
//! plain integral over the moment coordinate `x = |z|²/(1+|z|²)`, so a single
//! one-dimensional rule serves every integral in the crate.

use crate::error::{LabError, Result};

/// Smallest grid the default sizing rule will produce.
pub const MIN_DEFAULT_NODES: usize = 256;

/// Gauss–Legendre nodes and weights mapped to (0, 1).
#[derive(Debug, Clone, PartialEq)]
pub struct MomentGrid {
    nodes: Vec<f64>,
    // 1 - x, computed from the Legendre root directly so it keeps full
    // relative precision near x = 1.
    complements: Vec<f64>,
    weights: Vec<f64>,
}

impl MomentGrid {
    pub fn new(node_count: usize) -> Result<Self> {
        if node_count == 0 {
            return Err(LabError::InvalidGrid(node_count));
        }
        let (roots, weights) = gauss_legendre(node_count);
        let nodes = roots.iter().map(|y| 0.5 * (1.0 + y)).collect();
        let complements = roots.iter().map(|y| 0.5 * (1.0 - y)).collect();
        let weights = weights.iter().map(|w| 0.5 * w).collect();
        Ok(Self {
            nodes,
            complements,
            weights,
        })
    }

    /// Default sizing: `max(8·m_max + 64, 256)` nodes.
    pub fn for_max_power(m_max: u32) -> Self {
        Self::new(default_node_count(m_max)).expect("default node count is positive")
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn complements(&self) -> &[f64] {
        &self.complements
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Largest power the sizing rule considers resolved by this grid.
    pub fn design_max_power(&self) -> u32 {
        (self.node_count().saturating_sub(64) / 8) as u32
    }

    /// `Σ w_j f_j`, summed in node order.
    pub fn integrate_values(&self, values: &[f64]) -> f64 {
        debug_assert_eq!(values.len(), self.weights.len());
        self.weights.iter().zip(values).map(|(w, f)| w * f).sum()
    }

    pub fn integrate<F: Fn(f64) -> f64>(&self, f: F) -> f64 {
        self.weights
            .iter()
            .zip(&self.nodes)
            .map(|(w, &x)| w * f(x))
            .sum()
    }
}

pub fn default_node_count(m_max: u32) -> usize {
    (8 * m_max as usize + 64).max(MIN_DEFAULT_NODES)
}

/// Roots and weights of the `n`-point Gauss–Legendre rule on [-1, 1], in
/// increasing order. Newton iteration on the three-term recurrence.
fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut roots = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let nf = n as f64;
    for i in 0..n.div_ceil(2) {
        // Tricomi's initial guess for the i-th largest root.
        let theta = std::f64::consts::PI * (i as f64 + 0.75) / (nf + 0.5);
        let mut y = theta.cos() * (1.0 - (nf - 1.0) / (8.0 * nf * nf * nf));
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre_with_derivative(n, y);
            dp = d;
            let dy = p / d;
            y -= dy;
            if dy.abs() <= 1e-16 * y.abs().max(1e-300) {
                break;
            }
        }
        let (_, d) = legendre_with_derivative(n, y);
        if d != 0.0 {
            dp = d;
        }
        let w = 2.0 / ((1.0 - y * y) * dp * dp);
        roots[n - 1 - i] = y;
        roots[i] = -y;
        weights[n - 1 - i] = w;
        weights[i] = w;
    }
    if n % 2 == 1 {
        roots[n / 2] = 0.0;
    }
    (roots, weights)
}

fn legendre_with_derivative(n: usize, y: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = y;
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 1..n {
        let kf = k as f64;
        let p2 = ((2.0 * kf + 1.0) * y * p1 - kf * p0) / (kf + 1.0);
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (y * p1 - p0) / (y * y - 1.0);
    (p1, d)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn nodes_are_interior_and_increasing() {
        for n in [1, 2, 7, 64, 257, 576] {
            let grid = MomentGrid::new(n).unwrap();
            let x = grid.nodes();
            assert!(x[0] > 0.0 && x[n - 1] < 1.0);
            assert!(x.windows(2).all(|w| w[0] < w[1]));
            for (a, b) in x.iter().zip(grid.complements()) {
                assert!((a + b - 1.0).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn weights_sum_to_one() {
        for n in [1, 3, 100, 576, 1088] {
            let grid = MomentGrid::new(n).unwrap();
            assert!((grid.weights().iter().sum::<f64>() - 1.0).abs() < 1e-14);
        }
    }

    #[test]
    fn exact_on_polynomials_up_to_degree_2n_minus_1() {
        let n = 12;
        let grid = MomentGrid::new(n).unwrap();
        for d in 0..(2 * n) as i32 {
            let exact = 1.0 / (d as f64 + 1.0);
            let approx = grid.integrate(|x| x.powi(d));
            assert!((approx - exact).abs() < 1e-14, "degree {d}");
        }
        // degree 2n is not integrated exactly
        let d = 2 * n as i32;
        assert!((grid.integrate(|x| x.powi(d)) - 1.0 / (d as f64 + 1.0)).abs() > 1e-16);
    }

    #[test]
    fn beta_integrals_on_default_grid() {
        let grid = MomentGrid::for_max_power(64);
        assert_eq!(grid.node_count(), 576);
        // ∫ x^3 (1-x)^5 = 3! 5! / 9!
        let v = grid.integrate(|x| x.powi(3) * (1.0 - x).powi(5));
        assert!((v - 6.0 * 120.0 / 362880.0).abs() < 1e-17);
    }

    #[test]
    fn zero_nodes_rejected() {
        assert_eq!(MomentGrid::new(0), Err(LabError::InvalidGrid(0)));
    }

    #[test]
    fn default_sizing_rule() {
        assert_eq!(default_node_count(1), 256);
        assert_eq!(default_node_count(32), 320);
        assert_eq!(default_node_count(64), 576);
        assert_eq!(MomentGrid::for_max_power(64).design_max_power(), 64);
    }
}
