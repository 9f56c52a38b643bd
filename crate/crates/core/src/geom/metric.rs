//! Invariant Kähler metrics `ω_φ = ω_FS + (√−1/2π)∂∂̄φ` in the moment coordinate.

use std::sync::Arc;

use crate::error::{LabError, Result};
use crate::geom::{laplace_fs, InvariantFunction, MomentGrid};

/// Nodal values of an invariant function on a [`MomentGrid`].
#[derive(Debug, Clone, PartialEq)]
pub struct Profile {
    pub values: Vec<f64>,
}

impl Profile {
    pub fn new(values: Vec<f64>) -> Self {
        Self { values }
    }

    pub fn node_count(&self) -> usize {
        self.values.len()
    }

    pub fn sup_norm(&self) -> f64 {
        self.values.iter().map(|v| v.abs()).fold(0.0, f64::max)
    }

    /// `sup |self − other|`.
    pub fn sup_distance(&self, other: &Profile) -> f64 {
        assert_eq!(self.values.len(), other.values.len());
        self.values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }

    pub fn map<F: Fn(f64) -> f64>(&self, f: F) -> Profile {
        Profile::new(self.values.iter().map(|&v| f(v)).collect())
    }
}

/// Hermitian metric `h = h_FS·e^{−φ}` on O(1), admissible on its grid.
#[derive(Debug, Clone)]
pub struct InvariantMetric {
    grid: Arc<MomentGrid>,
    potential: InvariantFunction,
    laplacian: InvariantFunction,
    // 1 + Δ₀φ at the nodes: the density of ω_φ against dx.
    density: Vec<f64>,
}

impl InvariantMetric {
    pub fn new(grid: Arc<MomentGrid>, potential: InvariantFunction) -> Result<Self> {
        let laplacian = laplace_fs(&potential);
        let mut density = Vec::with_capacity(grid.node_count());
        for (node, &x) in grid.nodes().iter().enumerate() {
            let value = 1.0 + laplacian.eval(x);
            if !(value > 0.0) {
                return Err(LabError::KahlerCone { node, x, value });
            }
            density.push(value);
        }
        Ok(Self {
            grid,
            potential,
            laplacian,
            density,
        })
    }

    pub fn fubini_study(grid: Arc<MomentGrid>) -> Self {
        Self::new(grid, InvariantFunction::zero(0)).expect("FS is admissible")
    }

    pub fn grid(&self) -> &Arc<MomentGrid> {
        &self.grid
    }

    pub fn potential(&self) -> &InvariantFunction {
        &self.potential
    }

    /// `1 + Δ₀φ` at the grid nodes.
    pub fn density(&self) -> &[f64] {
        &self.density
    }

    pub fn density_at(&self, x: f64) -> f64 {
        1.0 + self.laplacian.eval(x)
    }

    pub fn potential_values(&self) -> Vec<f64> {
        self.potential.sample(&self.grid)
    }

    pub fn check_profile(&self, f: &Profile) -> Result<()> {
        if f.node_count() != self.grid.node_count() {
            return Err(LabError::GridMismatch {
                expected: self.grid.node_count(),
                found: f.node_count(),
            });
        }
        Ok(())
    }

    /// `∫_M f ω_φ = ∫₀¹ f (1 + Δ₀φ) dx`.
    pub fn integrate(&self, f: &Profile) -> Result<f64> {
        self.check_profile(f)?;
        Ok(self
            .grid
            .weights()
            .iter()
            .zip(&self.density)
            .zip(&f.values)
            .map(|((w, d), v)| w * d * v)
            .sum())
    }

    pub fn volume(&self) -> f64 {
        self.grid.integrate_values(&self.density)
    }

    /// Metric-dependent moment map `x̃ = x + x(1 − x) dφ/dx`.
    pub fn moment_map_at(&self, x: f64) -> f64 {
        x + self.potential.moment_flux(x)
    }

    pub fn moment_map(&self) -> Profile {
        Profile::new(
            self.grid
                .nodes()
                .iter()
                .map(|&x| self.moment_map_at(x))
                .collect(),
        )
    }

    /// Scalar curvature `σ = (2 − Δ₀ log(1 + Δ₀φ)) / (1 + Δ₀φ)`, normalized so σ(ω_FS) = 2.
    pub fn scalar_curvature_at(&self, x: f64) -> f64 {
        // With w = 1 + Δ₀φ: Δ₀ log w = Δ₀w / w − x(1 − x) (w')² / w².
        let w = 1.0 + self.laplacian.eval(x);
        let lap_w = laplace_fs(&self.laplacian).eval(x);
        let dw = self.laplacian.derivative(x);
        let lap_log_w = lap_w / w - x * (1.0 - x) * dw * dw / (w * w);
        (2.0 - lap_log_w) / w
    }

    pub fn scalar_curvature(&self) -> Profile {
        let lap2 = laplace_fs(&self.laplacian);
        Profile::new(
            self.grid
                .nodes()
                .iter()
                .zip(&self.density)
                .map(|(&x, &w)| {
                    let dw = self.laplacian.derivative(x);
                    let lap_log_w = lap2.eval(x) / w - x * (1.0 - x) * dw * dw / (w * w);
                    (2.0 - lap_log_w) / w
                })
                .collect(),
        )
    }

    /// Samples an arbitrary function of `x` at the grid nodes.
    pub fn profile_of<F: Fn(f64) -> f64>(&self, f: F) -> Profile {
        Profile::new(self.grid.nodes().iter().map(|&x| f(x)).collect())
    }
}

pub fn scalar_curvature(g: &InvariantMetric) -> Profile {
    g.scalar_curvature()
}

pub fn moment_map(g: &InvariantMetric) -> Profile {
    g.moment_map()
}

pub fn integrate(f: &Profile, g: &InvariantMetric) -> Result<f64> {
    g.integrate(f)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geom::{lichnerowicz_fs, random_potential};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn grid() -> Arc<MomentGrid> {
        Arc::new(MomentGrid::new(256).unwrap())
    }

    #[test]
    fn integrate_examples() {
        let fs = InvariantMetric::fubini_study(grid());
        let one = fs.profile_of(|_| 1.0);
        assert!((fs.integrate(&one).unwrap() - 1.0).abs() < 1e-14);
        let x = fs.profile_of(|x| x);
        assert!((fs.integrate(&x).unwrap() - 0.5).abs() < 1e-14);
        let p2 = fs.profile_of(|x| crate::geom::legendre_at(2, x));
        assert!(fs.integrate(&p2).unwrap().abs() < 1e-14);
        let short = Profile::new(vec![1.0; 10]);
        assert_eq!(
            fs.integrate(&short),
            Err(LabError::GridMismatch {
                expected: 256,
                found: 10
            })
        );
    }

    #[test]
    fn rejects_potentials_outside_kahler_cone() {
        // 1 + Δ₀(a P_2) = 1 − 6a P_2 turns negative at the endpoints once a > 1/6.
        for a in [0.17, 0.3] {
            let err = InvariantMetric::new(grid(), InvariantFunction::legendre(2, a)).unwrap_err();
            assert!(matches!(err, LabError::KahlerCone { node: 0, .. }));
        }
        // 1 − 12a P_3 fails at x → 0 once a > 1/12.
        assert!(InvariantMetric::new(grid(), InvariantFunction::legendre(3, 0.1)).is_err());
        assert!(InvariantMetric::new(grid(), InvariantFunction::legendre(2, 0.1)).is_ok());
        assert!(InvariantMetric::new(grid(), InvariantFunction::legendre(3, 0.05)).is_ok());
    }

    #[test]
    fn fubini_study_curvature_and_moment_map() {
        let fs = InvariantMetric::fubini_study(grid());
        assert!(fs
            .scalar_curvature()
            .values
            .iter()
            .all(|&s| (s - 2.0).abs() < 1e-15));
        let mm = fs.moment_map();
        for (a, &x) in mm.values.iter().zip(fs.grid().nodes()) {
            assert_eq!(*a, x);
        }
    }

    #[test]
    fn volume_gauss_bonnet_and_barycenter_are_metric_independent() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..8 {
            let phi = random_potential(&mut rng, 6, 0.6);
            let g = InvariantMetric::new(grid(), phi).unwrap();
            assert!((g.volume() - 1.0).abs() < 1e-13);
            let sigma = g.scalar_curvature();
            assert!((g.integrate(&sigma).unwrap() - 2.0).abs() < 1e-12);
            let mm = g.moment_map();
            assert!((g.integrate(&mm).unwrap() - 0.5).abs() < 1e-13);
            assert_eq!(g.moment_map_at(0.0), 0.0);
            assert!((g.moment_map_at(1.0) - 1.0).abs() < 1e-15);
        }
    }

    #[test]
    fn curvature_linearizes_to_lichnerowicz() {
        let p2 = InvariantFunction::legendre(2, 1.0);
        let d0 = lichnerowicz_fs(&p2);
        let remainder = |eps: f64| {
            let g = InvariantMetric::new(grid(), &p2 * eps).unwrap();
            let sigma = g.scalar_curvature();
            let mut worst: f64 = 0.0;
            for (s, &x) in sigma.values.iter().zip(g.grid().nodes()) {
                worst = worst.max((s - (2.0 - eps * d0.eval(x))).abs());
            }
            worst
        };
        let (r1, r2) = (remainder(1e-4), remainder(5e-5));
        // relative error O(ε) and a quadratic remainder
        assert!(r1 / (24.0 * 1e-4) < 1e-2, "r1 = {r1:e}");
        assert!((r1 / r2 - 4.0).abs() < 0.05, "ratio = {}", r1 / r2);
    }

    #[test]
    fn curvature_matches_finite_differences() {
        let phi = InvariantFunction::new(vec![0.0, 0.05, 0.04, -0.02, 0.01]);
        let g = InvariantMetric::new(grid(), phi.clone()).unwrap();
        let fd_lap = |f: &dyn Fn(f64) -> f64, x: f64, h: f64| {
            let flux = |s: f64| s * (1.0 - s) * (f(s + 0.5 * h) - f(s - 0.5 * h)) / h;
            (flux(x + 0.5 * h) - flux(x - 0.5 * h)) / h
        };
        let sigma_fd = |x: f64, h: f64| {
            let w = |s: f64| 1.0 + fd_lap(&|t| phi.eval(t), s, h);
            let log_w = |s: f64| w(s).ln();
            (2.0 - fd_lap(&log_w, x, h)) / w(x)
        };
        for &x in &[0.2, 0.45, 0.7] {
            let exact = g.scalar_curvature_at(x);
            let e1 = (sigma_fd(x, 4e-3) - exact).abs();
            let e2 = (sigma_fd(x, 2e-3) - exact).abs();
            assert!(e2 < 1e-4, "x = {x}: {e2:e}");
            assert!(e1 / e2 > 3.0 && e1 / e2 < 5.0, "x = {x}: ratio {}", e1 / e2);
        }
    }
}
