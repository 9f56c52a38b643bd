//! Diagonal operators of the round metric on the invariant Legendre basis.

use crate::error::{LabError, Result};
use crate::geom::InvariantFunction;

/// Kernel components with absolute value below this are treated as zero by
/// [`solve_lichnerowicz`].
pub const DEFAULT_KERNEL_TOL: f64 = 1e-9;

/// Eigenvalue of `Δ₀` on `P_k(2x − 1)`.
pub fn laplace_eigenvalue(k: usize) -> f64 {
    let k = k as f64;
    -k * (k + 1.0)
}

/// Eigenvalue `(k−1)k(k+1)(k+2)` of `D₀ = Δ₀² + 2Δ₀` on `P_k(2x − 1)`.
pub fn lichnerowicz_eigenvalue(k: usize) -> f64 {
    let k = k as f64;
    (k - 1.0) * k * (k + 1.0) * (k + 2.0)
}

/// `Δ₀f = d/dx(x(1 − x) df/dx)`.
pub fn laplace_fs(f: &InvariantFunction) -> InvariantFunction {
    f.map_coeffs(|k, c| laplace_eigenvalue(k) * c)
}

/// Lichnérowicz operator of `ω_FS` on invariant functions.
pub fn lichnerowicz_fs(f: &InvariantFunction) -> InvariantFunction {
    f.map_coeffs(|k, c| lichnerowicz_eigenvalue(k) * c)
}

/// Decomposition of a function (mean removed) into `Ker D₀ = span{P_1}` and its
/// orthogonal complement.
#[derive(Debug, Clone, PartialEq)]
pub struct KernelSplit {
    pub mean: f64,
    pub kernel_part: InvariantFunction,
    pub perp_part: InvariantFunction,
}

impl KernelSplit {
    /// Coefficient of `P_1` in the kernel part.
    pub fn kernel_coeff(&self) -> f64 {
        self.kernel_part.coeff(1)
    }
}

pub fn project_ker(f: &InvariantFunction) -> KernelSplit {
    let kernel_part = InvariantFunction::legendre(1, f.coeff(1));
    let perp_part = f.map_coeffs(|k, c| if k <= 1 { 0.0 } else { c });
    KernelSplit {
        mean: f.mean(),
        kernel_part,
        perp_part,
    }
}

/// Solves `D₀φ = 2u` on `Ker D₀^⊥`.
pub fn solve_lichnerowicz(u: &InvariantFunction) -> Result<InvariantFunction> {
    solve_lichnerowicz_with_tol(u, DEFAULT_KERNEL_TOL)
}

pub fn solve_lichnerowicz_with_tol(u: &InvariantFunction, tol: f64) -> Result<InvariantFunction> {
    let (p0, p1) = (u.coeff(0), u.coeff(1));
    if p0.abs() > tol || p1.abs() > tol {
        return Err(LabError::KernelComponent { p0, p1, tol });
    }
    Ok(u.map_coeffs(|k, c| {
        if k <= 1 {
            0.0
        } else {
            2.0 * c / lichnerowicz_eigenvalue(k)
        }
    }))
}
