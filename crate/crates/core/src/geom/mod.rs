//! S¹-invariant Kähler geometry on (P¹, O(1)) in the moment coordinate.

mod legendre;
mod metric;
mod operators;
mod quadrature;
mod sample;

pub use legendre::{legendre_at, InvariantFunction, DEFAULT_DEGREE_CAP};
pub use metric::{integrate, moment_map, scalar_curvature, InvariantMetric, Profile};
pub use operators::{
    laplace_eigenvalue, laplace_fs, lichnerowicz_eigenvalue, lichnerowicz_fs, project_ker,
    solve_lichnerowicz, solve_lichnerowicz_with_tol, KernelSplit, DEFAULT_KERNEL_TOL,
};
pub use quadrature::{default_node_count, MomentGrid, MIN_DEFAULT_NODES};
pub use sample::{random_potential, seeded_potentials};
