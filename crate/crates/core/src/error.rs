use thiserror::Error;

pub type Result<T> = std::result::Result<T, LabError>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LabError {
    /// `1 + Δ₀φ` is not positive at some grid node, so `ω_φ` is not Kähler.
    #[error("potential leaves the Kähler cone: 1 + Δφ = {value:e} at x = {x} (node {node})")]
    KahlerCone { node: usize, x: f64, value: f64 },

    /// Same as [`LabError::KahlerCone`], raised while realizing a q-dependent metric.
    #[error("realized metric at m = {m} leaves the Kähler cone: 1 + Δφ = {value:e} at x = {x}")]
    Realization { m: u32, x: f64, value: f64 },

    #[error("profile sampled on {found} nodes, metric grid has {expected}")]
    GridMismatch { expected: usize, found: usize },

    #[error("invalid quadrature size {0}")]
    InvalidGrid(usize),

    #[error("power m must be at least 1, got {0}")]
    InvalidPower(u32),

    #[error("input has kernel components (P0 = {p0:e}, P1 = {p1:e}) above tolerance {tol:e}")]
    KernelComponent { p0: f64, p1: f64, tol: f64 },

    #[error("fit needs at least {needed} distinct powers, got {got}")]
    TooFewPowers { needed: usize, got: usize },

    #[error("fit power {m} is below the minimum {min}")]
    PowerTooSmall { m: u32, min: u32 },

    #[error("power list must be strictly increasing: {0:?}")]
    UnsortedPowers(Vec<u32>),

    #[error("ill-conditioned power fit (condition number {condition:e})")]
    IllConditioned { condition: f64 },

    #[error("lift constants differ across powers: c({m0}) = {c0}, c({m}) = {c}")]
    LiftHypothesis {
        m0: u32,
        c0: String,
        m: u32,
        c: String,
    },

    #[error("lift has no constant for power {0}")]
    MissingLiftPower(u32),

    #[error("kernel residual |v| = {v:e} exceeds {limit:e}")]
    KernelResidual { v: f64, limit: f64 },

    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
}
