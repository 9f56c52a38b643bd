//! Inductive construction of approximate critical metrics around the
//! Fubini–Study metric.
//!
//! A state holds the base potential, optional injected perturbations
//! `q^r ψ` that spoil it on purpose, and corrections `φ_1..φ_ℓ`. At power m it
//! realizes the potential `φ_base + Σ q^r ψ + Σ_k q^k φ_k` with `q = 1/m`.
//! A step reads the `q^{ℓ+1}` coefficient `u_ℓ` of `K − C_q` off an m-sweep,
//! solves `D₀φ_ℓ = 2u_ℓ` and appends `φ_ℓ`.

use std::fmt::Write as _;
use std::sync::Arc;

use log::debug;

use crate::bergman::{c_q_f64, density};
use crate::equivariant::{self, Lift};
use crate::error::{LabError, Result};
use crate::fit::{check_powers, fit_powers, slope};
use crate::geom::{
    lichnerowicz_fs, project_ker, solve_lichnerowicz, InvariantFunction, InvariantMetric,
    MomentGrid, Profile, DEFAULT_DEGREE_CAP,
};

/// Deviations below this count as exact balance.
pub const EXACT_FLOOR: f64 = 1e-10;

/// Slack allowed below the predicted slope `ℓ + 2`.
pub const SLOPE_SLACK: f64 = 0.25;

/// Highest q-power in the extrapolation of the linearization quotient.
pub const MAX_EXTRAPOLATION_ORDER: usize = 5;

/// Allowed ratio `|v_ℓ| / ‖u_ℓ‖`.
pub const DEFAULT_KERNEL_REL: f64 = 1e-3;

#[derive(Debug, Clone)]
pub struct ApproxState {
    base: InvariantMetric,
    injected: Vec<(u32, InvariantFunction)>,
    corrections: Vec<InvariantFunction>,
}

impl ApproxState {
    pub fn new(base: InvariantMetric) -> Self {
        Self {
            base,
            injected: Vec::new(),
            corrections: Vec::new(),
        }
    }

    pub fn fubini_study(grid: Arc<MomentGrid>) -> Self {
        Self::new(InvariantMetric::fubini_study(grid))
    }

    /// Adds the perturbation `q^order ψ` to every realized potential.
    pub fn with_injection(mut self, order: u32, psi: InvariantFunction) -> Self {
        self.injected.push((order, psi));
        self
    }

    /// Appends `φ_{ℓ+1}` with its kernel and mean components removed.
    pub fn push_correction(&mut self, phi: InvariantFunction) {
        self.corrections.push(project_ker(&phi).perp_part);
    }

    pub fn base(&self) -> &InvariantMetric {
        &self.base
    }

    pub fn grid(&self) -> &Arc<MomentGrid> {
        self.base.grid()
    }

    pub fn injected(&self) -> &[(u32, InvariantFunction)] {
        &self.injected
    }

    pub fn corrections(&self) -> &[InvariantFunction] {
        &self.corrections
    }

    pub fn level(&self) -> usize {
        self.corrections.len()
    }

    /// `φ_base + Σ q^r ψ + Σ_k q^k φ_k` at power m.
    pub fn potential_at(&self, m: u32) -> InvariantFunction {
        let q = 1.0 / m as f64;
        let mut phi = self.base.potential().clone();
        for (order, psi) in &self.injected {
            phi = &phi + &(psi * q.powi(*order as i32));
        }
        for (k, c) in self.corrections.iter().enumerate() {
            phi = &phi + &(c * q.powi(k as i32 + 1));
        }
        phi
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        writeln!(out, "nodes = {}", self.grid().node_count()).unwrap();
        writeln!(out, "[base]").unwrap();
        out.push_str(&self.base.potential().to_text());
        for (order, psi) in &self.injected {
            writeln!(out, "[inject {order}]").unwrap();
            out.push_str(&psi.to_text());
        }
        for (k, c) in self.corrections.iter().enumerate() {
            writeln!(out, "[correction {}]", k + 1).unwrap();
            out.push_str(&c.to_text());
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self> {
        enum Section {
            Base,
            Inject(u32),
            Correction,
        }
        let mut nodes: Option<usize> = None;
        let mut sections: Vec<(Section, usize, String)> = Vec::new();
        for (idx, raw) in text.lines().enumerate() {
            let line = raw.trim();
            let err = |message: String| LabError::Parse {
                line: idx + 1,
                message,
            };
            if let Some(header) = line.strip_prefix('[').and_then(|l| l.strip_suffix(']')) {
                let mut words = header.split_whitespace();
                let section = match (words.next(), words.next()) {
                    (Some("base"), None) => Section::Base,
                    (Some("inject"), Some(order)) => Section::Inject(
                        order
                            .parse()
                            .map_err(|_| err(format!("bad injection order `{order}`")))?,
                    ),
                    (Some("correction"), Some(k)) => {
                        let expected = sections
                            .iter()
                            .filter(|s| matches!(s.0, Section::Correction))
                            .count()
                            + 1;
                        if k != expected.to_string() {
                            return Err(err(format!("expected correction {expected}, got `{k}`")));
                        }
                        Section::Correction
                    }
                    _ => return Err(err(format!("unknown section `{header}`"))),
                };
                sections.push((section, idx + 1, String::new()));
            } else if let Some((_, _, body)) = sections.last_mut() {
                body.push_str(raw);
                body.push('\n');
            } else if !line.is_empty() && !line.starts_with('#') {
                let value = line
                    .strip_prefix("nodes")
                    .and_then(|l| l.trim_start().strip_prefix('='))
                    .ok_or_else(|| err(format!("expected `nodes = N`, got `{line}`")))?;
                nodes = Some(
                    value
                        .trim()
                        .parse()
                        .map_err(|_| err(format!("bad node count `{}`", value.trim())))?,
                );
            }
        }
        let nodes = nodes.ok_or(LabError::Parse {
            line: 0,
            message: "missing `nodes = N`".into(),
        })?;
        let grid = Arc::new(MomentGrid::new(nodes)?);
        let mut base = None;
        let mut injected = Vec::new();
        let mut corrections = Vec::new();
        for (section, header_line, body) in sections {
            let f = InvariantFunction::from_text(&body).map_err(|e| match e {
                LabError::Parse { line, message } if line > 0 => LabError::Parse {
                    line: header_line + line,
                    message,
                },
                other => other,
            })?;
            match section {
                Section::Base => base = Some(f),
                Section::Inject(order) => injected.push((order, f)),
                Section::Correction => corrections.push(f),
            }
        }
        let base = base.ok_or(LabError::Parse {
            line: 0,
            message: "missing [base] section".into(),
        })?;
        Ok(Self {
            base: InvariantMetric::new(grid, base)?,
            injected,
            corrections,
        })
    }
}

/// The metric realized by `state` at power m.
pub fn realize(state: &ApproxState, m: u32) -> Result<InvariantMetric> {
    if m == 0 {
        return Err(LabError::InvalidPower(m));
    }
    if state.injected.is_empty() && state.corrections.is_empty() {
        return Ok(state.base.clone());
    }
    InvariantMetric::new(state.grid().clone(), state.potential_at(m)).map_err(|e| match e {
        LabError::KahlerCone { x, value, .. } => LabError::Realization { m, x, value },
        other => other,
    })
}

/// The `q^order` coefficient of `K − C_q`, split by the kernel projection.
#[derive(Debug, Clone)]
pub struct DeviationCoefficient {
    pub order: u32,
    /// Fitted coefficient at the grid nodes.
    pub raw: Profile,
    /// Perpendicular part `u`.
    pub u: InvariantFunction,
    /// `P_1` coefficient `v`.
    pub v: f64,
    pub mean: f64,
    /// Sup-norm of `u` over the grid.
    pub u_norm: f64,
    pub residual: f64,
}

/// Fits `K − C_q ≈ c q^order + d q^{order+1}` across `m_list` node by node.
pub fn deviation_coefficient(
    state: &ApproxState,
    m_list: &[u32],
    order: u32,
) -> Result<DeviationCoefficient> {
    check_powers(m_list, 3)?;
    let data = m_list
        .iter()
        .map(|&m| {
            let g = realize(state, m)?;
            let cq = c_q_f64(m);
            Ok(density(m, &g)?
                .values
                .values
                .iter()
                .map(|k| k - cq)
                .collect())
        })
        .collect::<Result<Vec<Vec<f64>>>>()?;
    let o = order as i32;
    let fit = fit_powers(m_list, &[o, o + 1], &data)?;
    let residual = (0..m_list.len())
        .map(|r| fit.residual_sup(r))
        .fold(0.0, f64::max);
    let raw = Profile::new(fit.coefficients[0].clone());
    let grid = state.grid();
    let coefficient = InvariantFunction::project(grid, &raw.values, DEFAULT_DEGREE_CAP);
    let split = project_ker(&coefficient);
    Ok(DeviationCoefficient {
        order,
        u_norm: split.perp_part.sup_norm(grid),
        v: split.kernel_coeff(),
        mean: split.mean,
        u: split.perp_part,
        raw,
        residual,
    })
}

#[derive(Debug, Clone, Copy)]
pub struct StepOptions {
    /// Extra defect-correction sweeps after the first solve.
    pub refine_sweeps: usize,
    /// Sweeps stop once the update has sup-norm below this.
    pub refine_tol: f64,
    /// Allowed `|v| / ‖u‖`.
    pub kernel_rel: f64,
    /// Lower bound on `‖u‖` when forming the kernel tolerance.
    pub floor: f64,
}

impl Default for StepOptions {
    fn default() -> Self {
        Self {
            refine_sweeps: 20,
            refine_tol: 1e-12,
            kernel_rel: DEFAULT_KERNEL_REL,
            floor: 1e-8,
        }
    }
}

impl StepOptions {
    /// The plain linearized step, without refinement sweeps.
    pub fn single() -> Self {
        Self {
            refine_sweeps: 0,
            ..Self::default()
        }
    }

    pub fn kernel_tol(&self, u_norm: f64) -> f64 {
        self.kernel_rel * u_norm.max(self.floor)
    }
}

#[derive(Debug, Clone)]
pub struct StepReport {
    pub level: usize,
    /// Coefficient extracted at the incoming state.
    pub initial: DeviationCoefficient,
    /// Sup-norm of the last refinement update (of the first solve if none ran).
    pub last_update: f64,
    pub sweeps: usize,
}

/// One construction step; returns the new state and a report.
pub fn step(state: &ApproxState, m_list: &[u32]) -> Result<ApproxState> {
    step_with(state, m_list, StepOptions::default()).map(|(s, _)| s)
}

pub fn step_with(
    state: &ApproxState,
    m_list: &[u32],
    options: StepOptions,
) -> Result<(ApproxState, StepReport)> {
    let level = state.level() + 1;
    let order = level as u32 + 1;
    let grid = state.grid().clone();
    let extract = |s: &ApproxState| -> Result<(DeviationCoefficient, InvariantFunction)> {
        let dev = deviation_coefficient(s, m_list, order)?;
        let limit = 10.0 * options.kernel_tol(dev.u_norm);
        if dev.v.abs() > limit {
            return Err(LabError::KernelResidual { v: dev.v, limit });
        }
        let phi = solve_lichnerowicz(&dev.u)?;
        Ok((dev, phi))
    };

    let (initial, mut phi) = extract(state)?;
    let mut last_update = phi.sup_norm(&grid);
    let mut next = state.clone();
    next.push_correction(phi.clone());
    let mut sweeps = 0;
    while sweeps < options.refine_sweeps && last_update > options.refine_tol {
        let (_, delta) = extract(&next)?;
        last_update = delta.sup_norm(&grid);
        phi = &phi + &delta;
        next.corrections.pop();
        next.push_correction(phi.clone());
        sweeps += 1;
        debug!("level {level} sweep {sweeps}: update {last_update:e}");
    }
    Ok((
        next,
        StepReport {
            level,
            initial,
            last_update,
            sweeps,
        },
    ))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum OrderVerdict {
    /// All deviations are below [`EXACT_FLOOR`].
    Exact,
    Slope(f64),
}

impl OrderVerdict {
    /// Passes at `slope ≥ level + 2 − SLOPE_SLACK` or on exact balance.
    pub fn passes(&self, level: usize) -> bool {
        match *self {
            OrderVerdict::Exact => true,
            OrderVerdict::Slope(s) => s >= level as f64 + 2.0 - SLOPE_SLACK,
        }
    }

    pub fn slope(&self) -> Option<f64> {
        match *self {
            OrderVerdict::Exact => None,
            OrderVerdict::Slope(s) => Some(s),
        }
    }
}

impl std::fmt::Display for OrderVerdict {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            OrderVerdict::Exact => write!(f, "exact"),
            OrderVerdict::Slope(s) => write!(f, "{s:.16e}"),
        }
    }
}

/// `sup_x |K − C_q|` of the realized metric at each power.
pub fn sup_deviations(state: &ApproxState, m_list: &[u32]) -> Result<Vec<f64>> {
    m_list
        .iter()
        .map(|&m| Ok(density(m, &realize(state, m)?)?.sup_deviation()))
        .collect()
}

/// Least-squares slope of `log sup|K − C_q|` against `log q`.
pub fn verify_order(state: &ApproxState, m_list: &[u32]) -> Result<OrderVerdict> {
    check_powers(m_list, 3)?;
    let deviations = sup_deviations(state, m_list)?;
    Ok(order_from_deviations(m_list, &deviations))
}

pub fn order_from_deviations(m_list: &[u32], deviations: &[f64]) -> OrderVerdict {
    if deviations.iter().all(|&d| d < EXACT_FLOOR) {
        return OrderVerdict::Exact;
    }
    let xs: Vec<f64> = m_list.iter().map(|&m| -(m as f64).ln()).collect();
    let ys: Vec<f64> = deviations.iter().map(|d| d.ln()).collect();
    OrderVerdict::Slope(slope(&xs, &ys))
}

/// The equivariant orthogonality check on the metrics realized by `state`.
pub fn verify_47(state: &ApproxState, lift: &Lift, m_list: &[u32]) -> Result<f64> {
    let metrics = m_list
        .iter()
        .map(|&m| Ok((m, realize(state, m)?)))
        .collect::<Result<Vec<_>>>()?;
    equivariant::verify_47(metrics.iter().map(|(m, g)| (*m, g)), lift)
}

#[derive(Debug, Clone)]
pub struct LinearizationReport {
    /// Extrapolated `q → 0` limit of the difference quotient.
    pub limit: Profile,
    pub predicted: Profile,
    pub sup_error: f64,
    /// `sup_error / sup|predicted|`, or the plain error when the prediction vanishes.
    pub relative_error: f64,
}

/// Compares `[K(q, h_FS e^{−q^ℓ φ}) − K(q, h_FS)]/q^{ℓ+1}` in the limit with `−D₀φ/2`.
pub fn linearization_check(
    phi: &InvariantFunction,
    level: u32,
    m_list: &[u32],
    grid: &Arc<MomentGrid>,
) -> Result<LinearizationReport> {
    let predicted = lichnerowicz_fs(phi) * -0.5;
    linearization_check_against(phi, level, m_list, grid, &predicted)
}

/// Degree of the polynomial in q used to extrapolate the difference quotient:
/// as high as [`MAX_EXTRAPOLATION_ORDER`] while keeping two spare powers.
pub fn extrapolation_order(powers: usize) -> usize {
    powers.saturating_sub(3).clamp(1, MAX_EXTRAPOLATION_ORDER)
}

/// As [`linearization_check`], against an arbitrary predicted profile.
pub fn linearization_check_against(
    phi: &InvariantFunction,
    level: u32,
    m_list: &[u32],
    grid: &Arc<MomentGrid>,
    predicted: &InvariantFunction,
) -> Result<LinearizationReport> {
    let order = extrapolation_order(m_list.len());
    linearization_check_with_order(phi, level, m_list, grid, predicted, order)
}

pub fn linearization_check_with_order(
    phi: &InvariantFunction,
    level: u32,
    m_list: &[u32],
    grid: &Arc<MomentGrid>,
    predicted: &InvariantFunction,
    order: usize,
) -> Result<LinearizationReport> {
    check_powers(m_list, order + 2)?;
    let fs = InvariantMetric::fubini_study(grid.clone());
    let data = m_list
        .iter()
        .map(|&m| {
            let q = 1.0 / m as f64;
            let g = InvariantMetric::new(grid.clone(), phi * q.powi(level as i32)).map_err(
                |e| match e {
                    LabError::KahlerCone { x, value, .. } => LabError::Realization { m, x, value },
                    other => other,
                },
            )?;
            let perturbed = density(m, &g)?.values.values;
            let reference = density(m, &fs)?.values.values;
            let scale = q.powi(level as i32 + 1);
            Ok(perturbed
                .iter()
                .zip(&reference)
                .map(|(a, b)| (a - b) / scale)
                .collect())
        })
        .collect::<Result<Vec<Vec<f64>>>>()?;
    let exponents: Vec<i32> = (0..=order as i32).collect();
    let fit = fit_powers(m_list, &exponents, &data)?;
    let limit = Profile::new(fit.coefficients[0].clone());
    let predicted = Profile::new(predicted.sample(grid));
    let sup_error = limit.sup_distance(&predicted);
    let scale = predicted.sup_norm();
    Ok(LinearizationReport {
        relative_error: if scale > 0.0 {
            sup_error / scale
        } else {
            sup_error
        },
        limit,
        predicted,
        sup_error,
    })
}
