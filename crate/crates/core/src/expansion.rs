//! Tian–Zelditch coefficients extracted from m-sweeps of the density function.

use crate::bergman::density;
use crate::error::{LabError, Result};
use crate::fit::{check_powers, fit_powers};
use crate::geom::{InvariantMetric, Profile};

/// Powers below this are too far from the asymptotic regime to enter a fit.
pub const MIN_FIT_POWER: u32 = 8;

/// Default bound on the residual at the largest power before a fit is flagged.
pub const DEFAULT_RESIDUAL_THRESHOLD: f64 = 1e-4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum FitOrder {
    /// `K − 1 ≈ a₁q + a₂q²`.
    #[default]
    Quadratic,
    /// `K − 1 ≈ a₁q + a₂q² + a₃q³`, needs at least five powers.
    Cubic,
}

impl FitOrder {
    fn exponents(self) -> &'static [i32] {
        match self {
            FitOrder::Quadratic => &[1, 2],
            FitOrder::Cubic => &[1, 2, 3],
        }
    }

    fn min_powers(self) -> usize {
        match self {
            FitOrder::Quadratic => 3,
            FitOrder::Cubic => 5,
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct FitOptions {
    pub order: FitOrder,
    pub residual_threshold: f64,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self {
            order: FitOrder::Quadratic,
            residual_threshold: DEFAULT_RESIDUAL_THRESHOLD,
        }
    }
}

#[derive(Debug, Clone)]
pub struct ExpansionFit {
    pub m_list: Vec<u32>,
    pub a1: Profile,
    pub a2: Profile,
    pub a3: Option<Profile>,
    /// Sup-norm of the fit residual at the largest power.
    pub residual_norm: f64,
    pub condition: f64,
    pub reliable: bool,
}

fn validate(m_list: &[u32], order: FitOrder) -> Result<()> {
    check_powers(m_list, order.min_powers())?;
    if let Some(&m) = m_list.iter().find(|&&m| m < MIN_FIT_POWER) {
        return Err(LabError::PowerTooSmall {
            m,
            min: MIN_FIT_POWER,
        });
    }
    Ok(())
}

pub fn fit_expansion(g: &InvariantMetric, m_list: &[u32]) -> Result<ExpansionFit> {
    fit_expansion_with(g, m_list, FitOptions::default())
}

pub fn fit_expansion_with(
    g: &InvariantMetric,
    m_list: &[u32],
    options: FitOptions,
) -> Result<ExpansionFit> {
    validate(m_list, options.order)?;
    let data = m_list
        .iter()
        .map(|&m| {
            Ok(density(m, g)?
                .values
                .values
                .iter()
                .map(|k| k - 1.0)
                .collect())
        })
        .collect::<Result<Vec<Vec<f64>>>>()?;
    let fit = fit_powers(m_list, options.order.exponents(), &data)?;
    let largest = m_list
        .iter()
        .enumerate()
        .max_by_key(|&(_, &m)| m)
        .map(|(i, _)| i)
        .expect("validated non-empty");
    let residual_norm = fit.residual_sup(largest);
    let mut coefficients = fit.coefficients.into_iter().map(Profile::new);
    let a1 = coefficients.next().expect("a1 column");
    let a2 = coefficients.next().expect("a2 column");
    let a3 = coefficients.next();
    Ok(ExpansionFit {
        m_list: m_list.to_vec(),
        a1,
        a2,
        a3,
        residual_norm,
        condition: fit.condition,
        reliable: residual_norm <= options.residual_threshold,
    })
}

/// Fit with a free constant term, `K ≈ a₀ + a₁q + a₂q²`; returns the `a₀` profile.
pub fn fit_leading_term(g: &InvariantMetric, m_list: &[u32]) -> Result<Profile> {
    validate(m_list, FitOrder::Quadratic)?;
    let data = m_list
        .iter()
        .map(|&m| Ok(density(m, g)?.values.values))
        .collect::<Result<Vec<_>>>()?;
    let fit = fit_powers(m_list, &[0, 1, 2], &data)?;
    Ok(Profile::new(fit.coefficients[0].clone()))
}

/// Sup-norm distance between the fitted `a₁` and `σ/2`.
pub fn verify_a1(g: &InvariantMetric, m_list: &[u32]) -> Result<f64> {
    let fit = fit_expansion(g, m_list)?;
    Ok(a1_discrepancy(g, &fit))
}

pub fn a1_discrepancy(g: &InvariantMetric, fit: &ExpansionFit) -> f64 {
    let half_sigma = g.scalar_curvature().map(|s| 0.5 * s);
    fit.a1.sup_distance(&half_sigma)
}
