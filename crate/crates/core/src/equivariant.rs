//! Lifts of the C*-action `z∂/∂z`, SL-normalized weights and the obstruction
//! character.
//!
//! A lift to O(m) is recorded by one rational `c_ρ(m)`: the linearization
//! constant divided by `m`, so that lifts at different powers compare on L.
//! The holomorphy potential of the lifted action is `θ = c_ρ − x̃` and the
//! character is `χ_m = 2∫θ ω_φ`.

use std::collections::BTreeMap;

use num_rational::Ratio;
use num_traits::{ToPrimitive, Zero};

use crate::bergman::section_norms;
use crate::error::{LabError, Result};
use crate::fit::check_powers;
use crate::geom::{InvariantMetric, Profile};

/// Tolerance used by the character checks.
pub const CHARACTER_TOL: f64 = 1e-8;

/// Number of consecutive equal constants a lift family needs to count as
/// stable: `n + 2` on a curve.
pub const MIN_STABLE_TAIL: usize = 3;

pub type Rational = Ratio<i64>;

pub fn rational_to_f64(r: &Rational) -> f64 {
    r.to_f64().expect("i64 ratios are finite")
}

/// Per-power lift constants, with an optional fallback for unlisted powers.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Lift {
    per_power: BTreeMap<u32, Rational>,
    fallback: Option<Rational>,
}

impl Lift {
    /// The same constant at every power.
    pub fn constant(c: Rational) -> Self {
        Self {
            per_power: BTreeMap::new(),
            fallback: Some(c),
        }
    }

    /// The SL-normalized lift, `c_ρ(m) = 1/2`.
    pub fn sl() -> Self {
        Self::constant(Rational::new(1, 2))
    }

    pub fn per_power(pairs: impl IntoIterator<Item = (u32, Rational)>) -> Self {
        Self {
            per_power: pairs.into_iter().collect(),
            fallback: None,
        }
    }

    /// Overrides the constant at one power.
    pub fn with_power(mut self, m: u32, c: Rational) -> Self {
        self.per_power.insert(m, c);
        self
    }

    pub fn fallback(&self) -> Option<Rational> {
        self.fallback
    }

    pub fn get(&self, m: u32) -> Option<Rational> {
        self.per_power.get(&m).copied().or(self.fallback)
    }

    pub fn constant_at(&self, m: u32) -> Result<Rational> {
        self.get(m).ok_or(LabError::MissingLiftPower(m))
    }

    pub fn is_sl_at(&self, m: u32) -> bool {
        self.get(m) == Some(Rational::new(1, 2))
    }
}

/// C*-weights `α_0..α_m` of the monomial sections of O(m).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WeightVector {
    pub power: u32,
    pub weights: Vec<Rational>,
}

impl WeightVector {
    pub fn sum(&self) -> Rational {
        self.weights.iter().fold(Rational::zero(), |a, w| a + w)
    }
}

/// Trace-free weights `α_i = i − m/2`.
pub fn sl_weights(m: u32) -> WeightVector {
    let half = Rational::new(m as i64, 2);
    WeightVector {
        power: m,
        weights: (0..=m as i64)
            .map(|i| Rational::from_integer(i) - half)
            .collect(),
    }
}

/// `θ_X = c_ρ(m) − x̃` at the grid nodes.
pub fn holomorphy_potential(g: &InvariantMetric, lift: &Lift, m: u32) -> Result<Profile> {
    let c = rational_to_f64(&lift.constant_at(m)?);
    Ok(g.moment_map().map(|x| c - x))
}

/// `χ_m = 2∫θ_X ω_φ`.
pub fn chi(lift: &Lift, m: u32, g: &InvariantMetric) -> Result<f64> {
    let theta = holomorphy_potential(g, lift, m)?;
    Ok(2.0 * g.integrate(&theta)?)
}

/// The character at power m, `m²·χ_m`.
pub fn obstruction(lift: &Lift, m: u32, g: &InvariantMetric) -> Result<f64> {
    let mf = m as f64;
    Ok(mf * mf * chi(lift, m, g)?)
}

/// Both sides of the pullback identity for the SL lift, at the grid nodes.
#[derive(Debug, Clone)]
pub struct PullbackSides {
    pub power: u32,
    /// `h_m^{−1}(X h_m)_ρ`, from the moment map of the pullback metric.
    pub lhs: Profile,
    /// `−Σ α_i |τ_i|² / (m Σ |τ_i|²)`, from the section norms.
    pub rhs: Profile,
}

impl PullbackSides {
    pub fn gap(&self) -> f64 {
        self.lhs.sup_distance(&self.rhs)
    }
}

/// The weighted section-norm side of the pullback identity.
pub fn weighted_norm_ratio(m: u32, g: &InvariantMetric) -> Result<Profile> {
    let (_, norms) = section_norms(m, g)?;
    let alphas: Vec<f64> = sl_weights(m).weights.iter().map(rational_to_f64).collect();
    let mf = m as f64;
    Ok(Profile::new(
        norms
            .rows
            .iter()
            .map(|row| {
                let total: f64 = row.iter().sum();
                let weighted: f64 = row.iter().zip(&alphas).map(|(n, a)| n * a).sum();
                -weighted / (mf * total)
            })
            .collect(),
    ))
}

pub fn pullback_sides(m: u32, g: &InvariantMetric) -> Result<PullbackSides> {
    let pulled = crate::bergman::fs_pullback(m, g)?;
    let lhs = holomorphy_potential(&pulled, &Lift::sl(), m)?;
    let rhs = weighted_norm_ratio(m, g)?;
    Ok(PullbackSides { power: m, lhs, rhs })
}

/// Sup-norm gap between the two sides of the pullback identity.
pub fn verify_46(m: u32, g: &InvariantMetric) -> Result<f64> {
    Ok(pullback_sides(m, g)?.gap())
}

/// `max_m |2∫θ_X ω|` over metrics realized at each power.
pub fn verify_47<'a>(
    realized: impl IntoIterator<Item = (u32, &'a InvariantMetric)>,
    lift: &Lift,
) -> Result<f64> {
    let mut worst: f64 = 0.0;
    for (m, g) in realized {
        worst = worst.max(chi(lift, m, g)?.abs());
    }
    Ok(worst)
}

#[derive(Debug, Clone, PartialEq)]
pub struct CharacterRow {
    pub power: u32,
    pub lift_constant: Rational,
    pub chi: f64,
    pub obstruction: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TheoremBReport {
    pub rows: Vec<CharacterRow>,
    /// Mean of χ over the powers.
    pub common_chi: f64,
    /// Largest pairwise spread of χ.
    pub max_deviation: f64,
    pub sl_lift: bool,
    /// Every obstruction value is below [`CHARACTER_TOL`].
    pub vanishes: bool,
}

impl TheoremBReport {
    pub fn m_independent(&self) -> bool {
        self.max_deviation <= CHARACTER_TOL
    }

    /// χ is m-independent and, for the SL lift, the obstruction vanishes.
    pub fn pass(&self) -> bool {
        self.m_independent() && (!self.sl_lift || self.vanishes)
    }

    pub fn reason(&self) -> Option<&'static str> {
        if !self.m_independent() {
            Some("character depends on m")
        } else if !self.vanishes {
            Some("nonzero character")
        } else {
            None
        }
    }
}

/// χ and the obstruction across powers sharing one lift constant.
pub fn theorem_b_check(lift: &Lift, m_list: &[u32], g: &InvariantMetric) -> Result<TheoremBReport> {
    check_powers(m_list, MIN_STABLE_TAIL)?;
    let c0 = lift.constant_at(m_list[0])?;
    for &m in &m_list[1..] {
        let c = lift.constant_at(m)?;
        if c != c0 {
            return Err(LabError::LiftHypothesis {
                m0: m_list[0],
                c0: c0.to_string(),
                m,
                c: c.to_string(),
            });
        }
    }
    let rows = m_list
        .iter()
        .map(|&m| {
            let chi = chi(lift, m, g)?;
            let mf = m as f64;
            Ok(CharacterRow {
                power: m,
                lift_constant: c0,
                chi,
                obstruction: mf * mf * chi,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let (lo, hi) = rows
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), r| {
            (lo.min(r.chi), hi.max(r.chi))
        });
    Ok(TheoremBReport {
        common_chi: rows.iter().map(|r| r.chi).sum::<f64>() / rows.len() as f64,
        max_deviation: hi - lo,
        sl_lift: c0 == Rational::new(1, 2),
        vanishes: rows.iter().all(|r| r.obstruction.abs() <= CHARACTER_TOL),
        rows,
    })
}

/// First 1-based index `k₀` from which `c_ρ(m(k))` stays constant, provided the
/// constant tail has at least [`MIN_STABLE_TAIL`] entries.
pub fn lift_stability_check(lift: &Lift, sequence: &[u32]) -> Option<usize> {
    let constants: Vec<Option<Rational>> = sequence.iter().map(|&m| lift.get(m)).collect();
    let last = (*constants.last()?)?;
    let start = constants
        .iter()
        .rposition(|c| *c != Some(last))
        .map_or(0, |i| i + 1);
    (constants.len() - start >= MIN_STABLE_TAIL).then_some(start + 1)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geom::{seeded_potentials, InvariantFunction, MomentGrid};
    use proptest::prelude::*;
    use std::sync::Arc;

    fn r(n: i64, d: i64) -> Rational {
        Rational::new(n, d)
    }

    fn grid() -> Arc<MomentGrid> {
        Arc::new(MomentGrid::for_max_power(64))
    }

    fn metric(phi: InvariantFunction) -> InvariantMetric {
        InvariantMetric::new(grid(), phi).unwrap()
    }

    #[test]
    fn sl_weight_examples() {
        assert_eq!(sl_weights(2).weights, vec![r(-1, 1), r(0, 1), r(1, 1)]);
        assert_eq!(
            sl_weights(3).weights,
            vec![r(-3, 2), r(-1, 2), r(1, 2), r(3, 2)]
        );
        for m in 1..40 {
            let w = sl_weights(m);
            assert!(w.sum().is_zero());
            assert!(w.weights.windows(2).all(|p| p[1] - p[0] == r(1, 1)));
        }
    }

    #[test]
    fn holomorphy_potential_examples() {
        let fs = InvariantMetric::fubini_study(grid());
        let sl = holomorphy_potential(&fs, &Lift::sl(), 4).unwrap();
        let zero = holomorphy_potential(&fs, &Lift::constant(r(0, 1)), 4).unwrap();
        for ((a, b), &x) in sl.values.iter().zip(&zero.values).zip(fs.grid().nodes()) {
            assert!((a - (0.5 - x)).abs() < 1e-15);
            assert!((b + x).abs() < 1e-15);
        }
        let g = metric(InvariantFunction::new(vec![0.0, 0.05, 0.04, -0.02]));
        let c = 0.3;
        for (x, expected) in [(0.0, c), (1.0, c - 1.0)] {
            assert!((c - g.moment_map_at(x) - expected).abs() < 1e-15);
        }
        assert_eq!(
            holomorphy_potential(&fs, &Lift::per_power([(2, r(1, 2))]), 3),
            Err(LabError::MissingLiftPower(3))
        );
    }

    #[test]
    fn chi_and_obstruction_examples() {
        let fs = InvariantMetric::fubini_study(grid());
        let zero = Lift::constant(r(0, 1));
        assert!(chi(&Lift::sl(), 4, &fs).unwrap().abs() < 1e-15);
        assert!((chi(&zero, 4, &fs).unwrap() + 1.0).abs() < 1e-14);
        assert!(obstruction(&Lift::sl(), 8, &fs).unwrap().abs() < 1e-12);
        assert!((obstruction(&zero, 8, &fs).unwrap() + 64.0).abs() < 1e-12);
        let g = metric(InvariantFunction::legendre(2, 0.1));
        assert!(chi(&Lift::sl(), 16, &g).unwrap().abs() < 1e-8);
        for (n, d) in [(1, 3), (-2, 5), (7, 4)] {
            let c = r(n, d);
            let expected = 2.0 * 64.0 * (rational_to_f64(&c) - 0.5);
            let value = obstruction(&Lift::constant(c), 8, &g).unwrap();
            assert!((value - expected).abs() < 1e-10);
        }
    }

    #[test]
    fn pullback_identity_at_fubini_study() {
        let fs = InvariantMetric::fubini_study(grid());
        for m in [2u32, 8, 32] {
            let sides = pullback_sides(m, &fs).unwrap();
            assert!(sides.gap() < 1e-8, "m = {m}: {}", sides.gap());
            for (v, &x) in sides.rhs.values.iter().zip(fs.grid().nodes()) {
                assert!((v - (0.5 - x)).abs() < 1e-12);
            }
        }
        // explicit m = 2 case at x = 1/2: norms (3/4, 3/2, 3/4), weights (−1, 0, 1)
        let (gram, _) = section_norms(2, &fs).unwrap();
        let norms = crate::bergman::section_norms_at(&gram, &fs, 0.5);
        for (a, b) in norms.iter().zip([0.75, 1.5, 0.75]) {
            assert!((a - b).abs() < 1e-14);
        }
        let alphas = sl_weights(2).weights;
        let numerator: f64 = norms
            .iter()
            .zip(&alphas)
            .map(|(n, a)| n * rational_to_f64(a))
            .sum();
        assert!(numerator.abs() < 1e-15);
    }

    #[test]
    fn pullback_identity_near_the_pole() {
        // only i = 0 survives as x → 0, so the right side tends to −α_0/m = 1/2
        let g = metric(InvariantFunction::legendre(2, 0.1));
        for m in [2u32, 8, 32] {
            let rhs = weighted_norm_ratio(m, &g).unwrap();
            let x0 = g.grid().nodes()[0];
            assert!((rhs.values[0] - 0.5).abs() < 2.0 * m as f64 * x0, "m = {m}");
        }
    }

    #[test]
    fn pullback_identity_for_perturbed_metrics() {
        for phi in [
            InvariantFunction::legendre(2, 0.1),
            InvariantFunction::new(vec![0.0, 0.05, 0.04, -0.02, 0.01]),
        ] {
            let g = metric(phi);
            for m in [2u32, 8, 32] {
                let gap = verify_46(m, &g).unwrap();
                assert!(gap < 1e-8, "m = {m}: {gap:e}");
            }
        }
    }

    #[test]
    fn orthogonality_is_lift_sensitive() {
        let fs = InvariantMetric::fubini_study(grid());
        let g = metric(InvariantFunction::legendre(3, 0.05));
        let realized = [(16, &fs), (32, &g)];
        assert!(verify_47(realized, &Lift::sl()).unwrap() < 1e-8);
        let zero = verify_47(realized, &Lift::constant(r(0, 1))).unwrap();
        assert!((zero - 1.0).abs() < 1e-12);
    }

    #[test]
    fn theorem_b_examples() {
        let m_list = [4, 8, 16];
        for g in [
            InvariantMetric::fubini_study(grid()),
            metric(InvariantFunction::legendre(2, 0.1)),
        ] {
            let report = theorem_b_check(&Lift::sl(), &m_list, &g).unwrap();
            assert!(report.pass() && report.vanishes && report.sl_lift);
            assert!(report.max_deviation < 1e-8);
            assert_eq!(report.reason(), None);
        }
        let fs = InvariantMetric::fubini_study(grid());
        let report = theorem_b_check(&Lift::constant(r(0, 1)), &m_list, &fs).unwrap();
        assert!(report.m_independent() && !report.vanishes);
        assert!(report.rows.iter().all(|row| (row.chi + 1.0).abs() < 1e-12));
        assert!((report.rows[2].obstruction + 256.0).abs() < 1e-10);
        assert_eq!(report.reason(), Some("nonzero character"));

        let mixed = Lift::sl().with_power(8, r(0, 1));
        assert!(matches!(
            theorem_b_check(&mixed, &m_list, &fs),
            Err(LabError::LiftHypothesis { m: 8, .. })
        ));
        assert!(matches!(
            theorem_b_check(&Lift::sl(), &[4, 8], &fs),
            Err(LabError::TooFewPowers { .. })
        ));
    }

    #[test]
    fn lift_stability_examples() {
        let seq = [2, 4, 8, 16];
        assert_eq!(lift_stability_check(&Lift::sl(), &seq), Some(1));
        let late = Lift::sl().with_power(2, r(0, 1));
        assert_eq!(lift_stability_check(&late, &seq), Some(2));
        let inverse = Lift::per_power(seq.iter().map(|&m| (m, r(1, m as i64))));
        assert_eq!(lift_stability_check(&inverse, &seq), None);
        let short_tail = Lift::sl().with_power(2, r(0, 1)).with_power(4, r(1, 3));
        assert_eq!(lift_stability_check(&short_tail, &seq), None);
        assert_eq!(lift_stability_check(&Lift::sl(), &[]), None);
    }

    #[test]
    fn character_is_metric_and_power_independent() {
        let metrics: Vec<_> = seeded_potentials(3, 4).into_iter().map(metric).collect();
        for (n, d) in [(1, 2), (0, 1), (3, 7)] {
            let lift = Lift::constant(r(n, d));
            let reference = 2.0 * (n as f64 / d as f64 - 0.5);
            for g in &metrics {
                for m in [4, 8, 16] {
                    assert!((chi(&lift, m, g).unwrap() - reference).abs() < 1e-8);
                }
            }
        }
    }

    proptest! {
        #[test]
        fn chi_is_affine_in_the_lift(a in -50i64..50, b in -50i64..50, d in 1i64..20) {
            let g = metric(InvariantFunction::new(vec![0.0, 0.03, -0.05, 0.02]));
            let (ca, cb) = (r(a, d), r(b, d));
            let diff = chi(&Lift::constant(ca), 8, &g).unwrap() - chi(&Lift::constant(cb), 8, &g).unwrap();
            prop_assert!((diff - 2.0 * rational_to_f64(&(ca - cb))).abs() < 1e-12);
        }
    }
}
