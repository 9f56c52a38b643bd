//! Sections of O(m), their L² Gram data, the density function `K(q, h)` and the
//! Fubini–Study pullback `h_m`.
//!
//! The monomials `z^i`, `0 ≤ i ≤ m`, are weight vectors of the circle action,
//! so invariance forces their Gram matrix to be diagonal and the orthonormal
//! basis is `τ_i = z^i/√G_i`. In the moment coordinate the pointwise norm is
//! `|z^i|²_{h^m} = x^i (1 − x)^{m−i} e^{−mφ(x)}`.

use log::warn;
use num_rational::Ratio;

use crate::error::{LabError, Result};
use crate::geom::{InvariantFunction, InvariantMetric, Profile, DEFAULT_DEGREE_CAP};

/// Above this power the Gram entries are accumulated in log space.
pub const LOG_SPACE_THRESHOLD: u32 = 128;

/// Diagonal Gram data `G_i = ‖z^i‖²` of the monomial basis of H⁰(O(m)).
#[derive(Debug, Clone, PartialEq)]
pub struct SectionGram {
    power: u32,
    log_gram: Vec<f64>,
    // e^{−mφ} is evaluated as e^{−m(φ − offset)}·e^{−m·offset}; the same offset
    // is reused for section norms so the large factor cancels exactly.
    offset: f64,
}

impl SectionGram {
    pub fn power(&self) -> u32 {
        self.power
    }

    /// `dim V_m* = N_m + 1 = m + 1`.
    pub fn dim(&self) -> usize {
        self.log_gram.len()
    }

    pub fn log_gram(&self) -> &[f64] {
        &self.log_gram
    }

    pub fn gram_diag(&self) -> Vec<f64> {
        self.log_gram.iter().map(|l| l.exp()).collect()
    }

    // ln G_i with the potential offset removed.
    fn shifted_log(&self, i: usize) -> f64 {
        self.log_gram[i] + self.power as f64 * self.offset
    }
}

fn check_power(m: u32, g: &InvariantMetric) -> Result<()> {
    if m == 0 {
        return Err(LabError::InvalidPower(m));
    }
    let design = g.grid().design_max_power();
    if m > design {
        warn!(
            "power {m} exceeds the design maximum {design} of a {}-node grid",
            g.grid().node_count()
        );
    }
    Ok(())
}

fn potential_offset(values: &[f64]) -> f64 {
    let (lo, hi) = values
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
            (lo.min(v), hi.max(v))
        });
    0.5 * (lo + hi)
}

fn log_sum_exp(terms: impl Iterator<Item = f64> + Clone) -> f64 {
    let top = terms.clone().fold(f64::NEG_INFINITY, f64::max);
    if top == f64::NEG_INFINITY {
        return top;
    }
    top + terms.map(|t| (t - top).exp()).sum::<f64>().ln()
}

/// `ln(x^i (1 − x)^{m−i})` for i = 0..=m.
fn log_monomials(m: u32, x: f64, complement: f64) -> impl Iterator<Item = f64> + Clone {
    let (lx, lc) = (x.ln(), complement.ln());
    (0..=m).map(move |i| {
        let a = i as f64;
        let head = if i == 0 { 0.0 } else { a * lx };
        let tail = if i == m { 0.0 } else { (m as f64 - a) * lc };
        head + tail
    })
}

/// `x^i (1 − x)^{m−i}` for i = 0..=m, by repeated multiplication.
fn monomials(m: u32, x: f64, complement: f64) -> Vec<f64> {
    let dim = m as usize + 1;
    let mut xp = vec![1.0; dim];
    let mut cp = vec![1.0; dim];
    for i in 1..dim {
        xp[i] = xp[i - 1] * x;
        cp[i] = cp[i - 1] * complement;
    }
    (0..dim).map(|i| xp[i] * cp[dim - 1 - i]).collect()
}

/// `G_i = ∫₀¹ x^i (1 − x)^{m−i} e^{−mφ(x)} (1 + Δ₀φ)(x) dx`.
pub fn gram(m: u32, g: &InvariantMetric) -> Result<SectionGram> {
    check_power(m, g)?;
    let grid = g.grid();
    let phi = g.potential_values();
    let offset = potential_offset(&phi);
    let mf = m as f64;
    let dim = m as usize + 1;
    let nodes = grid.nodes().iter().zip(grid.complements());
    let log_gram = if m <= LOG_SPACE_THRESHOLD {
        let mut acc = vec![0.0; dim];
        for (j, (&x, &c)) in nodes.enumerate() {
            let weight = grid.weights()[j] * g.density()[j] * (-mf * (phi[j] - offset)).exp();
            for (a, v) in acc.iter_mut().zip(monomials(m, x, c)) {
                *a += weight * v;
            }
        }
        acc.iter().map(|a| a.ln() - mf * offset).collect()
    } else {
        let mut terms = vec![Vec::with_capacity(grid.node_count()); dim];
        for (j, (&x, &c)) in nodes.enumerate() {
            let base = grid.weights()[j].ln() + g.density()[j].ln() - mf * (phi[j] - offset);
            for (t, l) in terms.iter_mut().zip(log_monomials(m, x, c)) {
                t.push(base + l);
            }
        }
        terms
            .iter()
            .map(|t| log_sum_exp(t.iter().copied()) - mf * offset)
            .collect()
    };
    Ok(SectionGram {
        power: m,
        log_gram,
        offset,
    })
}

/// `‖τ_i‖²_h = x^i (1 − x)^{m−i} e^{−mφ(x)} / G_i` at one point.
pub fn section_norms_at(gram: &SectionGram, g: &InvariantMetric, x: f64) -> Vec<f64> {
    let m = gram.power;
    let shift = -(m as f64) * (g.potential().eval(x) - gram.offset);
    log_monomials(m, x, 1.0 - x)
        .enumerate()
        .map(|(i, l)| (l + shift - gram.shifted_log(i)).exp())
        .collect()
}

/// Pointwise norms of the orthonormal basis at every grid node, `[node][i]`.
#[derive(Debug, Clone)]
pub struct SectionNorms {
    pub power: u32,
    pub rows: Vec<Vec<f64>>,
}

pub fn section_norms(m: u32, g: &InvariantMetric) -> Result<(SectionGram, SectionNorms)> {
    let gram = gram(m, g)?;
    let grid = g.grid();
    let phi = g.potential_values();
    let mf = m as f64;
    let rows = grid
        .nodes()
        .iter()
        .zip(grid.complements())
        .zip(&phi)
        .map(|((&x, &c), &p)| {
            let shift = -mf * (p - gram.offset);
            if m <= LOG_SPACE_THRESHOLD {
                let e = shift.exp();
                monomials(m, x, c)
                    .iter()
                    .enumerate()
                    .map(|(i, v)| v * e / gram.shifted_log(i).exp())
                    .collect()
            } else {
                log_monomials(m, x, c)
                    .enumerate()
                    .map(|(i, l)| (l + shift - gram.shifted_log(i)).exp())
                    .collect()
            }
        })
        .collect();
    Ok((gram, SectionNorms { power: m, rows }))
}

/// `K(q, h)` at the grid nodes, `q = 1/m`.
#[derive(Debug, Clone)]
pub struct DensityProfile {
    pub power: u32,
    pub values: Profile,
}

impl DensityProfile {
    pub fn q(&self) -> f64 {
        1.0 / self.power as f64
    }

    /// `K − C_q` at the nodes.
    pub fn deviation(&self) -> Profile {
        let cq = c_q_f64(self.power);
        self.values.map(|k| k - cq)
    }

    /// `sup_x |K − C_q|`.
    pub fn sup_deviation(&self) -> f64 {
        self.deviation().sup_norm()
    }
}

/// `K(q, h) = (1/m) Σ_i ‖τ_i‖²_h`.
pub fn density(m: u32, g: &InvariantMetric) -> Result<DensityProfile> {
    let (_, norms) = section_norms(m, g)?;
    let inv_m = 1.0 / m as f64;
    let values = norms
        .rows
        .iter()
        .map(|row| inv_m * row.iter().sum::<f64>())
        .collect();
    Ok(DensityProfile {
        power: m,
        values: Profile::new(values),
    })
}

pub fn density_at(gram: &SectionGram, g: &InvariantMetric, x: f64) -> f64 {
    section_norms_at(gram, g, x).iter().sum::<f64>() / gram.power as f64
}

/// `C_q = (N_m + 1)/(m^n c_1(L)^n[M]/n!) = (m + 1)/m` on (P¹, O(1)).
pub fn c_q(m: u32) -> Ratio<i64> {
    assert!(m >= 1, "C_q needs m ≥ 1");
    Ratio::new(m as i64 + 1, m as i64)
}

pub fn c_q_f64(m: u32) -> f64 {
    (m as f64 + 1.0) / m as f64
}

/// The pullback metric `h_m = (Σ_i |τ_i|²)^{−1/m}`, as a mean-zero potential
/// relative to `h_FS` truncated at [`DEFAULT_DEGREE_CAP`].
pub fn fs_pullback(m: u32, g: &InvariantMetric) -> Result<InvariantMetric> {
    fs_pullback_with_cap(m, g, DEFAULT_DEGREE_CAP)
}

pub fn fs_pullback_with_cap(m: u32, g: &InvariantMetric, cap: usize) -> Result<InvariantMetric> {
    let gram = gram(m, g)?;
    let grid = g.grid();
    // h_FS^m e^{−mφ_m} ∝ (Σ_i t^i/G_i)^{−1}, and Σ_i t^i/G_i = (1+t)^m Σ_i x^i(1−x)^{m−i}/G_i.
    let values: Vec<f64> = grid
        .nodes()
        .iter()
        .zip(grid.complements())
        .map(|(&x, &c)| {
            let terms = log_monomials(m, x, c)
                .enumerate()
                .map(|(i, l)| l - gram.log_gram[i]);
            log_sum_exp(terms) / m as f64
        })
        .collect();
    let mut potential = InvariantFunction::project(grid, &values, cap);
    potential = potential.map_coeffs(|k, c| if k == 0 { 0.0 } else { c });
    InvariantMetric::new(grid.clone(), potential)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geom::{InvariantFunction as F, MomentGrid};
    use std::sync::Arc;

    fn binomial(m: u32, i: u32) -> f64 {
        (0..i).fold(1.0, |acc, j| acc * (m - j) as f64 / (j + 1) as f64)
    }

    fn fs(nodes: usize) -> InvariantMetric {
        InvariantMetric::fubini_study(Arc::new(MomentGrid::new(nodes).unwrap()))
    }

    #[test]
    fn gram_matches_beta_integrals() {
        let g = fs(256);
        let g2 = gram(2, &g).unwrap().gram_diag();
        for (a, b) in g2.iter().zip([1.0 / 3.0, 1.0 / 6.0, 1.0 / 3.0]) {
            assert!((a - b).abs() < 1e-15);
        }
        let g1 = gram(1, &g).unwrap().gram_diag();
        assert!(g1.iter().all(|&v| (v - 0.5).abs() < 1e-15));
        for m in [3u32, 17, 64] {
            let gm = gram(m, &g).unwrap().gram_diag();
            for (i, v) in gm.iter().enumerate() {
                let exact = 1.0 / ((m as f64 + 1.0) * binomial(m, i as u32));
                assert!((v / exact - 1.0).abs() < 1e-12, "m = {m}, i = {i}");
            }
        }
    }

    #[test]
    fn symmetric_potential_gives_symmetric_gram() {
        let grid = Arc::new(MomentGrid::new(256).unwrap());
        let g = InvariantMetric::new(grid, F::from_pairs(&[(2, 0.1), (4, -0.01)])).unwrap();
        let gm = gram(9, &g).unwrap().gram_diag();
        for i in 0..=9 {
            assert!((gm[i] / gm[9 - i] - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn log_space_agrees_with_direct_path() {
        // m = 128 runs the direct path and m = 129 the log path; both compare to closed forms.
        let g = fs(1200);
        for m in [128u32, 129, 140] {
            let gm = gram(m, &g).unwrap();
            for (i, l) in gm.log_gram().iter().enumerate() {
                let exact = -((m as f64 + 1.0) * binomial(m, i as u32)).ln();
                assert!((l - exact).abs() < 1e-11, "m = {m}, i = {i}");
            }
            let k = density(m, &g).unwrap();
            assert!(k.sup_deviation() < 1e-11, "m = {m}");
        }
    }

    #[test]
    fn fubini_study_is_balanced() {
        let g = fs(320);
        for m in [1u32, 2, 8, 32] {
            let k = density(m, &g).unwrap();
            assert!(k.sup_deviation() < 1e-12, "m = {m}");
        }
    }

    #[test]
    fn c_q_values() {
        assert_eq!(c_q(4), Ratio::new(5, 4));
        assert_eq!(c_q(1), Ratio::from_integer(2));
        let seq: Vec<f64> = (1..50).map(c_q_f64).collect();
        assert!(seq.windows(2).all(|w| w[1] < w[0] && w[1] > 1.0));
    }

    #[test]
    fn section_norms_at_half_for_m2() {
        let g = fs(256);
        let gm = gram(2, &g).unwrap();
        let n = section_norms_at(&gm, &g, 0.5);
        for (a, b) in n.iter().zip([0.75, 1.5, 0.75]) {
            assert!((a - b).abs() < 1e-14);
        }
        assert!((density_at(&gm, &g, 0.5) - 1.5).abs() < 1e-14);
    }

    #[test]
    fn invalid_power() {
        assert_eq!(gram(0, &fs(16)).unwrap_err(), LabError::InvalidPower(0));
    }

    #[test]
    fn pullback_of_fubini_study_is_fubini_study() {
        let g = fs(320);
        for m in [1u32, 4, 32] {
            let hm = fs_pullback(m, &g).unwrap();
            let worst = hm
                .potential()
                .coeffs()
                .iter()
                .fold(0.0f64, |a, c| a.max(c.abs()));
            assert!(worst < 1e-13, "m = {m}: {worst:e}");
            let dev = hm
                .density()
                .iter()
                .fold(0.0f64, |a, d| a.max((d - 1.0).abs()));
            assert!(dev < 1e-9, "m = {m}: {dev:e}");
        }
    }
}
