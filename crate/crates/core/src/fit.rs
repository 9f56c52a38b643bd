//! Per-node least-squares fits of m-sweeps against powers of `q = 1/m`.

use nalgebra::{DMatrix, DVector};

use crate::error::{LabError, Result};

/// Fits whose column-normalized design matrix exceeds this condition number
/// are rejected.
pub const MAX_CONDITION: f64 = 1e8;

#[derive(Debug, Clone)]
pub struct PowerFit {
    pub exponents: Vec<i32>,
    /// `coefficients[c][node]` multiplies `q^{exponents[c]}`.
    pub coefficients: Vec<Vec<f64>>,
    /// `residuals[row][node]`, in the order of the supplied powers.
    pub residuals: Vec<Vec<f64>>,
    pub condition: f64,
}

impl PowerFit {
    /// Sup-norm of the residual over nodes for one input row.
    pub fn residual_sup(&self, row: usize) -> f64 {
        self.residuals[row].iter().fold(0.0, |a, r| a.max(r.abs()))
    }
}

/// Rejects duplicate powers and checks there are at least `needed` of them.
pub fn check_powers(powers: &[u32], needed: usize) -> Result<()> {
    let mut sorted = powers.to_vec();
    sorted.sort_unstable();
    sorted.dedup();
    if sorted.len() < needed || sorted.len() != powers.len() {
        return Err(LabError::TooFewPowers {
            needed,
            got: sorted.len(),
        });
    }
    if let Some(&m) = powers.iter().find(|&&m| m == 0) {
        return Err(LabError::InvalidPower(m));
    }
    Ok(())
}

/// Least squares `data[row][node] ≈ Σ_c β_c[node] q_row^{e_c}` with `q_row = 1/powers[row]`.
pub fn fit_powers(powers: &[u32], exponents: &[i32], data: &[Vec<f64>]) -> Result<PowerFit> {
    check_powers(powers, exponents.len())?;
    assert_eq!(powers.len(), data.len());
    let rows = powers.len();
    let cols = exponents.len();
    let nodes = data.first().map_or(0, Vec::len);

    let mut design = DMatrix::<f64>::zeros(rows, cols);
    for (r, &m) in powers.iter().enumerate() {
        let q = 1.0 / m as f64;
        for (c, &e) in exponents.iter().enumerate() {
            design[(r, c)] = q.powi(e);
        }
    }
    // Column scaling: the condition number then measures collinearity, not scale.
    let scales: Vec<f64> = (0..cols).map(|c| design.column(c).norm()).collect();
    for (c, s) in scales.iter().enumerate() {
        design.column_mut(c).scale_mut(1.0 / s);
    }
    let svd = design.clone().svd(true, true);
    let (smax, smin) = svd
        .singular_values
        .iter()
        .fold((0.0f64, f64::INFINITY), |(hi, lo), &s| {
            (hi.max(s), lo.min(s))
        });
    let condition = if smin > 0.0 {
        smax / smin
    } else {
        f64::INFINITY
    };
    if !(condition <= MAX_CONDITION) {
        return Err(LabError::IllConditioned { condition });
    }

    let mut coefficients = vec![vec![0.0; nodes]; cols];
    let mut residuals = vec![vec![0.0; nodes]; rows];
    for node in 0..nodes {
        let rhs = DVector::from_iterator(rows, data.iter().map(|row| row[node]));
        let beta = svd
            .solve(&rhs, 0.0)
            .expect("SVD was computed with both factors");
        let fitted = &design * &beta;
        for c in 0..cols {
            coefficients[c][node] = beta[c] / scales[c];
        }
        for r in 0..rows {
            residuals[r][node] = rhs[r] - fitted[r];
        }
    }
    Ok(PowerFit {
        exponents: exponents.to_vec(),
        coefficients,
        residuals,
        condition,
    })
}

/// Least-squares slope of `ys` against `xs`.
pub fn slope(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    sxy / sxx
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn recovers_exact_polynomial_in_q() {
        let powers = [16, 24, 32, 48, 64];
        let data: Vec<Vec<f64>> = powers
            .iter()
            .map(|&m| {
                let q = 1.0 / m as f64;
                vec![2.0 * q - 3.0 * q * q, 0.5 * q]
            })
            .collect();
        let fit = fit_powers(&powers, &[1, 2], &data).unwrap();
        assert!((fit.coefficients[0][0] - 2.0).abs() < 1e-12);
        assert!((fit.coefficients[1][0] + 3.0).abs() < 1e-10);
        assert!((fit.coefficients[0][1] - 0.5).abs() < 1e-12);
        assert!(fit.coefficients[1][1].abs() < 1e-10);
        assert!(fit.residual_sup(4) < 1e-15);
    }

    #[test]
    fn rejects_duplicates_and_short_lists() {
        let data = vec![vec![0.0]; 3];
        assert!(matches!(
            fit_powers(&[16, 16, 32], &[1, 2], &data),
            Err(LabError::TooFewPowers { .. })
        ));
        assert!(matches!(
            fit_powers(&[16], &[1, 2], &data[..1]),
            Err(LabError::TooFewPowers { needed: 2, got: 1 })
        ));
    }

    #[test]
    fn nearly_collinear_powers_are_ill_conditioned() {
        let powers = [100_000, 100_001, 100_002];
        let data = vec![vec![0.0]; 3];
        match fit_powers(&powers, &[1, 2, 3], &data) {
            Err(LabError::IllConditioned { condition }) => assert!(condition > MAX_CONDITION),
            other => panic!("expected ill-conditioning, got {other:?}"),
        }
    }

    #[test]
    fn slope_of_a_line() {
        let xs = [1.0, 2.0, 3.0];
        let ys = [1.0, 3.0, 5.0];
        assert!((slope(&xs, &ys) - 2.0).abs() < 1e-15);
    }
}
