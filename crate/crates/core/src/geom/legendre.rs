//! Truncated Legendre series in the moment coordinate.

use std::fmt::Write as _;
use std::ops::{Add, Mul, Neg, Sub};

use crate::error::{LabError, Result};
use crate::geom::MomentGrid;

/// Default truncation degree for functions produced by projection.
pub const DEFAULT_DEGREE_CAP: usize = 64;

/// An S¹-invariant function on P¹, `f(x) = Σ_k c_k P_k(2x − 1)`.
#[derive(Debug, Clone, PartialEq)]
pub struct InvariantFunction {
    coeffs: Vec<f64>,
}

impl InvariantFunction {
    pub fn new(coeffs: Vec<f64>) -> Self {
        if coeffs.is_empty() {
            return Self::zero(0);
        }
        Self { coeffs }
    }

    pub fn zero(degree_cap: usize) -> Self {
        Self {
            coeffs: vec![0.0; degree_cap + 1],
        }
    }

    pub fn constant(c: f64) -> Self {
        Self { coeffs: vec![c] }
    }

    /// `scale · P_k(2x − 1)`.
    pub fn legendre(k: usize, scale: f64) -> Self {
        let mut coeffs = vec![0.0; k + 1];
        coeffs[k] = scale;
        Self { coeffs }
    }

    /// Builds a series from `(k, c_k)` pairs; repeated indices accumulate.
    pub fn from_pairs(pairs: &[(usize, f64)]) -> Self {
        let cap = pairs.iter().map(|&(k, _)| k).max().unwrap_or(0);
        let mut coeffs = vec![0.0; cap + 1];
        for &(k, c) in pairs {
            coeffs[k] += c;
        }
        Self { coeffs }
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn coeff(&self, k: usize) -> f64 {
        self.coeffs.get(k).copied().unwrap_or(0.0)
    }

    pub fn degree_cap(&self) -> usize {
        self.coeffs.len() - 1
    }

    /// Mean over [0, 1] with the uniform measure.
    pub fn mean(&self) -> f64 {
        self.coeffs[0]
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.iter().all(|&c| c == 0.0)
    }

    pub fn with_degree_cap(&self, cap: usize) -> Self {
        let mut coeffs = self.coeffs.clone();
        coeffs.resize(cap + 1, 0.0);
        Self { coeffs }
    }

    pub fn map_coeffs<F: Fn(usize, f64) -> f64>(&self, f: F) -> Self {
        Self {
            coeffs: self
                .coeffs
                .iter()
                .enumerate()
                .map(|(k, &c)| f(k, c))
                .collect(),
        }
    }

    pub fn eval(&self, x: f64) -> f64 {
        let y = 2.0 * x - 1.0;
        // Clenshaw recurrence for Σ c_k P_k(y).
        let mut b1 = 0.0;
        let mut b2 = 0.0;
        for k in (1..self.coeffs.len()).rev() {
            let kf = k as f64;
            let alpha = (2.0 * kf + 1.0) / (kf + 1.0) * y;
            let beta = (kf + 1.0) / (kf + 2.0);
            let b0 = self.coeffs[k] + alpha * b1 - beta * b2;
            b2 = b1;
            b1 = b0;
        }
        self.coeffs[0] + y * b1 - 0.5 * b2
    }

    /// `df/dx`.
    pub fn derivative(&self, x: f64) -> f64 {
        let y = 2.0 * x - 1.0;
        let (mut p_prev, mut p) = (1.0, y);
        let mut d = 1.0;
        let mut acc = 0.0;
        for (k, &c) in self.coeffs.iter().enumerate().skip(1) {
            if k > 1 {
                let kf = (k - 1) as f64;
                let p_next = ((2.0 * kf + 1.0) * y * p - kf * p_prev) / (kf + 1.0);
                let d_next = (kf + 1.0) * p + y * d;
                p_prev = p;
                p = p_next;
                d = d_next;
            }
            acc += c * d;
        }
        2.0 * acc
    }

    /// `x(1 − x) df/dx`, evaluated without division so it is exact at the endpoints.
    pub fn moment_flux(&self, x: f64) -> f64 {
        let y = 2.0 * x - 1.0;
        // (1 − y²) P_k'(y) = k (P_{k−1} − y P_k) and x(1−x) d/dx = (1 − y²)/2 d/dy.
        let (mut p_prev, mut p) = (1.0, y);
        let mut acc = 0.0;
        for (k, &c) in self.coeffs.iter().enumerate().skip(1) {
            if k > 1 {
                let kf = (k - 1) as f64;
                let p_next = ((2.0 * kf + 1.0) * y * p - kf * p_prev) / (kf + 1.0);
                p_prev = p;
                p = p_next;
            }
            acc += c * k as f64 * (p_prev - y * p);
        }
        0.5 * acc
    }

    pub fn sample(&self, grid: &MomentGrid) -> Vec<f64> {
        grid.nodes().iter().map(|&x| self.eval(x)).collect()
    }

    /// Largest absolute value over the grid nodes.
    pub fn sup_norm(&self, grid: &MomentGrid) -> f64 {
        grid.nodes()
            .iter()
            .map(|&x| self.eval(x).abs())
            .fold(0.0, f64::max)
    }

    /// Sum of absolute coefficients; bounds the sup norm on [0, 1].
    pub fn coeff_l1(&self) -> f64 {
        self.coeffs.iter().map(|c| c.abs()).sum()
    }

    /// L²-projection of nodal values onto `P_0..P_cap`, using the grid's quadrature.
    pub fn project(grid: &MomentGrid, values: &[f64], cap: usize) -> Self {
        assert_eq!(values.len(), grid.node_count());
        let mut coeffs = vec![0.0; cap + 1];
        for ((&x, &w), &f) in grid.nodes().iter().zip(grid.weights()).zip(values) {
            let y = 2.0 * x - 1.0;
            let (mut p_prev, mut p) = (1.0, y);
            let wf = w * f;
            coeffs[0] += wf;
            if cap >= 1 {
                coeffs[1] += wf * y;
            }
            for k in 2..=cap {
                let kf = (k - 1) as f64;
                let p_next = ((2.0 * kf + 1.0) * y * p - kf * p_prev) / (kf + 1.0);
                p_prev = p;
                p = p_next;
                coeffs[k] += wf * p;
            }
        }
        for (k, c) in coeffs.iter_mut().enumerate() {
            *c *= (2 * k + 1) as f64;
        }
        Self { coeffs }
    }

    /// Plain-text form: a `degree_cap` line followed by one `k = c_k` line per
    /// nonzero coefficient, values printed with 17 significant digits.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        writeln!(out, "degree_cap = {}", self.degree_cap()).unwrap();
        for (k, &c) in self.coeffs.iter().enumerate() {
            if c != 0.0 {
                writeln!(out, "{k} = {c:.16e}").unwrap();
            }
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut cap: Option<usize> = None;
        let mut pairs = Vec::new();
        for (idx, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let parse_err = |message: String| LabError::Parse {
                line: idx + 1,
                message,
            };
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| parse_err(format!("expected `key = value`, got `{line}`")))?;
            let (key, value) = (key.trim(), value.trim());
            if key == "degree_cap" {
                cap = Some(
                    value
                        .parse()
                        .map_err(|_| parse_err(format!("bad degree_cap `{value}`")))?,
                );
                continue;
            }
            let k: usize = key
                .parse()
                .map_err(|_| parse_err(format!("bad coefficient index `{key}`")))?;
            let c: f64 = value
                .parse()
                .map_err(|_| parse_err(format!("bad coefficient value `{value}`")))?;
            if !c.is_finite() {
                return Err(parse_err(format!("non-finite coefficient `{value}`")));
            }
            pairs.push((k, c));
        }
        let f = Self::from_pairs(&pairs);
        match cap {
            Some(cap) if cap < f.degree_cap() && pairs.iter().any(|&(k, _)| k > cap) => {
                Err(LabError::Parse {
                    line: 0,
                    message: format!("coefficient index exceeds degree_cap {cap}"),
                })
            }
            Some(cap) => Ok(f.with_degree_cap(cap)),
            None => Ok(f),
        }
    }
}

impl Add for &InvariantFunction {
    type Output = InvariantFunction;

    fn add(self, rhs: Self) -> InvariantFunction {
        let n = self.coeffs.len().max(rhs.coeffs.len());
        InvariantFunction {
            coeffs: (0..n).map(|k| self.coeff(k) + rhs.coeff(k)).collect(),
        }
    }
}

impl Sub for &InvariantFunction {
    type Output = InvariantFunction;

    fn sub(self, rhs: Self) -> InvariantFunction {
        let n = self.coeffs.len().max(rhs.coeffs.len());
        InvariantFunction {
            coeffs: (0..n).map(|k| self.coeff(k) - rhs.coeff(k)).collect(),
        }
    }
}

impl Mul<f64> for &InvariantFunction {
    type Output = InvariantFunction;

    fn mul(self, s: f64) -> InvariantFunction {
        self.map_coeffs(|_, c| c * s)
    }
}

impl Mul<f64> for InvariantFunction {
    type Output = InvariantFunction;

    fn mul(self, s: f64) -> InvariantFunction {
        &self * s
    }
}

impl Neg for &InvariantFunction {
    type Output = InvariantFunction;

    fn neg(self) -> InvariantFunction {
        self * -1.0
    }
}

/// `P_k(2x − 1)` by the three-term recurrence.
pub fn legendre_at(k: usize, x: f64) -> f64 {
    let y = 2.0 * x - 1.0;
    let (mut p_prev, mut p) = (1.0, y);
    if k == 0 {
        return 1.0;
    }
    for j in 1..k {
        let jf = j as f64;
        let p_next = ((2.0 * jf + 1.0) * y * p - jf * p_prev) / (jf + 1.0);
        p_prev = p;
        p = p_next;
    }
    p
}
