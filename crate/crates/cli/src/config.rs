//! Flat `key = value` run configuration. Lists are written as repeated keys.

use std::path::{Path, PathBuf};

use bergman_lab::equivariant::{Lift, Rational};
use bergman_lab::expansion::FitOrder;
use bergman_lab::geom::{InvariantFunction, DEFAULT_DEGREE_CAP};

use crate::error::CliError;

#[derive(Debug, Clone, PartialEq)]
pub struct Tolerances {
    /// Fit residual at the largest power before a fit is flagged unreliable.
    pub residual: f64,
    pub a1: f64,
    pub balance: f64,
    /// Exact quadrature identities (means, volume, barycenter).
    pub identity: f64,
    /// Character, pullback and orthogonality identities.
    pub character: f64,
    pub linearization: f64,
    pub recovery: f64,
    /// Allowed `|v| / ‖u‖`.
    pub kernel: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            residual: 1e-4,
            a1: 2e-2,
            balance: 1e-10,
            identity: 1e-10,
            character: 1e-8,
            linearization: 5e-2,
            recovery: 0.1,
            kernel: 1e-3,
        }
    }
}

impl Tolerances {
    const KEYS: [&'static str; 8] = [
        "residual",
        "a1",
        "balance",
        "identity",
        "character",
        "linearization",
        "recovery",
        "kernel",
    ];

    fn slot(&mut self, name: &str) -> Option<&mut f64> {
        Some(match name {
            "residual" => &mut self.residual,
            "a1" => &mut self.a1,
            "balance" => &mut self.balance,
            "identity" => &mut self.identity,
            "character" => &mut self.character,
            "linearization" => &mut self.linearization,
            "recovery" => &mut self.recovery,
            "kernel" => &mut self.kernel,
            _ => return None,
        })
    }

    fn get(&self, name: &str) -> f64 {
        let mut copy = self.clone();
        *copy.slot(name).expect("known tolerance")
    }
}

/// Lift constants: one for every power, optionally overridden per power.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct LiftSpec {
    pub constant: Option<Rational>,
    pub per_power: Vec<(u32, Rational)>,
}

impl LiftSpec {
    pub fn to_lift(&self) -> Lift {
        let base = match self.constant {
            Some(c) => Lift::constant(c),
            None if self.per_power.is_empty() => Lift::sl(),
            None => Lift::per_power([]),
        };
        self.per_power
            .iter()
            .fold(base, |lift, &(m, c)| lift.with_power(m, c))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub potential: Vec<(usize, f64)>,
    pub m_list: Vec<u32>,
    pub nodes: Option<usize>,
    pub degree: usize,
    pub lift: LiftSpec,
    pub seed: u64,
    pub out: PathBuf,
    pub inject: Vec<(usize, f64)>,
    pub inject_order: u32,
    pub steps: usize,
    pub refine_sweeps: usize,
    pub theorem_b: bool,
    pub d0_factor: f64,
    pub random_potentials: usize,
    pub fit_order: FitOrder,
    pub tol: Tolerances,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            potential: Vec::new(),
            m_list: Vec::new(),
            nodes: None,
            degree: DEFAULT_DEGREE_CAP,
            lift: LiftSpec::default(),
            seed: 0,
            out: PathBuf::from("out"),
            inject: Vec::new(),
            inject_order: 1,
            steps: 1,
            refine_sweeps: 20,
            theorem_b: true,
            d0_factor: 1.0,
            random_potentials: 5,
            fit_order: FitOrder::Quadratic,
            tol: Tolerances::default(),
        }
    }
}

fn parse_positive<T>(value: &str, what: &str) -> Result<T, String>
where
    T: std::str::FromStr + PartialEq + Default,
{
    match value.parse::<T>() {
        Ok(v) if v != T::default() => Ok(v),
        Ok(_) => Err(format!("{what} must be positive")),
        Err(_) => Err(format!("bad {what} `{value}`")),
    }
}

fn parse_f64(value: &str, what: &str) -> Result<f64, String> {
    match value.parse::<f64>() {
        Ok(v) if v.is_finite() => Ok(v),
        _ => Err(format!("bad {what} `{value}`")),
    }
}

fn parse_pair(value: &str, what: &str) -> Result<(usize, f64), String> {
    let mut parts = value.split_whitespace();
    match (parts.next(), parts.next(), parts.next()) {
        (Some(k), Some(c), None) => {
            let k = k.parse().map_err(|_| format!("bad {what} index `{k}`"))?;
            Ok((k, parse_f64(c, &format!("{what} coefficient"))?))
        }
        _ => Err(format!("{what} expects `k value`, got `{value}`")),
    }
}

/// Parses `1/2`, `-3`, or a terminating decimal such as `0.25` into an exact rational.
pub fn parse_rational(value: &str) -> Result<Rational, String> {
    let bad = || format!("bad rational `{value}`");
    if let Some((int, frac)) = value.split_once('.') {
        if frac.is_empty() || frac.len() > 15 || !frac.bytes().all(|b| b.is_ascii_digit()) {
            return Err(bad());
        }
        let negative = int.starts_with('-');
        let int_part: i64 = match int.trim_start_matches(['-', '+']) {
            "" => 0,
            digits => digits.parse().map_err(|_| bad())?,
        };
        let denom = 10i64.pow(frac.len() as u32);
        let frac_part: i64 = frac.parse().map_err(|_| bad())?;
        let numer = int_part
            .checked_mul(denom)
            .and_then(|v| v.checked_add(frac_part))
            .ok_or_else(bad)?;
        return Ok(Rational::new(if negative { -numer } else { numer }, denom));
    }
    let r: Rational = value.parse().map_err(|_| bad())?;
    Ok(r)
}

fn parse_bool(value: &str) -> Result<bool, String> {
    match value {
        "true" | "yes" | "1" => Ok(true),
        "false" | "no" | "0" => Ok(false),
        _ => Err(format!("bad boolean `{value}`")),
    }
}

impl RunConfig {
    pub fn from_file(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Io {
            path: path.to_path_buf(),
            source: e,
        })?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self, CliError> {
        let mut cfg = Self::default();
        for (idx, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let at = |message: String| CliError::Config {
                line: idx + 1,
                message,
            };
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| at(format!("expected `key = value`, got `{line}`")))?;
            cfg.set(key.trim(), value.trim()).map_err(at)?;
        }
        Ok(cfg)
    }

    fn set(&mut self, key: &str, value: &str) -> Result<(), String> {
        match key {
            "potential" => self.potential.push(parse_pair(value, "potential")?),
            "m" => self.m_list.push(parse_positive(value, "power m")?),
            "nodes" => self.nodes = Some(parse_positive(value, "node count")?),
            "degree" => self.degree = parse_positive(value, "degree cap")?,
            "lift" => match value.split_once(':') {
                Some((m, c)) => {
                    let m = parse_positive(m.trim(), "lift power")?;
                    self.lift.per_power.push((m, parse_rational(c.trim())?));
                }
                None => self.lift.constant = Some(parse_rational(value)?),
            },
            "seed" => self.seed = value.parse().map_err(|_| format!("bad seed `{value}`"))?,
            "out" => self.out = PathBuf::from(value),
            "inject" => self.inject.push(parse_pair(value, "inject")?),
            "inject_order" => self.inject_order = parse_positive(value, "injection order")?,
            "steps" => {
                self.steps = value
                    .parse()
                    .map_err(|_| format!("bad step count `{value}`"))?
            }
            "refine_sweeps" => {
                self.refine_sweeps = value
                    .parse()
                    .map_err(|_| format!("bad sweep count `{value}`"))?
            }
            "theorem_b" => self.theorem_b = parse_bool(value)?,
            "d0_factor" => self.d0_factor = parse_f64(value, "d0_factor")?,
            "random_potentials" => {
                self.random_potentials = parse_positive(value, "random potential count")?
            }
            "fit_order" => {
                self.fit_order = match value {
                    "quadratic" => FitOrder::Quadratic,
                    "cubic" => FitOrder::Cubic,
                    _ => {
                        return Err(format!(
                            "fit_order must be quadratic or cubic, got `{value}`"
                        ))
                    }
                }
            }
            _ => {
                let name = key
                    .strip_prefix("tol.")
                    .ok_or_else(|| format!("unknown key `{key}`"))?;
                let tol = parse_f64(value, key)?;
                if tol <= 0.0 {
                    return Err(format!("{key} must be positive"));
                }
                *self
                    .tol
                    .slot(name)
                    .ok_or_else(|| format!("unknown tolerance `{key}`"))? = tol;
            }
        }
        Ok(())
    }

    /// Checks the shape of the configuration; admissibility is checked by the commands.
    pub fn validate(&self) -> Result<(), CliError> {
        if self.m_list.windows(2).any(|w| w[1] <= w[0]) {
            return Err(CliError::Validation(format!(
                "m list must be strictly increasing: {:?}",
                self.m_list
            )));
        }
        for (what, pairs) in [("potential", &self.potential), ("inject", &self.inject)] {
            let mut seen: Vec<usize> = pairs.iter().map(|p| p.0).collect();
            if let Some(&k) = seen.iter().find(|&&k| k > self.degree) {
                return Err(CliError::Validation(format!(
                    "{what} index {k} exceeds degree cap {}",
                    self.degree
                )));
            }
            seen.sort_unstable();
            if seen.windows(2).any(|w| w[0] == w[1]) {
                return Err(CliError::Validation(format!("{what} repeats an index")));
            }
        }
        let mut powers: Vec<u32> = self.lift.per_power.iter().map(|p| p.0).collect();
        powers.sort_unstable();
        if powers.windows(2).any(|w| w[0] == w[1]) {
            return Err(CliError::Validation("lift repeats a power".into()));
        }
        Ok(())
    }

    pub fn potential_fn(&self) -> InvariantFunction {
        InvariantFunction::from_pairs(&self.potential)
    }

    pub fn inject_fn(&self) -> InvariantFunction {
        InvariantFunction::from_pairs(&self.inject)
    }

    /// Canonical `(key, value)` pairs, used for the manifest echo.
    pub fn echo(&self) -> Vec<(String, String)> {
        let mut out: Vec<(String, String)> = Vec::new();
        let mut push = |k: &str, v: String| out.push((k.to_string(), v));
        for (k, c) in &self.potential {
            push("potential", format!("{k} {c:.16e}"));
        }
        for m in &self.m_list {
            push("m", m.to_string());
        }
        if let Some(n) = self.nodes {
            push("nodes", n.to_string());
        }
        push("degree", self.degree.to_string());
        if let Some(c) = self.lift.constant {
            push("lift", c.to_string());
        }
        for (m, c) in &self.lift.per_power {
            push("lift", format!("{m}:{c}"));
        }
        push("seed", self.seed.to_string());
        push("out", self.out.display().to_string());
        for (k, c) in &self.inject {
            push("inject", format!("{k} {c:.16e}"));
        }
        push("inject_order", self.inject_order.to_string());
        push("steps", self.steps.to_string());
        push("refine_sweeps", self.refine_sweeps.to_string());
        push("theorem_b", self.theorem_b.to_string());
        push("d0_factor", format!("{:.16e}", self.d0_factor));
        push("random_potentials", self.random_potentials.to_string());
        push(
            "fit_order",
            match self.fit_order {
                FitOrder::Quadratic => "quadratic",
                FitOrder::Cubic => "cubic",
            }
            .to_string(),
        );
        for name in Tolerances::KEYS {
            push(
                &format!("tol.{name}"),
                format!("{:.16e}", self.tol.get(name)),
            );
        }
        out
    }
}
