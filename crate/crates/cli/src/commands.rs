//! The five experiment commands. Each writes its files through a
//! [`RunOutput`] and returns an [`Outcome`] for the manifest.

use std::sync::Arc;

use bergman_lab::bergman::{self, c_q_f64, gram};
use bergman_lab::corrector::{
    self, deviation_coefficient, linearization_check_against, order_from_deviations, realize,
    step_with, sup_deviations, ApproxState, OrderVerdict, StepOptions,
};
use bergman_lab::equivariant::{chi, theorem_b_check, verify_46, Lift, Rational};
use bergman_lab::expansion::{a1_discrepancy, fit_expansion, fit_expansion_with, FitOptions};
use bergman_lab::geom::{
    default_node_count, lichnerowicz_eigenvalue, lichnerowicz_fs, seeded_potentials,
    InvariantFunction, InvariantMetric, MomentGrid,
};
use bergman_lab::LabError;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Map, Value};

use crate::config::RunConfig;
use crate::error::CliError;
use crate::output::{num, Outcome, RunOutput};

/// Powers used by the corrector and the a₁ fit when none are configured.
pub const DEFAULT_SWEEP: [u32; 5] = [16, 24, 32, 48, 64];
/// Powers used by the obstruction command when none are configured.
pub const DEFAULT_OBSTRUCTION_POWERS: [u32; 3] = [4, 8, 16];
/// Powers of the balance check when none are configured.
pub const DEFAULT_BALANCE_POWERS: [u32; 3] = [2, 8, 32];

/// Dense sweep for the linearization check.
pub fn linearization_sweep() -> Vec<u32> {
    (16..=64).step_by(4).collect()
}

fn grid_for(cfg: &RunConfig, m_max: u32) -> Result<Arc<MomentGrid>, CliError> {
    let nodes = cfg.nodes.unwrap_or_else(|| default_node_count(m_max));
    Ok(Arc::new(MomentGrid::new(nodes)?))
}

fn admissible(
    grid: &Arc<MomentGrid>,
    phi: InvariantFunction,
    what: &str,
) -> Result<InvariantMetric, CliError> {
    InvariantMetric::new(grid.clone(), phi).map_err(|e| match e {
        LabError::KahlerCone { .. } => {
            CliError::Validation(format!("{what} is not admissible: {e}"))
        }
        other => other.into(),
    })
}

fn config_metric(cfg: &RunConfig, grid: &Arc<MomentGrid>) -> Result<InvariantMetric, CliError> {
    admissible(
        grid,
        cfg.potential_fn().with_degree_cap(cfg.degree),
        "potential",
    )
}

fn powers_or(cfg: &RunConfig, default: &[u32]) -> Vec<u32> {
    if cfg.m_list.is_empty() {
        default.to_vec()
    } else {
        cfg.m_list.clone()
    }
}

fn max_power(powers: &[u32]) -> u32 {
    powers.iter().copied().max().unwrap_or(1)
}

fn verdict_value(v: &OrderVerdict) -> Value {
    match v {
        OrderVerdict::Exact => json!("exact"),
        OrderVerdict::Slope(s) => json!(s),
    }
}

/// Validates everything that can be checked without computing.
pub fn preflight(command: &str, cfg: &RunConfig) -> Result<(), CliError> {
    cfg.validate()?;
    let m_max = match command {
        "density" | "fit" => {
            if cfg.m_list.is_empty() {
                return Err(CliError::Validation("m list is empty".into()));
            }
            max_power(&cfg.m_list)
        }
        "obstruction" => max_power(&powers_or(cfg, &DEFAULT_OBSTRUCTION_POWERS)),
        _ => max_power(&powers_or(cfg, &DEFAULT_SWEEP)).max(64),
    };
    let grid = grid_for(cfg, m_max)?;
    config_metric(cfg, &grid)?;
    Ok(())
}

pub fn density(cfg: &RunConfig, out: &mut RunOutput) -> Result<Outcome, CliError> {
    let grid = grid_for(cfg, max_power(&cfg.m_list))?;
    let g = config_metric(cfg, &grid)?;
    let mut rows = Vec::new();
    let mut gram_rows = Vec::new();
    let mut per_m = Vec::new();
    let mut outcome = Outcome {
        pass: true,
        ..Outcome::default()
    };
    let mut last_sup = f64::INFINITY;
    let mut decreasing = true;
    for &m in &cfg.m_list {
        let profile = bergman::density(m, &g)?;
        let cq = c_q_f64(m);
        for (&x, &k) in grid.nodes().iter().zip(&profile.values.values) {
            rows.push(vec![m.to_string(), num(x), num(k), num(cq), num(k - cq)]);
        }
        for (i, v) in gram(m, &g)?.gram_diag().iter().enumerate() {
            gram_rows.push(vec![m.to_string(), i.to_string(), num(*v)]);
        }
        let sup = profile.sup_deviation();
        let mean = g.integrate(&profile.deviation())?;
        decreasing &= sup < last_sup;
        last_sup = sup;
        if mean.abs() > cfg.tol.identity {
            outcome.fail(format!("mean identity fails at m = {m}"));
        }
        if g.potential().is_zero() && sup > cfg.tol.balance {
            outcome.fail(format!("Fubini–Study density is not balanced at m = {m}"));
        }
        per_m.push(json!({ "m": m, "sup_deviation": sup, "mean_deviation": mean }));
    }
    out.write_csv("density.csv", &["m", "x", "K", "C_q", "K_minus_Cq"], &rows)?;
    out.write_csv("gram.csv", &["m", "index", "value"], &gram_rows)?;
    outcome.summary.insert("powers".into(), Value::Array(per_m));
    outcome
        .summary
        .insert("sup_deviation_decreasing".into(), json!(decreasing));
    Ok(outcome)
}

pub fn fit(cfg: &RunConfig, out: &mut RunOutput) -> Result<Outcome, CliError> {
    let grid = grid_for(cfg, max_power(&cfg.m_list))?;
    let g = config_metric(cfg, &grid)?;
    let options = FitOptions {
        order: cfg.fit_order,
        residual_threshold: cfg.tol.residual,
    };
    let result = fit_expansion_with(&g, &cfg.m_list, options)?;
    let sigma = g.scalar_curvature();
    let mut rows = Vec::new();
    let mut max_error: f64 = 0.0;
    for (i, &x) in grid.nodes().iter().enumerate() {
        let half = 0.5 * sigma.values[i];
        let err = (result.a1.values[i] - half).abs();
        max_error = max_error.max(err);
        rows.push(vec![
            num(x),
            num(result.a1.values[i]),
            num(result.a2.values[i]),
            num(half),
            num(err),
        ]);
    }
    out.write_csv(
        "fit.csv",
        &["x", "a1", "a2", "sigma_half", "abs_error"],
        &rows,
    )?;
    let a1_integral = g.integrate(&result.a1)?;
    let mut outcome = Outcome {
        pass: true,
        ..Outcome::default()
    };
    if max_error > cfg.tol.a1 {
        outcome.fail("a1 differs from half the scalar curvature");
    }
    if (a1_integral - 1.0).abs() > 1e-2 {
        outcome.fail("a1 does not integrate to 1");
    }
    if !result.reliable {
        outcome.fail("fit residual above threshold");
    }
    let s = &mut outcome.summary;
    s.insert("max_abs_error".into(), json!(max_error));
    s.insert("a1_integral".into(), json!(a1_integral));
    s.insert("residual_norm".into(), json!(result.residual_norm));
    s.insert("condition".into(), json!(result.condition));
    s.insert("reliable".into(), json!(result.reliable));
    Ok(outcome)
}

pub fn obstruction(cfg: &RunConfig, out: &mut RunOutput) -> Result<Outcome, CliError> {
    let powers = powers_or(cfg, &DEFAULT_OBSTRUCTION_POWERS);
    let grid = grid_for(cfg, max_power(&powers))?;
    let g = config_metric(cfg, &grid)?;
    let lift = cfg.lift.to_lift();
    let report = if cfg.theorem_b {
        Some(theorem_b_check(&lift, &powers, &g)?)
    } else {
        None
    };
    let sl = Lift::sl();
    let mut rows = Vec::new();
    let mut worst_46: f64 = 0.0;
    let mut worst_47: f64 = 0.0;
    let mut chis = Vec::new();
    for &m in &powers {
        let c = lift.constant_at(m)?;
        let value = chi(&lift, m, &g)?;
        let mf = m as f64;
        let dev_46 = verify_46(m, &g)?;
        let int_47 = chi(&sl, m, &g)?;
        worst_46 = worst_46.max(dev_46);
        worst_47 = worst_47.max(int_47.abs());
        chis.push(value);
        rows.push(vec![
            m.to_string(),
            c.to_string(),
            num(value),
            num(mf * mf * value),
            num(dev_46),
            num(int_47),
        ]);
    }
    out.write_csv(
        "obstruction.csv",
        &[
            "m",
            "lift_constant",
            "chi",
            "obstruction",
            "dev_46",
            "int_47",
        ],
        &rows,
    )?;
    let mut outcome = Outcome {
        pass: true,
        ..Outcome::default()
    };
    let tol = cfg.tol.character;
    let spread = chis.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
        - chis.iter().cloned().fold(f64::INFINITY, f64::min);
    if let Some(report) = &report {
        if let Some(reason) = report.reason() {
            outcome.fail(reason);
        }
        outcome
            .summary
            .insert("theorem_b_pass".into(), json!(report.pass()));
        outcome
            .summary
            .insert("common_chi".into(), json!(report.common_chi));
    }
    if powers
        .iter()
        .zip(&chis)
        .any(|(&m, c)| (m as f64).powi(2) * c.abs() > tol)
    {
        outcome.fail("nonzero character");
    }
    if worst_46 > tol {
        outcome.fail("pullback identity gap above tolerance");
    }
    if worst_47 > tol {
        outcome.fail("SL character does not vanish");
    }
    let s = &mut outcome.summary;
    s.insert("chi_spread".into(), json!(spread));
    s.insert("max_dev_46".into(), json!(worst_46));
    s.insert("max_int_47".into(), json!(worst_47));
    Ok(outcome)
}

struct LevelRecord {
    deviations: Vec<f64>,
    verdict: OrderVerdict,
    kernel_ratio: f64,
}

fn kernel_ratio(v: f64, u_norm: f64, options: &StepOptions) -> f64 {
    v.abs() / u_norm.max(options.floor)
}

pub fn correct(cfg: &RunConfig, out: &mut RunOutput) -> Result<Outcome, CliError> {
    let powers = powers_or(cfg, &DEFAULT_SWEEP);
    let grid = grid_for(cfg, max_power(&powers).max(64))?;
    let base = config_metric(cfg, &grid)?;
    let psi = cfg.inject_fn().with_degree_cap(cfg.degree);
    let mut state = ApproxState::new(base);
    if !psi.is_zero() {
        state = state.with_injection(cfg.inject_order, psi.clone());
    }
    let options = StepOptions {
        refine_sweeps: cfg.refine_sweeps,
        kernel_rel: cfg.tol.kernel,
        ..StepOptions::default()
    };
    let mut levels: Vec<LevelRecord> = Vec::new();
    let mut sweeps = Vec::new();
    for level in 0..=cfg.steps {
        let deviations = sup_deviations(&state, &powers)?;
        let verdict = order_from_deviations(&powers, &deviations);
        let ratio = if level < cfg.steps {
            let (next, report) = step_with(&state, &powers, options)?;
            sweeps.push(report.sweeps);
            let r = kernel_ratio(report.initial.v, report.initial.u_norm, &options);
            state = next;
            r
        } else {
            let dev = deviation_coefficient(&state, &powers, level as u32 + 2)?;
            kernel_ratio(dev.v, dev.u_norm, &options)
        };
        levels.push(LevelRecord {
            deviations,
            verdict,
            kernel_ratio: ratio,
        });
    }
    let mut rows = Vec::new();
    for (level, rec) in levels.iter().enumerate() {
        for (&m, d) in powers.iter().zip(&rec.deviations) {
            rows.push(vec![
                level.to_string(),
                m.to_string(),
                num(*d),
                rec.verdict.to_string(),
                num(rec.kernel_ratio),
            ]);
        }
    }
    out.write_csv(
        "trace.csv",
        &["level", "m", "sup_deviation", "slope", "v_residual"],
        &rows,
    )?;
    out.write_text("state.txt", &state.to_text())?;

    let mut outcome = Outcome {
        pass: true,
        ..Outcome::default()
    };
    for (level, rec) in levels.iter().enumerate() {
        if !rec.verdict.passes(level) {
            outcome.fail(format!("order check fails at level {level}"));
        }
        if level < cfg.steps && rec.kernel_ratio > cfg.tol.kernel {
            outcome.fail(format!("kernel residual too large at level {level}"));
        }
    }
    if cfg.steps >= 1 {
        let phi1 = &state.corrections()[0];
        let recovery = if psi.is_zero() || cfg.inject_order != 1 {
            phi1.sup_norm(&grid)
        } else {
            (phi1 + &psi).sup_norm(&grid) / psi.sup_norm(&grid)
        };
        if recovery > cfg.tol.recovery {
            outcome.fail("injected perturbation not recovered");
        }
        outcome
            .summary
            .insert("recovery_error".into(), json!(recovery));
    }
    let orthogonality = corrector::verify_47(&state, &Lift::sl(), &powers)?;
    if orthogonality > cfg.tol.character {
        outcome.fail("realized metrics are not orthogonal to the holomorphy potential");
    }
    let s = &mut outcome.summary;
    s.insert(
        "levels".into(),
        Value::Array(
            levels
                .iter()
                .enumerate()
                .map(|(level, rec)| {
                    json!({
                        "level": level,
                        "slope": verdict_value(&rec.verdict),
                        "pass": rec.verdict.passes(level),
                        "v_residual": rec.kernel_ratio,
                    })
                })
                .collect(),
        ),
    );
    s.insert("refine_sweeps_used".into(), json!(sweeps));
    s.insert("int_47".into(), json!(orthogonality));
    Ok(outcome)
}

/// Rows of `checks.csv`.
#[derive(Default)]
struct Checks {
    rows: Vec<Vec<String>>,
    failed: Vec<String>,
    summary: Map<String, Value>,
}

impl Checks {
    fn bound(&mut self, name: &str, value: f64, tol: f64) {
        self.record(name, num(value), num(tol), value.abs() <= tol, json!(value));
    }

    fn record(&mut self, name: &str, value: String, tol: String, pass: bool, json_value: Value) {
        if !pass {
            self.failed.push(name.to_string());
        }
        self.rows
            .push(vec![name.to_string(), value, tol, pass.to_string()]);
        self.summary.insert(
            name.to_string(),
            json!({ "value": json_value, "pass": pass }),
        );
    }
}

pub fn check(cfg: &RunConfig, out: &mut RunOutput) -> Result<Outcome, CliError> {
    let grid = grid_for(cfg, 64)?;
    let fs = InvariantMetric::fubini_study(grid.clone());
    let tol = &cfg.tol;
    let mut checks = Checks::default();
    let configured = (!cfg.potential.is_empty())
        .then(|| config_metric(cfg, &grid))
        .transpose()?;
    let seeded: Vec<InvariantMetric> = seeded_potentials(cfg.seed, cfg.random_potentials)
        .into_iter()
        .map(|phi| admissible(&grid, phi, "seeded potential"))
        .collect::<Result<_, _>>()?;

    // Bergman density
    let balance_powers = powers_or(cfg, &DEFAULT_BALANCE_POWERS);
    let mut balance: f64 = 0.0;
    for &m in &balance_powers {
        balance = balance.max(bergman::density(m, &fs)?.sup_deviation());
    }
    checks.bound("fs_balance", balance, tol.balance);

    let mut gram_err: f64 = 0.0;
    for (m, exact) in [
        (1u32, vec![0.5, 0.5]),
        (2, vec![1.0 / 3.0, 1.0 / 6.0, 1.0 / 3.0]),
    ] {
        for (a, b) in gram(m, &fs)?.gram_diag().iter().zip(exact) {
            gram_err = gram_err.max((a - b).abs());
        }
    }
    checks.bound("gram_oracle", gram_err, 1e-12);

    let mut mean_err: f64 = 0.0;
    for g in &seeded {
        for m in [8u32, 32] {
            mean_err = mean_err.max(g.integrate(&bergman::density(m, g)?.deviation())?.abs());
        }
    }
    checks.bound("mean_identity", mean_err, tol.identity);

    // Round-metric operators
    let mut spectrum_err: f64 = 0.0;
    let mut kernel_dim = 0;
    for k in 0..=16usize {
        let image = lichnerowicz_fs(&InvariantFunction::legendre(k, 1.0));
        let nu = ((k as i64 - 1) * k as i64 * (k as i64 + 1) * (k as i64 + 2)) as f64;
        spectrum_err = spectrum_err.max((image.coeff(k) - nu).abs());
        if k >= 1 && lichnerowicz_eigenvalue(k) == 0.0 {
            kernel_dim += 1;
        }
    }
    checks.bound("lichnerowicz_spectrum", spectrum_err, 0.0);
    checks.record(
        "lichnerowicz_kernel_dim",
        kernel_dim.to_string(),
        "1".into(),
        kernel_dim == 1,
        json!(kernel_dim),
    );

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut adjoint_err: f64 = 0.0;
    for _ in 0..cfg.random_potentials {
        let f = InvariantFunction::new((0..10).map(|_| rng.random_range(-1.0..1.0)).collect());
        let h = InvariantFunction::new((0..10).map(|_| rng.random_range(-1.0..1.0)).collect());
        let (df, dh) = (lichnerowicz_fs(&f), lichnerowicz_fs(&h));
        let lhs = grid.integrate(|x| df.eval(x) * h.eval(x));
        let rhs = grid.integrate(|x| f.eval(x) * dh.eval(x));
        adjoint_err = adjoint_err.max((lhs - rhs).abs() / (1.0 + lhs.abs()));
    }
    checks.bound("lichnerowicz_self_adjoint", adjoint_err, 1e-10);

    let (mut volume, mut gauss_bonnet, mut barycenter) = (0.0f64, 0.0f64, 0.0f64);
    for g in &seeded {
        volume = volume.max((g.volume() - 1.0).abs());
        gauss_bonnet = gauss_bonnet.max((g.integrate(&g.scalar_curvature())? - 2.0).abs());
        barycenter = barycenter.max((g.integrate(&g.moment_map())? - 0.5).abs());
    }
    checks.bound("volume", volume, tol.identity);
    checks.bound("gauss_bonnet", gauss_bonnet, tol.identity);
    checks.bound("dh_barycenter", barycenter, tol.identity);

    // Expansion
    let asymptotic: Vec<InvariantMetric> = match &configured {
        Some(g) => vec![g.clone()],
        None => vec![
            admissible(&grid, InvariantFunction::legendre(2, 0.01), "probe")?,
            admissible(&grid, InvariantFunction::legendre(3, 0.002), "probe")?,
        ],
    };
    let (mut a1_err, mut refinement): (f64, f64) = (0.0, 0.0);
    for g in &asymptotic {
        let full = a1_discrepancy(g, &fit_expansion(g, &DEFAULT_SWEEP)?);
        let capped = a1_discrepancy(g, &fit_expansion(g, &[16, 24, 32])?);
        a1_err = a1_err.max(full);
        refinement = refinement.max(full / capped);
    }
    checks.bound("a1_identity", a1_err, tol.a1);
    checks.record(
        "a1_refinement_ratio",
        num(refinement),
        num(1.0),
        refinement < 1.0,
        json!(refinement),
    );

    // Linearization at the round metric
    let sweep = linearization_sweep();
    for k in [2usize, 3] {
        let phi = InvariantFunction::legendre(k, 1.0);
        let predicted = lichnerowicz_fs(&phi) * (-0.5 * cfg.d0_factor);
        let report = linearization_check_against(&phi, 1, &sweep, &grid, &predicted)?;
        checks.bound(
            &format!("linearization_p{k}"),
            report.relative_error,
            tol.linearization,
        );
    }

    // Character
    let identity_metrics: Vec<&InvariantMetric> = match &configured {
        Some(g) => vec![g],
        None => Vec::new(),
    };
    let strong = admissible(&grid, InvariantFunction::legendre(2, 0.1), "probe")?;
    let mut metrics: Vec<&InvariantMetric> = vec![&fs, &strong];
    metrics.extend(identity_metrics);
    metrics.extend(seeded.iter());
    let lifts = [
        Rational::new(1, 2),
        Rational::new(0, 1),
        Rational::new(1, 3),
    ];
    let (mut metric_dep, mut power_dep, mut affinity, mut sl_vanish) =
        (0.0f64, 0.0f64, 0.0f64, 0.0f64);
    for c in lifts {
        let lift = Lift::constant(c);
        let reference = chi(&lift, 4, &fs)?;
        for g in &metrics {
            let values: Vec<f64> = DEFAULT_OBSTRUCTION_POWERS
                .iter()
                .map(|&m| chi(&lift, m, g))
                .collect::<Result<_, _>>()?;
            let hi = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let lo = values.iter().cloned().fold(f64::INFINITY, f64::min);
            power_dep = power_dep.max(hi - lo);
            metric_dep = metric_dep.max((values[0] - reference).abs());
            let sl_value = chi(&Lift::sl(), 4, g)?;
            let c_f = *c.numer() as f64 / *c.denom() as f64;
            affinity = affinity.max((values[0] - sl_value - 2.0 * (c_f - 0.5)).abs());
            for &m in &DEFAULT_OBSTRUCTION_POWERS {
                sl_vanish =
                    sl_vanish.max(bergman_lab::equivariant::obstruction(&Lift::sl(), m, g)?.abs());
            }
        }
    }
    checks.bound("chi_metric_independence", metric_dep, tol.character);
    checks.bound("chi_power_independence", power_dep, tol.character);
    checks.bound("chi_affinity", affinity, 1e-12);
    checks.bound("sl_obstruction", sl_vanish, tol.character);

    let mut pullback: f64 = 0.0;
    for g in metrics
        .iter()
        .take(if configured.is_some() { 3 } else { 2 })
    {
        for m in [2u32, 8, 32] {
            pullback = pullback.max(verify_46(m, g)?);
        }
    }
    checks.bound("pullback_identity", pullback, tol.character);

    // Corrector on an injected perturbation
    let psi = if cfg.inject.is_empty() {
        InvariantFunction::legendre(2, 0.1)
    } else {
        cfg.inject_fn().with_degree_cap(cfg.degree)
    };
    let spoiled = ApproxState::fubini_study(grid.clone()).with_injection(1, psi.clone());
    let before = order_from_deviations(&DEFAULT_SWEEP, &sup_deviations(&spoiled, &DEFAULT_SWEEP)?);
    let options = StepOptions {
        refine_sweeps: cfg.refine_sweeps,
        kernel_rel: tol.kernel,
        ..StepOptions::default()
    };
    let (next, report) = step_with(&spoiled, &DEFAULT_SWEEP, options)?;
    let after = corrector::verify_order(&next, &DEFAULT_SWEEP)?;
    let recovery = (&next.corrections()[0] + &psi).sup_norm(&grid) / psi.sup_norm(&grid);
    checks.bound("corrector_recovery", recovery, tol.recovery);
    let before_slope = before.slope().unwrap_or(f64::INFINITY);
    checks.bound(
        "corrector_slope_before",
        before_slope - 2.0,
        corrector::SLOPE_SLACK,
    );
    checks.record(
        "corrector_slope_after",
        after.to_string(),
        num(3.0 - corrector::SLOPE_SLACK),
        after.passes(1),
        verdict_value(&after),
    );
    checks.bound(
        "kernel_residual",
        kernel_ratio(report.initial.v, report.initial.u_norm, &options),
        tol.kernel,
    );
    let realized_ok = DEFAULT_SWEEP.iter().all(|&m| realize(&next, m).is_ok());
    checks.record(
        "realizable",
        realized_ok.to_string(),
        "true".into(),
        realized_ok,
        json!(realized_ok),
    );
    checks.bound(
        "orthogonality",
        corrector::verify_47(&next, &Lift::sl(), &DEFAULT_SWEEP)?,
        tol.character,
    );

    out.write_csv(
        "checks.csv",
        &["name", "value", "tolerance", "pass"],
        &checks.rows,
    )?;
    let mut outcome = Outcome {
        pass: checks.failed.is_empty(),
        reason: (!checks.failed.is_empty())
            .then(|| format!("failed: {}", checks.failed.join(", "))),
        summary: checks.summary,
    };
    outcome
        .summary
        .insert("checks".into(), json!(outcome.summary.len()));
    Ok(outcome)
}
