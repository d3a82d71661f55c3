//! One function per subcommand. Each builds a [`Report`]; the caller renders
//! it and turns failed checks into exit code 1.

use crate::config::{build_field, cfg_err, read_record, ConfigError, RunConfig};
use crate::report::{Cell, Check, Report};
use crate::CliError;
use loglap::barriers::{
    barrier_positivity_radius, extrapolate_log_sqrt, probe_far_field_1d, probe_far_field_nd, probe_j2_1d,
    probe_j2_nd, probe_j_1d, probe_j_nd, standard_eps_sweep,
};
use loglap::geometry::Domain;
use loglap::kelvin::{kelvin_identity_residual, kelvin_suite};
use loglap::operator::eval_loglap;
use loglap::solver::{exponent_fit, solve_sublinear, torsion as solve_torsion, GridFunction, Grid};
use loglap::special::constants_for;
use std::f64::consts::LN_2;
use std::path::Path;

/// Target of both barrier intercepts in one dimension.
pub const BARRIER_INTERCEPT: f64 = 1.665_109_222_315_395_5;
pub const INTERCEPT_TOL: f64 = 0.1;
/// Kelvin residuals may reach this multiple of the summed error estimates.
pub const KELVIN_FACTOR: f64 = 3.0;
pub const ALPHA_TOL: f64 = 0.1;

/// Smallest ε of the quick sweep.
const QUICK_EPS_MIN: f64 = 1e-6;

pub fn eps_sweep(quick: bool) -> Vec<f64> {
    let mut e = standard_eps_sweep();
    if quick {
        e.retain(|&x| x >= QUICK_EPS_MIN * 0.999);
    }
    e
}

pub fn constants(cfg: &RunConfig) -> Result<Report, CliError> {
    let n = cfg.require_dim()?;
    let c = constants_for(n)?;
    let mut r = Report::new("constants", &["quantity", "value"]);
    r.row(vec!["dim".into(), n.into()]);
    r.row(vec!["c_N".into(), c.c_n.into()]);
    r.row(vec!["rho_N".into(), c.rho_n.into()]);
    r.row(vec!["sigma_N".into(), c.sigma_n.into()]);
    r.row(vec!["euler_gamma".into(), c.gamma.into()]);
    r.row(vec!["mp_volume_threshold".into(), c.mp_volume_threshold.into()]);
    r.row(vec!["mp_radius".into(), c.mp_radius().into()]);
    Ok(r)
}

pub fn eval(cfg: &RunConfig) -> Result<Report, CliError> {
    let spec = cfg.field.as_ref().ok_or_else(|| ConfigError("missing --field".into()))?;
    let field = build_field(spec)?;
    let points = cfg.points.as_ref().ok_or_else(|| ConfigError("missing --points".into()))?;
    let n = field.dim();
    if let Some(p) = points.iter().find(|p| p.len() != n) {
        return Err(ConfigError(format!("point {p:?} does not have dimension {n}")).into());
    }
    let q = cfg.quad(n)?;
    let mut cols: Vec<String> = (1..=n).map(|k| format!("x{k}")).collect();
    cols.extend(["near", "far", "zero_order", "total", "error"].map(String::from));
    let mut r = Report::new("eval", &cols.iter().map(String::as_str).collect::<Vec<_>>());
    r.extra("field", spec);
    for p in points {
        let v = eval_loglap(&field, p, &q)?;
        let mut row: Vec<Cell> = p.iter().map(|&x| x.into()).collect();
        row.extend([v.near.value, v.far.value, v.zero_order, v.total, v.error_estimate()].map(Cell::from));
        r.row(row);
    }
    Ok(r)
}

pub fn barrier_probe(cfg: &RunConfig) -> Result<Report, CliError> {
    let n = cfg.require_dim()?;
    let spec = cfg.barrier_spec(n)?;
    let q = cfg.quad(n)?;
    let eps = eps_sweep(cfg.quick.unwrap_or(false));
    let mut r = Report::new("barrier-probe", &["eps", "j", "j2", "far_field"]);
    let (mut j, mut j2, mut far) = (Vec::new(), Vec::new(), Vec::new());
    for &e in &eps {
        let (a, b, c) = if n == 1 {
            (probe_j_1d(e, &spec, &q)?, probe_j2_1d(e, &spec, &q)?, probe_far_field_1d(e, &spec, &q)?)
        } else {
            (probe_j_nd(e, n, &spec, &q)?, probe_j2_nd(e, n, &spec, &q)?, probe_far_field_nd(e, n, &spec, &q)?)
        };
        r.row(vec![e.into(), a.value.into(), b.value.into(), c.value.into()]);
        j.push(a.value);
        j2.push(b.value + 2.0 * (-e.ln()).sqrt());
        far.push(c.value);
    }
    let fj = extrapolate_log_sqrt(&eps, &j)?;
    let fj2 = extrapolate_log_sqrt(&eps, &j2)?;
    r.extra("j_fit", fj);
    r.extra("j2_shifted_fit", fj2);
    if n == 1 {
        let bound = 0.5 * LN_2.sqrt();
        let far_max = far.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        r.check(Check::new(
            "j_intercept",
            (fj.intercept - BARRIER_INTERCEPT).abs() <= INTERCEPT_TOL,
            format!("{:.6} vs {BARRIER_INTERCEPT:.6} +/- {INTERCEPT_TOL}", fj.intercept),
        ));
        r.check(Check::new(
            "j2_intercept",
            (fj2.intercept - BARRIER_INTERCEPT).abs() <= INTERCEPT_TOL,
            format!("{:.6} vs {BARRIER_INTERCEPT:.6} +/- {INTERCEPT_TOL}", fj2.intercept),
        ));
        r.check(Check::new("far_field", far_max < bound, format!("max {far_max:.6} < {bound:.6}")));
    }
    let pos = barrier_positivity_radius(&spec, &q)?;
    r.check(Check::new(
        "positivity",
        pos.delta_hat > 0.0,
        format!("delta_hat {:e} against threshold {:.6}", pos.delta_hat, pos.threshold),
    ));
    r.extra("positivity", &pos);
    Ok(r)
}

pub fn kelvin_verify(cfg: &RunConfig) -> Result<Report, CliError> {
    let n = cfg.require_dim()?;
    let q = cfg.quad(n)?;
    let suite = kelvin_suite(n)?;
    let mut cols: Vec<String> = vec!["case".into()];
    cols.extend((1..=n).map(|k| format!("x{k}")));
    cols.extend(["residual", "error_estimate"].map(String::from));
    let mut r = Report::new("kelvin-verify", &cols.iter().map(String::as_str).collect::<Vec<_>>());
    let mut worst = 0.0f64;
    for (k, case) in suite.iter().enumerate() {
        for x in &case.points {
            let res = kelvin_identity_residual(&case.field, &case.ctx, x, &q)?;
            worst = worst.max(res.residual.abs() / res.error_estimate);
            let mut row: Vec<Cell> = vec![k.into()];
            row.extend(x.iter().map(|&v| Cell::from(v)));
            row.extend([res.residual.into(), res.error_estimate.into()]);
            r.row(row);
        }
    }
    r.check(Check::new(
        "kelvin_identity",
        worst <= KELVIN_FACTOR,
        format!("worst |residual|/estimate {worst:.4} (limit {KELVIN_FACTOR})"),
    ));
    Ok(r)
}

fn grid_for(cfg: &RunConfig, domain: &Domain) -> Result<Grid, CliError> {
    Ok(Grid::new(domain, cfg.n.unwrap_or(129), cfg.grading()?)?)
}

fn solution_rows(r: &mut Report, u: &GridFunction) {
    for (x, v) in u.grid().nodes().iter().zip(u.nodal_values()) {
        r.row(vec![(*x).into(), v.into()]);
    }
    r.extra("solution", u.record());
}

fn interior_positive(u: &GridFunction) -> (bool, f64) {
    let c = u.coefficients();
    let min = c.iter().copied().fold(f64::INFINITY, f64::min);
    (min > 0.0, min)
}

pub fn torsion(cfg: &RunConfig, fit_output: Option<&Path>) -> Result<Report, CliError> {
    let domain = cfg.require_domain()?;
    let window = cfg.window()?;
    let grid = grid_for(cfg, &domain)?;
    let u = solve_torsion(&domain, &grid, &cfg.quad(domain.dim())?)?;
    let mut r = Report::new("torsion", &["node", "value"]);
    solution_rows(&mut r, &u);
    let (pos, min) = interior_positive(&u);
    r.check(Check::new("positive", pos, format!("min interior value {min:.6e}")));
    let fit = exponent_fit(&u, window)?;
    r.check(Check::new(
        "boundary_exponent",
        (fit.alpha_hat - 0.5).abs() <= ALPHA_TOL,
        format!("alpha_hat {:.4} (0.5 +/- {ALPHA_TOL}), r2 {:.5}", fit.alpha_hat, fit.r_squared),
    ));
    let fit_json = serde_json::to_string(&fit).expect("fit serializes");
    r.notes.push(format!("fit {fit_json}"));
    r.extra("fit", fit);
    if let Some(p) = fit_output {
        std::fs::write(p, fit_json + "\n").map_err(|e| ConfigError(format!("{}: {e}", p.display())))?;
    }
    Ok(r)
}

pub fn exponent_fit_report(cfg: &RunConfig) -> Result<Report, CliError> {
    let domain = cfg.require_domain()?;
    let path = cfg.input.as_ref().ok_or_else(|| ConfigError("missing --input".into()))?;
    let u = GridFunction::from_record(&domain, &read_record(path)?)?;
    let fit = exponent_fit(&u, cfg.window()?)?;
    let mut r = Report::new("exponent-fit", &["alpha_hat", "constant_hat", "r_squared", "samples", "window_lo", "window_hi"]);
    r.row(vec![
        fit.alpha_hat.into(),
        fit.constant_hat.into(),
        fit.r_squared.into(),
        fit.samples.into(),
        fit.window.0.into(),
        fit.window.1.into(),
    ]);
    r.extra("fit", fit);
    Ok(r)
}

/// (R² e^{1/2 − ρ_N})^{1/μ} with R = 2 diam Ω.
pub fn sublinear_sup_bound(domain: &Domain, mu: f64) -> Result<f64, ConfigError> {
    let diam = match domain {
        Domain::Interval { a, b } => b - a,
        Domain::Ball { radius, .. } => 2.0 * radius,
        _ => return cfg_err("sublinear problems are solved on intervals and balls"),
    };
    let rho = constants_for(domain.dim()).map_err(|e| ConfigError(e.to_string()))?.rho_n;
    let big_r = 2.0 * diam;
    Ok((big_r * big_r * (0.5 - rho).exp()).powf(1.0 / mu))
}

pub fn sublinear(cfg: &RunConfig) -> Result<Report, CliError> {
    let domain = cfg.require_domain()?;
    let mu = cfg.mu.unwrap_or(1.0);
    let bound = sublinear_sup_bound(&domain, mu)?;
    let grid = grid_for(cfg, &domain)?;
    let s = solve_sublinear(&domain, mu, &grid, &cfg.quad(domain.dim())?, None)?;
    let mut r = Report::new("sublinear", &["node", "value"]);
    solution_rows(&mut r, &s.u);
    let (pos, min) = interior_positive(&s.u);
    let sup = s.u.coefficients().iter().fold(0.0f64, |a, v| a.max(v.abs()));
    r.check(Check::new("positive", pos, format!("min interior value {min:.6e}")));
    r.check(Check::new("sup_bound", sup <= bound, format!("max |u| {sup:.6} <= {bound:.6}")));
    r.extra("energy", s.energy);
    r.extra("iterations", s.iterations);
    r.notes.push(format!("energy {:.16e} after {} iterations", s.energy, s.iterations));
    match exponent_fit(&s.u, cfg.window()?) {
        Ok(fit) => {
            r.notes.push(format!("fit {}", serde_json::to_string(&fit).expect("fit serializes")));
            r.extra("fit", fit);
        }
        Err(e) => r.notes.push(format!("no exponent fit: {e}")),
    }
    Ok(r)
}
