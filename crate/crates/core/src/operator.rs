//! Pointwise evaluation of the logarithmic Laplacian
//!
//! L_Δu(x) = c_N ∫_{B_1(x)} (u(x) − u(y))/|x−y|^N dy − c_N ∫_{R^N∖B_1(x)} u(y)/|x−y|^N dy + ρ_N u(x),
//!
//! the geometry function h_Ω, the killing measure κ_Ω, the Ω-restricted
//! representation, and residuals of the Leibniz and scaling identities.

use crate::error::{invalid, LoglapError, Result};
use crate::field::{DiniClass, FeatureShape, ScalarField};
use crate::geometry::{norm, Domain};
use crate::quadrature::{
    adaptive, integrate_graded_with, sphere_average_est, sphere_integral, AngularHints, GradedOptions,
    IntegralResult, QuadConfig, TailModel,
};
use crate::special::constants_for;
use serde::{Deserialize, Serialize};
use std::cell::Cell;

pub use crate::solver::{bilinear_e, bilinear_el};

/// Points closer than this to ∂Ω or to a singular set are rejected.
pub const SINGULAR_GUARD: f64 = 1e-12;

/// The three terms of the integral representation and their sum.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LoglapValue {
    pub near: IntegralResult,
    pub far: IntegralResult,
    pub zero_order: f64,
    pub total: f64,
}

impl LoglapValue {
    pub fn error_estimate(&self) -> f64 {
        self.near.error_estimate + self.far.error_estimate
    }
}

/// Residual of an identity together with the quadrature error budget.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IdentityResidual {
    pub residual: f64,
    pub error_estimate: f64,
}

fn check_point(u: &ScalarField, x: &[f64]) -> Result<()> {
    if x.len() != u.dim() {
        return invalid("point dimension does not match the field");
    }
    if x.iter().any(|v| !v.is_finite()) {
        return invalid("point must be finite");
    }
    if !u.dini_on_features() && u.singular_distance(x) < SINGULAR_GUARD {
        return Err(LoglapError::Singular(format!("{} is not Dini continuous at {x:?}", u.label())));
    }
    Ok(())
}

/// Radii where S_r(x) starts or stops meeting a feature or the support ball.
fn critical_radii(u: &ScalarField, x: &[f64]) -> Vec<f64> {
    let mut out: Vec<f64> = u.features().iter().flat_map(|f| f.critical_radii(x)).collect();
    let s = u.support_radius();
    let d = norm(x);
    out.push((d - s).abs());
    out.push(d + s);
    out
}

/// σ_N ∫_a^b (c − mean_{S_r(x)} u)/r dr when `center` is `Some(c)` (with
/// a = 0 meaning a graded integral down to the singular point), otherwise
/// σ_N ∫_a^b mean_{S_r(x)} u / r dr.
pub(crate) fn radial_mean_integral(
    u: &ScalarField,
    x: &[f64],
    a: f64,
    b: f64,
    center: Option<f64>,
    cfg: &QuadConfig,
) -> Result<IntegralResult> {
    let n = x.len();
    let sigma = constants_for(n)?.sigma_n;
    if !(b > a) {
        return Ok(IntegralResult::exact(0.0));
    }
    let r_min = if a > 0.0 {
        a
    } else {
        let d = u.feature_distance(x);
        if d.is_finite() && d > 0.0 {
            cfg.min_radius.min(1e-5 * d)
        } else {
            cfg.min_radius
        }
    };
    let span = (b / r_min).ln().max(1.0);
    let inner_tol = 0.05 * cfg.abs_tol / (sigma * span);
    let inner_err = Cell::new(0.0f64);
    let evals = Cell::new(0usize);
    let mut failure: Option<LoglapError> = None;
    let mut profile = |r: f64| -> f64 {
        match sphere_average_est(u, x, r, cfg, inner_tol) {
            Ok((m, e, k)) => {
                inner_err.set(inner_err.get().max(e));
                evals.set(evals.get() + k);
                match center {
                    Some(c) => c - m,
                    None => m,
                }
            }
            Err(err) => {
                failure.get_or_insert(err);
                0.0
            }
        }
    };
    let tail = if a > 0.0 {
        TailModel::None
    } else if u.singular_distance(x) > 0.0 || matches!(u.dini_class(), DiniClass::Smooth) {
        TailModel::Vanishing
    } else {
        TailModel::LogModulus
    };
    let opts = GradedOptions { r_min: Some(r_min), r_max: b, breaks: critical_radii(u, x), tail };
    let local = QuadConfig { abs_tol: 0.5 * cfg.abs_tol / sigma, ..*cfg };
    let mut res = if a > 0.0 {
        // no grading needed away from the singular point
        let mut pts = vec![a.ln(), b.ln()];
        pts.extend(opts.breaks.iter().filter(|&&t| t > a && t < b).map(|t| t.ln()));
        let mut g = |s: f64| profile(s.exp());
        adaptive(&mut g, &pts, local.abs_tol, cfg.rel_tol, cfg.max_panels)
    } else {
        integrate_graded_with(&mut profile, &local, &opts)
    };
    if let Some(e) = failure {
        return Err(e);
    }
    res.evaluations += evals.get();
    res.error_estimate += inner_err.get() * span;
    let res = res.scaled(sigma);
    Ok(IntegralResult { converged: res.converged && res.error_estimate <= cfg.tolerance_for(res.value), ..res })
}

/// ∫_{B_1(x)} (u(x) − u(y))/|x−y|^N dy, without the factor c_N.
pub fn near_integral(u: &ScalarField, x: &[f64], cfg: &QuadConfig) -> Result<IntegralResult> {
    check_point(u, x)?;
    radial_mean_integral(u, x, 0.0, 1.0, Some(u.value(x)), cfg)
}

/// ∫_{R^N∖B_1(x)} u(y)/|x−y|^N dy over the support ball, without c_N.
pub fn far_integral(u: &ScalarField, x: &[f64], cfg: &QuadConfig) -> Result<IntegralResult> {
    check_point(u, x)?;
    let d = norm(x);
    let lo = 1f64.max(d - u.support_radius());
    let hi = d + u.support_radius();
    radial_mean_integral(u, x, lo, hi, None, cfg)
}

/// L_Δu(x) from the integral representation.
pub fn eval_loglap(u: &ScalarField, x: &[f64], cfg: &QuadConfig) -> Result<LoglapValue> {
    check_point(u, x)?;
    let c = constants_for(x.len())?;
    let near = near_integral(u, x, cfg)?.scaled(c.c_n);
    let far = far_integral(u, x, cfg)?.scaled(c.c_n);
    let zero_order = c.rho_n * u.value(x);
    Ok(LoglapValue { near, far, zero_order, total: near.value - far.value + zero_order })
}

fn check_domain_point(domain: &Domain, x: &[f64]) -> Result<()> {
    if x.len() != domain.dim() {
        return invalid("point dimension does not match the domain");
    }
    let d = domain.dist_boundary(x)?;
    if d < SINGULAR_GUARD {
        return Err(LoglapError::Singular(format!("{x:?} is within {SINGULAR_GUARD} of the boundary")));
    }
    Ok(())
}

/// ∫ dr/r over (0,1) outside the domain and over the domain outside (0,1),
/// along the ray x + rθ.
fn ray_log_terms(domain: &Domain, x: &[f64], theta: &[f64]) -> (f64, f64) {
    let iv = domain.ray_intervals(x, theta);
    let mut kappa = 0.0;
    let mut far = 0.0;
    let mut cursor = 0.0f64;
    for &(lo, hi) in &iv {
        if lo > cursor && cursor < 1.0 {
            let gap_lo = cursor.max(1e-300);
            let gap_hi = lo.min(1.0);
            if gap_hi > gap_lo && cursor > 0.0 {
                kappa += (gap_hi / gap_lo).ln();
            }
        }
        if hi > 1.0 {
            far += (hi / lo.max(1.0)).ln();
        }
        cursor = hi;
    }
    if cursor < 1.0 {
        kappa += (1.0 / cursor).ln();
    }
    (kappa, far)
}

fn domain_hints(domain: &Domain, x: &[f64]) -> AngularHints {
    let breaks = if x.len() == 2 {
        domain.corners().iter().map(|c| (c[1] - x[1]).atan2(c[0] - x[0])).collect()
    } else {
        vec![]
    };
    AngularHints { smooth: breaks.is_empty() && domain.is_convex(), breaks }
}

fn sphere_of_log_terms(
    domain: &Domain,
    x: &[f64],
    cfg: &QuadConfig,
    pick: impl Fn((f64, f64)) -> f64,
    smooth: bool,
) -> Result<IntegralResult> {
    let c = constants_for(x.len())?;
    let mut hints = domain_hints(domain, x);
    hints.smooth = hints.smooth && smooth;
    let mut g = |th: &[f64]| pick(ray_log_terms(domain, x, th));
    let (v, e, k) = sphere_integral(x.len(), &mut g, &hints, cfg.abs_tol / c.c_n, cfg.angular_order, cfg.max_panels)?;
    let r = IntegralResult { value: v, error_estimate: e, evaluations: k, converged: true }.scaled(c.c_n);
    Ok(IntegralResult { converged: r.error_estimate <= cfg.tolerance_for(r.value), ..r })
}

/// h_Ω(x) = c_N (∫_{B_1(x)∖Ω} − ∫_{Ω∖B_1(x)}) |x−y|^{-N} dy.
///
/// Along each ray the radial integrals of dr/r are exact logarithms, so
/// only the angular integral is numerical.
pub fn h_omega(domain: &Domain, x: &[f64], cfg: &QuadConfig) -> Result<IntegralResult> {
    check_domain_point(domain, x)?;
    sphere_of_log_terms(domain, x, cfg, |(k, f)| k - f, true)
}

/// κ_Ω(x) = c_N ∫_{B_1(x)∖Ω} |x−y|^{-N} dy.
pub fn kappa_omega(domain: &Domain, x: &[f64], cfg: &QuadConfig) -> Result<IntegralResult> {
    check_domain_point(domain, x)?;
    sphere_of_log_terms(domain, x, cfg, |(k, _)| k, false)
}

/// c_N ∫_{Ω∖B_1(x)} |x−y|^{-N} dy.
pub fn omega_far(domain: &Domain, x: &[f64], cfg: &QuadConfig) -> Result<IntegralResult> {
    check_domain_point(domain, x)?;
    sphere_of_log_terms(domain, x, cfg, |(_, f)| f, false)
}

/// Directions (N = 2) in which rays from x are tangent to feature spheres.
pub(crate) fn tangent_angles(u: &ScalarField, x: &[f64]) -> Vec<f64> {
    let mut out = Vec::new();
    if x.len() != 2 {
        return out;
    }
    for f in u.features() {
        if let FeatureShape::Sphere { center, radius } = &f.shape {
            let d = [center[0] - x[0], center[1] - x[1]];
            let dn = d[0].hypot(d[1]);
            if dn > *radius {
                let a = d[1].atan2(d[0]);
                let w = (radius / dn).asin();
                out.extend([a - w, a + w]);
            }
        }
    }
    out
}

/// Per-ray angular integral of ∫_{ray∩Ω} g(x + rθ, r) dr, with the inner
/// radial integrals adaptive and breakpoints at feature crossings.
pub(crate) fn ray_integral(
    domain: &Domain,
    u: &ScalarField,
    x: &[f64],
    cfg: &QuadConfig,
    scale: f64,
    g: &dyn Fn(&[f64], f64) -> f64,
) -> Result<IntegralResult> {
    let n = x.len();
    let sigma = constants_for(n)?.sigma_n;
    let mut hints = domain_hints(domain, x);
    hints.breaks.extend(tangent_angles(u, x));
    hints.smooth = false;
    let inner_tol = 0.05 * cfg.abs_tol / (sigma * scale.abs().max(1e-300));
    let inner_err = Cell::new(0.0f64);
    let evals = Cell::new(0usize);
    let mut per_ray = |th: &[f64]| {
        let mut total = 0.0;
        for (lo, hi) in domain.ray_intervals(x, th) {
            let mut pts = vec![lo, hi];
            for f in u.features() {
                pts.extend(f.ray_crossings(x, th).into_iter().filter(|&t| t > lo && t < hi));
            }
            let mut p = vec![0.0; n];
            let mut h = |r: f64| {
                for k in 0..n {
                    p[k] = x[k] + r * th[k];
                }
                g(&p, r)
            };
            let r = adaptive(&mut h, &pts, inner_tol, 0.0, cfg.max_panels);
            inner_err.set(inner_err.get().max(r.error_estimate));
            evals.set(evals.get() + r.evaluations);
            total += r.value;
        }
        total
    };
    let outer_tol = 0.5 * cfg.abs_tol / scale.abs().max(1e-300);
    let (v, e, k) = sphere_integral(n, &mut per_ray, &hints, outer_tol, cfg.angular_order, cfg.max_panels)?;
    let err = e + sigma * inner_err.get();
    let r = IntegralResult { value: v, error_estimate: err, evaluations: k + evals.get(), converged: true }.scaled(scale);
    Ok(IntegralResult { converged: r.error_estimate <= cfg.tolerance_for(r.value), ..r })
}

/// c_N ∫_Ω (u(x) − u(y))/|x−y|^N dy + (h_Ω(x) + ρ_N) u(x) for u supported in Ω.
pub fn eval_loglap_domain(u: &ScalarField, domain: &Domain, x: &[f64], cfg: &QuadConfig) -> Result<IntegralResult> {
    check_point(u, x)?;
    check_domain_point(domain, x)?;
    let c = constants_for(x.len())?;
    let ux = u.value(x);
    let inner = ray_integral(domain, u, x, cfg, c.c_n, &|p, r| (ux - u.value(p)) / r)?;
    let h = h_omega(domain, x, cfg)?;
    let zero = IntegralResult { value: (h.value + c.rho_n) * ux, error_estimate: h.error_estimate * ux.abs(), ..h };
    Ok(inner.plus(zero))
}

/// L_Δ[uv](x) − u(x)L_Δv(x) − v(x)L_Δu(x) + I(u,v)(x), each term computed
/// by its own quadrature.
pub fn leibniz_residual(u: &ScalarField, v: &ScalarField, x: &[f64], cfg: &QuadConfig) -> Result<IdentityResidual> {
    check_point(u, x)?;
    check_point(v, x)?;
    let c = constants_for(x.len())?;
    let uv = ScalarField::product(u, v);
    let l_uv = eval_loglap(&uv, x, cfg)?;
    let l_u = eval_loglap(u, x, cfg)?;
    let l_v = eval_loglap(v, x, cfg)?;
    let (ux, vx) = (u.value(x), v.value(x));

    // I(u,v): near part with (u(x)−u(y))(v(x)−v(y)), far part with uv − u(x)v − v(x)u.
    let (a, b) = (u.clone(), v.clone());
    let mut feats = u.features().to_vec();
    feats.extend(v.features().iter().cloned());
    let reach = norm(x) + 1.5;
    let w = ScalarField::new(x.len(), reach, DiniClass::Smooth, "leibniz-near", move |y| {
        (ux - a.value(y)) * (vx - b.value(y))
    })
    .with_features(feats.clone());
    let (a, b) = (u.clone(), v.clone());
    let z = ScalarField::new(x.len(), u.support_radius().max(v.support_radius()), DiniClass::Smooth, "leibniz-far", move |y| {
        let (p, q) = (a.value(y), b.value(y));
        p * q - ux * q - p * vx
    })
    .with_features(feats);
    let near = radial_mean_integral(&w, x, 0.0, 1.0, Some(0.0), cfg)?.scaled(-c.c_n);
    let d = norm(x);
    let far = radial_mean_integral(&z, x, 1f64.max(d - z.support_radius()), d + z.support_radius(), None, cfg)?
        .scaled(c.c_n);
    let i_uv = near.value + far.value + c.rho_n * ux * vx;

    let residual = l_uv.total - ux * l_v.total - vx * l_u.total + i_uv;
    let err = l_uv.error_estimate()
        + ux.abs() * l_v.error_estimate()
        + vx.abs() * l_u.error_estimate()
        + near.error_estimate
        + far.error_estimate;
    Ok(IdentityResidual { residual, error_estimate: err })
}

/// L_Δ[u(·/λ)](x) − L_Δu(x/λ) − ln(λ^{-2}) u(x/λ).
pub fn scaling_residual(u: &ScalarField, lambda: f64, x: &[f64], cfg: &QuadConfig) -> Result<IdentityResidual> {
    if !(lambda > 0.0) {
        return invalid("λ must be positive");
    }
    let ul = u.dilated(lambda);
    let y: Vec<f64> = x.iter().map(|v| v / lambda).collect();
    let lhs = eval_loglap(&ul, x, cfg)?;
    let rhs = eval_loglap(u, &y, cfg)?;
    let residual = lhs.total - rhs.total - (lambda.powi(-2)).ln() * u.value(&y);
    Ok(IdentityResidual { residual, error_estimate: lhs.error_estimate() + rhs.error_estimate() })
}

/// The fixed Leibniz suite: (u, v, x) triples in one and two dimensions.
pub fn leibniz_suite() -> Vec<(ScalarField, ScalarField, Vec<f64>)> {
    let b1 = ScalarField::bump(&[0.0], 0.8, 1.0);
    let b1s = ScalarField::bump(&[0.5], 0.6, 0.7);
    let g1 = ScalarField::gaussian(1);
    let b2 = ScalarField::bump(&[0.0, 0.0], 0.8, 1.0);
    let b2s = ScalarField::bump(&[1.0, 0.0], 0.5, 1.0);
    let g2 = ScalarField::gaussian(2);
    vec![
        (b1.clone(), b1.clone(), vec![0.0]),
        (b1.clone(), b1s.clone(), vec![0.3]),
        (b1.clone(), b1s.clone(), vec![0.9]),
        (g1.clone(), b1.clone(), vec![0.2]),
        (b1.clone(), ScalarField::bump(&[2.0], 0.5, 1.0), vec![1.0]),
        (g1.clone(), g1.clone(), vec![1.5]),
        (b2.clone(), b2.clone(), vec![0.0, 0.0]),
        (b2.clone(), b2s.clone(), vec![0.6, 0.0]),
        (g2.clone(), b2.clone(), vec![0.3, -0.2]),
        (b2.clone(), g2.clone(), vec![1.2, 0.4]),
    ]
}

/// The fixed representation suite: (field, domain, point) triples with the
/// field supported in the domain.
pub fn representation_suite() -> Vec<(ScalarField, Domain, Vec<f64>)> {
    let b1 = crate::barriers::BarrierSpec::default_for(1).expect("default spec is valid");
    let b2 = crate::barriers::BarrierSpec::default_for(2).expect("default spec is valid");
    let w1 = crate::barriers::barrier_field(&b1);
    let w2 = crate::barriers::barrier_field(&b2);
    let ball = |c: &[f64], r: f64| Domain::Ball { center: c.to_vec(), radius: r };
    vec![
        (w1.clone(), Domain::Interval { a: 0.0, b: 2.0 }, vec![0.3]),
        (w1, Domain::Interval { a: 0.0, b: 2.0 }, vec![0.05]),
        (ScalarField::bump(&[0.5], 0.4, 1.0), Domain::Interval { a: 0.0, b: 1.2 }, vec![0.5]),
        (ScalarField::bump(&[0.5], 0.4, 1.0), Domain::Interval { a: 0.0, b: 1.2 }, vec![1.0]),
        (ScalarField::gaussian(1), Domain::Interval { a: -9.5, b: 9.5 }, vec![0.7]),
        (ScalarField::bump(&[0.0, 0.0], 0.3, 1.0), ball(&[0.0, 0.0], 0.3), vec![0.0, 0.0]),
        (ScalarField::bump(&[0.6, 0.1], 0.5, 1.0), Domain::HalfBall { radius: 2.0, dim: 2 }, vec![0.5, 0.2]),
        (ScalarField::bump(&[0.75, 0.0], 0.2, 1.0), Domain::SphericalCap { dim: 2 }, vec![0.8, 0.05]),
        (w2, Domain::HalfBall { radius: 2.0, dim: 2 }, vec![0.1, 0.2]),
        (ScalarField::bump(&[1.0, 1.0], 0.7, 2.0), ball(&[1.0, 1.0], 1.0), vec![1.2, 0.9]),
    ]
}

/// The fixed scaling suite: (u, λ, x) triples.
pub fn scaling_suite() -> Vec<(ScalarField, f64, Vec<f64>)> {
    let b1 = ScalarField::bump(&[0.0], 0.8, 1.0);
    let b2 = ScalarField::bump(&[0.1, 0.0], 0.7, 1.0);
    vec![
        (b1.clone(), 1.0, vec![0.3]),
        (b1.clone(), 2.0, vec![0.0]),
        (b1.clone(), 0.5, vec![0.1]),
        (b1.clone(), 3.0, vec![1.2]),
        (ScalarField::gaussian(1), 0.7, vec![0.4]),
        (ScalarField::gaussian(1), 1.5, vec![2.0]),
        (b2.clone(), 2.0, vec![0.0, 0.0]),
        (b2.clone(), 0.5, vec![0.1, 0.0]),
        (b2.clone(), 1.3, vec![0.2, 0.3]),
        (ScalarField::gaussian(2), 0.8, vec![0.5, 0.0]),
    ]
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::LN_2;

    #[test]
    fn zero_field_gives_zero() {
        let cfg = QuadConfig::for_dim(1);
        let v = eval_loglap(&ScalarField::zero(1), &[0.3], &cfg).unwrap();
        assert_eq!(v.total, 0.0);
        let d = Domain::Interval { a: 0.0, b: 1.0 };
        assert_eq!(eval_loglap_domain(&ScalarField::zero(1), &d, &[0.3], &cfg).unwrap().value, 0.0);
    }

    #[test]
    fn gaussian_at_origin_1d() {
        // −γ − ln 2 for the unit Gaussian at the origin
        let cfg = QuadConfig::for_dim(1);
        let v = eval_loglap(&ScalarField::gaussian(1), &[0.0], &cfg).unwrap();
        assert!((v.total - (-0.577_215_664_901_532_9 - LN_2)).abs() < 1e-7, "{}", v.total);
        assert!((v.total - (v.near.value - v.far.value + v.zero_order)).abs() == 0.0);
    }

    #[test]
    fn h_omega_examples() {
        let cfg = QuadConfig::for_dim(1);
        let i = Domain::Interval { a: -0.5, b: 0.5 };
        assert!((h_omega(&i, &[0.0], &cfg).unwrap().value - 2.0 * LN_2).abs() < 1e-14);
        assert!((kappa_omega(&i, &[0.0], &cfg).unwrap().value - 2.0 * LN_2).abs() < 1e-14);
        let unit = Domain::Interval { a: -1.0, b: 1.0 };
        assert!(h_omega(&unit, &[0.0], &cfg).unwrap().value.abs() < 1e-15);
        let cfg2 = QuadConfig::for_dim(2);
        let b2 = Domain::Ball { center: vec![0.0, 0.0], radius: 2.0 };
        assert!((h_omega(&b2, &[0.0, 0.0], &cfg2).unwrap().value + 2.0 * LN_2).abs() < 1e-10);
        assert!(h_omega(&i, &[0.5], &cfg).is_err());
        assert!(h_omega(&i, &[0.5 - 1e-13], &cfg).is_err());
    }

    #[test]
    fn h_ball_closed_form() {
        // h_{B_R}(x) = −ln(R² − |x|²) in every dimension
        for n in [1usize, 2, 3] {
            let cfg = QuadConfig::for_dim(n);
            let dom = Domain::Ball { center: vec![0.0; n], radius: 0.7 };
            let mut x = vec![0.0; n];
            x[0] = 0.4;
            let h = h_omega(&dom, &x, &cfg).unwrap();
            assert!((h.value + (0.49f64 - 0.16).ln()).abs() < 1e-6, "n={n}: {}", h.value);
        }
    }

    #[test]
    fn kappa_monotone_under_shrinking() {
        let cfg = QuadConfig::for_dim(2);
        let big = Domain::Ball { center: vec![0.0, 0.0], radius: 1.2 };
        let small = Domain::Ball { center: vec![0.0, 0.0], radius: 0.6 };
        let x = [0.1, 0.2];
        assert!(kappa_omega(&small, &x, &cfg).unwrap().value >= kappa_omega(&big, &x, &cfg).unwrap().value);
        let hb = Domain::HalfBall { radius: 2.0, dim: 2 };
        let k = kappa_omega(&hb, &[0.5, 0.0], &cfg).unwrap();
        assert!(k.value > 0.0);
    }

    #[test]
    fn h_decomposition() {
        let cfg = QuadConfig::for_dim(2);
        for (d, x) in [
            (Domain::HalfBall { radius: 2.0, dim: 2 }, vec![0.3, 0.5]),
            (Domain::Ball { center: vec![0.5, 0.0], radius: 1.5 }, vec![0.0, 0.2]),
            (Domain::SphericalCap { dim: 2 }, vec![0.7, 0.1]),
        ] {
            let h = h_omega(&d, &x, &cfg).unwrap();
            let k = kappa_omega(&d, &x, &cfg).unwrap();
            let f = omega_far(&d, &x, &cfg).unwrap();
            let budget = h.error_estimate + k.error_estimate + f.error_estimate;
            assert!((h.value - (k.value - f.value)).abs() <= budget.max(1e-12));
        }
    }

    #[test]
    fn representations_agree_for_bump_1d() {
        let cfg = QuadConfig::for_dim(1);
        let u = ScalarField::bump(&[0.5], 0.4, 1.0);
        let d = Domain::Interval { a: 0.0, b: 1.2 };
        for x in [0.3, 0.5, 0.85] {
            let a = eval_loglap(&u, &[x], &cfg).unwrap();
            let b = eval_loglap_domain(&u, &d, &[x], &cfg).unwrap();
            assert!((a.total - b.value).abs() <= a.error_estimate() + b.error_estimate, "x={x}");
        }
    }

    #[test]
    fn scaling_identity_trivial_lambda() {
        let cfg = QuadConfig::for_dim(1);
        let r = scaling_residual(&ScalarField::bump(&[0.0], 0.8, 1.0), 1.0, &[0.3], &cfg).unwrap();
        assert_eq!(r.residual, 0.0);
    }

    #[test]
    fn leibniz_with_zero_factor() {
        let cfg = QuadConfig::for_dim(1);
        let r = leibniz_residual(&ScalarField::zero(1), &ScalarField::bump(&[0.0], 0.8, 1.0), &[0.1], &cfg).unwrap();
        assert!(r.residual.abs() <= r.error_estimate.max(1e-14));
    }

    #[test]
    fn indicator_field_rejected_on_jump() {
        let cfg = QuadConfig::for_dim(1);
        let f = ScalarField::new(1, 2.0, DiniClass::Indicator, "chi", |x| if x[0].abs() < 1.0 { 1.0 } else { 0.0 })
            .with_features(vec![crate::field::Feature::plane(0, 1.0, true)]);
        assert!(eval_loglap(&f, &[1.0], &cfg).is_err());
        assert!(eval_loglap(&f, &[0.5], &cfg).is_ok());
    }
}
