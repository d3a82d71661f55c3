//! Sphere inversion and the Kelvin transform u*(x*) = |x* − x0|^{−N} u(x)
//! with x* = x0 + R²(x − x0)/|x − x0|².
//!
//! For u supported in Ω with B_R(x0) ⊂ Ω^c the transform satisfies
//!
//! L_Δu*(x*) = |x*−x0|^{−N} [L_Δu(x) + (h_{Ω*}(x*) − h_Ω(x)) u(x)]
//!           + R^{−N} c_N |ξ*|^{−2N} u(x) C(ξ),
//!
//! where ξ = (x − x0)/R, ξ* = (x* − x0)/R and C is [`correction_integral`]
//! over the normalized domain (Ω − x0)/R.

use crate::error::{invalid, LoglapError, Result};
use crate::field::{Feature, FeatureShape, ScalarField};
use crate::geometry::{dist, dist2, norm, Domain, SpherePose};
use crate::operator::{eval_loglap, h_omega, IdentityResidual};
use crate::quadrature::{adaptive, sphere_integral, AngularHints, IntegralResult, QuadConfig};
use crate::special::constants_for;
use serde::{Deserialize, Serialize};
use std::cell::Cell;

/// Margin by which B_R(x0) must stay clear of the source domain.
pub const POSE_MARGIN: f64 = 1e-10;

/// x0 + R²(x − x0)/|x − x0|².
pub fn invert_point(x: &[f64], pose: &SpherePose) -> Result<Vec<f64>> {
    if x.len() != pose.x0.len() {
        return invalid("point dimension does not match the inversion centre");
    }
    let d2 = dist2(x, &pose.x0);
    if d2 == 0.0 {
        return invalid("the inversion centre has no image");
    }
    let s = pose.r * pose.r / d2;
    Ok(x.iter().zip(&pose.x0).map(|(v, c)| c + s * (v - c)).collect())
}

/// | |x* − z*| − |x − z|/(|x||z|) | for inversion in the unit sphere.
pub fn distance_identity_residual(x: &[f64], z: &[f64]) -> Result<f64> {
    let pose = SpherePose::unit(x.len());
    let xs = invert_point(x, &pose)?;
    let zs = invert_point(z, &pose)?;
    Ok((dist(&xs, &zs) - dist(x, z) / (norm(x) * norm(z))).abs())
}

fn domain_distance(domain: &Domain, p: &[f64]) -> Result<f64> {
    match domain {
        Domain::Interval { a, b } => Ok(if p[0] >= *a && p[0] <= *b { 0.0 } else { (p[0] - a).abs().min((p[0] - b).abs()) }),
        Domain::Ball { center, radius } => Ok((dist(p, center) - radius).max(0.0)),
        Domain::Indicator(r) => Ok(p
            .iter()
            .zip(r.lo.iter().zip(&r.hi))
            .map(|(v, (l, h))| (l - v).max(v - h).max(0.0).powi(2))
            .sum::<f64>()
            .sqrt()),
        _ => Err(LoglapError::Unsupported("Kelvin transforms of half-balls and caps".into())),
    }
}

/// Image of a sphere (c, ρ) not passing through x0.
fn invert_sphere(c: &[f64], rho: f64, pose: &SpherePose) -> (Vec<f64>, f64) {
    let r2 = pose.r * pose.r;
    let den = dist2(c, &pose.x0) - rho * rho;
    let center = c.iter().zip(&pose.x0).map(|(v, x0)| x0 + r2 * (v - x0) / den).collect();
    (center, r2 * rho / den.abs())
}

fn image_feature(f: &Feature, pose: &SpherePose) -> Option<Feature> {
    match &f.shape {
        FeatureShape::Sphere { center, radius } => {
            let gap = (dist(center, &pose.x0) - radius).abs();
            if gap < 1e-12 {
                return None;
            }
            let (c, r) = invert_sphere(center, *radius, pose);
            Some(Feature::sphere(c, r, f.singular))
        }
        FeatureShape::Plane { axis, offset } => {
            let d = offset - pose.x0[*axis];
            if d.abs() < 1e-12 {
                return Some(f.clone());
            }
            // a plane at signed distance d maps to the sphere through x0 with diameter R²/|d|
            let mut c = pose.x0.clone();
            c[*axis] += pose.r * pose.r / (2.0 * d);
            Some(Feature::sphere(c, pose.r * pose.r / (2.0 * d.abs()), f.singular))
        }
    }
}

/// Inversion pose together with a source domain and its image.
#[derive(Debug, Clone)]
pub struct KelvinContext {
    pub pose: SpherePose,
    pub source_domain: Domain,
    pub image_domain: Domain,
}

impl KelvinContext {
    /// Validates dist(x0, Ω) > R and computes Ω*.
    pub fn new(pose: SpherePose, source: Domain) -> Result<Self> {
        let n = source.dim();
        if pose.x0.len() != n {
            return invalid("pose and domain dimensions differ");
        }
        source.validate()?;
        let gap = domain_distance(&source, &pose.x0)?;
        if !(gap > pose.r + POSE_MARGIN) {
            return invalid(format!("inversion ball of radius {} must stay clear of the domain (distance {gap})", pose.r));
        }
        let image = match &source {
            Domain::Interval { a, b } => {
                let p = invert_point(&[*a], &pose)?[0];
                let q = invert_point(&[*b], &pose)?[0];
                Domain::Interval { a: p.min(q), b: p.max(q) }
            }
            Domain::Ball { center, radius } => {
                let (c, r) = invert_sphere(center, *radius, &pose);
                Domain::Ball { center: c, radius: r }
            }
            Domain::Indicator(reg) => {
                let inner = reg.predicate.clone();
                let p = pose.clone();
                let lo: Vec<f64> = pose.x0.iter().map(|c| c - pose.r).collect();
                let hi: Vec<f64> = pose.x0.iter().map(|c| c + pose.r).collect();
                Domain::indicator(lo, hi, &format!("{}*", reg.label), move |y| match invert_point(y, &p) {
                    Ok(x) => inner(&x),
                    Err(_) => false,
                })
            }
            _ => return Err(LoglapError::Unsupported("Kelvin transforms of half-balls and caps".into())),
        };
        Ok(KelvinContext { pose, source_domain: source, image_domain: image })
    }

    pub fn dim(&self) -> usize {
        self.pose.x0.len()
    }

    fn normalize(&self, x: &[f64]) -> Vec<f64> {
        x.iter().zip(&self.pose.x0).map(|(v, c)| (v - c) / self.pose.r).collect()
    }

    /// The same pose with source and image exchanged. The image lies inside
    /// B_R(x0), so the result serves the involution but not the identity.
    pub fn reversed(&self) -> Self {
        KelvinContext { pose: self.pose.clone(), source_domain: self.image_domain.clone(), image_domain: self.source_domain.clone() }
    }
}

/// x* ↦ |x* − x0|^{−N} u(x), zero outside the image domain.
pub fn kelvin_field(u: &ScalarField, ctx: &KelvinContext) -> Result<ScalarField> {
    let n = ctx.dim();
    if u.dim() != n {
        return invalid("field and context dimensions differ");
    }
    let pose = ctx.pose.clone();
    let image = ctx.image_domain.clone();
    let a = u.clone();
    let support = image.bounding_radius();
    let feats = u.features().iter().filter_map(|f| image_feature(f, &pose)).collect();
    Ok(ScalarField::new(n, support, u.dini_class(), &format!("kelvin({})", u.label()), move |y| {
        if !image.contains(y) {
            return 0.0;
        }
        let d2 = dist2(y, &pose.x0);
        match invert_point(y, &pose) {
            Ok(x) => a.value(&x) * d2.powf(-0.5 * n as f64),
            Err(_) => 0.0,
        }
    })
    .with_features(feats))
}

/// (|z|^{−N} − |ξ|^{−N})/r for z = ξ + rθ, factored so that no cancellation
/// occurs as r → 0.
fn correction_kernel(xi: &[f64], theta: &[f64], r: f64) -> f64 {
    let n = xi.len();
    let z2: f64 = xi.iter().zip(theta).map(|(a, t)| (a + r * t) * (a + r * t)).sum();
    let x2: f64 = xi.iter().map(|a| a * a).sum();
    let dot: f64 = xi.iter().zip(theta).map(|(a, t)| a * t).sum();
    // (|ξ|² − |z|²)/r
    let q = -(2.0 * dot + r);
    let (zn, xn) = (z2.sqrt(), x2.sqrt());
    // (|ξ|^N − |z|^N)/r = (|ξ|² − |z|²)/r · Σ_{k} |ξ|^{N−1−k}|z|^k / (|ξ| + |z|)
    let mut s = 0.0;
    for k in 0..n {
        s += xn.powi((n - 1 - k) as i32) * zn.powi(k as i32);
    }
    let diff = q * s / (xn + zn);
    diff / (zn.powi(n as i32) * xn.powi(n as i32))
}

/// C(ξ) = ∫_{Ω_n} (|z|^{−N} − |ξ|^{−N})/|z − ξ|^N dz at ξ = (x − x0)/R, over
/// Ω_n = (Ω − x0)/R. The integrand is bounded at z = ξ and is integrated
/// along rays from ξ.
pub fn correction_integral(ctx: &KelvinContext, x: &[f64], cfg: &QuadConfig) -> Result<IntegralResult> {
    let n = ctx.dim();
    if x.len() != n || !ctx.source_domain.contains(x) {
        return invalid("correction point must lie in the source domain");
    }
    let sigma = constants_for(n)?.sigma_n;
    let xi = ctx.normalize(x);
    let dom = &ctx.source_domain;
    let r_pose = ctx.pose.r;
    let inner_tol = 0.05 * cfg.abs_tol / sigma;
    let inner_err = Cell::new(0.0f64);
    let evals = Cell::new(0usize);
    let mut g = |th: &[f64]| {
        let mut total = 0.0;
        for (lo, hi) in dom.ray_intervals(x, th) {
            let mut f = |r: f64| correction_kernel(&xi, th, r);
            let res = adaptive(&mut f, &[lo / r_pose, hi / r_pose], inner_tol, 0.0, cfg.max_panels);
            inner_err.set(inner_err.get().max(res.error_estimate));
            evals.set(evals.get() + res.evaluations);
            total += res.value;
        }
        total
    };
    let convex = matches!(dom, Domain::Interval { .. } | Domain::Ball { .. });
    let hints = AngularHints { breaks: vec![], smooth: convex };
    let (v, e, k) = sphere_integral(n, &mut g, &hints, 0.5 * cfg.abs_tol, cfg.angular_order, cfg.max_panels)?;
    let err = e + sigma * inner_err.get();
    Ok(IntegralResult { value: v, error_estimate: err, evaluations: k + evals.get(), converged: err <= cfg.tolerance_for(v) })
}

/// h_{Ω*}(x*) − h_Ω(x).
pub fn h_difference(ctx: &KelvinContext, x: &[f64], cfg: &QuadConfig) -> Result<IntegralResult> {
    let xs = invert_point(x, &ctx.pose)?;
    let a = h_omega(&ctx.image_domain, &xs, cfg)?;
    let b = h_omega(&ctx.source_domain, x, cfg)?;
    Ok(a.plus(b.scaled(-1.0)))
}

/// Terms of the transformed identity at one source point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KelvinCheck {
    pub lhs: f64,
    pub rhs: f64,
    pub residual: f64,
    pub error_estimate: f64,
}

/// L_Δu*(x*) and the right-hand side of the transformed identity, each
/// term from its own quadrature.
pub fn kelvin_check(u: &ScalarField, ctx: &KelvinContext, x: &[f64], cfg: &QuadConfig) -> Result<KelvinCheck> {
    let n = ctx.dim();
    let c = constants_for(n)?;
    let us = kelvin_field(u, ctx)?;
    let xs = invert_point(x, &ctx.pose)?;
    let lhs = eval_loglap(&us, &xs, cfg)?;
    let lu = eval_loglap(u, x, cfg)?;
    let ux = u.value(x);
    let w = dist(&xs, &ctx.pose.x0).powi(-(n as i32));
    let xi_s = norm(&ctx.normalize(&xs));
    let k = ctx.pose.r.powi(-(n as i32)) * c.c_n * xi_s.powi(-2 * n as i32);
    let (corr, dh) = if ux == 0.0 {
        (IntegralResult::exact(0.0), IntegralResult::exact(0.0))
    } else {
        (correction_integral(ctx, x, cfg)?, h_difference(ctx, x, cfg)?)
    };
    let rhs = w * (lu.total + dh.value * ux) + k * ux * corr.value;
    let err = lhs.error_estimate()
        + w * (lu.error_estimate() + dh.error_estimate * ux.abs())
        + k * ux.abs() * corr.error_estimate;
    Ok(KelvinCheck { lhs: lhs.total, rhs, residual: lhs.total - rhs, error_estimate: err })
}

/// Signed residual of the transformed identity and its error budget.
pub fn kelvin_identity_residual(u: &ScalarField, ctx: &KelvinContext, x: &[f64], cfg: &QuadConfig) -> Result<IdentityResidual> {
    let k = kelvin_check(u, ctx, x, cfg)?;
    Ok(IdentityResidual { residual: k.residual, error_estimate: k.error_estimate })
}

/// Right-hand side satisfied by u* on Ω* when L_Δu = f on Ω, evaluated at
/// y ∈ Ω*.
pub fn transformed_rhs(f: &ScalarField, u: &ScalarField, ctx: &KelvinContext, y: &[f64], cfg: &QuadConfig) -> Result<IntegralResult> {
    let n = ctx.dim();
    if !ctx.image_domain.contains(y) {
        return invalid("transformed right-hand side is evaluated in the image domain");
    }
    let c = constants_for(n)?;
    let ys = invert_point(y, &ctx.pose)?;
    let w = dist(y, &ctx.pose.x0).powi(-(n as i32));
    let k = ctx.pose.r.powi(-(n as i32)) * c.c_n * norm(&ctx.normalize(y)).powi(-2 * n as i32);
    let uy = u.value(&ys);
    let base = IntegralResult::exact(w * f.value(&ys));
    if uy == 0.0 {
        return Ok(base);
    }
    let corr = correction_integral(ctx, &ys, cfg)?.scaled(k * uy);
    let dh = h_difference(ctx, &ys, cfg)?.scaled(w * uy);
    Ok(base.plus(corr).plus(dh))
}

/// One (context, field, points) group of the verification suite.
pub struct KelvinCase {
    pub ctx: KelvinContext,
    pub field: ScalarField,
    pub points: Vec<Vec<f64>>,
}

/// Fixed suite: two domains × two fields × five points in dimension n ∈ {1, 2}.
pub fn kelvin_suite(n: usize) -> Result<Vec<KelvinCase>> {
    let mut out = Vec::new();
    match n {
        1 => {
            let doms = [(1.2, 1.8), (-3.0, -1.5)];
            for (a, b) in doms {
                let ctx = KelvinContext::new(SpherePose::unit(1), Domain::Interval { a, b })?;
                let m = 0.5 * (a + b);
                let h = 0.5 * (b - a);
                let fields = [ScalarField::bump(&[m], 0.8 * h, 1.0), ScalarField::bump(&[m + 0.3 * h], 0.5 * h, 2.0)];
                let points: Vec<Vec<f64>> = [-0.7, -0.3, 0.0, 0.4, 0.9].iter().map(|t| vec![m + t * h]).collect();
                for f in fields {
                    out.push(KelvinCase { ctx: ctx.clone(), field: f, points: points.clone() });
                }
            }
        }
        2 => {
            let doms = [(vec![2.0, 0.0], 0.5), (vec![-1.0, 1.6], 0.6)];
            for (c, r) in doms {
                let ctx = KelvinContext::new(SpherePose::unit(2), Domain::Ball { center: c.clone(), radius: r })?;
                let off = [c[0] + 0.2 * r, c[1] - 0.1 * r];
                let fields = [ScalarField::bump(&c, 0.8 * r, 1.0), ScalarField::bump(&off, 0.5 * r, 1.5)];
                let points: Vec<Vec<f64>> = [(0.0, 0.0), (0.3, 0.0), (-0.2, 0.4), (0.1, -0.6), (0.7, 0.5)]
                    .iter()
                    .map(|(s, t)| vec![c[0] + s * r, c[1] + t * r])
                    .collect();
                for f in fields {
                    out.push(KelvinCase { ctx: ctx.clone(), field: f, points: points.clone() });
                }
            }
        }
        _ => return Err(LoglapError::Unsupported(format!("Kelvin suite in dimension {n}"))),
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn inversion_examples() {
        let p = SpherePose::unit(2);
        assert_eq!(invert_point(&[2.0, 0.0], &p).unwrap(), vec![0.5, 0.0]);
        let s = [0.6, 0.8];
        let v = invert_point(&s, &p).unwrap();
        assert!(dist(&v, &s) < 1e-15);
        assert!(invert_point(&[0.0, 0.0], &p).is_err());
    }

    #[test]
    fn distance_identity_example() {
        let x = [2.0, 0.0];
        let z = [0.0, 3.0];
        assert!(distance_identity_residual(&x, &z).unwrap() < 1e-12);
        let xs = invert_point(&x, &SpherePose::unit(2)).unwrap();
        let zs = invert_point(&z, &SpherePose::unit(2)).unwrap();
        assert!((dist(&xs, &zs) - 13f64.sqrt() / 6.0).abs() < 1e-12);
        assert_eq!(distance_identity_residual(&x, &x).unwrap(), 0.0);
    }

    #[test]
    fn image_domains() {
        let ctx = KelvinContext::new(SpherePose::unit(1), Domain::Interval { a: 1.2, b: 1.8 }).unwrap();
        match ctx.image_domain {
            Domain::Interval { a, b } => assert!((a - 1.0 / 1.8).abs() < 1e-15 && (b - 1.0 / 1.2).abs() < 1e-15),
            _ => panic!(),
        }
        let ctx = KelvinContext::new(SpherePose::unit(2), Domain::Ball { center: vec![2.0, 0.0], radius: 0.5 }).unwrap();
        match &ctx.image_domain {
            Domain::Ball { center, radius } => {
                // endpoints 1.5 and 2.5 map to 2/3 and 2/5
                assert!((center[0] - (2.0 / 3.0 + 0.4) / 2.0).abs() < 1e-14);
                assert!((radius - (2.0 / 3.0 - 0.4) / 2.0).abs() < 1e-14);
            }
            _ => panic!(),
        }
        assert!(KelvinContext::new(SpherePose::unit(1), Domain::Interval { a: 0.5, b: 1.8 }).is_err());
        assert!(KelvinContext::new(SpherePose::unit(2), Domain::HalfBall { radius: 1.0, dim: 2 }).is_err());
    }

    #[test]
    fn kelvin_field_is_involutive() {
        // with u* = |x* − x0|^{−N}u the double transform is R^{−2N}u, so R = 1 here
        let ctx = KelvinContext::new(SpherePose::new(vec![0.2, -0.1], 1.0).unwrap(), Domain::Ball { center: vec![2.0, 0.5], radius: 0.7 })
            .unwrap();
        let u = ScalarField::bump(&[2.1, 0.4], 0.5, 1.3);
        let back = kelvin_field(&kelvin_field(&u, &ctx).unwrap(), &ctx.reversed()).unwrap();
        for k in 0..20 {
            let t = k as f64 * 0.31;
            let p = [2.0 + 0.5 * t.cos() * (k as f64 / 20.0), 0.5 + 0.5 * t.sin() * (k as f64 / 20.0)];
            assert!((back.value(&p) - u.value(&p)).abs() < 1e-10);
        }
        assert_eq!(kelvin_field(&ScalarField::zero(2), &ctx).unwrap().value(&[0.3, 0.0]), 0.0);
    }

    #[test]
    fn kelvin_field_vanishes_outside_image() {
        let ctx = KelvinContext::new(SpherePose::unit(2), Domain::Ball { center: vec![2.0, 0.0], radius: 0.5 }).unwrap();
        let us = kelvin_field(&ScalarField::bump(&[2.0, 0.0], 0.5, 1.0), &ctx).unwrap();
        let mut count = 0;
        for i in 0..10 {
            for j in 0..10 {
                for k in 0..10 {
                    let p = [-1.5 + 0.3 * i as f64 + 0.01 * k as f64, -1.5 + 0.3 * j as f64];
                    if !ctx.image_domain.contains(&p) {
                        assert_eq!(us.value(&p), 0.0);
                        count += 1;
                    }
                }
            }
        }
        assert!(count > 900);
    }

    #[test]
    fn correction_sign_and_oracle() {
        let cfg = QuadConfig::for_dim(1);
        let ctx = KelvinContext::new(SpherePose::unit(1), Domain::Interval { a: 1.0 + 1e-9, b: 2.0 }).unwrap();
        let v = correction_integral(&ctx, &[1.5], &cfg).unwrap();
        // midpoint sum of (1/z − 1/x)/|z − x| = −sign(z − x)/(xz)
        let m = 200_000;
        let mut s = 0.0;
        for k in 0..m {
            let z = 1.0 + (k as f64 + 0.5) / m as f64;
            s += -(z - 1.5).signum() / (1.5 * z) / m as f64;
        }
        assert!((v.value - s).abs() < 1e-4, "{} vs {}", v.value, s);
        let far = KelvinContext::new(SpherePose::unit(2), Domain::Ball { center: vec![3.0, 0.0], radius: 0.5 }).unwrap();
        let cfg2 = QuadConfig::for_dim(2);
        assert!(correction_integral(&far, &[2.6, 0.0], &cfg2).unwrap().value < 0.0);
        assert!(correction_integral(&far, &[3.4, 0.0], &cfg2).unwrap().value > 0.0);
    }

    #[test]
    fn h_difference_antisymmetric() {
        let cfg = QuadConfig::for_dim(1);
        let ctx = KelvinContext::new(SpherePose::unit(1), Domain::Interval { a: 1.2, b: 1.8 }).unwrap();
        let rev = ctx.reversed();
        let x = [1.5];
        let xs = invert_point(&x, &ctx.pose).unwrap();
        let a = h_difference(&ctx, &x, &cfg).unwrap().value;
        let b = h_difference(&rev, &xs, &cfg).unwrap().value;
        assert!(a.is_finite() && (a + b).abs() < 1e-12);
    }

    #[test]
    fn identity_1d_general_pose() {
        let cfg = QuadConfig::for_dim(1);
        let ctx = KelvinContext::new(SpherePose::new(vec![0.3], 0.6).unwrap(), Domain::Interval { a: 1.2, b: 1.8 }).unwrap();
        let u = ScalarField::bump(&[1.5], 0.25, 1.0);
        for x in [1.4, 1.5, 1.7] {
            let r = kelvin_identity_residual(&u, &ctx, &[x], &cfg).unwrap();
            assert!(r.residual.abs() <= 3.0 * r.error_estimate, "{r:?}");
        }
        let z = kelvin_identity_residual(&ScalarField::zero(1), &ctx, &[1.5], &cfg).unwrap();
        assert_eq!(z.residual, 0.0);
    }

    proptest! {
        #[test]
        fn inversion_involution(x in -5.0f64..5.0, y in -5.0f64..5.0, c in -1.0f64..1.0, r in 0.1f64..3.0) {
            prop_assume!((x - c).hypot(y) > 1e-3);
            let p = SpherePose::new(vec![c, 0.0], r).unwrap();
            let back = invert_point(&invert_point(&[x, y], &p).unwrap(), &p).unwrap();
            prop_assert!(dist(&back, &[x, y]) <= 1e-12 * (1.0 + x.hypot(y)));
        }

        #[test]
        fn distance_identity(a in 0.5f64..2.0, b in 0.5f64..2.0, s in 0.0f64..6.283, t in 0.0f64..6.283) {
            let x = [a * s.cos(), a * s.sin()];
            let z = [b * t.cos(), b * t.sin()];
            prop_assert!(distance_identity_residual(&x, &z).unwrap() <= 1e-12);
        }
    }
}
