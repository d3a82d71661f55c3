//! Explicit boundary barriers for the logarithmic Laplacian and numerical
//! probes of their near-boundary asymptotics.
//!
//! The one-dimensional barrier is u(x) = φ(x)/√(−ln(x/2)) for x > 0 and 0
//! otherwise, where φ is an even cutoff equal to 1 on (−1−ζ, 1+ζ) and 0
//! outside (−1−2ζ, 1+2ζ). In dimension N ≥ 2 the barrier is
//! Ṽ(x) = u(x_1)φ(|x|).

use crate::error::{invalid, LoglapError, Result};
use crate::field::{DiniClass, Feature, ScalarField};
use crate::geometry::norm;
use crate::operator::{eval_loglap, far_integral, near_integral};
use crate::quadrature::{adaptive, sphere_integral, AngularHints, IntegralResult, QuadConfig};
use crate::special::{constants_for, ell_raw};
use crate::stats::{line_fit, LineFit};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::f64::consts::LN_2;

/// Shape of the cutoff on its transition band.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum CutoffProfile {
    /// 1 − f(s)/(f(s) + f(1−s)) with f(s) = e^{−1/s}; C^∞ and monotone.
    ExpSmoothstep,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BarrierSpec {
    pub dim: usize,
    pub zeta: f64,
    pub phi: CutoffProfile,
    /// Positivity radius found by [`barrier_positivity_radius`], if computed.
    pub delta_report: Option<f64>,
}

/// Upper bound on the cutoff half-width ζ.
///
/// N = 1: (√ln2/4)·√ln(4/3). N ≥ 2: ½((1 + (N√ln2/4)√ln(4/3))^{1/N} − 1).
pub fn zeta_bound(n: usize) -> Result<f64> {
    let b = LN_2.sqrt() / 4.0 * (4f64 / 3.0).ln().sqrt();
    match n {
        0 => invalid("dimension must be at least 1"),
        1 => Ok(b),
        _ => Ok(0.5 * ((1.0 + n as f64 * b).powf(1.0 / n as f64) - 1.0)),
    }
}

/// Half of [`zeta_bound`], so strictly admissible.
pub fn zeta_default(n: usize) -> Result<f64> {
    Ok(0.5 * zeta_bound(n)?)
}

impl BarrierSpec {
    pub fn new(dim: usize, zeta: f64) -> Result<Self> {
        let bound = zeta_bound(dim)?;
        if !(zeta > 0.0 && zeta < bound) {
            return invalid(format!("zeta must lie in (0, {bound}) for N = {dim}"));
        }
        if dim > 3 {
            return Err(LoglapError::Unsupported(format!("barriers in dimension {dim}")));
        }
        Ok(BarrierSpec { dim, zeta, phi: CutoffProfile::ExpSmoothstep, delta_report: None })
    }

    pub fn default_for(dim: usize) -> Result<Self> {
        BarrierSpec::new(dim, zeta_default(dim)?)
    }

    fn check_zeta(zeta: f64) -> Result<()> {
        if !(zeta > 0.0 && zeta < 0.25) {
            return invalid("zeta must lie in (0, 1/4)");
        }
        Ok(())
    }
}

fn smoothstep_weight(s: f64) -> f64 {
    if s <= 0.0 {
        0.0
    } else {
        (-1.0 / s).exp()
    }
}

fn phi_raw(t: f64, zeta: f64) -> f64 {
    let s = (t.abs() - 1.0 - zeta) / zeta;
    if s <= 0.0 {
        1.0
    } else if s >= 1.0 {
        0.0
    } else {
        let a = smoothstep_weight(s);
        1.0 - a / (a + smoothstep_weight(1.0 - s))
    }
}

/// Even cutoff: 1 on (−1−ζ, 1+ζ), 0 outside (−1−2ζ, 1+2ζ).
pub fn cutoff_phi(t: f64, zeta: f64) -> Result<f64> {
    BarrierSpec::check_zeta(zeta)?;
    Ok(phi_raw(t, zeta))
}

fn u_raw(x: f64, zeta: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    let p = phi_raw(x, zeta);
    if p == 0.0 {
        0.0
    } else {
        p / (-(0.5 * x).ln()).sqrt()
    }
}

/// u(x) = φ(x)/√(−ln(x/2)) for x > 0, 0 otherwise.
pub fn barrier_1d(x: f64, spec: &BarrierSpec) -> Result<f64> {
    if spec.dim != 1 {
        return invalid("barrier_1d needs a one-dimensional spec");
    }
    Ok(u_raw(x, spec.zeta))
}

fn v_raw(x: &[f64], zeta: f64) -> f64 {
    let u = u_raw(x[0], zeta);
    if u == 0.0 {
        0.0
    } else {
        u * phi_raw(norm(x), zeta)
    }
}

/// Ṽ(x) = u(x_1)·φ(|x|).
pub fn barrier_nd(x: &[f64], spec: &BarrierSpec) -> Result<f64> {
    if spec.dim < 2 || x.len() != spec.dim {
        return invalid("barrier_nd needs N ≥ 2 and a point of matching dimension");
    }
    Ok(v_raw(x, spec.zeta))
}

/// The barrier of `spec` as a field, with its nonsmooth sets recorded.
pub fn barrier_field(spec: &BarrierSpec) -> ScalarField {
    let z = spec.zeta;
    let n = spec.dim;
    let mut feats = vec![Feature::plane(0, 0.0, true), Feature::plane(0, 1.0 + z, false), Feature::plane(0, 1.0 + 2.0 * z, false)];
    if n == 1 {
        return ScalarField::new(1, 1.0 + 2.0 * z, DiniClass::LogHolder(0.5), "barrier-1d", move |x| u_raw(x[0], z))
            .with_features(feats);
    }
    feats.push(Feature::sphere(vec![0.0; n], 1.0 + z, false));
    feats.push(Feature::sphere(vec![0.0; n], 1.0 + 2.0 * z, false));
    ScalarField::new(n, 1.0 + 2.0 * z, DiniClass::LogHolder(0.5), "barrier-nd", move |x| v_raw(x, z)).with_features(feats)
}

fn kelvin_barrier_raw(x: &[f64], zeta: f64) -> f64 {
    let r2: f64 = x.iter().map(|v| v * v).sum();
    // w̃(y) = Ṽ(2(y − e_1)) at y = x/|x|²
    let y: Vec<f64> = x.iter().enumerate().map(|(k, v)| 2.0 * (v / r2 - if k == 0 { 1.0 } else { 0.0 })).collect();
    v_raw(&y, zeta)
}

/// v(x) = Ṽ(2(κ(x) − e_1)) with κ(x) = x/|x|²; vanishes outside the cap
/// D = B_{1/2}(e_1/2) ∩ {x_1 > 1/2}.
pub fn kelvin_barrier(x: &[f64], spec: &BarrierSpec) -> Result<f64> {
    if spec.dim < 2 || x.len() != spec.dim {
        return invalid("kelvin_barrier needs N ≥ 2 and a point of matching dimension");
    }
    if norm(x) == 0.0 {
        return invalid("kelvin_barrier is undefined at the origin");
    }
    Ok(kelvin_barrier_raw(x, spec.zeta))
}

/// [`kelvin_barrier`] as a field. The plane {y_1 = 1} maps to the sphere
/// bounding the cap, where the field has its ℓ^{1/2} behaviour.
pub fn kelvin_barrier_field(spec: &BarrierSpec) -> Result<ScalarField> {
    if spec.dim < 2 {
        return invalid("kelvin_barrier_field needs N ≥ 2");
    }
    let n = spec.dim;
    let z = spec.zeta;
    let mut c = vec![0.0; n];
    c[0] = 0.5;
    Ok(ScalarField::new(n, 1.0, DiniClass::LogHolder(0.5), "kelvin-barrier", move |x| {
        if norm(x) == 0.0 {
            0.0
        } else {
            kelvin_barrier_raw(x, z)
        }
    })
    .with_features(vec![Feature::sphere(c, 0.5, true)]))
}

fn check_eps(eps: f64, hi: f64) -> Result<()> {
    if !(eps > 0.0 && eps < hi) {
        return invalid(format!("ε must lie in (0, {hi})"));
    }
    Ok(())
}

fn inner_tol(cfg: &QuadConfig) -> f64 {
    0.1 * cfg.abs_tol
}

/// ∫_{R∖(−1,1)} u(ε+y)/|y| dy; only 1 < y < 1+2ζ−ε contributes.
pub fn probe_far_field_1d(eps: f64, spec: &BarrierSpec, cfg: &QuadConfig) -> Result<IntegralResult> {
    check_eps(eps, 2.0 * spec.zeta)?;
    let z = spec.zeta;
    let hi = 1.0 + 2.0 * z - eps;
    let mut f = |y: f64| u_raw(eps + y, z) / y;
    let mut pts = vec![1.0, hi];
    if 1.0 + z - eps > 1.0 {
        pts.push(1.0 + z - eps);
    }
    Ok(adaptive(&mut f, &pts, inner_tol(cfg), 0.0, cfg.max_panels))
}

/// J(ε) = ∫_{ε−1}^{ε+1} (u(ε) − u(y))/|y − ε| dy.
pub fn probe_j_1d(eps: f64, spec: &BarrierSpec, cfg: &QuadConfig) -> Result<IntegralResult> {
    check_eps(eps, spec.zeta)?;
    near_integral(&barrier_field(spec), &[eps], cfg)
}

/// J₂(ε) = −∫_{2ε}^{1+ε} u(y)/|ε − y| dy, computed as −∫_ε^1 u(ε+r)/r dr.
pub fn probe_j2_1d(eps: f64, spec: &BarrierSpec, cfg: &QuadConfig) -> Result<IntegralResult> {
    check_eps(eps, spec.zeta)?;
    let z = spec.zeta;
    let mut f = |s: f64| u_raw(eps + s.exp(), z);
    Ok(adaptive(&mut f, &[eps.ln(), 0.0], inner_tol(cfg), 0.0, cfg.max_panels).scaled(-1.0))
}

fn x_eps(eps: f64, n: usize) -> Vec<f64> {
    let mut x = vec![0.0; n];
    x[0] = eps;
    x
}

fn check_nd(spec: &BarrierSpec, n: usize) -> Result<()> {
    if !(2..=3).contains(&n) || spec.dim != n {
        return invalid("N-D probes need N ∈ {2, 3} matching the spec");
    }
    Ok(())
}

/// J(ε) = ∫_{B_1(x_ε)} (Ṽ(x_ε) − Ṽ(y))/|y − x_ε|^N dy with x_ε = ε e_1.
pub fn probe_j_nd(eps: f64, n: usize, spec: &BarrierSpec, cfg: &QuadConfig) -> Result<IntegralResult> {
    check_nd(spec, n)?;
    check_eps(eps, spec.zeta)?;
    near_integral(&barrier_field(spec), &x_eps(eps, n), cfg)
}

/// J₂(ε) = −∫_{B_1∖{|y_1|<ε}} V(y + x_ε)/|y|^N dy with V(x) = u(x_1), in
/// polar form −∫_{θ_1>ε} ∫_{ε/θ_1}^1 u(rθ_1 + ε)/r dr dθ.
pub fn probe_j2_nd(eps: f64, n: usize, spec: &BarrierSpec, cfg: &QuadConfig) -> Result<IntegralResult> {
    check_nd(spec, n)?;
    check_eps(eps, spec.zeta)?;
    let z = spec.zeta;
    let tol = inner_tol(cfg);
    let radial = |t1: f64| -> f64 {
        if t1 <= eps {
            return 0.0;
        }
        let mut f = |s: f64| u_raw(s.exp() * t1 + eps, z);
        adaptive(&mut f, &[(eps / t1).ln(), 0.0], 0.01 * tol, 0.0, 200).value
    };
    let mut g = |th: &[f64]| radial(th[0]);
    let breaks = if n == 2 {
        let a = eps.acos();
        vec![-a, a, 0.0]
    } else {
        vec![eps]
    };
    let hints = AngularHints { breaks, smooth: false };
    let (v, e, k) = sphere_integral(n, &mut g, &hints, tol, cfg.angular_order, cfg.max_panels)?;
    Ok(IntegralResult { value: -v, error_estimate: e, evaluations: k, converged: e <= cfg.abs_tol })
}

/// ∫_{R^N∖B_1(x_ε)} Ṽ(y)/|y − x_ε|^N dy.
pub fn probe_far_field_nd(eps: f64, n: usize, spec: &BarrierSpec, cfg: &QuadConfig) -> Result<IntegralResult> {
    check_nd(spec, n)?;
    check_eps(eps, spec.zeta)?;
    far_integral(&barrier_field(spec), &x_eps(eps, n), cfg)
}

/// Fit values ≈ a + b/√(−ln ε) and return the fit; a is the extrapolated
/// ε → 0 limit.
pub fn extrapolate_log_sqrt(eps: &[f64], values: &[f64]) -> Result<LineFit> {
    if eps.iter().any(|&e| !(e > 0.0 && e < 1.0)) {
        return invalid("extrapolation needs ε in (0, 1)");
    }
    let xs: Vec<f64> = eps.iter().map(|e| 1.0 / (-e.ln()).sqrt()).collect();
    line_fit(&xs, values)
}

/// ε = 10^{−2}, …, 10^{−8}.
pub fn standard_eps_sweep() -> Vec<f64> {
    (2..=8).map(|k| 10f64.powi(-k)).collect()
}

/// Positivity threshold: √ln2 for N = 1 and (σ_N/2)√ln2 for N ≥ 2.
pub fn positivity_threshold(n: usize) -> Result<f64> {
    let c = constants_for(n)?;
    Ok(if n == 1 { LN_2.sqrt() } else { 0.5 * c.sigma_n * LN_2.sqrt() })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PositivityProbe {
    pub point: Vec<f64>,
    pub value: f64,
    pub error_estimate: f64,
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PositivityReport {
    pub delta_hat: f64,
    pub threshold: f64,
    pub probes: Vec<PositivityProbe>,
    pub diagnostic: Option<String>,
}

/// First coordinates of the probe set: 10^{−1}, 10^{−1.5}, …, 10^{−12}.
pub fn positivity_probe_abscissae() -> Vec<f64> {
    (2..=24).map(|k| 10f64.powf(-0.5 * k as f64)).collect()
}

/// Largest probe abscissa δ̂ such that L_Δ of the barrier exceeds the
/// threshold at every probe point with first coordinate ≤ δ̂. In N ≥ 2 each
/// abscissa x_1 is tested on the axis and at the transverse offsets ±x_1.
pub fn barrier_positivity_radius_against(spec: &BarrierSpec, threshold: f64, cfg: &QuadConfig) -> Result<PositivityReport> {
    let field = barrier_field(spec);
    let n = spec.dim;
    let xs = positivity_probe_abscissae();
    let mut pts: Vec<Vec<f64>> = Vec::new();
    for &x1 in &xs {
        pts.push(x_eps(x1, n));
        if n >= 2 {
            for s in [-1.0, 1.0] {
                let mut p = x_eps(x1, n);
                p[1] = s * x1.min(0.02);
                pts.push(p);
            }
        }
    }
    let values: Vec<Result<(f64, f64)>> = pts
        .par_iter()
        .map(|p| eval_loglap(&field, p, cfg).map(|v| (v.total, v.error_estimate())))
        .collect();
    let mut probes = Vec::with_capacity(pts.len());
    for (p, v) in pts.into_iter().zip(values) {
        let (value, err) = v?;
        probes.push(PositivityProbe { point: p, value, error_estimate: err, passed: value - err > threshold });
    }
    let mut delta_hat = 0.0;
    for &x1 in xs.iter().rev() {
        let ok = probes.iter().filter(|p| p.point[0] == x1).all(|p| p.passed);
        if !ok {
            break;
        }
        delta_hat = x1;
    }
    let diagnostic = if delta_hat == 0.0 {
        let best = probes.iter().map(|p| p.value).fold(f64::NEG_INFINITY, f64::max);
        Some(format!("no probe point passes: largest value {best:.6} against threshold {threshold:.6}"))
    } else {
        None
    };
    Ok(PositivityReport { delta_hat, threshold, probes, diagnostic })
}

/// [`barrier_positivity_radius_against`] with [`positivity_threshold`].
pub fn barrier_positivity_radius(spec: &BarrierSpec, cfg: &QuadConfig) -> Result<PositivityReport> {
    barrier_positivity_radius_against(spec, positivity_threshold(spec.dim)?, cfg)
}

/// Smallest c with c ≤ w/ℓ^{1/2}(x_1) ≤ 1/c over the sample points.
pub fn comparability_constant(w: &dyn Fn(&[f64]) -> f64, pts: &[Vec<f64>], dist: &dyn Fn(&[f64]) -> f64) -> Result<f64> {
    let mut c = f64::INFINITY;
    for p in pts {
        let d = dist(p);
        if !(d > 0.0) {
            return invalid("comparability samples must lie inside the domain");
        }
        let q = w(p) / ell_raw(d).sqrt();
        if !(q > 0.0) {
            return Ok(0.0);
        }
        c = c.min(q).min(1.0 / q);
    }
    Ok(c)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn zeta_bounds() {
        assert!((zeta_bound(1).unwrap() - 0.111_64).abs() < 1e-5);
        assert!((zeta_bound(2).unwrap() - 0.053_01).abs() < 1e-5);
        assert!((zeta_default(1).unwrap() - 0.055_82).abs() < 1e-5);
        for n in 1..=3 {
            let z = zeta_default(n).unwrap();
            assert!(z < zeta_bound(n).unwrap() && z < zeta_bound(1).unwrap());
        }
        assert!(BarrierSpec::new(2, 0.06).is_err());
        assert!(zeta_bound(0).is_err());
    }

    #[test]
    fn cutoff_values() {
        let z = 0.05;
        assert_eq!(cutoff_phi(0.0, z).unwrap(), 1.0);
        assert_eq!(cutoff_phi(1.0 + 2.0 * z, z).unwrap(), 0.0);
        assert_eq!(cutoff_phi(-(1.0 + z), z).unwrap(), 1.0);
        let mut prev = 1.0;
        for k in 0..=100 {
            let t = 1.0 + z + z * k as f64 / 100.0;
            let v = cutoff_phi(t, z).unwrap();
            assert!(v <= prev && (0.0..=1.0).contains(&v));
            prev = v;
        }
        assert!(cutoff_phi(0.0, 0.3).is_err());
    }

    #[test]
    fn barrier_values() {
        let s = BarrierSpec::default_for(1).unwrap();
        assert_eq!(barrier_1d(0.0, &s).unwrap(), 0.0);
        assert_eq!(barrier_1d(-0.5, &s).unwrap(), 0.0);
        assert!((barrier_1d(1.0, &s).unwrap() - 1.0 / LN_2.sqrt()).abs() < 1e-15);
        assert!((barrier_1d(2.0 * (-4f64).exp(), &s).unwrap() - 0.5).abs() < 1e-15);
        let s2 = BarrierSpec::default_for(2).unwrap();
        assert_eq!(barrier_nd(&[-0.1, 0.0], &s2).unwrap(), 0.0);
        assert_eq!(barrier_nd(&[0.5, 1.2], &s2).unwrap(), 0.0);
        assert!((barrier_nd(&[1.0, 0.0], &s2).unwrap() - 1.0 / LN_2.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn kelvin_barrier_support() {
        let s = BarrierSpec::default_for(2).unwrap();
        assert!(kelvin_barrier(&[0.0, 0.0], &s).is_err());
        assert_eq!(kelvin_barrier(&[1.0, 0.0], &s).unwrap(), 0.0);
        assert_eq!(kelvin_barrier(&[0.4, 0.0], &s).unwrap(), 0.0);
        assert_eq!(kelvin_barrier(&[0.7, 0.4], &s).unwrap(), 0.0);
        assert!(kelvin_barrier(&[0.9, 0.0], &s).unwrap() > 0.0);
    }

    #[test]
    fn far_field_1d_below_bound() {
        let s = BarrierSpec::default_for(1).unwrap();
        let cfg = QuadConfig::for_dim(1);
        for eps in [1e-6, 1e-3, 0.05, 2.0 * s.zeta * 0.999] {
            let v = probe_far_field_1d(eps, &s, &cfg).unwrap().value;
            assert!(v >= 0.0 && v < 0.5 * LN_2.sqrt(), "ε={eps}: {v}");
            assert!(eps > 1.9 * s.zeta || v > 0.0);
        }
    }

    #[test]
    fn j_decomposition_1d() {
        let s = BarrierSpec::default_for(1).unwrap();
        let cfg = QuadConfig::for_dim(1);
        let mut prev = f64::INFINITY;
        for eps in [1e-2, 1e-4, 1e-6, 1e-8] {
            let j = probe_j_1d(eps, &s, &cfg).unwrap().value;
            let j2 = probe_j2_1d(eps, &s, &cfg).unwrap().value;
            assert!(j.is_finite() && j2 < 0.0);
            let j1 = (j - 2.0 * u_raw(eps, s.zeta) * (-eps.ln()) - j2).abs();
            assert!(j1 < prev);
            prev = j1;
        }
    }

    #[test]
    fn far_field_nd_small() {
        let s = BarrierSpec::default_for(2).unwrap();
        let cfg = QuadConfig::for_dim(2);
        let v = probe_far_field_nd(1e-3, 2, &s, &cfg).unwrap().value;
        let bound = 0.25 * constants_for(2).unwrap().sigma_n * LN_2.sqrt();
        assert!(v > 0.0 && v < bound, "{v}");
        let smaller = BarrierSpec::new(2, 0.5 * s.zeta).unwrap();
        assert!(probe_far_field_nd(1e-3, 2, &smaller, &cfg).unwrap().value < v);
    }

    #[test]
    fn comparability_near_boundary() {
        let s = BarrierSpec::default_for(1).unwrap();
        let w = |p: &[f64]| u_raw(p[0], s.zeta);
        let pts: Vec<Vec<f64>> = (3..12).map(|k| vec![10f64.powi(-k)]).collect();
        let c = comparability_constant(&w, &pts, &|p| p[0]).unwrap();
        assert!(c > 0.5 && c <= 1.0);
    }

    #[test]
    fn extrapolation_recovers_intercept() {
        let eps = standard_eps_sweep();
        let vals: Vec<f64> = eps.iter().map(|e| 1.25 - 0.7 / (-e.ln()).sqrt()).collect();
        let f = extrapolate_log_sqrt(&eps, &vals).unwrap();
        assert!((f.intercept - 1.25).abs() < 1e-12);
    }

    proptest! {
        #[test]
        fn barrier_1d_monotone_near_zero(a in 1e-9f64..0.01, b in 1e-9f64..0.01) {
            let s = BarrierSpec::default_for(1).unwrap();
            let (lo, hi) = if a < b { (a, b) } else { (b, a) };
            prop_assert!(u_raw(lo, s.zeta) <= u_raw(hi, s.zeta));
        }

        #[test]
        fn barriers_bounded(x in -2.0f64..2.0, y in -2.0f64..2.0) {
            let s = BarrierSpec::default_for(2).unwrap();
            let v = barrier_nd(&[x, y], &s).unwrap();
            prop_assert!((0.0..=1.0 / LN_2.sqrt() + 1e-15).contains(&v));
            if (x * x + y * y).sqrt() >= 1.0 + 2.0 * s.zeta || x <= 0.0 {
                prop_assert_eq!(v, 0.0);
            }
        }
    }
}
