//! Deterministic adaptive quadrature: a global Gauss–Kronrod engine, the
//! log-graded radial integrator for the |y|^{-N} kernel, sphere averages and
//! region integrals in polar coordinates.

use crate::error::{invalid, Result};
use crate::field::ScalarField;
use crate::geometry::Domain;
use serde::{Deserialize, Serialize};
use std::cell::Cell;
use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::f64::consts::{PI, TAU};

#[allow(clippy::excessive_precision)]
const XGK: [f64; 11] = [
    0.995657163025808080735527280689003,
    0.973906528517171720077964012084452,
    0.930157491355708226001207180059508,
    0.865063366688984510732096688423493,
    0.780817726586416897063717578345042,
    0.679409568299024406234327365114874,
    0.562757134668604683339000099272694,
    0.433395394129247190799265943165784,
    0.294392862701460198131126603103866,
    0.148874338981631210884826001129720,
    0.000000000000000000000000000000000,
];
#[allow(clippy::excessive_precision)]
const WG: [f64; 5] = [
    0.066671344308688137593568809893332,
    0.149451349150580593145776339657697,
    0.219086362515982043995534934228163,
    0.269266719309996355091226921569469,
    0.295524224714752870173892994651338,
];
#[allow(clippy::excessive_precision)]
const WGK: [f64; 11] = [
    0.011694638867371874278064396062192,
    0.032558162307964727478818972459390,
    0.054755896574351996031381300244580,
    0.075039674810919952767043140916190,
    0.093125454583697605535065465083366,
    0.109387158802297641899210590325805,
    0.123491976262065851077958109831074,
    0.134709217311473325928054001771707,
    0.142775938577060080797094273138717,
    0.147739104901338491374841515972068,
    0.149445554002916905664936468389821,
];

/// Tolerances and grading parameters shared by all integrators.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QuadConfig {
    pub abs_tol: f64,
    pub rel_tol: f64,
    pub max_panels: usize,
    pub grade_base: f64,
    pub angular_order: usize,
    pub min_radius: f64,
}

impl QuadConfig {
    /// Defaults for dimension `n`: abs_tol 1e-8 in 1D and 1e-6 otherwise.
    pub fn for_dim(n: usize) -> Self {
        QuadConfig {
            abs_tol: if n == 1 { 1e-8 } else { 1e-6 },
            rel_tol: 0.0,
            max_panels: 4000,
            grade_base: 0.5,
            angular_order: 64,
            min_radius: 1e-10,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.abs_tol > 0.0) {
            return invalid("abs_tol must be positive");
        }
        if !(self.rel_tol >= 0.0) {
            return invalid("rel_tol must be nonnegative");
        }
        if self.max_panels < 8 {
            return invalid("max_panels must be at least 8");
        }
        if !(self.grade_base > 0.0 && self.grade_base < 1.0) {
            return invalid("grade_base must lie in (0, 1)");
        }
        if !(self.min_radius > 0.0 && self.min_radius <= 1e-3) {
            return invalid("min_radius must lie in (0, 1e-3]");
        }
        if self.angular_order < 8 {
            return invalid("angular_order must be at least 8");
        }
        Ok(())
    }

    pub fn with_abs_tol(mut self, tol: f64) -> Self {
        self.abs_tol = tol;
        self
    }

    pub(crate) fn tolerance_for(&self, value: f64) -> f64 {
        self.abs_tol.max(self.rel_tol * value.abs())
    }
}

/// Value with an error estimate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IntegralResult {
    pub value: f64,
    pub error_estimate: f64,
    pub evaluations: usize,
    pub converged: bool,
}

impl IntegralResult {
    pub fn exact(value: f64) -> Self {
        IntegralResult { value, error_estimate: 0.0, evaluations: 0, converged: true }
    }

    pub fn scaled(self, s: f64) -> Self {
        IntegralResult { value: s * self.value, error_estimate: s.abs() * self.error_estimate, ..self }
    }

    pub fn plus(self, other: IntegralResult) -> Self {
        IntegralResult {
            value: self.value + other.value,
            error_estimate: self.error_estimate + other.error_estimate,
            evaluations: self.evaluations + other.evaluations,
            converged: self.converged && other.converged,
        }
    }
}

/// Compensated (Neumaier) summation.
pub fn neumaier_sum<I: IntoIterator<Item = f64>>(it: I) -> f64 {
    let mut s = 0.0f64;
    let mut c = 0.0f64;
    for v in it {
        let t = s + v;
        if s.abs() >= v.abs() {
            c += (s - t) + v;
        } else {
            c += (v - t) + s;
        }
        s = t;
    }
    s + c
}

#[derive(Debug, Clone, Copy)]
struct Segment {
    a: f64,
    b: f64,
    value: f64,
    error: f64,
}

fn rescale_error(err: f64, resabs: f64, resasc: f64) -> f64 {
    let mut e = err.abs();
    if resasc != 0.0 && e != 0.0 {
        let scale = (200.0 * e / resasc).powf(1.5);
        e = if scale < 1.0 { resasc * scale } else { resasc };
    }
    if resabs > f64::MIN_POSITIVE / (50.0 * f64::EPSILON) {
        e = e.max(50.0 * f64::EPSILON * resabs);
    }
    e
}

/// 21-point Kronrod rule with the embedded 10-point Gauss rule.
fn gk21(f: &mut dyn FnMut(f64) -> f64, a: f64, b: f64) -> Segment {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut res_g = 0.0;
    let mut res_k = fc * WGK[10];
    let mut res_abs = res_k.abs();
    let mut fv1 = [0.0; 10];
    let mut fv2 = [0.0; 10];
    for j in 0..5 {
        let jt = 2 * j + 1;
        let dx = h * XGK[jt];
        let (f1, f2) = (f(c - dx), f(c + dx));
        fv1[jt] = f1;
        fv2[jt] = f2;
        res_g += WG[j] * (f1 + f2);
        res_k += WGK[jt] * (f1 + f2);
        res_abs += WGK[jt] * (f1.abs() + f2.abs());
    }
    for j in 0..5 {
        let jt = 2 * j;
        let dx = h * XGK[jt];
        let (f1, f2) = (f(c - dx), f(c + dx));
        fv1[jt] = f1;
        fv2[jt] = f2;
        res_k += WGK[jt] * (f1 + f2);
        res_abs += WGK[jt] * (f1.abs() + f2.abs());
    }
    let mean = 0.5 * res_k;
    let mut res_asc = WGK[10] * (fc - mean).abs();
    for j in 0..10 {
        res_asc += WGK[j] * ((fv1[j] - mean).abs() + (fv2[j] - mean).abs());
    }
    let err = (res_k - res_g) * h;
    let ah = h.abs();
    Segment { a, b, value: res_k * h, error: rescale_error(err, res_abs * ah, res_asc * ah) }
}

struct Keyed(f64, usize);
impl PartialEq for Keyed {
    fn eq(&self, o: &Self) -> bool {
        self.cmp(o) == Ordering::Equal
    }
}
impl Eq for Keyed {}
impl PartialOrd for Keyed {
    fn partial_cmp(&self, o: &Self) -> Option<Ordering> {
        Some(self.cmp(o))
    }
}
impl Ord for Keyed {
    fn cmp(&self, o: &Self) -> Ordering {
        // larger error first; ties broken by the older segment
        self.0.total_cmp(&o.0).then(o.1.cmp(&self.1))
    }
}

/// Globally adaptive Gauss–Kronrod integration over the sorted `points`
/// (first and last are the limits, interior ones are breakpoints).
pub fn adaptive(
    f: &mut dyn FnMut(f64) -> f64,
    points: &[f64],
    abs_tol: f64,
    rel_tol: f64,
    max_segments: usize,
) -> IntegralResult {
    let mut pts: Vec<f64> = points.iter().copied().filter(|v| v.is_finite()).collect();
    pts.sort_by(|a, b| a.total_cmp(b));
    pts.dedup();
    if pts.len() < 2 {
        return IntegralResult::exact(0.0);
    }
    let mut segs: Vec<Segment> = Vec::with_capacity(2 * pts.len());
    let mut alive: Vec<bool> = Vec::new();
    let mut heap = BinaryHeap::new();
    let mut evals = 0usize;
    for w in pts.windows(2) {
        let s = gk21(f, w[0], w[1]);
        evals += 21;
        heap.push(Keyed(s.error, segs.len()));
        segs.push(s);
        alive.push(true);
    }
    let total = |segs: &[Segment], alive: &[bool]| -> (f64, f64) {
        let v = neumaier_sum(segs.iter().zip(alive).filter(|(_, &a)| a).map(|(s, _)| s.value));
        let e = neumaier_sum(segs.iter().zip(alive).filter(|(_, &a)| a).map(|(s, _)| s.error));
        (v, e)
    };
    let (mut value, mut error) = total(&segs, &alive);
    let mut converged = error <= abs_tol.max(rel_tol * value.abs());
    let mut live = segs.len();
    while !converged {
        let Some(Keyed(_, idx)) = heap.pop() else { break };
        let s = segs[idx];
        let m = 0.5 * (s.a + s.b);
        if m <= s.a || m >= s.b || (s.b - s.a) <= 4.0 * f64::EPSILON * s.a.abs().max(s.b.abs()) {
            // too narrow to split; keep it but stop refining it
            continue;
        }
        if live + 1 > max_segments {
            heap.push(Keyed(s.error, idx));
            break;
        }
        alive[idx] = false;
        for (a, b) in [(s.a, m), (m, s.b)] {
            let t = gk21(f, a, b);
            evals += 21;
            heap.push(Keyed(t.error, segs.len()));
            segs.push(t);
            alive.push(true);
        }
        live += 1;
        value += segs[segs.len() - 1].value + segs[segs.len() - 2].value - s.value;
        error += segs[segs.len() - 1].error + segs[segs.len() - 2].error - s.error;
        if error <= abs_tol.max(rel_tol * value.abs()) {
            let (v, e) = total(&segs, &alive);
            value = v;
            error = e;
            converged = error <= abs_tol.max(rel_tol * value.abs());
        }
    }
    // Deterministic final reduction in position order.
    let mut order: Vec<usize> = (0..segs.len()).filter(|&i| alive[i]).collect();
    order.sort_by(|&i, &j| segs[i].a.total_cmp(&segs[j].a));
    let value = neumaier_sum(order.iter().map(|&i| segs[i].value));
    let error = neumaier_sum(order.iter().map(|&i| segs[i].error));
    IntegralResult { value, error_estimate: error, evaluations: evals, converged: error <= abs_tol.max(rel_tol * value.abs()) }
}

/// Gauss–Legendre nodes and weights on [-1, 1].
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        let mut z = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, z);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * z * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            let p = if n == 0 { 1.0 } else if n == 1 { z } else { p1 };
            let pm = if n == 1 { 1.0 } else { p0 };
            dp = n as f64 * (z * p - pm) / (z * z - 1.0);
            let dz = p / dp;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        x[i] = -z;
        x[n - 1 - i] = z;
        let wi = 2.0 / ((1.0 - z * z) * dp * dp);
        w[i] = wi;
        w[n - 1 - i] = wi;
    }
    (x, w)
}

/// How the part of a graded radial integral below `r_min` is bounded.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum TailModel {
    /// Not bounded; the integral is over [r_min, r_max] only.
    None,
    /// Profile vanishes at least linearly: |tail| ≤ |p(r_min)|.
    Vanishing,
    /// Profile bounded by its modulus: |tail| ≤ |p(r_min)|·|ln r_min|.
    LogModulus,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GradedOptions {
    pub r_min: Option<f64>,
    pub r_max: f64,
    pub breaks: Vec<f64>,
    pub tail: TailModel,
}

impl Default for GradedOptions {
    fn default() -> Self {
        GradedOptions { r_min: None, r_max: 1.0, breaks: Vec::new(), tail: TailModel::Vanishing }
    }
}

/// ∫_0^1 profile(r)/r dr on dyadic panels down to `cfg.min_radius`.
pub fn integrate_graded(profile: &mut dyn FnMut(f64) -> f64, cfg: &QuadConfig) -> IntegralResult {
    integrate_graded_with(profile, cfg, &GradedOptions::default())
}

/// Graded radial integral of profile(r)/r with explicit range, extra
/// breakpoints and tail model. Integration runs in s = ln r, where the
/// panels [b^{k+1}, b^k] have equal length.
pub fn integrate_graded_with(profile: &mut dyn FnMut(f64) -> f64, cfg: &QuadConfig, opts: &GradedOptions) -> IntegralResult {
    let r_min = opts.r_min.unwrap_or(cfg.min_radius);
    let r_max = opts.r_max;
    if !(r_max > r_min) {
        return IntegralResult::exact(0.0);
    }
    let (s0, s1) = (r_min.ln(), r_max.ln());
    let mut pts = vec![s0, s1];
    let step = cfg.grade_base.ln();
    let mut k = 1.0;
    loop {
        let s = s1 + k * step;
        if s <= s0 {
            break;
        }
        pts.push(s);
        k += 1.0;
    }
    for &b in &opts.breaks {
        if b > r_min && b < r_max {
            pts.push(b.ln());
        }
    }
    let tail = match opts.tail {
        TailModel::None => 0.0,
        TailModel::Vanishing => profile(r_min).abs(),
        TailModel::LogModulus => profile(r_min).abs() * r_min.ln().abs(),
    };
    let mut g = |s: f64| profile(s.exp());
    let mut res = adaptive(&mut g, &pts, cfg.abs_tol, cfg.rel_tol, cfg.max_panels);
    res.error_estimate += tail;
    res.converged = res.converged && res.error_estimate <= cfg.tolerance_for(res.value);
    res
}

/// Angular breakpoint hints for integrals over the unit sphere.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct AngularHints {
    /// N = 2: angles in radians; N = 3: values of μ = θ·e_1.
    pub breaks: Vec<f64>,
    /// Whether the integrand is smooth, allowing the fixed periodic rules.
    pub smooth: bool,
}

/// ∫_{S^{N-1}} g(θ) dθ for N ∈ {1, 2, 3}; returns (value, error, evaluations).
pub fn sphere_integral(
    n: usize,
    g: &mut dyn FnMut(&[f64]) -> f64,
    hints: &AngularHints,
    tol: f64,
    angular_order: usize,
    max_panels: usize,
) -> Result<(f64, f64, usize)> {
    match n {
        1 => Ok((g(&[1.0]) + g(&[-1.0]), 0.0, 2)),
        2 => {
            if hints.smooth && hints.breaks.is_empty() {
                let m = angular_order.max(8);
                let mut full = 0.0;
                let mut half = 0.0;
                for k in 0..m {
                    let a = TAU * k as f64 / m as f64;
                    let v = g(&[a.cos(), a.sin()]);
                    full += v;
                    if k % 2 == 0 {
                        half += v;
                    }
                }
                let full = full * TAU / m as f64;
                let half = half * TAU / (m / 2) as f64;
                let err = (full - half).abs();
                if err <= tol {
                    return Ok((full, err, m));
                }
            }
            let mut pts = vec![0.0, TAU];
            for &a in &hints.breaks {
                pts.push(a.rem_euclid(TAU));
            }
            let mut h = |a: f64| g(&[a.cos(), a.sin()]);
            let r = adaptive(&mut h, &pts, tol, 0.0, max_panels);
            Ok((r.value, r.error_estimate, r.evaluations))
        }
        3 => {
            if hints.smooth && hints.breaks.is_empty() {
                let m = (angular_order / 2).max(8);
                let rule = |m: usize, g: &mut dyn FnMut(&[f64]) -> f64| -> f64 {
                    let (x, w) = gauss_legendre(m);
                    let na = 2 * m;
                    let mut acc = 0.0;
                    for (mu, wm) in x.iter().zip(&w) {
                        let s = (1.0 - mu * mu).sqrt();
                        let mut ring = 0.0;
                        for k in 0..na {
                            let a = TAU * k as f64 / na as f64;
                            ring += g(&[*mu, s * a.cos(), s * a.sin()]);
                        }
                        acc += wm * ring * TAU / na as f64;
                    }
                    acc
                };
                let full = rule(m, g);
                let half = rule(m / 2, g);
                let err = (full - half).abs();
                if err <= tol {
                    return Ok((full, err, 2 * m * m + m * m / 2));
                }
            }
            let mut pts = vec![-1.0, 1.0];
            pts.extend(hints.breaks.iter().copied().filter(|v| v.abs() < 1.0));
            let inner_tol = tol / (4.0 * PI);
            let mut evals = 0usize;
            let inner_err = Cell::new(0.0f64);
            let mut outer = |mu: f64| {
                let s = (1.0 - mu * mu).max(0.0).sqrt();
                let mut ring = |a: f64| g(&[mu, s * a.cos(), s * a.sin()]);
                let r = adaptive(&mut ring, &[0.0, TAU], inner_tol, 0.0, max_panels);
                evals += r.evaluations;
                inner_err.set(inner_err.get().max(r.error_estimate));
                r.value
            };
            let r = adaptive(&mut outer, &pts, tol, 0.0, max_panels);
            Ok((r.value, r.error_estimate + 2.0 * inner_err.get(), evals))
        }
        _ => Err(crate::error::LoglapError::Unsupported(format!("sphere integrals in dimension {n}"))),
    }
}

/// Angular hints for integrating a field over the sphere S_r(x).
pub(crate) fn field_hints(field: &ScalarField, x: &[f64], r: f64) -> AngularHints {
    let n = x.len();
    let mut breaks = Vec::new();
    let mut smooth = true;
    for f in field.features() {
        let hit = match n {
            2 => f.circle_angles(x, r),
            3 => f.polar_breaks(x, r),
            _ => vec![],
        };
        let crosses = f.critical_radii(x).len() == 2 && {
            let c = f.critical_radii(x);
            r > c[0] && r < c[1]
        } || (f.critical_radii(x).len() == 1 && r > f.critical_radii(x)[0]);
        if crosses {
            smooth = smooth && !f.singular;
            // a crossing feature without exact breakpoints still rules out the fixed rule
            if hit.is_empty() {
                smooth = false;
            }
        }
        breaks.extend(hit);
    }
    AngularHints { breaks, smooth }
}

/// Mean of `field` over the sphere S_r(x), with its error estimate.
pub fn sphere_average_est(field: &ScalarField, x: &[f64], r: f64, cfg: &QuadConfig, tol: f64) -> Result<(f64, f64, usize)> {
    let n = x.len();
    if n != field.dim() {
        return invalid("point dimension does not match the field");
    }
    if !(r > 0.0) {
        return invalid("sphere radius must be positive");
    }
    if n > 3 {
        return Err(crate::error::LoglapError::Unsupported(format!("sphere averages in dimension {n}")));
    }
    let sigma = crate::special::constants_for(n)?.sigma_n;
    let hints = field_hints(field, x, r);
    let mut p = vec![0.0; n];
    let mut g = |th: &[f64]| {
        for k in 0..n {
            p[k] = x[k] + r * th[k];
        }
        field.value(&p)
    };
    let (v, e, k) = sphere_integral(n, &mut g, &hints, tol * sigma, cfg.angular_order, cfg.max_panels)?;
    Ok((v / sigma, e / sigma, k))
}

/// Mean of `field` over the sphere S_r(x).
pub fn sphere_average(field: &ScalarField, x: &[f64], r: f64, cfg: &QuadConfig) -> Result<f64> {
    sphere_average_est(field, x, r, cfg, cfg.abs_tol * 1e-2).map(|t| t.0)
}

/// ∫ over `region` minus the optional ball `exclude = (centre, radius)`,
/// computed in polar coordinates about the excluded centre (or a
/// reference point of the region).
pub fn integrate_region(
    integrand: &ScalarField,
    region: &Domain,
    exclude: Option<(&[f64], f64)>,
    cfg: &QuadConfig,
) -> Result<IntegralResult> {
    let n = region.dim();
    if integrand.dim() != n {
        return invalid("integrand dimension does not match the region");
    }
    let (origin, r_ex) = match exclude {
        Some((c, r)) => (c.to_vec(), r),
        None => (region.reference_point(), 0.0),
    };
    let mut hints = AngularHints { breaks: vec![], smooth: false };
    if n == 2 {
        for c in region.corners() {
            hints.breaks.push((c[1] - origin[1]).atan2(c[0] - origin[0]));
        }
    }
    let inner_err = Cell::new(0.0f64);
    let evals = Cell::new(0usize);
    let sigma = crate::special::constants_for(n)?.sigma_n;
    let inner_tol = cfg.abs_tol / (4.0 * sigma);
    let mut g = |th: &[f64]| {
        let mut total = 0.0;
        for (lo, hi) in region.ray_intervals(&origin, th) {
            let lo = lo.max(r_ex);
            if hi <= lo {
                continue;
            }
            let mut pts = vec![lo, hi];
            for f in integrand.features() {
                pts.extend(f.ray_crossings(&origin, th).into_iter().filter(|&t| t > lo && t < hi));
            }
            let mut p = vec![0.0; n];
            let mut h = |t: f64| {
                for k in 0..n {
                    p[k] = origin[k] + t * th[k];
                }
                integrand.value(&p) * t.powi(n as i32 - 1)
            };
            let r = adaptive(&mut h, &pts, inner_tol, 0.0, cfg.max_panels);
            inner_err.set(inner_err.get().max(r.error_estimate));
            evals.set(evals.get() + r.evaluations);
            total += r.value;
        }
        total
    };
    let (v, e, k) = sphere_integral(n, &mut g, &hints, cfg.abs_tol / 2.0, cfg.angular_order, cfg.max_panels)?;
    let err = e + sigma * inner_err.get();
    Ok(IntegralResult { value: v, error_estimate: err, evaluations: k + evals.get(), converged: err <= cfg.tolerance_for(v) })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::DiniClass;

    fn cfg1() -> QuadConfig {
        QuadConfig::for_dim(1)
    }

    #[test]
    fn gauss_kronrod_polynomial_exactness() {
        for deg in 0..=7 {
            let mut f = |x: f64| x.powi(deg);
            let r = adaptive(&mut f, &[-0.3, 1.7], 1e-14, 0.0, 100);
            let exact = (1.7f64.powi(deg + 1) - (-0.3f64).powi(deg + 1)) / (deg + 1) as f64;
            assert!((r.value - exact).abs() < 1e-13, "degree {deg}");
        }
    }

    #[test]
    fn gauss_legendre_exactness() {
        let (x, w) = gauss_legendre(8);
        for deg in 0..16 {
            let s: f64 = x.iter().zip(&w).map(|(a, b)| b * a.powi(deg)).sum();
            let exact = if deg % 2 == 0 { 2.0 / (deg + 1) as f64 } else { 0.0 };
            assert!((s - exact).abs() < 1e-14, "degree {deg}");
        }
    }

    #[test]
    fn adaptive_handles_endpoint_singularity() {
        let mut f = |x: f64| x.ln();
        let r = adaptive(&mut f, &[0.0, 1.0], 1e-10, 0.0, 1000);
        assert!(r.converged);
        assert!((r.value + 1.0).abs() < 1e-10);
    }

    #[test]
    fn graded_examples() {
        let r = integrate_graded(&mut |r| r, &cfg1());
        assert!((r.value - 1.0).abs() < 1e-9 && r.converged);
        let r = integrate_graded(&mut |r| r * r, &cfg1());
        assert!((r.value - 0.5).abs() < 1e-9);
        let eps = 1e-6;
        let opts = GradedOptions { r_min: Some(eps), tail: TailModel::None, ..Default::default() };
        let r = integrate_graded_with(&mut |r: f64| 1.0 / (-(r / 2.0).ln()).sqrt(), &cfg1(), &opts);
        let exact = 2.0 * ((-(eps / 2.0).ln()).sqrt() - std::f64::consts::LN_2.sqrt());
        assert!((r.value - exact).abs() < 1e-8, "{} vs {}", r.value, exact);
        assert!((r.value - 5.952_937_177_785_9).abs() < 1e-8);
    }

    #[test]
    fn halving_tolerance_does_not_increase_error() {
        let mut prev = f64::INFINITY;
        for k in 4..10 {
            let cfg = cfg1().with_abs_tol(10f64.powi(-k));
            let r = integrate_graded(&mut |r: f64| r.sqrt() * (1.0 + r.sin()), &cfg);
            assert!(r.error_estimate <= prev * (1.0 + 1e-12));
            prev = r.error_estimate;
        }
    }

    #[test]
    fn sphere_average_examples() {
        let cfg = QuadConfig::for_dim(2);
        let c = ScalarField::new(2, 10.0, DiniClass::Smooth, "c", |_| 2.5);
        assert!((sphere_average(&c, &[0.1, 0.2], 0.7, &cfg).unwrap() - 2.5).abs() < 1e-14);
        let y1 = ScalarField::new(2, 10.0, DiniClass::Smooth, "y1", |y| y[0]);
        assert!(sphere_average(&y1, &[0.0, 0.0], 0.8, &cfg).unwrap().abs() < 1e-14);
        let y1sq = ScalarField::new(2, 10.0, DiniClass::Smooth, "y1^2", |y| y[0] * y[0]);
        assert!((sphere_average(&y1sq, &[0.0, 0.0], 1.0, &cfg).unwrap() - 0.5).abs() < 1e-14);
        let c3 = ScalarField::new(3, 10.0, DiniClass::Smooth, "z^2", |y| y[2] * y[2]);
        assert!((sphere_average(&c3, &[0.0; 3], 1.0, &QuadConfig::for_dim(3)).unwrap() - 1.0 / 3.0).abs() < 1e-13);
        let one = ScalarField::new(4, 10.0, DiniClass::Smooth, "c", |_| 1.0);
        assert!(sphere_average(&one, &[0.0; 4], 1.0, &cfg).is_err());
    }

    #[test]
    fn region_examples() {
        let one1 = ScalarField::new(1, 10.0, DiniClass::Smooth, "one", |_| 1.0);
        let r = integrate_region(&one1, &Domain::Interval { a: 0.0, b: 2.0 }, None, &cfg1()).unwrap();
        assert!((r.value - 2.0).abs() < 1e-12);
        let cfg = QuadConfig::for_dim(2);
        let one2 = ScalarField::new(2, 10.0, DiniClass::Smooth, "one", |_| 1.0);
        let disc = Domain::Ball { center: vec![0.0, 0.0], radius: 1.0 };
        let r = integrate_region(&one2, &disc, Some((&[0.0, 0.0], 0.5)), &cfg).unwrap();
        assert!((r.value - 0.75 * PI).abs() < 1e-10);
        let inv = ScalarField::new(2, 10.0, DiniClass::Smooth, "|y|^-2", |y| 1.0 / (y[0] * y[0] + y[1] * y[1]));
        let r = integrate_region(&inv, &disc, Some((&[0.0, 0.0], 0.5)), &cfg).unwrap();
        assert!((r.value - TAU * std::f64::consts::LN_2).abs() < 1e-8);
        assert!(r.converged);
    }

    #[test]
    fn neumaier_beats_naive_sum() {
        let v = [1e16, 1.0, -1e16, 1.0];
        assert_eq!(neumaier_sum(v), 2.0);
    }

    #[test]
    fn config_validation() {
        assert!(QuadConfig::for_dim(2).validate().is_ok());
        let mut c = QuadConfig::for_dim(1);
        c.grade_base = 1.0;
        assert!(c.validate().is_err());
        c = QuadConfig::for_dim(1);
        c.min_radius = 0.01;
        assert!(c.validate().is_err());
    }
}
