//! Bounded open regions and the geometric queries the integrators need.

use crate::error::{invalid, LoglapError, Result};
use crate::special::constants_for;
use serde::{Deserialize, Serialize};
use std::fmt;
use std::sync::Arc;

pub fn norm(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}

pub fn dist2(x: &[f64], y: &[f64]) -> f64 {
    x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum()
}

pub fn dist(x: &[f64], y: &[f64]) -> f64 {
    dist2(x, y).sqrt()
}

/// Parameters t1 ≤ t2 where the line x + tθ (θ a unit vector) meets the
/// sphere |y − c| = R, if it does.
pub fn ray_sphere(x: &[f64], theta: &[f64], c: &[f64], radius: f64) -> Option<(f64, f64)> {
    let d: Vec<f64> = x.iter().zip(c).map(|(a, b)| a - b).collect();
    let b: f64 = d.iter().zip(theta).map(|(a, t)| a * t).sum();
    let cc = d.iter().map(|v| v * v).sum::<f64>() - radius * radius;
    let disc = b * b - cc;
    if disc <= 0.0 {
        return None;
    }
    let s = disc.sqrt();
    // Stable roots of t² + 2bt + cc = 0.
    let q = if b > 0.0 { -(b + s) } else { -b + s };
    let (r1, r2) = if q != 0.0 { (q, cc / q) } else { (-s, s) };
    Some((r1.min(r2), r1.max(r2)))
}

type Predicate = dyn Fn(&[f64]) -> bool + Send + Sync;

/// Region given by a membership predicate inside an axis-aligned box.
#[derive(Clone)]
pub struct IndicatorRegion {
    pub predicate: Arc<Predicate>,
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
    pub label: String,
}

impl fmt::Debug for IndicatorRegion {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("IndicatorRegion").field("lo", &self.lo).field("hi", &self.hi).field("label", &self.label).finish()
    }
}

/// Bounded open set in R^N.
#[derive(Debug, Clone)]
pub enum Domain {
    Interval { a: f64, b: f64 },
    Ball { center: Vec<f64>, radius: f64 },
    /// B_R ∩ {x_1 > 0}.
    HalfBall { radius: f64, dim: usize },
    /// B_{1/2}(e_1/2) ∩ {x_1 > 1/2}.
    SphericalCap { dim: usize },
    Indicator(IndicatorRegion),
}

/// JSON form of the analytic domain kinds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", deny_unknown_fields)]
pub enum DomainSpec {
    #[serde(rename = "interval")]
    Interval { a: f64, b: f64 },
    #[serde(rename = "ball")]
    Ball { center: Vec<f64>, radius: f64 },
    #[serde(rename = "halfball")]
    HalfBall { radius: f64, dim: usize },
    #[serde(rename = "cap_D")]
    Cap {
        #[serde(default)]
        dim: Option<usize>,
    },
}

impl DomainSpec {
    pub fn build(&self) -> Result<Domain> {
        let d = match self {
            DomainSpec::Interval { a, b } => Domain::Interval { a: *a, b: *b },
            DomainSpec::Ball { center, radius } => Domain::Ball { center: center.clone(), radius: *radius },
            DomainSpec::HalfBall { radius, dim } => Domain::HalfBall { radius: *radius, dim: *dim },
            DomainSpec::Cap { dim } => Domain::SphericalCap { dim: dim.unwrap_or(2) },
        };
        d.validate()?;
        Ok(d)
    }
}

/// Inversion sphere with centre x0 and radius R.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpherePose {
    pub x0: Vec<f64>,
    pub r: f64,
}

impl SpherePose {
    pub fn new(x0: Vec<f64>, r: f64) -> Result<Self> {
        if !(r > 0.0 && r.is_finite()) {
            return invalid(format!("inversion radius must be positive, got {r}"));
        }
        Ok(SpherePose { x0, r })
    }

    pub fn unit(dim: usize) -> Self {
        SpherePose { x0: vec![0.0; dim], r: 1.0 }
    }
}

fn halfspace_clip(lo: &mut f64, hi: &mut f64, x: &[f64], theta: &[f64], axis: usize, offset: f64) {
    // keep r with x_axis + r θ_axis > offset
    let t = theta[axis];
    let gap = offset - x[axis];
    if t > 0.0 {
        *lo = lo.max(gap / t);
    } else if t < 0.0 {
        *hi = hi.min(gap / t);
    } else if gap >= 0.0 {
        *hi = *lo;
    }
}

impl Domain {
    pub fn dim(&self) -> usize {
        match self {
            Domain::Interval { .. } => 1,
            Domain::Ball { center, .. } => center.len(),
            Domain::HalfBall { dim, .. } | Domain::SphericalCap { dim } => *dim,
            Domain::Indicator(r) => r.lo.len(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            Domain::Interval { a, b } if !(a < b && a.is_finite() && b.is_finite()) => {
                invalid(format!("interval needs a < b, got ({a}, {b})"))
            }
            Domain::Ball { center, radius } if center.is_empty() || !(*radius > 0.0) => {
                invalid("ball needs a nonempty centre and positive radius")
            }
            Domain::HalfBall { radius, dim } if *dim < 1 || !(*radius > 0.0) => invalid("halfball needs dim ≥ 1 and radius > 0"),
            Domain::SphericalCap { dim } if *dim < 2 => invalid("cap_D needs dim ≥ 2"),
            Domain::Indicator(r) if r.lo.len() != r.hi.len() || r.lo.iter().zip(&r.hi).any(|(a, b)| a >= b) => {
                invalid("indicator bounding box is degenerate")
            }
            _ => Ok(()),
        }
    }

    pub fn indicator<F>(lo: Vec<f64>, hi: Vec<f64>, label: &str, predicate: F) -> Self
    where
        F: Fn(&[f64]) -> bool + Send + Sync + 'static,
    {
        Domain::Indicator(IndicatorRegion { predicate: Arc::new(predicate), lo, hi, label: label.to_string() })
    }

    /// Membership in the open set.
    pub fn contains(&self, x: &[f64]) -> bool {
        match self {
            Domain::Interval { a, b } => x[0] > *a && x[0] < *b,
            Domain::Ball { center, radius } => dist2(x, center) < radius * radius,
            Domain::HalfBall { radius, .. } => x[0] > 0.0 && norm(x) < *radius,
            Domain::SphericalCap { .. } => {
                let mut c = vec![0.0; x.len()];
                c[0] = 0.5;
                x[0] > 0.5 && dist(x, &c) < 0.5
            }
            Domain::Indicator(r) => {
                x.iter().zip(r.lo.iter().zip(&r.hi)).all(|(v, (l, h))| v > l && v < h) && (r.predicate)(x)
            }
        }
    }

    /// Euclidean distance from an interior point to the boundary.
    pub fn dist_boundary(&self, x: &[f64]) -> Result<f64> {
        if x.len() != self.dim() {
            return invalid("point dimension does not match the domain");
        }
        if !self.contains(x) {
            return Err(LoglapError::OutsideDomain(format!("{x:?}")));
        }
        Ok(match self {
            Domain::Interval { a, b } => (x[0] - a).min(b - x[0]),
            Domain::Ball { center, radius } => radius - dist(x, center),
            Domain::HalfBall { radius, .. } => (radius - norm(x)).min(x[0]),
            Domain::SphericalCap { .. } => {
                let mut c = vec![0.0; x.len()];
                c[0] = 0.5;
                (0.5 - dist(x, &c)).min(x[0] - 0.5)
            }
            Domain::Indicator(_) => {
                let mut best = f64::INFINITY;
                for theta in sample_directions(x.len()) {
                    let iv = self.ray_intervals(x, &theta);
                    if let Some(&(_, hi)) = iv.first() {
                        best = best.min(hi);
                    }
                }
                best
            }
        })
    }

    pub fn measure(&self) -> f64 {
        let ball = |n: usize, r: f64| {
            let c = constants_for(n).expect("dimension ≥ 1");
            c.unit_ball_volume() * r.powi(n as i32)
        };
        match self {
            Domain::Interval { a, b } => b - a,
            Domain::Ball { center, radius } => ball(center.len(), *radius),
            Domain::HalfBall { radius, dim } => 0.5 * ball(*dim, *radius),
            // the cutting plane passes through the centre of B_{1/2}(e_1/2)
            Domain::SphericalCap { dim } => 0.5 * ball(*dim, 0.5),
            Domain::Indicator(r) => indicator_measure(r),
        }
    }

    pub fn satisfies_mp_volume(&self) -> bool {
        let c = constants_for(self.dim()).expect("dimension ≥ 1");
        self.measure() < c.mp_volume_threshold
    }

    /// Radius of a ball about the origin containing the domain.
    pub fn bounding_radius(&self) -> f64 {
        match self {
            Domain::Interval { a, b } => a.abs().max(b.abs()),
            Domain::Ball { center, radius } => norm(center) + radius,
            Domain::HalfBall { radius, .. } => *radius,
            Domain::SphericalCap { .. } => 1.0,
            Domain::Indicator(r) => {
                r.lo.iter().zip(&r.hi).map(|(l, h)| l.abs().max(h.abs()).powi(2)).sum::<f64>().sqrt()
            }
        }
    }

    /// A point inside the domain.
    pub fn reference_point(&self) -> Vec<f64> {
        match self {
            Domain::Interval { a, b } => vec![0.5 * (a + b)],
            Domain::Ball { center, .. } => center.clone(),
            Domain::HalfBall { radius, dim } => {
                let mut p = vec![0.0; *dim];
                p[0] = 0.5 * radius;
                p
            }
            Domain::SphericalCap { dim } => {
                let mut p = vec![0.0; *dim];
                p[0] = 0.75;
                p
            }
            Domain::Indicator(r) => r.lo.iter().zip(&r.hi).map(|(l, h)| 0.5 * (l + h)).collect(),
        }
    }

    /// Sorted disjoint intervals of r ≥ 0 with x + rθ in the domain.
    pub fn ray_intervals(&self, x: &[f64], theta: &[f64]) -> Vec<(f64, f64)> {
        let mut lo = 0.0f64;
        let mut hi;
        match self {
            Domain::Interval { a, b } => {
                if theta[0] > 0.0 {
                    lo = lo.max((a - x[0]) / theta[0]);
                    hi = (b - x[0]) / theta[0];
                } else {
                    lo = lo.max((b - x[0]) / theta[0]);
                    hi = (a - x[0]) / theta[0];
                }
            }
            Domain::Ball { center, radius } => match ray_sphere(x, theta, center, *radius) {
                Some((t1, t2)) => {
                    lo = lo.max(t1);
                    hi = t2;
                }
                None => return vec![],
            },
            Domain::HalfBall { radius, .. } => {
                match ray_sphere(x, theta, &vec![0.0; x.len()], *radius) {
                    Some((t1, t2)) => {
                        lo = lo.max(t1);
                        hi = t2;
                    }
                    None => return vec![],
                }
                halfspace_clip(&mut lo, &mut hi, x, theta, 0, 0.0);
            }
            Domain::SphericalCap { .. } => {
                let mut c = vec![0.0; x.len()];
                c[0] = 0.5;
                match ray_sphere(x, theta, &c, 0.5) {
                    Some((t1, t2)) => {
                        lo = lo.max(t1);
                        hi = t2;
                    }
                    None => return vec![],
                }
                halfspace_clip(&mut lo, &mut hi, x, theta, 0, 0.5);
            }
            Domain::Indicator(r) => return indicator_ray(self, r, x, theta),
        }
        if hi > lo {
            vec![(lo, hi)]
        } else {
            vec![]
        }
    }

    /// Boundary points where the boundary is not smooth (N = 2 only);
    /// directions to these are breakpoints for angular quadrature.
    pub fn corners(&self) -> Vec<Vec<f64>> {
        match self {
            Domain::HalfBall { radius, dim: 2 } => vec![vec![0.0, *radius], vec![0.0, -radius]],
            Domain::SphericalCap { dim: 2 } => vec![vec![0.5, 0.5], vec![0.5, -0.5]],
            _ => vec![],
        }
    }

    /// Whether every ray from an interior point leaves the domain once.
    pub fn is_convex(&self) -> bool {
        !matches!(self, Domain::Indicator(_))
    }
}

fn sample_directions(n: usize) -> Vec<Vec<f64>> {
    match n {
        1 => vec![vec![1.0], vec![-1.0]],
        2 => (0..1440)
            .map(|k| {
                let a = std::f64::consts::TAU * k as f64 / 1440.0;
                vec![a.cos(), a.sin()]
            })
            .collect(),
        _ => {
            // Fibonacci sphere
            let m = 4000;
            let golden = std::f64::consts::PI * (3.0 - 5f64.sqrt());
            (0..m)
                .map(|k| {
                    let z = 1.0 - 2.0 * (k as f64 + 0.5) / m as f64;
                    let s = (1.0 - z * z).sqrt();
                    let a = golden * k as f64;
                    let mut v = vec![0.0; n];
                    v[0] = z;
                    v[1] = s * a.cos();
                    v[2] = s * a.sin();
                    v
                })
                .collect()
        }
    }
}

fn box_exit(r: &IndicatorRegion, x: &[f64], theta: &[f64]) -> f64 {
    let mut t = f64::INFINITY;
    for k in 0..x.len() {
        if theta[k] > 0.0 {
            t = t.min((r.hi[k] - x[k]) / theta[k]);
        } else if theta[k] < 0.0 {
            t = t.min((r.lo[k] - x[k]) / theta[k]);
        }
    }
    t.max(0.0)
}

/// Membership changes along the ray are bracketed on a uniform scan and
/// refined by bisection to 1e-12 relative to the box diameter.
fn indicator_ray(dom: &Domain, r: &IndicatorRegion, x: &[f64], theta: &[f64]) -> Vec<(f64, f64)> {
    let tmax = box_exit(r, x, theta);
    if tmax <= 0.0 {
        return vec![];
    }
    let steps = 4000;
    let h = tmax / steps as f64;
    let at = |t: f64| -> bool {
        let p: Vec<f64> = x.iter().zip(theta).map(|(a, b)| a + t * b).collect();
        dom.contains(&p)
    };
    let refine = |mut a: f64, mut b: f64, inside_a: bool| -> f64 {
        for _ in 0..200 {
            let m = 0.5 * (a + b);
            if m <= a || m >= b || b - a < 1e-12 * tmax {
                break;
            }
            if at(m) == inside_a {
                a = m;
            } else {
                b = m;
            }
        }
        0.5 * (a + b)
    };
    let mut out = Vec::new();
    let mut prev = at(0.0);
    let mut start = if prev { Some(0.0) } else { None };
    for k in 1..=steps {
        let t = if k == steps { tmax } else { h * k as f64 };
        let now = if k == steps { false } else { at(t) };
        if now != prev {
            let edge = if k == steps && prev { tmax } else { refine(t - h, t, prev) };
            if now {
                start = Some(edge);
            } else if let Some(s) = start.take() {
                out.push((s, edge));
            }
            prev = now;
        }
    }
    out
}

fn indicator_measure(r: &IndicatorRegion) -> f64 {
    let n = r.lo.len();
    let m: usize = match n {
        1 => 200_000,
        2 => 1000,
        _ => 120,
    };
    let widths: Vec<f64> = r.lo.iter().zip(&r.hi).map(|(l, h)| (h - l) / m as f64).collect();
    let cell: f64 = widths.iter().product();
    let total = m.pow(n as u32);
    let mut count = 0usize;
    let mut p = vec![0.0; n];
    for idx in 0..total {
        let mut k = idx;
        for d in 0..n {
            p[d] = r.lo[d] + (k % m) as f64 * widths[d] + 0.5 * widths[d];
            k /= m;
        }
        if (r.predicate)(&p) {
            count += 1;
        }
    }
    count as f64 * cell
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn membership_examples() {
        assert!(Domain::Interval { a: 0.0, b: 2.0 }.contains(&[1.0]));
        assert!(!Domain::Ball { center: vec![0.0, 0.0], radius: 0.3 }.contains(&[0.3, 0.0]));
        assert!(!Domain::HalfBall { radius: 2.0, dim: 2 }.contains(&[-0.1, 0.0]));
        assert!(Domain::SphericalCap { dim: 2 }.contains(&[0.75, 0.1]));
        assert!(!Domain::SphericalCap { dim: 2 }.contains(&[0.45, 0.0]));
    }

    #[test]
    fn distance_examples() {
        let i = Domain::Interval { a: 0.0, b: 0.5 };
        assert_eq!(i.dist_boundary(&[0.1]).unwrap(), 0.1);
        assert_eq!(i.dist_boundary(&[0.4]).unwrap(), 0.5 - 0.4);
        let b = Domain::Ball { center: vec![0.0, 0.0], radius: 0.3 };
        assert!((b.dist_boundary(&[0.1, 0.1]).unwrap() - (0.3 - 0.02f64.sqrt())).abs() < 1e-15);
        assert!(i.dist_boundary(&[0.7]).is_err());
    }

    #[test]
    fn cap_distance_matches_ray_bisection() {
        let cap = Domain::SphericalCap { dim: 2 };
        let pred = Domain::indicator(vec![0.5, -0.5], vec![1.0, 0.5], "cap", |x| {
            x[0] > 0.5 && (x[0] - 0.5).hypot(x[1]) < 0.5
        });
        for p in [[0.97, 0.02], [0.9, 0.2], [0.6, 0.05], [0.75, 0.4]] {
            let exact = cap.dist_boundary(&p).unwrap();
            let approx = pred.dist_boundary(&p).unwrap();
            assert!(approx >= exact - 1e-10, "{p:?}");
            assert!(approx - exact < 1e-4 * (1.0 + exact), "{p:?}: {approx} vs {exact}");
        }
    }

    #[test]
    fn measure_examples() {
        assert_eq!(Domain::Interval { a: 0.0, b: 0.5 }.measure(), 0.5);
        let b = Domain::Ball { center: vec![0.0, 0.0], radius: 0.3 };
        assert!((b.measure() - 0.282_743_338_823_081_4).abs() < 1e-12);
        assert!((Domain::HalfBall { radius: 2.0, dim: 2 }.measure() - 2.0 * PI).abs() < 1e-12);
        let disc = Domain::indicator(vec![-1.0, -1.0], vec![1.0, 1.0], "disc", |x| x[0].hypot(x[1]) < 0.8);
        assert!((disc.measure() - PI * 0.64).abs() < 1e-3);
    }

    #[test]
    fn mp_volume_examples() {
        assert!(Domain::Ball { center: vec![0.0], radius: 0.5 }.satisfies_mp_volume());
        assert!(!Domain::Ball { center: vec![0.0], radius: 0.6 }.satisfies_mp_volume());
        assert!(Domain::Ball { center: vec![0.0, 0.0], radius: 0.1 }.satisfies_mp_volume());
        assert!(!Domain::Interval { a: 0.0, b: 1.5 }.satisfies_mp_volume());
    }

    #[test]
    fn inward_slope_is_minus_one() {
        let doms: Vec<(Domain, Vec<f64>, Vec<f64>)> = vec![
            (Domain::Ball { center: vec![0.0, 0.0], radius: 1.0 }, vec![0.6, 0.0], vec![1.0, 0.0]),
            (Domain::HalfBall { radius: 2.0, dim: 2 }, vec![0.05, 0.3], vec![-1.0, 0.0]),
            (Domain::SphericalCap { dim: 2 }, vec![0.9, 0.0], vec![1.0, 0.0]),
        ];
        for (d, x, out) in doms {
            let h = 1e-4;
            let y: Vec<f64> = x.iter().zip(&out).map(|(a, b)| a + h * b).collect();
            let slope = (d.dist_boundary(&y).unwrap() - d.dist_boundary(&x).unwrap()) / h;
            assert!((slope + 1.0).abs() < 1e-6);
        }
    }

    #[test]
    fn halfball_is_half_of_ball() {
        let hb = Domain::HalfBall { radius: 1.3, dim: 3 };
        let b = Domain::Ball { center: vec![0.0; 3], radius: 1.3 };
        assert_eq!(hb.measure(), 0.5 * b.measure());
    }

    #[test]
    fn ray_intervals_for_cap_and_indicator() {
        let cap = Domain::SphericalCap { dim: 2 };
        let iv = cap.ray_intervals(&[0.75, 0.0], &[1.0, 0.0]);
        assert_eq!(iv.len(), 1);
        assert!((iv[0].1 - 0.25).abs() < 1e-15);
        let annulus = Domain::indicator(vec![-1.0, -1.0], vec![1.0, 1.0], "annulus", |x| {
            let r = x[0].hypot(x[1]);
            r > 0.3 && r < 0.9
        });
        let iv = annulus.ray_intervals(&[-0.6, 0.0], &[1.0, 0.0]);
        assert_eq!(iv.len(), 2);
        assert!((iv[0].1 - 0.3).abs() < 1e-9 && (iv[1].0 - 0.9).abs() < 1e-9 && (iv[1].1 - 1.5).abs() < 1e-9);
    }

    #[test]
    fn domain_json_roundtrip() {
        let s = r#"{"kind":"ball","center":[0,0],"radius":0.3}"#;
        let spec: DomainSpec = serde_json::from_str(s).unwrap();
        assert_eq!(spec, DomainSpec::Ball { center: vec![0.0, 0.0], radius: 0.3 });
        let cap: DomainSpec = serde_json::from_str(r#"{"kind":"cap_D"}"#).unwrap();
        assert_eq!(cap.build().unwrap().dim(), 2);
        assert!(serde_json::from_str::<DomainSpec>(r#"{"kind":"interval","a":0,"b":1,"c":2}"#).is_err());
        assert!(DomainSpec::Interval { a: 1.0, b: 0.0 }.build().is_err());
    }
}
