//! Evaluable scalar fields with bounded support and hints for quadrature.

use serde::{Deserialize, Serialize};
use std::fmt;
use std::sync::Arc;

/// Modulus-of-continuity class of a field, used for quadrature tails.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum DiniClass {
    Smooth,
    /// Continuous with modulus ℓ^α.
    LogHolder(f64),
    /// Jump discontinuities across the singular features.
    Indicator,
}

/// Geometric feature across which a field may lose smoothness.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum FeatureShape {
    Plane { axis: usize, offset: f64 },
    Sphere { center: Vec<f64>, radius: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Feature {
    pub shape: FeatureShape,
    /// Whether the field fails to be Dini continuous on this set.
    pub singular: bool,
}

impl Feature {
    pub fn plane(axis: usize, offset: f64, singular: bool) -> Self {
        Feature { shape: FeatureShape::Plane { axis, offset }, singular }
    }

    pub fn sphere(center: Vec<f64>, radius: f64, singular: bool) -> Self {
        Feature { shape: FeatureShape::Sphere { center, radius }, singular }
    }

    pub fn distance(&self, x: &[f64]) -> f64 {
        match &self.shape {
            FeatureShape::Plane { axis, offset } => (x[*axis] - offset).abs(),
            FeatureShape::Sphere { center, radius } => (crate::geometry::dist(x, center) - radius).abs(),
        }
    }

    /// Radii r at which the sphere S_r(x) starts or stops meeting the feature.
    pub fn critical_radii(&self, x: &[f64]) -> Vec<f64> {
        match &self.shape {
            FeatureShape::Plane { axis, offset } => vec![(x[*axis] - offset).abs()],
            FeatureShape::Sphere { center, radius } => {
                let d = crate::geometry::dist(x, center);
                vec![(d - radius).abs(), d + radius]
            }
        }
    }

    /// Parameters r > 0 where the ray x + rθ crosses the feature.
    pub fn ray_crossings(&self, x: &[f64], theta: &[f64]) -> Vec<f64> {
        match &self.shape {
            FeatureShape::Plane { axis, offset } => {
                let t = theta[*axis];
                if t.abs() < 1e-300 {
                    return vec![];
                }
                let r = (offset - x[*axis]) / t;
                if r > 0.0 {
                    vec![r]
                } else {
                    vec![]
                }
            }
            FeatureShape::Sphere { center, radius } => {
                crate::geometry::ray_sphere(x, theta, center, *radius)
                    .map(|(a, b)| [a, b].into_iter().filter(|&r| r > 0.0).collect())
                    .unwrap_or_default()
            }
        }
    }

    /// Angles φ on the circle x + r(cos φ, sin φ) where it meets the feature (N = 2).
    pub fn circle_angles(&self, x: &[f64], r: f64) -> Vec<f64> {
        let mut out = Vec::new();
        match &self.shape {
            FeatureShape::Plane { axis, offset } => {
                let c = (offset - x[*axis]) / r;
                if c.abs() < 1.0 {
                    if *axis == 0 {
                        let a = c.acos();
                        out.extend([a, -a]);
                    } else {
                        let a = c.asin();
                        out.extend([a, std::f64::consts::PI - a]);
                    }
                }
            }
            FeatureShape::Sphere { center, radius } => {
                let d = [x[0] - center[0], x[1] - center[1]];
                let dn = d[0].hypot(d[1]);
                if dn > 0.0 {
                    let k = (radius * radius - dn * dn - r * r) / (2.0 * r * dn);
                    if k.abs() < 1.0 {
                        let alpha = d[1].atan2(d[0]);
                        let w = k.acos();
                        out.extend([alpha + w, alpha - w]);
                    }
                }
            }
        }
        out
    }

    /// Polar coordinates μ = cos ϑ about the e_1 axis where the sphere
    /// x + rθ meets the feature (N = 3; exact for planes normal to e_1 and
    /// spheres centred on the axis through x).
    pub fn polar_breaks(&self, x: &[f64], r: f64) -> Vec<f64> {
        match &self.shape {
            FeatureShape::Plane { axis: 0, offset } => {
                let c = (offset - x[0]) / r;
                if c.abs() < 1.0 {
                    vec![c]
                } else {
                    vec![]
                }
            }
            FeatureShape::Sphere { center, radius } => {
                let d: Vec<f64> = x.iter().zip(center).map(|(a, b)| a - b).collect();
                let perp = d[1..].iter().map(|v| v * v).sum::<f64>();
                if perp > 1e-24 {
                    return vec![];
                }
                // |d + rθ|² = R² with d on the axis: d0² + r² + 2 r d0 μ = R²
                if d[0] == 0.0 {
                    return vec![];
                }
                let mu = (radius * radius - d[0] * d[0] - r * r) / (2.0 * r * d[0]);
                if mu.abs() < 1.0 {
                    vec![mu]
                } else {
                    vec![]
                }
            }
            _ => vec![],
        }
    }

    pub fn scaled(&self, lambda: f64) -> Feature {
        let shape = match &self.shape {
            FeatureShape::Plane { axis, offset } => FeatureShape::Plane { axis: *axis, offset: offset * lambda },
            FeatureShape::Sphere { center, radius } => FeatureShape::Sphere {
                center: center.iter().map(|c| c * lambda).collect(),
                radius: radius * lambda,
            },
        };
        Feature { shape, singular: self.singular }
    }
}

type EvalFn = dyn Fn(&[f64]) -> f64 + Send + Sync;

/// Real-valued field on R^N that vanishes outside the ball of radius
/// `support_radius` about the origin.
#[derive(Clone)]
pub struct ScalarField {
    dim: usize,
    eval: Arc<EvalFn>,
    support_radius: f64,
    dini_class: DiniClass,
    label: String,
    features: Vec<Feature>,
}

impl fmt::Debug for ScalarField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ScalarField")
            .field("dim", &self.dim)
            .field("support_radius", &self.support_radius)
            .field("dini_class", &self.dini_class)
            .field("label", &self.label)
            .field("features", &self.features.len())
            .finish()
    }
}

impl ScalarField {
    /// Wraps `eval`; the wrapper returns 0 outside the declared support.
    pub fn new<F>(dim: usize, support_radius: f64, dini_class: DiniClass, label: &str, eval: F) -> Self
    where
        F: Fn(&[f64]) -> f64 + Send + Sync + 'static,
    {
        ScalarField {
            dim,
            eval: Arc::new(eval),
            support_radius,
            dini_class,
            label: label.to_string(),
            features: Vec::new(),
        }
    }

    pub fn with_features(mut self, features: Vec<Feature>) -> Self {
        self.features = features;
        self
    }

    pub fn dim(&self) -> usize {
        self.dim
    }
    pub fn support_radius(&self) -> f64 {
        self.support_radius
    }
    pub fn dini_class(&self) -> DiniClass {
        self.dini_class
    }
    pub fn label(&self) -> &str {
        &self.label
    }
    pub fn features(&self) -> &[Feature] {
        &self.features
    }

    pub fn value(&self, x: &[f64]) -> f64 {
        let r2: f64 = x.iter().map(|v| v * v).sum();
        if r2 > self.support_radius * self.support_radius {
            return 0.0;
        }
        (self.eval)(x)
    }

    /// Distance from x to the nearest feature on which the field is not Dini.
    pub fn singular_distance(&self, x: &[f64]) -> f64 {
        self.features.iter().filter(|f| f.singular).map(|f| f.distance(x)).fold(f64::INFINITY, f64::min)
    }

    /// Distance from x to any declared feature (smoothness scale of the field at x).
    pub fn feature_distance(&self, x: &[f64]) -> f64 {
        self.features.iter().map(|f| f.distance(x)).fold(f64::INFINITY, f64::min)
    }

    /// Whether the field is Dini continuous at points of its singular set.
    pub fn dini_on_features(&self) -> bool {
        match self.dini_class {
            DiniClass::Smooth => true,
            DiniClass::LogHolder(a) => a > 1.0,
            DiniClass::Indicator => false,
        }
    }

    /// Identically zero field.
    pub fn zero(dim: usize) -> Self {
        ScalarField::new(dim, 0.0, DiniClass::Smooth, "zero", |_| 0.0)
    }

    /// Unit Gaussian e^{-|x|²/2}, truncated at radius 9 (tail below 3e-18).
    pub fn gaussian(dim: usize) -> Self {
        let r = 9.0;
        ScalarField::new(dim, r, DiniClass::Smooth, "gaussian", |x| {
            (-0.5 * x.iter().map(|v| v * v).sum::<f64>()).exp()
        })
        .with_features(vec![Feature::sphere(vec![0.0; dim], r, false)])
    }

    /// Smooth bump a·exp(1 − 1/(1 − |x−c|²/ρ²)) supported in B_ρ(c).
    pub fn bump(center: &[f64], radius: f64, amplitude: f64) -> Self {
        let c = center.to_vec();
        let dim = c.len();
        let support = crate::geometry::norm(&c) + radius;
        let cc = c.clone();
        ScalarField::new(dim, support, DiniClass::Smooth, "bump", move |x| {
            let q = crate::geometry::dist2(x, &cc) / (radius * radius);
            if q >= 1.0 {
                0.0
            } else {
                amplitude * (1.0 - 1.0 / (1.0 - q)).exp()
            }
        })
        .with_features(vec![Feature::sphere(c, radius, false)])
    }

    fn joint_class(u: &ScalarField, v: &ScalarField) -> DiniClass {
        match (u.dini_class, v.dini_class) {
            (DiniClass::Indicator, _) | (_, DiniClass::Indicator) => DiniClass::Indicator,
            (DiniClass::LogHolder(p), DiniClass::LogHolder(q)) => DiniClass::LogHolder(p.min(q)),
            (DiniClass::LogHolder(p), _) | (_, DiniClass::LogHolder(p)) => DiniClass::LogHolder(p),
            _ => DiniClass::Smooth,
        }
    }

    /// Pointwise product; support is the smaller of the two support balls.
    pub fn product(u: &ScalarField, v: &ScalarField) -> Self {
        let (a, b) = (u.clone(), v.clone());
        let mut feats = u.features.clone();
        feats.extend(v.features.iter().cloned());
        ScalarField::new(
            u.dim,
            u.support_radius.min(v.support_radius),
            Self::joint_class(u, v),
            &format!("{}*{}", u.label, v.label),
            move |x| a.value(x) * b.value(x),
        )
        .with_features(feats)
    }

    /// Pointwise sum; support is the larger of the two support balls.
    pub fn sum(&self, v: &ScalarField) -> Self {
        let (a, b) = (self.clone(), v.clone());
        let mut feats = self.features.clone();
        feats.extend(v.features.iter().cloned());
        ScalarField::new(
            self.dim,
            self.support_radius.max(v.support_radius),
            Self::joint_class(self, v),
            &format!("{}+{}", self.label, v.label),
            move |x| a.value(x) + b.value(x),
        )
        .with_features(feats)
    }

    /// x ↦ u(x/λ).
    pub fn dilated(&self, lambda: f64) -> Self {
        let a = self.clone();
        let inv = 1.0 / lambda;
        ScalarField::new(
            self.dim,
            self.support_radius * lambda,
            self.dini_class,
            &format!("{}(x/{lambda})", self.label),
            move |x| {
                let y: Vec<f64> = x.iter().map(|v| v * inv).collect();
                a.value(&y)
            },
        )
        .with_features(self.features.iter().map(|f| f.scaled(lambda)).collect())
    }

    /// x ↦ s·u(x).
    pub fn scaled(&self, s: f64) -> Self {
        let a = self.clone();
        ScalarField::new(self.dim, self.support_radius, self.dini_class, &format!("{s}*{}", self.label), move |x| {
            s * a.value(x)
        })
        .with_features(self.features.clone())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn support_is_enforced() {
        let f = ScalarField::new(1, 1.0, DiniClass::Smooth, "one", |_| 1.0);
        assert_eq!(f.value(&[0.5]), 1.0);
        assert_eq!(f.value(&[1.5]), 0.0);
    }

    #[test]
    fn bump_shape() {
        let b = ScalarField::bump(&[0.5, 0.0], 0.2, 2.0);
        assert_eq!(b.value(&[0.5, 0.0]), 2.0);
        assert_eq!(b.value(&[0.71, 0.0]), 0.0);
        assert!(b.value(&[0.6, 0.0]) > 0.0);
        assert!((b.support_radius() - 0.7).abs() < 1e-15);
    }

    #[test]
    fn circle_angles_hit_the_plane() {
        let f = Feature::plane(0, 0.0, true);
        let x = [0.3, 0.0];
        for a in f.circle_angles(&x, 0.5) {
            assert!((x[0] + 0.5 * a.cos()).abs() < 1e-14);
        }
        let s = Feature::sphere(vec![1.0, 1.0], 0.7, false);
        let angles = s.circle_angles(&x, 1.0);
        assert_eq!(angles.len(), 2);
        for a in angles {
            let p = [x[0] + a.cos(), x[1] + a.sin()];
            assert!((crate::geometry::dist(&p, &[1.0, 1.0]) - 0.7).abs() < 1e-12);
        }
    }

    #[test]
    fn dilation_and_product() {
        let g = ScalarField::gaussian(1);
        let d = g.dilated(2.0);
        assert!((d.value(&[2.0]) - g.value(&[1.0])).abs() < 1e-16);
        let p = ScalarField::product(&g, &g);
        assert!((p.value(&[1.0]) - (-1.0f64).exp()).abs() < 1e-16);
    }
}
