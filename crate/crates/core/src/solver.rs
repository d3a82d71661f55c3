//! P1 Galerkin discretisation of L_Δu = f in Ω, u = 0 outside Ω, on
//! intervals and (radially) on balls.
//!
//! The stiffness matrix is E_L(φ_i, φ_j) in the Ω-restricted form
//!
//! E_L(u, v) = (c_N/2) ∬_{Ω×Ω} (u(x)−u(y))(v(x)−v(y))/|x−y|^N dx dy + ∫_Ω (h_Ω + ρ_N) u v,
//!
//! assembled element pair by element pair.

use crate::error::{invalid, LoglapError, Result};
use crate::field::{DiniClass, Feature, ScalarField};
use crate::geometry::{dist, Domain};
use crate::quadrature::{adaptive, gauss_legendre, QuadConfig};
use crate::special::{constants_for, ell_raw};
use crate::stats::line_fit;
use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::sync::OnceLock;

/// Node placement.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Grading {
    Uniform,
    /// Geometric clustering towards ∂Ω; the nodes nearest the boundary sit
    /// at distance `delta_min`.
    BoundaryGraded { delta_min: f64 },
    /// Nodes supplied by the caller.
    Explicit,
}

impl Grading {
    pub const DEFAULT_DELTA_MIN: f64 = 1e-12;

    pub fn boundary_graded() -> Self {
        Grading::BoundaryGraded { delta_min: Self::DEFAULT_DELTA_MIN }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Shape {
    Line { a: f64, b: f64 },
    Radial { dim: usize, radius: f64 },
}

/// Nodes on an interval, or radii on a ball for radial problems.
#[derive(Debug, Clone)]
pub struct Grid {
    domain: Domain,
    nodes: Vec<f64>,
    grading: Grading,
    shape: Shape,
}

/// Distances δ_1 < … < δ_m = half, geometric from delta_min.
fn geometric_offsets(delta_min: f64, half: f64, m: usize) -> Vec<f64> {
    if m == 1 {
        return vec![half];
    }
    let q = (half / delta_min).ln() / (m - 1) as f64;
    (0..m).map(|j| if j + 1 == m { half } else { delta_min * (q * j as f64).exp() }).collect()
}

/// Join distance D for radial grids: m uniform intervals on [0, R − D]
/// followed by m geometric nodes from D down to delta_min, with D chosen so
/// that the last geometric step matches the uniform spacing.
fn radial_join(delta_min: f64, r: f64, m: usize) -> f64 {
    let mismatch = |d: f64| {
        let q = (d / delta_min).powf(1.0 / (m as f64 - 1.0));
        d * (1.0 - 1.0 / q) - (r - d) / m as f64
    };
    let (mut lo, mut hi) = (2.0 * delta_min, 0.5 * r);
    if mismatch(hi) <= 0.0 {
        return hi;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mismatch(mid) > 0.0 {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    0.5 * (lo + hi)
}

impl Grid {
    /// `n` nodes including boundary nodes (and the centre for balls).
    pub fn new(domain: &Domain, n: usize, grading: Grading) -> Result<Self> {
        domain.validate()?;
        if n < 3 {
            return invalid("a grid needs at least 3 nodes");
        }
        if let Grading::BoundaryGraded { delta_min } = grading {
            if !(delta_min > 0.0) {
                return invalid("delta_min must be positive");
            }
            if n < 5 || n % 2 == 0 {
                return invalid("boundary-graded grids need an odd node count ≥ 5");
            }
        }
        if grading == Grading::Explicit {
            return invalid("explicit grids are built with Grid::from_nodes");
        }
        let (shape, nodes) = match domain {
            Domain::Interval { a, b } => {
                let (a, b) = (*a, *b);
                let nodes = match grading {
                    Grading::Explicit => unreachable!("rejected above"),
                    Grading::Uniform => (0..n).map(|k| a + (b - a) * k as f64 / (n - 1) as f64).collect(),
                    Grading::BoundaryGraded { delta_min } => {
                        let half = 0.5 * (b - a);
                        if delta_min >= 0.25 * half {
                            return invalid("delta_min must be small compared with the interval");
                        }
                        let m = (n - 1) / 2;
                        let off = geometric_offsets(delta_min, half, m);
                        let mut v = vec![a];
                        v.extend(off.iter().map(|d| a + d));
                        v.extend(off.iter().rev().skip(1).map(|d| b - d));
                        v.push(b);
                        v
                    }
                };
                (Shape::Line { a, b }, nodes)
            }
            Domain::Ball { center, radius } => {
                let dim = center.len();
                if !(2..=3).contains(&dim) {
                    return Err(LoglapError::Unsupported(format!("radial solves in dimension {dim}")));
                }
                let r = *radius;
                let nodes = match grading {
                    Grading::Explicit => unreachable!("rejected above"),
                    Grading::Uniform => (0..n).map(|k| r * k as f64 / (n - 1) as f64).collect(),
                    Grading::BoundaryGraded { delta_min } => {
                        if delta_min >= 0.125 * r {
                            return invalid("delta_min must be small compared with the radius");
                        }
                        let m = (n - 1) / 2;
                        let d = radial_join(delta_min, r, m);
                        let mut v: Vec<f64> = (0..m).map(|k| (r - d) * k as f64 / m as f64).collect();
                        v.extend(geometric_offsets(delta_min, d, m).iter().rev().map(|x| r - x));
                        v.push(r);
                        v
                    }
                };
                (Shape::Radial { dim, radius: r }, nodes)
            }
            _ => return Err(LoglapError::Unsupported("Galerkin grids on intervals and balls only".into())),
        };
        if nodes.windows(2).any(|w| !(w[1] > w[0])) {
            return invalid("grid nodes are not strictly increasing; increase delta_min");
        }
        Ok(Grid { domain: domain.clone(), nodes, grading, shape })
    }

    /// Grid with caller-supplied nodes: from a to b on intervals, from 0 to
    /// R (as radii) on balls.
    pub fn from_nodes(domain: &Domain, nodes: Vec<f64>) -> Result<Self> {
        domain.validate()?;
        if nodes.len() < 3 {
            return invalid("a grid needs at least 3 nodes");
        }
        if nodes.iter().any(|v| !v.is_finite()) || nodes.windows(2).any(|w| !(w[1] > w[0])) {
            return invalid("grid nodes must be finite and strictly increasing");
        }
        let (first, last) = (nodes[0], nodes[nodes.len() - 1]);
        let shape = match domain {
            Domain::Interval { a, b } => {
                if first != *a || last != *b {
                    return invalid("interval grids must start at a and end at b");
                }
                Shape::Line { a: *a, b: *b }
            }
            Domain::Ball { center, radius } if (2..=3).contains(&center.len()) => {
                if first != 0.0 || last != *radius {
                    return invalid("radial grids must start at 0 and end at the radius");
                }
                Shape::Radial { dim: center.len(), radius: *radius }
            }
            _ => return Err(LoglapError::Unsupported("Galerkin grids on intervals and 2D/3D balls only".into())),
        };
        Ok(Grid { domain: domain.clone(), nodes, grading: Grading::Explicit, shape })
    }

    pub fn domain(&self) -> &Domain {
        &self.domain
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn grading(&self) -> Grading {
        self.grading
    }

    pub fn n(&self) -> usize {
        self.nodes.len()
    }

    pub fn dim(&self) -> usize {
        match self.shape {
            Shape::Line { .. } => 1,
            Shape::Radial { dim, .. } => dim,
        }
    }

    pub fn is_radial(&self) -> bool {
        matches!(self.shape, Shape::Radial { .. })
    }

    /// Indices of the nodes carrying unknowns.
    pub fn interior(&self) -> std::ops::Range<usize> {
        match self.shape {
            Shape::Line { .. } => 1..self.n() - 1,
            Shape::Radial { .. } => 0..self.n() - 1,
        }
    }

    pub fn unknowns(&self) -> usize {
        self.interior().len()
    }

    /// Distance from node k to ∂Ω.
    pub fn boundary_distance(&self, k: usize) -> f64 {
        let s = self.nodes[k];
        match self.shape {
            Shape::Line { a, b } => (s - a).min(b - s),
            Shape::Radial { radius, .. } => radius - s,
        }
    }

    /// Grid coordinate of a point: x itself in 1D, |x − c| for balls.
    fn coordinate(&self, x: &[f64]) -> f64 {
        match (&self.domain, self.shape) {
            (Domain::Ball { center, .. }, Shape::Radial { .. }) => dist(x, center),
            _ => x[0],
        }
    }

    /// Radial measure weight: 1 in 1D, σ_N s^{N−1} for balls.
    fn weight(&self, s: f64) -> f64 {
        match self.shape {
            Shape::Line { .. } => 1.0,
            Shape::Radial { dim, .. } => constants_for(dim).expect("dimension ≥ 1").sigma_n * s.powi(dim as i32 - 1),
        }
    }

    /// Symmetric pair kernel K(s, t) with E_L's double integral equal to
    /// ∬ (ΔU)(ΔV) K ds dt over the grid coordinates; gap = |s − t|.
    fn kernel(&self, s: f64, t: f64, gap: f64) -> f64 {
        match self.shape {
            Shape::Line { .. } => 0.5 / gap,
            // (c_N/2) σ_N A_N(s,t) (st)^{N−1} with the angular integral A_N in closed form
            Shape::Radial { dim: 2, .. } => 2.0 * std::f64::consts::PI * s * t / (gap * (s + t)),
            Shape::Radial { .. } => 4.0 * std::f64::consts::PI * s.min(t) * s * t / (gap * (s + t)),
        }
    }

    /// h_Ω at local coordinate p of element e, with boundary distances
    /// formed without cancellation.
    fn h_local(&self, e: usize, p: f64) -> f64 {
        let (a0, a1) = (self.nodes[e], self.nodes[e + 1]);
        let h = a1 - a0;
        match self.shape {
            Shape::Line { a, b } => -((a0 - a) + h * p).ln() - ((b - a0) - h * p).ln(),
            Shape::Radial { radius, .. } => {
                let s = a0 + h * p;
                -(((radius - a0) - h * p) * (radius + s)).ln()
            }
        }
    }

    fn same_shape(&self, domain: &Domain) -> bool {
        match (&self.domain, domain) {
            (Domain::Interval { a, b }, Domain::Interval { a: c, b: d }) => a == c && b == d,
            (Domain::Ball { center, radius }, Domain::Ball { center: c, radius: r }) => center == c && radius == r,
            _ => false,
        }
    }
}

/// Piecewise-linear function on a grid, zero on and outside ∂Ω.
#[derive(Debug, Clone)]
pub struct GridFunction {
    grid: Grid,
    coefficients: Vec<f64>,
}

/// Serializable node/value table of a grid function.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridFunctionRecord {
    pub nodes: Vec<f64>,
    pub values: Vec<f64>,
}

impl GridFunction {
    pub fn new(grid: &Grid, coefficients: Vec<f64>) -> Result<Self> {
        if coefficients.len() != grid.unknowns() {
            return invalid(format!("expected {} coefficients, got {}", grid.unknowns(), coefficients.len()));
        }
        if coefficients.iter().any(|c| !c.is_finite()) {
            return invalid("grid function coefficients must be finite");
        }
        Ok(GridFunction { grid: grid.clone(), coefficients })
    }

    pub fn zero(grid: &Grid) -> Self {
        GridFunction { grid: grid.clone(), coefficients: vec![0.0; grid.unknowns()] }
    }

    /// Nodal interpolant of g(grid coordinate).
    pub fn interpolate(grid: &Grid, g: impl Fn(f64) -> f64) -> Result<Self> {
        let c = grid.interior().map(|k| g(grid.nodes[k])).collect();
        GridFunction::new(grid, c)
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn coefficients(&self) -> &[f64] {
        &self.coefficients
    }

    /// Values at all nodes, zero at boundary nodes.
    pub fn nodal_values(&self) -> Vec<f64> {
        let mut v = vec![0.0; self.grid.n()];
        for (c, k) in self.coefficients.iter().zip(self.grid.interior()) {
            v[k] = *c;
        }
        v
    }

    fn value_at_coordinate(&self, s: f64, full: &[f64]) -> f64 {
        let nodes = &self.grid.nodes;
        if s < nodes[0] || s >= nodes[nodes.len() - 1] {
            return 0.0;
        }
        let k = nodes.partition_point(|&v| v <= s) - 1;
        let t = (s - nodes[k]) / (nodes[k + 1] - nodes[k]);
        (1.0 - t) * full[k] + t * full[k + 1]
    }

    /// Interpolant at a point of R^N.
    pub fn value(&self, x: &[f64]) -> f64 {
        let s = self.grid.coordinate(x);
        self.value_at_coordinate(s, &self.nodal_values())
    }

    pub fn record(&self) -> GridFunctionRecord {
        GridFunctionRecord { nodes: self.grid.nodes.clone(), values: self.nodal_values() }
    }

    /// Rebuilds a grid function from its node/value table; boundary values
    /// must vanish.
    pub fn from_record(domain: &Domain, record: &GridFunctionRecord) -> Result<Self> {
        if record.nodes.len() != record.values.len() {
            return invalid("nodes and values differ in length");
        }
        let grid = Grid::from_nodes(domain, record.nodes.clone())?;
        let interior = grid.interior();
        if (0..grid.n()).any(|k| !interior.contains(&k) && record.values[k] != 0.0) {
            return invalid("boundary values must be zero");
        }
        let c = interior.map(|k| record.values[k]).collect();
        GridFunction::new(&grid, c)
    }

    /// The interpolant as a field; nodes become feature sets so that
    /// quadrature breaks at the kinks.
    pub fn to_field(&self) -> ScalarField {
        let full = self.nodal_values();
        let me = self.clone();
        let dim = self.grid.dim();
        let feats: Vec<Feature> = match &self.grid.domain {
            Domain::Ball { center, .. } => {
                self.grid.nodes.iter().skip(1).map(|&r| Feature::sphere(center.clone(), r, false)).collect()
            }
            _ => self.grid.nodes.iter().map(|&s| Feature::plane(0, s, false)).collect(),
        };
        let support = self.grid.domain.bounding_radius();
        ScalarField::new(dim, support, DiniClass::LogHolder(2.0), "grid-function", move |x| {
            me.value_at_coordinate(me.grid.coordinate(x), &full)
        })
        .with_features(feats)
    }
}

/// How the ∫(h_Ω + ρ_N)φ_iφ_j term enters the matrix.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum MassTreatment {
    Consistent,
    /// Row sums on the diagonal.
    Lumped,
}

fn gl(n: usize) -> &'static (Vec<f64>, Vec<f64>) {
    static R6: OnceLock<(Vec<f64>, Vec<f64>)> = OnceLock::new();
    static R8: OnceLock<(Vec<f64>, Vec<f64>)> = OnceLock::new();
    static R16: OnceLock<(Vec<f64>, Vec<f64>)> = OnceLock::new();
    let cell = match n {
        6 => &R6,
        8 => &R8,
        16 => &R16,
        _ => unreachable!("unsupported rule"),
    };
    // nodes and weights mapped to [0, 1]
    cell.get_or_init(|| {
        let (x, w) = gauss_legendre(n);
        (x.iter().map(|v| 0.5 * (v + 1.0)).collect(), w.iter().map(|v| 0.5 * v).collect())
    })
}

/// Accumulates w·K·Δ_aΔ_b over the local vertices of an element pair.
/// Points are given in element-local coordinates so that nothing is lost
/// to cancellation on tiny elements far from the origin.
struct PairAccumulator<'a> {
    grid: &'a Grid,
    ek: usize,
    el: usize,
    /// local vertex index of (ek, ek+1) and (el, el+1)
    map_k: [usize; 2],
    map_l: [usize; 2],
    size: usize,
    m: [[f64; 4]; 4],
}

impl<'a> PairAccumulator<'a> {
    fn new(grid: &'a Grid, ek: usize, el: usize) -> Self {
        let (map_k, map_l, size) = if ek == el {
            ([0, 1], [0, 1], 2)
        } else if el == ek + 1 {
            ([0, 1], [1, 2], 3)
        } else {
            ([0, 1], [2, 3], 4)
        };
        PairAccumulator { grid, ek, el, map_k, map_l, size, m: [[0.0; 4]; 4] }
    }

    fn global(&self, local: usize) -> usize {
        if local < 2 || self.size == 3 {
            self.ek + local
        } else {
            self.el + local - 2
        }
    }

    /// Adds w·K·d dᵀ where d is the local difference vector.
    #[inline]
    fn add_diff(&mut self, k: f64, d: &[f64; 4]) {
        for a in 0..self.size {
            let ka = k * d[a];
            for b in a..self.size {
                self.m[a][b] += ka * d[b];
            }
        }
    }

    /// Point p of element ek against q of element el, with |s − t| = gap.
    #[inline]
    fn add(&mut self, p: f64, q: f64, gap: f64, w: f64) {
        let nodes = &self.grid.nodes;
        let s = nodes[self.ek] + (nodes[self.ek + 1] - nodes[self.ek]) * p;
        let t = nodes[self.el] + (nodes[self.el + 1] - nodes[self.el]) * q;
        let k = self.grid.kernel(s, t, gap) * w;
        let mut d = [0.0; 4];
        d[self.map_k[0]] += 1.0 - p;
        d[self.map_k[1]] += p;
        d[self.map_l[0]] -= 1.0 - q;
        d[self.map_l[1]] -= q;
        self.add_diff(k, &d);
    }
}

/// Same element: two triangles about the diagonal, Duffy-mapped so the
/// kernel singularity cancels against (s − t)².
fn same_element(acc: &mut PairAccumulator) {
    let (x, w) = gl(16);
    let nodes = &acc.grid.nodes;
    let (a, h) = (nodes[acc.ek], nodes[acc.ek + 1] - nodes[acc.ek]);
    for (p, wp) in x.iter().zip(w) {
        for (q, wq) in x.iter().zip(w) {
            // s = a + hp, t = a + hp(1 − q), both triangles equal by symmetry
            let gap = h * p * q;
            let s = a + h * p;
            let t = a + h * p * (1.0 - q);
            let k = acc.grid.kernel(s, t, gap) * 2.0 * wp * wq * h * h * p;
            let r = p * q;
            acc.add_diff(k, &[-r, r, 0.0, 0.0]);
        }
    }
}

/// Adjacent elements: Duffy map at the shared vertex c, splitting the
/// rectangle along its diagonal.
fn adjacent_elements(acc: &mut PairAccumulator) {
    let (x, w) = gl(16);
    let nodes = &acc.grid.nodes;
    let c = nodes[acc.el];
    let h1 = c - nodes[acc.ek];
    let h2 = nodes[acc.el + 1] - c;
    for (p, wp) in x.iter().zip(w) {
        for (q, wq) in x.iter().zip(w) {
            let jac = wp * wq * h1 * h2 * p;
            // u = c − s ∈ [0, h1], v = t − c ∈ [0, h2]
            for (u, v) in [(h1 * p, h2 * p * q), (h1 * p * q, h2 * p)] {
                acc.add(1.0 - u / h1, v / h2, u + v, jac);
            }
        }
    }
}

/// Tensor Gauss rule of order n over local rectangle [p0,p1]×[q0,q1].
fn separated_rect(acc: &mut PairAccumulator, n: usize, p0: f64, p1: f64, q0: f64, q1: f64) {
    let (x, w) = gl(n);
    let nodes = &acc.grid.nodes;
    let hs = nodes[acc.ek + 1] - nodes[acc.ek];
    let ht = nodes[acc.el + 1] - nodes[acc.el];
    let base = nodes[acc.el] - nodes[acc.ek];
    for (a, wa) in x.iter().zip(w) {
        let p = p0 + (p1 - p0) * a;
        for (b, wb) in x.iter().zip(w) {
            let q = q0 + (q1 - q0) * b;
            let gap = (base + ht * q - hs * p).abs();
            acc.add(p, q, gap, wa * wb * (p1 - p0) * (q1 - q0) * hs * ht);
        }
    }
}

/// Separated elements: tensor Gauss rules on rectangles subdivided until
/// each is at least its own size away from the diagonal. Returns an error
/// estimate from a lower-order rule.
fn separated_elements(acc: &mut PairAccumulator) -> f64 {
    let nodes = &acc.grid.nodes;
    let hs = nodes[acc.ek + 1] - nodes[acc.ek];
    let ht = nodes[acc.el + 1] - nodes[acc.el];
    let base = nodes[acc.el] - nodes[acc.ek];
    let mut stack = vec![(0.0, 1.0, 0.0, 1.0, 0u32)];
    let mut err = 0.0;
    while let Some((p0, p1, q0, q1, depth)) = stack.pop() {
        let gap = base + ht * q0 - hs * p1;
        let (ls, lt) = (hs * (p1 - p0), ht * (q1 - q0));
        if gap < ls.max(lt) && depth < 60 {
            if ls >= lt {
                let m = 0.5 * (p0 + p1);
                stack.push((p0, m, q0, q1, depth + 1));
                stack.push((m, p1, q0, q1, depth + 1));
            } else {
                let m = 0.5 * (q0 + q1);
                stack.push((p0, p1, q0, m, depth + 1));
                stack.push((p0, p1, m, q1, depth + 1));
            }
            continue;
        }
        let mut low = PairAccumulator::new(acc.grid, acc.ek, acc.el);
        separated_rect(&mut low, 6, p0, p1, q0, q1);
        let before = acc.m;
        separated_rect(acc, 8, p0, p1, q0, q1);
        let mut e = 0.0f64;
        for a in 0..4 {
            for b in a..4 {
                e = e.max(((acc.m[a][b] - before[a][b]) - low.m[a][b]).abs());
            }
        }
        err += e;
    }
    err
}

/// Local matrix of one element pair, with its error estimate.
fn element_pair(grid: &Grid, ek: usize, el: usize) -> (PairAccumulator<'_>, f64) {
    let mut acc = PairAccumulator::new(grid, ek, el);
    let err = if ek == el {
        same_element(&mut acc);
        0.0
    } else if el == ek + 1 {
        adjacent_elements(&mut acc);
        0.0
    } else {
        separated_elements(&mut acc)
    };
    (acc, err)
}

/// ∫_E (h_Ω + ρ_N) φ_a φ_b w ds for the two hats of element e, in the
/// local coordinate of the element.
fn element_mass(grid: &Grid, e: usize, rho: f64) -> [[f64; 2]; 2] {
    let nodes = &grid.nodes;
    let (a, h) = (nodes[e], nodes[e + 1] - nodes[e]);
    let mut out = [[0.0; 2]; 2];
    for (i, j) in [(0, 0), (0, 1), (1, 1)] {
        let mut f = |p: f64| {
            let hv = [1.0 - p, p];
            let prod = hv[i] * hv[j];
            let hval = grid.h_local(e, p);
            // rounding can put a quadrature node on ∂Ω, where the integrand is a null set
            if prod == 0.0 || !hval.is_finite() {
                return 0.0;
            }
            (hval + rho) * prod * grid.weight(a + h * p) * h
        };
        let scale = h * grid.weight(nodes[e + 1]).max(grid.weight(a)).max(1e-300);
        let r = adaptive(&mut f, &[0.0, 1.0], 1e-14 * scale, 1e-13, 2000);
        out[i][j] = r.value;
        out[j][i] = r.value;
    }
    out
}

/// ∫ φ_i w ds for every node.
fn hat_integrals(grid: &Grid) -> Vec<f64> {
    let (x, w) = gl(8);
    let nodes = &grid.nodes;
    let mut m = vec![0.0; grid.n()];
    for e in 0..grid.n() - 1 {
        let h = nodes[e + 1] - nodes[e];
        for (p, wp) in x.iter().zip(w) {
            let s = nodes[e] + h * p;
            let g = grid.weight(s) * wp * h;
            m[e] += g * (1.0 - p);
            m[e + 1] += g * p;
        }
    }
    m
}

/// E_L(φ_i, φ_j) over interior hats.
pub fn assemble_with(grid: &Grid, cfg: &QuadConfig, mass: MassTreatment) -> Result<DMatrix<f64>> {
    cfg.validate()?;
    let ne = grid.n() - 1;
    let first = grid.interior().start;
    let nu = grid.unknowns();
    let c = constants_for(grid.dim())?;
    let tol = cfg.abs_tol;
    // per first element, the contributions of all pairs (ek, el ≥ ek), reduced in a fixed order
    let rows: Vec<Result<Vec<(usize, usize, f64)>>> = (0..ne)
        .into_par_iter()
        .map(|ek| {
            let mut out = Vec::new();
            for el in ek..ne {
                let (acc, err) = element_pair(grid, ek, el);
                if err > tol {
                    return Err(LoglapError::NotConverged(format!("element pair ({ek}, {el}): error estimate {err:e}")));
                }
                let factor = if ek == el { 1.0 } else { 2.0 };
                for a in 0..acc.size {
                    for b in a..acc.size {
                        let (ga, gb) = (acc.global(a), acc.global(b));
                        out.push((ga, gb, factor * acc.m[a][b]));
                    }
                }
            }
            Ok(out)
        })
        .collect();
    let mut mat = DMatrix::<f64>::zeros(nu, nu);
    let interior = grid.interior();
    for r in rows {
        for (ga, gb, v) in r? {
            if !interior.contains(&ga) || !interior.contains(&gb) {
                continue;
            }
            let (i, j) = (ga - first, gb - first);
            mat[(i, j)] += v;
            if i != j {
                mat[(j, i)] += v;
            }
        }
    }
    for e in 0..ne {
        let m = element_mass(grid, e, c.rho_n);
        for a in 0..2 {
            for b in 0..2 {
                let (ga, gb) = (e + a, e + b);
                if !interior.contains(&ga) || !interior.contains(&gb) {
                    continue;
                }
                let (i, j) = (ga - first, gb - first);
                match mass {
                    MassTreatment::Consistent => mat[(i, j)] += m[a][b],
                    MassTreatment::Lumped => mat[(i, i)] += m[a][b],
                }
            }
        }
    }
    // exact symmetry
    for i in 0..nu {
        for j in 0..i {
            mat[(i, j)] = mat[(j, i)];
        }
    }
    Ok(mat)
}

/// Default treatment of the zero-order term.
pub const DEFAULT_MASS: MassTreatment = MassTreatment::Consistent;

/// [`assemble_with`] using [`DEFAULT_MASS`].
pub fn assemble(grid: &Grid, cfg: &QuadConfig) -> Result<DMatrix<f64>> {
    assemble_with(grid, cfg, DEFAULT_MASS)
}

/// ∫ f φ_i over Ω for the interior hats; radial grids sample f along e_1.
pub fn load_vector(grid: &Grid, f: &ScalarField) -> Result<Vec<f64>> {
    if f.dim() != grid.dim() {
        return invalid("right-hand side dimension does not match the grid");
    }
    let (x, w) = gl(8);
    let nodes = &grid.nodes;
    let mut full = vec![0.0; grid.n()];
    let point = |s: f64| -> Vec<f64> {
        match &grid.domain {
            Domain::Ball { center, .. } => {
                let mut p = center.clone();
                p[0] += s;
                p
            }
            _ => vec![s],
        }
    };
    for e in 0..grid.n() - 1 {
        let h = nodes[e + 1] - nodes[e];
        for (p, wp) in x.iter().zip(w) {
            let s = nodes[e] + h * p;
            let g = f.value(&point(s)) * grid.weight(s) * wp * h;
            full[e] += g * (1.0 - p);
            full[e + 1] += g * p;
        }
    }
    Ok(grid.interior().map(|k| full[k]).collect())
}

/// Assembled operator with a cached factorisation.
#[derive(Debug, Clone)]
pub struct Discretization {
    pub grid: Grid,
    pub matrix: DMatrix<f64>,
    /// ∫φ_i over interior hats.
    pub lumped_mass: Vec<f64>,
    chol: Option<nalgebra::Cholesky<f64, nalgebra::Dyn>>,
    lu: Option<nalgebra::LU<f64, nalgebra::Dyn, nalgebra::Dyn>>,
}

impl Discretization {
    pub fn new(grid: &Grid, cfg: &QuadConfig) -> Result<Self> {
        Discretization::with_mass(grid, cfg, DEFAULT_MASS)
    }

    pub fn with_mass(grid: &Grid, cfg: &QuadConfig, mass: MassTreatment) -> Result<Self> {
        let matrix = assemble_with(grid, cfg, mass)?;
        let m = hat_integrals(grid);
        let lumped_mass = grid.interior().map(|k| m[k]).collect();
        let chol = nalgebra::Cholesky::new(matrix.clone());
        let lu = if chol.is_none() { Some(matrix.clone().lu()) } else { None };
        Ok(Discretization { grid: grid.clone(), matrix, lumped_mass, chol, lu })
    }

    pub fn is_positive_definite(&self) -> bool {
        self.chol.is_some()
    }

    /// Solves A u = b.
    pub fn solve(&self, b: &[f64]) -> Result<Vec<f64>> {
        let rhs = DVector::from_column_slice(b);
        let sol = if let Some(c) = &self.chol {
            c.solve(&rhs)
        } else {
            let lu = self.lu.as_ref().expect("LU computed when Cholesky fails");
            lu.solve(&rhs).ok_or_else(|| LoglapError::SingularMatrix("E_L matrix is singular".into()))?
        };
        if sol.iter().any(|v| !v.is_finite()) {
            return Err(LoglapError::SingularMatrix("solution is not finite".into()));
        }
        Ok(sol.as_slice().to_vec())
    }

    /// u·A·v, bit-symmetric in (u, v).
    pub fn form(&self, u: &[f64], v: &[f64]) -> f64 {
        let n = u.len();
        let mut s = 0.0;
        for i in 0..n {
            s += self.matrix[(i, i)] * (u[i] * v[i]);
            for j in i + 1..n {
                s += self.matrix[(i, j)] * (u[i] * v[j] + u[j] * v[i]);
            }
        }
        s
    }

    /// J₀(v) = ½E_L(v,v) + (μ/4) Σ m_i v_i²(ln v_i² − 1), with 0·ln 0 = 0.
    pub fn sublinear_energy(&self, v: &[f64], mu: f64) -> f64 {
        let mut nl = 0.0;
        for (vi, mi) in v.iter().zip(&self.lumped_mass) {
            let q = vi * vi;
            if q > 0.0 {
                nl += mi * q * (q.ln() - 1.0);
            }
        }
        0.5 * self.form(v, v) + 0.25 * mu * nl
    }

    fn sublinear_gradient(&self, v: &[f64], mu: f64) -> Vec<f64> {
        let av = &self.matrix * DVector::from_column_slice(v);
        v.iter()
            .zip(&self.lumped_mass)
            .zip(av.iter())
            .map(|((vi, mi), a)| a + if *vi == 0.0 { 0.0 } else { mu * mi * vi * vi.abs().ln() })
            .collect()
    }
}

fn check_grid(domain: &Domain, grid: &Grid) -> Result<()> {
    if !grid.same_shape(domain) {
        return invalid("grid was built for a different domain");
    }
    Ok(())
}

/// Galerkin solution of L_Δu = f in Ω, u = 0 outside.
pub fn solve_dirichlet(domain: &Domain, f: &ScalarField, grid: &Grid, cfg: &QuadConfig) -> Result<GridFunction> {
    check_grid(domain, grid)?;
    let disc = Discretization::new(grid, cfg)?;
    solve_with(&disc, f)
}

/// [`solve_dirichlet`] with a prebuilt discretisation.
pub fn solve_with(disc: &Discretization, f: &ScalarField) -> Result<GridFunction> {
    let b = load_vector(&disc.grid, f)?;
    GridFunction::new(&disc.grid, disc.solve(&b)?)
}

fn check_threshold(domain: &Domain) -> Result<()> {
    if !domain.satisfies_mp_volume() {
        let c = constants_for(domain.dim())?;
        return invalid(format!(
            "|Ω| = {} is not below the maximum-principle threshold {}",
            domain.measure(),
            c.mp_volume_threshold
        ));
    }
    Ok(())
}

fn constant_one(dim: usize, reach: f64) -> ScalarField {
    ScalarField::new(dim, reach, DiniClass::Smooth, "one", |_| 1.0)
}

/// Solution of L_Δτ = 1 in Ω, τ = 0 outside.
pub fn torsion(domain: &Domain, grid: &Grid, cfg: &QuadConfig) -> Result<GridFunction> {
    check_threshold(domain)?;
    solve_dirichlet(domain, &constant_one(domain.dim(), domain.bounding_radius() + 1.0), grid, cfg)
}

/// Least-squares fit of ln|u| against ln ℓ(δ) near ∂Ω.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitReport {
    pub alpha_hat: f64,
    pub constant_hat: f64,
    pub window: (f64, f64),
    pub r_squared: f64,
    pub samples: usize,
}

/// Minimum number of nodes an exponent fit accepts.
pub const MIN_FIT_SAMPLES: usize = 8;

/// Fits |u(x)| ≈ C ℓ^α(δ(x)) over nodes with δ(x) in the window.
pub fn exponent_fit(u: &GridFunction, window: (f64, f64)) -> Result<FitReport> {
    let (lo, hi) = window;
    if !(lo > 0.0 && lo < hi && hi <= 0.1) {
        return invalid("fit window must satisfy 0 < δ_min < δ_max ≤ 0.1");
    }
    let vals = u.nodal_values();
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for k in u.grid.interior() {
        let d = u.grid.boundary_distance(k);
        if d >= lo && d <= hi && vals[k] != 0.0 {
            xs.push(ell_raw(d).ln());
            ys.push(vals[k].abs().ln());
        }
    }
    if xs.len() < MIN_FIT_SAMPLES {
        return invalid(format!("only {} nodes in the fit window, need {MIN_FIT_SAMPLES}", xs.len()));
    }
    let fit = line_fit(&xs, &ys)?;
    Ok(FitReport { alpha_hat: fit.slope, constant_hat: fit.intercept.exp(), window, r_squared: fit.r_squared, samples: xs.len() })
}

/// Minimum nodal value of the solution for a nonnegative right-hand side.
pub fn max_principle_check(domain: &Domain, f: &ScalarField, grid: &Grid, cfg: &QuadConfig) -> Result<f64> {
    check_threshold(domain)?;
    check_grid(domain, grid)?;
    let disc = Discretization::new(grid, cfg)?;
    max_principle_check_with(&disc, f)
}

/// [`max_principle_check`] with a prebuilt discretisation.
pub fn max_principle_check_with(disc: &Discretization, f: &ScalarField) -> Result<f64> {
    let b = load_vector(&disc.grid, f)?;
    if b.iter().any(|v| *v < 0.0) {
        return invalid("right-hand side is not nonnegative");
    }
    let u = disc.solve(&b)?;
    Ok(u.iter().copied().fold(f64::INFINITY, f64::min))
}

/// u(x0 − tη)/ℓ^{1/2}(t) along the inward normal at the boundary point x0.
pub fn hopf_ratio(u: &GridFunction, x0: &[f64], ts: &[f64]) -> Result<Vec<f64>> {
    let g = &u.grid;
    if x0.len() != g.dim() {
        return invalid("boundary point has the wrong dimension");
    }
    if ts.windows(2).any(|w| !(w[1] < w[0])) || ts.iter().any(|t| !(*t > 0.0)) {
        return invalid("ts must be positive and decreasing");
    }
    let inward: Box<dyn Fn(f64) -> Vec<f64>> = match (&g.domain, g.shape) {
        (Domain::Interval { a, b }, _) => {
            let (a, b) = (*a, *b);
            if x0[0] == a {
                Box::new(move |t| vec![a + t])
            } else if x0[0] == b {
                Box::new(move |t| vec![b - t])
            } else {
                return invalid("x0 must be an endpoint of the interval");
            }
        }
        (Domain::Ball { center, radius }, _) => {
            let d = dist(x0, center);
            if ((d - radius) / radius).abs() > 1e-12 {
                return invalid("x0 must lie on the sphere bounding the ball");
            }
            let (c, p) = (center.clone(), x0.to_vec());
            Box::new(move |t| c.iter().zip(&p).map(|(ci, pi)| pi - t * (pi - ci) / d).collect())
        }
        _ => unreachable!("grids exist on intervals and balls only"),
    };
    let mut out = Vec::with_capacity(ts.len());
    for &t in ts {
        let p = inward(t);
        if !g.domain.contains(&p) {
            return invalid(format!("x0 − tη leaves the domain at t = {t}"));
        }
        out.push(u.value(&p) / ell_raw(t).sqrt());
    }
    Ok(out)
}

/// Result of the sublinear minimisation.
#[derive(Debug, Clone)]
pub struct SublinearSolution {
    pub u: GridFunction,
    pub energy: f64,
    pub iterations: usize,
}

/// Iteration cap for [`solve_sublinear`].
pub const SUBLINEAR_MAX_ITER: usize = 20_000;

/// Minimises J₀ by gradient descent preconditioned with the E_L matrix,
/// with Armijo backtracking, from the given seed (default: torsion scaled
/// to maximum 1/2).
pub fn solve_sublinear(domain: &Domain, mu: f64, grid: &Grid, cfg: &QuadConfig, seed: Option<&GridFunction>) -> Result<SublinearSolution> {
    check_grid(domain, grid)?;
    let disc = Discretization::new(grid, cfg)?;
    solve_sublinear_with(&disc, mu, seed)
}

/// [`solve_sublinear`] with a prebuilt discretisation.
pub fn solve_sublinear_with(disc: &Discretization, mu: f64, seed: Option<&GridFunction>) -> Result<SublinearSolution> {
    if !(mu > 0.0 && mu.is_finite()) {
        return invalid("μ must be positive");
    }
    if !matches!(disc.grid.domain, Domain::Interval { .. } | Domain::Ball { .. }) {
        return invalid("sublinear solves need an interval or a ball");
    }
    let mut v = match seed {
        Some(s) => {
            if s.coefficients.len() != disc.grid.unknowns() {
                return invalid("seed lives on a different grid");
            }
            s.coefficients.clone()
        }
        None => {
            let t = solve_with(disc, &constant_one(disc.grid.dim(), disc.grid.domain.bounding_radius() + 1.0))?;
            let m = t.coefficients.iter().fold(0.0f64, |a, b| a.max(b.abs()));
            t.coefficients.iter().map(|c| 0.5 * c / m).collect()
        }
    };
    let mut e = disc.sublinear_energy(&v, mu);
    for it in 0..SUBLINEAR_MAX_ITER {
        let g = disc.sublinear_gradient(&v, mu);
        let d: Vec<f64> = disc.solve(&g)?.iter().map(|x| -x).collect();
        let slope: f64 = g.iter().zip(&d).map(|(a, b)| a * b).sum();
        let mut t = 1.0;
        let (mut vn, mut en);
        loop {
            vn = v.iter().zip(&d).map(|(a, b)| a + t * b).collect::<Vec<f64>>();
            en = disc.sublinear_energy(&vn, mu);
            if en <= e + 1e-4 * t * slope || t < 1e-12 {
                break;
            }
            t *= 0.5;
        }
        let step = d.iter().fold(0.0f64, |a, b| a.max((t * b).abs()));
        let scale = vn.iter().fold(1.0f64, |a, b| a.max(b.abs()));
        let decrease = e - en;
        v = vn;
        let done = decrease.abs() <= 1e-10 * en.abs().max(1e-300) && step <= 1e-10 * scale;
        e = en;
        if done {
            return Ok(SublinearSolution { u: GridFunction::new(&disc.grid, v)?, energy: e, iterations: it + 1 });
        }
    }
    Err(LoglapError::NotConverged(format!("sublinear descent after {SUBLINEAR_MAX_ITER} iterations")))
}

/// Points θ(t) = ((1−t)u² + tv²)^{1/2}, coefficientwise.
pub fn convexity_path(u: &[f64], v: &[f64], t: f64) -> Vec<f64> {
    u.iter().zip(v).map(|(a, b)| ((1.0 - t) * a * a + t * b * b).sqrt()).collect()
}

/// Minimum centred second difference of t ↦ J₀(θ(t)) over `t_samples`
/// equally spaced points of [0, 1].
pub fn path_convexity_check(u: &GridFunction, v: &GridFunction, mu: f64, t_samples: usize, cfg: &QuadConfig) -> Result<f64> {
    let disc = Discretization::new(&u.grid, cfg)?;
    path_convexity_check_with(&disc, u, v, mu, t_samples)
}

/// [`path_convexity_check`] with a prebuilt discretisation.
pub fn path_convexity_check_with(disc: &Discretization, u: &GridFunction, v: &GridFunction, mu: f64, t_samples: usize) -> Result<f64> {
    if t_samples < 3 {
        return invalid("need at least 3 samples");
    }
    if u.coefficients.len() != v.coefficients.len() || u.coefficients.len() != disc.grid.unknowns() {
        return invalid("paths need grid functions on the same grid");
    }
    if u.coefficients.iter().chain(&v.coefficients).any(|c| *c < 0.0) {
        return invalid("path endpoints must be nonnegative");
    }
    if u.coefficients.iter().zip(&v.coefficients).all(|(a, b)| a * a == b * b) {
        return invalid("u² and v² coincide");
    }
    let js: Vec<f64> = (0..t_samples)
        .map(|k| {
            let t = k as f64 / (t_samples - 1) as f64;
            disc.sublinear_energy(&convexity_path(&u.coefficients, &v.coefficients, t), mu)
        })
        .collect();
    Ok(js.windows(3).map(|w| w[0] - 2.0 * w[1] + w[2]).fold(f64::INFINITY, f64::min))
}

fn same_grid(u: &GridFunction, v: &GridFunction) -> Result<()> {
    if u.grid.nodes != v.grid.nodes || !u.grid.same_shape(&v.grid.domain) {
        return Err(LoglapError::Unsupported("bilinear forms of grid functions on different grids".into()));
    }
    Ok(())
}

/// E_L(u, v) for grid functions on a common grid.
pub fn bilinear_el(u: &GridFunction, v: &GridFunction, cfg: &QuadConfig) -> Result<f64> {
    same_grid(u, v)?;
    let a = assemble_with(&u.grid, cfg, MassTreatment::Consistent)?;
    let disc_form = |x: &[f64], y: &[f64]| {
        let n = x.len();
        let mut s = 0.0;
        for i in 0..n {
            s += a[(i, i)] * (x[i] * y[i]);
            for j in i + 1..n {
                s += a[(i, j)] * (x[i] * y[j] + x[j] * y[i]);
            }
        }
        s
    };
    Ok(disc_form(&u.coefficients, &v.coefficients))
}

/// c_N ∬_{|x−y|≥1} u(x)v(y)/|x−y| dx dy for 1D grid functions, element by
/// element with the inner integral in closed form.
fn far_product_1d(u: &GridFunction, v: &GridFunction) -> f64 {
    let nodes = &u.grid.nodes;
    let (fu, fv) = (u.nodal_values(), v.nodal_values());
    let ne = nodes.len() - 1;
    let (x16, w16) = gl(16);
    let mut total = 0.0;
    for k in 0..ne {
        for l in 0..ne {
            let (s0, s1) = (nodes[k], nodes[k + 1]);
            let (t0, t1) = (nodes[l], nodes[l + 1]);
            if fu[k] == 0.0 && fu[k + 1] == 0.0 || fv[l] == 0.0 && fv[l + 1] == 0.0 {
                continue;
            }
            // v(y) = α + βy on [t0, t1]
            let beta = (fv[l + 1] - fv[l]) / (t1 - t0);
            let alpha = fv[l] - beta * t0;
            // ∫_{p}^{q} (α + βy)/|y − x| dy for y on one side of x
            let inner = |x: f64, p: f64, q: f64| -> f64 {
                if q <= p {
                    return 0.0;
                }
                let vx = alpha + beta * x;
                if p >= x {
                    vx * ((q - x) / (p - x)).ln() + beta * (q - p)
                } else {
                    vx * ((x - p) / (x - q)).ln() - beta * (q - p)
                }
            };
            let mut pts = vec![s0, s1];
            for c in [t0 - 1.0, t1 - 1.0, t0 + 1.0, t1 + 1.0] {
                if c > s0 && c < s1 {
                    pts.push(c);
                }
            }
            pts.sort_by(f64::total_cmp);
            for wdw in pts.windows(2) {
                let h = wdw[1] - wdw[0];
                for (p, wp) in x16.iter().zip(w16) {
                    let x = wdw[0] + h * p;
                    let ux = fu[k] + (fu[k + 1] - fu[k]) * (x - s0) / (s1 - s0);
                    let val = inner(x, t0.max(x + 1.0), t1) + inner(x, t0, t1.min(x - 1.0));
                    total += wp * h * ux * val;
                }
            }
        }
    }
    total
}

/// E(u, v) = (c_N/2) ∬_{|x−y|<1} (u(x)−u(y))(v(x)−v(y))/|x−y|^N, obtained
/// from E_L by adding back the far interaction and the ρ_N term.
pub fn bilinear_e(u: &GridFunction, v: &GridFunction, cfg: &QuadConfig) -> Result<f64> {
    same_grid(u, v)?;
    let el = bilinear_el(u, v, cfg)?;
    let g = &u.grid;
    let c = constants_for(g.dim())?;
    let (x8, w8) = gl(8);
    let (fu, fv) = (u.nodal_values(), v.nodal_values());
    let mut uv = 0.0;
    for e in 0..g.n() - 1 {
        let h = g.nodes[e + 1] - g.nodes[e];
        for (p, wp) in x8.iter().zip(w8) {
            let s = g.nodes[e] + h * p;
            let a = fu[e] * (1.0 - p) + fu[e + 1] * p;
            let b = fv[e] * (1.0 - p) + fv[e + 1] * p;
            uv += wp * h * g.weight(s) * a * b;
        }
    }
    let far = match g.shape {
        Shape::Line { a, b } if b - a > 1.0 => {
            let x = far_product_1d(u, v);
            let y = far_product_1d(v, u);
            c.c_n * 0.5 * (x + y)
        }
        Shape::Line { .. } => 0.0,
        Shape::Radial { radius, .. } if 2.0 * radius <= 1.0 => 0.0,
        Shape::Radial { .. } => return Err(LoglapError::Unsupported("far interaction on balls of diameter above 1".into())),
    };
    Ok(el + far - c.rho_n * uv)
}
