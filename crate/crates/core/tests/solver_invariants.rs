use loglap::field::ScalarField;
use loglap::geometry::Domain;
use loglap::quadrature::QuadConfig;
use loglap::solver::{bilinear_el, load_vector, solve_with, torsion, Discretization, Grading, Grid, GridFunction};

fn interval(a: f64, b: f64) -> Domain {
    Domain::Interval { a, b }
}

/// ∫uv for two P1 functions on the same line grid, by Simpson's rule per
/// element, which is exact for the quadratic product.
fn l2_product(u: &GridFunction, v: &GridFunction) -> f64 {
    let x = u.grid().nodes();
    let (a, b) = (u.nodal_values(), v.nodal_values());
    (0..x.len() - 1)
        .map(|e| {
            let h = x[e + 1] - x[e];
            let (um, vm) = (0.5 * (a[e] + a[e + 1]), 0.5 * (b[e] + b[e + 1]));
            h / 6.0 * (a[e] * b[e] + 4.0 * um * vm + a[e + 1] * b[e + 1])
        })
        .sum()
}

#[test]
fn galerkin_orthogonality() {
    let d = interval(0.0, 0.5);
    let g = Grid::new(&d, 33, Grading::boundary_graded()).unwrap();
    let disc = Discretization::new(&g, &QuadConfig::for_dim(1)).unwrap();
    let f = ScalarField::bump(&[0.2], 0.15, 2.0);
    let u = solve_with(&disc, &f).unwrap();
    let b = load_vector(&g, &f).unwrap();
    let m = g.unknowns();
    for i in 0..m {
        let mut e = vec![0.0; m];
        e[i] = 1.0;
        let r = disc.form(u.coefficients(), &e) - b[i];
        assert!(r.abs() <= 1e-10 * (1.0 + b[i].abs()), "row {i}: {r:e}");
    }
}

// For U(y) = u(y/λ) the form with symbol 2 ln|ξ| obeys
// E_L(U, V) = λ^N (E_L(u, v) − 2 ln λ ∫uv). The truncated form does not.
#[test]
fn energy_form_scaling() {
    let cfg = QuadConfig::for_dim(1);
    let g = Grid::new(&interval(0.0, 0.5), 17, Grading::Uniform).unwrap();
    let u = GridFunction::interpolate(&g, |x| (x * (0.5 - x)).sqrt()).unwrap();
    let v = GridFunction::interpolate(&g, |x| x * (0.5 - x) * (1.0 + x)).unwrap();
    let base = bilinear_el(&u, &v, &cfg).unwrap();
    let uv = l2_product(&u, &v);
    for lambda in [0.5, 2.0, 3.0] {
        let nodes: Vec<f64> = g.nodes().iter().map(|x| lambda * x).collect();
        let gl = Grid::from_nodes(&interval(0.0, 0.5 * lambda), nodes).unwrap();
        let ul = GridFunction::new(&gl, u.coefficients().to_vec()).unwrap();
        let vl = GridFunction::new(&gl, v.coefficients().to_vec()).unwrap();
        let lhs = bilinear_el(&ul, &vl, &cfg).unwrap();
        let rhs = lambda * (base - 2.0 * lambda.ln() * uv);
        assert!((lhs - rhs).abs() <= 1e-7 * (1.0 + rhs.abs()), "lambda {lambda}: {lhs} vs {rhs}");
    }
}

// Torsion nodal values on the boundary window change by less than 2%
// between n and 2n − 1 nodes.
#[test]
fn torsion_refinement_drift() {
    let d = interval(0.0, 0.5);
    let cfg = QuadConfig::for_dim(1);
    let coarse = torsion(&d, &Grid::new(&d, 65, Grading::boundary_graded()).unwrap(), &cfg).unwrap();
    let fine = torsion(&d, &Grid::new(&d, 129, Grading::boundary_graded()).unwrap(), &cfg).unwrap();
    let g = coarse.grid();
    let mut worst = 0.0f64;
    for (k, x) in g.nodes().iter().enumerate() {
        let delta = g.boundary_distance(k);
        if (1e-6..=1e-2).contains(&delta) {
            let (a, b) = (coarse.value(&[*x]), fine.value(&[*x]));
            worst = worst.max((a - b).abs() / b);
        }
    }
    assert!(worst < 0.02, "drift {worst}");
}
