mod common;

use loglap::field::ScalarField;
use loglap::geometry::Domain;
use loglap::operator::eval_loglap;
use loglap::quadrature::QuadConfig;
use loglap::solver::{exponent_fit, solve_dirichlet, torsion, Grading, Grid, GridFunction, GridFunctionRecord};
use loglap::special::digamma;
use proptest::prelude::*;
use std::f64::consts::LN_2;

// At the origin the symbol integral is the mean of 2 ln|Z| for a standard
// normal Z in R^N, which is ln 2 + Ψ(N/2).
#[test]
fn gaussian_at_origin_matches_chi_square_mean() {
    for n in 1..=3 {
        let g = ScalarField::gaussian(n);
        let v = eval_loglap(&g, &vec![0.0; n], &QuadConfig::for_dim(n)).unwrap();
        let exact = LN_2 + digamma(0.5 * n as f64).unwrap();
        assert!((v.total - exact).abs() <= 1e-6, "N={n}: {} vs {exact}", v.total);
    }
}

#[test]
fn trapezoid_oracle_agrees_with_closed_form_at_origin() {
    let exact1 = LN_2 + digamma(0.5).unwrap();
    let exact2 = LN_2 + digamma(1.0).unwrap();
    assert!((common::gaussian_loglap_1d(0.0) - exact1).abs() < 1e-12);
    assert!((common::gaussian_loglap_2d(0.0) - exact2).abs() < 1e-12);
}

#[test]
fn gaussian_far_from_origin_matches_symbol_oracle() {
    let g = ScalarField::gaussian(1);
    let cfg = QuadConfig::for_dim(1);
    for x in [5.0, 8.0] {
        let v = eval_loglap(&g, &[x], &cfg).unwrap().total;
        assert!((v - common::gaussian_loglap_1d(x)).abs() < 1e-5, "x={x}");
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]
    #[test]
    fn gaussian_1d_matches_oracle_anywhere(x in -4.0f64..4.0) {
        let v = eval_loglap(&ScalarField::gaussian(1), &[x], &QuadConfig::for_dim(1)).unwrap().total;
        prop_assert!((v - common::gaussian_loglap_1d(x)).abs() < 1e-5);
    }
}

#[test]
fn record_round_trip_preserves_fit() {
    let d = Domain::Interval { a: 0.0, b: 0.5 };
    let g = Grid::new(&d, 65, Grading::boundary_graded()).unwrap();
    let t = torsion(&d, &g, &QuadConfig::for_dim(1)).unwrap();
    let text = serde_json::to_string(&t.record()).unwrap();
    let rec: GridFunctionRecord = serde_json::from_str(&text).unwrap();
    let back = GridFunction::from_record(&d, &rec).unwrap();
    let a = exponent_fit(&t, (1e-6, 1e-2)).unwrap();
    let b = exponent_fit(&back, (1e-6, 1e-2)).unwrap();
    assert!((a.alpha_hat - b.alpha_hat).abs() < 1e-6);
    assert_eq!(a.samples, b.samples);
}

#[test]
fn solution_scales_linearly_with_load() {
    let d = Domain::Ball { center: vec![0.0, 0.0], radius: 0.3 };
    let g = Grid::new(&d, 33, Grading::boundary_graded()).unwrap();
    let cfg = QuadConfig::for_dim(2);
    let f = ScalarField::bump(&[0.0, 0.0], 0.2, 1.0);
    let u1 = solve_dirichlet(&d, &f, &g, &cfg).unwrap();
    let u3 = solve_dirichlet(&d, &f.scaled(3.0), &g, &cfg).unwrap();
    for (a, b) in u1.coefficients().iter().zip(u3.coefficients()) {
        assert!((3.0 * a - b).abs() <= 1e-12 * b.abs().max(1e-300) + 1e-15);
    }
}

#[test]
fn smaller_interval_has_smaller_torsion() {
    let cfg = QuadConfig::for_dim(1);
    let big = Domain::Interval { a: 0.0, b: 0.5 };
    let small = Domain::Interval { a: 0.0, b: 0.25 };
    let tb = torsion(&big, &Grid::new(&big, 65, Grading::Uniform).unwrap(), &cfg).unwrap();
    let ts = torsion(&small, &Grid::new(&small, 65, Grading::Uniform).unwrap(), &cfg).unwrap();
    let max = |u: &GridFunction| u.coefficients().iter().copied().fold(0.0f64, f64::max);
    assert!(max(&ts) < max(&tb));
    // domain monotonicity pointwise at a shared interior point
    assert!(ts.value(&[0.125]) < tb.value(&[0.125]));
}
