//! Symbol-side reference values for L_Δ of the unit Gaussian e^{−|x|²/2}.
//!
//! With û(ξ) = (2π)^{N/2} e^{−|ξ|²/2} and symbol 2 ln|ξ|:
//!   N = 1: L u(x) = (4/√(2π)) ∫_0^∞ ln ξ e^{−ξ²/2} cos(xξ) dξ
//!   N = 2: L u(x) = ∫_0^∞ 2 ln ρ e^{−ρ²/2} J₀(ρ|x|) ρ dρ
//! Both are integrated after ξ = e^t with the trapezoidal rule, which
//! converges geometrically for integrands decaying doubly exponentially in t.

#![allow(dead_code)]

use std::f64::consts::PI;

const T_MIN: f64 = -40.0;
const T_MAX: f64 = 5.0;
const STEPS: usize = 45_000;

fn trapezoid(f: impl Fn(f64) -> f64) -> f64 {
    let h = (T_MAX - T_MIN) / STEPS as f64;
    let mut s = 0.5 * (f(T_MIN) + f(T_MAX));
    for k in 1..STEPS {
        s += f(T_MIN + k as f64 * h);
    }
    s * h
}

/// J₀(z) = (1/π)∫_0^π cos(z sin θ) dθ by the periodic trapezoidal rule.
pub fn bessel_j0(z: f64) -> f64 {
    let m = 256;
    let mut s = 0.0;
    for k in 0..m {
        let th = PI * k as f64 / m as f64;
        s += (z * th.sin()).cos();
    }
    s / m as f64
}

pub fn gaussian_loglap_1d(x: f64) -> f64 {
    let g = |t: f64| {
        let xi = t.exp();
        t * (-0.5 * xi * xi).exp() * (x * xi).cos() * xi
    };
    4.0 / (2.0 * PI).sqrt() * trapezoid(g)
}

pub fn gaussian_loglap_2d(r: f64) -> f64 {
    let g = |t: f64| {
        let rho = t.exp();
        2.0 * t * (-0.5 * rho * rho).exp() * bessel_j0(rho * r) * rho * rho
    };
    trapezoid(g)
}
