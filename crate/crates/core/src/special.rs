//! Gamma and digamma functions, the dimension constants of the operator,
//! and the logarithmic modulus of continuity `ℓ`.

use crate::error::{invalid, Result};
use crate::field::ScalarField;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

/// Euler–Mascheroni constant.
pub const EULER_GAMMA: f64 = 0.577_215_664_901_532_860_606_512_090_082;

const LANCZOS_G: f64 = 7.0;
const LANCZOS_COEF: [f64; 9] = [
    0.999_999_999_999_809_93,
    676.520_368_121_885_1,
    -1_259.139_216_722_402_8,
    771.323_428_777_653_13,
    -176.615_029_162_140_59,
    12.507_343_278_686_905,
    -0.138_571_095_265_720_12,
    9.984_369_578_019_571_6e-6,
    1.505_632_735_149_311_6e-7,
];

/// Γ(x) for x > 0 (Lanczos approximation with reflection below 1/2).
pub fn gamma_fn(x: f64) -> Result<f64> {
    if !(x > 0.0) || !x.is_finite() {
        return invalid(format!("gamma_fn requires a finite x > 0, got {x}"));
    }
    Ok(gamma_pos(x))
}

fn gamma_pos(x: f64) -> f64 {
    if x < 0.5 {
        return PI / ((PI * x).sin() * gamma_pos(1.0 - x));
    }
    // Exact factorials for small integers keep Γ(n) bit-clean.
    if x == x.floor() && x <= 20.0 {
        return (1..x as u64).fold(1.0, |acc, k| acc * k as f64);
    }
    let z = x - 1.0;
    let t = z + LANCZOS_G + 0.5;
    let mut s = LANCZOS_COEF[0];
    for (k, c) in LANCZOS_COEF.iter().enumerate().skip(1) {
        s += c / (z + k as f64);
    }
    (2.0 * PI).sqrt() * t.powf(z + 0.5) * (-t).exp() * s
}

/// Ψ(x) = Γ'(x)/Γ(x) for x > 0.
///
/// Shifts the argument above 10 with the recurrence and then sums the
/// asymptotic series, which gives about 15 correct digits.
pub fn digamma(x: f64) -> Result<f64> {
    if !(x > 0.0) || !x.is_finite() {
        return invalid(format!("digamma requires a finite x > 0, got {x}"));
    }
    let mut acc = 0.0;
    let mut y = x;
    while y < 10.0 {
        acc -= 1.0 / y;
        y += 1.0;
    }
    let inv2 = 1.0 / (y * y);
    // Bernoulli terms B_{2k}/(2k), k = 1..7
    let series = inv2
        * (1.0 / 12.0
            - inv2
                * (1.0 / 120.0
                    - inv2
                        * (1.0 / 252.0
                            - inv2 * (1.0 / 240.0 - inv2 * (1.0 / 132.0 - inv2 * (691.0 / 32760.0 - inv2 / 12.0))))));
    Ok(acc + y.ln() - 0.5 / y - series)
}

/// Constants attached to the operator in dimension `n`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DimensionConstants {
    pub n: usize,
    /// Kernel constant π^{-N/2} Γ(N/2).
    pub c_n: f64,
    /// Zero-order constant 2 ln 2 + Ψ(N/2) − γ.
    pub rho_n: f64,
    /// Surface measure of the unit sphere.
    pub sigma_n: f64,
    pub gamma: f64,
    /// Volume below which the weak maximum principle holds.
    pub mp_volume_threshold: f64,
}

impl DimensionConstants {
    /// Lebesgue measure of the unit ball.
    pub fn unit_ball_volume(&self) -> f64 {
        self.sigma_n / self.n as f64
    }

    /// Radius of the ball whose volume equals the maximum principle threshold.
    pub fn mp_radius(&self) -> f64 {
        (self.mp_volume_threshold / self.unit_ball_volume()).powf(1.0 / self.n as f64)
    }
}

pub fn constants_for(n: usize) -> Result<DimensionConstants> {
    if n < 1 {
        return invalid("dimension must be at least 1");
    }
    let half = n as f64 / 2.0;
    let g = gamma_pos(half);
    let psi = digamma(half)?;
    let c_n = PI.powf(-half) * g;
    let sigma_n = 2.0 * PI.powf(half) / g;
    let ball = sigma_n / n as f64;
    Ok(DimensionConstants {
        n,
        c_n,
        rho_n: 2.0 * std::f64::consts::LN_2 + psi - EULER_GAMMA,
        sigma_n,
        gamma: EULER_GAMMA,
        mp_volume_threshold: 2f64.powi(n as i32) * (half * (psi - EULER_GAMMA)).exp() * ball,
    })
}

/// The modulus ℓ(r) = 1/|ln min(r, clamp)|.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LogModulus {
    pub clamp: f64,
}

impl Default for LogModulus {
    fn default() -> Self {
        LogModulus { clamp: 0.1 }
    }
}

impl LogModulus {
    pub fn new(clamp: f64) -> Result<Self> {
        if !(clamp > 0.0 && clamp < 1.0) {
            return invalid(format!("clamp must lie in (0, 1), got {clamp}"));
        }
        Ok(LogModulus { clamp })
    }

    pub fn eval(&self, r: f64) -> Result<f64> {
        if r < 0.0 || r.is_nan() {
            return invalid(format!("ℓ is defined for r ≥ 0, got {r}"));
        }
        Ok(self.eval_unchecked(r))
    }

    /// ℓ without the sign check; callers guarantee r ≥ 0.
    pub(crate) fn eval_unchecked(&self, r: f64) -> f64 {
        if r == 0.0 {
            0.0
        } else {
            1.0 / r.min(self.clamp).ln().abs()
        }
    }
}

/// ℓ(r) with the standard clamp 0.1; ℓ(0) = 0.
pub fn ell(r: f64) -> Result<f64> {
    LogModulus::default().eval(r)
}

pub(crate) fn ell_raw(r: f64) -> f64 {
    LogModulus::default().eval_unchecked(r)
}

/// Smallest ratio ℓ(λr)/(ℓ(λ)ℓ(r)) over the samples.
pub fn ell_semihomogeneity_constant(samples: &[(f64, f64)]) -> Result<f64> {
    if samples.is_empty() {
        return invalid("empty sample set");
    }
    let mut best = f64::INFINITY;
    for &(lambda, r) in samples {
        if !(lambda > 0.0 && r > 0.0) {
            return invalid(format!("samples must be positive, got ({lambda}, {r})"));
        }
        let ratio = ell_raw(lambda * r) / (ell_raw(lambda) * ell_raw(r));
        best = best.min(ratio);
    }
    Ok(best)
}

/// Lower bound for the α-log-Hölder seminorm from a list of point pairs.
pub fn log_holder_seminorm(field: &ScalarField, alpha: f64, pairs: &[(Vec<f64>, Vec<f64>)]) -> Result<f64> {
    if !(alpha > 0.0) {
        return invalid("alpha must be positive");
    }
    let mut best: f64 = 0.0;
    for (x, y) in pairs {
        if x.len() != field.dim() || y.len() != field.dim() {
            return invalid("pair dimension does not match the field");
        }
        let d = crate::geometry::dist(x, y);
        if d == 0.0 {
            return invalid("coincident pair");
        }
        let ratio = (field.value(x) - field.value(y)).abs() / ell_raw(d).powf(alpha);
        best = best.max(ratio);
    }
    Ok(best)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn gamma_reference_values() {
        assert_relative_eq!(gamma_fn(0.5).unwrap(), PI.sqrt(), max_relative = 1e-13);
        assert_eq!(gamma_fn(1.0).unwrap(), 1.0);
        assert_relative_eq!(gamma_fn(2.5).unwrap(), 1.329_340_388_179_137, max_relative = 1e-13);
        assert_relative_eq!(gamma_fn(0.1).unwrap(), 9.513_507_698_668_732, max_relative = 1e-12);
        assert!(gamma_fn(0.0).is_err());
        assert!(gamma_fn(-1.5).is_err());
    }

    #[test]
    fn gamma_matches_log_series() {
        // ln Γ(x) for large x via Stirling with 1/(12x) − 1/(360x³) + 1/(1260x⁵)
        for &x in &[12.5, 17.25, 30.0] {
            let stirling = (x - 0.5) * f64::ln(x) - x + 0.5 * (2.0 * PI).ln() + 1.0 / (12.0 * x)
                - 1.0 / (360.0 * x.powi(3))
                + 1.0 / (1260.0 * x.powi(5));
            assert_relative_eq!(gamma_fn(x).unwrap().ln(), stirling, max_relative = 1e-12);
        }
    }

    #[test]
    fn digamma_reference_values() {
        assert_relative_eq!(digamma(1.0).unwrap(), -EULER_GAMMA, max_relative = 1e-13);
        let half = -EULER_GAMMA - 2.0 * std::f64::consts::LN_2;
        assert_relative_eq!(digamma(0.5).unwrap(), half, max_relative = 1e-13);
        assert_relative_eq!(digamma(0.5).unwrap(), -1.963_510_026_021_423_5, max_relative = 1e-13);
        assert_relative_eq!(digamma(2.0).unwrap(), 1.0 - EULER_GAMMA, max_relative = 1e-13);
        assert!(digamma(0.0).is_err());
    }

    #[test]
    fn digamma_series_oracle() {
        // Ψ(x) = −γ + Σ_{k≥0} (1/(k+1) − 1/(k+x)); tail summed with Euler–Maclaurin.
        for &x in &[0.3, 1.7, 4.2] {
            let m = 200_000usize;
            let mut s = 0.0;
            for k in 0..m {
                s += 1.0 / (k as f64 + 1.0) - 1.0 / (k as f64 + x);
            }
            let mf = m as f64;
            // Σ_{k≥m} (1/(k+1) − 1/(k+x)) ≈ (x−1)/(m+...) integral part
            let tail = ((mf + x - 0.5) / (mf + 0.5)).ln();
            let oracle = -EULER_GAMMA + s + tail;
            assert_relative_eq!(digamma(x).unwrap(), oracle, epsilon = 1e-10);
        }
    }

    #[test]
    fn constants_low_dimensions() {
        let c1 = constants_for(1).unwrap();
        assert_relative_eq!(c1.c_n, 1.0, max_relative = 1e-14);
        assert_relative_eq!(c1.rho_n, -2.0 * EULER_GAMMA, epsilon = 1e-13);
        assert_relative_eq!(c1.rho_n, -1.154_431_329_803_065_7, epsilon = 1e-12);
        assert_relative_eq!(c1.sigma_n, 2.0, max_relative = 1e-14);
        assert_relative_eq!(c1.mp_volume_threshold, 1.122_918_967_133_770_6, epsilon = 1e-12);
        assert!((c1.mp_radius() - 0.561_459).abs() < 5e-7);

        let c2 = constants_for(2).unwrap();
        assert_relative_eq!(c2.c_n, 1.0 / PI, max_relative = 1e-14);
        assert_relative_eq!(c2.rho_n, 0.231_863_031_316_824_9, epsilon = 1e-12);
        assert_relative_eq!(c2.mp_volume_threshold, 4.0 * PI * (-2.0 * EULER_GAMMA).exp(), max_relative = 1e-13);
        assert!(constants_for(0).is_err());
    }

    #[test]
    fn constants_structural_identities() {
        let mut prev = f64::NEG_INFINITY;
        for n in 1..=10 {
            let c = constants_for(n).unwrap();
            assert!(c.c_n > 0.0);
            assert_relative_eq!(c.c_n * c.sigma_n, 2.0, max_relative = 1e-13);
            let ball = PI.powf(n as f64 / 2.0) / gamma_fn(n as f64 / 2.0 + 1.0).unwrap();
            assert_relative_eq!(c.sigma_n, n as f64 * ball, max_relative = 1e-13);
            assert!(c.rho_n > prev);
            prev = c.rho_n;
        }
    }

    #[test]
    fn ell_examples() {
        assert_relative_eq!(ell((-4.0f64).exp()).unwrap(), 0.25, max_relative = 1e-15);
        assert_relative_eq!(ell(0.5).unwrap(), 1.0 / 10f64.ln(), max_relative = 1e-15);
        assert_eq!(ell(0.1).unwrap(), ell(0.5).unwrap());
        assert_eq!(ell(0.0).unwrap(), 0.0);
        assert!(ell(-1e-3).is_err());
        assert!(LogModulus::new(1.5).is_err());
    }

    #[test]
    fn semihomogeneity_examples() {
        let v = ell_semihomogeneity_constant(&[(0.1, 0.1)]).unwrap();
        assert_relative_eq!(v, 10f64.ln() / 2.0, max_relative = 1e-14);
        let v = ell_semihomogeneity_constant(&[(1.0, 0.3)]).unwrap();
        assert_relative_eq!(v, 10f64.ln(), max_relative = 1e-14);
        let mut grid = Vec::new();
        for a in 1..=6 {
            for b in 1..=6 {
                grid.push((10f64.powi(-a), 10f64.powi(-b)));
            }
        }
        assert!(ell_semihomogeneity_constant(&grid).unwrap() > 0.0);
        assert!(ell_semihomogeneity_constant(&[]).is_err());
    }

    #[test]
    fn seminorm_examples() {
        let c = ScalarField::new(1, 1.0, crate::field::DiniClass::Smooth, "const", |_| 3.0);
        let pairs = vec![(vec![0.1], vec![0.2]), (vec![0.01], vec![0.5])];
        assert_eq!(log_holder_seminorm(&c, 0.5, &pairs).unwrap(), 0.0);

        let f = ScalarField::new(1, 0.1, crate::field::DiniClass::LogHolder(0.5), "sqrt-ell", |x| {
            if x[0] > 0.0 && x[0] < 0.1 {
                ell_raw(x[0]).sqrt()
            } else {
                0.0
            }
        });
        let pairs: Vec<_> = [1e-2, 1e-4, 1e-7].iter().map(|&t| (vec![t], vec![0.0])).collect();
        assert_relative_eq!(log_holder_seminorm(&f, 0.5, &pairs).unwrap(), 1.0, max_relative = 1e-14);
        assert!(log_holder_seminorm(&f, 0.5, &[(vec![0.1], vec![0.1])]).is_err());
    }
}
