use std::f64::consts::PI;

use crate::error::{Error, Result};

// Lanczos approximation, g = 7, n = 9.
const LANCZOS_G: f64 = 7.0;
const LANCZOS: [f64; 9] = [
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

fn check_positive(op: &'static str, x: f64) -> Result<()> {
    if !x.is_finite() || x <= 0.0 {
        return Err(Error::domain(op, format!("argument must be finite and > 0, got {x}")));
    }
    Ok(())
}

/// `ln Γ(x)` for `x > 0`.
pub fn log_gamma(x: f64) -> Result<f64> {
    check_positive("log_gamma", x)?;
    Ok(ln_gamma_unchecked(x))
}

pub(crate) fn ln_gamma_unchecked(x: f64) -> f64 {
    if x < 0.5 {
        // Γ(x) = Γ(x + 1) / x keeps the Lanczos sum in its accurate range
        return ln_gamma_unchecked(x + 1.0) - x.ln();
    }
    let z = x - 1.0;
    let mut sum = LANCZOS[0];
    for (i, c) in LANCZOS.iter().enumerate().skip(1) {
        sum += c / (z + i as f64);
    }
    let t = z + LANCZOS_G + 0.5;
    0.5 * (2.0 * PI).ln() + (z + 0.5) * t.ln() - t + sum.ln()
}

/// Digamma `Ψ(x) = d ln Γ(x) / dx` for `x > 0`.
pub fn digamma(x: f64) -> Result<f64> {
    check_positive("digamma", x)?;
    Ok(digamma_unchecked(x))
}

pub(crate) fn digamma_unchecked(mut x: f64) -> f64 {
    let mut acc = 0.0;
    while x < 6.0 {
        acc -= 1.0 / x;
        x += 1.0;
    }
    let inv = 1.0 / x;
    let inv2 = inv * inv;
    // asymptotic series in 1/x^2 (Bernoulli numbers)
    let series = inv2
        * (1.0 / 12.0
            - inv2
                * (1.0 / 120.0
                    - inv2
                        * (1.0 / 252.0
                            - inv2 * (1.0 / 240.0 - inv2 * (1.0 / 132.0 - inv2 * 691.0 / 32760.0)))));
    acc + x.ln() - 0.5 * inv - series
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::specfun::{integrate_halfline, QuadratureSpec};
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    #[test]
    fn log_gamma_known_values() {
        assert!(log_gamma(1.0).unwrap().abs() < 1e-14);
        assert!(log_gamma(2.0).unwrap().abs() < 1e-14);
        // ln 5! = ln 120
        assert_relative_eq!(log_gamma(6.0).unwrap(), 120f64.ln(), max_relative = 1e-13);
    }

    #[test]
    fn log_gamma_half_matches_quadrature_of_euler_integral() {
        // Γ(1/2) = ∫ t^{-1/2} e^{-t} dt, evaluated independently by quadrature
        let q = integrate_halfline(|t| (-t).exp() / t.sqrt(), &QuadratureSpec::default()).unwrap();
        assert_relative_eq!(q.value.ln(), 0.572_364_942_924_700_1, max_relative = 1e-8);
        assert_relative_eq!(log_gamma(0.5).unwrap(), 0.572_364_942_924_700_1, max_relative = 1e-13);
    }

    #[test]
    fn log_gamma_extremes_of_contract_range() {
        // Γ(x) ~ 1/x - γ for small x
        let x = 1e-3_f64;
        let expected = (1.0 / x - 0.577_215_664_901_532_9 + 0.989_055_995_327_972_6 * x
            - 0.907_479_076_080_886_3 * x * x
            + 0.981_728_086_834_400_3 * x * x * x)
            .ln();
        assert_relative_eq!(log_gamma(x).unwrap(), expected, max_relative = 1e-12);
        // Stirling with three correction terms at 1e4
        let x = 1e4_f64;
        let stirling = (x - 0.5) * x.ln() - x + 0.5 * (2.0 * PI).ln() + 1.0 / (12.0 * x)
            - 1.0 / (360.0 * x.powi(3));
        assert_relative_eq!(log_gamma(x).unwrap(), stirling, max_relative = 1e-14);
    }

    #[test]
    fn rejects_non_positive() {
        assert!(log_gamma(0.0).is_err());
        assert!(log_gamma(-1.5).is_err());
        assert!(log_gamma(f64::NAN).is_err());
        assert!(digamma(0.0).is_err());
        assert!(digamma(f64::INFINITY).is_err());
    }

    #[test]
    fn digamma_one_matches_finite_difference() {
        let h = 1e-6;
        let fd = (log_gamma(1.0 + h).unwrap() - log_gamma(1.0 - h).unwrap()) / (2.0 * h);
        assert!((fd - -0.577_215_664_9).abs() < 1e-9);
        assert!((digamma(1.0).unwrap() - -0.577_215_664_901_532_9).abs() < 1e-12);
    }

    #[test]
    fn digamma_recurrence_and_fd_at_10_5() {
        assert!((digamma(2.0).unwrap() - (digamma(1.0).unwrap() + 1.0)).abs() < 1e-13);
        let h = 1e-6;
        let fd = (log_gamma(10.5 + h).unwrap() - log_gamma(10.5 - h).unwrap()) / (2.0 * h);
        assert!((digamma(10.5).unwrap() - fd).abs() < 1e-8);
    }

    #[test]
    fn digamma_small_argument() {
        // Ψ(x) ≈ -1/x - γ + (π²/6) x
        let x = 1e-3;
        let expected = -1.0 / x - 0.577_215_664_901_532_9 + PI * PI / 6.0 * x;
        assert!((digamma(x).unwrap() - expected).abs() < 1e-5);
    }

    proptest! {
        #[test]
        fn log_gamma_recurrence(x in 0.01f64..100.0) {
            let lhs = log_gamma(x + 1.0).unwrap() - log_gamma(x).unwrap() - x.ln();
            prop_assert!(lhs.abs() < 1e-10);
        }

        #[test]
        fn digamma_is_derivative_of_log_gamma(x in 0.1f64..50.0) {
            let h = 1e-6;
            let fd = (log_gamma(x + h).unwrap() - log_gamma(x - h).unwrap()) / (2.0 * h);
            prop_assert!((digamma(x).unwrap() - fd).abs() < 1e-6);
        }
    }
}
