use std::f64::consts::{FRAC_PI_2, PI};

use super::normal::phi;
use super::quad::integrate;
use crate::error::{Error, Result};

const QUAD_TOL: f64 = 1e-13;
const THETA_CLAMP: f64 = 1e-12;

/// `P(Z1 <= h, Z2 <= k)` for a standard bivariate normal pair with
/// correlation `rho`.
///
/// Uses Sheppard's representation
/// `Φ2(h, k; ρ) = Φ(h)Φ(k) + (2π)⁻¹ ∫₀^{asin ρ} exp(-(h² + k² - 2hk sin t) / (2 cos² t)) dt`,
/// whose integrand is bounded on the whole range, and evaluates the integral
/// by adaptive Gauss–Kronrod quadrature.
pub fn bivariate_norm_cdf(h: f64, k: f64, rho: f64) -> Result<f64> {
    if !(-1.0..=1.0).contains(&rho) {
        return Err(Error::domain("rho", rho, "must lie in [-1, 1]"));
    }
    if h.is_nan() || k.is_nan() {
        return Err(Error::domain("h, k", f64::NAN, "must not be NaN"));
    }
    if h == f64::NEG_INFINITY || k == f64::NEG_INFINITY {
        return Ok(0.0);
    }
    if h == f64::INFINITY {
        return Ok(phi(k));
    }
    if k == f64::INFINITY {
        return Ok(phi(h));
    }
    if rho == 1.0 {
        return Ok(phi(h.min(k)));
    }
    if rho == -1.0 {
        return Ok((phi(h) - phi(-k)).max(0.0));
    }
    let value = phi(h) * phi(k) + orthant_excess(h, k, rho);
    Ok(value.clamp(0.0, 1.0))
}

/// The correlation-induced part `Φ2(h, k; ρ) - Φ(h)Φ(k)`.
pub(crate) fn orthant_excess(h: f64, k: f64, rho: f64) -> f64 {
    if rho == 0.0 {
        return 0.0;
    }
    let hk = h * k;
    let dd = (h - k) * (h - k);
    let integrand = |t: f64| {
        let c = t.cos();
        let c2 = c * c;
        // 1 - sin t without cancellation near t = π/2
        let half = 0.5 * (FRAC_PI_2 - t);
        let one_minus_s = 2.0 * half.sin() * half.sin();
        if c2 <= f64::MIN_POSITIVE {
            return if dd == 0.0 { (-0.5 * hk).exp() } else { 0.0 };
        }
        (-(dd + 2.0 * hk * one_minus_s) / (2.0 * c2)).exp()
    };
    integrate(integrand, 0.0, rho.asin(), QUAD_TOL) / (2.0 * PI)
}

/// `Q(θ, ρ) = Φ2(Φ⁻¹(θ), Φ⁻¹(θ); ρ) - θ²`, the kernel of the clustered
/// Wilcoxon variance.
///
/// θ is clamped to `[1e-12, 1 - 1e-12]`; `Q` vanishes at both ends anyway.
pub fn orthant_q(theta: f64, rho: f64) -> Result<f64> {
    if !(theta > 0.0 && theta < 1.0) {
        return Err(Error::domain("theta", theta, "must lie in (0, 1)"));
    }
    if !(-1.0..=1.0).contains(&rho) {
        return Err(Error::domain("rho", rho, "must lie in [-1, 1]"));
    }
    let theta = theta.clamp(THETA_CLAMP, 1.0 - THETA_CLAMP);
    let z = super::normal::phi_inv(theta);
    if rho == 1.0 {
        return Ok(theta * (1.0 - theta));
    }
    Ok(orthant_excess(z, z, rho))
}

#[cfg(test)]
mod tests {
    use super::*;

    // Reference values: 30-digit quadrature of ∫_{-∞}^{h} φ(x) Φ((k - ρx)/√(1-ρ²)) dx,
    // a route independent of the Sheppard integral used above.
    const REFERENCE: [(f64, f64, f64, f64); 7] = [
        (0.5, -0.3, 0.4, 0.317_126_928_286_165_1),
        (-1.2, -0.7, 0.95, 0.113_116_155_016_865_58),
        (1.5, 2.0, -0.6, 0.910_446_640_109_645_2),
        (-2.5, 1.0, 0.99, 0.006_209_665_325_776_135),
        (0.3, 0.3, 0.999, 0.611_106_474_089_503_2),
        (-3.0, -3.0, 0.5, 8.188_966_183_219_211e-5),
        (1.0, 1.0, -0.9, 0.682_689_637_435_524_4),
    ];

    #[test]
    fn matches_reference_values() {
        for (h, k, r, want) in REFERENCE {
            let got = bivariate_norm_cdf(h, k, r).unwrap();
            assert!((got - want).abs() < 1e-12, "({h},{k},{r}): {got} vs {want}");
        }
    }

    #[test]
    fn orthant_identity() {
        assert!((bivariate_norm_cdf(0.0, 0.0, 0.0).unwrap() - 0.25).abs() < 1e-15);
        for r in [-0.7, 0.3, 0.5, 0.9, 0.999] {
            let want = 0.25 + f64::asin(r) / (2.0 * PI);
            let got = bivariate_norm_cdf(0.0, 0.0, r).unwrap();
            assert!((got - want).abs() < 1e-13, "rho={r}");
        }
    }

    #[test]
    fn perfect_correlation() {
        for (h, k) in [(0.3, -0.2), (1.0, 2.0), (-1.5, -1.5)] {
            assert_eq!(bivariate_norm_cdf(h, k, 1.0).unwrap(), phi(h.min(k)));
            let near = bivariate_norm_cdf(h, k, 1.0 - 1e-12).unwrap();
            assert!((near - phi(h.min(k))).abs() < 1e-6);
        }
        assert_eq!(bivariate_norm_cdf(0.0, 0.0, -1.0).unwrap(), 0.0);
    }

    #[test]
    fn domain_errors() {
        assert!(bivariate_norm_cdf(0.0, 0.0, 1.01).is_err());
        assert!(bivariate_norm_cdf(f64::NAN, 0.0, 0.5).is_err());
        assert!(orthant_q(0.0, 0.5).is_err());
        assert!(orthant_q(1.0, 0.5).is_err());
        assert!(orthant_q(0.5, 1.5).is_err());
    }

    #[test]
    fn q_reference_values() {
        let cases = [
            (0.65, 0.5, 0.073_928_751_462_938_72),
            (0.65, 0.3, 0.042_595_972_802_822_46),
            (0.7, 0.25, 0.031_470_892_157_954_41),
            (0.2, 0.9, 0.109_932_437_941_138_08),
        ];
        for (t, r, want) in cases {
            let got = orthant_q(t, r).unwrap();
            assert!((got - want).abs() < 1e-12, "Q({t},{r}) = {got}");
        }
        assert!((orthant_q(0.5, 0.5).unwrap() - 1.0 / 12.0).abs() < 1e-14);
        assert_eq!(orthant_q(0.37, 0.0).unwrap(), 0.0);
    }

    #[test]
    fn q_vanishes_at_extremes() {
        assert!(orthant_q(1e-15, 0.9).unwrap() < 1e-10);
        assert!(orthant_q(1.0 - 1e-15, 0.9).unwrap() < 1e-10);
    }
}
