//! Two-sample t-test comparators.

use statrs::distribution::{ContinuousCDF, StudentsT};
use statrs::function::gamma::ln_gamma;

use super::{check_open_unit, SampleSizeResult, Sided};
use crate::error::{Error, Result};
use crate::stats::{phi, phi_inv, quad};

const MAX_PER_ARM: u64 = 100_000_000;

/// Power of the equal-variance two-sample t-test with `n_per_arm`
/// observations per arm and a mean difference of `delta_sd` standard
/// deviations, from the noncentral t distribution.
pub fn power_ttest(alpha: f64, sided: Sided, delta_sd: f64, n_per_arm: u64) -> Result<f64> {
    check_open_unit("alpha", alpha)?;
    if n_per_arm < 2 {
        return Err(Error::InvalidInput(
            "the t-test needs at least two observations per arm".into(),
        ));
    }
    let nu = 2.0 * (n_per_arm as f64 - 1.0);
    let t = StudentsT::new(0.0, 1.0, nu).map_err(|e| Error::InvalidInput(e.to_string()))?;
    let tail = match sided {
        Sided::One => alpha,
        Sided::Two => alpha / 2.0,
    };
    let tc = t.inverse_cdf(1.0 - tail);
    let lambda = delta_sd.abs() * (n_per_arm as f64 / 2.0).sqrt();

    // P(T' > tc) = E_V[Φ(λ - tc √(V/ν))] with V ~ χ²_ν
    let log_norm = 0.5 * nu * 2f64.ln() + ln_gamma(0.5 * nu);
    let density = |v: f64| ((0.5 * nu - 1.0) * v.ln() - 0.5 * v - log_norm).exp();
    let integrand = |v: f64| {
        if v <= 0.0 {
            return 0.0;
        }
        let s = tc * (v / nu).sqrt();
        let mut p = phi(lambda - s);
        if sided == Sided::Two {
            p += phi(-lambda - s);
        }
        density(v) * p
    };
    let mode = (nu - 2.0).max(0.0);
    let upper = nu + 40.0 * (2.0 * nu).sqrt() + 100.0;
    let power = quad::integrate(integrand, 0.0, mode.max(1.0), 1e-13)
        + quad::integrate(integrand, mode.max(1.0), upper, 1e-13);
    Ok(power.clamp(0.0, 1.0))
}

/// Per-arm sample size of the two-sample t-test, by direct search on the
/// noncentral-t power starting from the normal approximation.
pub fn n_ttest_individual(
    alpha: f64,
    sided: Sided,
    power: f64,
    delta_sd: f64,
) -> Result<SampleSizeResult> {
    check_open_unit("power", power)?;
    if delta_sd == 0.0 || !delta_sd.is_finite() {
        return Err(Error::Infeasible(
            "a null effect needs an infinite sample size".into(),
        ));
    }
    let z = sided.z_alpha(alpha)? + phi_inv(power);
    let approx = 2.0 * z * z / (delta_sd * delta_sd);
    let mut n = (approx.ceil() as u64).clamp(2, MAX_PER_ARM);
    let reaches = |n: u64| power_ttest(alpha, sided, delta_sd, n).map(|p| p >= power);
    while !reaches(n)? {
        n += 1;
        if n > MAX_PER_ARM {
            return Err(Error::Infeasible(
                "t-test sample size exceeds the search limit".into(),
            ));
        }
    }
    while n > 2 && reaches(n - 1)? {
        n -= 1;
    }
    Ok(SampleSizeResult {
        n_total: 2.0 * n as f64,
        n_experiment: n,
        n_control: n,
        clusters_experiment: None,
        clusters_control: None,
        cluster_size: None,
        design_effect: None,
    })
}

/// Conventional normal-approximation total for a cluster trial:
/// `n* = (z_{1-α*} + z_{1-β})² (Aσ₁² + σ₀²)(A+1) / (A(μ₁-μ₀)²) · (1 + ρ(k-1))`.
#[allow(clippy::too_many_arguments)]
pub fn n_ttest_cluster(
    alpha: f64,
    sided: Sided,
    power: f64,
    mu_diff: f64,
    sd0: f64,
    sd1: f64,
    allocation: f64,
    rho: f64,
    k: u64,
) -> Result<f64> {
    check_open_unit("power", power)?;
    if mu_diff == 0.0 || !mu_diff.is_finite() {
        return Err(Error::Infeasible(
            "a null effect needs an infinite sample size".into(),
        ));
    }
    if !(sd0 > 0.0 && sd1 > 0.0) {
        return Err(Error::InvalidInput(
            "standard deviations must be positive".into(),
        ));
    }
    if !(allocation > 0.0 && allocation.is_finite()) {
        return Err(Error::domain(
            "allocation",
            allocation,
            "must be positive and finite",
        ));
    }
    if !(0.0..=1.0).contains(&rho) {
        return Err(Error::domain("rho", rho, "must lie in [0, 1]"));
    }
    if k == 0 {
        return Err(Error::InvalidInput(
            "cluster size k must be at least 1".into(),
        ));
    }
    let z = sided.z_alpha(alpha)? + phi_inv(power);
    let a = allocation;
    Ok(
        z * z * (a * sd1 * sd1 + sd0 * sd0) * (a + 1.0) / (a * mu_diff * mu_diff)
            * (1.0 + rho * (k - 1) as f64),
    )
}
