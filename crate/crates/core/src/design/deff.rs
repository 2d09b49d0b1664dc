//! Design effects of the probabilistic-index estimator under cluster
//! randomization.
//!
//! With latent correlation ρ inside clusters of size k and `m0`, `m1`
//! clusters in the control and experiment arms, write `n_a = m_a k`. Counting
//! the pairs `(U_is, U_jt)` of Mann-Whitney kernels by how their four
//! observations share clusters gives
//!
//! ```text
//! n0 n1 var(θ̂) = θ(1-θ)
//!              + (n0 + n1 - 2k) Q(θ, 1/2)
//!              + 2(k-1) Q(θ, (1+ρ)/2)
//!              + (k-1)(n0 + n1 - 2k) Q(θ, ρ/2)
//!              + (k-1)² Q(θ, ρ)
//! ```
//!
//! and, for independent observations with the same `n0`, `n1`,
//! `n0 n1 var(θ̂) = θ(1-θ) + (n0 + n1 - 2) Q(θ, 1/2)`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::stats::orthant_q;

/// `1 + γ(k - 1)`.
pub fn deff_approx(gamma: f64, k: u64) -> f64 {
    1.0 + gamma * (k.max(1) - 1) as f64
}

/// The clustered variance of θ̂ split by pair type, each part divided by the
/// independent-design variance. The design effect is their sum.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DeffTerms {
    /// `θ(1-θ) + (n0 + n1 - 2k) Q(θ, 1/2)`: pairs whose clusters are unrelated.
    pub unrelated: f64,
    /// `2(k-1) Q(θ, (1+ρ)/2)`: one shared observation, partners in one cluster.
    pub shared_observation: f64,
    /// `(k-1)(n0 + n1 - 2k) Q(θ, ρ/2)`: one arm's pair shares a cluster.
    pub one_arm_clustered: f64,
    /// `(k-1)² Q(θ, ρ)`: both arms' pairs share a cluster.
    pub both_arms_clustered: f64,
}

impl DeffTerms {
    pub fn total(&self) -> f64 {
        self.unrelated + self.shared_observation + self.one_arm_clustered + self.both_arms_clustered
    }
}

fn check_inputs(theta: f64, rho: f64, k: u64, m0: u64, m1: u64) -> Result<()> {
    if !(theta > 0.0 && theta < 1.0) {
        return Err(Error::domain("theta", theta, "must lie in (0, 1)"));
    }
    if !(0.0..=1.0).contains(&rho) {
        return Err(Error::domain("rho", rho, "must lie in [0, 1]"));
    }
    if k == 0 || m0 == 0 || m1 == 0 {
        return Err(Error::InvalidInput(
            "cluster size and cluster counts must be positive".into(),
        ));
    }
    Ok(())
}

/// `n0 n1 var(θ̂)` by pair type, plus the independent-design counterpart.
fn scaled_terms(theta: f64, rho: f64, k: u64, m0: u64, m1: u64) -> Result<(DeffTerms, f64)> {
    check_inputs(theta, rho, k, m0, m1)?;
    let kf = k as f64;
    let n_sum = (m0 + m1) as f64 * kf;
    let within = kf - 1.0;
    let across = n_sum - 2.0 * kf;
    let base = theta * (1.0 - theta);
    let q_half = orthant_q(theta, 0.5)?;
    let mut terms = DeffTerms {
        unrelated: base + across * q_half,
        shared_observation: 0.0,
        one_arm_clustered: 0.0,
        both_arms_clustered: 0.0,
    };
    if k > 1 {
        terms.shared_observation = 2.0 * within * orthant_q(theta, (1.0 + rho) / 2.0)?;
        terms.one_arm_clustered = within * across * orthant_q(theta, rho / 2.0)?;
        terms.both_arms_clustered = within * within * orthant_q(theta, rho)?;
    }
    let independent = base + (n_sum - 2.0) * q_half;
    Ok((terms, independent))
}

/// `var(θ̂)` for `m0`, `m1` clusters of size `k` with latent ICC `rho`.
pub fn var_theta_hat_clustered(theta: f64, rho: f64, k: u64, m0: u64, m1: u64) -> Result<f64> {
    let (terms, _) = scaled_terms(theta, rho, k, m0, m1)?;
    Ok(terms.total() / ((m0 * k) as f64 * (m1 * k) as f64))
}

/// `var(θ̂)` for `n0`, `n1` independent observations.
pub fn var_theta_hat_independent(theta: f64, n0: u64, n1: u64) -> Result<f64> {
    let (_, independent) = scaled_terms(theta, 0.0, 1, n0, n1)?;
    Ok(independent / (n0 as f64 * n1 as f64))
}

/// The exact design effect split into its pair-type contributions.
pub fn deff_exact_terms(theta: f64, rho: f64, k: u64, m0: u64, m1: u64) -> Result<DeffTerms> {
    let (t, independent) = scaled_terms(theta, rho, k, m0, m1)?;
    if independent <= 0.0 {
        return Err(Error::InvalidInput(
            "independent-design variance is zero".into(),
        ));
    }
    Ok(DeffTerms {
        unrelated: t.unrelated / independent,
        shared_observation: t.shared_observation / independent,
        one_arm_clustered: t.one_arm_clustered / independent,
        both_arms_clustered: t.both_arms_clustered / independent,
    })
}

/// `var(θ̂ | clustered) / var(θ̂ | independent)` at equal arm sizes.
pub fn deff_exact(theta: f64, rho: f64, k: u64, m0: u64, m1: u64) -> Result<f64> {
    Ok(deff_exact_terms(theta, rho, k, m0, m1)?.total())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::effects::{mu_from_theta, theta_from_delta};
    use crate::stats::latent_to_rank_icc;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;

    #[test]
    fn approx_values() {
        assert_eq!(deff_approx(0.0, 30), 1.0);
        assert_eq!(deff_approx(0.3, 1), 1.0);
        assert!((deff_approx(0.07, 45) - 4.08).abs() < 1e-12);
    }

    #[test]
    fn k_one_is_exactly_one() {
        for (t, r, m) in [(0.5, 0.3, 10), (0.65, 0.9, 3), (0.2, 0.0, 100)] {
            assert_eq!(deff_exact(t, r, 1, m, m + 2).unwrap(), 1.0);
        }
    }

    #[test]
    fn rho_zero_is_one() {
        let d = deff_exact(0.6, 0.0, 7, 20, 20).unwrap();
        assert!((d - 1.0).abs() < 1e-12);
    }

    #[test]
    fn null_large_m_approaches_rank_design_effect() {
        for rho in [0.1, 0.3, 0.5, 0.9] {
            let exact = deff_exact(0.5, rho, 5, 10_000, 10_000).unwrap();
            let approx = deff_approx(latent_to_rank_icc(rho).unwrap(), 5);
            assert!((exact / approx - 1.0).abs() < 0.005, "rho={rho}");
        }
    }

    #[test]
    fn domain_errors() {
        assert!(deff_exact(0.0, 0.3, 5, 10, 10).is_err());
        assert!(deff_exact(0.5, 1.1, 5, 10, 10).is_err());
        assert!(deff_exact(0.5, 0.3, 5, 0, 10).is_err());
    }

    #[test]
    fn independent_variance_null_matches_wilcoxon() {
        // under the null with no ties var(θ̂) = (n0 + n1 + 1) / (12 n0 n1)
        let v = var_theta_hat_independent(0.5, 30, 40).unwrap();
        assert!((v - 71.0 / (12.0 * 1200.0)).abs() < 1e-15);
    }

    /// Brute-force Monte-Carlo variance of θ̂ under the latent normal model.
    fn mc_var(theta: f64, rho: f64, k: usize, m: usize, reps: usize, seed: u64) -> (f64, f64) {
        let mu = mu_from_theta(theta).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let draw_arm = |shift: f64, rng: &mut ChaCha8Rng| -> Vec<f64> {
            let mut v = Vec::with_capacity(m * k);
            for _ in 0..m {
                let u: f64 = rng.sample::<f64, _>(StandardNormal) * rho.sqrt();
                for _ in 0..k {
                    let e: f64 = rng.sample(StandardNormal);
                    v.push(shift + u + e * (1.0 - rho).sqrt());
                }
            }
            v
        };
        let mut est = Vec::with_capacity(reps);
        for _ in 0..reps {
            let x = draw_arm(0.0, &mut rng);
            let y = draw_arm(mu, &mut rng);
            let mut s = 0.0;
            for xi in &x {
                for yj in &y {
                    if xi < yj {
                        s += 1.0;
                    }
                }
            }
            est.push(s / (x.len() * y.len()) as f64);
        }
        let mean = est.iter().sum::<f64>() / reps as f64;
        let var = est.iter().map(|e| (e - mean).powi(2)).sum::<f64>() / (reps - 1) as f64;
        // standard error of a sample variance, normal approximation
        (var, var * (2.0 / (reps - 1) as f64).sqrt())
    }

    #[test]
    fn clustered_variance_matches_monte_carlo_with_few_clusters() {
        // small m makes the (k-1)² Q(θ, ρ) term a large share of the total
        let theta = theta_from_delta(1.0);
        let (v, se) = mc_var(theta, 0.8, 10, 2, 20_000, 3);
        let exact = var_theta_hat_clustered(theta, 0.8, 10, 2, 2).unwrap();
        assert!((v - exact).abs() < 3.0 * se, "mc={v} exact={exact} se={se}");
        let terms = deff_exact_terms(theta, 0.8, 10, 2, 2).unwrap();
        let without = (terms.total() - terms.both_arms_clustered) / terms.total() * exact;
        assert!((v - without).abs() > 3.0 * se);
    }

    #[test]
    fn clustered_variance_matches_monte_carlo_moderate() {
        let (v, se) = mc_var(0.65, 0.3, 5, 12, 6_000, 4);
        let exact = var_theta_hat_clustered(0.65, 0.3, 5, 12, 12).unwrap();
        assert!((v - exact).abs() < 3.0 * se, "mc={v} exact={exact} se={se}");
    }
}
