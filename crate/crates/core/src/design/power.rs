use super::{check_open_unit, var_theta_hat_clustered, Sided};
use crate::error::{Error, Result};
use crate::stats::phi;

const MAX_CLUSTERS: u64 = 10_000_000;

/// Normal-approximation power of the clustered Wilcoxon test with
/// equal-size clusters, using the exact variance of θ̂ under the
/// alternative and under the null.
///
/// One-sided tests reject for large θ̂.
pub fn power_clustered_wilcoxon_analytic(
    theta: f64,
    rho: f64,
    k: u64,
    m0: u64,
    m1: u64,
    alpha: f64,
    sided: Sided,
) -> Result<f64> {
    let z = sided.z_alpha(alpha)?;
    let sd0 = var_theta_hat_clustered(0.5, rho, k, m0, m1)?.sqrt();
    let sd1 = var_theta_hat_clustered(theta, rho, k, m0, m1)?.sqrt();
    let shift = theta - 0.5;
    let upper = phi((shift - z * sd0) / sd1);
    Ok(match sided {
        Sided::One => upper,
        Sided::Two => upper + phi((-shift - z * sd0) / sd1),
    })
}

/// Smallest number of clusters per arm (equal arms) at which
/// [`power_clustered_wilcoxon_analytic`] reaches `power`.
pub fn clusters_for_power_analytic(
    theta: f64,
    rho: f64,
    k: u64,
    alpha: f64,
    sided: Sided,
    power: f64,
) -> Result<u64> {
    check_open_unit("power", power)?;
    let reaches = |m: u64| {
        power_clustered_wilcoxon_analytic(theta, rho, k, m, m, alpha, sided).map(|p| p >= power)
    };
    let mut hi = 1;
    while !reaches(hi)? {
        hi *= 2;
        if hi > MAX_CLUSTERS {
            return Err(Error::Infeasible(
                "the target power is not reached with any practical number of clusters".into(),
            ));
        }
    }
    let mut lo = hi / 2;
    if lo == 0 {
        return Ok(hi);
    }
    // reaches(lo) is false, reaches(hi) is true
    while hi - lo > 1 {
        let mid = lo + (hi - lo) / 2;
        if reaches(mid)? {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(hi)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::design::{n_cluster_continuous, ClusterSpec, DesignSpec};
    use crate::effects::{theta_from_delta, EffectSize};

    #[test]
    fn size_equals_level_under_null() {
        for sided in [Sided::One, Sided::Two] {
            let p = power_clustered_wilcoxon_analytic(0.5, 0.3, 5, 20, 20, 0.05, sided).unwrap();
            assert!((p - 0.05).abs() < 1e-12);
        }
    }

    #[test]
    fn monotone_in_clusters_and_effect() {
        let mut prev = 0.0;
        for m in [5, 10, 20, 40, 80] {
            let p = power_clustered_wilcoxon_analytic(0.6, 0.2, 5, m, m, 0.05, Sided::Two).unwrap();
            assert!(p > prev);
            prev = p;
        }
        let mut prev = 0.0;
        for t in [0.52, 0.55, 0.6, 0.7] {
            let p = power_clustered_wilcoxon_analytic(t, 0.2, 5, 20, 20, 0.05, Sided::Two).unwrap();
            assert!(p > prev);
            prev = p;
        }
    }

    #[test]
    fn agrees_with_closed_form_at_small_icc() {
        let theta = theta_from_delta(1.0);
        let m = clusters_for_power_analytic(theta, 1e-6, 5, 0.05, Sided::Two, 0.9).unwrap();
        let spec = DesignSpec::standard(0.9, EffectSize::LogOdds(1.0)).unwrap();
        let closed = n_cluster_continuous(&spec, &ClusterSpec::new(5, 0.0).unwrap())
            .unwrap()
            .clusters_experiment
            .unwrap();
        assert!((m as i64 - closed as i64).abs() <= 1, "{m} vs {closed}");
    }

    #[test]
    fn minimal_cluster_count() {
        let m = clusters_for_power_analytic(0.62, 0.3, 8, 0.05, Sided::Two, 0.85).unwrap();
        let at =
            |m| power_clustered_wilcoxon_analytic(0.62, 0.3, 8, m, m, 0.05, Sided::Two).unwrap();
        assert!(at(m) >= 0.85 && at(m - 1) < 0.85);
    }
}
