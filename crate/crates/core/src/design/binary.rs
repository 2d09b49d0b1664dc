//! Per-arm sample sizes for binary outcomes with equal allocation.

use super::{
    ceil_count, check_open_unit, n_individual_ordinal, DesignSpec, OrdinalDistribution, Sided,
};
use crate::effects::EffectSize;
use crate::error::{Error, Result};
use crate::stats::phi_inv;

fn check_props(p_t: f64, p_c: f64) -> Result<()> {
    check_open_unit("p_t", p_t)?;
    check_open_unit("p_c", p_c)?;
    if p_t == p_c {
        return Err(Error::Infeasible(
            "equal proportions need an infinite sample size".into(),
        ));
    }
    Ok(())
}

/// `(z_{1-α*} + z_{1-β})² (p_t q_t + p_c q_c) / (p_t - p_c)²`.
pub fn n_binary_unpooled(alpha: f64, sided: Sided, power: f64, p_t: f64, p_c: f64) -> Result<u64> {
    check_props(p_t, p_c)?;
    check_open_unit("power", power)?;
    let z = sided.z_alpha(alpha)? + phi_inv(power);
    let diff = p_t - p_c;
    Ok(ceil_count(
        z * z * (p_t * (1.0 - p_t) + p_c * (1.0 - p_c)) / (diff * diff),
    ))
}

/// `(z_{1-α*} √(2 p̄ q̄) + z_{1-β} √(p_t q_t + p_c q_c))² / (p_t - p_c)²`.
pub fn n_binary_pooled(alpha: f64, sided: Sided, power: f64, p_t: f64, p_c: f64) -> Result<u64> {
    check_props(p_t, p_c)?;
    check_open_unit("power", power)?;
    let za = sided.z_alpha(alpha)?;
    let zb = phi_inv(power);
    let p_bar = 0.5 * (p_t + p_c);
    let root = za * (2.0 * p_bar * (1.0 - p_bar)).sqrt()
        + zb * (p_t * (1.0 - p_t) + p_c * (1.0 - p_c)).sqrt();
    let diff = p_t - p_c;
    Ok(ceil_count(root * root / (diff * diff)))
}

/// The proportional-odds formula with two categories: log odds ratio of the
/// two proportions and mean proportions `(p̄, 1 - p̄)`.
pub fn n_binary_whitehead(alpha: f64, sided: Sided, power: f64, p_t: f64, p_c: f64) -> Result<u64> {
    check_props(p_t, p_c)?;
    let logit = |p: f64| (p / (1.0 - p)).ln();
    let spec = DesignSpec::new(
        alpha,
        sided,
        power,
        1.0,
        EffectSize::LogOdds(logit(p_t) - logit(p_c)),
    )?;
    let p_bar = 0.5 * (p_t + p_c);
    let dist = OrdinalDistribution::new(vec![p_bar, 1.0 - p_bar])?;
    Ok(n_individual_ordinal(&spec, &dist)?.n_experiment)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn textbook_values() {
        // 0.3 vs 0.5 at 5% two-sided, 80% power: 91 unpooled, 93 pooled
        assert_eq!(
            n_binary_unpooled(0.05, Sided::Two, 0.8, 0.5, 0.3).unwrap(),
            91
        );
        assert_eq!(
            n_binary_pooled(0.05, Sided::Two, 0.8, 0.5, 0.3).unwrap(),
            93
        );
    }

    #[test]
    fn symmetric_in_arms() {
        for f in [n_binary_unpooled, n_binary_pooled, n_binary_whitehead] {
            let a = f(0.05, Sided::Two, 0.85, 0.48, 0.31).unwrap();
            let b = f(0.05, Sided::Two, 0.85, 0.31, 0.48).unwrap();
            assert_eq!(a, b);
        }
    }

    #[test]
    fn blows_up_as_difference_vanishes() {
        let mut prev = 0;
        for eps in [0.1, 0.05, 0.01, 0.001, 0.0001] {
            let n = n_binary_pooled(0.05, Sided::Two, 0.9, 0.3 + eps, 0.3).unwrap();
            assert!(n > prev);
            prev = n;
        }
        assert!(prev > 1_000_000);
        assert!(n_binary_unpooled(0.05, Sided::Two, 0.9, 0.3, 0.3)
            .unwrap_err()
            .is_infeasible());
    }

    #[test]
    fn three_formulas_are_close() {
        let u = n_binary_unpooled(0.05, Sided::Two, 0.85, 0.48, 0.31).unwrap() as f64;
        let p = n_binary_pooled(0.05, Sided::Two, 0.85, 0.48, 0.31).unwrap() as f64;
        let w = n_binary_whitehead(0.05, Sided::Two, 0.85, 0.48, 0.31).unwrap() as f64;
        for x in [u, p] {
            assert!((x / w - 1.0).abs() < 0.03, "{x} vs {w}");
        }
    }
}
