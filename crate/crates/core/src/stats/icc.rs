use std::f64::consts::PI;

use crate::error::{Error, Result};

/// Rank ICC implied by a latent normal ICC: `γ = 6 asin(ρ/2) / π`.
pub fn latent_to_rank_icc(rho_latent: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&rho_latent) {
        return Err(Error::domain(
            "rho_latent",
            rho_latent,
            "must lie in [0, 1]",
        ));
    }
    Ok((6.0 * (0.5 * rho_latent).asin() / PI).min(1.0))
}

/// Inverse of [`latent_to_rank_icc`]: `ρ = 2 sin(πγ/6)`.
pub fn rank_to_latent_icc(rank_icc: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&rank_icc) {
        return Err(Error::domain("rank_icc", rank_icc, "must lie in [0, 1]"));
    }
    Ok((2.0 * (PI * rank_icc / 6.0).sin()).min(1.0))
}
