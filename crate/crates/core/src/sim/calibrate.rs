use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::generate::{discretize_ordinal, gen_cluster_latent};
use super::SizeConfig;
use crate::design::OrdinalDistribution;
use crate::effects::{delta_from_theta, mu_from_theta, theta_from_delta};
use crate::error::{Error, Result};
use crate::rank::{rank_icc_estimate, theta_hat_independent, Arm};

const MIN_PROBE_OBSERVATIONS: usize = 10_000;
const BATCHES: usize = 50;

/// Probe settings for [`calibrate_empirical_effect`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CalibrationConfig {
    /// Latent-scale log odds ratio.
    pub delta: f64,
    pub rho_latent: f64,
    /// Category count; `None` keeps the continuous latent outcome.
    #[serde(default)]
    pub levels: Option<usize>,
    /// Clusters per arm.
    pub probe_clusters: usize,
    pub probe_k: u64,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Calibration {
    pub gamma_hat: f64,
    /// Batch-means standard error of `gamma_hat`.
    pub gamma_stderr: f64,
    pub theta_hat: f64,
    pub delta_hat: f64,
    /// Mean of the two arms' category proportions; `None` for continuous
    /// outcomes, whose ties vanish.
    pub pi_bar: Option<OrdinalDistribution>,
}

fn category_shares(values: &[f64], levels: usize) -> Vec<f64> {
    let mut counts = vec![0usize; levels];
    for &v in values {
        counts[v as usize - 1] += 1;
    }
    counts
        .into_iter()
        .map(|c| c as f64 / values.len() as f64)
        .collect()
}

/// Empirical rank ICC, θ, log odds ratio and mean category proportions of
/// the latent-normal generator, from one large probe sample.
pub fn calibrate_empirical_effect(config: &CalibrationConfig) -> Result<Calibration> {
    let total = 2 * config.probe_clusters * config.probe_k as usize;
    if total < MIN_PROBE_OBSERVATIONS {
        return Err(Error::InvalidInput(format!(
            "the probe must hold at least {MIN_PROBE_OBSERVATIONS} observations, got {total}"
        )));
    }
    if config.probe_clusters < BATCHES || config.probe_k < 2 {
        return Err(Error::InvalidInput(format!(
            "the probe needs at least {BATCHES} clusters per arm of size at least 2"
        )));
    }
    let mu = mu_from_theta(theta_from_delta(config.delta))?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let latent = gen_cluster_latent(
        mu,
        config.rho_latent,
        config.probe_clusters,
        &SizeConfig::Fixed(config.probe_k),
        &mut rng,
    )?;
    let data = match config.levels {
        Some(l) => discretize_ordinal(&latent, l)?,
        None => latent,
    };

    let gamma_hat = rank_icc_estimate(&data)?;
    // cluster ids run 0..m in control, m..2m in experiment
    let m = config.probe_clusters as u64;
    let mut batch = Vec::with_capacity(BATCHES);
    for b in 0..BATCHES as u64 {
        let part = data.filter(|r| (r.cluster % m) % BATCHES as u64 == b)?;
        batch.push(rank_icc_estimate(&part)?);
    }
    let mean = batch.iter().sum::<f64>() / BATCHES as f64;
    let var = batch.iter().map(|g| (g - mean).powi(2)).sum::<f64>() / (BATCHES - 1) as f64;

    let theta_hat = theta_hat_independent(&data)?.theta_hat;
    let delta_hat = delta_from_theta(theta_hat)?;
    let pi_bar = match config.levels {
        Some(l) => {
            let c = category_shares(&data.arm_values(Arm::Control), l);
            let e = category_shares(&data.arm_values(Arm::Experiment), l);
            let mean: Vec<f64> = c.iter().zip(&e).map(|(a, b)| (a + b) / 2.0).collect();
            Some(OrdinalDistribution::normalized(mean)?)
        }
        None => None,
    };
    Ok(Calibration {
        gamma_hat,
        gamma_stderr: (var / BATCHES as f64).sqrt(),
        theta_hat,
        delta_hat,
        pi_bar,
    })
}
