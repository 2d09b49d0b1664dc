use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::generate::{discretize_ordinal, gen_cluster_latent, gen_individual_logistic};
use super::{Analysis, DesignKind, Generator, PowerResult, SimulationScenario, SizeConfig};
use crate::effects::{mu_from_theta, theta_from_delta};
use crate::error::{Error, Result};
use crate::rank::{
    cluster_rank_sum_test, clustered_wilcoxon_test, wilcoxon_test_independent, TrialDataset,
};

fn replication_rng(seed: u64, index: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index as u64);
    rng
}

fn generate(s: &SimulationScenario, rng: &mut ChaCha8Rng) -> Result<TrialDataset> {
    let (m, sizes) = match s.design {
        DesignKind::Individual => {
            let n = s.n_per_arm.unwrap_or(0);
            if s.generator == Generator::LogisticShift {
                return gen_individual_logistic(s.delta, n, n, rng);
            }
            (n, SizeConfig::Fixed(1))
        }
        DesignKind::Cluster => (
            s.clusters_per_arm.unwrap_or(0),
            s.cluster_size.unwrap_or(SizeConfig::Fixed(1)),
        ),
    };
    let mu = mu_from_theta(theta_from_delta(s.delta))?;
    let latent = gen_cluster_latent(mu, s.rho_latent, m, &sizes, rng)?;
    match s.generator {
        Generator::LatentNormalOrdinal => {
            discretize_ordinal(&latent, s.ordinal_levels.unwrap_or(0))
        }
        Generator::LatentNormalLognormal | Generator::LogisticShift => latent.map_values(f64::exp),
    }
}

fn replicate(s: &SimulationScenario, index: usize) -> Result<bool> {
    let mut rng = replication_rng(s.seed, index);
    let data = generate(s, &mut rng)?;
    let test_seed = rng.next_u64();
    let result = match s.analysis {
        Analysis::Wilcoxon => wilcoxon_test_independent(&data, s.sided)?,
        Analysis::ClusteredWilcoxon => {
            clustered_wilcoxon_test(&data, s.sided, s.permutation_reps, test_seed)?
        }
        Analysis::ClusterRankSum => {
            cluster_rank_sum_test(&data, s.sided, s.permutation_reps, test_seed)?
        }
    };
    Ok(result.p_value <= s.alpha)
}

/// Rejection rate of the scenario's analysis over its replications.
pub fn estimate_power(scenario: &SimulationScenario) -> Result<PowerResult> {
    scenario.validate()?;
    let rejections = (0..scenario.replications)
        .into_par_iter()
        .map(|i| replicate(scenario, i).map(usize::from))
        .try_reduce(|| 0, |a, b| Ok(a + b))?;
    Ok(PowerResult::new(
        rejections,
        scenario.replications,
        scenario.fingerprint(),
    ))
}

/// [`estimate_power`] on a dedicated pool of `workers` threads.
pub fn estimate_power_with_workers(
    scenario: &SimulationScenario,
    workers: usize,
) -> Result<PowerResult> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| Error::InvalidInput(format!("cannot start worker pool: {e}")))?;
    pool.install(|| estimate_power(scenario))
}

/// Power of a cluster scenario when the realized cluster sizes follow
/// `actual` instead of the planned configuration, keeping the number of
/// clusters.
pub fn unequal_cluster_stress(
    base: &SimulationScenario,
    actual: SizeConfig,
) -> Result<PowerResult> {
    if base.design != DesignKind::Cluster {
        return Err(Error::InvalidInput(
            "cluster size stress applies to cluster designs".into(),
        ));
    }
    estimate_power(&SimulationScenario {
        cluster_size: Some(actual),
        ..base.clone()
    })
}
