use rand::Rng;
use rand_distr::{Open01, StandardNormal};

use super::SizeConfig;
use crate::error::{Error, Result};
use crate::rank::{Arm, Record, TrialDataset};
use crate::stats::phi_inv;

fn logistic<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    let u: f64 = rng.sample(Open01);
    (u / (1.0 - u)).ln()
}

/// Independent Logistic(0, 1) control and Logistic(δ, 1) experiment values.
pub fn gen_individual_logistic<R: Rng + ?Sized>(
    delta: f64,
    n0: usize,
    n1: usize,
    rng: &mut R,
) -> Result<TrialDataset> {
    if n0 == 0 || n1 == 0 {
        return Err(Error::InvalidInput(
            "both arms need at least one observation".into(),
        ));
    }
    let control: Vec<f64> = (0..n0).map(|_| logistic(rng)).collect();
    let experiment: Vec<f64> = (0..n1).map(|_| delta + logistic(rng)).collect();
    TrialDataset::from_arms(&control, &experiment)
}

/// Sizes of `m` clusters drawn from `config`.
pub fn cluster_sizes<R: Rng + ?Sized>(config: &SizeConfig, m: usize, rng: &mut R) -> Vec<u64> {
    match *config {
        SizeConfig::Fixed(k) => vec![k; m],
        SizeConfig::Uniform(lo, hi) => (0..m).map(|_| rng.random_range(lo..=hi)).collect(),
        SizeConfig::TwoPoint(a, b) => (0..m).map(|i| if i % 2 == 0 { a } else { b }).collect(),
    }
}

/// Random-intercept normal data: `U + R` with `U ~ N(0, ρ)` per cluster,
/// `R ~ N(0, 1 - ρ)` per member, and `μ` added in the experiment arm.
pub fn gen_cluster_latent<R: Rng + ?Sized>(
    mu: f64,
    rho: f64,
    m_per_arm: usize,
    sizes: &SizeConfig,
    rng: &mut R,
) -> Result<TrialDataset> {
    if !(0.0..1.0).contains(&rho) {
        return Err(Error::domain("rho_latent", rho, "must lie in [0, 1)"));
    }
    if m_per_arm == 0 {
        return Err(Error::InvalidInput(
            "need at least one cluster per arm".into(),
        ));
    }
    sizes.validate()?;
    let (sd_u, sd_r) = (rho.sqrt(), (1.0 - rho).sqrt());
    let mut records = Vec::new();
    let mut id = 0;
    for (arm, shift) in [(Arm::Control, 0.0), (Arm::Experiment, mu)] {
        for k in cluster_sizes(sizes, m_per_arm, rng) {
            let u = shift + sd_u * rng.sample::<f64, _>(StandardNormal);
            for _ in 0..k {
                let value = u + sd_r * rng.sample::<f64, _>(StandardNormal);
                records.push(Record {
                    arm,
                    cluster: id,
                    value,
                });
            }
            id += 1;
        }
    }
    TrialDataset::new(records)
}

/// [`gen_cluster_latent`] followed by `exp`.
pub fn gen_cluster_lognormal<R: Rng + ?Sized>(
    mu: f64,
    rho: f64,
    m_per_arm: usize,
    sizes: &SizeConfig,
    rng: &mut R,
) -> Result<TrialDataset> {
    gen_cluster_latent(mu, rho, m_per_arm, sizes, rng)?.map_values(f64::exp)
}

/// Standard-normal quantiles at `j / levels`, `j = 1..levels`.
pub fn ordinal_cutoffs(levels: usize) -> Result<Vec<f64>> {
    if levels < 2 {
        return Err(Error::InvalidInput(
            "an ordinal outcome needs at least two levels".into(),
        ));
    }
    Ok((1..levels)
        .map(|j| phi_inv(j as f64 / levels as f64))
        .collect())
}

/// Maps latent values to categories `1..=levels`.
pub fn discretize_ordinal(data: &TrialDataset, levels: usize) -> Result<TrialDataset> {
    let cuts = ordinal_cutoffs(levels)?;
    data.map_values(|x| 1.0 + cuts.partition_point(|&c| c < x) as f64)
}
