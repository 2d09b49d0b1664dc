//! Seeded Monte-Carlo checks of the designs.
//!
//! A [`SimulationScenario`] names a data generator, a design and an
//! analysis. [`estimate_power`] replays it `replications` times and counts
//! rejections. Replication `i` draws from its own ChaCha stream keyed by
//! `(seed, i)`, so results do not depend on the number of worker threads.
//!
//! The `delta` of a scenario is always the proportional-odds log odds
//! ratio. Latent-normal generators shift the experiment arm by
//! `μ = √2 Φ⁻¹(θ(δ))`.

mod calibrate;
mod generate;
mod power;

pub use calibrate::{calibrate_empirical_effect, Calibration, CalibrationConfig};
pub use generate::{
    cluster_sizes, discretize_ordinal, gen_cluster_latent, gen_cluster_lognormal,
    gen_individual_logistic, ordinal_cutoffs,
};
pub use power::{estimate_power, estimate_power_with_workers, unequal_cluster_stress};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::design::Sided;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DesignKind {
    Individual,
    Cluster,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Generator {
    /// Logistic(0, 1) control, Logistic(δ, 1) experiment.
    LogisticShift,
    /// Additive normal random-intercept model, exponentiated.
    LatentNormalLognormal,
    /// Additive normal model cut at standard-normal quantiles.
    LatentNormalOrdinal,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Analysis {
    /// Tie-corrected normal-approximation rank-sum test; individual designs.
    Wilcoxon,
    /// Size-stratified randomization test of the clustered θ̂.
    ClusteredWilcoxon,
    /// Randomization test of the pooled θ̂ over whole clusters.
    ClusterRankSum,
}

/// Cluster sizes of the generated data.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SizeConfig {
    Fixed(u64),
    /// Independent draws from the integers `lo..=hi`.
    Uniform(u64, u64),
    /// Alternating `a, b, a, b, ...` within each arm.
    TwoPoint(u64, u64),
}

impl SizeConfig {
    pub fn validate(&self) -> Result<()> {
        let ok = match *self {
            SizeConfig::Fixed(k) => k >= 1,
            SizeConfig::Uniform(lo, hi) => lo >= 1 && lo <= hi,
            SizeConfig::TwoPoint(a, b) => a >= 1 && b >= 1,
        };
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidInput(format!(
                "invalid cluster size configuration {self:?}"
            )))
        }
    }

    /// Expected cluster size.
    pub fn mean(&self) -> f64 {
        match *self {
            SizeConfig::Fixed(k) => k as f64,
            SizeConfig::Uniform(a, b) | SizeConfig::TwoPoint(a, b) => (a + b) as f64 / 2.0,
        }
    }
}

fn default_alpha() -> f64 {
    0.05
}

fn default_permutation_reps() -> usize {
    1000
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulationScenario {
    pub design: DesignKind,
    pub generator: Generator,
    /// Log odds ratio of the proportional-odds model.
    #[serde(alias = "delta_or_mu")]
    pub delta: f64,
    #[serde(default)]
    pub rho_latent: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cluster_size: Option<SizeConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub clusters_per_arm: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_per_arm: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ordinal_levels: Option<usize>,
    pub replications: usize,
    pub seed: u64,
    pub analysis: Analysis,
    #[serde(default = "default_alpha")]
    pub alpha: f64,
    #[serde(default)]
    pub sided: Sided,
    /// Label shuffles per randomization test.
    #[serde(default = "default_permutation_reps")]
    pub permutation_reps: usize,
}

impl SimulationScenario {
    pub fn validate(&self) -> Result<()> {
        let invalid = |msg: &str| Err(Error::InvalidInput(msg.to_string()));
        if self.replications == 0 {
            return invalid("replications must be at least 1");
        }
        if !self.delta.is_finite() {
            return Err(Error::domain("delta", self.delta, "must be finite"));
        }
        if !(0.0..1.0).contains(&self.rho_latent) {
            return Err(Error::domain(
                "rho_latent",
                self.rho_latent,
                "must lie in [0, 1)",
            ));
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::domain("alpha", self.alpha, "must lie in (0, 1)"));
        }
        match self.design {
            DesignKind::Individual => {
                if self.clusters_per_arm.is_some() || self.cluster_size.is_some() {
                    return invalid("individual designs take n_per_arm, not cluster fields");
                }
                match self.n_per_arm {
                    Some(n) if n >= 1 => {}
                    _ => return invalid("individual designs need n_per_arm >= 1"),
                }
                if self.analysis != Analysis::Wilcoxon {
                    return invalid("individual designs are analysed with the wilcoxon test");
                }
            }
            DesignKind::Cluster => {
                if self.n_per_arm.is_some() {
                    return invalid("cluster designs take clusters_per_arm, not n_per_arm");
                }
                match self.clusters_per_arm {
                    Some(m) if m >= 1 => {}
                    _ => return invalid("cluster designs need clusters_per_arm >= 1"),
                }
                match &self.cluster_size {
                    Some(c) => c.validate()?,
                    None => return invalid("cluster designs need cluster_size"),
                }
                if self.analysis == Analysis::Wilcoxon {
                    return invalid(
                        "the wilcoxon test ignores clustering; use clustered_wilcoxon or cluster_rank_sum",
                    );
                }
                if self.generator == Generator::LogisticShift {
                    return invalid("the logistic_shift generator has no cluster structure");
                }
            }
        }
        match (self.generator, self.ordinal_levels) {
            (Generator::LatentNormalOrdinal, Some(l)) if l >= 2 => {}
            (Generator::LatentNormalOrdinal, _) => {
                return invalid("the ordinal generator needs ordinal_levels >= 2")
            }
            (_, Some(_)) => return invalid("ordinal_levels applies only to latent_normal_ordinal"),
            (_, None) => {}
        }
        if self.analysis != Analysis::Wilcoxon && self.permutation_reps == 0 {
            return invalid("permutation_reps must be at least 1");
        }
        Ok(())
    }

    /// SHA-256 of the canonical JSON form, hex encoded.
    pub fn fingerprint(&self) -> String {
        let json = serde_json::to_string(self).expect("scenario serializes");
        hex::encode(Sha256::digest(json.as_bytes()))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PowerResult {
    pub rejections: usize,
    pub replications: usize,
    pub power_hat: f64,
    pub mc_stderr: f64,
    pub fingerprint: String,
}

impl PowerResult {
    pub(crate) fn new(rejections: usize, replications: usize, fingerprint: String) -> Self {
        let p = rejections as f64 / replications as f64;
        PowerResult {
            rejections,
            replications,
            power_hat: p,
            mc_stderr: (p * (1.0 - p) / replications as f64).sqrt(),
            fingerprint,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cluster_json() -> &'static str {
        r#"{"design":"cluster","generator":"latent_normal_lognormal","delta_or_mu":0.5,
            "rho_latent":0.3,"cluster_size":{"uniform":[15,25]},"clusters_per_arm":12,
            "replications":10,"seed":7,"analysis":"cluster_rank_sum"}"#
    }

    #[test]
    fn parses_with_defaults() {
        let s: SimulationScenario = serde_json::from_str(cluster_json()).unwrap();
        assert_eq!(s.delta, 0.5);
        assert_eq!(s.cluster_size, Some(SizeConfig::Uniform(15, 25)));
        assert_eq!(s.alpha, 0.05);
        assert_eq!(s.sided, Sided::Two);
        assert_eq!(s.permutation_reps, 1000);
        s.validate().unwrap();
    }

    #[test]
    fn rejects_unknown_fields_and_bad_combinations() {
        let extra = cluster_json().replace("\"seed\":7", "\"seed\":7,\"colour\":1");
        assert!(serde_json::from_str::<SimulationScenario>(&extra).is_err());

        let mut s: SimulationScenario = serde_json::from_str(cluster_json()).unwrap();
        s.n_per_arm = Some(10);
        assert!(s.validate().is_err());
        s.n_per_arm = None;
        s.analysis = Analysis::Wilcoxon;
        assert!(s.validate().is_err());
        s.analysis = Analysis::ClusteredWilcoxon;
        s.ordinal_levels = Some(3);
        assert!(s.validate().is_err());
        s.generator = Generator::LatentNormalOrdinal;
        s.validate().unwrap();
        s.ordinal_levels = Some(1);
        assert!(s.validate().is_err());
        s.ordinal_levels = Some(3);
        s.replications = 0;
        assert!(s.validate().is_err());
    }

    #[test]
    fn fingerprint_tracks_content() {
        let a: SimulationScenario = serde_json::from_str(cluster_json()).unwrap();
        let mut b = a.clone();
        assert_eq!(a.fingerprint(), b.fingerprint());
        assert_eq!(a.fingerprint().len(), 64);
        b.seed += 1;
        assert_ne!(a.fingerprint(), b.fingerprint());
    }

    #[test]
    fn power_result_arithmetic() {
        let r = PowerResult::new(900, 1000, String::new());
        assert_eq!(r.power_hat, 0.9);
        assert!((r.mc_stderr - (0.09f64 / 1000.0).sqrt()).abs() < 1e-15);
    }
}
