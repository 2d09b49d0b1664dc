//! Closed-form sample sizes, cluster sizes and design effects.
//!
//! Every calculation starts from a [`DesignSpec`]. Individual trials use the
//! proportional-odds (Whitehead) formula for ordinal outcomes and its
//! continuous limit; cluster trials inflate those by the rank design effect
//! `1 + γ(k - 1)`.

mod binary;
mod deff;
mod formulas;
mod power;
mod ttest;

pub use binary::{n_binary_pooled, n_binary_unpooled, n_binary_whitehead};
pub use deff::{
    deff_approx, deff_exact, deff_exact_terms, var_theta_hat_clustered, var_theta_hat_independent,
    DeffTerms,
};
pub use formulas::{
    k_given_m_continuous, k_given_m_ordinal, n_cluster_continuous, n_cluster_ordinal,
    n_individual_continuous, n_individual_ordinal, s_factor,
};
pub use power::{clusters_for_power_analytic, power_clustered_wilcoxon_analytic};
pub use ttest::{n_ttest_cluster, n_ttest_individual, power_ttest};

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::effects::EffectSize;
use crate::error::{Error, Result};
use crate::stats::phi_inv;

/// Sidedness of the planned test.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Sided {
    One,
    #[default]
    Two,
}

impl Sided {
    /// `z_{1-α/2}` for two-sided tests, `z_{1-α}` for one-sided.
    pub fn z_alpha(self, alpha: f64) -> Result<f64> {
        check_open_unit("alpha", alpha)?;
        Ok(match self {
            Sided::One => phi_inv(1.0 - alpha),
            Sided::Two => phi_inv(1.0 - alpha / 2.0),
        })
    }
}

impl FromStr for Sided {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "1" | "one" => Ok(Sided::One),
            "2" | "two" => Ok(Sided::Two),
            other => Err(Error::InvalidInput(format!(
                "sided must be 1 or 2, got `{other}`"
            ))),
        }
    }
}

impl fmt::Display for Sided {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Sided::One => "1",
            Sided::Two => "2",
        })
    }
}

fn default_alpha() -> f64 {
    0.05
}

fn default_allocation() -> f64 {
    1.0
}

/// Level, power, allocation and effect: the inputs shared by every formula.
///
/// `allocation` is the ratio of control to experiment arm sizes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DesignSpec {
    #[serde(default = "default_alpha")]
    pub alpha: f64,
    #[serde(default)]
    pub sided: Sided,
    pub power: f64,
    #[serde(default = "default_allocation")]
    pub allocation: f64,
    pub effect: EffectSize,
}

impl DesignSpec {
    pub fn new(
        alpha: f64,
        sided: Sided,
        power: f64,
        allocation: f64,
        effect: EffectSize,
    ) -> Result<Self> {
        let spec = DesignSpec {
            alpha,
            sided,
            power,
            allocation,
            effect,
        };
        spec.validate()?;
        Ok(spec)
    }

    /// Two-sided 5% level, equal allocation.
    pub fn standard(power: f64, effect: EffectSize) -> Result<Self> {
        Self::new(0.05, Sided::Two, power, 1.0, effect)
    }

    pub fn validate(&self) -> Result<()> {
        check_open_unit("alpha", self.alpha)?;
        check_open_unit("power", self.power)?;
        if !(self.allocation > 0.0 && self.allocation.is_finite()) {
            return Err(Error::domain(
                "allocation",
                self.allocation,
                "must be positive and finite",
            ));
        }
        self.effect.validate()
    }

    /// `z_{1-α*} + z_{1-β}`.
    pub fn z_sum(&self) -> Result<f64> {
        self.validate()?;
        Ok(self.sided.z_alpha(self.alpha)? + phi_inv(self.power))
    }

    /// Nonzero log odds ratio, or an infeasibility error.
    pub fn log_odds(&self) -> Result<f64> {
        let d = self.effect.log_odds()?;
        if d == 0.0 {
            return Err(Error::Infeasible(
                "a null effect needs an infinite sample size".into(),
            ));
        }
        Ok(d)
    }

    /// `(A + 1)² / A`.
    pub fn allocation_factor(&self) -> f64 {
        let a = self.allocation;
        (a + 1.0) * (a + 1.0) / a
    }
}

/// Mean category proportions π̄₁..π̄_L.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct OrdinalDistribution {
    probs: Vec<f64>,
}

impl OrdinalDistribution {
    /// Proportions that sum to 1 within 1e-9.
    pub fn new(probs: Vec<f64>) -> Result<Self> {
        Self::check_entries(&probs)?;
        let sum: f64 = probs.iter().sum();
        if (sum - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidInput(format!(
                "category proportions sum to {sum}, not 1"
            )));
        }
        Ok(OrdinalDistribution { probs })
    }

    /// Proportions within 1e-6 of summing to 1, rescaled to sum exactly.
    pub fn normalized(probs: Vec<f64>) -> Result<Self> {
        Self::check_entries(&probs)?;
        let sum: f64 = probs.iter().sum();
        if (sum - 1.0).abs() > 1e-6 {
            return Err(Error::InvalidInput(format!(
                "category proportions sum to {sum}, not 1"
            )));
        }
        Ok(OrdinalDistribution {
            probs: probs.into_iter().map(|p| p / sum).collect(),
        })
    }

    pub fn uniform(levels: usize) -> Result<Self> {
        if levels < 2 {
            return Err(Error::InvalidInput(
                "at least two categories are needed".into(),
            ));
        }
        Ok(OrdinalDistribution {
            probs: vec![1.0 / levels as f64; levels],
        })
    }

    fn check_entries(probs: &[f64]) -> Result<()> {
        if probs.len() < 2 {
            return Err(Error::InvalidInput(
                "an ordinal distribution needs at least two categories".into(),
            ));
        }
        if let Some(&p) = probs.iter().find(|p| !(**p >= 0.0 && **p <= 1.0)) {
            return Err(Error::domain("proportion", p, "must lie in [0, 1]"));
        }
        Ok(())
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn levels(&self) -> usize {
        self.probs.len()
    }

    /// `1 - Σ π̄³`, the tie correction of the Whitehead formula.
    pub fn tie_factor(&self) -> f64 {
        1.0 - self.probs.iter().map(|p| p * p * p).sum::<f64>()
    }
}

impl TryFrom<Vec<f64>> for OrdinalDistribution {
    type Error = Error;

    fn try_from(v: Vec<f64>) -> Result<Self> {
        OrdinalDistribution::normalized(v)
    }
}

impl From<OrdinalDistribution> for Vec<f64> {
    fn from(d: OrdinalDistribution) -> Self {
        d.probs
    }
}

/// Cluster size `k` and rank ICC `γ`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClusterSpec {
    pub k: u64,
    pub gamma: f64,
}

impl ClusterSpec {
    pub fn new(k: u64, gamma: f64) -> Result<Self> {
        let cl = ClusterSpec { k, gamma };
        cl.validate()?;
        Ok(cl)
    }

    pub fn validate(&self) -> Result<()> {
        if self.k == 0 {
            return Err(Error::InvalidInput(
                "cluster size k must be at least 1".into(),
            ));
        }
        check_gamma(self.gamma)
    }

    pub fn design_effect(&self) -> f64 {
        deff_approx(self.gamma, self.k)
    }
}

/// Sample size before and after per-arm rounding.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SampleSizeResult {
    /// Unrounded total.
    pub n_total: f64,
    pub n_experiment: u64,
    pub n_control: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub clusters_experiment: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub clusters_control: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub cluster_size: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub design_effect: Option<f64>,
}

impl SampleSizeResult {
    pub(crate) fn individual(n_total: f64, allocation: f64) -> Self {
        let a = allocation;
        SampleSizeResult {
            n_total,
            n_experiment: ceil_count(n_total / (a + 1.0)),
            n_control: ceil_count(a * n_total / (a + 1.0)),
            clusters_experiment: None,
            clusters_control: None,
            cluster_size: None,
            design_effect: None,
        }
    }

    pub(crate) fn clustered(n_total: f64, allocation: f64, cl: ClusterSpec) -> Self {
        let mut r = Self::individual(n_total, allocation);
        r.clusters_experiment = Some(r.n_experiment.div_ceil(cl.k));
        r.clusters_control = Some(r.n_control.div_ceil(cl.k));
        r.cluster_size = Some(cl.k);
        r.design_effect = Some(cl.design_effect());
        r
    }

    /// Sum of the rounded arms.
    pub fn total(&self) -> u64 {
        self.n_experiment + self.n_control
    }

    pub fn clusters_total(&self) -> Option<u64> {
        Some(self.clusters_experiment? + self.clusters_control?)
    }
}

/// Outcome scale of a design.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Outcome {
    #[default]
    Continuous,
    /// Ordinal with the given mean category proportions.
    Ordinal(OrdinalDistribution),
    /// Two categories; the experiment rate follows from the control rate
    /// and the effect.
    Binary { control_rate: f64 },
}

impl Outcome {
    /// Category proportions used by the ordinal formula, `None` for
    /// continuous outcomes.
    pub fn distribution(&self, spec: &DesignSpec) -> Result<Option<OrdinalDistribution>> {
        match self {
            Outcome::Continuous => Ok(None),
            Outcome::Ordinal(d) => Ok(Some(d.clone())),
            Outcome::Binary { control_rate } => {
                check_open_unit("control_rate", *control_rate)?;
                let odds = control_rate / (1.0 - control_rate) * spec.effect.odds_ratio()?;
                let p_t = odds / (1.0 + odds);
                let p_bar = 0.5 * (control_rate + p_t);
                Ok(Some(OrdinalDistribution::new(vec![1.0 - p_bar, p_bar])?))
            }
        }
    }
}

/// Sample size for any outcome, clustered when `cluster` is given.
pub fn sample_size(
    spec: &DesignSpec,
    outcome: &Outcome,
    cluster: Option<&ClusterSpec>,
) -> Result<SampleSizeResult> {
    match (outcome.distribution(spec)?, cluster) {
        (None, None) => n_individual_continuous(spec),
        (None, Some(cl)) => n_cluster_continuous(spec, cl),
        (Some(d), None) => n_individual_ordinal(spec, &d),
        (Some(d), Some(cl)) => n_cluster_ordinal(spec, &d, cl),
    }
}

/// Smallest cluster size for `m_total` clusters, for any outcome.
pub fn cluster_size(spec: &DesignSpec, outcome: &Outcome, m_total: u64, gamma: f64) -> Result<u64> {
    match outcome.distribution(spec)? {
        None => k_given_m_continuous(spec, m_total, gamma),
        Some(d) => k_given_m_ordinal(spec, &d, m_total, gamma),
    }
}

/// Ceiling that ignores floating-point noise just above an integer.
pub(crate) fn ceil_count(x: f64) -> u64 {
    let r = x.round();
    if (x - r).abs() <= 1e-9 * r.abs().max(1.0) {
        r as u64
    } else {
        x.ceil() as u64
    }
}

pub(crate) fn check_open_unit(name: &'static str, v: f64) -> Result<()> {
    if v > 0.0 && v < 1.0 {
        Ok(())
    } else {
        Err(Error::domain(name, v, "must lie in (0, 1)"))
    }
}

pub(crate) fn check_gamma(gamma: f64) -> Result<()> {
    if (0.0..1.0).contains(&gamma) {
        Ok(())
    } else {
        Err(Error::domain("gamma", gamma, "must lie in [0, 1)"))
    }
}
