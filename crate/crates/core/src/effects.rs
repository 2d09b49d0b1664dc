//! Conversions among the four equivalent effect-size scales: log odds ratio
//! δ, odds ratio, probabilistic index θ = P(X < Y) + P(X = Y)/2, and a shift
//! in latent logistic standard deviations.

use std::f64::consts::{PI, SQRT_2};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::stats::{phi, phi_inv};

const TAYLOR_CUTOFF: f64 = 1e-4;
const SERIES_CUTOFF: f64 = 0.5;
const DELTA_BRACKET: f64 = 50.0;

/// One effect size, stored in whichever scale it was specified on.
///
/// Serializes as a single-key map, e.g. `{"or": 2.05}` or `{"theta": 0.6}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum EffectSize {
    #[serde(rename = "logodds")]
    LogOdds(f64),
    #[serde(rename = "or")]
    OddsRatio(f64),
    #[serde(rename = "theta")]
    ProbIndex(f64),
    #[serde(rename = "sd")]
    LatentSd(f64),
}

impl EffectSize {
    pub fn validate(&self) -> Result<()> {
        match *self {
            EffectSize::LogOdds(v) if !v.is_finite() => {
                Err(Error::domain("logodds", v, "must be finite"))
            }
            EffectSize::LatentSd(v) if !v.is_finite() => {
                Err(Error::domain("sd", v, "must be finite"))
            }
            EffectSize::OddsRatio(v) if !(v > 0.0 && v.is_finite()) => {
                Err(Error::domain("or", v, "must be positive and finite"))
            }
            EffectSize::ProbIndex(v) if !(v > 0.0 && v < 1.0) => {
                Err(Error::domain("theta", v, "must lie in (0, 1)"))
            }
            _ => Ok(()),
        }
    }

    /// The log odds ratio δ.
    pub fn log_odds(&self) -> Result<f64> {
        self.validate()?;
        Ok(match *self {
            EffectSize::LogOdds(d) => d,
            EffectSize::OddsRatio(or) => or.ln(),
            EffectSize::ProbIndex(t) => delta_from_theta(t)?,
            EffectSize::LatentSd(sd) => delta_from_latent_sd(sd),
        })
    }

    pub fn odds_ratio(&self) -> Result<f64> {
        match *self {
            EffectSize::OddsRatio(or) => {
                self.validate()?;
                Ok(or)
            }
            _ => Ok(self.log_odds()?.exp()),
        }
    }

    /// The probabilistic index θ.
    pub fn prob_index(&self) -> Result<f64> {
        match *self {
            EffectSize::ProbIndex(t) => {
                self.validate()?;
                Ok(t)
            }
            _ => Ok(theta_from_delta(self.log_odds()?)),
        }
    }

    pub fn latent_sd(&self) -> Result<f64> {
        match *self {
            EffectSize::LatentSd(sd) => {
                self.validate()?;
                Ok(sd)
            }
            _ => Ok(latent_sd_from_delta(self.log_odds()?)),
        }
    }

    pub fn kind(&self) -> EffectKind {
        match self {
            EffectSize::LogOdds(_) => EffectKind::LogOdds,
            EffectSize::OddsRatio(_) => EffectKind::OddsRatio,
            EffectSize::ProbIndex(_) => EffectKind::ProbIndex,
            EffectSize::LatentSd(_) => EffectKind::LatentSd,
        }
    }

    /// Re-expresses the effect on another scale.
    pub fn convert(&self, to: EffectKind) -> Result<EffectSize> {
        Ok(match to {
            EffectKind::LogOdds => EffectSize::LogOdds(self.log_odds()?),
            EffectKind::OddsRatio => EffectSize::OddsRatio(self.odds_ratio()?),
            EffectKind::ProbIndex => EffectSize::ProbIndex(self.prob_index()?),
            EffectKind::LatentSd => EffectSize::LatentSd(self.latent_sd()?),
        })
    }

    pub fn value(&self) -> f64 {
        match *self {
            EffectSize::LogOdds(v)
            | EffectSize::OddsRatio(v)
            | EffectSize::ProbIndex(v)
            | EffectSize::LatentSd(v) => v,
        }
    }

    pub fn new(kind: EffectKind, value: f64) -> Result<Self> {
        let e = match kind {
            EffectKind::LogOdds => EffectSize::LogOdds(value),
            EffectKind::OddsRatio => EffectSize::OddsRatio(value),
            EffectKind::ProbIndex => EffectSize::ProbIndex(value),
            EffectKind::LatentSd => EffectSize::LatentSd(value),
        };
        e.validate()?;
        Ok(e)
    }
}

/// `kind=value`, with kinds `or`, `logodds`, `theta`, `sd`.
impl FromStr for EffectSize {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let (kind, value) = s.split_once('=').ok_or_else(|| {
            Error::InvalidInput(format!("effect `{s}` is not of the form kind=value"))
        })?;
        let kind: EffectKind = kind.trim().parse()?;
        let value: f64 = value
            .trim()
            .parse()
            .map_err(|_| Error::InvalidInput(format!("effect value `{value}` is not a number")))?;
        EffectSize::new(kind, value)
    }
}

impl fmt::Display for EffectSize {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}={}", self.kind(), self.value())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum EffectKind {
    #[serde(rename = "logodds")]
    LogOdds,
    #[serde(rename = "or")]
    OddsRatio,
    #[serde(rename = "theta")]
    ProbIndex,
    #[serde(rename = "sd")]
    LatentSd,
}

impl EffectKind {
    pub const ALL: [EffectKind; 4] = [
        EffectKind::LogOdds,
        EffectKind::OddsRatio,
        EffectKind::ProbIndex,
        EffectKind::LatentSd,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            EffectKind::LogOdds => "logodds",
            EffectKind::OddsRatio => "or",
            EffectKind::ProbIndex => "theta",
            EffectKind::LatentSd => "sd",
        }
    }
}

impl FromStr for EffectKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "logodds" | "log_odds" | "delta" => Ok(EffectKind::LogOdds),
            "or" | "odds_ratio" => Ok(EffectKind::OddsRatio),
            "theta" | "prob_index" => Ok(EffectKind::ProbIndex),
            "sd" | "latent_sd" => Ok(EffectKind::LatentSd),
            other => Err(Error::InvalidInput(format!(
                "unknown effect kind `{other}` (expected or, logodds, theta or sd)"
            ))),
        }
    }
}

impl fmt::Display for EffectKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Probabilistic index implied by a proportional-odds log odds ratio:
/// `θ = e^δ (e^δ - δ - 1) / (e^δ - 1)²`, with θ(0) = 1/2.
pub fn theta_from_delta(delta: f64) -> f64 {
    if delta < 0.0 {
        1.0 - theta_nonneg(-delta)
    } else {
        theta_nonneg(delta)
    }
}

fn theta_nonneg(x: f64) -> f64 {
    if x < TAYLOR_CUTOFF {
        let x2 = x * x;
        return 0.5 + x / 6.0 - x * x2 / 180.0;
    }
    if x < SERIES_CUTOFF {
        // e^x - x - 1 summed directly, no cancellation
        let mut term = 0.5 * x * x;
        let mut tail = term;
        let mut n = 2.0;
        while term > tail * 1e-17 {
            n += 1.0;
            term *= x / n;
            tail += term;
        }
        let em1 = x.exp_m1();
        return x.exp() * tail / (em1 * em1);
    }
    let e = (-x).exp();
    let one_minus = 1.0 - e;
    (1.0 - (x + 1.0) * e) / (one_minus * one_minus)
}

/// dθ/dδ, an even function of δ.
fn theta_slope(delta: f64) -> f64 {
    let x = delta.abs();
    if x < SERIES_CUTOFF {
        let x2 = x * x;
        return 1.0 / 6.0 - x2 / 60.0 + x2 * x2 / 1008.0 - 7.0 * x2 * x2 * x2 / 151_200.0;
    }
    let e = (-x).exp();
    let one_minus = 1.0 - e;
    ((x - 2.0) * e + (x + 2.0) * e * e) / (one_minus * one_minus * one_minus)
}

/// Inverse of [`theta_from_delta`].
///
/// Newton iteration kept inside a shrinking bracket on `[-50, 50]`, falling
/// back to bisection whenever a step would leave it.
pub fn delta_from_theta(theta: f64) -> Result<f64> {
    if !(theta > 0.0 && theta < 1.0) {
        return Err(Error::domain("theta", theta, "must lie in (0, 1)"));
    }
    if theta == 0.5 {
        return Ok(0.0);
    }
    let (mut lo, mut hi) = (-DELTA_BRACKET, DELTA_BRACKET);
    let mut x = (6.0 * (theta - 0.5)).clamp(-10.0, 10.0);
    for _ in 0..200 {
        let f = theta_from_delta(x) - theta;
        if f == 0.0 {
            return Ok(x);
        }
        if f > 0.0 {
            hi = x;
        } else {
            lo = x;
        }
        let slope = theta_slope(x);
        let mut next = x - f / slope;
        if !(next > lo && next < hi) || !next.is_finite() {
            next = 0.5 * (lo + hi);
        }
        if (next - x).abs() <= 1e-15 * x.abs().max(1.0) {
            return Ok(next);
        }
        x = next;
    }
    Ok(x)
}

/// `δ = sd · π / √3`: a shift of `sd` latent standard deviations of a
/// logistic variable expressed on the log-odds scale.
pub fn delta_from_latent_sd(sd: f64) -> f64 {
    sd * PI / 3f64.sqrt()
}

pub fn latent_sd_from_delta(delta: f64) -> f64 {
    delta * 3f64.sqrt() / PI
}

/// Mean shift μ of a normal experiment arm, N(μ, 1) against N(0, 1), that
/// produces probabilistic index θ: `μ = √2 Φ⁻¹(θ)`.
pub fn mu_from_theta(theta: f64) -> Result<f64> {
    if !(theta > 0.0 && theta < 1.0) {
        return Err(Error::domain("theta", theta, "must lie in (0, 1)"));
    }
    Ok(SQRT_2 * phi_inv(theta))
}

pub fn theta_from_mu(mu: f64) -> f64 {
    phi(mu / SQRT_2)
}
