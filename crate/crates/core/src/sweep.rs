//! One-parameter sweeps over design inputs.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::design::{cluster_size, sample_size, ClusterSpec, DesignSpec, Outcome, Sided};
use crate::effects::EffectSize;
use crate::error::{Error, Result};

/// Largest grid accepted by [`run_sweep`].
pub const MAX_GRID: usize = 10_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepParam {
    #[serde(rename = "or", alias = "odds_ratio")]
    OddsRatio,
    Theta,
    Gamma,
    K,
    M,
}

impl SweepParam {
    pub fn as_str(&self) -> &'static str {
        match self {
            SweepParam::OddsRatio => "or",
            SweepParam::Theta => "theta",
            SweepParam::Gamma => "gamma",
            SweepParam::K => "k",
            SweepParam::M => "m",
        }
    }
}

impl fmt::Display for SweepParam {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for SweepParam {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "or" | "odds_ratio" => Ok(SweepParam::OddsRatio),
            "theta" => Ok(SweepParam::Theta),
            "gamma" => Ok(SweepParam::Gamma),
            "k" => Ok(SweepParam::K),
            "m" => Ok(SweepParam::M),
            other => Err(Error::InvalidInput(format!(
                "unknown sweep parameter {other:?}; expected or, theta, gamma, k or m"
            ))),
        }
    }
}

/// Parses `start:stop:step` (inclusive) or a comma-separated list.
pub fn parse_grid(s: &str) -> Result<Vec<f64>> {
    let num = |t: &str| {
        t.trim()
            .parse::<f64>()
            .map_err(|_| Error::InvalidInput(format!("bad grid value {t:?}")))
    };
    let grid = if s.contains(':') {
        let parts: Vec<&str> = s.split(':').collect();
        let [a, b, step] = parts[..] else {
            return Err(Error::InvalidInput(format!(
                "grid range must be start:stop:step, got {s:?}"
            )));
        };
        let (a, b, step) = (num(a)?, num(b)?, num(step)?);
        if step.is_nan() || step <= 0.0 || !a.is_finite() || !b.is_finite() || b < a {
            return Err(Error::InvalidInput(format!(
                "empty or invalid grid range {s:?}"
            )));
        }
        let count = ((b - a) / step + 1e-9).floor() as usize + 1;
        if count > MAX_GRID {
            return Err(Error::InvalidInput(format!(
                "grid has {count} points, more than {MAX_GRID}"
            )));
        }
        (0..count)
            .map(|i| {
                let v = a + i as f64 * step;
                // drop accumulated binary noise such as 1.6000000000000001
                format!("{v:.10}").parse::<f64>().unwrap_or(v)
            })
            .collect()
    } else {
        s.split(',').map(num).collect::<Result<Vec<f64>>>()?
    };
    check_grid(&grid)?;
    Ok(grid)
}

fn check_grid(grid: &[f64]) -> Result<()> {
    if grid.is_empty() {
        return Err(Error::InvalidInput("the grid is empty".into()));
    }
    if grid.len() > MAX_GRID {
        return Err(Error::InvalidInput(format!(
            "grid has {} points, more than {MAX_GRID}",
            grid.len()
        )));
    }
    if grid.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidInput("grid values must be finite".into()));
    }
    if grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidInput(
            "grid values must be strictly increasing".into(),
        ));
    }
    Ok(())
}

fn default_alpha() -> f64 {
    0.05
}

fn default_allocation() -> f64 {
    1.0
}

/// A grid over one design input with the others held fixed.
///
/// Fixing `k` gives clusters per arm, fixing `m` (total clusters) gives the
/// cluster size, and fixing neither gives individual sample sizes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepRequest {
    pub vary: SweepParam,
    pub grid: Vec<f64>,
    #[serde(default = "default_alpha")]
    pub alpha: f64,
    #[serde(default)]
    pub sided: Sided,
    pub power: f64,
    #[serde(default = "default_allocation")]
    pub allocation: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub effect: Option<EffectSize>,
    #[serde(default)]
    pub outcome: Outcome,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub k: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gamma: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub m: Option<u64>,
}

/// One grid point. Fields that do not apply to the sweep's mode are empty.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub value: f64,
    pub n_total: Option<f64>,
    pub n_experiment: Option<u64>,
    pub n_control: Option<u64>,
    pub clusters_experiment: Option<u64>,
    pub clusters_control: Option<u64>,
    pub cluster_size: Option<u64>,
    pub infeasible: bool,
}

impl SweepRow {
    fn empty(value: f64) -> Self {
        SweepRow {
            value,
            n_total: None,
            n_experiment: None,
            n_control: None,
            clusters_experiment: None,
            clusters_control: None,
            cluster_size: None,
            infeasible: false,
        }
    }
}

enum Mode {
    Individual,
    FixedK(u64, f64),
    FixedM(u64, f64),
}

fn as_count(param: SweepParam, v: f64) -> Result<u64> {
    if v >= 1.0 && v.fract() == 0.0 && v < u64::MAX as f64 {
        Ok(v as u64)
    } else {
        Err(Error::InvalidInput(format!(
            "{param} values must be positive integers, got {v}"
        )))
    }
}

impl SweepRequest {
    pub fn validate(&self) -> Result<()> {
        check_grid(&self.grid)?;
        let invalid = |msg: String| Err(Error::InvalidInput(msg));
        let fixed = match self.vary {
            SweepParam::OddsRatio | SweepParam::Theta => self.effect.is_some(),
            SweepParam::Gamma => self.gamma.is_some(),
            SweepParam::K => self.k.is_some(),
            SweepParam::M => self.m.is_some(),
        };
        if fixed {
            return invalid(format!("{} is swept and cannot also be fixed", self.vary));
        }
        let vary_effect = matches!(self.vary, SweepParam::OddsRatio | SweepParam::Theta);
        if !vary_effect && self.effect.is_none() {
            return invalid("an effect is required unless it is swept".into());
        }
        let has_k = self.k.is_some() || self.vary == SweepParam::K;
        let has_m = self.m.is_some() || self.vary == SweepParam::M;
        let has_gamma = self.gamma.is_some() || self.vary == SweepParam::Gamma;
        if has_k && has_m {
            return invalid(
                "fix either the cluster size k or the cluster count m, not both".into(),
            );
        }
        if has_gamma != (has_k || has_m) {
            return invalid("cluster sweeps need gamma together with k or m".into());
        }
        if let Some(k) = self.k {
            ClusterSpec::new(k, self.gamma.unwrap_or(0.0))?;
        }
        Ok(())
    }

    fn spec(&self, effect: EffectSize) -> Result<DesignSpec> {
        DesignSpec::new(self.alpha, self.sided, self.power, self.allocation, effect)
    }

    fn point(&self, v: f64) -> Result<(DesignSpec, Mode)> {
        let effect = match self.vary {
            SweepParam::OddsRatio => EffectSize::OddsRatio(v),
            SweepParam::Theta => EffectSize::ProbIndex(v),
            _ => self.effect.expect("validated"),
        };
        let gamma = if self.vary == SweepParam::Gamma {
            Some(v)
        } else {
            self.gamma
        };
        let k = match self.vary {
            SweepParam::K => Some(as_count(self.vary, v)?),
            _ => self.k,
        };
        let m = match self.vary {
            SweepParam::M => Some(as_count(self.vary, v)?),
            _ => self.m,
        };
        let mode = match (k, m, gamma) {
            (Some(k), None, Some(g)) => Mode::FixedK(k, g),
            (None, Some(m), Some(g)) => Mode::FixedM(m, g),
            _ => Mode::Individual,
        };
        Ok((self.spec(effect)?, mode))
    }
}

/// Evaluates every grid point. Infeasible points are flagged rather than
/// failing the sweep; any other error aborts it.
pub fn run_sweep(req: &SweepRequest) -> Result<Vec<SweepRow>> {
    req.validate()?;
    req.grid
        .iter()
        .map(|&v| {
            let (spec, mode) = req.point(v)?;
            let mut row = SweepRow::empty(v);
            let outcome = match mode {
                Mode::Individual => sample_size(&spec, &req.outcome, None).map(|r| {
                    row.n_total = Some(r.n_total);
                    row.n_experiment = Some(r.n_experiment);
                    row.n_control = Some(r.n_control);
                }),
                Mode::FixedK(k, g) => {
                    let cl = ClusterSpec::new(k, g)?;
                    sample_size(&spec, &req.outcome, Some(&cl)).map(|r| {
                        row.n_total = Some(r.n_total);
                        row.n_experiment = Some(r.n_experiment);
                        row.n_control = Some(r.n_control);
                        row.clusters_experiment = r.clusters_experiment;
                        row.clusters_control = r.clusters_control;
                        row.cluster_size = Some(k);
                    })
                }
                Mode::FixedM(m, g) => cluster_size(&spec, &req.outcome, m, g).map(|k| {
                    row.cluster_size = Some(k);
                }),
            };
            match outcome {
                Ok(()) => Ok(row),
                Err(e) if e.is_infeasible() => Ok(SweepRow {
                    infeasible: true,
                    ..SweepRow::empty(v)
                }),
                Err(e) => Err(e),
            }
        })
        .collect()
}
