//! Request bodies and handlers.
//!
//! Every response is `{"request": <canonical request>, "result": ...}`.
//! The canonical request has defaults filled in and the effect in its
//! single-key form, so replaying it yields the same result.

use axum::body::Bytes;
use axum::extract::State;
use axum::http::{header, HeaderMap};
use axum::Json;
use rankdesign::design::{
    cluster_size, deff_approx, deff_exact, sample_size, ClusterSpec, DesignSpec,
    OrdinalDistribution, Outcome, Sided,
};
use rankdesign::effects::{EffectKind, EffectSize};
use rankdesign::sim::{estimate_power, SimulationScenario};
use rankdesign::stats::latent_to_rank_icc;
use rankdesign::sweep::{parse_grid, run_sweep, SweepParam, SweepRequest};
use serde::de::DeserializeOwned;
use serde::Deserialize;
use serde_json::{json, Value};

use crate::error::ApiError;
use crate::AppState;

type Reply = Result<Json<Value>, ApiError>;

fn reply(request: Value, result: Value) -> Reply {
    Ok(Json(json!({ "request": request, "result": result })))
}

fn to_value<T: serde::Serialize>(x: &T) -> Value {
    serde_json::to_value(x).expect("serializable")
}

/// Content-type check, JSON syntax check, then typed decoding.
fn decode<T: DeserializeOwned>(headers: &HeaderMap, body: &Bytes) -> Result<T, ApiError> {
    let is_json = headers
        .get(header::CONTENT_TYPE)
        .and_then(|v| v.to_str().ok())
        .and_then(|v| v.split(';').next())
        .is_some_and(|m| m.trim().eq_ignore_ascii_case("application/json"));
    if !is_json {
        return Err(ApiError::UnsupportedMediaType);
    }
    let value: Value = serde_json::from_slice(body).map_err(|e| ApiError::Malformed {
        message: e.to_string(),
        line: e.line(),
        column: e.column(),
    })?;
    serde_path_to_error::deserialize(value).map_err(|e| {
        let path = e.path().to_string();
        let message = e.inner().to_string();
        // missing and unknown fields are reported against the enclosing object
        let field = match (message.split('`').nth(1), path.as_str()) {
            (Some(name), ".") if message.starts_with("missing field") => name.to_string(),
            (Some(name), ".") if message.starts_with("unknown field") => name.to_string(),
            _ => path,
        };
        ApiError::field(field, message)
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Deserialize)]
#[serde(rename_all = "lowercase")]
enum OutcomeName {
    #[default]
    Continuous,
    Ordinal,
    Binary,
}

/// Fields shared by the design, cluster-size and sweep endpoints.
///
/// The effect is given either as `effect: {"or": 2.05}` or as one
/// top-level key among `or`, `logodds`, `theta`, `sd`.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct DesignBody {
    alpha: Option<f64>,
    sided: Option<Sided>,
    power: Option<f64>,
    allocation: Option<f64>,
    effect: Option<EffectSize>,
    or: Option<f64>,
    logodds: Option<f64>,
    theta: Option<f64>,
    sd: Option<f64>,
    #[serde(default)]
    outcome: OutcomeName,
    props: Option<Vec<f64>>,
    control_rate: Option<f64>,
    k: Option<u64>,
    gamma: Option<f64>,
    m_total: Option<u64>,
    vary: Option<SweepParam>,
    grid: Option<Grid>,
}

#[derive(Debug, Deserialize)]
#[serde(untagged)]
enum Grid {
    Values(Vec<f64>),
    Range(String),
}

impl DesignBody {
    fn reject(&self, endpoint: &str, fields: &[(&str, bool)]) -> Result<(), ApiError> {
        match fields.iter().find(|(_, present)| *present) {
            Some((name, _)) => Err(ApiError::field(
                *name,
                format!("`{name}` is not accepted by {endpoint}"),
            )),
            None => Ok(()),
        }
    }

    fn effect(&self) -> Result<Option<EffectSize>, ApiError> {
        let given: Vec<EffectSize> = [
            self.effect,
            self.or.map(EffectSize::OddsRatio),
            self.logodds.map(EffectSize::LogOdds),
            self.theta.map(EffectSize::ProbIndex),
            self.sd.map(EffectSize::LatentSd),
        ]
        .into_iter()
        .flatten()
        .collect();
        match given.as_slice() {
            [] => Ok(None),
            [e] => Ok(Some(*e)),
            _ => Err(ApiError::field(
                "effect",
                "give exactly one of effect, or, logodds, theta, sd",
            )),
        }
    }

    fn power(&self) -> Result<f64, ApiError> {
        self.power
            .ok_or_else(|| ApiError::field("power", "missing field `power`"))
    }

    fn spec(&self) -> Result<DesignSpec, ApiError> {
        let effect = self
            .effect()?
            .ok_or_else(|| ApiError::field("effect", "an effect size is required"))?;
        let spec = DesignSpec::new(
            self.alpha.unwrap_or(0.05),
            self.sided.unwrap_or_default(),
            self.power()?,
            self.allocation.unwrap_or(1.0),
            effect,
        )?;
        Ok(spec)
    }

    fn outcome(&self) -> Result<Outcome, ApiError> {
        match self.outcome {
            OutcomeName::Continuous | OutcomeName::Binary if self.props.is_some() => Err(
                ApiError::field("props", "props applies only to ordinal outcomes"),
            ),
            OutcomeName::Continuous | OutcomeName::Ordinal if self.control_rate.is_some() => {
                Err(ApiError::field(
                    "control_rate",
                    "control_rate applies only to binary outcomes",
                ))
            }
            OutcomeName::Continuous => Ok(Outcome::Continuous),
            OutcomeName::Ordinal => {
                let props = self
                    .props
                    .clone()
                    .ok_or_else(|| ApiError::field("props", "ordinal outcomes need props"))?;
                let dist = OrdinalDistribution::normalized(props)
                    .map_err(|e| ApiError::field("props", e.to_string()))?;
                Ok(Outcome::Ordinal(dist))
            }
            OutcomeName::Binary => {
                let control_rate = self.control_rate.ok_or_else(|| {
                    ApiError::field("control_rate", "binary outcomes need control_rate")
                })?;
                Ok(Outcome::Binary { control_rate })
            }
        }
    }
}

fn insert_outcome(echo: &mut serde_json::Map<String, Value>, outcome: &Outcome) {
    match outcome {
        Outcome::Continuous => {
            echo.insert("outcome".into(), json!("continuous"));
        }
        Outcome::Ordinal(d) => {
            echo.insert("outcome".into(), json!("ordinal"));
            echo.insert("props".into(), json!(d.probs()));
        }
        Outcome::Binary { control_rate } => {
            echo.insert("outcome".into(), json!("binary"));
            echo.insert("control_rate".into(), json!(control_rate));
        }
    }
}

/// Canonical form of the shared design inputs.
fn design_echo(spec: &DesignSpec, outcome: &Outcome) -> serde_json::Map<String, Value> {
    let mut echo = match to_value(spec) {
        Value::Object(m) => m,
        _ => unreachable!("DesignSpec serializes to an object"),
    };
    insert_outcome(&mut echo, outcome);
    echo
}

pub async fn design(headers: HeaderMap, body: Bytes) -> Reply {
    let b: DesignBody = decode(&headers, &body)?;
    b.reject(
        "/v1/design",
        &[
            ("m_total", b.m_total.is_some()),
            ("vary", b.vary.is_some()),
            ("grid", b.grid.is_some()),
        ],
    )?;
    let spec = b.spec()?;
    let outcome = b.outcome()?;
    let cluster = match (b.k, b.gamma) {
        (Some(k), Some(g)) => Some(ClusterSpec::new(k, g)?),
        (None, None) => None,
        (Some(_), None) => return Err(ApiError::field("gamma", "k needs gamma")),
        (None, Some(_)) => return Err(ApiError::field("k", "gamma needs k")),
    };
    let r = sample_size(&spec, &outcome, cluster.as_ref())?;
    let mut echo = design_echo(&spec, &outcome);
    let mut result = match to_value(&r) {
        Value::Object(m) => m,
        _ => unreachable!("SampleSizeResult serializes to an object"),
    };
    result.insert("n_total_rounded".into(), json!(r.total()));
    if let Some(cl) = cluster {
        echo.insert("k".into(), json!(cl.k));
        echo.insert("gamma".into(), json!(cl.gamma));
        if r.clusters_experiment == r.clusters_control {
            result.insert("clusters_per_arm".into(), json!(r.clusters_experiment));
        }
        result.insert("clusters_total".into(), json!(r.clusters_total()));
    }
    reply(Value::Object(echo), Value::Object(result))
}

pub async fn cluster_size_handler(headers: HeaderMap, body: Bytes) -> Reply {
    let b: DesignBody = decode(&headers, &body)?;
    b.reject(
        "/v1/cluster-size",
        &[
            ("k", b.k.is_some()),
            ("vary", b.vary.is_some()),
            ("grid", b.grid.is_some()),
        ],
    )?;
    let spec = b.spec()?;
    let outcome = b.outcome()?;
    let m = b
        .m_total
        .ok_or_else(|| ApiError::field("m_total", "missing field `m_total`"))?;
    let gamma = b
        .gamma
        .ok_or_else(|| ApiError::field("gamma", "missing field `gamma`"))?;
    let k = cluster_size(&spec, &outcome, m, gamma)?;
    let mut echo = design_echo(&spec, &outcome);
    echo.insert("m_total".into(), json!(m));
    echo.insert("gamma".into(), json!(gamma));
    reply(Value::Object(echo), json!({ "k": k, "clusters_total": m }))
}

pub async fn sweep(headers: HeaderMap, body: Bytes) -> Reply {
    let b: DesignBody = decode(&headers, &body)?;
    let vary = b
        .vary
        .ok_or_else(|| ApiError::field("vary", "missing field `vary`"))?;
    let grid = match &b.grid {
        Some(Grid::Values(v)) => v.clone(),
        Some(Grid::Range(s)) => {
            parse_grid(s).map_err(|e| ApiError::field("grid", e.to_string()))?
        }
        None => return Err(ApiError::field("grid", "missing field `grid`")),
    };
    let req = SweepRequest {
        vary,
        grid,
        alpha: b.alpha.unwrap_or(0.05),
        sided: b.sided.unwrap_or_default(),
        power: b.power()?,
        allocation: b.allocation.unwrap_or(1.0),
        effect: b.effect()?,
        outcome: b.outcome()?,
        k: b.k,
        gamma: b.gamma,
        m: b.m_total,
    };
    let rows = run_sweep(&req)?;
    let mut echo = serde_json::Map::new();
    echo.insert("vary".into(), json!(req.vary));
    echo.insert("grid".into(), json!(req.grid));
    echo.insert("alpha".into(), json!(req.alpha));
    echo.insert("sided".into(), json!(req.sided));
    echo.insert("power".into(), json!(req.power));
    echo.insert("allocation".into(), json!(req.allocation));
    if let Some(effect) = req.effect {
        echo.insert("effect".into(), json!(effect));
    }
    insert_outcome(&mut echo, &req.outcome);
    for (name, v) in [
        ("k", json!(req.k)),
        ("gamma", json!(req.gamma)),
        ("m_total", json!(req.m)),
    ] {
        if !v.is_null() {
            echo.insert(name.into(), v);
        }
    }
    reply(Value::Object(echo), to_value(&rows))
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ConvertBody {
    from: EffectSize,
    to: Option<Vec<EffectKind>>,
}

pub async fn convert(headers: HeaderMap, body: Bytes) -> Reply {
    let b: ConvertBody = decode(&headers, &body)?;
    b.from
        .validate()
        .map_err(|e| ApiError::field(format!("from.{}", b.from.kind().as_str()), e.to_string()))?;
    let kinds = b.to.unwrap_or_else(|| EffectKind::ALL.to_vec());
    if kinds.is_empty() {
        return Err(ApiError::field("to", "at least one target kind is needed"));
    }
    let mut result = serde_json::Map::new();
    for kind in &kinds {
        result.insert(kind.as_str().into(), json!(b.from.convert(*kind)?.value()));
    }
    reply(
        json!({ "from": b.from, "to": kinds }),
        Value::Object(result),
    )
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct DeffBody {
    k: u64,
    gamma: Option<f64>,
    rho: Option<f64>,
    theta: Option<f64>,
    clusters_per_arm: Option<u64>,
}

pub async fn deff(headers: HeaderMap, body: Bytes) -> Reply {
    let b: DeffBody = decode(&headers, &body)?;
    let gamma = match (b.gamma, b.rho) {
        (Some(g), _) => g,
        (None, Some(r)) => latent_to_rank_icc(r)?,
        (None, None) => return Err(ApiError::field("gamma", "give gamma or rho")),
    };
    let cl = ClusterSpec::new(b.k, gamma)?;
    let mut echo = json!({ "k": b.k, "gamma": gamma });
    let mut result = json!({ "deff": deff_approx(cl.gamma, cl.k) });
    match (b.rho, b.clusters_per_arm) {
        (Some(rho), Some(m)) => {
            let theta = b.theta.unwrap_or(0.5);
            echo["rho"] = json!(rho);
            echo["theta"] = json!(theta);
            echo["clusters_per_arm"] = json!(m);
            result["deff_exact"] = json!(deff_exact(theta, rho, b.k, m, m)?);
        }
        (None, Some(_)) => return Err(ApiError::field("rho", "the exact design effect needs rho")),
        (Some(rho), None) => echo["rho"] = json!(rho),
        (None, None) => {}
    }
    if b.theta.is_some() && b.clusters_per_arm.is_none() {
        return Err(ApiError::field(
            "theta",
            "theta applies only to the exact design effect",
        ));
    }
    reply(echo, result)
}

pub async fn simulate(State(state): State<AppState>, headers: HeaderMap, body: Bytes) -> Reply {
    let scenario: SimulationScenario = decode(&headers, &body)?;
    if scenario.replications > state.max_replications {
        return Err(ApiError::ReplicationCap {
            requested: scenario.replications,
            cap: state.max_replications,
        });
    }
    scenario.validate()?;
    let pool = state.pool.clone();
    let job = scenario.clone();
    let r = tokio::task::spawn_blocking(move || pool.install(|| estimate_power(&job)))
        .await
        .map_err(|e| ApiError::Internal(e.to_string()))??;
    reply(to_value(&scenario), to_value(&r))
}
