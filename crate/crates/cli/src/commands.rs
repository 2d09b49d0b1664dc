use std::path::Path;

use rankdesign::design::{
    cluster_size, deff_approx, deff_exact, sample_size, ClusterSpec, DesignSpec,
    OrdinalDistribution, Outcome, Sided,
};
use rankdesign::effects::{EffectKind, EffectSize};
use rankdesign::sim::{estimate_power, estimate_power_with_workers, SimulationScenario};
use rankdesign::stats::latent_to_rank_icc;
use rankdesign::sweep::{parse_grid, run_sweep, SweepParam, SweepRequest};
use serde_json::{json, Value};

use crate::error::{usage, CliError};
use crate::output::Output;
use crate::{DesignArgs, OutcomeArg};

/// Default seed for `simulate` when neither the document nor `--seed`
/// gives one.
pub const SEED_ENV: &str = "RANKDESIGN_SEED";

const SWEEP_COLUMNS: [&str; 8] = [
    "value",
    "n_total",
    "n_experiment",
    "n_control",
    "clusters_experiment",
    "clusters_control",
    "cluster_size",
    "infeasible",
];

fn parse_effect(s: &str) -> Result<EffectSize, CliError> {
    s.parse::<EffectSize>().map_err(CliError::from)
}

fn parse_props(text: &str, sep: char) -> Result<Vec<f64>, CliError> {
    text.split(sep)
        .map(str::trim)
        .filter(|t| !t.is_empty() && !t.starts_with('#'))
        .map(|t| {
            t.parse::<f64>()
                .map_err(|_| usage(format!("bad proportion {t:?}")))
        })
        .collect()
}

fn outcome(args: &DesignArgs) -> Result<Outcome, CliError> {
    let props = match (&args.props, &args.props_file) {
        (Some(p), _) => Some(parse_props(p, ',')?),
        (None, Some(path)) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| usage(format!("cannot read {}: {e}", path.display())))?;
            Some(parse_props(&text, '\n')?)
        }
        (None, None) => None,
    };
    match args.outcome {
        OutcomeArg::Continuous | OutcomeArg::Binary if props.is_some() => {
            Err(usage("--props applies only to ordinal outcomes"))
        }
        OutcomeArg::Continuous | OutcomeArg::Ordinal if args.control_rate.is_some() => {
            Err(usage("--control-rate applies only to binary outcomes"))
        }
        OutcomeArg::Continuous => Ok(Outcome::Continuous),
        OutcomeArg::Ordinal => {
            let p = props.ok_or_else(|| usage("ordinal outcomes need --props or --props-file"))?;
            Ok(Outcome::Ordinal(OrdinalDistribution::normalized(p)?))
        }
        OutcomeArg::Binary => {
            let control_rate = args
                .control_rate
                .ok_or_else(|| usage("binary outcomes need --control-rate"))?;
            Ok(Outcome::Binary { control_rate })
        }
    }
}

fn sided(s: &str) -> Result<Sided, CliError> {
    s.parse::<Sided>().map_err(CliError::from)
}

fn num(x: f64) -> Value {
    json!(x)
}

pub fn design(
    args: &DesignArgs,
    effect: &str,
    k: Option<u64>,
    m: Option<u64>,
) -> Result<Output, CliError> {
    let spec = DesignSpec::new(
        args.alpha,
        sided(&args.sided)?,
        args.power,
        args.allocation,
        parse_effect(effect)?,
    )?;
    let outcome = outcome(args)?;
    match (k, m, args.gamma) {
        (Some(_), Some(_), _) => Err(usage("give either --k or --m, not both")),
        (None, None, Some(_)) => Err(usage("--gamma needs --k or --m")),
        (Some(_), None, None) | (None, Some(_), None) => Err(usage("--k and --m need --gamma")),
        (None, Some(m), Some(gamma)) => {
            let k = cluster_size(&spec, &outcome, m, gamma)?;
            Ok(Output::record([
                ("clusters_total", json!(m)),
                ("gamma", num(gamma)),
                ("cluster_size", json!(k)),
            ]))
        }
        (k, None, gamma) => {
            let cl = match (k, gamma) {
                (Some(k), Some(g)) => Some(ClusterSpec::new(k, g)?),
                _ => None,
            };
            let r = sample_size(&spec, &outcome, cl.as_ref())?;
            let mut fields = vec![
                ("n_total", num(r.n_total)),
                ("n_experiment", json!(r.n_experiment)),
                ("n_control", json!(r.n_control)),
                ("n_total_rounded", json!(r.total())),
            ];
            if let Some(cl) = cl {
                fields.extend([
                    ("cluster_size", json!(cl.k)),
                    ("clusters_experiment", json!(r.clusters_experiment)),
                    ("clusters_control", json!(r.clusters_control)),
                    ("design_effect", json!(r.design_effect)),
                ]);
            }
            Ok(Output::record(fields))
        }
    }
}

pub fn convert(from: &str, to: Option<&str>) -> Result<Output, CliError> {
    let effect = parse_effect(from)?;
    let kinds: Vec<EffectKind> = match to {
        None => EffectKind::ALL.to_vec(),
        Some(list) => list
            .split(',')
            .map(|k| k.parse::<EffectKind>().map_err(CliError::from))
            .collect::<Result<_, _>>()?,
    };
    if kinds.is_empty() {
        return Err(usage("--to lists no kinds"));
    }
    let fields = kinds
        .into_iter()
        .map(|k| Ok((k.as_str(), num(effect.convert(k)?.value()))))
        .collect::<Result<Vec<_>, CliError>>()?;
    Ok(Output::record(fields))
}

pub fn deff(
    k: u64,
    gamma: Option<f64>,
    rho: Option<f64>,
    theta: f64,
    clusters: Option<u64>,
) -> Result<Output, CliError> {
    let gamma = match (gamma, rho) {
        (Some(g), _) => g,
        (None, Some(r)) => latent_to_rank_icc(r)?,
        (None, None) => return Err(usage("give --gamma or --rho")),
    };
    let cl = ClusterSpec::new(k, gamma)?;
    let mut fields = vec![
        ("k", json!(k)),
        ("gamma", num(gamma)),
        ("deff", num(deff_approx(cl.gamma, cl.k))),
    ];
    if let (Some(rho), Some(m)) = (rho, clusters) {
        fields.extend([
            ("rho", num(rho)),
            ("theta", num(theta)),
            ("clusters_per_arm", json!(m)),
            ("deff_exact", num(deff_exact(theta, rho, k, m, m)?)),
        ]);
    }
    Ok(Output::record(fields))
}

fn line_col(text: &str, e: &serde_json::Error) -> String {
    let line = text.lines().nth(e.line().saturating_sub(1)).unwrap_or("");
    format!("line {} column {}: {e}\n  {line}", e.line(), e.column())
}

/// Reads a scenario document. Seed precedence: `flag`, then the document,
/// then `env_seed`.
pub fn load_scenario(
    path: &Path,
    flag: Option<u64>,
    env_seed: Option<&str>,
) -> Result<SimulationScenario, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
    let mut doc: Value = serde_json::from_str(&text)
        .map_err(|e| CliError::Config(format!("{}: {}", path.display(), line_col(&text, &e))))?;
    let obj = doc
        .as_object_mut()
        .ok_or_else(|| CliError::Config("the scenario must be a JSON object".into()))?;
    let seed = match (flag, obj.contains_key("seed"), env_seed) {
        (Some(s), _, _) => Some(s),
        (None, true, _) => None,
        (None, false, Some(env)) => Some(env.trim().parse::<u64>().map_err(|_| {
            CliError::Config(format!("{SEED_ENV}={env:?} is not an unsigned integer"))
        })?),
        (None, false, None) => {
            return Err(CliError::Config(format!(
                "missing field `seed` (or set --seed or {SEED_ENV})"
            )))
        }
    };
    if let Some(s) = seed {
        obj.insert("seed".into(), json!(s));
    }
    let scenario: SimulationScenario = serde_json::from_value(doc).map_err(|e| {
        // re-parse the text to locate the offending field
        let located = match serde_json::from_str::<SimulationScenario>(&text) {
            Err(t) if t.line() > 0 && !t.to_string().starts_with("missing field `seed`") => {
                line_col(&text, &t)
            }
            _ => e.to_string(),
        };
        CliError::Config(format!("{}: {located}", path.display()))
    })?;
    scenario
        .validate()
        .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
    Ok(scenario)
}

pub fn simulate(
    path: &Path,
    seed: Option<u64>,
    env_seed: Option<&str>,
    workers: Option<usize>,
) -> Result<Output, CliError> {
    let scenario = load_scenario(path, seed, env_seed)?;
    let r = match workers {
        Some(w) => estimate_power_with_workers(&scenario, w)?,
        None => estimate_power(&scenario)?,
    };
    Ok(Output::record([
        ("rejections", json!(r.rejections)),
        ("replications", json!(r.replications)),
        ("power_hat", num(r.power_hat)),
        ("mc_stderr", num(r.mc_stderr)),
        ("seed", json!(scenario.seed)),
        ("fingerprint", json!(r.fingerprint)),
    ]))
}

pub fn sweep(
    args: &DesignArgs,
    vary: &str,
    grid: &str,
    effect: Option<&str>,
    k: Option<u64>,
    m: Option<u64>,
) -> Result<Output, CliError> {
    let req = SweepRequest {
        vary: vary.parse::<SweepParam>()?,
        grid: parse_grid(grid)?,
        alpha: args.alpha,
        sided: sided(&args.sided)?,
        power: args.power,
        allocation: args.allocation,
        effect: effect.map(parse_effect).transpose()?,
        outcome: outcome(args)?,
        k,
        gamma: args.gamma,
        m,
    };
    let rows = run_sweep(&req)?;
    Ok(Output::rows_from(&rows, &SWEEP_COLUMNS))
}
