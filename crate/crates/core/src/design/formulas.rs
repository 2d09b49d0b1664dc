use super::{check_gamma, ClusterSpec, DesignSpec, OrdinalDistribution, SampleSizeResult};
use crate::error::{Error, Result};

/// `S = 3(A+1)²(z_{1-α*} + z_{1-β})² / (2Aδ²)`.
pub fn s_factor(spec: &DesignSpec) -> Result<f64> {
    let d = spec.log_odds()?;
    let z = spec.z_sum()?;
    Ok(3.0 * spec.allocation_factor() * z * z / (2.0 * d * d))
}

fn ordinal_total(spec: &DesignSpec, dist: &OrdinalDistribution) -> Result<f64> {
    let s = s_factor(spec)?;
    let tie = dist.tie_factor();
    if tie <= 1e-12 {
        return Err(Error::InvalidInput(
            "all mass in one category: the ordinal formula has a zero denominator".into(),
        ));
    }
    Ok(2.0 * s / tie)
}

/// Whitehead's proportional-odds sample size for an individually randomized
/// trial with an ordinal outcome.
pub fn n_individual_ordinal(
    spec: &DesignSpec,
    dist: &OrdinalDistribution,
) -> Result<SampleSizeResult> {
    let n = ordinal_total(spec, dist)?;
    Ok(SampleSizeResult::individual(n, spec.allocation))
}

/// Continuous-outcome limit: the root of `n(1 - 1/n²) = 2S`, i.e.
/// `n = √(1 + S²) + S`.
pub fn n_individual_continuous(spec: &DesignSpec) -> Result<SampleSizeResult> {
    let s = s_factor(spec)?;
    Ok(SampleSizeResult::individual(
        s.hypot(1.0) + s,
        spec.allocation,
    ))
}

/// Individual ordinal size inflated by `1 + γ(k - 1)`.
pub fn n_cluster_ordinal(
    spec: &DesignSpec,
    dist: &OrdinalDistribution,
    cl: &ClusterSpec,
) -> Result<SampleSizeResult> {
    cl.validate()?;
    let n = ordinal_total(spec, dist)? * cl.design_effect();
    Ok(SampleSizeResult::clustered(n, spec.allocation, *cl))
}

/// `n = √(1 + S²D²) + SD` with `D = 1 + γ(k - 1)`.
pub fn n_cluster_continuous(spec: &DesignSpec, cl: &ClusterSpec) -> Result<SampleSizeResult> {
    cl.validate()?;
    let sd = s_factor(spec)? * cl.design_effect();
    Ok(SampleSizeResult::clustered(
        sd.hypot(1.0) + sd,
        spec.allocation,
        *cl,
    ))
}

fn check_m(m_total: u64) -> Result<f64> {
    if m_total < 2 {
        return Err(Error::InvalidInput(
            "at least two clusters are needed".into(),
        ));
    }
    Ok(m_total as f64)
}

fn no_finite_k(m_total: u64) -> Error {
    Error::Infeasible(format!(
        "there is no finite cluster size that achieves the desired power with {m_total} clusters"
    ))
}

/// Smallest cluster size for `m_total` clusters, ordinal outcome:
/// `k = ⌈2S(1-γ) / (m(1 - Σπ̄³) - 2γS)⌉`.
pub fn k_given_m_ordinal(
    spec: &DesignSpec,
    dist: &OrdinalDistribution,
    m_total: u64,
    gamma: f64,
) -> Result<u64> {
    check_gamma(gamma)?;
    let m = check_m(m_total)?;
    let s = s_factor(spec)?;
    let denom = m * dist.tie_factor() - 2.0 * gamma * s;
    if denom <= 0.0 {
        return Err(no_finite_k(m_total));
    }
    Ok(super::ceil_count(2.0 * s * (1.0 - gamma) / denom).max(1))
}

/// Smallest cluster size for `m_total` clusters, continuous outcome.
pub fn k_given_m_continuous(spec: &DesignSpec, m_total: u64, gamma: f64) -> Result<u64> {
    check_gamma(gamma)?;
    let m = check_m(m_total)?;
    let s = s_factor(spec)?;
    let denom = m - 2.0 * gamma * s;
    if denom <= 0.0 {
        return Err(no_finite_k(m_total));
    }
    let b = s * (1.0 - gamma) / denom;
    let k = (1.0 / (m * denom) + b * b).sqrt() + b;
    Ok(super::ceil_count(k).max(1))
}
