use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{canonical, midranks, Arm, TrialDataset};
use crate::error::{Error, Result};

/// Empirical ridits `{F(x) + F(x-)}/2`: midrank minus one half, over N.
/// They average exactly one half.
pub fn ridits(data: &TrialDataset) -> Vec<f64> {
    ridits_of(&data.values())
}

fn ridits_of(values: &[f64]) -> Vec<f64> {
    let n = values.len() as f64;
    midranks(values)
        .0
        .into_iter()
        .map(|r| (r - 0.5) / n)
        .collect()
}

/// How the size-group estimates are weighted in the clustered estimator.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WeightScheme {
    /// Inverse cluster-bootstrap variance, resampling clusters within arm.
    Bootstrap {
        resamples: usize,
        seed: u64,
    },
    /// Inverse variance of θ̂ over random re-assignment of the group's
    /// clusters to arms. Invariant to the observed labels.
    PermutationNull,
    Equal,
}

impl Default for WeightScheme {
    fn default() -> Self {
        WeightScheme::Bootstrap {
            resamples: 2000,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SizeGroupEstimate {
    pub size: u64,
    pub clusters_control: usize,
    pub clusters_experiment: usize,
    pub theta_hat: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub variance: Option<f64>,
    /// Normalized to sum to one over the groups.
    pub weight: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThetaEstimate {
    pub theta_hat: f64,
    /// Empty for the independent estimator.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub groups: Vec<SizeGroupEstimate>,
    /// Cluster sizes present in only one arm.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub dropped_sizes: Vec<u64>,
    /// Set when variance weights were replaced by equal weights.
    #[serde(default)]
    pub equal_weight_fallback: bool,
}

/// `U` counting experiment-over-control pairs (ties one half), from the
/// experiment rank sum.
fn mann_whitney_u(values: &[f64], arms: &[Arm]) -> (f64, f64, f64) {
    let (ranks, _) = midranks(values);
    let mut rank_sum = 0.0;
    let mut n1 = 0.0;
    for (r, a) in ranks.iter().zip(arms) {
        if *a == Arm::Experiment {
            rank_sum += r;
            n1 += 1.0;
        }
    }
    let n0 = values.len() as f64 - n1;
    (rank_sum - n1 * (n1 + 1.0) / 2.0, n0, n1)
}

/// `θ̂ = U / (n0 n1)`, the Mann-Whitney estimate of `P(X < Y) + P(X = Y)/2`
/// with X from control and Y from experiment.
pub fn theta_hat_independent(data: &TrialDataset) -> Result<ThetaEstimate> {
    let values = data.values();
    let arms: Vec<Arm> = data.records().iter().map(|r| r.arm).collect();
    let (u, n0, n1) = mann_whitney_u(&values, &arms);
    if n0 == 0.0 || n1 == 0.0 {
        return Err(Error::InvalidInput("both arms need observations".into()));
    }
    Ok(ThetaEstimate {
        theta_hat: u / (n0 * n1),
        groups: Vec::new(),
        dropped_sizes: Vec::new(),
        equal_weight_fallback: false,
    })
}

/// Clusters of one size, ranked among themselves.
pub(crate) struct SizeGroup {
    pub size: u64,
    pub arms: Vec<Arm>,
    /// Per-cluster sums of midranks within the group.
    pub rank_sums: Vec<f64>,
    /// Per-cluster sorted values (for the bootstrap kernel).
    pub values: Vec<Vec<f64>>,
    pub m0: usize,
    pub m1: usize,
}

impl SizeGroup {
    fn n0(&self) -> f64 {
        (self.m0 as u64 * self.size) as f64
    }

    fn n1(&self) -> f64 {
        (self.m1 as u64 * self.size) as f64
    }

    /// θ̂ for an assignment of the group's clusters to arms with `m1`
    /// experiment clusters.
    pub fn theta_for(&self, arms: &[Arm]) -> f64 {
        let r: f64 = self
            .rank_sums
            .iter()
            .zip(arms)
            .filter(|(_, a)| **a == Arm::Experiment)
            .map(|(r, _)| r)
            .sum();
        let (n0, n1) = (self.n0(), self.n1());
        (r - n1 * (n1 + 1.0) / 2.0) / (n0 * n1)
    }

    pub fn theta(&self) -> f64 {
        self.theta_for(&self.arms)
    }

    /// Variance of θ̂ over uniformly random assignments with the group's
    /// arm totals: `m0 m1 / M · S² / (n0 n1)²`, `S²` the sample variance of
    /// the cluster rank sums.
    pub fn permutation_variance(&self) -> f64 {
        let m = self.rank_sums.len() as f64;
        let mean = self.rank_sums.iter().sum::<f64>() / m;
        let s2 = self
            .rank_sums
            .iter()
            .map(|r| (r - mean).powi(2))
            .sum::<f64>()
            / (m - 1.0);
        let nn = self.n0() * self.n1();
        self.m0 as f64 * self.m1 as f64 / m * s2 / (nn * nn)
    }

    fn bootstrap_variance(&self, resamples: usize, rng: &mut ChaCha8Rng) -> f64 {
        let control: Vec<&Vec<f64>> = self.arm_values(Arm::Control);
        let experiment: Vec<&Vec<f64>> = self.arm_values(Arm::Experiment);
        // kernel[c][e] = Σ_{x∈c, y∈e} U(x, y)
        let kernel: Vec<Vec<f64>> = control
            .iter()
            .map(|c| experiment.iter().map(|e| pair_kernel(c, e)).collect())
            .collect();
        let nn = self.n0() * self.n1();
        let mut w = vec![0.0; control.len()];
        let mut v = vec![0.0; experiment.len()];
        let mut draws = Vec::with_capacity(resamples);
        for _ in 0..resamples {
            w.iter_mut().for_each(|x| *x = 0.0);
            v.iter_mut().for_each(|x| *x = 0.0);
            for _ in 0..control.len() {
                w[rng.random_range(0..control.len())] += 1.0;
            }
            for _ in 0..experiment.len() {
                v[rng.random_range(0..experiment.len())] += 1.0;
            }
            let mut total = 0.0;
            for (wc, row) in w.iter().zip(&kernel) {
                if *wc > 0.0 {
                    total += wc * row.iter().zip(&v).map(|(k, ve)| k * ve).sum::<f64>();
                }
            }
            draws.push(total / nn);
        }
        sample_variance(&draws)
    }

    fn arm_values(&self, arm: Arm) -> Vec<&Vec<f64>> {
        self.values
            .iter()
            .zip(&self.arms)
            .filter(|(_, a)| **a == arm)
            .map(|(v, _)| v)
            .collect()
    }
}

/// `Σ_{x∈a, y∈b} [x < y] + [x = y]/2` for sorted slices.
fn pair_kernel(a: &[f64], b: &[f64]) -> f64 {
    let mut total = 0.0;
    for &y in b {
        let below = a.partition_point(|&x| x < y);
        let upto = a.partition_point(|&x| x <= y);
        total += below as f64 + 0.5 * (upto - below) as f64;
    }
    total
}

fn sample_variance(xs: &[f64]) -> f64 {
    let n = xs.len() as f64;
    if n < 2.0 {
        return 0.0;
    }
    let mean = xs.iter().sum::<f64>() / n;
    xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)
}

/// Groups clusters by size; sizes with clusters in one arm only are
/// returned separately.
pub(crate) fn size_groups(data: &TrialDataset) -> (Vec<SizeGroup>, Vec<u64>) {
    let records = data.records();
    let mut by_size: BTreeMap<u64, Vec<(Arm, Vec<f64>)>> = BTreeMap::new();
    for c in data.clusters() {
        let mut vals: Vec<f64> = c
            .members
            .iter()
            .map(|&i| canonical(records[i].value))
            .collect();
        vals.sort_by(f64::total_cmp);
        by_size
            .entry(vals.len() as u64)
            .or_default()
            .push((c.arm, vals));
    }
    let mut groups = Vec::new();
    let mut dropped = Vec::new();
    for (size, clusters) in by_size {
        let m1 = clusters
            .iter()
            .filter(|(a, _)| *a == Arm::Experiment)
            .count();
        let m0 = clusters.len() - m1;
        if m0 == 0 || m1 == 0 {
            dropped.push(size);
            continue;
        }
        let pooled: Vec<f64> = clusters
            .iter()
            .flat_map(|(_, v)| v.iter().copied())
            .collect();
        let (ranks, _) = midranks(&pooled);
        let k = size as usize;
        let rank_sums = ranks.chunks(k).map(|c| c.iter().sum()).collect();
        let (arms, values) = clusters.into_iter().unzip();
        groups.push(SizeGroup {
            size,
            arms,
            rank_sums,
            values,
            m0,
            m1,
        });
    }
    (groups, dropped)
}

/// Normalized inverse-variance weights; zero-variance groups get weight 0,
/// and equal weights are used if every group has zero variance.
pub(crate) fn inverse_variance_weights(variances: &[f64]) -> Vec<f64> {
    let inv: Vec<f64> = variances
        .iter()
        .map(|&v| if v > 0.0 { 1.0 / v } else { 0.0 })
        .collect();
    let total: f64 = inv.iter().sum();
    if total > 0.0 {
        inv.iter().map(|w| w / total).collect()
    } else {
        vec![1.0 / variances.len() as f64; variances.len()]
    }
}

const MIN_CLUSTERS_FOR_WEIGHTS: usize = 4;

/// Weighted combination of θ̂ computed separately within each cluster-size
/// group.
pub fn theta_hat_clustered(data: &TrialDataset, scheme: WeightScheme) -> Result<ThetaEstimate> {
    let (groups, dropped_sizes) = size_groups(data);
    if groups.is_empty() {
        return Err(Error::InvalidInput(
            "no cluster size occurs in both arms".into(),
        ));
    }
    let thetas: Vec<f64> = groups.iter().map(SizeGroup::theta).collect();
    let too_small = groups
        .iter()
        .any(|g| g.m0 + g.m1 < MIN_CLUSTERS_FOR_WEIGHTS);
    let variances: Option<Vec<f64>> = match scheme {
        WeightScheme::Equal => None,
        _ if groups.len() > 1 && too_small => None,
        WeightScheme::PermutationNull => {
            Some(groups.iter().map(SizeGroup::permutation_variance).collect())
        }
        WeightScheme::Bootstrap { resamples, seed } => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            Some(
                groups
                    .iter()
                    .map(|g| g.bootstrap_variance(resamples.max(2), &mut rng))
                    .collect(),
            )
        }
    };
    let equal_weight_fallback = variances.is_none() && scheme != WeightScheme::Equal;
    let weights = match &variances {
        Some(v) => inverse_variance_weights(v),
        None => vec![1.0 / groups.len() as f64; groups.len()],
    };
    let theta_hat = thetas.iter().zip(&weights).map(|(t, w)| t * w).sum::<f64>();
    let groups = groups
        .iter()
        .enumerate()
        .map(|(i, g)| SizeGroupEstimate {
            size: g.size,
            clusters_control: g.m0,
            clusters_experiment: g.m1,
            theta_hat: thetas[i],
            variance: variances.as_ref().map(|v| v[i]),
            weight: weights[i],
        })
        .collect();
    Ok(ThetaEstimate {
        theta_hat: theta_hat.clamp(0.0, 1.0),
        groups,
        dropped_sizes,
        equal_weight_fallback,
    })
}

/// Rank intraclass correlation: the product-moment correlation of ridits
/// over all ordered pairs of distinct members of the same cluster. Ridits
/// are computed within each arm so that a treatment effect does not
/// masquerade as clustering.
pub fn rank_icc_estimate(data: &TrialDataset) -> Result<f64> {
    let records = data.records();
    let mut ridit = vec![0.0; records.len()];
    for arm in [Arm::Control, Arm::Experiment] {
        let idx: Vec<usize> = (0..records.len())
            .filter(|&i| records[i].arm == arm)
            .collect();
        let vals: Vec<f64> = idx.iter().map(|&i| records[i].value).collect();
        for (&i, r) in idx.iter().zip(ridits_of(&vals)) {
            ridit[i] = r;
        }
    }
    let clusters: Vec<Vec<f64>> = data
        .clusters()
        .into_iter()
        .map(|c| c.members.iter().map(|&i| ridit[i]).collect())
        .collect();
    pairwise_correlation(&clusters)
}

/// [`rank_icc_estimate`] for clusters from a single arm.
pub fn rank_icc_single_arm(clusters: &[Vec<f64>]) -> Result<f64> {
    let flat: Vec<f64> = clusters.iter().flatten().copied().collect();
    let r = ridits_of(&flat);
    let mut it = r.into_iter();
    let grouped: Vec<Vec<f64>> = clusters
        .iter()
        .map(|c| it.by_ref().take(c.len()).collect())
        .collect();
    pairwise_correlation(&grouped)
}

/// Pearson correlation over ordered within-cluster pairs, in closed form.
fn pairwise_correlation(clusters: &[Vec<f64>]) -> Result<f64> {
    let pairs: f64 = clusters
        .iter()
        .map(|c| (c.len() * c.len().saturating_sub(1)) as f64)
        .sum();
    if pairs == 0.0 {
        return Err(Error::InvalidInput(
            "no cluster has two or more members".into(),
        ));
    }
    // each member appears in (k - 1) pairs in each position
    let mean = clusters
        .iter()
        .map(|c| (c.len() as f64 - 1.0) * c.iter().sum::<f64>())
        .sum::<f64>()
        / pairs;
    let mut var = 0.0;
    let mut cov = 0.0;
    for c in clusters {
        let k = c.len() as f64;
        let dev_sum: f64 = c.iter().map(|r| r - mean).sum();
        let dev_sq: f64 = c.iter().map(|r| (r - mean).powi(2)).sum();
        var += (k - 1.0) * dev_sq;
        cov += dev_sum * dev_sum - dev_sq;
    }
    if var <= 0.0 {
        return Err(Error::InvalidInput(
            "ridits do not vary within paired observations".into(),
        ));
    }
    Ok((cov / var).clamp(-1.0, 1.0))
}
