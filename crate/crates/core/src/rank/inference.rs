use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::estimators::size_groups;
use super::{midranks, theta_hat_clustered, Arm, TrialDataset, WeightScheme};
use crate::design::Sided;
use crate::error::{Error, Result};
use crate::stats::phi;

/// Slack for comparing permutation statistics with the observed one.
const PERMUTATION_EPS: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TestResult {
    pub theta_hat: f64,
    /// Standardized statistic for normal-approximation tests.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub z: Option<f64>,
    pub p_value: f64,
}

/// Wilcoxon rank-sum test with the tie-corrected normal approximation and
/// no continuity correction. One-sided tests look for larger experiment
/// values.
pub fn wilcoxon_test_independent(data: &TrialDataset, sided: Sided) -> Result<TestResult> {
    let values = data.values();
    let (ranks, ties) = midranks(&values);
    let mut rank_sum = 0.0;
    let mut n1 = 0.0;
    for (r, rec) in ranks.iter().zip(data.records()) {
        if rec.arm == Arm::Experiment {
            rank_sum += r;
            n1 += 1.0;
        }
    }
    let n = values.len() as f64;
    let n0 = n - n1;
    if n0 == 0.0 || n1 == 0.0 {
        return Err(Error::InvalidInput("both arms need observations".into()));
    }
    let u = rank_sum - n1 * (n1 + 1.0) / 2.0;
    let theta_hat = u / (n0 * n1);
    let tie_sum: f64 = ties
        .iter()
        .map(|&t| {
            let t = t as f64;
            t * t * t - t
        })
        .sum();
    let var = n0 * n1 / 12.0 * ((n + 1.0) - tie_sum / (n * (n - 1.0)));
    if var <= 0.0 || n < 2.0 {
        return Ok(TestResult {
            theta_hat,
            z: Some(0.0),
            p_value: 1.0,
        });
    }
    let z = (u - n0 * n1 / 2.0) / var.sqrt();
    let p_value = match sided {
        Sided::Two => (2.0 * phi(-z.abs())).min(1.0),
        Sided::One => phi(-z),
    };
    Ok(TestResult {
        theta_hat,
        z: Some(z),
        p_value,
    })
}

fn check_permutation_inputs(data: &TrialDataset, reps: usize) -> Result<()> {
    if reps == 0 {
        return Err(Error::InvalidInput(
            "at least one permutation is needed".into(),
        ));
    }
    let clusters = data.clusters();
    for arm in [Arm::Control, Arm::Experiment] {
        if clusters.iter().filter(|c| c.arm == arm).count() < 2 {
            return Err(Error::InvalidInput(
                "a cluster randomization test needs at least two clusters per arm".into(),
            ));
        }
    }
    Ok(())
}

fn permutation_p(
    observed: f64,
    draws: impl Iterator<Item = f64>,
    sided: Sided,
    reps: usize,
) -> f64 {
    let extreme = match sided {
        Sided::Two => {
            let obs = (observed - 0.5).abs() - PERMUTATION_EPS;
            draws.filter(|t| (t - 0.5).abs() >= obs).count()
        }
        Sided::One => draws.filter(|t| *t >= observed - PERMUTATION_EPS).count(),
    };
    (1 + extreme) as f64 / (reps + 1) as f64
}

/// Randomization test of the clustered probabilistic index.
///
/// The statistic is [`theta_hat_clustered`] with
/// [`WeightScheme::PermutationNull`] weights. Arm labels are re-randomized
/// among clusters of the same size, which keeps every size group's arm
/// totals and hence the weights fixed.
pub fn clustered_wilcoxon_test(
    data: &TrialDataset,
    sided: Sided,
    reps: usize,
    seed: u64,
) -> Result<TestResult> {
    check_permutation_inputs(data, reps)?;
    let estimate = theta_hat_clustered(data, WeightScheme::PermutationNull)?;
    let (groups, _) = size_groups(data);
    let weights: Vec<f64> = estimate.groups.iter().map(|g| g.weight).collect();
    let mut labels: Vec<Vec<Arm>> = groups.iter().map(|g| g.arms.clone()).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let draws = (0..reps).map(|_| {
        let mut t = 0.0;
        for ((g, w), l) in groups.iter().zip(&weights).zip(labels.iter_mut()) {
            l.shuffle(&mut rng);
            t += w * g.theta_for(l);
        }
        t
    });
    let p_value = permutation_p(estimate.theta_hat, draws, sided, reps);
    Ok(TestResult {
        theta_hat: estimate.theta_hat,
        z: None,
        p_value,
    })
}

/// Randomization test of the pooled Mann-Whitney θ̂, re-randomizing arm
/// labels over all clusters regardless of size.
pub fn cluster_rank_sum_test(
    data: &TrialDataset,
    sided: Sided,
    reps: usize,
    seed: u64,
) -> Result<TestResult> {
    check_permutation_inputs(data, reps)?;
    let values = data.values();
    let (ranks, _) = midranks(&values);
    let clusters = data.clusters();
    let rank_sums: Vec<f64> = clusters
        .iter()
        .map(|c| c.members.iter().map(|&i| ranks[i]).sum())
        .collect();
    let sizes: Vec<f64> = clusters.iter().map(|c| c.members.len() as f64).collect();
    let n = values.len() as f64;
    let theta = |arms: &[Arm]| {
        let (mut r, mut n1) = (0.0, 0.0);
        for ((a, rs), s) in arms.iter().zip(&rank_sums).zip(&sizes) {
            if *a == Arm::Experiment {
                r += rs;
                n1 += s;
            }
        }
        (r - n1 * (n1 + 1.0) / 2.0) / ((n - n1) * n1)
    };
    let mut labels: Vec<Arm> = clusters.iter().map(|c| c.arm).collect();
    let observed = theta(&labels);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let draws = (0..reps).map(|_| {
        labels.shuffle(&mut rng);
        theta(&labels)
    });
    let p_value = permutation_p(observed, draws, sided, reps);
    Ok(TestResult {
        theta_hat: observed,
        z: None,
        p_value,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;
    use rand_distr::StandardNormal;

    #[test]
    fn identical_arms_give_large_p() {
        let x: Vec<f64> = (0..20).map(|i| i as f64).collect();
        let d = TrialDataset::from_arms(&x, &x).unwrap();
        let r = wilcoxon_test_independent(&d, Sided::Two).unwrap();
        assert!(r.p_value >= 0.99);
        assert_eq!(r.theta_hat, 0.5);
    }

    #[test]
    fn complete_separation_gives_tiny_p() {
        let x: Vec<f64> = (0..20).map(|i| i as f64).collect();
        let y: Vec<f64> = (0..20).map(|i| 100.0 + i as f64).collect();
        let d = TrialDataset::from_arms(&x, &y).unwrap();
        assert!(wilcoxon_test_independent(&d, Sided::Two).unwrap().p_value < 1e-6);
    }

    #[test]
    fn all_tied_gives_p_one() {
        let d = TrialDataset::from_arms(&[1.0; 6], &[1.0; 6]).unwrap();
        assert_eq!(
            wilcoxon_test_independent(&d, Sided::Two).unwrap().p_value,
            1.0
        );
    }

    #[test]
    fn tie_corrected_variance_matches_exact_permutation_variance() {
        // small tied example: enumerate all C(6,3) label assignments
        let values = [1.0, 1.0, 2.0, 3.0, 3.0, 3.0];
        let mut us = Vec::new();
        for mask in 0u32..64 {
            if mask.count_ones() != 3 {
                continue;
            }
            let (x, y): (Vec<_>, Vec<_>) = (0..6).partition(|i| mask & (1 << i) == 0);
            let xs: Vec<f64> = x.iter().map(|&i| values[i]).collect();
            let ys: Vec<f64> = y.iter().map(|&i| values[i]).collect();
            let d = TrialDataset::from_arms(&xs, &ys).unwrap();
            let r = wilcoxon_test_independent(&d, Sided::Two).unwrap();
            us.push((r.theta_hat * 9.0, r.z.unwrap()));
        }
        let mean = us.iter().map(|u| u.0).sum::<f64>() / us.len() as f64;
        let var = us.iter().map(|u| (u.0 - mean).powi(2)).sum::<f64>() / us.len() as f64;
        // z = (U - 4.5)/sd for every assignment
        let (u, z) = us.iter().find(|u| u.1 != 0.0).unwrap();
        assert!(((u - 4.5) / z - var.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn null_rejection_rate() {
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        let mut rejections = 0;
        for _ in 0..1000 {
            let x: Vec<f64> = (0..50).map(|_| rng.sample(StandardNormal)).collect();
            let y: Vec<f64> = (0..50).map(|_| rng.sample(StandardNormal)).collect();
            let d = TrialDataset::from_arms(&x, &y).unwrap();
            if wilcoxon_test_independent(&d, Sided::Two).unwrap().p_value <= 0.05 {
                rejections += 1;
            }
        }
        assert!((35..=65).contains(&rejections), "{rejections}");
    }

    fn clustered_data(rng: &mut ChaCha8Rng, m: usize, k: usize, rho: f64, mu: f64) -> TrialDataset {
        let mut arm = |shift: f64| -> Vec<Vec<f64>> {
            (0..m)
                .map(|_| {
                    let u = rho.sqrt() * rng.sample::<f64, _>(StandardNormal);
                    (0..k)
                        .map(|_| {
                            shift + u + (1.0 - rho).sqrt() * rng.sample::<f64, _>(StandardNormal)
                        })
                        .collect()
                })
                .collect()
        };
        let c = arm(0.0);
        let e = arm(mu);
        TrialDataset::from_clusters(&c, &e).unwrap()
    }

    #[test]
    fn clustered_test_swap_gives_same_p() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let d = clustered_data(&mut rng, 8, 4, 0.3, 0.4);
        for test in [clustered_wilcoxon_test, cluster_rank_sum_test] {
            let a = test(&d, Sided::Two, 999, 5).unwrap();
            let b = test(&d.swap_arms(), Sided::Two, 999, 5).unwrap();
            assert_eq!(a.p_value, b.p_value);
            assert!((a.theta_hat + b.theta_hat - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn clustered_test_needs_two_clusters_per_arm() {
        let d = TrialDataset::from_clusters(&[vec![1.0, 2.0]], &[vec![3.0], vec![4.0]]).unwrap();
        assert!(clustered_wilcoxon_test(&d, Sided::Two, 1000, 1).is_err());
    }

    #[test]
    fn clustered_test_statistic_is_clustered_estimate() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let d = clustered_data(&mut rng, 6, 3, 0.2, 0.0);
        let r = clustered_wilcoxon_test(&d, Sided::Two, 1000, 1).unwrap();
        let e = theta_hat_clustered(&d, WeightScheme::PermutationNull).unwrap();
        assert_eq!(r.theta_hat, e.theta_hat);
        assert!(r.p_value > 0.0 && r.p_value <= 1.0);
    }

    #[test]
    fn clustered_null_p_values_are_super_uniform() {
        // Kolmogorov-Smirnov one-sided check of P(p ≤ u) ≤ u at level 0.01
        let mut rng = ChaCha8Rng::seed_from_u64(44);
        let mut ps: Vec<f64> = (0..1000)
            .map(|i| {
                let d = clustered_data(&mut rng, 10, 5, 0.5, 0.0);
                clustered_wilcoxon_test(&d, Sided::Two, 1000, i)
                    .unwrap()
                    .p_value
            })
            .collect();
        ps.sort_by(f64::total_cmp);
        let n = ps.len() as f64;
        let d_plus = ps
            .iter()
            .enumerate()
            .map(|(i, p)| (i as f64 + 1.0) / n - p)
            .fold(0.0, f64::max);
        // one-sided KS critical value at 0.01: √(ln(100)/(2n))
        assert!(d_plus < (100f64.ln() / (2.0 * n)).sqrt(), "D+ = {d_plus}");
    }

    #[test]
    fn strong_effect_detected() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let mu = crate::effects::mu_from_theta(crate::effects::theta_from_delta(1.5)).unwrap();
        let rho = crate::stats::rank_to_latent_icc(0.1).unwrap();
        let hits = (0..100)
            .filter(|&i| {
                let d = clustered_data(&mut rng, 20, 5, rho, mu);
                clustered_wilcoxon_test(&d, Sided::Two, 1000, i)
                    .unwrap()
                    .p_value
                    < 0.05
            })
            .count();
        assert!(hits >= 90, "{hits}");
    }
}
