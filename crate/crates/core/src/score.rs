//! Midrank summaries and the score statistic behind the proportional-odds
//! sample size formula, with its variance approximation `V1` and the
//! correction terms `V2`, `V3`.
//!
//! For category `a` let `m_a`, `n_a` be the control and experiment counts,
//! `c_a = m_a + n_a`, and `L_a`, `U_a` the numbers of observations strictly
//! below and above it. The score statistic is
//! `Z = Σ_a m_a (L_a - U_a) / (N + 1)`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rank::{canonical, Arm, TrialDataset};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CategoryCount {
    pub value: f64,
    pub count_control: u64,
    pub count_experiment: u64,
    /// Observations strictly below the category.
    pub lower: u64,
    /// Observations strictly above the category.
    pub upper: u64,
    pub midrank: f64,
}

impl CategoryCount {
    pub fn count(&self) -> u64 {
        self.count_control + self.count_experiment
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MidrankSummary {
    /// Ascending by value.
    pub categories: Vec<CategoryCount>,
    pub n_total: u64,
    pub n_control: u64,
    pub n_experiment: u64,
}

impl MidrankSummary {
    /// Summary built from per-category counts, categories numbered 1, 2, ...
    pub fn from_counts(control: &[u64], experiment: &[u64]) -> Result<Self> {
        if control.len() != experiment.len() {
            return Err(Error::InvalidInput(
                "control and experiment counts cover different categories".into(),
            ));
        }
        let cells: Vec<(f64, u64, u64)> = control
            .iter()
            .zip(experiment)
            .enumerate()
            .filter(|(_, (c, e))| **c + **e > 0)
            .map(|(i, (&c, &e))| ((i + 1) as f64, c, e))
            .collect();
        Self::from_cells(cells)
    }

    fn from_cells(cells: Vec<(f64, u64, u64)>) -> Result<Self> {
        let n_control: u64 = cells.iter().map(|c| c.1).sum();
        let n_experiment: u64 = cells.iter().map(|c| c.2).sum();
        if n_control == 0 || n_experiment == 0 {
            return Err(Error::InvalidInput("both arms need observations".into()));
        }
        let n_total = n_control + n_experiment;
        let mut below = 0;
        let categories = cells
            .into_iter()
            .map(|(value, m, n)| {
                let c = m + n;
                let cat = CategoryCount {
                    value,
                    count_control: m,
                    count_experiment: n,
                    lower: below,
                    upper: n_total - below - c,
                    midrank: below as f64 + (1 + c) as f64 / 2.0,
                };
                below += c;
                cat
            })
            .collect();
        Ok(MidrankSummary {
            categories,
            n_total,
            n_control,
            n_experiment,
        })
    }

    /// Category proportions `p_i = c_i / N`.
    pub fn proportions(&self) -> Vec<f64> {
        let n = self.n_total as f64;
        self.categories
            .iter()
            .map(|c| c.count() as f64 / n)
            .collect()
    }

    /// The same summary with arm labels exchanged.
    pub fn swap_arms(&self) -> Self {
        MidrankSummary {
            categories: self
                .categories
                .iter()
                .map(|c| CategoryCount {
                    count_control: c.count_experiment,
                    count_experiment: c.count_control,
                    ..*c
                })
                .collect(),
            n_total: self.n_total,
            n_control: self.n_experiment,
            n_experiment: self.n_control,
        }
    }
}

/// Groups the values into categories by exact equality (`-0.0` counts as
/// `0.0`), ignoring cluster membership.
pub fn midrank_summary(data: &TrialDataset) -> Result<MidrankSummary> {
    let mut obs: Vec<(f64, Arm)> = data
        .records()
        .iter()
        .map(|r| (canonical(r.value), r.arm))
        .collect();
    obs.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut cells: Vec<(f64, u64, u64)> = Vec::new();
    for (v, arm) in obs {
        match cells.last_mut() {
            Some(last) if last.0 == v => match arm {
                Arm::Control => last.1 += 1,
                Arm::Experiment => last.2 += 1,
            },
            _ => cells.push(match arm {
                Arm::Control => (v, 1, 0),
                Arm::Experiment => (v, 0, 1),
            }),
        }
    }
    MidrankSummary::from_cells(cells)
}

/// `Z = Σ_a m_a (L_a - U_a) / (N + 1)`. Equals
/// `(2 / (N + 1)) (U - n_C n_E / 2)` where `U` counts control-over-experiment
/// pairs with ties as one half, so it is positive when control values tend
/// to be larger.
pub fn score_statistic(s: &MidrankSummary) -> f64 {
    let total: f64 = s
        .categories
        .iter()
        .map(|c| c.count_control as f64 * (c.lower as f64 - c.upper as f64))
        .sum();
    total / (s.n_total as f64 + 1.0)
}

fn arm_product(s: &MidrankSummary) -> f64 {
    s.n_control as f64 * s.n_experiment as f64
}

/// `V1 = n_C n_E N / (3 (N + 1)²) · (1 - Σ p_i³)`.
pub fn variance_v1(s: &MidrankSummary) -> f64 {
    let n = s.n_total as f64;
    let cube: f64 = s.proportions().iter().map(|p| p * p * p).sum();
    arm_product(s) * n / (3.0 * (n + 1.0) * (n + 1.0)) * (1.0 - cube)
}

/// `(V2, V3)` with `γ_i` the cumulative proportion through category `i`:
///
/// ```text
/// V2 =  n_C n_E / ((N+1)² (N+2)) · N² Σ p_i² (1 - p_i)
/// V3 = -n_C n_E / ((N+1)² (N+2)) · n_C n_E Σ p_i² (γ_{i-1} - (1 - γ_i))²
/// ```
pub fn variance_corrections(s: &MidrankSummary) -> (f64, f64) {
    let n = s.n_total as f64;
    let prod = arm_product(s);
    let scale = prod / ((n + 1.0) * (n + 1.0) * (n + 2.0));
    let p = s.proportions();
    let v2 = scale * n * n * p.iter().map(|q| q * q * (1.0 - q)).sum::<f64>();
    let mut cum = 0.0;
    let mut acc = 0.0;
    for q in &p {
        let prev = cum;
        cum += q;
        let d = prev - (1.0 - cum);
        acc += q * q * d * d;
    }
    (v2, -scale * prod * acc)
}

/// Exact variance of `Z` over random re-assignment of arm labels:
/// `V1 · N / (N - 1)`.
pub fn permutation_variance(s: &MidrankSummary) -> f64 {
    let n = s.n_total as f64;
    if n < 2.0 {
        return 0.0;
    }
    variance_v1(s) * n / (n - 1.0)
}

/// A Monte-Carlo mean and its standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MonteCarloEstimate {
    pub mean: f64,
    pub stderr: f64,
}

/// Mean and standard error of `f` over `reps` sets of `n` uniforms.
fn mc_over_uniforms(
    n: usize,
    reps: usize,
    seed: u64,
    f: impl Fn(&mut [f64]) -> f64,
) -> Result<MonteCarloEstimate> {
    if reps < 2 {
        return Err(Error::InvalidInput(
            "at least two replications are needed".into(),
        ));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut u = vec![0.0f64; n];
    let (mut sum, mut sum_sq) = (0.0, 0.0);
    for _ in 0..reps {
        u.iter_mut().for_each(|x| *x = rng.random());
        let x = f(&mut u);
        sum += x;
        sum_sq += x * x;
    }
    let r = reps as f64;
    let mean = sum / r;
    let var = (sum_sq - r * mean * mean) / (r - 1.0);
    Ok(MonteCarloEstimate {
        mean,
        stderr: (var.max(0.0) / r).sqrt(),
    })
}

/// Monte-Carlo mean of the `k`-th order statistic of `n` uniforms, which
/// is `k / (n + 1)`.
pub fn order_statistic_moment_check(
    n: usize,
    k: usize,
    reps: usize,
    seed: u64,
) -> Result<MonteCarloEstimate> {
    if !(1 <= k && k <= n) {
        return Err(Error::InvalidInput(format!(
            "order statistic index must satisfy 1 ≤ k ≤ N, got k={k}, N={n}"
        )));
    }
    mc_over_uniforms(n, reps, seed, |u| {
        *u.select_nth_unstable_by(k - 1, f64::total_cmp).1
    })
}

/// Monte-Carlo `E[u_(j) u_(k)]` for `j ≤ k`, which is
/// `j (k + 1) / ((n + 1)(n + 2))`.
pub fn order_statistic_product_moment(
    n: usize,
    j: usize,
    k: usize,
    reps: usize,
    seed: u64,
) -> Result<MonteCarloEstimate> {
    if !(1 <= j && j <= k && k <= n) {
        return Err(Error::InvalidInput(format!(
            "order statistic indices must satisfy 1 ≤ j ≤ k ≤ N, got j={j}, k={k}, N={n}"
        )));
    }
    mc_over_uniforms(n, reps, seed, |u| {
        u.sort_by(f64::total_cmp);
        u[j - 1] * u[k - 1]
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn three_category_example() {
        let d = TrialDataset::from_arms(&[1.0, 2.0, 3.0], &[1.0, 3.0, 3.0]).unwrap();
        let s = midrank_summary(&d).unwrap();
        let mid: Vec<f64> = s.categories.iter().map(|c| c.midrank).collect();
        assert_eq!(mid, vec![1.5, 3.0, 5.0]);
        for c in &s.categories {
            assert_eq!(c.lower + c.count() + c.upper, s.n_total);
        }
    }

    #[test]
    fn distinct_and_single_category() {
        let d = TrialDataset::from_arms(&[0.3, -1.0], &[2.0, 0.0, -0.0]).unwrap();
        let s = midrank_summary(&d).unwrap();
        assert_eq!(s.categories.len(), 4);
        let d = TrialDataset::from_arms(&[4.0; 3], &[4.0; 2]).unwrap();
        let s = midrank_summary(&d).unwrap();
        assert_eq!(s.categories.len(), 1);
        let c = s.categories[0];
        assert_eq!((c.lower, c.upper, c.midrank), (0, 0, 3.0));
        assert_eq!(variance_v1(&s), 0.0);
        assert_eq!(score_statistic(&s), 0.0);
    }

    #[test]
    fn identical_arm_counts_give_zero() {
        let s = MidrankSummary::from_counts(&[3, 1, 4], &[3, 1, 4]).unwrap();
        assert_eq!(score_statistic(&s), 0.0);
    }

    #[test]
    fn uniform_closed_forms() {
        // uniform p_i = 1/A, balanced arms
        for a in [3usize, 10] {
            let per = 20u64;
            let s = MidrankSummary::from_counts(&vec![per; a], &vec![per; a]).unwrap();
            let n = s.n_total as f64;
            let expect =
                (n / 2.0).powi(2) * n / (3.0 * (n + 1.0).powi(2)) * (1.0 - 1.0 / (a * a) as f64);
            assert!((variance_v1(&s) - expect).abs() < 1e-12 * expect);
        }
    }

    #[test]
    fn corrections_for_three_uniform_categories() {
        // ratios approach (4N/81) / (6N/81) = 16/24
        let s = MidrankSummary::from_counts(&[100; 3], &[100; 3]).unwrap();
        let (v2, v3) = variance_corrections(&s);
        assert!(((v2 + v3) / variance_v1(&s) - 16.0 / 24.0).abs() < 0.01);
        let s = MidrankSummary::from_counts(&[100; 10], &[100; 10]).unwrap();
        let (v2, _) = variance_corrections(&s);
        assert!((v2 / variance_v1(&s) - 0.3).abs() < 0.03);
    }

    #[test]
    fn corrections_vanish_for_continuous_data() {
        let mut prev = f64::INFINITY;
        for n in [50u64, 200, 1000] {
            let ones = vec![1u64; n as usize];
            let zeros = vec![0u64; n as usize];
            let control: Vec<u64> = ones.iter().chain(&zeros).copied().collect();
            let experiment: Vec<u64> = zeros.iter().chain(&ones).copied().collect();
            let s = MidrankSummary::from_counts(&control, &experiment).unwrap();
            let (v2, v3) = variance_corrections(&s);
            let r = (v2 + v3).abs() / variance_v1(&s);
            assert!(r < prev);
            prev = r;
        }
        assert!(prev < 0.01);
    }

    #[test]
    fn permutation_variance_by_shuffling() {
        let s = MidrankSummary::from_counts(&[40, 30, 30], &[30, 40, 30]).unwrap();
        let labels: Vec<(usize, Arm)> = s
            .categories
            .iter()
            .enumerate()
            .flat_map(|(i, c)| {
                std::iter::repeat_n((i, Arm::Control), c.count_control as usize).chain(
                    std::iter::repeat_n((i, Arm::Experiment), c.count_experiment as usize),
                )
            })
            .collect();
        let mut arms: Vec<Arm> = labels.iter().map(|l| l.1).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let reps = 100_000;
        let (mut sum, mut sum_sq) = (0.0, 0.0);
        use rand::seq::SliceRandom;
        for _ in 0..reps {
            arms.shuffle(&mut rng);
            let mut control = vec![0u64; 3];
            let mut experiment = vec![0u64; 3];
            for ((cat, _), a) in labels.iter().zip(&arms) {
                match a {
                    Arm::Control => control[*cat] += 1,
                    Arm::Experiment => experiment[*cat] += 1,
                }
            }
            let z = score_statistic(&MidrankSummary::from_counts(&control, &experiment).unwrap());
            sum += z;
            sum_sq += z * z;
        }
        let mean = sum / reps as f64;
        let var = sum_sq / reps as f64 - mean * mean;
        assert!((var / permutation_variance(&s) - 1.0).abs() < 0.02);
    }

    #[test]
    fn order_statistic_means() {
        let e = order_statistic_moment_check(1, 1, 20_000, 1).unwrap();
        assert!((e.mean - 0.5).abs() < 4.0 * e.stderr);
        let e = order_statistic_moment_check(9, 5, 20_000, 2).unwrap();
        assert!((e.mean - 0.5).abs() < 4.0 * e.stderr);
        let e = order_statistic_moment_check(9, 3, 20_000, 3).unwrap();
        assert!((e.mean - 0.3).abs() < 4.0 * e.stderr);
        assert!(order_statistic_moment_check(3, 4, 10, 1).is_err());
    }

    #[test]
    fn order_statistic_second_moments() {
        let (n, j, k) = (9usize, 3usize, 7usize);
        let denom = ((n + 1) * (n + 2)) as f64;
        let e = order_statistic_product_moment(n, k, k, 50_000, 4).unwrap();
        assert!((e.mean - (k * (k + 1)) as f64 / denom).abs() < 4.0 * e.stderr);
        let e = order_statistic_product_moment(n, j, k, 50_000, 5).unwrap();
        assert!((e.mean - (j * (k + 1)) as f64 / denom).abs() < 4.0 * e.stderr);
    }

    fn brute_u(x: &[f64], y: &[f64]) -> f64 {
        let mut u = 0.0;
        for a in x {
            for b in y {
                if a > b {
                    u += 1.0;
                } else if a == b {
                    u += 0.5;
                }
            }
        }
        u
    }

    proptest! {
        #[test]
        fn summary_invariants_and_mann_whitney_identity(
            x in prop::collection::vec(0u8..6, 1..30),
            y in prop::collection::vec(0u8..6, 1..30),
        ) {
            let x: Vec<f64> = x.into_iter().map(f64::from).collect();
            let y: Vec<f64> = y.into_iter().map(f64::from).collect();
            let d = TrialDataset::from_arms(&x, &y).unwrap();
            let s = midrank_summary(&d).unwrap();
            let total: u64 = s.categories.iter().map(CategoryCount::count).sum();
            prop_assert_eq!(total, s.n_total);
            for c in &s.categories {
                prop_assert_eq!(c.lower + c.count() + c.upper, s.n_total);
                prop_assert_eq!(c.midrank, c.lower as f64 + (1 + c.count()) as f64 / 2.0);
            }
            let n = s.n_total as f64;
            let expect = 2.0 / (n + 1.0) * (brute_u(&x, &y) - (x.len() * y.len()) as f64 / 2.0);
            prop_assert!((score_statistic(&s) - expect).abs() < 1e-12);
            prop_assert!((score_statistic(&s.swap_arms()) + score_statistic(&s)).abs() < 1e-12);
            let t = d.map_values(|v| (v * 0.7).exp()).unwrap();
            let st = midrank_summary(&t).unwrap();
            prop_assert_eq!(score_statistic(&st), score_statistic(&s));
            prop_assert_eq!(variance_v1(&st), variance_v1(&s));
            prop_assert_eq!(variance_corrections(&st), variance_corrections(&s));
        }
    }
}
