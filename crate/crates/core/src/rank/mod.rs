//! Rank estimators and tests for independent and clustered two-arm data.
//!
//! Ties are handled by midranks throughout, so every statistic here depends
//! on the data only through their ordering and is unchanged by strictly
//! increasing transformations of the values.

mod dataset;
mod estimators;
mod inference;

pub use dataset::{Arm, Cluster, Record, TrialDataset};
pub use estimators::{
    rank_icc_estimate, rank_icc_single_arm, ridits, theta_hat_clustered, theta_hat_independent,
    SizeGroupEstimate, ThetaEstimate, WeightScheme,
};
pub use inference::{
    cluster_rank_sum_test, clustered_wilcoxon_test, wilcoxon_test_independent, TestResult,
};

/// Canonical sort key: `-0.0` and `0.0` compare equal.
pub(crate) fn canonical(v: f64) -> f64 {
    if v == 0.0 {
        0.0
    } else {
        v
    }
}

/// Midranks (1-based) of `values` in input order, and the tie-group sizes.
pub(crate) fn midranks(values: &[f64]) -> (Vec<f64>, Vec<usize>) {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| canonical(values[a]).total_cmp(&canonical(values[b])));
    let mut ranks = vec![0.0; values.len()];
    let mut ties = Vec::new();
    let mut start = 0;
    while start < order.len() {
        let v = canonical(values[order[start]]);
        let mut end = start + 1;
        while end < order.len() && canonical(values[order[end]]) == v {
            end += 1;
        }
        // positions start+1 ..= end share their average
        let mid = (start + 1 + end) as f64 / 2.0;
        for &i in &order[start..end] {
            ranks[i] = mid;
        }
        ties.push(end - start);
        start = end;
    }
    (ranks, ties)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn midranks_with_ties() {
        let (r, t) = midranks(&[3.0, 1.0, 3.0, 2.0, 1.0, 3.0]);
        assert_eq!(r, vec![5.0, 1.5, 5.0, 3.0, 1.5, 5.0]);
        assert_eq!(t, vec![2, 1, 3]);
        let (r, _) = midranks(&[0.0, -0.0]);
        assert_eq!(r, vec![1.5, 1.5]);
    }
}
