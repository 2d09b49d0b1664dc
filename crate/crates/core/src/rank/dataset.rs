use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Arm {
    Control,
    Experiment,
}

impl Arm {
    pub fn other(self) -> Arm {
        match self {
            Arm::Control => Arm::Experiment,
            Arm::Experiment => Arm::Control,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Record {
    pub arm: Arm,
    pub cluster: u64,
    pub value: f64,
}

/// Flat trial records. Every cluster belongs to one arm and both arms are
/// nonempty.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<Record>", into = "Vec<Record>")]
pub struct TrialDataset {
    records: Vec<Record>,
}

/// The members of one cluster, in record order.
#[derive(Debug, Clone, PartialEq)]
pub struct Cluster {
    pub id: u64,
    pub arm: Arm,
    /// Indices into [`TrialDataset::records`].
    pub members: Vec<usize>,
}

impl TrialDataset {
    pub fn new(records: Vec<Record>) -> Result<Self> {
        if let Some(r) = records.iter().find(|r| !r.value.is_finite()) {
            return Err(Error::InvalidInput(format!(
                "non-finite value {} in cluster {}",
                r.value, r.cluster
            )));
        }
        let mut arms: BTreeMap<u64, Arm> = BTreeMap::new();
        for r in &records {
            if let Some(&a) = arms.get(&r.cluster) {
                if a != r.arm {
                    return Err(Error::InvalidInput(format!(
                        "cluster {} has records in both arms",
                        r.cluster
                    )));
                }
            } else {
                arms.insert(r.cluster, r.arm);
            }
        }
        for arm in [Arm::Control, Arm::Experiment] {
            if !records.iter().any(|r| r.arm == arm) {
                return Err(Error::InvalidInput(
                    format!("the {arm:?} arm is empty").to_lowercase(),
                ));
            }
        }
        Ok(TrialDataset { records })
    }

    /// Independent observations: each record is its own cluster.
    pub fn from_arms(control: &[f64], experiment: &[f64]) -> Result<Self> {
        let records = control
            .iter()
            .map(|&v| (Arm::Control, v))
            .chain(experiment.iter().map(|&v| (Arm::Experiment, v)))
            .enumerate()
            .map(|(i, (arm, value))| Record {
                arm,
                cluster: i as u64,
                value,
            })
            .collect();
        Self::new(records)
    }

    /// Clusters given as value lists; ids are assigned control first.
    pub fn from_clusters(control: &[Vec<f64>], experiment: &[Vec<f64>]) -> Result<Self> {
        let mut records = Vec::new();
        let all = control
            .iter()
            .map(|c| (Arm::Control, c))
            .chain(experiment.iter().map(|c| (Arm::Experiment, c)));
        for (id, (arm, values)) in all.enumerate() {
            records.extend(values.iter().map(|&value| Record {
                arm,
                cluster: id as u64,
                value,
            }));
        }
        Self::new(records)
    }

    pub fn records(&self) -> &[Record] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn values(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.value).collect()
    }

    pub fn arm_values(&self, arm: Arm) -> Vec<f64> {
        self.records
            .iter()
            .filter(|r| r.arm == arm)
            .map(|r| r.value)
            .collect()
    }

    pub fn arm_len(&self, arm: Arm) -> usize {
        self.records.iter().filter(|r| r.arm == arm).count()
    }

    /// Clusters in ascending id order.
    pub fn clusters(&self) -> Vec<Cluster> {
        let mut by_id: BTreeMap<u64, Cluster> = BTreeMap::new();
        for (i, r) in self.records.iter().enumerate() {
            by_id
                .entry(r.cluster)
                .or_insert_with(|| Cluster {
                    id: r.cluster,
                    arm: r.arm,
                    members: Vec::new(),
                })
                .members
                .push(i);
        }
        by_id.into_values().collect()
    }

    /// The same data with arm labels exchanged.
    pub fn swap_arms(&self) -> Self {
        TrialDataset {
            records: self
                .records
                .iter()
                .map(|r| Record {
                    arm: r.arm.other(),
                    ..*r
                })
                .collect(),
        }
    }

    /// Applies `f` to every value.
    pub fn map_values(&self, f: impl Fn(f64) -> f64) -> Result<Self> {
        Self::new(
            self.records
                .iter()
                .map(|r| Record {
                    value: f(r.value),
                    ..*r
                })
                .collect(),
        )
    }

    /// Keeps the records for which `keep` holds; both arms must survive.
    pub fn filter(&self, keep: impl Fn(&Record) -> bool) -> Result<Self> {
        Self::new(self.records.iter().copied().filter(|r| keep(r)).collect())
    }
}

impl TryFrom<Vec<Record>> for TrialDataset {
    type Error = Error;

    fn try_from(records: Vec<Record>) -> Result<Self> {
        TrialDataset::new(records)
    }
}

impl From<TrialDataset> for Vec<Record> {
    fn from(d: TrialDataset) -> Self {
        d.records
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn validation() {
        assert!(TrialDataset::from_arms(&[], &[1.0]).is_err());
        assert!(TrialDataset::from_arms(&[1.0], &[f64::NAN]).is_err());
        let mixed = vec![
            Record {
                arm: Arm::Control,
                cluster: 0,
                value: 1.0,
            },
            Record {
                arm: Arm::Experiment,
                cluster: 0,
                value: 2.0,
            },
        ];
        assert!(TrialDataset::new(mixed).is_err());
    }

    #[test]
    fn clusters_and_swap() {
        let d = TrialDataset::from_clusters(&[vec![1.0, 2.0], vec![3.0]], &[vec![4.0, 5.0, 6.0]])
            .unwrap();
        let cl = d.clusters();
        assert_eq!(cl.len(), 3);
        assert_eq!(cl[2].members.len(), 3);
        assert_eq!(cl[2].arm, Arm::Experiment);
        let s = d.swap_arms();
        assert_eq!(s.arm_values(Arm::Control), vec![4.0, 5.0, 6.0]);
        let json = serde_json::to_string(&d).unwrap();
        let back: TrialDataset = serde_json::from_str(&json).unwrap();
        assert_eq!(back, d);
    }
}
