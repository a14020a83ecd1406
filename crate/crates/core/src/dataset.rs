use rand::seq::SliceRandom;
use rand::Rng;

use crate::error::{Error, Result};
use crate::features::FeatureMatrix;
pub use crate::io::Splits;

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Split {
    Train,
    Val,
    Test,
}

impl Splits {
    pub fn get(&self, which: Split) -> &[usize] {
        match which {
            Split::Train => &self.train,
            Split::Val => &self.val,
            Split::Test => &self.test,
        }
    }
}

/// Features, integer labels in `[0, C)` and disjoint train/val/test sets.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledDataset {
    pub features: FeatureMatrix,
    pub labels: Vec<usize>,
    pub num_classes: usize,
    pub splits: Splits,
}

impl LabeledDataset {
    pub fn new(features: FeatureMatrix, labels: Vec<usize>, splits: Splits) -> Result<Self> {
        let n = features.n();
        if labels.len() != n {
            return Err(Error::Shape(format!("{} labels for {n} feature rows", labels.len())));
        }
        let num_classes = labels.iter().max().map_or(0, |&m| m + 1);
        let mut seen = vec![false; num_classes];
        for &l in &labels {
            seen[l] = true;
        }
        if let Some(c) = seen.iter().position(|s| !s) {
            return Err(Error::InvalidParameter(format!("class {c} has no nodes")));
        }
        let mut owner = vec![None::<Split>; n];
        for which in [Split::Train, Split::Val, Split::Test] {
            for &i in splits.get(which) {
                if i >= n {
                    return Err(Error::InvalidParameter(format!(
                        "split index {i} out of range for n = {n}"
                    )));
                }
                if let Some(prev) = owner[i].replace(which) {
                    return Err(Error::InvalidParameter(format!(
                        "node {i} appears in both {prev:?} and {which:?}"
                    )));
                }
            }
        }
        Ok(Self {
            features,
            labels,
            num_classes,
            splits,
        })
    }

    pub fn n(&self) -> usize {
        self.labels.len()
    }

    /// Same labels and splits over a different feature matrix.
    pub fn with_features(&self, features: FeatureMatrix) -> Result<Self> {
        if features.n() != self.n() {
            return Err(Error::Shape(format!(
                "{} feature rows for {} nodes",
                features.n(),
                self.n()
            )));
        }
        Ok(Self {
            features,
            labels: self.labels.clone(),
            num_classes: self.num_classes,
            splits: self.splits.clone(),
        })
    }
}

/// Per-class random split with the given train/val fractions; the remainder
/// is test. Index lists are returned sorted.
pub fn stratified_split<R: Rng + ?Sized>(labels: &[usize], train: f64, val: f64, rng: &mut R) -> Splits {
    let classes = labels.iter().max().map_or(0, |&m| m + 1);
    let mut out = Splits::default();
    for c in 0..classes {
        let mut members: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == c).collect();
        members.shuffle(rng);
        let m = members.len();
        let n_train = ((train * m as f64).round() as usize).min(m);
        let n_val = ((val * m as f64).round() as usize).min(m - n_train);
        out.train.extend_from_slice(&members[..n_train]);
        out.val.extend_from_slice(&members[n_train..n_train + n_val]);
        out.test.extend_from_slice(&members[n_train + n_val..]);
    }
    out.train.sort_unstable();
    out.val.sort_unstable();
    out.test.sort_unstable();
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seed::{rng, Stream};

    #[test]
    fn split_is_disjoint_and_covers() {
        let labels: Vec<usize> = (0..100).map(|i| i % 3).collect();
        let s = stratified_split(&labels, 0.6, 0.2, &mut rng(1, Stream::Split));
        let mut all: Vec<usize> = s.train.iter().chain(&s.val).chain(&s.test).copied().collect();
        all.sort_unstable();
        assert_eq!(all, (0..100).collect::<Vec<_>>());
        assert!((58..=62).contains(&s.train.len()));
    }

    #[test]
    fn dataset_rejects_overlap_and_missing_class() {
        let x = FeatureMatrix::zeros(3, 1);
        let overlap = Splits {
            train: vec![0],
            val: vec![0],
            test: vec![],
        };
        assert!(LabeledDataset::new(x.clone(), vec![0, 1, 1], overlap).is_err());
        assert!(LabeledDataset::new(x, vec![0, 2, 2], Splits::default()).is_err());
    }
}
