use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::{Error, Result};

/// Train / validation / test node indices.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DatasetSplit {
    pub train: Vec<usize>,
    pub val: Vec<usize>,
    pub test: Vec<usize>,
    pub seed: u64,
}

impl DatasetSplit {
    /// Uniform random 6:2:2 split of `0..n`.
    pub fn random(n: usize, seed: u64) -> Self {
        let mut idx: Vec<usize> = (0..n).collect();
        idx.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
        let n_train = (0.6 * n as f64).round() as usize;
        let n_val = ((0.2 * n as f64).round() as usize).min(n - n_train);
        let test = idx.split_off(n_train + n_val);
        let val = idx.split_off(n_train);
        Self {
            train: idx,
            val,
            test,
            seed,
        }
    }

    pub fn validate(&self, n: usize) -> Result<()> {
        let mut seen = vec![false; n];
        for &i in self.train.iter().chain(&self.val).chain(&self.test) {
            if i >= n {
                return Err(Error::Data(format!("split index {i} out of range for {n} nodes")));
            }
            if std::mem::replace(&mut seen[i], true) {
                return Err(Error::Data(format!("node {i} appears in more than one split")));
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sizes_and_disjointness() {
        let s = DatasetSplit::random(100, 7);
        assert_eq!((s.train.len(), s.val.len(), s.test.len()), (60, 20, 20));
        s.validate(100).unwrap();
        let mut all: Vec<usize> = s.train.iter().chain(&s.val).chain(&s.test).copied().collect();
        all.sort_unstable();
        assert_eq!(all, (0..100).collect::<Vec<_>>());
        for n in [5, 7, 13, 601] {
            let s = DatasetSplit::random(n, 1);
            assert_eq!(s.train.len() + s.val.len() + s.test.len(), n);
        }
    }

    #[test]
    fn seeded() {
        assert_eq!(DatasetSplit::random(50, 3), DatasetSplit::random(50, 3));
        assert_ne!(DatasetSplit::random(50, 3), DatasetSplit::random(50, 4));
    }

    #[test]
    fn overlap_detected() {
        let s = DatasetSplit {
            train: vec![0, 1],
            val: vec![1],
            test: vec![],
            seed: 0,
        };
        assert!(s.validate(3).is_err());
    }
}
