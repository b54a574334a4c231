use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::rng::rng_from;
use crate::{GateError, Result};

/// Fold label of every sample.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FoldAssignment {
    pub k: usize,
    pub folds: Vec<usize>,
}

impl FoldAssignment {
    pub fn n(&self) -> usize {
        self.folds.len()
    }

    pub fn test_indices(&self, fold: usize) -> Vec<usize> {
        (0..self.n()).filter(|&i| self.folds[i] == fold).collect()
    }

    pub fn train_indices(&self, fold: usize) -> Vec<usize> {
        (0..self.n()).filter(|&i| self.folds[i] != fold).collect()
    }

    pub fn sizes(&self) -> Vec<usize> {
        (0..self.k).map(|f| self.test_indices(f).len()).collect()
    }
}

/// Seeded shuffle followed by round-robin assignment.
pub fn kfold_split(n: usize, k: usize, seed: u64) -> Result<FoldAssignment> {
    if k < 2 || k > n {
        return Err(GateError::structural(format!(
            "fold count must lie in 2..={n}, got {k}"
        )));
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut rng_from(seed));
    let mut folds = vec![0; n];
    for (pos, &i) in order.iter().enumerate() {
        folds[i] = pos % k;
    }
    Ok(FoldAssignment { k, folds })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn balanced_sizes() {
        assert_eq!(kfold_split(10, 5, 1).unwrap().sizes(), vec![2; 5]);
        let mut s = kfold_split(11, 5, 1).unwrap().sizes();
        s.sort_unstable();
        assert_eq!(s, vec![2, 2, 2, 2, 3]);
        assert!(kfold_split(4, 5, 0).is_err());
        assert!(kfold_split(4, 1, 0).is_err());
    }

    #[test]
    fn seeded() {
        assert_eq!(
            kfold_split(30, 5, 9).unwrap(),
            kfold_split(30, 5, 9).unwrap()
        );
        assert_ne!(
            kfold_split(30, 5, 9).unwrap(),
            kfold_split(30, 5, 10).unwrap()
        );
    }

    proptest! {
        #[test]
        fn every_sample_tested_once(n in 2usize..60, k in 2usize..8, seed in any::<u64>()) {
            prop_assume!(k <= n);
            let f = kfold_split(n, k, seed).unwrap();
            let mut seen = vec![0; n];
            for fold in 0..k {
                for i in f.test_indices(fold) {
                    seen[i] += 1;
                }
                prop_assert_eq!(f.test_indices(fold).len() + f.train_indices(fold).len(), n);
            }
            prop_assert!(seen.iter().all(|&c| c == 1));
            let sizes = f.sizes();
            prop_assert!(sizes.iter().max().unwrap() - sizes.iter().min().unwrap() <= 1);
        }
    }
}
