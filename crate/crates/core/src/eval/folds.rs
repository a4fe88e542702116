use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Partition of sample indices into `k` test folds.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FoldPlan {
    pub folds: Vec<Vec<usize>>,
    pub seed: u64,
    pub stratified: bool,
}

impl FoldPlan {
    pub fn k(&self) -> usize {
        self.folds.len()
    }

    /// Fold index of every sample.
    pub fn fold_of(&self) -> Vec<usize> {
        let n = self.folds.iter().map(Vec::len).sum();
        let mut out = vec![usize::MAX; n];
        for (f, idx) in self.folds.iter().enumerate() {
            for &i in idx {
                out[i] = f;
            }
        }
        out
    }

    /// All indices outside fold `f`, ascending.
    pub fn training_indices(&self, f: usize) -> Vec<usize> {
        let mut out: Vec<usize> = self
            .folds
            .iter()
            .enumerate()
            .filter(|(g, _)| *g != f)
            .flat_map(|(_, idx)| idx.iter().copied())
            .collect();
        out.sort_unstable();
        out
    }
}

/// Seeded k-fold partition of `labels.len()` samples.
///
/// Stratified plans shuffle each class's indices and deal them round-robin
/// across folds, continuing the deal from class to class so fold sizes
/// differ by at most one. Plain plans shuffle all indices and deal them the
/// same way.
pub fn k_fold_split(labels: &[usize], k: usize, seed: u64, stratified: bool) -> Result<FoldPlan> {
    let n = labels.len();
    if k < 2 {
        return Err(Error::InvalidParameter(format!("k must be at least 2, got {k}")));
    }
    if k > n {
        return Err(Error::InvalidParameter(format!(
            "k = {k} exceeds the number of samples ({n})"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let groups: Vec<Vec<usize>> = if stratified {
        let classes = labels.iter().copied().max().map_or(0, |m| m + 1);
        let mut groups = vec![Vec::new(); classes];
        for (i, &l) in labels.iter().enumerate() {
            groups[l].push(i);
        }
        groups
    } else {
        vec![(0..n).collect()]
    };

    let mut folds = vec![Vec::new(); k];
    let mut next = 0;
    for mut group in groups {
        group.shuffle(&mut rng);
        for i in group {
            folds[next % k].push(i);
            next += 1;
        }
    }
    for fold in &mut folds {
        fold.sort_unstable();
    }
    Ok(FoldPlan {
        folds,
        seed,
        stratified,
    })
}
