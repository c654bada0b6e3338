use alloc::vec::Vec;

use rand::seq::SliceRandom;

use crate::error::{Error, Result};
use crate::rng::{stream, Stream};

/// Indices into a corpus for one cross-validation fold.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Fold {
    pub train: Vec<usize>,
    pub test: Vec<usize>,
}

/// Seeded shuffle of `0..len` cut into `k` test folds whose sizes differ by
/// at most one; each fold trains on the rest.
pub fn split_folds(len: usize, k: usize, seed: u64) -> Result<Vec<Fold>> {
    if k < 2 {
        return Err(Error::contract("fold count must be at least 2"));
    }
    if k > len {
        return Err(Error::contract(alloc::format!("fold count {k} exceeds corpus size {len}")));
    }
    let mut order: Vec<usize> = (0..len).collect();
    order.shuffle(&mut stream(seed, Stream::Folds));
    let (base, extra) = (len / k, len % k);
    let mut folds = Vec::with_capacity(k);
    let mut start = 0;
    for f in 0..k {
        let size = base + usize::from(f < extra);
        let mut test = order[start..start + size].to_vec();
        let mut train: Vec<usize> = order[..start].iter().chain(&order[start + size..]).copied().collect();
        test.sort_unstable();
        train.sort_unstable();
        folds.push(Fold { train, test });
        start += size;
    }
    Ok(folds)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn two_folds_of_ten() {
        let folds = split_folds(10, 2, 7).unwrap();
        assert_eq!(folds[0].test.len(), 5);
        assert_eq!(folds[1].test.len(), 5);
        assert!(folds[0].test.iter().all(|i| !folds[1].test.contains(i)));
        assert_eq!(split_folds(10, 2, 7).unwrap(), folds);
    }

    #[test]
    fn partition_is_exhaustive() {
        let folds = split_folds(11, 3, 1).unwrap();
        let mut all: Vec<usize> = folds.iter().flat_map(|f| f.test.clone()).collect();
        all.sort_unstable();
        assert_eq!(all, (0..11).collect::<Vec<_>>());
        for f in &folds {
            assert_eq!(f.train.len() + f.test.len(), 11);
            assert!(f.train.iter().all(|i| !f.test.contains(i)));
        }
    }

    #[test]
    fn bad_fold_counts() {
        assert!(split_folds(3, 4, 0).is_err());
        assert!(split_folds(3, 1, 0).is_err());
    }
}
