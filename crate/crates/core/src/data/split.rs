use rand::seq::SliceRandom;

use crate::error::{Error, Result};
use crate::rng::{stream, Stream};

pub const DEFAULT_RATIO: (usize, usize, usize) = (4, 1, 5);

/// Disjoint train/validation/test node sets plus the label-observed set.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SplitMasks {
    pub feat_train: Vec<usize>,
    pub feat_val: Vec<usize>,
    pub feat_test: Vec<usize>,
    /// Nodes whose labels are visible to training; may overlap any split.
    pub label_observed: Vec<usize>,
}

/// Seeded uniform shuffle followed by contiguous slicing.
///
/// Train and validation sizes are `⌈n·a/s⌉` and `⌈n·b/s⌉`; test takes what
/// is left. For `n = 2708` and `(4,1,5)` this gives `(1084, 271, 1353)`.
pub fn make_splits(n: usize, ratio: (usize, usize, usize), seed: u64) -> Result<SplitMasks> {
    if n < 10 {
        return Err(Error::InvalidInput(format!("need at least 10 nodes to split, got {n}")));
    }
    let total = ratio.0 + ratio.1 + ratio.2;
    if total == 0 {
        return Err(Error::InvalidInput("split ratio sums to zero".into()));
    }
    let n_train = (n * ratio.0).div_ceil(total);
    let n_val = (n * ratio.1).div_ceil(total).min(n - n_train);
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut stream(seed, Stream::Split, 0));
    let sorted = |s: &[usize]| {
        let mut v = s.to_vec();
        v.sort_unstable();
        v
    };
    Ok(SplitMasks {
        feat_train: sorted(&order[..n_train]),
        feat_val: sorted(&order[n_train..n_train + n_val]),
        feat_test: sorted(&order[n_train + n_val..]),
        label_observed: Vec::new(),
    })
}

/// Uniform sample of `⌊ratio·n⌋` nodes drawn from all nodes.
pub fn sample_label_mask(n: usize, ratio: f64, seed: u64) -> Result<Vec<usize>> {
    if !(0.0..=1.0).contains(&ratio) {
        return Err(Error::InvalidInput(format!("label ratio {ratio} not in [0,1]")));
    }
    let amount = ((ratio * n as f64) + 1e-9).floor() as usize;
    let mut picked =
        rand::seq::index::sample(&mut stream(seed, Stream::Labels, 0), n, amount.min(n)).into_vec();
    picked.sort_unstable();
    Ok(picked)
}
