use ndarray::Array2;
use rand::seq::index;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::MultiViewDataset;
use crate::error::{Error, Result};

/// Number of instances removed per view for a given ratio.
pub(crate) fn removal_count(ratio: f64, n: usize) -> usize {
    // the epsilon absorbs representation error such as 0.29 * 100 = 28.999..
    ((ratio * n as f64) + 1e-9).floor() as usize
}

/// Marks exactly `⌊ratio·N⌋` instances absent in every view.
///
/// Views are processed in order with an independent uniform draw each. An
/// instance is only eligible for removal from view `v` if it stays present in
/// some other view, which only restricts the draw for the last view. Fails
/// when the eligible pool is smaller than the removal count.
pub fn simulate_missing(
    dataset: &MultiViewDataset,
    ratio: f64,
    seed: u64,
) -> Result<MultiViewDataset> {
    if !(0.0..1.0).contains(&ratio) {
        return Err(Error::InvalidArgument(format!(
            "missing ratio must lie in [0, 1), got {ratio}"
        )));
    }
    if ratio == 0.0 {
        return Ok(dataset.clone());
    }
    if !dataset.is_complete() {
        return Err(Error::InvalidArgument(
            "missingness can only be simulated on a complete dataset".into(),
        ));
    }
    let n = dataset.num_instances();
    let l = dataset.num_views();
    let remove = removal_count(ratio, n);
    if remove > 0 && l < 2 {
        return Err(Error::InfeasibleMissing(
            "a single-view dataset cannot lose instances".into(),
        ));
    }
    if remove >= n {
        return Err(Error::InfeasibleMissing(format!(
            "removing {remove} of {n} instances empties every view"
        )));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut presence = Array2::from_elem((n, l), true);
    for v in 0..l {
        let is_last = v + 1 == l;
        let pool: Vec<usize> = (0..n)
            .filter(|&i| !is_last || (0..v).any(|u| presence[[i, u]]))
            .collect();
        if pool.len() < remove {
            return Err(Error::InfeasibleMissing(format!(
                "view {v}: only {} instances can be removed without orphaning one, need {remove}",
                pool.len()
            )));
        }
        for k in index::sample(&mut rng, pool.len(), remove) {
            presence[[pool[k], v]] = false;
        }
    }
    dataset.with_presence(presence)
}
