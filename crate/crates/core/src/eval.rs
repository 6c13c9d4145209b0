//! Downstream clustering on selected features and the ACC / NMI metrics.

use std::collections::HashMap;

use ndarray::{Array2, ArrayView2, Axis};
use pathfinding::prelude::{kuhn_munkres, Matrix};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::datamodel::{impute_missing, MultiViewDataset};
use crate::error::{Error, Result};
use crate::selection::RankedFeature;

pub const KMEANS_MAX_ITER: usize = 300;

#[derive(Debug, Clone, PartialEq)]
pub struct ClusteringRun {
    pub assignments: Vec<usize>,
    pub inertia: f64,
    pub seed: u64,
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Lloyd's algorithm on the columns of `data` (`h × N`) from k-means++
/// seeding. Stops at an assignment fixpoint or after 300 iterations. An
/// emptied cluster is re-seeded at the point farthest from its centroid.
pub fn kmeans(data: ArrayView2<f64>, clusters: usize, seed: u64) -> Result<ClusteringRun> {
    let n = data.ncols();
    if clusters == 0 || clusters > n {
        return Err(Error::InvalidArgument(format!(
            "cannot form {clusters} clusters from {n} points"
        )));
    }
    let points: Vec<Vec<f64>> = data.axis_iter(Axis(1)).map(|c| c.to_vec()).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    // k-means++ seeding
    let mut centroids: Vec<Vec<f64>> = Vec::with_capacity(clusters);
    let mut chosen = vec![false; n];
    let first = rng.random_range(0..n);
    chosen[first] = true;
    centroids.push(points[first].clone());
    let mut nearest: Vec<f64> = points.iter().map(|p| sq_dist(p, &centroids[0])).collect();
    while centroids.len() < clusters {
        let total: f64 = nearest.iter().sum();
        let pick = if total > 0.0 {
            let mut target = rng.random::<f64>() * total;
            let mut pick = None;
            for (i, &d) in nearest.iter().enumerate() {
                if d > 0.0 {
                    pick = Some(i);
                    if target < d {
                        break;
                    }
                    target -= d;
                }
            }
            pick.expect("positive total has a positive entry")
        } else {
            // every point coincides with a centroid; take an unused index
            let unused: Vec<usize> = (0..n).filter(|&i| !chosen[i]).collect();
            unused[rng.random_range(0..unused.len())]
        };
        chosen[pick] = true;
        centroids.push(points[pick].clone());
        let c = centroids.last().expect("just pushed");
        for (d, p) in nearest.iter_mut().zip(&points) {
            *d = d.min(sq_dist(p, c));
        }
    }

    let dim = data.nrows();
    let mut assignments = vec![usize::MAX; n];
    for _ in 0..KMEANS_MAX_ITER {
        let mut changed = false;
        for (i, p) in points.iter().enumerate() {
            let best = closest(p, &centroids);
            if assignments[i] != best {
                assignments[i] = best;
                changed = true;
            }
        }
        if !changed {
            break;
        }
        let mut sums = vec![vec![0.0; dim]; clusters];
        let mut counts = vec![0usize; clusters];
        for (p, &a) in points.iter().zip(&assignments) {
            counts[a] += 1;
            for (s, x) in sums[a].iter_mut().zip(p) {
                *s += x;
            }
        }
        for k in 0..clusters {
            if counts[k] > 0 {
                centroids[k] = sums[k].iter().map(|s| s / counts[k] as f64).collect();
            }
        }
        for k in 0..clusters {
            if counts[k] == 0 {
                let far = (0..n)
                    .max_by(|&a, &b| {
                        let da = sq_dist(&points[a], &centroids[assignments[a]]);
                        let db = sq_dist(&points[b], &centroids[assignments[b]]);
                        da.total_cmp(&db).then(b.cmp(&a))
                    })
                    .expect("n > 0");
                centroids[k] = points[far].clone();
                counts[assignments[far]] -= 1;
                counts[k] = 1;
                assignments[far] = k;
            }
        }
    }
    let inertia = points
        .iter()
        .zip(&assignments)
        .map(|(p, &a)| sq_dist(p, &centroids[a]))
        .sum();
    Ok(ClusteringRun {
        assignments,
        inertia,
        seed,
    })
}

fn closest(p: &[f64], centroids: &[Vec<f64>]) -> usize {
    let mut best = 0;
    let mut best_d = f64::INFINITY;
    for (k, c) in centroids.iter().enumerate() {
        let d = sq_dist(p, c);
        if d < best_d {
            best_d = d;
            best = k;
        }
    }
    best
}

/// Relabels `labels` to `0..k` in order of first appearance.
fn compact(labels: &[usize]) -> (Vec<usize>, usize) {
    let mut map = HashMap::new();
    let out = labels
        .iter()
        .map(|&y| {
            let next = map.len();
            *map.entry(y).or_insert(next)
        })
        .collect();
    (out, map.len())
}

fn contingency(truth: &[usize], pred: &[usize]) -> Result<(Vec<Vec<usize>>, usize, usize)> {
    if truth.len() != pred.len() {
        return Err(Error::InvalidArgument(format!(
            "label length mismatch: {} vs {}",
            truth.len(),
            pred.len()
        )));
    }
    let (t, kt) = compact(truth);
    let (p, kp) = compact(pred);
    let mut table = vec![vec![0usize; kp]; kt];
    for (&a, &b) in t.iter().zip(&p) {
        table[a][b] += 1;
    }
    Ok((table, kt, kp))
}

/// Clustering accuracy under the best one-to-one map from clusters to
/// classes, found with the Kuhn–Munkres algorithm.
pub fn acc(truth: &[usize], pred: &[usize]) -> Result<f64> {
    let (table, kt, kp) = contingency(truth, pred)?;
    if truth.is_empty() {
        return Ok(1.0);
    }
    let k = kt.max(kp);
    let weights = Matrix::from_fn(k, k, |(cluster, class)| {
        if cluster < kp && class < kt {
            table[class][cluster] as i64
        } else {
            0
        }
    });
    let (matched, _) = kuhn_munkres(&weights);
    Ok(matched as f64 / truth.len() as f64)
}

/// `MI / max(H, H′)` with natural-log entropies. Two constant labelings give 1.
pub fn nmi(truth: &[usize], pred: &[usize]) -> Result<f64> {
    let (table, _, _) = contingency(truth, pred)?;
    let n = truth.len();
    if n == 0 {
        return Err(Error::InvalidArgument("NMI of empty labelings".into()));
    }
    let nf = n as f64;
    let row: Vec<usize> = table.iter().map(|r| r.iter().sum()).collect();
    let col: Vec<usize> = (0..table[0].len())
        .map(|j| table.iter().map(|r| r[j]).sum())
        .collect();
    let entropy = |counts: &[usize]| -> f64 {
        counts
            .iter()
            .filter(|&&c| c > 0)
            .map(|&c| {
                let q = c as f64 / nf;
                -q * q.ln()
            })
            .sum()
    };
    let (ht, hp) = (entropy(&row), entropy(&col));
    let denom = ht.max(hp);
    if denom <= 0.0 {
        // both labelings are constant, hence identical partitions
        return Ok(1.0);
    }
    let mut mi = 0.0;
    for (i, r) in table.iter().enumerate() {
        for (j, &c) in r.iter().enumerate() {
            if c > 0 {
                let joint = c as f64 / nf;
                mi += joint * (c as f64 * nf / (row[i] as f64 * col[j] as f64)).ln();
            }
        }
    }
    Ok((mi / denom).clamp(0.0, 1.0))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvaluationReport {
    pub acc_mean: f64,
    pub acc_std: f64,
    pub nmi_mean: f64,
    pub nmi_std: f64,
    pub repeats: usize,
}

/// Sample mean and standard deviation (`n − 1` denominator, 0 for one value).
pub fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    if n == 1 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    (mean, var.sqrt())
}

/// Stacks the selected rows of the imputed views into an `h × N` matrix.
pub fn selected_feature_matrix(
    imputed: &[Array2<f64>],
    selected: &[RankedFeature],
) -> Result<Array2<f64>> {
    let n = imputed
        .first()
        .map(|x| x.ncols())
        .ok_or_else(|| Error::InvalidArgument("no views".into()))?;
    let mut out = Array2::zeros((selected.len(), n));
    for (row, f) in out.rows_mut().into_iter().zip(selected) {
        let view = imputed.get(f.view).ok_or_else(|| {
            Error::InvalidArgument(format!("selected feature refers to missing view {}", f.view))
        })?;
        if f.feature >= view.nrows() {
            return Err(Error::InvalidArgument(format!(
                "feature {} out of range for view {}",
                f.feature, f.view
            )));
        }
        let mut row = row;
        row.assign(&view.row(f.feature));
    }
    Ok(out)
}

/// Runs k-means `repeats` times (seeds `base_seed..base_seed+repeats`) on the
/// imputed, selected features and summarises ACC and NMI.
pub fn run_protocol(
    dataset: &MultiViewDataset,
    selected: &[RankedFeature],
    clusters: usize,
    repeats: usize,
    base_seed: u64,
) -> Result<EvaluationReport> {
    let labels = dataset
        .labels()
        .ok_or_else(|| Error::InvalidArgument("evaluation needs ground-truth labels".into()))?;
    if repeats == 0 {
        return Err(Error::InvalidArgument("repeats must be positive".into()));
    }
    let data = selected_feature_matrix(&impute_missing(dataset)?, selected)?;
    let scores = (0..repeats as u64)
        .into_par_iter()
        .map(|r| {
            let run = kmeans(data.view(), clusters, base_seed.wrapping_add(r))?;
            Ok((acc(labels, &run.assignments)?, nmi(labels, &run.assignments)?))
        })
        .collect::<Result<Vec<_>>>()?;
    let accs: Vec<f64> = scores.iter().map(|s| s.0).collect();
    let nmis: Vec<f64> = scores.iter().map(|s| s.1).collect();
    let (acc_mean, acc_std) = mean_std(&accs);
    let (nmi_mean, nmi_std) = mean_std(&nmis);
    Ok(EvaluationReport {
        acc_mean,
        acc_std,
        nmi_mean,
        nmi_std,
        repeats,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn separated_clouds_split_exactly() {
        let data = array![
            [0.0, 0.1, 0.2, 0.1, 10.0, 10.1, 10.2, 9.9],
            [0.0, 0.2, 0.1, 0.1, 10.0, 9.8, 10.1, 10.0]
        ];
        for seed in 0..10 {
            let run = kmeans(data.view(), 2, seed).unwrap();
            let a = &run.assignments;
            assert!(a[..4].iter().all(|&x| x == a[0]));
            assert!(a[4..].iter().all(|&x| x == a[4]));
            assert_ne!(a[0], a[4]);
        }
    }

    #[test]
    fn one_cluster_per_point_has_zero_inertia() {
        let data = array![[0.0, 1.0, 5.0, 2.5], [3.0, 1.0, 0.0, 2.0]];
        let run = kmeans(data.view(), 4, 3).unwrap();
        assert_eq!(run.inertia, 0.0);
    }

    #[test]
    fn duplicate_points_share_assignments() {
        let data = array![[0.0, 0.0, 4.0, 4.0, 2.0, 9.0], [1.0, 1.0, 3.0, 3.0, 2.0, 0.0]];
        let run = kmeans(data.view(), 3, 8).unwrap();
        assert_eq!(run.assignments[0], run.assignments[1]);
        assert_eq!(run.assignments[2], run.assignments[3]);
    }

    #[test]
    fn duplicates_only_still_seed_distinct_indices() {
        let data = Array2::<f64>::zeros((2, 5));
        let run = kmeans(data.view(), 3, 1).unwrap();
        assert_eq!(run.inertia, 0.0);
        assert!(run.assignments.iter().all(|&a| a < 3));
    }

    #[test]
    fn too_many_clusters_is_an_error() {
        assert!(kmeans(Array2::<f64>::zeros((1, 2)).view(), 3, 0).is_err());
    }

    #[test]
    fn acc_cases() {
        assert_eq!(acc(&[0, 1, 2, 2], &[0, 1, 2, 2]).unwrap(), 1.0);
        assert_eq!(acc(&[0, 1, 2, 2], &[2, 0, 1, 1]).unwrap(), 1.0);
        assert_eq!(acc(&[0, 0, 1, 1], &[0, 1, 0, 1]).unwrap(), 0.5);
        assert_eq!(acc(&[0, 0, 0, 0], &[0, 1, 2, 3]).unwrap(), 0.25);
        assert!(acc(&[0, 1], &[0]).is_err());
    }

    #[test]
    fn nmi_cases() {
        assert!((nmi(&[0, 0, 1, 1, 2], &[0, 0, 1, 1, 2]).unwrap() - 1.0).abs() < 1e-12);
        assert!((nmi(&[0, 0, 1, 1, 2], &[4, 4, 0, 0, 7]).unwrap() - 1.0).abs() < 1e-12);
        assert!(nmi(&[0, 0, 1, 1], &[0, 1, 0, 1]).unwrap().abs() < 1e-15);
        assert_eq!(nmi(&[3, 3, 3], &[1, 1, 1]).unwrap(), 1.0);
        assert_eq!(nmi(&[0, 0, 1], &[1, 1, 1]).unwrap(), 0.0);
        assert!(nmi(&[0], &[]).is_err());
    }

    #[test]
    fn std_conventions() {
        assert_eq!(mean_std(&[0.4]), (0.4, 0.0));
        let (m, s) = mean_std(&[1.0, 2.0, 3.0]);
        assert_eq!(m, 2.0);
        assert!((s - 1.0).abs() < 1e-15);
    }
}
