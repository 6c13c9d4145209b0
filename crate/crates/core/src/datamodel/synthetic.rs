use ndarray::Array2;
use rand::seq::{index, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::MultiViewDataset;
use crate::error::{Error, Result};

/// Level of an informative feature inside its "on" cluster.
const SIGNAL_HIGH: f64 = 1.0;
/// Level of an informative feature in every other cluster.
const SIGNAL_LOW: f64 = 0.1;
/// Background features are drawn from `U(0, BACKGROUND_LEVEL)`.
const BACKGROUND_LEVEL: f64 = 0.5;

/// Planted-cluster generator settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SyntheticSpec {
    pub instances: usize,
    pub clusters: usize,
    /// Feature count per view; its length is the view count.
    pub dims: Vec<usize>,
    /// Planted informative features per view.
    pub informative: Vec<usize>,
    #[serde(default)]
    pub noise_scale: f64,
    #[serde(default)]
    pub seed: u64,
}

impl SyntheticSpec {
    pub fn num_views(&self) -> usize {
        self.dims.len()
    }

    /// Each view gets `round(fraction · d)` informative features (at least one).
    pub fn with_informative_fraction(
        instances: usize,
        clusters: usize,
        dims: Vec<usize>,
        fraction: f64,
        noise_scale: f64,
        seed: u64,
    ) -> Self {
        let informative = dims
            .iter()
            .map(|&d| ((d as f64 * fraction).round() as usize).clamp(1, d))
            .collect();
        Self {
            instances,
            clusters,
            dims,
            informative,
            noise_scale,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidArgument(m));
        if self.clusters < 2 || self.instances < self.clusters {
            return bad(format!(
                "need N >= c >= 2, got N = {}, c = {}",
                self.instances, self.clusters
            ));
        }
        if self.dims.is_empty() {
            return bad("at least one view required".into());
        }
        if self.informative.len() != self.dims.len() {
            return bad(format!(
                "{} informative counts for {} views",
                self.informative.len(),
                self.dims.len()
            ));
        }
        for (v, (&d, &k)) in self.dims.iter().zip(&self.informative).enumerate() {
            if d == 0 {
                return bad(format!("view {v} has zero features"));
            }
            if k > d {
                return bad(format!("view {v}: {k} informative features exceed d = {d}"));
            }
        }
        if !(self.noise_scale >= 0.0 && self.noise_scale.is_finite()) {
            return bad(format!("noise_scale must be finite and >= 0, got {}", self.noise_scale));
        }
        Ok(())
    }
}

/// Complete dataset with balanced, shuffled cluster labels, plus the sorted
/// indices of the planted informative features in each view.
///
/// The `j`-th informative feature of view `v` is high in cluster
/// `(j + v) mod c` and low elsewhere, perturbed by Gaussian noise of scale
/// `noise_scale` and clipped at zero. All other features are uniform
/// background, independent of the cluster.
pub fn generate_synthetic(spec: &SyntheticSpec) -> Result<(MultiViewDataset, Vec<Vec<usize>>)> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let n = spec.instances;
    let c = spec.clusters;

    let mut labels: Vec<usize> = (0..n).map(|i| i % c).collect();
    labels.shuffle(&mut rng);

    let mut views = Vec::with_capacity(spec.num_views());
    let mut planted = Vec::with_capacity(spec.num_views());
    for (v, (&d, &k)) in spec.dims.iter().zip(&spec.informative).enumerate() {
        let mut chosen = index::sample(&mut rng, d, k).into_vec();
        chosen.sort_unstable();
        let mut on_cluster = vec![None; d];
        for (j, &f) in chosen.iter().enumerate() {
            on_cluster[f] = Some((j + v) % c);
        }

        let mut x = Array2::zeros((d, n));
        for (f, on) in on_cluster.iter().enumerate() {
            for (i, &y) in labels.iter().enumerate() {
                x[[f, i]] = match on {
                    Some(hot) => {
                        let mean = if *hot == y { SIGNAL_HIGH } else { SIGNAL_LOW };
                        let z: f64 = rng.sample(StandardNormal);
                        (mean + spec.noise_scale * z).max(0.0)
                    }
                    None => rng.random::<f64>() * BACKGROUND_LEVEL,
                };
            }
        }
        views.push(x);
        planted.push(chosen);
    }
    Ok((MultiViewDataset::complete(views, Some(labels))?, planted))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec(noise: f64) -> SyntheticSpec {
        SyntheticSpec {
            instances: 30,
            clusters: 2,
            dims: vec![6, 4],
            informative: vec![2, 4],
            noise_scale: noise,
            seed: 5,
        }
    }

    #[test]
    fn zero_noise_informative_values_constant_within_cluster() {
        let (ds, planted) = generate_synthetic(&spec(0.0)).unwrap();
        let labels = ds.labels().unwrap();
        for (v, feats) in planted.iter().enumerate() {
            for &f in feats {
                for i in 0..ds.num_instances() {
                    for j in 0..ds.num_instances() {
                        if labels[i] == labels[j] {
                            assert_eq!(ds.view(v)[[f, i]], ds.view(v)[[f, j]]);
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn fully_informative_view_plants_every_index() {
        let (_, planted) = generate_synthetic(&spec(0.1)).unwrap();
        assert_eq!(planted[1], vec![0, 1, 2, 3]);
    }

    #[test]
    fn deterministic_under_seed() {
        let a = generate_synthetic(&spec(0.3)).unwrap();
        let b = generate_synthetic(&spec(0.3)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn infeasible_specs_are_rejected() {
        let mut s = spec(0.0);
        s.informative = vec![7, 1];
        assert!(generate_synthetic(&s).is_err());
        let mut s = spec(0.0);
        s.clusters = 1;
        assert!(generate_synthetic(&s).is_err());
        let mut s = spec(0.0);
        s.instances = 1;
        assert!(generate_synthetic(&s).is_err());
    }

    #[test]
    fn labels_are_balanced() {
        let (ds, _) = generate_synthetic(&spec(0.0)).unwrap();
        let ones = ds.labels().unwrap().iter().filter(|&&y| y == 1).count();
        assert_eq!(ones, 15);
        assert_eq!(ds.num_classes(), Some(2));
    }
}
