//! Multi-view datasets with missing instances.
//!
//! A dataset holds `l` nonnegative views `X⁽ᵛ⁾` of shape `d_v × N` (features by
//! instances) and an `N × l` presence mask. Entries of absent instances stay in
//! storage; every consumer must go through the mask, either via
//! [`ViewWeights`] (the solver) or [`impute_missing`] (graph construction and
//! downstream clustering).

mod io;
mod missing;
mod synthetic;

pub use io::{load_dataset, read_matrix, write_dataset, write_matrix, MANIFEST_FILE};
pub use missing::simulate_missing;
pub use synthetic::{generate_synthetic, SyntheticSpec};

use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct MultiViewDataset {
    views: Vec<Array2<f64>>,
    presence: Array2<bool>,
    labels: Option<Vec<usize>>,
    feature_names: Option<Vec<Vec<String>>>,
}

impl MultiViewDataset {
    /// Builds a dataset, validating every structural invariant.
    pub fn new(
        views: Vec<Array2<f64>>,
        presence: Array2<bool>,
        labels: Option<Vec<usize>>,
    ) -> Result<Self> {
        let ds = Self {
            views,
            presence,
            labels,
            feature_names: None,
        };
        ds.validate()?;
        Ok(ds)
    }

    /// Complete dataset: every instance present in every view.
    pub fn complete(views: Vec<Array2<f64>>, labels: Option<Vec<usize>>) -> Result<Self> {
        let n = views.first().map(|v| v.ncols()).unwrap_or(0);
        let l = views.len();
        Self::new(views, Array2::from_elem((n, l), true), labels)
    }

    pub fn with_feature_names(mut self, names: Vec<Vec<String>>) -> Result<Self> {
        if names.len() != self.views.len() {
            return Err(Error::InvalidDataset(format!(
                "{} feature-name lists for {} views",
                names.len(),
                self.views.len()
            )));
        }
        for (v, (list, x)) in names.iter().zip(&self.views).enumerate() {
            if list.len() != x.nrows() {
                return Err(Error::InvalidDataset(format!(
                    "view {v}: {} feature names for {} features",
                    list.len(),
                    x.nrows()
                )));
            }
        }
        self.feature_names = Some(names);
        Ok(self)
    }

    /// Same data, different mask.
    pub fn with_presence(&self, presence: Array2<bool>) -> Result<Self> {
        let ds = Self {
            views: self.views.clone(),
            presence,
            labels: self.labels.clone(),
            feature_names: self.feature_names.clone(),
        };
        ds.validate()?;
        Ok(ds)
    }

    fn validate(&self) -> Result<()> {
        let l = self.views.len();
        if l == 0 {
            return Err(Error::InvalidDataset("no views".into()));
        }
        let n = self.views[0].ncols();
        if n == 0 {
            return Err(Error::InvalidDataset("no instances".into()));
        }
        for (v, x) in self.views.iter().enumerate() {
            if x.ncols() != n {
                return Err(Error::InvalidDataset(format!(
                    "mismatched N: view 0 has {n} instances, view {v} has {}",
                    x.ncols()
                )));
            }
            if x.nrows() == 0 {
                return Err(Error::InvalidDataset(format!("view {v} has no features")));
            }
            for ((row, col), &value) in x.indexed_iter() {
                if !value.is_finite() {
                    return Err(Error::InvalidDataset(format!(
                        "non-finite entry in view {v} at ({row}, {col})"
                    )));
                }
                if value < 0.0 {
                    return Err(Error::NegativeEntry {
                        view: v,
                        row,
                        col,
                        value,
                    });
                }
            }
        }
        if self.presence.dim() != (n, l) {
            return Err(Error::InvalidDataset(format!(
                "presence mask is {:?}, expected ({n}, {l})",
                self.presence.dim()
            )));
        }
        for (i, row) in self.presence.axis_iter(Axis(0)).enumerate() {
            if !row.iter().any(|&p| p) {
                return Err(Error::InvalidDataset(format!(
                    "instance {i} is present in zero views"
                )));
            }
        }
        for (v, col) in self.presence.axis_iter(Axis(1)).enumerate() {
            if !col.iter().any(|&p| p) {
                return Err(Error::InvalidDataset(format!(
                    "view {v} has no present instances"
                )));
            }
        }
        if let Some(labels) = &self.labels {
            if labels.len() != n {
                return Err(Error::InvalidDataset(format!(
                    "{} labels for {n} instances",
                    labels.len()
                )));
            }
        }
        Ok(())
    }

    pub fn num_views(&self) -> usize {
        self.views.len()
    }

    pub fn num_instances(&self) -> usize {
        self.presence.nrows()
    }

    pub fn view(&self, v: usize) -> ArrayView2<'_, f64> {
        self.views[v].view()
    }

    pub fn views(&self) -> &[Array2<f64>] {
        &self.views
    }

    pub fn view_dims(&self) -> Vec<usize> {
        self.views.iter().map(|x| x.nrows()).collect()
    }

    pub fn total_features(&self) -> usize {
        self.views.iter().map(|x| x.nrows()).sum()
    }

    /// `N × l` mask, `true` where instance `i` is observed in view `v`.
    pub fn presence(&self) -> ArrayView2<'_, bool> {
        self.presence.view()
    }

    pub fn presence_column(&self, v: usize) -> ArrayView1<'_, bool> {
        self.presence.column(v)
    }

    pub fn present_count(&self, v: usize) -> usize {
        self.presence.column(v).iter().filter(|&&p| p).count()
    }

    pub fn is_complete(&self) -> bool {
        self.presence.iter().all(|&p| p)
    }

    pub fn labels(&self) -> Option<&[usize]> {
        self.labels.as_deref()
    }

    /// Number of distinct ground-truth classes, if labels exist.
    pub fn num_classes(&self) -> Option<usize> {
        self.labels.as_ref().map(|l| {
            let mut s = l.clone();
            s.sort_unstable();
            s.dedup();
            s.len()
        })
    }

    pub fn feature_names(&self) -> Option<&[Vec<String>]> {
        self.feature_names.as_deref()
    }
}

/// Diagonals of the per-view weight matrices `W⁽ᵛ⁾`.
///
/// Present instances weigh 1, absent ones weigh the view's presence fraction.
#[derive(Debug, Clone, PartialEq)]
pub struct ViewWeights {
    diagonals: Vec<Array1<f64>>,
}

impl ViewWeights {
    pub fn view(&self, v: usize) -> ArrayView1<'_, f64> {
        self.diagonals[v].view()
    }

    pub fn num_views(&self) -> usize {
        self.diagonals.len()
    }

    /// Squared diagonal, i.e. the diagonal of `W⁽ᵛ⁾W⁽ᵛ⁾`.
    pub fn squared(&self, v: usize) -> Array1<f64> {
        self.diagonals[v].mapv(|w| w * w)
    }
}

pub fn build_view_weights(dataset: &MultiViewDataset) -> ViewWeights {
    let n = dataset.num_instances();
    let diagonals = (0..dataset.num_views())
        .map(|v| {
            let mask = dataset.presence_column(v);
            let fraction = dataset.present_count(v) as f64 / n as f64;
            mask.mapv(|p| if p { 1.0 } else { fraction })
        })
        .collect();
    ViewWeights { diagonals }
}

/// Dense copies of every view with absent columns replaced by the
/// per-feature mean over the view's present instances.
pub fn impute_missing(dataset: &MultiViewDataset) -> Result<Vec<Array2<f64>>> {
    (0..dataset.num_views())
        .map(|v| impute_view(dataset.view(v), dataset.presence_column(v)))
        .collect()
}

pub(crate) fn impute_view(x: ArrayView2<f64>, mask: ArrayView1<bool>) -> Result<Array2<f64>> {
    let present: Vec<usize> = mask
        .iter()
        .enumerate()
        .filter_map(|(i, &p)| p.then_some(i))
        .collect();
    if present.is_empty() {
        return Err(Error::InvalidDataset(
            "cannot impute a view with zero present instances".into(),
        ));
    }
    let mut out = x.to_owned();
    if present.len() == mask.len() {
        return Ok(out);
    }
    let denom = present.len() as f64;
    for mut row in out.rows_mut() {
        let mean = present.iter().map(|&j| row[j]).sum::<f64>() / denom;
        for (j, value) in row.iter_mut().enumerate() {
            if !mask[j] {
                *value = mean;
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    fn mask_from(rows: &[&[u8]]) -> Array2<bool> {
        let n = rows.len();
        let l = rows[0].len();
        Array2::from_shape_fn((n, l), |(i, v)| rows[i][v] == 1)
    }

    #[test]
    fn rejects_mismatched_instance_counts() {
        let err = MultiViewDataset::complete(vec![Array2::ones((2, 3)), Array2::ones((2, 4))], None)
            .unwrap_err();
        assert!(err.to_string().contains("mismatched N"), "{err}");
    }

    #[test]
    fn rejects_negative_entry() {
        let err =
            MultiViewDataset::complete(vec![array![[1.0, -0.5], [0.0, 1.0]]], None).unwrap_err();
        assert!(err.to_string().contains("negative entry"), "{err}");
    }

    #[test]
    fn rejects_instance_absent_everywhere() {
        let views = vec![Array2::ones((1, 3)), Array2::ones((1, 3))];
        let mask = mask_from(&[&[1, 1], &[0, 0], &[1, 0]]);
        let err = MultiViewDataset::new(views, mask, None).unwrap_err();
        assert!(err.to_string().contains("zero views"), "{err}");
    }

    #[test]
    fn complete_view_has_unit_weights() {
        let ds = MultiViewDataset::complete(vec![Array2::ones((2, 5))], None).unwrap();
        let w = build_view_weights(&ds);
        assert!(w.view(0).iter().all(|&x| x == 1.0));
    }

    #[test]
    fn absent_instances_get_presence_fraction() {
        let n = 10;
        let views = vec![Array2::ones((1, n)), Array2::ones((1, n))];
        let mut mask = Array2::from_elem((n, 2), true);
        for i in 0..3 {
            mask[[i, 0]] = false;
        }
        let ds = MultiViewDataset::new(views, mask, None).unwrap();
        let w = build_view_weights(&ds);
        for i in 0..n {
            let expected = if i < 3 { 0.7 } else { 1.0 };
            assert!((w.view(0)[i] - expected).abs() < 1e-15);
            assert_eq!(w.view(1)[i], 1.0);
        }
    }

    #[test]
    fn single_present_instance_weight_is_one_over_n() {
        let n = 4;
        let views = vec![Array2::ones((1, n)), Array2::ones((1, n))];
        let mut mask = Array2::from_elem((n, 2), true);
        for i in 1..n {
            mask[[i, 0]] = false;
        }
        let ds = MultiViewDataset::new(views, mask, None).unwrap();
        let w = build_view_weights(&ds);
        assert_eq!(w.view(0)[0], 1.0);
        for i in 1..n {
            assert_eq!(w.view(0)[i], 0.25);
        }
    }

    #[test]
    fn imputation_uses_present_mean() {
        let views = vec![array![[1.0, 9.0, 3.0]], array![[1.0, 1.0, 1.0]]];
        let mask = mask_from(&[&[1, 1], &[0, 1], &[1, 1]]);
        let ds = MultiViewDataset::new(views, mask, None).unwrap();
        let imputed = impute_missing(&ds).unwrap();
        assert_eq!(imputed[0], array![[1.0, 2.0, 3.0]]);
        assert_eq!(imputed[1], array![[1.0, 1.0, 1.0]]);
    }

    #[test]
    fn imputation_of_zero_feature_stays_zero() {
        let views = vec![array![[0.0, 5.0, 0.0]], Array2::ones((1, 3))];
        let mask = mask_from(&[&[1, 1], &[0, 1], &[1, 1]]);
        let ds = MultiViewDataset::new(views, mask, None).unwrap();
        let imputed = impute_missing(&ds).unwrap();
        assert_eq!(imputed[0], array![[0.0, 0.0, 0.0]]);
    }

    #[test]
    fn imputation_is_identity_on_complete_data() {
        let x = array![[0.5, 1.5], [2.0, 0.0]];
        let ds = MultiViewDataset::complete(vec![x.clone()], None).unwrap();
        let once = impute_missing(&ds).unwrap();
        assert_eq!(once[0], x);
        let again = MultiViewDataset::complete(once.clone(), None).unwrap();
        assert_eq!(impute_missing(&again).unwrap(), once);
    }
}
