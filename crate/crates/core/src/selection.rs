//! Feature ranking by the row norms of the learned `U⁽ᵛ⁾`.

use std::cmp::Ordering;
use std::fmt::Write as _;

use ndarray::Array2;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RankedFeature {
    pub view: usize,
    pub feature: usize,
    pub score: f64,
}

/// All features of all views, sorted by descending score with ties broken by
/// `(view, feature)` ascending.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureRanking {
    entries: Vec<RankedFeature>,
    dims: Vec<usize>,
}

impl FeatureRanking {
    pub fn entries(&self) -> &[RankedFeature] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn view_dims(&self) -> &[usize] {
        &self.dims
    }
}

fn ranking_order(a: &RankedFeature, b: &RankedFeature) -> Ordering {
    b.score
        .total_cmp(&a.score)
        .then(a.view.cmp(&b.view))
        .then(a.feature.cmp(&b.feature))
}

pub fn score_features(u: &[Array2<f64>]) -> FeatureRanking {
    let mut entries: Vec<RankedFeature> = u
        .iter()
        .enumerate()
        .flat_map(|(view, m)| {
            m.rows().into_iter().enumerate().map(move |(feature, row)| RankedFeature {
                view,
                feature,
                score: row.dot(&row).sqrt(),
            })
        })
        .collect();
    entries.sort_by(ranking_order);
    FeatureRanking {
        entries,
        dims: u.iter().map(|m| m.nrows()).collect(),
    }
}

/// How many features to keep.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SelectionSize {
    /// `h = ⌈ratio · Σ d_v⌉`.
    Ratio(f64),
    Count(usize),
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub enum SelectionMode {
    /// Top `h` of the pooled ranking.
    #[default]
    Global,
    /// Top `⌈ratio · d_v⌉` within each view; only defined for ratios.
    PerView,
}

fn ratio_count(ratio: f64, total: usize) -> Result<usize> {
    if !(ratio > 0.0 && ratio <= 1.0) {
        return Err(Error::InvalidArgument(format!(
            "feature ratio must lie in (0, 1], got {ratio}"
        )));
    }
    // the epsilon absorbs representation error such as 0.2 * 10 = 2.0000000000000004
    Ok(((ratio * total as f64) - 1e-9).ceil().max(1.0) as usize)
}

/// Selected features in ranking order.
pub fn select_top(
    ranking: &FeatureRanking,
    size: SelectionSize,
    mode: SelectionMode,
) -> Result<Vec<RankedFeature>> {
    let total = ranking.len();
    match (mode, size) {
        (SelectionMode::Global, size) => {
            let h = match size {
                SelectionSize::Ratio(r) => ratio_count(r, total)?,
                SelectionSize::Count(h) => h,
            };
            if h == 0 || h > total {
                return Err(Error::InvalidArgument(format!(
                    "cannot select {h} of {total} features"
                )));
            }
            Ok(ranking.entries[..h].to_vec())
        }
        (SelectionMode::PerView, SelectionSize::Ratio(r)) => {
            let quotas = ranking
                .dims
                .iter()
                .map(|&d| ratio_count(r, d))
                .collect::<Result<Vec<_>>>()?;
            let mut taken = vec![0; quotas.len()];
            Ok(ranking
                .entries
                .iter()
                .filter(|e| {
                    let keep = taken[e.view] < quotas[e.view];
                    taken[e.view] += usize::from(keep);
                    keep
                })
                .copied()
                .collect())
        }
        (SelectionMode::PerView, SelectionSize::Count(_)) => Err(Error::InvalidArgument(
            "per-view selection needs a ratio".into(),
        )),
    }
}

/// `view_index feature_index score` lines.
pub fn format_selection(selected: &[RankedFeature]) -> String {
    let mut out = String::new();
    for f in selected {
        writeln!(out, "{} {} {}", f.view, f.feature, f.score).expect("write to String");
    }
    out
}
