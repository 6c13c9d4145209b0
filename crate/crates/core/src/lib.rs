//! Unsupervised feature selection for multi-view data with missing views.
//!
//! Each view is factorised by a missing-aware weighted NMF `X⁽ᵛ⁾ ≈ U⁽ᵛ⁾Vᵀ`
//! with a shared cluster indicator `V`. Per-view similarity graphs are
//! reconstructed from one another, view weights are learned, and an `ℓ2,p`
//! penalty on `U⁽ᵛ⁾` makes its row norms usable as feature scores.

pub mod cli;
pub mod datamodel;
pub mod error;
pub mod eval;
pub mod graph;
pub mod optimizer;
pub mod selection;
mod simplex;

pub use datamodel::{MultiViewDataset, SyntheticSpec};
pub use error::{Error, Result};
pub use optimizer::{fit, Hyperparameters, SolverResult, SolverState};
pub use selection::{score_features, select_top, FeatureRanking, RankedFeature, SelectionMode, SelectionSize};
