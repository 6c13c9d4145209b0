//! Alternating solver for the feature-selection objective
//!
//! ```text
//! Σᵥ (α⁽ᵛ⁾)^γ [ ‖(X⁽ᵛ⁾ − U⁽ᵛ⁾Vᵀ)W⁽ᵛ⁾‖² + λ‖U⁽ᵛ⁾‖_{2,p}^p
//!              + β( Tr(VᵀL⁽ᵛ⁾V) + ‖S⁽ᵛ⁾ − Σ_{i≠v} R_{iv}S⁽ⁱ⁾‖² + ‖R‖² ) ]
//! ```
//!
//! with `V ≥ 0` kept near-orthonormal through the penalty `ξ‖VᵀV − I‖²`.
//! One sweep updates `V`, every `U⁽ᵛ⁾`, every `S⁽ᵛ⁾` (Gauss–Seidel), `R`
//! and `α`, in that order.

mod coefficients;
mod objective;
mod updates;

use std::time::{Duration, Instant};

use ndarray::{Array1, Array2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

pub use crate::simplex::project_offdiag_simplex;
pub use coefficients::{
    gram_matrix, solve_coefficients, solve_column, update_r, ColumnSolution, ColumnWeights,
    GRADIENT_MAPPING_TOL, MAX_INNER_ITERATIONS,
};
pub use objective::{objective, objective_terms, view_losses, ObjectiveBreakdown, ViewTerms};
pub use updates::{sparsity_reweight, update_alpha, update_u, update_v, DENOMINATOR_FLOOR};

use crate::datamodel::{build_view_weights, impute_missing, MultiViewDataset, ViewWeights};
use crate::error::{Error, Result};
use crate::graph::{
    build_initial_similarity, pairwise_sq_dists, update_similarity, Bandwidth,
    CrossViewCoefficients, SimilarityGraph,
};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Hyperparameters {
    /// Weight of the row-sparsity term.
    pub lambda: f64,
    /// Weight of the graph and reconstruction terms.
    pub beta: f64,
    /// View-weight exponent, must exceed 1.
    pub gamma: f64,
    /// Sparsity exponent in `(0, 1]`.
    pub p: f64,
    /// Orthogonality penalty on `V`.
    pub xi: f64,
    /// Smoothing floor of the `ℓ2,p` reweighting.
    pub epsilon: f64,
    pub clusters: usize,
    pub max_iter: usize,
    pub rel_tol: f64,
    pub seed: u64,
    /// Neighbours in the initial graphs.
    pub knn: usize,
}

impl Default for Hyperparameters {
    fn default() -> Self {
        Self {
            lambda: 0.1,
            beta: 0.1,
            gamma: 2.0,
            p: 1.0,
            xi: 1e7,
            epsilon: 1e-10,
            clusters: 2,
            max_iter: 300,
            rel_tol: 1e-6,
            seed: 0,
            knn: 5,
        }
    }
}

impl Hyperparameters {
    pub fn new(clusters: usize) -> Self {
        Self {
            clusters,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidArgument(m));
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) {
            return bad(format!("lambda must be finite and >= 0, got {}", self.lambda));
        }
        if !(self.beta >= 0.0 && self.beta.is_finite()) {
            return bad(format!("beta must be finite and >= 0, got {}", self.beta));
        }
        if !(self.gamma > 1.0 && self.gamma.is_finite()) {
            return bad(format!("gamma must exceed 1, got {}", self.gamma));
        }
        if !(self.p > 0.0 && self.p <= 1.0) {
            return bad(format!("p must lie in (0, 1], got {}", self.p));
        }
        if !(self.xi > 0.0 && self.xi.is_finite()) {
            return bad(format!("xi must be positive, got {}", self.xi));
        }
        if !(self.epsilon > 0.0 && self.epsilon.is_finite()) {
            return bad(format!("epsilon must be positive, got {}", self.epsilon));
        }
        if self.clusters < 2 {
            return bad(format!("need at least 2 clusters, got {}", self.clusters));
        }
        if !(self.rel_tol >= 0.0) {
            return bad(format!("rel_tol must be >= 0, got {}", self.rel_tol));
        }
        if self.knn == 0 {
            return bad("knn must be positive".into());
        }
        Ok(())
    }
}

/// All optimisation variables.
#[derive(Debug, Clone, PartialEq)]
pub struct SolverState {
    /// `d_v × c` feature-selection matrices.
    pub u: Vec<Array2<f64>>,
    /// `N × c` shared indicator matrix.
    pub v: Array2<f64>,
    pub graphs: Vec<SimilarityGraph>,
    pub r: CrossViewCoefficients,
    pub alpha: Array1<f64>,
}

impl SolverState {
    /// Checks every hard constraint; `tol` applies to the simplex sums of the
    /// graphs and coefficients, `alpha_tol` to `Σα = 1`.
    pub fn check_constraints(&self, tol: f64, alpha_tol: f64) -> Result<()> {
        for (v, u) in self.u.iter().enumerate() {
            if u.iter().any(|&x| !(x >= 0.0)) {
                return Err(Error::Degenerate(format!("U of view {v} has a negative entry")));
            }
        }
        if self.v.iter().any(|&x| !(x >= 0.0)) {
            return Err(Error::Degenerate("V has a negative entry".into()));
        }
        let sum = self.alpha.sum();
        if (sum - 1.0).abs() > alpha_tol || self.alpha.iter().any(|&a| !(0.0..=1.0).contains(&a)) {
            return Err(Error::Degenerate(format!("alpha {} is off the simplex", self.alpha)));
        }
        for g in &self.graphs {
            g.check(tol)?;
        }
        self.r.check(tol)
    }

    /// `‖VᵀV − I‖_F`
    pub fn orthogonality_residual(&self) -> f64 {
        objective::orthogonality_residual(self.v.view()).sqrt()
    }
}

#[derive(Debug, Clone)]
pub struct SolverResult {
    pub state: SolverState,
    /// Penalised objective before the first sweep and after every sweep.
    pub trace: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
    pub elapsed: Duration,
}

/// Random positive factors, kNN graphs on the imputed views, uniform `R` and
/// `α = 1/l`.
pub fn initialize(
    dataset: &MultiViewDataset,
    weights: &ViewWeights,
    hyper: &Hyperparameters,
) -> Result<SolverState> {
    hyper.validate()?;
    let l = dataset.num_views();
    if l < 2 {
        return Err(Error::InvalidArgument(
            "complementary graph reconstruction needs at least 2 views".into(),
        ));
    }
    if weights.num_views() != l {
        return Err(Error::InvalidArgument(format!(
            "{} weight vectors for {l} views",
            weights.num_views()
        )));
    }
    let n = dataset.num_instances();
    if n < 2 {
        return Err(Error::InvalidArgument("need at least 2 instances".into()));
    }
    let c = hyper.clusters;
    let mut rng = ChaCha8Rng::seed_from_u64(hyper.seed);
    let mut positive = |rows: usize| Array2::from_shape_fn((rows, c), |_| 0.1 + rng.random::<f64>());
    let u = dataset.view_dims().into_iter().map(&mut positive).collect();
    let v = positive(n);

    let imputed = impute_missing(dataset)?;
    let graphs = imputed
        .iter()
        .enumerate()
        .map(|(view, x)| {
            let present = dataset.present_count(view);
            if present < 2 {
                return Ok(SimilarityGraph::uniform(n));
            }
            let k = hyper.knn.min(present - 1);
            build_initial_similarity(x.view(), dataset.presence_column(view), k, Bandwidth::Auto)
        })
        .collect::<Result<Vec<_>>>()?;

    Ok(SolverState {
        u,
        v,
        graphs,
        r: CrossViewCoefficients::uniform(l),
        alpha: Array1::from_elem(l, 1.0 / l as f64),
    })
}

/// One full sweep in the fixed order `V, U, S, R, α`.
pub fn sweep(
    state: &mut SolverState,
    dataset: &MultiViewDataset,
    weights: &ViewWeights,
    hyper: &Hyperparameters,
) -> Result<ObjectiveBreakdown> {
    state.v = update_v(state, dataset, weights, hyper);

    let new_u: Vec<Array2<f64>> = (0..dataset.num_views())
        .map(|view| update_u(view, state, dataset, weights, hyper))
        .collect();
    state.u = new_u;

    let h = pairwise_sq_dists(state.v.view());
    let alpha = state.alpha.to_vec();
    for view in 0..dataset.num_views() {
        state.graphs[view] =
            update_similarity(view, &state.graphs, &state.r, &alpha, hyper.gamma, h.view())?;
    }

    state.r = update_r(state)?;

    let mut terms = objective_terms(state, dataset, weights, hyper);
    terms.check_finite()?;
    state.alpha = update_alpha(view_losses(&terms).view(), hyper.gamma)?;
    terms.view_scale = objective::view_scale(state.alpha.view(), hyper.gamma);
    Ok(terms)
}

/// Runs sweeps until the relative change of the penalised objective drops
/// below `rel_tol` or `max_iter` sweeps have run.
pub fn fit(dataset: &MultiViewDataset, hyper: &Hyperparameters) -> Result<SolverResult> {
    let weights = build_view_weights(dataset);
    let state = initialize(dataset, &weights, hyper)?;
    fit_from(state, dataset, &weights, hyper)
}

/// [`fit`] from a caller-supplied starting point.
pub fn fit_from(
    mut state: SolverState,
    dataset: &MultiViewDataset,
    weights: &ViewWeights,
    hyper: &Hyperparameters,
) -> Result<SolverResult> {
    hyper.validate()?;
    let start = Instant::now();
    let initial = objective_terms(&state, dataset, weights, hyper);
    initial.check_finite()?;
    let mut trace = Vec::with_capacity(hyper.max_iter + 1);
    trace.push(initial.penalized());

    let mut converged = false;
    let mut iterations = 0;
    while iterations < hyper.max_iter {
        let terms = sweep(&mut state, dataset, weights, hyper)?;
        terms.check_finite()?;
        iterations += 1;
        let prev = *trace.last().expect("trace starts non-empty");
        let cur = terms.penalized();
        trace.push(cur);
        log::trace!("sweep {iterations}: objective {cur}");
        if (cur - prev).abs() / prev.abs().max(1.0) < hyper.rel_tol {
            converged = true;
            break;
        }
    }
    Ok(SolverResult {
        state,
        trace,
        iterations,
        converged,
        elapsed: start.elapsed(),
    })
}

/// Two-column `iteration value` text, one line per trace entry.
pub fn format_trace(trace: &[f64]) -> String {
    trace
        .iter()
        .enumerate()
        .map(|(i, f)| format!("{i} {f}\n"))
        .collect()
}

/// Inverse of [`format_trace`].
pub fn parse_trace(text: &str) -> Result<Vec<f64>> {
    text.lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .enumerate()
        .map(|(expected, line)| {
            let mut fields = line.split_whitespace();
            let (Some(i), Some(f), None) = (fields.next(), fields.next(), fields.next()) else {
                return Err(Error::InvalidArgument(format!("bad trace line {line:?}")));
            };
            if i.parse::<usize>().ok() != Some(expected) {
                return Err(Error::InvalidArgument(format!(
                    "trace line {line:?}: expected iteration {expected}"
                )));
            }
            f.parse::<f64>()
                .map_err(|_| Error::InvalidArgument(format!("bad trace value in {line:?}")))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::datamodel::{generate_synthetic, simulate_missing, SyntheticSpec};

    fn small_dataset(seed: u64) -> MultiViewDataset {
        let spec = SyntheticSpec::with_informative_fraction(30, 3, vec![8, 6, 5], 0.4, 0.05, seed);
        let (ds, _) = generate_synthetic(&spec).unwrap();
        simulate_missing(&ds, 0.2, seed).unwrap()
    }

    #[test]
    fn initialization_is_deterministic_and_valid() {
        let ds = small_dataset(1);
        let w = build_view_weights(&ds);
        let h = Hyperparameters::new(3);
        let a = initialize(&ds, &w, &h).unwrap();
        let b = initialize(&ds, &w, &h).unwrap();
        assert_eq!(a, b);
        a.check_constraints(1e-8, 1e-10).unwrap();
        assert!(a.u.iter().all(|u| u.iter().all(|&x| x > 0.1 && x < 1.1)));
    }

    #[test]
    fn single_view_is_rejected() {
        let ds = MultiViewDataset::complete(vec![Array2::ones((3, 6))], None).unwrap();
        let w = build_view_weights(&ds);
        assert!(initialize(&ds, &w, &Hyperparameters::new(2)).is_err());
    }

    #[test]
    fn zero_iterations_returns_initial_state() {
        let ds = small_dataset(2);
        let h = Hyperparameters {
            max_iter: 0,
            ..Hyperparameters::new(3)
        };
        let res = fit(&ds, &h).unwrap();
        assert_eq!(res.trace.len(), 1);
        assert_eq!(res.iterations, 0);
        assert!(!res.converged);
        let w = build_view_weights(&ds);
        assert_eq!(res.state, initialize(&ds, &w, &h).unwrap());
    }

    #[test]
    fn sweeps_keep_constraints_and_descend() {
        let ds = small_dataset(3);
        let h = Hyperparameters {
            max_iter: 40,
            p: 0.5,
            ..Hyperparameters::new(3)
        };
        let w = build_view_weights(&ds);
        let mut state = initialize(&ds, &w, &h).unwrap();
        let mut prev = objective_terms(&state, &ds, &w, &h).penalized();
        for _ in 0..40 {
            let cur = sweep(&mut state, &ds, &w, &h).unwrap().penalized();
            state.check_constraints(1e-8, 1e-10).unwrap();
            assert!(cur <= prev * (1.0 + 1e-6), "{cur} > {prev}");
            prev = cur;
        }
    }

    #[test]
    fn trace_text_round_trips() {
        let trace = vec![12.5, 3.25, 1e-3];
        assert_eq!(parse_trace(&format_trace(&trace)).unwrap(), trace);
        assert!(parse_trace("0 1\n2 3\n").is_err());
    }

    #[test]
    fn invalid_hyperparameters_are_rejected() {
        for h in [
            Hyperparameters { gamma: 1.0, ..Hyperparameters::new(2) },
            Hyperparameters { p: 0.0, ..Hyperparameters::new(2) },
            Hyperparameters { p: 1.5, ..Hyperparameters::new(2) },
            Hyperparameters { lambda: -1.0, ..Hyperparameters::new(2) },
            Hyperparameters::new(1),
        ] {
            assert!(h.validate().is_err(), "{h:?}");
        }
    }
}
