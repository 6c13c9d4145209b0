use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis};

use super::{Hyperparameters, SolverState};
use crate::datamodel::{MultiViewDataset, ViewWeights};
use crate::error::{Error, Result};
use crate::graph::{laplacian, reconstruct};

/// Per-view contributions to the objective, before view weighting.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ViewTerms {
    /// `‖(X − UVᵀ)W‖²_F`
    pub reconstruction: f64,
    /// `λ Σᵢ (‖uⁱ‖² + ε)^{p/2}`, the smoothed `λ‖U‖_{2,p}^p`.
    pub sparsity: f64,
    /// `Tr(VᵀLV)`
    pub graph: f64,
    /// `‖S⁽ᵛ⁾ − Σ_{i≠v} R_{iv}S⁽ⁱ⁾‖²_F`
    pub complementarity: f64,
    /// `‖R‖²_F`
    pub coefficient_norm: f64,
}

impl ViewTerms {
    /// The bracketed per-view loss, i.e. what `(α⁽ᵛ⁾)^γ` multiplies.
    pub fn loss(&self, beta: f64) -> f64 {
        self.reconstruction
            + self.sparsity
            + beta * (self.graph + self.complementarity + self.coefficient_norm)
    }

    fn named(&self) -> [(&'static str, f64); 5] {
        [
            ("reconstruction", self.reconstruction),
            ("sparsity", self.sparsity),
            ("graph", self.graph),
            ("complementarity", self.complementarity),
            ("coefficient norm", self.coefficient_norm),
        ]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ObjectiveBreakdown {
    pub views: Vec<ViewTerms>,
    /// `(α⁽ᵛ⁾)^γ`
    pub view_scale: Vec<f64>,
    /// `‖VᵀV − I‖²_F`
    pub orthogonality: f64,
    pub beta: f64,
    pub xi: f64,
}

impl ObjectiveBreakdown {
    pub fn objective(&self) -> f64 {
        self.views
            .iter()
            .zip(&self.view_scale)
            .map(|(t, a)| a * t.loss(self.beta))
            .sum()
    }

    /// Objective plus the orthogonality penalty `ξ‖VᵀV − I‖²_F`; this is the
    /// quantity every solver step descends.
    pub fn penalized(&self) -> f64 {
        self.objective() + self.xi * self.orthogonality
    }

    pub fn check_finite(&self) -> Result<()> {
        for (v, t) in self.views.iter().enumerate() {
            for (name, value) in t.named() {
                if !value.is_finite() {
                    return Err(Error::NonFinite {
                        term: format!("{name} term of view {v} ({value})"),
                    });
                }
            }
        }
        if !self.orthogonality.is_finite() {
            return Err(Error::NonFinite {
                term: format!("orthogonality residual ({})", self.orthogonality),
            });
        }
        Ok(())
    }
}

/// `‖(X − UVᵀ)W‖²_F` with `W = diag(w)`.
pub(crate) fn weighted_residual(
    x: ArrayView2<f64>,
    u: ArrayView2<f64>,
    v: ArrayView2<f64>,
    w2: ArrayView1<f64>,
) -> f64 {
    let mut residual = u.dot(&v.t());
    residual.zip_mut_with(&x, |r, &xi| *r = xi - *r);
    residual
        .axis_iter(Axis(1))
        .zip(w2.iter())
        .map(|(col, &w)| w * col.dot(&col))
        .sum()
}

/// `Σᵢ (‖uⁱ‖² + ε)^{p/2}`
pub(crate) fn smoothed_l2p(u: ArrayView2<f64>, p: f64, epsilon: f64) -> f64 {
    u.rows()
        .into_iter()
        .map(|row| (row.dot(&row) + epsilon).powf(p / 2.0))
        .sum()
}

pub(crate) fn orthogonality_residual(v: ArrayView2<f64>) -> f64 {
    let mut g = v.t().dot(&v);
    for i in 0..g.nrows() {
        g[[i, i]] -= 1.0;
    }
    g.iter().map(|x| x * x).sum()
}

pub(crate) fn view_scale(alpha: ArrayView1<f64>, gamma: f64) -> Vec<f64> {
    alpha.iter().map(|a| a.powf(gamma)).collect()
}

pub fn objective_terms(
    state: &SolverState,
    dataset: &MultiViewDataset,
    weights: &ViewWeights,
    hyper: &Hyperparameters,
) -> ObjectiveBreakdown {
    let r_norm: f64 = state.r.matrix().iter().map(|x| x * x).sum();
    let views = (0..dataset.num_views())
        .map(|v| {
            let w2 = weights.squared(v);
            let u = state.u[v].view();
            let s = state.graphs[v].matrix();
            let lap = laplacian(s);
            let graph = (&state.v * &lap.matrix.dot(&state.v)).sum();
            let mut diff: Array2<f64> = reconstruct(v, &state.graphs, &state.r);
            diff.zip_mut_with(&s, |b, &x| *b = x - *b);
            ViewTerms {
                reconstruction: weighted_residual(dataset.view(v), u, state.v.view(), w2.view()),
                sparsity: hyper.lambda * smoothed_l2p(u, hyper.p, hyper.epsilon),
                graph,
                complementarity: diff.iter().map(|x| x * x).sum(),
                coefficient_norm: r_norm,
            }
        })
        .collect();
    ObjectiveBreakdown {
        views,
        view_scale: view_scale(state.alpha.view(), hyper.gamma),
        orthogonality: orthogonality_residual(state.v.view()),
        beta: hyper.beta,
        xi: hyper.xi,
    }
}

/// Value of the constrained objective (without the orthogonality penalty).
pub fn objective(
    state: &SolverState,
    dataset: &MultiViewDataset,
    weights: &ViewWeights,
    hyper: &Hyperparameters,
) -> Result<f64> {
    let terms = objective_terms(state, dataset, weights, hyper);
    terms.check_finite()?;
    Ok(terms.objective())
}

/// Per-view losses `d⁽ᵛ⁾` that drive the view-weight update: the bracket
/// without its `β‖R‖²_F` part.
pub fn view_losses(terms: &ObjectiveBreakdown) -> Array1<f64> {
    terms
        .views
        .iter()
        .map(|t| t.loss(terms.beta) - terms.beta * t.coefficient_norm)
        .collect()
}
