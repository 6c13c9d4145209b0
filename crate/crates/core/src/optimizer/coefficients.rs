//! Cross-view coefficient update.
//!
//! Column `v` of `R` solves
//! `min_r  a‖K(:,v) − K r‖² + b‖r‖²` over the off-diagonal simplex, where `K`
//! stacks the vectorised graphs. Only the `l × l` Gram matrix `G = KᵀK` is
//! ever formed, so a gradient `2a(Gr − G(:,v)) + 2br` costs `O(l²)`.

use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis};

use super::SolverState;
use crate::error::{Error, Result};
use crate::graph::{CrossViewCoefficients, SimilarityGraph};
use crate::simplex::project_into;

pub const GRADIENT_MAPPING_TOL: f64 = 1e-8;
pub const MAX_INNER_ITERATIONS: usize = 1000;

/// Weights `(a, b)` of one column subproblem.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ColumnWeights {
    pub fit: f64,
    pub ridge: f64,
}

impl ColumnWeights {
    pub const UNIT: Self = Self { fit: 1.0, ridge: 1.0 };
}

/// `G[i,j] = ⟨S⁽ⁱ⁾, S⁽ʲ⁾⟩_F`
pub fn gram_matrix(graphs: &[SimilarityGraph]) -> Result<Array2<f64>> {
    let l = graphs.len();
    let mut g = Array2::zeros((l, l));
    for i in 0..l {
        for j in i..l {
            let dot: f64 = graphs[i]
                .matrix()
                .iter()
                .zip(graphs[j].matrix().iter())
                .map(|(a, b)| a * b)
                .sum();
            g[[i, j]] = dot;
            g[[j, i]] = dot;
        }
    }
    if g.iter().any(|x| !x.is_finite()) {
        return Err(Error::NonFinite {
            term: "graph Gram matrix".into(),
        });
    }
    Ok(g)
}

/// Outcome of one accelerated projected-gradient solve.
#[derive(Debug, Clone)]
pub struct ColumnSolution {
    pub coefficients: Array1<f64>,
    pub iterations: usize,
    pub gradient_mapping_norm: f64,
}

/// Accelerated projected gradient for column `v`, with step `1/L` where
/// `L = 2(a·ρ(G) + b)` and `ρ(G)` is bounded by the largest absolute row sum.
/// Momentum restarts whenever a step fails to decrease the objective.
pub fn solve_column(
    gram: ArrayView2<f64>,
    v: usize,
    weights: ColumnWeights,
    start: ArrayView1<f64>,
) -> Result<ColumnSolution> {
    let l = gram.nrows();
    if l < 2 {
        return Err(Error::InvalidArgument("coefficient update needs at least 2 views".into()));
    }
    let ColumnWeights { fit: a, ridge: b } = weights;
    let spectral_bound = gram
        .axis_iter(Axis(0))
        .map(|row| row.iter().map(|x| x.abs()).sum::<f64>())
        .fold(0.0, f64::max);
    let lipschitz = 2.0 * (a * spectral_bound + b);
    if !(lipschitz > 0.0 && lipschitz.is_finite()) {
        // nothing to minimise; any feasible point is optimal
        let mut r = vec![0.0; l];
        let s = start.to_vec();
        project_into(&s, v, &mut r, &mut Vec::new());
        return Ok(ColumnSolution {
            coefficients: Array1::from(r),
            iterations: 0,
            gradient_mapping_norm: 0.0,
        });
    }
    let target = gram.column(v);
    let value = |r: &Array1<f64>| a * (r.dot(&gram.dot(r)) - 2.0 * r.dot(&target)) + b * r.dot(r);
    let gradient = |r: &Array1<f64>| (gram.dot(r) - target) * (2.0 * a) + r * (2.0 * b);

    let mut scratch = Vec::with_capacity(l);
    let mut buf = vec![0.0; l];
    let mut project_step = |point: &Array1<f64>, grad: &Array1<f64>| {
        let y: Vec<f64> = point
            .iter()
            .zip(grad)
            .map(|(p, g)| p - g / lipschitz)
            .collect();
        project_into(&y, v, &mut buf, &mut scratch);
        Array1::from(buf.clone())
    };

    let mut x = project_step(&start.to_owned(), &Array1::zeros(l));
    let mut fx = value(&x);
    let mut y = x.clone();
    let mut t = 1.0f64;
    let mut mapping_norm = f64::INFINITY;
    let mut iterations = 0;
    while iterations < MAX_INNER_ITERATIONS {
        iterations += 1;
        let gx = gradient(&x);
        let plain = project_step(&x, &gx);
        mapping_norm = lipschitz * (&x - &plain).dot(&(&x - &plain)).sqrt();
        if mapping_norm <= GRADIENT_MAPPING_TOL {
            break;
        }
        let mut next = project_step(&y, &gradient(&y));
        let mut fnext = value(&next);
        if fnext > fx {
            // restart momentum from a plain projected-gradient step
            next = plain;
            fnext = value(&next);
            t = 1.0;
            y = next.clone();
        } else {
            let t_next = 0.5 * (1.0 + (1.0 + 4.0 * t * t).sqrt());
            y = &next + &((&next - &x) * ((t - 1.0) / t_next));
            t = t_next;
        }
        x = next;
        fx = fnext;
    }
    Ok(ColumnSolution {
        coefficients: x,
        iterations,
        gradient_mapping_norm: mapping_norm,
    })
}

/// Solves every column of `R` with per-column weights, warm-started from
/// `previous` when given.
pub fn solve_coefficients(
    graphs: &[SimilarityGraph],
    weights: &[ColumnWeights],
    previous: Option<&CrossViewCoefficients>,
) -> Result<CrossViewCoefficients> {
    let l = graphs.len();
    if weights.len() != l {
        return Err(Error::InvalidArgument(format!(
            "{} column weights for {l} views",
            weights.len()
        )));
    }
    let gram = gram_matrix(graphs)?;
    let fallback = CrossViewCoefficients::uniform(l);
    let start = previous.unwrap_or(&fallback);
    let mut r = Array2::zeros((l, l));
    for v in 0..l {
        let sol = solve_column(gram.view(), v, weights[v], start.matrix().column(v))?;
        if sol.gradient_mapping_norm > GRADIENT_MAPPING_TOL {
            log::debug!(
                "R column {v}: gradient mapping {} after {} iterations",
                sol.gradient_mapping_norm,
                sol.iterations
            );
        }
        r.column_mut(v).assign(&sol.coefficients);
    }
    Ok(CrossViewCoefficients::from_columns_unchecked(r))
}

/// Solves every column with unit weights, `min ‖K(:,v) − K r‖² + ‖r‖²`.
/// The objective scales each view's copy of these terms by `(α⁽ᵛ⁾)^γ`; the
/// update ignores that scaling.
pub fn update_r(state: &SolverState) -> Result<CrossViewCoefficients> {
    let weights = vec![ColumnWeights::UNIT; state.graphs.len()];
    solve_coefficients(&state.graphs, &weights, Some(&state.r))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_graph(n: usize, rng: &mut ChaCha8Rng) -> SimilarityGraph {
        let mut s = Array2::from_shape_fn((n, n), |(i, j)| if i == j { 0.0 } else { rng.random::<f64>().powi(3) });
        for mut c in s.axis_iter_mut(Axis(1)) {
            let t = c.sum();
            c /= t;
        }
        SimilarityGraph::new(s).unwrap()
    }

    #[test]
    fn two_views_are_constraint_forced() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let graphs = vec![random_graph(6, &mut rng), random_graph(6, &mut rng)];
        let r = solve_coefficients(&graphs, &[ColumnWeights::UNIT; 2], None).unwrap();
        assert_eq!(r.matrix(), ndarray::array![[0.0, 1.0], [1.0, 0.0]]);
    }

    #[test]
    fn identical_graphs_split_evenly() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let g = random_graph(7, &mut rng);
        let graphs = vec![g.clone(), g.clone(), g];
        let r = solve_coefficients(&graphs, &[ColumnWeights::UNIT; 3], None).unwrap();
        for v in 0..3 {
            for i in 0..3 {
                let expected = if i == v { 0.0 } else { 0.5 };
                assert!((r.matrix()[[i, v]] - expected).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn solver_reaches_gradient_mapping_tolerance() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let graphs: Vec<_> = (0..5).map(|_| random_graph(30, &mut rng)).collect();
        let gram = gram_matrix(&graphs).unwrap();
        for v in 0..5 {
            let start = Array1::from_elem(5, 0.25);
            let sol = solve_column(gram.view(), v, ColumnWeights::UNIT, start.view()).unwrap();
            assert!(sol.gradient_mapping_norm <= GRADIENT_MAPPING_TOL, "{sol:?}");
        }
    }

    #[test]
    fn output_satisfies_invariants() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let graphs: Vec<_> = (0..4).map(|_| random_graph(9, &mut rng)).collect();
        let weights = [
            ColumnWeights { fit: 0.1, ridge: 0.9 },
            ColumnWeights { fit: 0.4, ridge: 0.9 },
            ColumnWeights { fit: 0.2, ridge: 0.9 },
            ColumnWeights { fit: 0.3, ridge: 0.9 },
        ];
        let r = solve_coefficients(&graphs, &weights, None).unwrap();
        r.check(1e-12).unwrap();
    }
}
