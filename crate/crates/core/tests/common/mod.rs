//! Independent reference implementations used by the integration and
//! acceptance tests. None of these call into the solver internals they check.

#![allow(dead_code)]

use imvfs::datamodel::{build_view_weights, MultiViewDataset};
use imvfs::graph::{CrossViewCoefficients, SimilarityGraph};
use imvfs::{Hyperparameters, SolverState};
use ndarray::{Array2, ArrayView2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Column-stochastic graph with zero diagonal and random sparsity.
pub fn random_graph(n: usize, rng: &mut ChaCha8Rng) -> SimilarityGraph {
    let mut s = Array2::from_shape_fn((n, n), |(i, j)| {
        if i == j {
            0.0
        } else {
            rng.random::<f64>().powi(2)
        }
    });
    for j in 0..n {
        let sum: f64 = (0..n).map(|i| s[[i, j]]).sum();
        for i in 0..n {
            s[[i, j]] /= sum;
        }
    }
    SimilarityGraph::new(s).unwrap()
}

pub fn random_coefficients(l: usize, rng: &mut ChaCha8Rng) -> CrossViewCoefficients {
    let mut r = Array2::zeros((l, l));
    for v in 0..l {
        let mut total = 0.0;
        for i in (0..l).filter(|&i| i != v) {
            r[[i, v]] = 0.05 + rng.random::<f64>();
            total += r[[i, v]];
        }
        for i in 0..l {
            r[[i, v]] /= total;
        }
    }
    CrossViewCoefficients::new(r).unwrap()
}

/// Projection onto `{x ≥ 0, x[skip] = 0, Σx = 1}` by bisection on the
/// threshold.
pub fn project_bisect(y: &[f64], skip: usize) -> Vec<f64> {
    let mass = |t: f64| -> f64 {
        y.iter()
            .enumerate()
            .filter(|&(i, _)| i != skip)
            .map(|(_, &v)| (v - t).max(0.0))
            .sum()
    };
    let mut lo = y.iter().cloned().fold(f64::INFINITY, f64::min) - 1.0;
    let mut hi = y.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mass(mid) > 1.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let t = 0.5 * (lo + hi);
    y.iter()
        .enumerate()
        .map(|(i, &v)| if i == skip { 0.0 } else { (v - t).max(0.0) })
        .collect()
}

fn frob_dot(a: ArrayView2<f64>, b: ArrayView2<f64>) -> f64 {
    let mut s = 0.0;
    for i in 0..a.nrows() {
        for j in 0..a.ncols() {
            s += a[[i, j]] * b[[i, j]];
        }
    }
    s
}

/// Every term of the objective that involves the graphs, with `cand`
/// standing in for graph `v`:
/// `Σₖ aₖ(½Σᵢⱼ Sᵏᵢⱼ Hᵢⱼ·[k = v] + ‖Sᵏ − Σ_{i≠k} Rᵢₖ Sⁱ‖²)`, where `Hᵢⱼ` is the
/// squared distance between rows `i` and `j` of `V`. Only the graph term of
/// view `v` is included, the others do not depend on `cand`.
pub fn graph_subobjective(
    v: usize,
    cand: ArrayView2<f64>,
    graphs: &[SimilarityGraph],
    r: &CrossViewCoefficients,
    scale: &[f64],
    h: ArrayView2<f64>,
) -> f64 {
    let l = graphs.len();
    let n = cand.nrows();
    let s = |k: usize| if k == v { cand } else { graphs[k].matrix() };
    let mut total = 0.5 * scale[v] * frob_dot(cand, h);
    for k in 0..l {
        let mut sq = 0.0;
        for a in 0..n {
            for b in 0..n {
                let mut d = s(k)[[a, b]];
                for i in (0..l).filter(|&i| i != k) {
                    d -= r.matrix()[[i, k]] * s(i)[[a, b]];
                }
                sq += d * d;
            }
        }
        total += scale[k] * sq;
    }
    total
}

/// Projected gradient on [`graph_subobjective`] with a finite-difference-free
/// analytic gradient and a conservative fixed step.
pub fn graph_qp_oracle(
    v: usize,
    graphs: &[SimilarityGraph],
    r: &CrossViewCoefficients,
    scale: &[f64],
    h: ArrayView2<f64>,
    iterations: usize,
) -> Array2<f64> {
    let l = graphs.len();
    let n = graphs[v].size();
    let rm = r.matrix();
    let curvature = 2.0 * (scale[v] + (0..l).filter(|&k| k != v).map(|k| scale[k] * rm[[v, k]].powi(2)).sum::<f64>());
    let step = 0.5 / curvature;
    let mut s = graphs[v].matrix().to_owned();
    for _ in 0..iterations {
        let residual = |k: usize, s: &Array2<f64>| {
            let mut d = if k == v { s.clone() } else { graphs[k].matrix().to_owned() };
            for i in (0..l).filter(|&i| i != k) {
                let si = if i == v { s.view() } else { graphs[i].matrix() };
                d.scaled_add(-rm[[i, k]], &si);
            }
            d
        };
        let mut grad = h.to_owned() * (0.5 * scale[v]);
        grad.scaled_add(2.0 * scale[v], &residual(v, &s));
        for k in (0..l).filter(|&k| k != v) {
            grad.scaled_add(-2.0 * scale[k] * rm[[v, k]], &residual(k, &s));
        }
        let y = &s - &(grad * step);
        for j in 0..n {
            let col: Vec<f64> = y.column(j).to_vec();
            let p = project_bisect(&col, j);
            for i in 0..n {
                s[[i, j]] = p[i];
            }
        }
    }
    s
}

/// `‖S⁽ᵛ⁾ − Σ_{i≠v} rᵢ S⁽ⁱ⁾‖² + ‖r‖²` computed entrywise.
pub fn coefficient_column_objective(v: usize, col: &[f64], graphs: &[SimilarityGraph]) -> f64 {
    let n = graphs[v].size();
    let mut fit = 0.0;
    for a in 0..n {
        for b in 0..n {
            let mut d = graphs[v].matrix()[[a, b]];
            for (i, g) in graphs.iter().enumerate() {
                d -= col[i] * g.matrix()[[a, b]];
            }
            fit += d * d;
        }
    }
    fit + col.iter().map(|x| x * x).sum::<f64>()
}

/// Grid minimiser of [`coefficient_column_objective`] over the off-diagonal
/// simplex of a 4-view problem.
pub fn coefficient_grid_oracle(v: usize, graphs: &[SimilarityGraph], step: f64) -> Vec<f64> {
    assert_eq!(graphs.len(), 4);
    // expand the quadratic once through the Gram matrix of the graphs
    let g = |i: usize, j: usize| frob_dot(graphs[i].matrix(), graphs[j].matrix());
    let free: Vec<usize> = (0..4).filter(|&i| i != v).collect();
    let gram: Vec<Vec<f64>> = free.iter().map(|&i| free.iter().map(|&j| g(i, j)).collect()).collect();
    let lin: Vec<f64> = free.iter().map(|&i| g(i, v)).collect();
    let m = (1.0 / step).round() as usize;
    let mut best = (f64::INFINITY, [0.0; 3]);
    for a in 0..=m {
        for b in 0..=(m - a) {
            let x = [a as f64 * step, b as f64 * step, (m - a - b) as f64 * step];
            let mut f = 0.0;
            for i in 0..3 {
                f += x[i] * x[i] - 2.0 * x[i] * lin[i];
                for j in 0..3 {
                    f += x[i] * gram[i][j] * x[j];
                }
            }
            if f < best.0 {
                best = (f, x);
            }
        }
    }
    let mut out = vec![0.0; 4];
    for (k, &i) in free.iter().enumerate() {
        out[i] = best.1[k];
    }
    out
}

/// `Σᵥ αᵥ^γ dᵥ`
pub fn alpha_objective(alpha: &[f64], d: &[f64], gamma: f64) -> f64 {
    alpha.iter().zip(d).map(|(a, d)| a.powf(gamma) * d).sum()
}

/// Best value of [`alpha_objective`] on a simplex grid with three views.
pub fn alpha_grid_min(d: &[f64], gamma: f64, step: f64) -> f64 {
    assert_eq!(d.len(), 3);
    let m = (1.0 / step).round() as usize;
    let mut best = f64::INFINITY;
    for a in 0..=m {
        for b in 0..=(m - a) {
            let x = [a as f64 * step, b as f64 * step, (m - a - b) as f64 * step];
            best = best.min(alpha_objective(&x, d, gamma));
        }
    }
    best
}

/// Penalised objective evaluated with explicit loops.
pub fn objective_by_loops(state: &SolverState, ds: &MultiViewDataset, hyper: &Hyperparameters) -> f64 {
    let weights = build_view_weights(ds);
    let n = ds.num_instances();
    let c = state.v.ncols();
    let l = ds.num_views();
    let mut r2 = 0.0;
    for x in state.r.matrix().iter() {
        r2 += x * x;
    }
    let mut total = 0.0;
    for v in 0..l {
        let x = ds.view(v);
        let u = &state.u[v];
        let w = weights.view(v);
        let mut recon = 0.0;
        for f in 0..x.nrows() {
            for i in 0..n {
                let mut e = x[[f, i]];
                for k in 0..c {
                    e -= u[[f, k]] * state.v[[i, k]];
                }
                recon += (e * w[i]).powi(2);
            }
        }
        let mut sparse = 0.0;
        for f in 0..u.nrows() {
            let mut norm = 0.0;
            for k in 0..c {
                norm += u[[f, k]] * u[[f, k]];
            }
            sparse += (norm + hyper.epsilon).powf(hyper.p / 2.0);
        }
        let s = state.graphs[v].matrix();
        let mut graph = 0.0;
        for i in 0..n {
            for j in 0..n {
                let mut d = 0.0;
                for k in 0..c {
                    d += (state.v[[i, k]] - state.v[[j, k]]).powi(2);
                }
                graph += 0.5 * s[[i, j]] * d;
            }
        }
        let mut comp = 0.0;
        for a in 0..n {
            for b in 0..n {
                let mut d = s[[a, b]];
                for i in (0..l).filter(|&i| i != v) {
                    d -= state.r.matrix()[[i, v]] * state.graphs[i].matrix()[[a, b]];
                }
                comp += d * d;
            }
        }
        let bracket = recon + hyper.lambda * sparse + hyper.beta * (graph + comp + r2);
        total += state.alpha[v].powf(hyper.gamma) * bracket;
    }
    let mut orth = 0.0;
    for a in 0..c {
        for b in 0..c {
            let mut g = if a == b { -1.0 } else { 0.0 };
            for i in 0..n {
                g += state.v[[i, a]] * state.v[[i, b]];
            }
            orth += g * g;
        }
    }
    total + hyper.xi * orth
}

/// Smoothed `Σᵢ (‖uⁱ‖² + ε)^{p/2}`.
pub fn smoothed_penalty(u: &Array2<f64>, p: f64, epsilon: f64) -> f64 {
    u.rows()
        .into_iter()
        .map(|row| (row.iter().map(|x| x * x).sum::<f64>() + epsilon).powf(p / 2.0))
        .sum()
}

/// Central differences of [`smoothed_penalty`].
pub fn penalty_fd_gradient(u: &Array2<f64>, p: f64, epsilon: f64, h: f64) -> Array2<f64> {
    let mut g = Array2::zeros(u.dim());
    for i in 0..u.nrows() {
        for j in 0..u.ncols() {
            let mut plus = u.clone();
            let mut minus = u.clone();
            plus[[i, j]] += h;
            minus[[i, j]] -= h;
            g[[i, j]] = (smoothed_penalty(&plus, p, epsilon) - smoothed_penalty(&minus, p, epsilon)) / (2.0 * h);
        }
    }
    g
}

/// ACC by enumerating every bijection between predicted and true labels.
pub fn brute_force_acc(truth: &[usize], pred: &[usize], c: usize) -> f64 {
    let mut perm: Vec<usize> = (0..c).collect();
    let mut best = 0usize;
    permute(&mut perm, 0, &mut |p| {
        let hits = truth.iter().zip(pred).filter(|&(&t, &q)| p[q] == t).count();
        best = best.max(hits);
    });
    best as f64 / truth.len() as f64
}

fn permute(p: &mut Vec<usize>, k: usize, visit: &mut dyn FnMut(&[usize])) {
    if k == p.len() {
        visit(p);
        return;
    }
    for i in k..p.len() {
        p.swap(k, i);
        permute(p, k + 1, visit);
        p.swap(k, i);
    }
}
