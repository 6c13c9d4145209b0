//! Multiplicative updates for `U⁽ᵛ⁾` and `V`, the reweighting behind the
//! `ℓ2,p` term, and the closed-form view weights.

use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis, Zip};

use super::objective::{orthogonality_residual, view_scale, weighted_residual};
use super::{Hyperparameters, SolverState};
use crate::datamodel::{MultiViewDataset, ViewWeights};
use crate::error::{Error, Result};
use crate::graph::laplacian;

/// Added to every multiplicative-update denominator.
pub const DENOMINATOR_FLOOR: f64 = 1e-12;

/// Exponents tried for the `V` step, first one being the plain square-root
/// rule. A smaller exponent is a shorter step along the same direction.
const V_STEP_EXPONENTS: [f64; 8] = [0.5, 0.25, 0.125, 0.0625, 0.03125, 0.015625, 7.8125e-3, 3.90625e-3];

/// Diagonal of the reweighting matrix for `λ‖U‖_{2,p}^p`:
/// `Dᵢᵢ = (p/2)(‖uⁱ‖² + ε)^{(p−2)/2}`.
///
/// `2DU` is the gradient of `Σᵢ(‖uⁱ‖² + ε)^{p/2}`, and the quadratic
/// `Tr(UᵀDU)` majorises that sum up to a constant, so minimising the
/// reweighted problem never increases the smoothed penalty.
pub fn sparsity_reweight(u: ArrayView2<f64>, p: f64, epsilon: f64) -> Array1<f64> {
    u.rows()
        .into_iter()
        .map(|row| 0.5 * p * (row.dot(&row) + epsilon).powf(0.5 * p - 1.0))
        .collect()
}

/// One multiplicative step on `U⁽ᵛ⁾`:
/// `U ← U ⊙ √( XW²V / (UVᵀW²V + λDU) )`.
pub fn update_u(
    view: usize,
    state: &SolverState,
    dataset: &MultiViewDataset,
    weights: &ViewWeights,
    hyper: &Hyperparameters,
) -> Array2<f64> {
    let w2 = weights.squared(view);
    let x = dataset.view(view);
    u_step(x, state.u[view].view(), state.v.view(), w2.view(), hyper)
}

pub(crate) fn u_step(
    x: ArrayView2<f64>,
    u: ArrayView2<f64>,
    v: ArrayView2<f64>,
    w2: ArrayView1<f64>,
    hyper: &Hyperparameters,
) -> Array2<f64> {
    let w2v = scale_rows(v, w2);
    let numer = x.dot(&w2v);
    let d = sparsity_reweight(u, hyper.p, hyper.epsilon);
    let mut denom = u.dot(&v.t().dot(&w2v));
    Zip::from(denom.rows_mut())
        .and(u.rows())
        .and(&d)
        .for_each(|mut den, urow, &di| den.scaled_add(hyper.lambda * di, &urow));

    let mut out = u.to_owned();
    Zip::from(&mut out)
        .and(&numer)
        .and(&denom)
        .for_each(|o, &n, &d| *o *= (n / (d + DENOMINATOR_FLOOR)).sqrt());
    out
}

/// `diag(w) · M`
fn scale_rows(m: ArrayView2<f64>, w: ArrayView1<f64>) -> Array2<f64> {
    let mut out = m.to_owned();
    for (mut row, &wi) in out.axis_iter_mut(Axis(0)).zip(w) {
        row *= wi;
    }
    out
}

/// Everything the `V` step needs that does not depend on `V`.
struct VProblem<'a> {
    xs: Vec<ArrayView2<'a, f64>>,
    us: Vec<ArrayView2<'a, f64>>,
    w2: Vec<Array1<f64>>,
    scale: Vec<f64>,
    /// `β Σᵥ aᵥ Aᵥ` for the symmetrised adjacencies `Aᵥ`.
    adjacency: Array2<f64>,
    /// Matching degree diagonal.
    degree: Array1<f64>,
    xi: f64,
}

impl<'a> VProblem<'a> {
    fn new(
        state: &'a SolverState,
        dataset: &'a MultiViewDataset,
        weights: &ViewWeights,
        hyper: &Hyperparameters,
    ) -> Self {
        let l = dataset.num_views();
        let n = dataset.num_instances();
        let scale = view_scale(state.alpha.view(), hyper.gamma);
        let mut adjacency = Array2::zeros((n, n));
        let mut degree = Array1::zeros(n);
        if hyper.beta != 0.0 {
            for v in 0..l {
                let lap = laplacian(state.graphs[v].matrix());
                adjacency.scaled_add(hyper.beta * scale[v], &lap.adjacency);
                degree.scaled_add(hyper.beta * scale[v], &lap.degree);
            }
        }
        Self {
            xs: (0..l).map(|v| dataset.view(v)).collect(),
            us: state.u.iter().map(|u| u.view()).collect(),
            w2: (0..l).map(|v| weights.squared(v)).collect(),
            scale,
            adjacency,
            degree,
            xi: hyper.xi,
        }
    }

    /// `Σᵥ aᵥ[‖(X − UVᵀ)W‖² + β Tr(VᵀLV)] + ξ‖VᵀV − I‖²`
    fn value(&self, v: ArrayView2<f64>) -> f64 {
        let mut f = 0.0;
        for k in 0..self.xs.len() {
            f += self.scale[k] * weighted_residual(self.xs[k], self.us[k], v, self.w2[k].view());
        }
        let degree_part: f64 = v
            .rows()
            .into_iter()
            .zip(&self.degree)
            .map(|(row, d)| d * row.dot(&row))
            .sum();
        let adjacency_part = (&v * &self.adjacency.dot(&v)).sum();
        f + degree_part - adjacency_part + self.xi * orthogonality_residual(v)
    }

    /// Entrywise `(E + 2ξV) / (Q + 2ξVVᵀV)`.
    fn ratio(&self, v: ArrayView2<f64>) -> Array2<f64> {
        let (n, c) = v.dim();
        let mut e = Array2::<f64>::zeros((n, c));
        let mut q = Array2::<f64>::zeros((n, c));
        for k in 0..self.xs.len() {
            let a = self.scale[k];
            let w2 = self.w2[k].view();
            let u = self.us[k];
            e.scaled_add(a, &scale_rows(self.xs[k].t().dot(&u).view(), w2));
            q.scaled_add(a, &scale_rows(v.dot(&u.t().dot(&u)).view(), w2));
        }
        e += &self.adjacency.dot(&v);
        q += &scale_rows(v, self.degree.view());
        e.scaled_add(2.0 * self.xi, &v);
        q.scaled_add(2.0 * self.xi, &v.dot(&v.t().dot(&v)));
        Zip::from(&mut e)
            .and(&q)
            .for_each(|num, &den| *num /= den + DENOMINATOR_FLOOR);
        e
    }

    fn multiplicative(&self, current: ArrayView2<f64>) -> Array2<f64> {
        let ratio = self.ratio(current);
        let baseline = self.value(current);
        for exponent in V_STEP_EXPONENTS {
            let candidate = multiplicative_step(current, ratio.view(), exponent);
            let value = self.value(candidate.view());
            if value <= baseline {
                return candidate;
            }
            log::trace!("V step exponent {exponent} rejected: {value} > {baseline}");
        }
        current.to_owned()
    }

    /// `∇f(V)` of [`VProblem::value`].
    fn gradient(&self, v: ArrayView2<f64>, gram_v: &Array2<f64>) -> Array2<f64> {
        let (n, c) = v.dim();
        let mut g = Array2::<f64>::zeros((n, c));
        for k in 0..self.xs.len() {
            let u = self.us[k];
            let fit = v.dot(&u.t().dot(&u)) - self.xs[k].t().dot(&u);
            g.scaled_add(2.0 * self.scale[k], &scale_rows(fit.view(), self.w2[k].view()));
        }
        g.scaled_add(2.0, &scale_rows(v, self.degree.view()));
        g.scaled_add(-2.0, &self.adjacency.dot(&v));
        let mut m = gram_v.clone();
        m.diag_mut().map_inplace(|d| *d -= 1.0);
        g.scaled_add(4.0 * self.xi, &v.dot(&m));
        g
    }

    /// Hessian of [`VProblem::value`] applied to `dir`.
    fn hessian_apply(
        &self,
        v: ArrayView2<f64>,
        gram_v: &Array2<f64>,
        u_grams: &[Array2<f64>],
        dir: &Array2<f64>,
    ) -> Array2<f64> {
        let mut out = Array2::<f64>::zeros(dir.dim());
        for (k, gram) in u_grams.iter().enumerate() {
            out.scaled_add(2.0 * self.scale[k], &scale_rows(dir.dot(gram).view(), self.w2[k].view()));
        }
        out.scaled_add(2.0, &scale_rows(dir.view(), self.degree.view()));
        out.scaled_add(-2.0, &self.adjacency.dot(dir));
        let mut m = gram_v.clone();
        m.diag_mut().map_inplace(|d| *d -= 1.0);
        let cross = dir.t().dot(&v);
        out.scaled_add(4.0 * self.xi, &(dir.dot(&m) + v.dot(&(&cross + &cross.t()))));
        out
    }

    /// Projected Newton steps on the whole of `V`, with directions from
    /// preconditioned conjugate gradients on the free variables.
    fn newton_cg(&self, v: &mut Array2<f64>) {
        let u_grams: Vec<Array2<f64>> = self.us.iter().map(|u| u.t().dot(u)).collect();
        let mut f = self.value(v.view());
        for _ in 0..NEWTON_STEPS {
            let gram_v = v.t().dot(&*v);
            let g = self.gradient(v.view(), &gram_v);
            let gap = Zip::from(&*v)
                .and(&g)
                .fold(0.0f64, |acc, &x, &gi| acc.max((x - (x - gi).max(0.0)).abs()));
            let active_tol = gap.min(1e-12);
            let free = Zip::from(&*v)
                .and(&g)
                .map_collect(|&x, &gi| if x <= active_tol && gi > 0.0 { 0.0 } else { 1.0 });
            // Jacobi preconditioner from the exact diagonal
            let (n, c) = v.dim();
            let row_sq: Array1<f64> = v.rows().into_iter().map(|r| r.dot(&r)).collect();
            let precond = Array2::from_shape_fn((n, c), |(i, j)| {
                let mut d = 2.0 * (self.degree[i] - self.adjacency[[i, i]]);
                for (k, gram) in u_grams.iter().enumerate() {
                    d += 2.0 * self.scale[k] * self.w2[k][i] * gram[[j, j]];
                }
                d += 4.0 * self.xi * (gram_v[[j, j]] - 1.0 + row_sq[i] + v[[i, j]] * v[[i, j]]);
                1.0 / d.max(1e-12)
            });
            let rhs = -&g * &free;
            let dir = pcg(
                |x| self.hessian_apply(v.view(), &gram_v, &u_grams, x) * &free,
                &rhs,
                &(&precond * &free),
            );
            let mut t = 1.0;
            let mut accepted = false;
            for _ in 0..LINE_SEARCH_HALVINGS {
                let mut cand = v.clone();
                Zip::from(&mut cand).and(&dir).for_each(|x, &d| *x = (*x + t * d).max(0.0));
                let fc = self.value(cand.view());
                if fc < f {
                    accepted = f - fc > 1e-13 * f.abs().max(1.0);
                    *v = cand;
                    f = fc;
                    break;
                }
                t *= 0.5;
            }
            if !accepted {
                break;
            }
        }
    }
}

const NEWTON_STEPS: usize = 10;
const LINE_SEARCH_HALVINGS: usize = 40;
const CG_ITERATIONS: usize = 200;

/// Preconditioned conjugate gradients for `A x = b` from `x = 0`, stopping
/// early on negative curvature.
fn pcg(apply: impl Fn(&Array2<f64>) -> Array2<f64>, b: &Array2<f64>, precond: &Array2<f64>) -> Array2<f64> {
    let mut x = Array2::<f64>::zeros(b.dim());
    let mut r = b.clone();
    let mut z = &r * precond;
    let mut p = z.clone();
    let mut rz = (&r * &z).sum();
    let b_norm = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    if b_norm == 0.0 {
        return x;
    }
    for k in 0..CG_ITERATIONS {
        let ap = apply(&p);
        let curvature = (&p * &ap).sum();
        if curvature <= 0.0 {
            if k == 0 {
                return b.clone();
            }
            break;
        }
        let alpha = rz / curvature;
        x.scaled_add(alpha, &p);
        r.scaled_add(-alpha, &ap);
        if r.iter().map(|x| x * x).sum::<f64>().sqrt() <= 1e-10 * b_norm {
            break;
        }
        z = &r * precond;
        let rz_next = (&r * &z).sum();
        p = &z + &(&p * (rz_next / rz));
        rz = rz_next;
    }
    x
}

/// One multiplicative step on `V`:
/// `V ← V ⊙ √( (E + 2ξV) / (Q + 2ξVVᵀV) )` with
/// `Q = Σᵥ aᵥ(W²VUᵀU + βDV)` and `E = Σᵥ aᵥ(W²XᵀU + βSV)`, where `D`, `S`
/// are the degree and adjacency of the symmetrised graphs.
///
/// If the square-root step increases the penalised `V` sub-objective, the
/// exponent is halved until it does not (at worst the step is skipped).
///
/// Projected Newton steps on the same sub-objective follow. Near
/// `VᵀV = I` the ratio is damped by the full `2ξVVᵀV`, and moving along the
/// constraint needs coordinated changes across rows, so the multiplicative
/// step alone advances only by `O(‖vᵢ‖²)` per sweep. Every accepted step
/// strictly decreases the sub-objective.
pub fn update_v(
    state: &SolverState,
    dataset: &MultiViewDataset,
    weights: &ViewWeights,
    hyper: &Hyperparameters,
) -> Array2<f64> {
    let problem = VProblem::new(state, dataset, weights, hyper);
    let mut v = problem.multiplicative(state.v.view());
    problem.newton_cg(&mut v);
    v
}

pub(crate) fn multiplicative_step(
    v: ArrayView2<f64>,
    ratio: ArrayView2<f64>,
    exponent: f64,
) -> Array2<f64> {
    let mut out = v.to_owned();
    Zip::from(&mut out)
        .and(&ratio)
        .for_each(|o, &r| *o *= r.powf(exponent));
    out
}

/// Simplex-normalised minimiser of `Σᵥ (α⁽ᵛ⁾)^γ d⁽ᵛ⁾`:
/// `α⁽ᵛ⁾ = (d⁽ᵛ⁾)^{1/(1−γ)} / Σᵤ (d⁽ᵘ⁾)^{1/(1−γ)}`.
///
/// Views with zero loss share all the weight equally.
pub fn update_alpha(losses: ArrayView1<f64>, gamma: f64) -> Result<Array1<f64>> {
    if !(gamma > 1.0) {
        return Err(Error::InvalidArgument(format!("gamma must exceed 1, got {gamma}")));
    }
    if losses.iter().any(|&d| !(d >= 0.0) || !d.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "view losses must be finite and nonnegative: {losses}"
        )));
    }
    let zeros = losses.iter().filter(|&&d| d == 0.0).count();
    if zeros > 0 {
        let share = 1.0 / zeros as f64;
        return Ok(losses.mapv(|d| if d == 0.0 { share } else { 0.0 }));
    }
    // normalise by the smallest loss first so the power cannot overflow
    let dmin = losses.iter().copied().fold(f64::INFINITY, f64::min);
    let exponent = 1.0 / (1.0 - gamma);
    let raw = losses.mapv(|d| (d / dmin).powf(exponent));
    let total = raw.sum();
    Ok(raw / total)
}
