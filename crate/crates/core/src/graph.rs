//! Per-view similarity graphs and the cross-view reconstruction coefficients.
//!
//! Every graph `S⁽ᵛ⁾` is column-stochastic with a zero diagonal. Each view's
//! graph is reconstructed from the other views' graphs through the columns of
//! the coefficient matrix `R`, which live on the off-diagonal simplex.

use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis, Zip};

use crate::error::{Error, Result};
use crate::simplex;

/// Column-stochastic `N × N` similarity matrix with a zero diagonal.
#[derive(Debug, Clone, PartialEq)]
pub struct SimilarityGraph(Array2<f64>);

impl SimilarityGraph {
    /// Wraps `s` after checking the graph invariants to within `1e-8`.
    pub fn new(s: Array2<f64>) -> Result<Self> {
        let g = Self(s);
        g.check(1e-8)?;
        Ok(g)
    }

    /// Uniform `1/(N−1)` off the diagonal.
    pub fn uniform(n: usize) -> Self {
        let w = 1.0 / (n as f64 - 1.0);
        Self(Array2::from_shape_fn((n, n), |(i, j)| if i == j { 0.0 } else { w }))
    }

    pub fn matrix(&self) -> ArrayView2<'_, f64> {
        self.0.view()
    }

    pub fn into_inner(self) -> Array2<f64> {
        self.0
    }

    pub fn size(&self) -> usize {
        self.0.nrows()
    }

    pub fn check(&self, tol: f64) -> Result<()> {
        let s = &self.0;
        if !s.is_square() {
            return Err(Error::Degenerate(format!("similarity graph is {:?}", s.dim())));
        }
        for ((i, j), &x) in s.indexed_iter() {
            if !x.is_finite() || x < 0.0 || x > 1.0 + tol {
                return Err(Error::Degenerate(format!("S[{i},{j}] = {x} outside [0, 1]")));
            }
            if i == j && x != 0.0 {
                return Err(Error::Degenerate(format!("S[{i},{i}] = {x} on the diagonal")));
            }
        }
        for (j, col) in s.axis_iter(Axis(1)).enumerate() {
            let sum = col.sum();
            if (sum - 1.0).abs() > tol {
                return Err(Error::Degenerate(format!("column {j} of S sums to {sum}")));
            }
        }
        Ok(())
    }
}

/// `l × l` matrix whose column `v` holds the weights of the other views in
/// the reconstruction of view `v`.
#[derive(Debug, Clone, PartialEq)]
pub struct CrossViewCoefficients(Array2<f64>);

impl CrossViewCoefficients {
    pub fn new(r: Array2<f64>) -> Result<Self> {
        let c = Self(r);
        c.check(1e-8)?;
        Ok(c)
    }

    pub(crate) fn from_columns_unchecked(r: Array2<f64>) -> Self {
        Self(r)
    }

    /// `1/(l−1)` off the diagonal.
    pub fn uniform(l: usize) -> Self {
        let w = 1.0 / (l as f64 - 1.0);
        Self(Array2::from_shape_fn((l, l), |(i, j)| if i == j { 0.0 } else { w }))
    }

    pub fn matrix(&self) -> ArrayView2<'_, f64> {
        self.0.view()
    }

    pub fn num_views(&self) -> usize {
        self.0.nrows()
    }

    pub fn check(&self, tol: f64) -> Result<()> {
        let r = &self.0;
        if !r.is_square() || r.nrows() < 2 {
            return Err(Error::Degenerate(format!("coefficient matrix is {:?}", r.dim())));
        }
        for ((i, j), &x) in r.indexed_iter() {
            if !x.is_finite() || x < 0.0 || x > 1.0 + tol {
                return Err(Error::Degenerate(format!("R[{i},{j}] = {x} outside [0, 1]")));
            }
            if i == j && x != 0.0 {
                return Err(Error::Degenerate(format!("R[{i},{i}] = {x} on the diagonal")));
            }
        }
        for (j, col) in r.axis_iter(Axis(1)).enumerate() {
            let sum = col.sum();
            if (sum - 1.0).abs() > tol {
                return Err(Error::Degenerate(format!("column {j} of R sums to {sum}")));
            }
        }
        Ok(())
    }
}

/// Heat-kernel bandwidth for the initial graphs.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Bandwidth {
    /// Mean distance to the `k`-th nearest neighbour.
    Auto,
    Fixed(f64),
}

/// Heat-kernel weights `exp(−‖xᵢ−xⱼ‖²/(2σ²))` on the symmetrised `k`-NN
/// graph of the columns of `points` (edge if either endpoint lists the other
/// among its `k` nearest). Unnormalised; zero diagonal.
pub fn knn_heat_kernel(points: ArrayView2<f64>, k: usize, bandwidth: Bandwidth) -> Result<Array2<f64>> {
    let m = points.ncols();
    if k == 0 || k >= m {
        return Err(Error::InvalidArgument(format!(
            "k = {k} neighbours requires 0 < k < {m} present instances"
        )));
    }
    let cols: Vec<ArrayView1<f64>> = points.axis_iter(Axis(1)).collect();
    let mut d2 = Array2::<f64>::zeros((m, m));
    for i in 0..m {
        for j in (i + 1)..m {
            let d: f64 = cols[i]
                .iter()
                .zip(cols[j].iter())
                .map(|(a, b)| (a - b) * (a - b))
                .sum();
            d2[[i, j]] = d;
            d2[[j, i]] = d;
        }
    }

    let mut adjacent = Array2::from_elem((m, m), false);
    let mut kth_dist_sum = 0.0;
    let mut order: Vec<usize> = Vec::with_capacity(m);
    for i in 0..m {
        order.clear();
        order.extend((0..m).filter(|&j| j != i));
        order.sort_by(|&a, &b| d2[[i, a]].total_cmp(&d2[[i, b]]).then(a.cmp(&b)));
        for &j in &order[..k] {
            adjacent[[i, j]] = true;
            adjacent[[j, i]] = true;
        }
        kth_dist_sum += d2[[i, order[k - 1]]].sqrt();
    }

    let sigma = match bandwidth {
        Bandwidth::Fixed(s) if s > 0.0 && s.is_finite() => s,
        Bandwidth::Fixed(s) => {
            return Err(Error::InvalidArgument(format!("bandwidth must be positive, got {s}")))
        }
        Bandwidth::Auto => {
            let s = kth_dist_sum / m as f64;
            if s > 0.0 {
                s
            } else {
                1.0
            }
        }
    };
    let scale = 1.0 / (2.0 * sigma * sigma);
    Ok(Array2::from_shape_fn((m, m), |(i, j)| {
        if adjacent[[i, j]] {
            (-d2[[i, j]] * scale).exp()
        } else {
            0.0
        }
    }))
}

/// Initial graph for one view, built from its imputed `d_v × N` matrix.
///
/// Present instances are linked by [`knn_heat_kernel`]; absent instances get
/// similarity `1/(N−1)` to every other instance. Columns are then normalised
/// to sum to one.
pub fn build_initial_similarity(
    x: ArrayView2<f64>,
    presence: ArrayView1<bool>,
    k: usize,
    bandwidth: Bandwidth,
) -> Result<SimilarityGraph> {
    let n = x.ncols();
    if presence.len() != n {
        return Err(Error::InvalidArgument(format!(
            "presence has {} entries for {n} instances",
            presence.len()
        )));
    }
    if n < 2 {
        return Err(Error::InvalidArgument("a graph needs at least 2 instances".into()));
    }
    let present: Vec<usize> = (0..n).filter(|&i| presence[i]).collect();
    let kernel = knn_heat_kernel(x.select(Axis(1), &present).view(), k, bandwidth)?;

    let fill = 1.0 / (n as f64 - 1.0);
    let mut s = Array2::from_elem((n, n), fill);
    for (a, &i) in present.iter().enumerate() {
        for (b, &j) in present.iter().enumerate() {
            s[[i, j]] = kernel[[a, b]];
        }
    }
    for i in 0..n {
        s[[i, i]] = 0.0;
    }
    for (j, mut col) in s.axis_iter_mut(Axis(1)).enumerate() {
        let sum = col.sum();
        if sum > 0.0 {
            col.mapv_inplace(|v| v / sum);
        } else {
            // every kernel weight underflowed
            col.fill(fill);
            col[j] = 0.0;
        }
    }
    Ok(SimilarityGraph(s))
}

/// `H[i,j] = ‖vⁱ − vʲ‖²` for the rows of `v`.
pub fn pairwise_sq_dists(v: ArrayView2<f64>) -> Array2<f64> {
    let n = v.nrows();
    let rows: Vec<ArrayView1<f64>> = v.axis_iter(Axis(0)).collect();
    let mut h = Array2::zeros((n, n));
    for i in 0..n {
        for j in (i + 1)..n {
            let d: f64 = rows[i]
                .iter()
                .zip(rows[j].iter())
                .map(|(a, b)| (a - b) * (a - b))
                .sum();
            h[[i, j]] = d;
            h[[j, i]] = d;
        }
    }
    h
}

/// Graph Laplacian of the symmetrised graph `(S + Sᵀ)/2`.
///
/// Symmetrising leaves every quadratic form `Tr(VᵀLV)` equal to
/// `½ Σᵢⱼ Sᵢⱼ‖vⁱ − vʲ‖²`, which is the form the graph update minimises.
#[derive(Debug, Clone)]
pub struct Laplacian {
    /// `D − A`.
    pub matrix: Array2<f64>,
    /// Degree diagonal `D`, row sums of `A`.
    pub degree: Array1<f64>,
    /// Symmetrised adjacency `A = (S + Sᵀ)/2`.
    pub adjacency: Array2<f64>,
}

pub fn laplacian(s: ArrayView2<f64>) -> Laplacian {
    let adjacency = (&s + &s.t()) * 0.5;
    let degree = adjacency.sum_axis(Axis(1));
    let mut matrix = -&adjacency;
    for (i, d) in degree.iter().enumerate() {
        matrix[[i, i]] += d;
    }
    Laplacian {
        matrix,
        degree,
        adjacency,
    }
}

/// `Σ_{i≠v} R_{iv} S⁽ⁱ⁾`, the reconstruction of view `v` from the others.
pub fn reconstruct(v: usize, graphs: &[SimilarityGraph], r: &CrossViewCoefficients) -> Array2<f64> {
    let n = graphs[v].size();
    let mut b = Array2::zeros((n, n));
    for (i, g) in graphs.iter().enumerate() {
        if i != v {
            b.scaled_add(r.0[[i, v]], &g.0);
        }
    }
    b
}

/// Unconstrained target `P` of the graph update for view `v`; the update is
/// the column-wise projection of `P` onto the off-diagonal simplex.
///
/// `view_scale[k]` is `(α⁽ᵏ⁾)^γ`.
pub(crate) fn similarity_target(
    v: usize,
    graphs: &[SimilarityGraph],
    r: &CrossViewCoefficients,
    view_scale: &[f64],
    h: ArrayView2<f64>,
) -> Result<Array2<f64>> {
    let l = graphs.len();
    let n = graphs[v].size();
    let rm = &r.0;
    let mut denom = view_scale[v];
    // Q = Σ_{k≠v} a_k R_vk N⁽ᵏ⁾ + a_v (B⁽ᵛ⁾ − H/4)
    // N⁽ᵏ⁾ = S⁽ᵏ⁾ − Σ_{j≠v,k} R_jk S⁽ʲ⁾
    let mut q = reconstruct(v, graphs, r);
    q.scaled_add(-0.25, &h);
    q *= view_scale[v];
    for k in (0..l).filter(|&k| k != v) {
        let coef = view_scale[k] * rm[[v, k]];
        denom += coef * rm[[v, k]];
        if coef == 0.0 {
            continue;
        }
        q.scaled_add(coef, &graphs[k].0);
        for j in (0..l).filter(|&j| j != v && j != k) {
            q.scaled_add(-coef * rm[[j, k]], &graphs[j].0);
        }
    }
    if !(denom > 0.0 && denom.is_finite()) {
        return Err(Error::Degenerate(format!(
            "graph update denominator for view {v} is {denom}"
        )));
    }
    debug_assert_eq!(q.dim(), (n, n));
    q /= denom;
    Ok(q)
}

/// Closed-form minimiser of the objective over `S⁽ᵛ⁾` with every other
/// variable fixed: each column `j` becomes `(P_{·j} + δⱼ)₊` with zero
/// diagonal, where `δⱼ` is the threshold that makes the column sum to one.
/// When nothing is clipped `δⱼ = (1 − Σ_{i≠j} P_ij)/(N−1)`.
pub fn update_similarity(
    v: usize,
    graphs: &[SimilarityGraph],
    r: &CrossViewCoefficients,
    alpha: &[f64],
    gamma: f64,
    h: ArrayView2<f64>,
) -> Result<SimilarityGraph> {
    let view_scale: Vec<f64> = alpha.iter().map(|a| a.powf(gamma)).collect();
    let p = similarity_target(v, graphs, r, &view_scale, h)?;
    if p.iter().any(|x| !x.is_finite()) {
        return Err(Error::NonFinite {
            term: format!("graph update target of view {v}"),
        });
    }
    Ok(SimilarityGraph(project_columns(p)))
}

fn project_columns(p: Array2<f64>) -> Array2<f64> {
    let n = p.nrows();
    let mut s = Array2::zeros((n, n));
    let mut col = vec![0.0; n];
    let mut out = vec![0.0; n];
    let mut scratch = Vec::with_capacity(n);
    for j in 0..n {
        col.iter_mut().zip(p.column(j)).for_each(|(c, &x)| *c = x);
        simplex::project_into(&col, j, &mut out, &mut scratch);
        let sum: f64 = out.iter().sum();
        Zip::from(s.column_mut(j))
            .and(&out[..])
            .for_each(|dst, &x| *dst = (x / sum).clamp(0.0, 1.0));
    }
    s
}
