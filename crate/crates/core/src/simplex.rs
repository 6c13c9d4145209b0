//! Euclidean projection onto the probability simplex with one coordinate
//! pinned to zero.

use crate::error::{Error, Result};

/// Projects `y` onto `{x : x ≥ 0, x[excluded] = 0, Σ x = 1}`.
pub fn project_offdiag_simplex(y: &[f64], excluded: usize) -> Result<Vec<f64>> {
    if y.len() < 2 {
        return Err(Error::InvalidArgument(format!(
            "off-diagonal simplex needs at least 2 coordinates, got {}",
            y.len()
        )));
    }
    if excluded >= y.len() {
        return Err(Error::InvalidArgument(format!(
            "excluded index {excluded} out of range for length {}",
            y.len()
        )));
    }
    let mut out = vec![0.0; y.len()];
    project_into(y, excluded, &mut out, &mut Vec::with_capacity(y.len()));
    Ok(out)
}

/// Allocation-free core of [`project_offdiag_simplex`]; `scratch` is reused
/// across calls. Inputs must be finite.
pub(crate) fn project_into(y: &[f64], excluded: usize, out: &mut [f64], scratch: &mut Vec<f64>) {
    scratch.clear();
    scratch.extend(
        y.iter()
            .enumerate()
            .filter(|&(i, _)| i != excluded)
            .map(|(_, &v)| v),
    );
    scratch.sort_unstable_by(|a, b| b.total_cmp(a));

    // largest k with u_k - (Σ_{j≤k} u_j - 1)/k > 0
    let mut cumsum = 0.0;
    let mut theta = 0.0;
    for (k, &u) in scratch.iter().enumerate() {
        cumsum += u;
        let t = (cumsum - 1.0) / (k + 1) as f64;
        if u - t > 0.0 {
            theta = t;
        }
    }
    for (i, (o, &v)) in out.iter_mut().zip(y).enumerate() {
        *o = if i == excluded { 0.0 } else { (v - theta).max(0.0) };
    }
}
