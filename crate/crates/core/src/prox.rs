//! Proximal operators, the simplex projection, and the structured norms that
//! appear in the decomposition objective.
//!
//! Everything here is a pure function of its arguments. Inputs containing NaN
//! or infinities are rejected with [`Error::Numerical`] instead of being
//! propagated.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::linalg;

/// Soft-thresholding: `max(x - sigma, 0) + min(x + sigma, 0)`.
#[inline]
pub fn shrink_scalar(x: f64, sigma: f64) -> f64 {
    (x - sigma).max(0.0) + (x + sigma).min(0.0)
}

/// Entrywise [`shrink_scalar`].
pub fn shrink(m: &DMatrix<f64>, sigma: f64) -> DMatrix<f64> {
    m.map(|x| shrink_scalar(x, sigma))
}

/// Singular value thresholding, the proximal operator of `tau * ||.||_*`.
///
/// Returns `U shrink(S, tau) Vᵀ` for an SVD `M = U S Vᵀ`, which is the unique
/// minimizer of `tau ||Q||_* + 1/2 ||Q - M||_F^2`.
pub fn svt(m: &DMatrix<f64>, tau: f64) -> Result<DMatrix<f64>> {
    if !(tau.is_finite() && tau >= 0.0) {
        return Err(Error::Numerical(format!(
            "threshold must be finite and non-negative, got {tau}"
        )));
    }
    linalg::ensure_finite(m, "SVT input")?;
    // sigma_max <= ||M||_F, so everything shrinks to zero.
    if m.norm() <= tau {
        return Ok(DMatrix::zeros(m.nrows(), m.ncols()));
    }
    linalg::shrink_singular_values(m, tau)
}

/// Sum of singular values.
pub fn nuclear_norm(m: &DMatrix<f64>) -> Result<f64> {
    if m.is_empty() {
        return Ok(0.0);
    }
    Ok(linalg::singular_values(m)?.iter().sum())
}

/// A probability vector: non-negative entries summing to one.
#[derive(Debug, Clone, PartialEq)]
pub struct SimplexVector(DVector<f64>);

impl SimplexVector {
    pub const SUM_TOL: f64 = 1e-9;

    pub fn new(values: DVector<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::Shape("simplex vector must be non-empty".into()));
        }
        if let Some(x) = values.iter().find(|x| !x.is_finite() || **x < 0.0) {
            return Err(Error::Numerical(format!("invalid probability entry {x}")));
        }
        let total: f64 = values.iter().sum();
        if (total - 1.0).abs() > Self::SUM_TOL {
            return Err(Error::Numerical(format!("entries sum to {total}, not 1")));
        }
        Ok(SimplexVector(values))
    }

    pub fn as_slice(&self) -> &[f64] {
        self.0.as_slice()
    }

    pub fn values(&self) -> &DVector<f64> {
        &self.0
    }

    pub fn into_inner(self) -> DVector<f64> {
        self.0
    }
}

/// Euclidean projection onto the probability simplex by sort-and-threshold.
///
/// Sort `c` in descending order as `u`, take the largest `j` with
/// `1 - sum_{r <= j} (u_r - u_j) >= 0`, set the offset
/// `theta = (sum_{r <= j} u_r - 1) / j` and clamp `c - theta` at zero.
pub fn project_simplex(c: &[f64]) -> Result<SimplexVector> {
    if c.is_empty() {
        return Err(Error::Shape("cannot project an empty vector".into()));
    }
    if c.iter().any(|x| !x.is_finite()) {
        return Err(Error::Numerical("projection input is not finite".into()));
    }
    let theta = simplex_offset(c);
    Ok(SimplexVector(DVector::from_iterator(
        c.len(),
        c.iter().map(|&x| (x - theta).max(0.0)),
    )))
}

/// Projects `c` onto the simplex in place. The caller guarantees finiteness.
pub(crate) fn project_simplex_in_place(c: &mut [f64]) {
    let theta = simplex_offset(c);
    for x in c.iter_mut() {
        *x = (*x - theta).max(0.0);
    }
}

fn simplex_offset(c: &[f64]) -> f64 {
    let mut u = c.to_vec();
    // Tie order is irrelevant to the result.
    u.sort_unstable_by(|a, b| b.total_cmp(a));
    let mut cumsum = 0.0;
    let mut best = (1usize, u[0]);
    for (idx, &uj) in u.iter().enumerate() {
        cumsum += uj;
        let j = idx + 1;
        if 1.0 - (cumsum - j as f64 * uj) >= 0.0 {
            best = (j, cumsum);
        }
    }
    (best.1 - 1.0) / best.0 as f64
}

/// Group-l1 norm of a stacked error matrix `E = [E1; ...; EK]` of shape
/// `(K N) x N`: the sum over columns `i` and views `j` of the l2 norm of the
/// `j`-th length-`N` segment of column `i`.
pub fn group_l1_norm(e: &DMatrix<f64>, k: usize, n: usize) -> Result<f64> {
    if e.nrows() != k * n || e.ncols() != n {
        return Err(Error::Shape(format!(
            "expected a {}x{} stack for K={k}, N={n}, got {}x{}",
            k * n,
            n,
            e.nrows(),
            e.ncols()
        )));
    }
    linalg::ensure_finite(e, "error stack")?;
    let mut total = 0.0;
    for col in e.column_iter() {
        for j in 0..k {
            total += col.rows(j * n, n).norm();
        }
    }
    Ok(total)
}

/// l2,1 norm: the sum of row l2 norms.
pub fn l21_norm(e: &DMatrix<f64>) -> Result<f64> {
    linalg::ensure_finite(e, "error stack")?;
    Ok(e.row_iter().map(|r| r.norm()).sum())
}
