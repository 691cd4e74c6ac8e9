//! Dense decompositions, computed with faer and exchanged as nalgebra matrices.

use faer::{Mat, Side};
use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

pub(crate) fn ensure_finite(m: &DMatrix<f64>, what: &str) -> Result<()> {
    if m.iter().all(|x| x.is_finite()) {
        Ok(())
    } else {
        Err(Error::Numerical(format!("{what} contains non-finite entries")))
    }
}

fn to_faer(m: &DMatrix<f64>) -> Mat<f64> {
    Mat::from_fn(m.nrows(), m.ncols(), |i, j| m[(i, j)])
}

fn from_faer(m: faer::MatRef<'_, f64>) -> DMatrix<f64> {
    DMatrix::from_fn(m.nrows(), m.ncols(), |i, j| m[(i, j)])
}

pub(crate) fn singular_values(m: &DMatrix<f64>) -> Result<Vec<f64>> {
    ensure_finite(m, "SVD input")?;
    to_faer(m)
        .singular_values()
        .map_err(|e| Error::Numerical(format!("SVD failed: {e:?}")))
}

/// Eigen-decomposition of a symmetric matrix; eigenvalues ascending, eigenvectors
/// in the matching columns.
pub(crate) fn symmetric_eigen(m: &DMatrix<f64>) -> Result<(DVector<f64>, DMatrix<f64>)> {
    ensure_finite(m, "eigen input")?;
    let dec = to_faer(m)
        .self_adjoint_eigen(Side::Lower)
        .map_err(|e| Error::Numerical(format!("eigen-decomposition failed: {e:?}")))?;
    let s = dec.S().column_vector();
    Ok((
        DVector::from_fn(s.nrows(), |i, _| s[i]),
        from_faer(dec.U()),
    ))
}

/// `U diag(max(s - tau, 0)) Vᵀ`, with the product formed in faer.
pub(crate) fn shrink_singular_values(m: &DMatrix<f64>, tau: f64) -> Result<DMatrix<f64>> {
    ensure_finite(m, "SVD input")?;
    let dec = to_faer(m)
        .thin_svd()
        .map_err(|e| Error::Numerical(format!("SVD failed: {e:?}")))?;
    let s = dec.S().column_vector();
    let kept = (0..s.nrows()).take_while(|&i| s[i] > tau).count();
    if kept == 0 {
        return Ok(DMatrix::zeros(m.nrows(), m.ncols()));
    }
    let u = dec.U().subcols(0, kept);
    let v = dec.V().subcols(0, kept);
    let scaled = Mat::from_fn(u.nrows(), kept, |i, j| u[(i, j)] * (s[j] - tau));
    let q = &scaled * v.transpose();
    Ok(from_faer(q.as_ref()))
}
