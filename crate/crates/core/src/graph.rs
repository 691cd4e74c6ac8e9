//! Gaussian similarity graphs and their random-walk transition matrices.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One view of the data: `N` samples (rows) by `D` features (columns).
#[derive(Debug, Clone, PartialEq)]
pub struct ViewMatrix(DMatrix<f64>);

impl ViewMatrix {
    pub fn new(data: DMatrix<f64>) -> Result<Self> {
        if data.nrows() < 2 {
            return Err(Error::Shape(format!(
                "a view needs at least 2 samples, got {}",
                data.nrows()
            )));
        }
        if data.ncols() == 0 {
            return Err(Error::Shape("a view needs at least one feature".into()));
        }
        if data.iter().any(|x| !x.is_finite()) {
            return Err(Error::Numerical("view contains non-finite values".into()));
        }
        Ok(ViewMatrix(data))
    }

    pub fn n_samples(&self) -> usize {
        self.0.nrows()
    }

    pub fn n_features(&self) -> usize {
        self.0.ncols()
    }

    pub fn data(&self) -> &DMatrix<f64> {
        &self.0
    }

    pub fn into_inner(self) -> DMatrix<f64> {
        self.0
    }
}

/// A row-stochastic matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct TransitionMatrix(DMatrix<f64>);

impl TransitionMatrix {
    pub const ROW_SUM_TOL: f64 = 1e-9;

    pub fn new(p: DMatrix<f64>) -> Result<Self> {
        if !p.is_square() || p.nrows() == 0 {
            return Err(Error::Shape(format!(
                "transition matrix must be square and non-empty, got {}x{}",
                p.nrows(),
                p.ncols()
            )));
        }
        if let Some(x) = p.iter().find(|x| !x.is_finite() || **x < 0.0) {
            return Err(Error::Numerical(format!("invalid transition probability {x}")));
        }
        for (i, row) in p.row_iter().enumerate() {
            let s = row.sum();
            if (s - 1.0).abs() > Self::ROW_SUM_TOL {
                return Err(Error::Numerical(format!("row {i} sums to {s}")));
            }
        }
        Ok(TransitionMatrix(p))
    }

    /// Wraps a matrix the caller has already made row-stochastic.
    pub(crate) fn from_stochastic(p: DMatrix<f64>) -> Self {
        debug_assert!(TransitionMatrix::new(p.clone()).is_ok());
        TransitionMatrix(p)
    }

    pub fn n(&self) -> usize {
        self.0.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.0
    }

    pub fn into_inner(self) -> DMatrix<f64> {
        self.0
    }

    /// Applies the same permutation to rows and columns: the result's state
    /// `i` is this matrix's state `perm[i]`.
    pub fn permuted(&self, perm: &[usize]) -> Result<Self> {
        let n = self.n();
        if perm.len() != n {
            return Err(Error::Shape(format!("permutation of length {} for N={n}", perm.len())));
        }
        Ok(TransitionMatrix(DMatrix::from_fn(n, n, |i, j| {
            self.0[(perm[i], perm[j])]
        })))
    }
}

/// How the kernel denominator is derived from the median pairwise distance `m`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SigmaMode {
    /// Denominator `m^2`: the median distance is the kernel width.
    #[default]
    MedianSquared,
    /// Denominator `m` itself.
    MedianRaw,
}

impl SigmaMode {
    pub fn denominator(self, median: f64) -> f64 {
        match self {
            SigmaMode::MedianSquared => median * median,
            SigmaMode::MedianRaw => median,
        }
    }
}

fn squared_distances(view: &ViewMatrix) -> DMatrix<f64> {
    let x = view.data();
    let n = x.nrows();
    let mut d = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in (i + 1)..n {
            let mut acc = 0.0;
            for f in 0..x.ncols() {
                let diff = x[(i, f)] - x[(j, f)];
                acc += diff * diff;
            }
            d[(i, j)] = acc;
            d[(j, i)] = acc;
        }
    }
    d
}

/// Median of the `N(N-1)/2` pairwise Euclidean distances between rows; the
/// mean of the two middle values when the count is even.
pub fn median_sigma(view: &ViewMatrix) -> Result<f64> {
    let d2 = squared_distances(view);
    let n = view.n_samples();
    let mut dists = Vec::with_capacity(n * (n - 1) / 2);
    for i in 0..n {
        for j in (i + 1)..n {
            dists.push(d2[(i, j)].sqrt());
        }
    }
    dists.sort_unstable_by(f64::total_cmp);
    let m = dists.len();
    let median = if m % 2 == 1 {
        dists[m / 2]
    } else {
        0.5 * (dists[m / 2 - 1] + dists[m / 2])
    };
    if median > 0.0 {
        Ok(median)
    } else {
        Err(Error::DegenerateScale)
    }
}

/// Kernel denominator for a view under the given [`SigmaMode`].
pub fn kernel_denominator(view: &ViewMatrix, mode: SigmaMode) -> Result<f64> {
    Ok(mode.denominator(median_sigma(view)?))
}

/// Gaussian similarities `s_ij = exp(-||x_i - x_j||^2 / sigma2)`.
pub fn similarity_matrix(view: &ViewMatrix, sigma2: f64) -> Result<DMatrix<f64>> {
    if !(sigma2.is_finite() && sigma2 > 0.0) {
        return Err(Error::Config(format!("kernel denominator must be positive, got {sigma2}")));
    }
    let mut s = squared_distances(view);
    s.apply(|d| *d = (-*d / sigma2).exp());
    // exp(0) is exactly 1; the diagonal needs no special handling.
    Ok(s)
}

/// Row-normalizes a non-negative similarity matrix: `P = D^-1 S`.
pub fn normalize_rows(s: &DMatrix<f64>) -> TransitionMatrix {
    let mut p = s.clone();
    for mut row in p.row_iter_mut() {
        let degree = row.sum();
        assert!(degree > 0.0, "similarity row with zero degree");
        row /= degree;
    }
    TransitionMatrix::from_stochastic(p)
}

pub fn transition_matrix(view: &ViewMatrix, sigma2: f64) -> Result<TransitionMatrix> {
    Ok(normalize_rows(&similarity_matrix(view, sigma2)?))
}

/// Transition matrix of a view with its own median-based kernel width.
pub fn view_transition(view: &ViewMatrix, mode: SigmaMode) -> Result<TransitionMatrix> {
    transition_matrix(view, kernel_denominator(view, mode)?)
}
