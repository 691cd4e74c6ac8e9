//! Spectral clustering through a random walk: stationary distribution, the
//! symmetrized walk Laplacian, its generalized eigenvectors, then k-means.
//!
//! For a transition matrix `P` with stationary distribution `pi` and
//! `D = diag(pi)`, the Laplacian is
//!
//! ```text
//! L = D - (D P + Pᵀ D) / 2
//! ```
//!
//! and the embedding consists of the eigenvectors of `L u = lambda D u` with
//! the smallest eigenvalues. The generalized problem is solved by whitening:
//! `D^-1/2 L D^-1/2 w = lambda w`, `u = D^-1/2 w`.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::TransitionMatrix;
use crate::kmeans::{kmeans, KMeansConfig};
use crate::linalg;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StationaryConfig {
    /// Stop once successive iterates differ by at most this much (max-norm).
    pub tol: f64,
    pub max_iters: usize,
    /// Mixing weight toward the uniform chain, `(1 - a) P + a 11ᵀ / N`.
    /// Zero leaves `P` untouched.
    pub teleport: f64,
}

impl Default for StationaryConfig {
    fn default() -> Self {
        StationaryConfig {
            tol: 1e-10,
            max_iters: 10_000,
            teleport: 0.0,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SpectralConfig {
    pub stationary: StationaryConfig,
    /// Scale embedding rows to unit length before k-means.
    pub normalize_rows: bool,
}

/// Left eigenvector of a transition matrix for eigenvalue one, as a
/// probability vector.
#[derive(Debug, Clone, PartialEq)]
pub struct StationaryDistribution {
    pi: DVector<f64>,
    iterations: usize,
}

impl StationaryDistribution {
    pub fn values(&self) -> &DVector<f64> {
        &self.pi
    }

    pub fn as_slice(&self) -> &[f64] {
        self.pi.as_slice()
    }

    /// Power iterations used to reach the tolerance.
    pub fn iterations(&self) -> usize {
        self.iterations
    }

    /// `max_j |(piᵀ P)_j - pi_j|`.
    pub fn residual(&self, p: &TransitionMatrix) -> f64 {
        (p.matrix().tr_mul(&self.pi) - &self.pi).amax()
    }
}

/// Power iteration `piᵀ <- piᵀ P` from the uniform distribution.
pub fn stationary_distribution(
    p: &TransitionMatrix,
    cfg: &StationaryConfig,
) -> Result<StationaryDistribution> {
    if !(0.0..=1.0).contains(&cfg.teleport) {
        return Err(Error::Config(format!(
            "teleport weight must lie in [0, 1], got {}",
            cfg.teleport
        )));
    }
    let n = p.n();
    let uniform = 1.0 / n as f64;
    let mut pi = DVector::from_element(n, uniform);
    let mut residual = f64::INFINITY;
    for iter in 1..=cfg.max_iters {
        let mut next = p.matrix().tr_mul(&pi);
        if cfg.teleport > 0.0 {
            let mass = pi.sum();
            next *= 1.0 - cfg.teleport;
            next.add_scalar_mut(cfg.teleport * mass * uniform);
        }
        let total = next.sum();
        next /= total;
        residual = (&next - &pi).amax();
        pi = next;
        if residual <= cfg.tol {
            pi.apply(|x| *x = x.max(0.0));
            let total = pi.sum();
            pi /= total;
            return Ok(StationaryDistribution {
                pi,
                iterations: iter,
            });
        }
    }
    Err(Error::Convergence {
        iterations: cfg.max_iters,
        residual,
    })
}

/// `L = D - (D P + Pᵀ D) / 2` with `D = diag(pi)`. Symmetric bit-for-bit.
pub fn markov_laplacian(p: &TransitionMatrix, pi: &StationaryDistribution) -> DMatrix<f64> {
    let n = p.n();
    let pm = p.matrix();
    let w = pi.values();
    let mut l = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in i..n {
            let flow = 0.5 * (w[i] * pm[(i, j)] + w[j] * pm[(j, i)]);
            l[(i, j)] = -flow;
            l[(j, i)] = -flow;
        }
        l[(i, i)] += w[i];
    }
    l
}

/// Generalized eigenvectors of `(L, diag(d))` for the `r` smallest eigenvalues.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralEmbedding {
    /// `N x r`, one eigenvector per column, `uᵀ D u = 1`.
    pub vectors: DMatrix<f64>,
    /// Ascending.
    pub eigenvalues: DVector<f64>,
}

impl SpectralEmbedding {
    /// Per-column `max |L u - lambda D u|`.
    pub fn residuals(&self, l: &DMatrix<f64>, d: &DVector<f64>) -> Vec<f64> {
        (0..self.vectors.ncols())
            .map(|c| {
                let u = self.vectors.column(c);
                let lhs = l * u;
                let rhs = d.component_mul(&u) * self.eigenvalues[c];
                (lhs - rhs).amax()
            })
            .collect()
    }
}

pub fn spectral_embed(l: &DMatrix<f64>, d: &DVector<f64>, r: usize) -> Result<SpectralEmbedding> {
    let n = d.len();
    if l.nrows() != n || l.ncols() != n {
        return Err(Error::Shape(format!(
            "Laplacian is {}x{} but the weight vector has length {n}",
            l.nrows(),
            l.ncols()
        )));
    }
    if r == 0 || r > n {
        return Err(Error::Config(format!("need 1 <= R <= N, got R = {r}, N = {n}")));
    }
    if let Some(x) = d.iter().find(|x| !(x.is_finite() && **x > 0.0)) {
        return Err(Error::DegenerateDistribution(format!(
            "weight matrix has non-positive diagonal entry {x}"
        )));
    }
    let inv_sqrt = d.map(|x| 1.0 / x.sqrt());
    let mut m = DMatrix::from_fn(n, n, |i, j| inv_sqrt[i] * l[(i, j)] * inv_sqrt[j]);
    let mt = m.transpose();
    m += mt;
    m *= 0.5;
    let (values, vectors) = linalg::symmetric_eigen(&m)?;

    let mut u = DMatrix::zeros(n, r);
    for c in 0..r {
        let mut col = vectors.column(c).component_mul(&inv_sqrt);
        // Deterministic sign: the largest-magnitude entry is positive.
        let pivot = col.iter().copied().fold(0.0f64, |acc, x| {
            if x.abs() > acc.abs() {
                x
            } else {
                acc
            }
        });
        if pivot < 0.0 {
            col.neg_mut();
        }
        u.set_column(c, &col);
    }
    Ok(SpectralEmbedding {
        vectors: u,
        eigenvalues: values.rows(0, r).into_owned(),
    })
}

/// Embedding of the states of `p` in `r` dimensions.
pub fn markov_embedding(
    p: &TransitionMatrix,
    r: usize,
    cfg: &SpectralConfig,
) -> Result<SpectralEmbedding> {
    let pi = stationary_distribution(p, &cfg.stationary)?;
    let l = markov_laplacian(p, &pi);
    spectral_embed(&l, pi.values(), r)
}

/// Clusters the states of `p` into `r` groups; labels lie in `0..r`.
pub fn cluster_markov(
    p: &TransitionMatrix,
    r: usize,
    kmeans_cfg: &KMeansConfig,
    cfg: &SpectralConfig,
) -> Result<Vec<usize>> {
    if r < 2 {
        return Err(Error::Config(format!("need at least 2 clusters, got {r}")));
    }
    let mut embedding = markov_embedding(p, r, cfg)?.vectors;
    if cfg.normalize_rows {
        normalize_embedding_rows(&mut embedding);
    }
    let km = KMeansConfig {
        k: r,
        ..kmeans_cfg.clone()
    };
    Ok(kmeans(&embedding, &km)?.labels)
}

pub(crate) fn normalize_embedding_rows(u: &mut DMatrix<f64>) {
    for mut row in u.row_iter_mut() {
        let norm = row.norm();
        if norm > 0.0 {
            row /= norm;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use nalgebra::dmatrix;

    fn tm(m: DMatrix<f64>) -> TransitionMatrix {
        TransitionMatrix::new(m).unwrap()
    }

    fn two_block_chain(sizes: [usize; 2]) -> TransitionMatrix {
        let n = sizes[0] + sizes[1];
        tm(DMatrix::from_fn(n, n, |i, j| {
            let bi = usize::from(i >= sizes[0]);
            let bj = usize::from(j >= sizes[0]);
            if bi == bj {
                1.0 / sizes[bi] as f64
            } else {
                0.0
            }
        }))
    }

    #[test]
    fn doubly_stochastic_has_uniform_stationary() {
        let p = tm(dmatrix![0.2, 0.5, 0.3; 0.3, 0.2, 0.5; 0.5, 0.3, 0.2]);
        let pi = stationary_distribution(&p, &StationaryConfig::default()).unwrap();
        for &x in pi.as_slice() {
            assert_relative_eq!(x, 1.0 / 3.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn identity_chain_with_teleportation() {
        let p = tm(DMatrix::identity(2, 2));
        let cfg = StationaryConfig {
            teleport: 0.01,
            ..Default::default()
        };
        let pi = stationary_distribution(&p, &cfg).unwrap();
        assert_relative_eq!(pi.as_slice()[0], 0.5, epsilon = 1e-12);
        // Without teleportation any distribution is stationary; the uniform
        // start is returned as-is.
        let pi = stationary_distribution(&p, &StationaryConfig::default()).unwrap();
        assert_relative_eq!(pi.as_slice().iter().sum::<f64>(), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn slow_chain_reports_convergence_error() {
        let p = tm(dmatrix![0.999, 0.001; 0.5, 0.5]);
        let cfg = StationaryConfig {
            max_iters: 3,
            ..Default::default()
        };
        match stationary_distribution(&p, &cfg) {
            Err(Error::Convergence { iterations, residual }) => {
                assert_eq!(iterations, 3);
                assert!(residual > 0.0);
            }
            other => panic!("expected a convergence error, got {other:?}"),
        }
    }

    #[test]
    fn laplacian_of_uniform_pair() {
        let p = tm(dmatrix![0.5, 0.5; 0.5, 0.5]);
        let pi = stationary_distribution(&p, &StationaryConfig::default()).unwrap();
        let l = markov_laplacian(&p, &pi);
        assert_relative_eq!(l, dmatrix![0.25, -0.25; -0.25, 0.25], epsilon = 1e-15);
    }

    #[test]
    fn laplacian_symmetric_with_zero_row_sums() {
        let p = tm(dmatrix![0.1, 0.6, 0.3; 0.4, 0.4, 0.2; 0.25, 0.25, 0.5]);
        let pi = stationary_distribution(&p, &StationaryConfig::default()).unwrap();
        let l = markov_laplacian(&p, &pi);
        assert_eq!(l, l.transpose());
        for row in l.row_iter() {
            assert!(row.sum().abs() <= 1e-10);
        }
    }

    #[test]
    fn disconnected_blocks_give_double_zero_eigenvalue() {
        let p = two_block_chain([3, 4]);
        let pi = stationary_distribution(&p, &StationaryConfig::default()).unwrap();
        let l = markov_laplacian(&p, &pi);
        let emb = spectral_embed(&l, pi.values(), 2).unwrap();
        assert!(emb.eigenvalues.iter().all(|v| v.abs() < 1e-10));
        // Each eigenvector is constant on each block.
        for c in 0..2 {
            let col = emb.vectors.column(c);
            for i in 1..3 {
                assert_relative_eq!(col[i], col[0], epsilon = 1e-8);
            }
            for i in 4..7 {
                assert_relative_eq!(col[i], col[3], epsilon = 1e-8);
            }
        }
    }

    #[test]
    fn full_basis_residuals() {
        let p = tm(dmatrix![
            0.1, 0.6, 0.3, 0.0;
            0.4, 0.4, 0.1, 0.1;
            0.25, 0.25, 0.25, 0.25;
            0.0, 0.3, 0.3, 0.4
        ]);
        let pi = stationary_distribution(&p, &StationaryConfig::default()).unwrap();
        let l = markov_laplacian(&p, &pi);
        let emb = spectral_embed(&l, pi.values(), 4).unwrap();
        assert!(emb.residuals(&l, pi.values()).iter().all(|&r| r <= 1e-8));
        for w in emb.eigenvalues.as_slice().windows(2) {
            assert!(w[0] <= w[1]);
        }
        for c in 0..4 {
            let col = emb.vectors.column(c);
            let pivot = col.iter().copied().fold(0.0f64, |a, x| if x.abs() > a.abs() { x } else { a });
            assert!(pivot > 0.0);
        }
    }

    #[test]
    fn embed_rejects_bad_weights() {
        let l = DMatrix::identity(2, 2);
        let d = DVector::from_vec(vec![0.5, 0.0]);
        assert!(matches!(spectral_embed(&l, &d, 1), Err(Error::DegenerateDistribution(_))));
        let d = DVector::from_vec(vec![0.5, 0.5]);
        assert!(matches!(spectral_embed(&l, &d, 3), Err(Error::Config(_))));
    }

    #[test]
    fn clusters_recover_blocks() {
        let p = two_block_chain([4, 5]);
        let labels = cluster_markov(&p, 2, &KMeansConfig::with_k(2), &SpectralConfig::default()).unwrap();
        assert!(labels[..4].iter().all(|&l| l == labels[0]));
        assert!(labels[4..].iter().all(|&l| l == labels[4]));
        assert_ne!(labels[0], labels[4]);
    }

    #[test]
    fn duplicated_pairs_are_co_clustered() {
        use crate::graph::{view_transition, SigmaMode, ViewMatrix};
        let x = ViewMatrix::new(dmatrix![0.0, 0.0; 0.0, 0.0; 3.0, 3.0; 3.0, 3.0]).unwrap();
        let p = view_transition(&x, SigmaMode::MedianSquared).unwrap();
        let labels = cluster_markov(&p, 2, &KMeansConfig::with_k(2), &SpectralConfig::default()).unwrap();
        assert_eq!(labels[0], labels[1]);
        assert_eq!(labels[2], labels[3]);
        assert_ne!(labels[0], labels[2]);
    }

    #[test]
    fn single_cluster_request_rejected() {
        let p = two_block_chain([2, 2]);
        let r = cluster_markov(&p, 1, &KMeansConfig::with_k(1), &SpectralConfig::default());
        assert!(matches!(r, Err(Error::Config(_))));
    }
}
