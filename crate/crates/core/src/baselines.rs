//! Reference clusterings: best single view, feature concatenation and kernel
//! addition.

use nalgebra::{DMatrix, DVector};

use crate::data::MultiViewDataset;
use crate::error::{Error, Result};
use crate::graph::{kernel_denominator, similarity_matrix, SigmaMode};
use crate::kmeans::{kmeans, KMeansConfig};
use crate::linalg;
use crate::markov::normalize_embedding_rows;
use crate::metrics::{clustering_accuracy, ClusteringResult};

fn kmeans_k(kmeans_cfg: &KMeansConfig, k: usize) -> KMeansConfig {
    KMeansConfig {
        k,
        ..kmeans_cfg.clone()
    }
}

/// Runs k-means on each view's raw features and keeps the view whose labels
/// score the highest accuracy against the ground truth (earliest view on
/// ties). Returns the result and the chosen view index.
pub fn best_single_view(
    ds: &MultiViewDataset,
    k: usize,
    kmeans_cfg: &KMeansConfig,
) -> Result<(ClusteringResult, usize)> {
    let Some(truth) = &ds.labels else {
        return Err(Error::Config("best single view needs ground-truth labels".into()));
    };
    let cfg = kmeans_k(kmeans_cfg, k);
    let mut best: Option<(Vec<usize>, f64, usize)> = None;
    for (i, view) in ds.views.iter().enumerate() {
        let labels = kmeans(view.data(), &cfg)?.labels;
        let acc = clustering_accuracy(&labels, truth)?;
        if best.as_ref().is_none_or(|b| acc > b.1) {
            best = Some((labels, acc, i));
        }
    }
    let (labels, _, view) = best.expect("dataset has at least one view");
    Ok((ClusteringResult::from_labels(labels), view))
}

/// Horizontal concatenation of all views, `N x sum(D_k)`.
pub fn concatenate_features(ds: &MultiViewDataset) -> DMatrix<f64> {
    let n = ds.n_samples();
    let width = ds.views.iter().map(|v| v.n_features()).sum();
    let mut out = DMatrix::zeros(n, width);
    let mut offset = 0;
    for v in &ds.views {
        out.columns_mut(offset, v.n_features()).copy_from(v.data());
        offset += v.n_features();
    }
    out
}

pub fn feature_concat(
    ds: &MultiViewDataset,
    k: usize,
    kmeans_cfg: &KMeansConfig,
) -> Result<ClusteringResult> {
    let x = concatenate_features(ds);
    Ok(ClusteringResult::from_labels(kmeans(&x, &kmeans_k(kmeans_cfg, k))?.labels))
}

/// Entrywise mean of the per-view Gaussian similarity matrices, each view with
/// its own median-based width.
pub fn averaged_kernel(ds: &MultiViewDataset, mode: SigmaMode) -> Result<DMatrix<f64>> {
    let n = ds.n_samples();
    let mut sum = DMatrix::zeros(n, n);
    for v in &ds.views {
        sum += similarity_matrix(v, kernel_denominator(v, mode)?)?;
    }
    Ok(sum / ds.n_views() as f64)
}

/// Spectral clustering of an affinity matrix: the `k` leading eigenvectors of
/// `D^-1/2 W D^-1/2` (the smallest of the symmetric normalized Laplacian),
/// rows scaled to unit length, then k-means.
pub fn normalized_spectral(
    w: &DMatrix<f64>,
    k: usize,
    kmeans_cfg: &KMeansConfig,
) -> Result<Vec<usize>> {
    let n = w.nrows();
    if k == 0 || k > n {
        return Err(Error::Config(format!("cannot embed {n} points in {k} dimensions")));
    }
    let inv_sqrt: DVector<f64> = DVector::from_iterator(
        n,
        w.row_iter().map(|r| {
            let d = r.sum();
            if d > 0.0 {
                1.0 / d.sqrt()
            } else {
                0.0
            }
        }),
    );
    let mut a = DMatrix::from_fn(n, n, |i, j| inv_sqrt[i] * w[(i, j)] * inv_sqrt[j]);
    a = (&a + a.transpose()) * 0.5;
    let (_, vectors) = linalg::symmetric_eigen(&a)?;
    let mut u = vectors.columns(n - k, k).into_owned();
    normalize_embedding_rows(&mut u);
    Ok(kmeans(&u, &kmeans_k(kmeans_cfg, k))?.labels)
}

pub fn kernel_addition(
    ds: &MultiViewDataset,
    k: usize,
    kmeans_cfg: &KMeansConfig,
    mode: SigmaMode,
) -> Result<ClusteringResult> {
    let w = averaged_kernel(ds, mode)?;
    Ok(ClusteringResult::from_labels(normalized_spectral(&w, k, kmeans_cfg)?))
}
