//! Brute-force reference implementations used to check the library.
#![allow(dead_code)]

use std::collections::HashMap;

use nalgebra::{DMatrix, DVector};
use rand::Rng;

/// Euclidean projection onto the simplex by enumerating every support set:
/// on support `S` the KKT point is `c_S - theta` with a common shift, and the
/// projection is the feasible candidate closest to `c`.
pub fn simplex_projection_exhaustive(c: &[f64]) -> Vec<f64> {
    let d = c.len();
    assert!(d <= 16);
    let mut best: Option<(f64, Vec<f64>)> = None;
    for mask in 1u32..(1 << d) {
        let support: Vec<usize> = (0..d).filter(|i| mask & (1 << i) != 0).collect();
        let theta = (support.iter().map(|&i| c[i]).sum::<f64>() - 1.0) / support.len() as f64;
        let mut x = vec![0.0; d];
        let mut feasible = true;
        for &i in &support {
            x[i] = c[i] - theta;
            if x[i] < -1e-15 {
                feasible = false;
            }
        }
        if !feasible {
            continue;
        }
        let dist: f64 = x.iter().zip(c).map(|(a, b)| (a - b) * (a - b)).sum();
        if best.as_ref().is_none_or(|(bd, _)| dist < *bd) {
            best = Some((dist, x.iter().map(|v| v.max(0.0)).collect()));
        }
    }
    best.expect("some support is always feasible").1
}

/// Singular value thresholding through nalgebra's SVD.
pub fn svt_reference(m: &DMatrix<f64>, tau: f64) -> DMatrix<f64> {
    let svd = m.clone().svd(true, true);
    let shrunk = svd.singular_values.map(|s| (s - tau).max(0.0));
    svd.u.unwrap() * DMatrix::from_diagonal(&shrunk) * svd.v_t.unwrap()
}

pub fn singular_values_sorted(m: &DMatrix<f64>) -> Vec<f64> {
    let mut s: Vec<f64> = m.singular_values().iter().copied().collect();
    s.sort_by(|a, b| b.total_cmp(a));
    s
}

/// Stationary distribution from the linear system `(Pᵀ - I) pi = 0`,
/// `sum(pi) = 1`, with the last balance equation replaced by normalization.
pub fn stationary_dense(p: &DMatrix<f64>) -> DVector<f64> {
    let n = p.nrows();
    let mut a = p.transpose() - DMatrix::identity(n, n);
    let mut b = DVector::zeros(n);
    for j in 0..n {
        a[(n - 1, j)] = 1.0;
    }
    b[n - 1] = 1.0;
    a.lu().solve(&b).expect("irreducible chain")
}

/// Generalized eigenvalues of `L u = lambda D u` for diagonal positive `D`,
/// as the (real) eigenvalues of the non-symmetric `D^-1 L`, ascending.
pub fn generalized_eigenvalues(l: &DMatrix<f64>, d: &DVector<f64>) -> Vec<f64> {
    let n = l.nrows();
    let m = DMatrix::from_fn(n, n, |i, j| l[(i, j)] / d[i]);
    let mut ev: Vec<f64> = m.complex_eigenvalues().iter().map(|c| c.re).collect();
    ev.sort_by(f64::total_cmp);
    ev
}

/// Smallest k-means inertia over all two-way partitions of the rows.
pub fn best_two_partition_inertia(x: &DMatrix<f64>) -> f64 {
    let n = x.nrows();
    assert!(n <= 16);
    let mut best = f64::INFINITY;
    for mask in 1u32..(1 << (n - 1)) {
        let mut total = 0.0;
        for side in [true, false] {
            let rows: Vec<usize> = (0..n).filter(|&i| (mask & (1 << i) != 0) == side).collect();
            let mut mean = nalgebra::RowDVector::zeros(x.ncols());
            for &i in &rows {
                mean += x.row(i);
            }
            mean /= rows.len() as f64;
            total += rows.iter().map(|&i| (x.row(i) - &mean).norm_squared()).sum::<f64>();
        }
        best = best.min(total);
    }
    best
}

/// Pair counts over all `i < j`: (same/same, same-pred/diff-truth,
/// diff-pred/same-truth, diff/diff).
pub fn pair_counts(labels: &[usize], truth: &[usize]) -> (u64, u64, u64, u64) {
    let (mut ss, mut sd, mut ds, mut dd) = (0, 0, 0, 0);
    for i in 0..labels.len() {
        for j in (i + 1)..labels.len() {
            match (labels[i] == labels[j], truth[i] == truth[j]) {
                (true, true) => ss += 1,
                (true, false) => sd += 1,
                (false, true) => ds += 1,
                (false, false) => dd += 1,
            }
        }
    }
    (ss, sd, ds, dd)
}

pub fn prf_brute(labels: &[usize], truth: &[usize]) -> (f64, f64, f64) {
    let (tp, fp, fn_, _) = pair_counts(labels, truth);
    let p = if tp + fp == 0 { 0.0 } else { tp as f64 / (tp + fp) as f64 };
    let r = if tp + fn_ == 0 { 0.0 } else { tp as f64 / (tp + fn_) as f64 };
    let f = if p + r == 0.0 { 0.0 } else { 2.0 * p * r / (p + r) };
    (f, p, r)
}

/// Adjusted Rand index from the four pair counts.
pub fn ari_brute(labels: &[usize], truth: &[usize]) -> f64 {
    let (a, b, c, d) = pair_counts(labels, truth);
    let (a, b, c, d) = (a as f64, b as f64, c as f64, d as f64);
    let den = (a + b) * (b + d) + (a + c) * (c + d);
    if den == 0.0 {
        1.0
    } else {
        2.0 * (a * d - b * c) / den
    }
}

fn probabilities<K: std::hash::Hash + Eq>(keys: impl Iterator<Item = K>, n: f64) -> Vec<f64> {
    let mut counts: HashMap<K, f64> = HashMap::new();
    for k in keys {
        *counts.entry(k).or_default() += 1.0;
    }
    counts.into_values().map(|c| c / n).collect()
}

fn entropy(p: &[f64], log: fn(f64) -> f64) -> f64 {
    -p.iter().map(|&x| x * log(x)).sum::<f64>()
}

/// NMI as `(H(a) + H(b) - H(a, b)) / sqrt(H(a) H(b))` in nats.
pub fn nmi_brute(labels: &[usize], truth: &[usize]) -> f64 {
    let n = labels.len() as f64;
    let ha = entropy(&probabilities(labels.iter(), n), f64::ln);
    let hb = entropy(&probabilities(truth.iter(), n), f64::ln);
    let hab = entropy(&probabilities(labels.iter().zip(truth), n), f64::ln);
    if ha == 0.0 && hb == 0.0 {
        return 1.0;
    }
    if ha == 0.0 || hb == 0.0 {
        return 0.0;
    }
    ((ha + hb - hab) / (ha * hb).sqrt()).clamp(0.0, 1.0)
}

/// `H(truth | labels) = H(labels, truth) - H(labels)` in bits.
pub fn conditional_entropy_brute(labels: &[usize], truth: &[usize]) -> f64 {
    let n = labels.len() as f64;
    let joint = entropy(&probabilities(labels.iter().zip(truth), n), f64::log2);
    let marginal = entropy(&probabilities(labels.iter(), n), f64::log2);
    (joint - marginal).max(0.0)
}

/// Best accuracy over every injective relabeling of predicted clusters onto
/// true classes (extra clusters map to nothing).
pub fn accuracy_brute(labels: &[usize], truth: &[usize]) -> f64 {
    let mut clusters: Vec<usize> = labels.to_vec();
    clusters.sort_unstable();
    clusters.dedup();
    let mut classes: Vec<usize> = truth.to_vec();
    classes.sort_unstable();
    classes.dedup();
    // Pad classes with "unmatched" slots so every cluster has a target.
    let slots: Vec<Option<usize>> = classes
        .iter()
        .map(|&c| Some(c))
        .chain(std::iter::repeat_n(None, clusters.len()))
        .collect();
    let mut best = 0usize;
    let mut used = vec![false; slots.len()];
    let mut assign = vec![None; clusters.len()];
    fn rec(
        i: usize,
        clusters: &[usize],
        slots: &[Option<usize>],
        used: &mut [bool],
        assign: &mut [Option<usize>],
        labels: &[usize],
        truth: &[usize],
        best: &mut usize,
    ) {
        if i == clusters.len() {
            let hits = labels
                .iter()
                .zip(truth)
                .filter(|(l, t)| {
                    let ci = clusters.iter().position(|c| c == *l).unwrap();
                    assign[ci] == Some(**t)
                })
                .count();
            *best = (*best).max(hits);
            return;
        }
        for s in 0..slots.len() {
            if !used[s] {
                used[s] = true;
                assign[i] = slots[s];
                rec(i + 1, clusters, slots, used, assign, labels, truth, best);
                used[s] = false;
            }
        }
    }
    rec(0, &clusters, &slots, &mut used, &mut assign, labels, truth, &mut best);
    best as f64 / labels.len() as f64
}

pub fn random_labels<R: Rng>(rng: &mut R, n: usize, k: usize) -> Vec<usize> {
    (0..n).map(|_| rng.random_range(0..k)).collect()
}

/// Random row-stochastic matrix with strictly positive entries.
pub fn random_stochastic<R: Rng>(rng: &mut R, n: usize) -> DMatrix<f64> {
    let mut m = DMatrix::from_fn(n, n, |_, _| rng.random::<f64>() + 0.01);
    for mut row in m.row_iter_mut() {
        let s = row.sum();
        row /= s;
    }
    m
}

/// Block-diagonal stochastic matrix: uniform transitions within each block.
pub fn block_chain(sizes: &[usize]) -> DMatrix<f64> {
    let n: usize = sizes.iter().sum();
    let mut m = DMatrix::zeros(n, n);
    let mut start = 0;
    for &s in sizes {
        for i in start..start + s {
            for j in start..start + s {
                m[(i, j)] = 1.0 / s as f64;
            }
        }
        start += s;
    }
    m
}

pub fn same_partition(a: &[usize], b: &[usize]) -> bool {
    a.len() == b.len()
        && (0..a.len()).all(|i| (0..a.len()).all(|j| (a[i] == a[j]) == (b[i] == b[j])))
}
