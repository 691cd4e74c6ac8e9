//! External clustering quality measures against ground-truth classes.
//!
//! Conventions:
//! - F-score, precision and recall count unordered sample pairs.
//! - NMI uses natural-log entropies, normalized by `sqrt(H(a) H(b))` unless
//!   another [`NmiNormalization`] is requested.
//! - "Entropy" is the conditional entropy `H(truth | labels)` in bits; lower is
//!   better.
//! - Accuracy matches clusters to classes one-to-one with the Hungarian method.
//! - Adjusted Rand is the Hubert-Arabie form.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::solver::SolverSummary;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub f_score: f64,
    pub precision: f64,
    pub recall: f64,
    pub nmi: f64,
    pub entropy: f64,
    pub accuracy: f64,
    pub adjusted_rand: f64,
}

impl MetricsReport {
    pub const NAMES: [&'static str; 7] = [
        "f_score",
        "precision",
        "recall",
        "nmi",
        "entropy",
        "accuracy",
        "adjusted_rand",
    ];

    pub fn values(&self) -> [f64; 7] {
        [
            self.f_score,
            self.precision,
            self.recall,
            self.nmi,
            self.entropy,
            self.accuracy,
            self.adjusted_rand,
        ]
    }

    pub fn from_values(v: [f64; 7]) -> Self {
        MetricsReport {
            f_score: v[0],
            precision: v[1],
            recall: v[2],
            nmi: v[3],
            entropy: v[4],
            accuracy: v[5],
            adjusted_rand: v[6],
        }
    }

    /// `(name, value)` records in a fixed order.
    pub fn records(&self) -> impl Iterator<Item = (&'static str, f64)> {
        Self::NAMES.into_iter().zip(self.values())
    }
}

/// Labels produced by a clustering method, with optional evaluation and
/// solver diagnostics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusteringResult {
    pub labels: Vec<usize>,
    pub metrics: Option<MetricsReport>,
    pub solver: Option<SolverSummary>,
}

impl ClusteringResult {
    pub fn from_labels(labels: Vec<usize>) -> Self {
        ClusteringResult {
            labels,
            metrics: None,
            solver: None,
        }
    }

    pub fn evaluate(mut self, truth: &[usize]) -> Result<Self> {
        self.metrics = Some(evaluate(&self.labels, truth)?);
        Ok(self)
    }
}

/// Cluster-by-class counts with compacted label ids (ordered by label value).
#[derive(Debug, Clone)]
pub struct Contingency {
    pub counts: Vec<Vec<u64>>,
    pub row_sums: Vec<u64>,
    pub col_sums: Vec<u64>,
    pub total: u64,
}

fn compact(labels: &[usize]) -> (Vec<usize>, usize) {
    let mut ids = BTreeMap::new();
    for &l in labels {
        ids.entry(l).or_insert(0);
    }
    for (i, v) in ids.values_mut().enumerate() {
        *v = i;
    }
    (labels.iter().map(|l| ids[l]).collect(), ids.len())
}

impl Contingency {
    pub fn new(labels: &[usize], truth: &[usize]) -> Result<Self> {
        if labels.len() != truth.len() {
            return Err(Error::Shape(format!(
                "{} predicted labels vs {} true labels",
                labels.len(),
                truth.len()
            )));
        }
        if labels.len() < 2 {
            return Err(Error::Shape("need at least 2 samples to compare labelings".into()));
        }
        let (a, ka) = compact(labels);
        let (b, kb) = compact(truth);
        let mut counts = vec![vec![0u64; kb]; ka];
        for (&i, &j) in a.iter().zip(&b) {
            counts[i][j] += 1;
        }
        let row_sums = counts.iter().map(|r| r.iter().sum()).collect();
        let col_sums = (0..kb).map(|j| counts.iter().map(|r| r[j]).sum()).collect();
        Ok(Contingency {
            counts,
            row_sums,
            col_sums,
            total: labels.len() as u64,
        })
    }

    fn cells(&self) -> impl Iterator<Item = u64> + '_ {
        self.counts.iter().flatten().copied()
    }
}

fn pairs(n: u64) -> u64 {
    n * n.saturating_sub(1) / 2
}

fn ratio(num: f64, den: f64) -> f64 {
    if den == 0.0 {
        0.0
    } else {
        num / den
    }
}

/// Pair-counting `(f_score, precision, recall)`; `0/0` is taken as 0.
pub fn pairwise_prf(labels: &[usize], truth: &[usize]) -> Result<(f64, f64, f64)> {
    let c = Contingency::new(labels, truth)?;
    let tp = c.cells().map(pairs).sum::<u64>() as f64;
    let predicted = c.row_sums.iter().map(|&n| pairs(n)).sum::<u64>() as f64;
    let actual = c.col_sums.iter().map(|&n| pairs(n)).sum::<u64>() as f64;
    let p = ratio(tp, predicted);
    let r = ratio(tp, actual);
    Ok((ratio(2.0 * p * r, p + r), p, r))
}

fn entropy_nats(sums: &[u64], total: u64) -> f64 {
    let n = total as f64;
    sums.iter()
        .filter(|&&s| s > 0)
        .map(|&s| {
            let p = s as f64 / n;
            -p * p.ln()
        })
        .sum()
}

fn mutual_information(c: &Contingency) -> f64 {
    let n = c.total as f64;
    let mut mi = 0.0;
    for (i, row) in c.counts.iter().enumerate() {
        for (j, &nij) in row.iter().enumerate() {
            if nij > 0 {
                let nij = nij as f64;
                mi += nij / n * (n * nij / (c.row_sums[i] as f64 * c.col_sums[j] as f64)).ln();
            }
        }
    }
    mi.max(0.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NmiNormalization {
    /// `sqrt(H(a) H(b))`
    #[default]
    Sqrt,
    Min,
    Max,
    Arithmetic,
}

pub fn nmi(labels: &[usize], truth: &[usize]) -> Result<f64> {
    nmi_with(labels, truth, NmiNormalization::Sqrt)
}

pub fn nmi_with(labels: &[usize], truth: &[usize], norm: NmiNormalization) -> Result<f64> {
    let c = Contingency::new(labels, truth)?;
    let ha = entropy_nats(&c.row_sums, c.total);
    let hb = entropy_nats(&c.col_sums, c.total);
    if ha == 0.0 && hb == 0.0 {
        // Both labelings are a single group, hence identical.
        return Ok(1.0);
    }
    if ha == 0.0 || hb == 0.0 {
        return Ok(0.0);
    }
    let denom = match norm {
        NmiNormalization::Sqrt => (ha * hb).sqrt(),
        NmiNormalization::Min => ha.min(hb),
        NmiNormalization::Max => ha.max(hb),
        NmiNormalization::Arithmetic => 0.5 * (ha + hb),
    };
    Ok((mutual_information(&c) / denom).clamp(0.0, 1.0))
}

/// Fraction of samples correctly labeled under the best one-to-one mapping of
/// clusters to classes.
pub fn clustering_accuracy(labels: &[usize], truth: &[usize]) -> Result<f64> {
    let c = Contingency::new(labels, truth)?;
    let size = c.counts.len().max(c.col_sums.len());
    // Maximize matches == minimize negated counts on a zero-padded square.
    let cost: Vec<Vec<i64>> = (0..size)
        .map(|i| {
            (0..size)
                .map(|j| {
                    -(c.counts.get(i).and_then(|r| r.get(j)).copied().unwrap_or(0) as i64)
                })
                .collect()
        })
        .collect();
    let assignment = hungarian(&cost);
    let matched: i64 = assignment.iter().enumerate().map(|(i, &j)| -cost[i][j]).sum();
    Ok(matched as f64 / c.total as f64)
}

/// Minimum-cost perfect assignment on a square matrix (shortest augmenting
/// paths with potentials, O(n^3)). Returns the column chosen for each row.
pub fn hungarian(cost: &[Vec<i64>]) -> Vec<usize> {
    let n = cost.len();
    // 1-based internals; index 0 is the virtual source column.
    let mut u = vec![0i64; n + 1];
    let mut v = vec![0i64; n + 1];
    let mut row_of = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];
    for i in 1..=n {
        row_of[0] = i;
        let mut j0 = 0;
        let mut minv = vec![i64::MAX; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[j0] = true;
            let i0 = row_of[j0];
            let mut delta = i64::MAX;
            let mut j1 = 0;
            for j in 1..=n {
                if !used[j] {
                    let cur = cost[i0 - 1][j - 1] - u[i0] - v[j];
                    if cur < minv[j] {
                        minv[j] = cur;
                        way[j] = j0;
                    }
                    if minv[j] < delta {
                        delta = minv[j];
                        j1 = j;
                    }
                }
            }
            for j in 0..=n {
                if used[j] {
                    u[row_of[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if row_of[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            row_of[j0] = row_of[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let mut assignment = vec![0; n];
    for j in 1..=n {
        if row_of[j] > 0 {
            assignment[row_of[j] - 1] = j - 1;
        }
    }
    assignment
}

/// `H(truth | labels)` in bits.
pub fn conditional_entropy(labels: &[usize], truth: &[usize]) -> Result<f64> {
    let c = Contingency::new(labels, truth)?;
    let n = c.total as f64;
    let mut h = 0.0;
    for (row, &size) in c.counts.iter().zip(&c.row_sums) {
        let size = size as f64;
        for &nij in row.iter().filter(|&&x| x > 0) {
            let p = nij as f64 / size;
            h -= size / n * p * p.log2();
        }
    }
    Ok(h.max(0.0))
}

pub fn adjusted_rand(labels: &[usize], truth: &[usize]) -> Result<f64> {
    let c = Contingency::new(labels, truth)?;
    let index = c.cells().map(pairs).sum::<u64>() as f64;
    let sum_a = c.row_sums.iter().map(|&n| pairs(n)).sum::<u64>() as f64;
    let sum_b = c.col_sums.iter().map(|&n| pairs(n)).sum::<u64>() as f64;
    let expected = sum_a * sum_b / pairs(c.total) as f64;
    let max = 0.5 * (sum_a + sum_b);
    if max == expected {
        // Both labelings are all-one-cluster or all-singletons.
        return Ok(if index == max { 1.0 } else { 0.0 });
    }
    Ok((index - expected) / (max - expected))
}

pub fn evaluate(labels: &[usize], truth: &[usize]) -> Result<MetricsReport> {
    let (f_score, precision, recall) = pairwise_prf(labels, truth)?;
    Ok(MetricsReport {
        f_score,
        precision,
        recall,
        nmi: nmi(labels, truth)?,
        entropy: conditional_entropy(labels, truth)?,
        accuracy: clustering_accuracy(labels, truth)?,
        adjusted_rand: adjusted_rand(labels, truth)?,
    })
}
