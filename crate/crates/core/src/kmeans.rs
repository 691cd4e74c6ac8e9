//! Lloyd's k-means with k-means++ seeding and independent restarts.

use nalgebra::DMatrix;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::stream_rng;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct KMeansConfig {
    pub k: usize,
    pub restarts: usize,
    pub max_iters: usize,
    pub tol: f64,
    pub seed: u64,
}

impl Default for KMeansConfig {
    fn default() -> Self {
        KMeansConfig {
            k: 2,
            restarts: 20,
            max_iters: 300,
            tol: 1e-9,
            seed: 0,
        }
    }
}

impl KMeansConfig {
    pub fn with_k(k: usize) -> Self {
        KMeansConfig {
            k,
            ..Default::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.k == 0 || self.restarts == 0 || self.max_iters == 0 {
            return Err(Error::Config(
                "k-means needs k, restarts and max_iters all at least 1".into(),
            ));
        }
        if !(self.tol >= 0.0) {
            return Err(Error::Config(format!("k-means tol must be >= 0, got {}", self.tol)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct KMeansResult {
    pub labels: Vec<usize>,
    pub inertia: f64,
    pub centers: DMatrix<f64>,
    /// Index of the restart that produced this result.
    pub restart: usize,
    /// Inertia after each assignment step of the winning run.
    pub trace: Vec<f64>,
}

/// Clusters the rows of `x`, keeping the lowest-inertia run of `cfg.restarts`.
/// Ties go to the earlier restart, so the result does not depend on the order
/// in which restarts are evaluated.
pub fn kmeans(x: &DMatrix<f64>, cfg: &KMeansConfig) -> Result<KMeansResult> {
    cfg.validate()?;
    let n = x.nrows();
    if n == 0 || x.ncols() == 0 {
        return Err(Error::Shape("k-means input is empty".into()));
    }
    if cfg.k > n {
        return Err(Error::Config(format!("k = {} exceeds N = {n}", cfg.k)));
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numerical("k-means input contains non-finite values".into()));
    }

    let mut best: Option<KMeansResult> = None;
    for restart in 0..cfg.restarts {
        let run = lloyd(x, cfg, restart);
        if best.as_ref().is_none_or(|b| run.inertia < b.inertia) {
            best = Some(run);
        }
    }
    Ok(best.expect("at least one restart"))
}

fn sq_dist(x: &DMatrix<f64>, i: usize, centers: &DMatrix<f64>, c: usize) -> f64 {
    let mut acc = 0.0;
    for f in 0..x.ncols() {
        let d = x[(i, f)] - centers[(c, f)];
        acc += d * d;
    }
    acc
}

fn plus_plus_init<R: Rng>(x: &DMatrix<f64>, k: usize, rng: &mut R) -> DMatrix<f64> {
    let n = x.nrows();
    let mut centers = DMatrix::zeros(k, x.ncols());
    let first = rng.random_range(0..n);
    centers.set_row(0, &x.row(first));
    let mut closest: Vec<f64> = (0..n).map(|i| sq_dist(x, i, &centers, 0)).collect();
    for c in 1..k {
        let total: f64 = closest.iter().sum();
        let pick = if total > 0.0 {
            let mut target = rng.random::<f64>() * total;
            let mut chosen = n - 1;
            for (i, &d) in closest.iter().enumerate() {
                if target < d {
                    chosen = i;
                    break;
                }
                target -= d;
            }
            chosen
        } else {
            rng.random_range(0..n)
        };
        centers.set_row(c, &x.row(pick));
        for (i, d) in closest.iter_mut().enumerate() {
            *d = d.min(sq_dist(x, i, &centers, c));
        }
    }
    centers
}

fn assign(x: &DMatrix<f64>, centers: &DMatrix<f64>, labels: &mut [usize]) -> f64 {
    let mut inertia = 0.0;
    for (i, label) in labels.iter_mut().enumerate() {
        let mut best = (0, f64::INFINITY);
        for c in 0..centers.nrows() {
            let d = sq_dist(x, i, centers, c);
            if d < best.1 {
                best = (c, d);
            }
        }
        *label = best.0;
        inertia += best.1;
    }
    inertia
}

/// Recomputes centers as cluster means. An empty cluster is moved onto the
/// point farthest from its current center. Returns the largest center shift.
fn update_centers(x: &DMatrix<f64>, labels: &[usize], centers: &mut DMatrix<f64>) -> f64 {
    let k = centers.nrows();
    let mut sums = DMatrix::zeros(k, x.ncols());
    let mut counts = vec![0usize; k];
    for (i, &l) in labels.iter().enumerate() {
        counts[l] += 1;
        let mut row = sums.row_mut(l);
        row += x.row(i);
    }
    let mut taken = vec![false; x.nrows()];
    let mut shift = 0.0f64;
    for c in 0..k {
        let new_center = if counts[c] > 0 {
            sums.row(c) / counts[c] as f64
        } else {
            let far = (0..x.nrows())
                .filter(|&i| !taken[i])
                .max_by(|&a, &b| {
                    sq_dist(x, a, centers, labels[a]).total_cmp(&sq_dist(x, b, centers, labels[b]))
                })
                .expect("k <= N leaves a free point");
            taken[far] = true;
            x.row(far).into_owned()
        };
        shift = shift.max((&new_center - centers.row(c)).norm());
        centers.set_row(c, &new_center);
    }
    shift
}

fn lloyd(x: &DMatrix<f64>, cfg: &KMeansConfig, restart: usize) -> KMeansResult {
    let mut rng = stream_rng(cfg.seed, restart as u64);
    let mut centers = plus_plus_init(x, cfg.k, &mut rng);
    let mut labels = vec![0; x.nrows()];
    let mut inertia = assign(x, &centers, &mut labels);
    let mut trace = vec![inertia];
    let mut next = labels.clone();
    for _ in 0..cfg.max_iters {
        let shift = update_centers(x, &labels, &mut centers);
        inertia = assign(x, &centers, &mut next);
        trace.push(inertia);
        let changed = next != labels;
        std::mem::swap(&mut labels, &mut next);
        if !changed || shift < cfg.tol {
            break;
        }
    }
    KMeansResult {
        labels,
        inertia,
        centers,
        restart,
        trace,
    }
}
