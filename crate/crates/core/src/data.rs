//! Multi-view datasets: CSV input/output, a synthetic two-view Gaussian
//! mixture, and error injection.

use std::fs;
use std::path::{Path, PathBuf};

use nalgebra::{DMatrix, Matrix2, Vector2};
use rand::seq::{index, SliceRandom};
use rand::Rng;
use rand_distr::{Distribution, Normal, StandardNormal};

use crate::error::{Error, Result};
use crate::graph::ViewMatrix;
use crate::rng::stream_rng;

#[derive(Debug, Clone, PartialEq)]
pub struct MultiViewDataset {
    pub views: Vec<ViewMatrix>,
    pub labels: Option<Vec<usize>>,
    pub names: Vec<String>,
}

impl MultiViewDataset {
    pub fn new(
        views: Vec<ViewMatrix>,
        labels: Option<Vec<usize>>,
        names: Vec<String>,
    ) -> Result<Self> {
        let Some(first) = views.first() else {
            return Err(Error::Schema("dataset has no views".into()));
        };
        let n = first.n_samples();
        if let Some((i, v)) = views.iter().enumerate().find(|(_, v)| v.n_samples() != n) {
            return Err(Error::Schema(format!(
                "view {i} has {} rows, view 0 has {n}",
                v.n_samples()
            )));
        }
        if names.len() != views.len() {
            return Err(Error::Schema(format!(
                "{} view names for {} views",
                names.len(),
                views.len()
            )));
        }
        if let Some(l) = &labels {
            if l.len() != n {
                return Err(Error::Schema(format!("{} labels for {n} samples", l.len())));
            }
        }
        Ok(MultiViewDataset {
            views,
            labels,
            names,
        })
    }

    pub fn n_samples(&self) -> usize {
        self.views[0].n_samples()
    }

    pub fn n_views(&self) -> usize {
        self.views.len()
    }

    fn with_views(&self, views: Vec<DMatrix<f64>>) -> Result<Self> {
        Ok(MultiViewDataset {
            views: views.into_iter().map(ViewMatrix::new).collect::<Result<_>>()?,
            labels: self.labels.clone(),
            names: self.names.clone(),
        })
    }
}

fn read_records(path: &Path) -> Result<Vec<csv::StringRecord>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| csv_error(path, e))?;
    reader
        .records()
        .collect::<std::result::Result<_, _>>()
        .map_err(|e| csv_error(path, e))
}

fn csv_error(path: &Path, e: csv::Error) -> Error {
    let row = e.position().map_or(0, |p| p.line() as usize);
    match e.into_kind() {
        csv::ErrorKind::Io(source) => Error::io(path, source),
        csv::ErrorKind::UnequalLengths { expected_len, len, .. } => Error::Parse {
            path: path.into(),
            row,
            col: 0,
            msg: format!("expected {expected_len} fields, found {len}"),
        },
        other => Error::Parse {
            path: path.into(),
            row,
            col: 0,
            msg: format!("{other:?}"),
        },
    }
}

/// Parses every cell with `parse`, skipping a first line that is not fully
/// parseable (a header). Rows and columns in errors are 1-based file
/// positions.
fn parse_table<T>(
    path: &Path,
    parse: impl Fn(&str) -> Option<T>,
) -> Result<Vec<Vec<T>>> {
    let records = read_records(path)?;
    let skip = usize::from(
        records
            .first()
            .is_some_and(|r| r.iter().any(|cell| parse(cell).is_none())),
    );
    let mut rows = Vec::with_capacity(records.len());
    for (i, record) in records.iter().enumerate().skip(skip) {
        let row = record
            .iter()
            .enumerate()
            .map(|(j, cell)| {
                parse(cell).ok_or_else(|| Error::Parse {
                    path: path.into(),
                    row: i + 1,
                    col: j + 1,
                    msg: format!("cannot parse {cell:?}"),
                })
            })
            .collect::<Result<Vec<T>>>()?;
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(Error::Schema(format!("{}: no data rows", path.display())));
    }
    Ok(rows)
}

fn parse_f64(cell: &str) -> Option<f64> {
    cell.parse::<f64>().ok().filter(|v| v.is_finite())
}

pub fn read_matrix(path: &Path) -> Result<DMatrix<f64>> {
    let rows = parse_table(path, parse_f64)?;
    let d = rows[0].len();
    Ok(DMatrix::from_fn(rows.len(), d, |i, j| rows[i][j]))
}

pub fn read_labels(path: &Path) -> Result<Vec<usize>> {
    let rows = parse_table(path, |c| c.parse::<usize>().ok())?;
    rows.into_iter()
        .enumerate()
        .map(|(i, r)| match r[..] {
            [l] => Ok(l),
            _ => Err(Error::Schema(format!(
                "{}: label row {} has {} columns",
                path.display(),
                i + 1,
                r.len()
            ))),
        })
        .collect()
}

/// Loads one CSV file per view, plus an optional single-column label file.
/// View names are the file stems.
pub fn load_views(paths: &[PathBuf], label_path: Option<&Path>) -> Result<MultiViewDataset> {
    let mut views = Vec::with_capacity(paths.len());
    for path in paths {
        views.push(ViewMatrix::new(read_matrix(path)?)?);
    }
    let names = paths
        .iter()
        .map(|p| p.file_stem().map_or_else(String::new, |s| s.to_string_lossy().into_owned()))
        .collect();
    let labels = label_path.map(read_labels).transpose()?;
    MultiViewDataset::new(views, labels, names)
}

/// Writes values with the shortest representation that parses back to the
/// same `f64`, so a save/load round trip is exact.
pub fn write_matrix(path: &Path, m: &DMatrix<f64>) -> Result<()> {
    let mut out = String::new();
    for row in m.row_iter() {
        let cells: Vec<String> = row.iter().map(|v| v.to_string()).collect();
        out.push_str(&cells.join(","));
        out.push('\n');
    }
    fs::write(path, out).map_err(|e| Error::io(path, e))
}

pub fn write_labels(path: &Path, labels: &[usize]) -> Result<()> {
    let mut out = String::new();
    for l in labels {
        out.push_str(&l.to_string());
        out.push('\n');
    }
    fs::write(path, out).map_err(|e| Error::io(path, e))
}

/// Saves each view as `<dir>/<name>.csv` and labels as `<dir>/labels.csv`.
/// Returns the view paths in order.
pub fn save_views(ds: &MultiViewDataset, dir: &Path) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut paths = Vec::new();
    for (view, name) in ds.views.iter().zip(&ds.names) {
        let path = dir.join(format!("{name}.csv"));
        write_matrix(&path, view.data())?;
        paths.push(path);
    }
    if let Some(labels) = &ds.labels {
        write_labels(&dir.join("labels.csv"), labels)?;
    }
    Ok(paths)
}

/// Per-(view, cluster) mean and covariance of the synthetic mixture.
pub fn synthetic_parameters(view: usize, cluster: usize) -> (Vector2<f64>, Matrix2<f64>) {
    let wide = Matrix2::new(1.0, 0.5, 0.5, 1.5);
    let narrow = Matrix2::new(0.3, 0.0, 0.0, 0.6);
    let low = Vector2::new(1.0, 1.0);
    let high = Vector2::new(2.0, 2.0);
    match (view, cluster) {
        (0, 0) => (low, wide),
        (0, 1) => (high, narrow),
        (1, 0) => (high, narrow),
        (1, 1) => (low, wide),
        _ => panic!("synthetic mixture has 2 views and 2 clusters"),
    }
}

/// Two views, two balanced clusters of `n_per_cluster` samples each. Each
/// sample's cluster is fixed first, then both of its views are drawn from that
/// cluster's Gaussians. Sample order is shuffled.
pub fn synthetic_two_view(n_per_cluster: usize, seed: u64) -> MultiViewDataset {
    assert!(n_per_cluster >= 1, "n_per_cluster must be at least 1");
    let n = 2 * n_per_cluster;
    let mut rng = stream_rng(seed, 0);
    let mut labels: Vec<usize> = (0..n).map(|i| i / n_per_cluster).collect();
    labels.shuffle(&mut rng);

    let factors: Vec<Vec<(Vector2<f64>, Matrix2<f64>)>> = (0..2)
        .map(|v| {
            (0..2)
                .map(|c| {
                    let (mean, cov) = synthetic_parameters(v, c);
                    let chol = cov.cholesky().expect("covariances are positive definite");
                    (mean, chol.l())
                })
                .collect()
        })
        .collect();

    let mut views = vec![DMatrix::zeros(n, 2), DMatrix::zeros(n, 2)];
    for (i, &c) in labels.iter().enumerate() {
        for (v, view) in views.iter_mut().enumerate() {
            let z = Vector2::new(rng.sample(StandardNormal), rng.sample(StandardNormal));
            let (mean, l) = &factors[v][c];
            let x = mean + l * z;
            view[(i, 0)] = x[0];
            view[(i, 1)] = x[1];
        }
    }
    MultiViewDataset {
        views: views
            .into_iter()
            .map(|m| ViewMatrix::new(m).expect("finite samples"))
            .collect(),
        labels: Some(labels),
        names: vec!["view1".into(), "view2".into()],
    }
}

/// Mean squared entry of a matrix.
pub fn signal_power(m: &DMatrix<f64>) -> f64 {
    m.norm_squared() / m.len() as f64
}

/// Adds white Gaussian noise to every view with variance
/// `signal_power(view) / snr` (linear power ratio).
pub fn inject_gaussian_noise(ds: &MultiViewDataset, snr: f64, seed: u64) -> Result<MultiViewDataset> {
    if !(snr.is_finite() && snr > 0.0) {
        return Err(Error::Config(format!("snr must be positive, got {snr}")));
    }
    let mut rng = stream_rng(seed, 1);
    let noisy = ds
        .views
        .iter()
        .map(|v| {
            let std = (signal_power(v.data()) / snr).sqrt();
            let normal = Normal::new(0.0, std).expect("finite std");
            v.data().map(|x| x + normal.sample(&mut rng))
        })
        .collect();
    ds.with_views(noisy)
}

/// Number of samples corrupted for a given fraction: `ceil(fraction * n)`,
/// tolerant of representation error such as `0.06 * 50 = 3.0000000000000004`.
pub fn corruption_count(fraction: f64, n: usize) -> usize {
    ((fraction * n as f64 - 1e-9).ceil().max(1.0) as usize).min(n)
}

/// Replaces every feature of a random subset of samples, in every view, with
/// values drawn uniformly from that feature's observed range. Returns the
/// corrupted dataset and the sorted corrupted indices.
pub fn inject_sample_corruption(
    ds: &MultiViewDataset,
    fraction: f64,
    seed: u64,
) -> Result<(MultiViewDataset, Vec<usize>)> {
    if !(fraction > 0.0 && fraction < 1.0) {
        return Err(Error::Config(format!("corruption fraction must be in (0, 1), got {fraction}")));
    }
    let n = ds.n_samples();
    let mut rng = stream_rng(seed, 2);
    let mut picked = index::sample(&mut rng, n, corruption_count(fraction, n)).into_vec();
    picked.sort_unstable();

    let corrupted = ds
        .views
        .iter()
        .map(|v| {
            let mut m = v.data().clone();
            let ranges: Vec<(f64, f64)> =
                v.data().column_iter().map(|c| (c.min(), c.max())).collect();
            for &i in &picked {
                for (j, &(lo, hi)) in ranges.iter().enumerate() {
                    m[(i, j)] = if hi > lo { rng.random_range(lo..=hi) } else { lo };
                }
            }
            m
        })
        .collect();
    Ok((ds.with_views(corrupted)?, picked))
}
