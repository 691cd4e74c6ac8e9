//! Experiment orchestration: build or load data, inject errors, run each
//! method over seeded repetitions and write reports.
//!
//! Reports contain no timestamps or timings, so the same configuration always
//! produces the same bytes.

use std::fmt::{self, Write as _};
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use log::{info, warn};
use serde::{Deserialize, Serialize};

use crate::baselines::{best_single_view, feature_concat, kernel_addition};
use crate::data::{inject_gaussian_noise, inject_sample_corruption, load_views, synthetic_two_view, MultiViewDataset};
use crate::error::{Error, Result};
use crate::graph::{view_transition, SigmaMode, TransitionMatrix};
use crate::kmeans::KMeansConfig;
use crate::markov::SpectralConfig;
use crate::metrics::{evaluate, ClusteringResult, MetricsReport};
use crate::rng::derive_seed;
use crate::solver::{self, EmvcConfig, SolverSummary};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Emvc,
    Bsv,
    FeatConcat,
    KernelAdd,
}

impl Method {
    pub const ALL: [Method; 4] = [Method::Emvc, Method::Bsv, Method::FeatConcat, Method::KernelAdd];

    pub fn name(self) -> &'static str {
        match self {
            Method::Emvc => "emvc",
            Method::Bsv => "bsv",
            Method::FeatConcat => "feat_concat",
            Method::KernelAdd => "kernel_add",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown method {s:?} (expected emvc, bsv, feat_concat or kernel_add)")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum DatasetSpec {
    Synthetic {
        n_per_cluster: usize,
    },
    Files {
        views: Vec<PathBuf>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        labels: Option<PathBuf>,
    },
}

impl Default for DatasetSpec {
    fn default() -> Self {
        DatasetSpec::Synthetic { n_per_cluster: 500 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ErrorSpec {
    #[default]
    #[serde(rename = "none")]
    Clean,
    /// White Gaussian noise at a linear signal-to-noise power ratio.
    GaussianSnr { snr: f64 },
    /// Replace this fraction of samples with random values in every view.
    SampleFraction { fraction: f64 },
}

/// The `seed` fields of `emvc` and `kmeans` are replaced by values derived
/// from the repetition seed `seed + rep`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub methods: Vec<Method>,
    pub clusters: usize,
    pub repetitions: usize,
    pub seed: u64,
    pub sigma_mode: SigmaMode,
    /// Where reports are written. Not echoed into reports, so the same run
    /// gives the same bytes wherever it is written.
    #[serde(skip_serializing)]
    pub out: Option<PathBuf>,
    pub dataset: DatasetSpec,
    pub errors: ErrorSpec,
    pub emvc: EmvcConfig,
    pub kmeans: KMeansConfig,
    pub spectral: SpectralConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            methods: Method::ALL.to_vec(),
            clusters: 2,
            repetitions: 5,
            seed: 0,
            sigma_mode: SigmaMode::default(),
            out: None,
            dataset: DatasetSpec::default(),
            errors: ErrorSpec::default(),
            emvc: EmvcConfig::default(),
            kmeans: KMeansConfig::default(),
            spectral: SpectralConfig::default(),
        }
    }
}

impl ExperimentConfig {
    /// Parses a TOML document; errors carry the line, column and field.
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        toml::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes to TOML")
    }

    pub fn validate(&self) -> Result<()> {
        if self.repetitions == 0 {
            return Err(Error::Config("repetitions must be at least 1".into()));
        }
        if self.clusters < 2 {
            return Err(Error::Config(format!("clusters must be at least 2, got {}", self.clusters)));
        }
        if self.methods.is_empty() {
            return Err(Error::Config("no methods requested".into()));
        }
        if let Some(m) = self.methods.iter().enumerate().find_map(|(i, m)| self.methods[..i].contains(m).then_some(m)) {
            return Err(Error::Config(format!("method {m} is listed twice")));
        }
        match self.errors {
            ErrorSpec::GaussianSnr { snr } if !(snr.is_finite() && snr > 0.0) => {
                return Err(Error::Config(format!("snr must be positive, got {snr}")));
            }
            ErrorSpec::SampleFraction { fraction } if !(fraction > 0.0 && fraction < 1.0) => {
                return Err(Error::Config(format!("corruption fraction must be in (0, 1), got {fraction}")));
            }
            _ => {}
        }
        match &self.dataset {
            DatasetSpec::Synthetic { n_per_cluster: 0 } => {
                return Err(Error::Config("n_per_cluster must be at least 1".into()));
            }
            DatasetSpec::Files { views, .. } if views.is_empty() => {
                return Err(Error::Config("file dataset lists no views".into()));
            }
            _ => {}
        }
        self.emvc.validate()?;
        self.kmeans.validate()
    }
}

/// Outcome of one method on one repetition.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub method: Method,
    pub repetition: usize,
    pub seed: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub metrics: Option<MetricsReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub solver: Option<SolverSummary>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub chosen_view: Option<usize>,
    pub labels: Vec<usize>,
}

impl RunRecord {
    pub fn ok(&self) -> bool {
        self.error.is_none()
    }
}

/// Mean and population standard deviation of each metric over the successful
/// repetitions of one method.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub method: Method,
    pub succeeded: usize,
    pub failed: usize,
    pub mean: Option<MetricsReport>,
    pub std: Option<MetricsReport>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub config: ExperimentConfig,
    pub summary: Vec<SummaryRow>,
    pub records: Vec<RunRecord>,
}

impl ExperimentReport {
    pub fn all_ok(&self) -> bool {
        self.records.iter().all(RunRecord::ok)
    }

    pub fn row(&self, method: Method) -> Option<&SummaryRow> {
        self.summary.iter().find(|r| r.method == method)
    }

    /// Metric values of `method` per repetition (None where it failed or no
    /// labels were available).
    pub fn per_repetition(&self, method: Method) -> Vec<Option<MetricsReport>> {
        self.records
            .iter()
            .filter(|r| r.method == method)
            .map(|r| r.metrics)
            .collect()
    }

    /// `mean(std)` table with one row per method.
    pub fn table(&self) -> String {
        let mut out = format!("{:<12}", "method");
        for name in MetricsReport::NAMES {
            let _ = write!(out, " {name:>15}");
        }
        out.push('\n');
        for row in &self.summary {
            let _ = write!(out, "{:<12}", row.method.name());
            match (&row.mean, &row.std) {
                (Some(m), Some(s)) => {
                    for (mv, sv) in m.values().iter().zip(s.values()) {
                        let _ = write!(out, " {:>15}", format!("{mv:.3}({sv:.3})"));
                    }
                }
                _ => {
                    let _ = write!(out, " {:>15}", "n/a");
                }
            }
            if row.failed > 0 {
                let _ = write!(out, "  [{} failed]", row.failed);
            }
            out.push('\n');
        }
        out
    }

    pub fn summary_csv(&self) -> String {
        let mut out = String::from("method,succeeded,failed");
        for name in MetricsReport::NAMES {
            let _ = write!(out, ",{name}_mean,{name}_std");
        }
        out.push('\n');
        for row in &self.summary {
            let _ = write!(out, "{},{},{}", row.method, row.succeeded, row.failed);
            match (&row.mean, &row.std) {
                (Some(m), Some(s)) => {
                    for (mv, sv) in m.values().iter().zip(s.values()) {
                        let _ = write!(out, ",{mv},{sv}");
                    }
                }
                _ => out.push_str(&",".repeat(2 * MetricsReport::NAMES.len())),
            }
            out.push('\n');
        }
        out
    }

    pub fn records_csv(&self) -> String {
        let mut out = String::from("method,repetition,seed,status");
        for name in MetricsReport::NAMES {
            let _ = write!(out, ",{name}");
        }
        out.push_str(",solver_iterations,solver_status,solver_residual,solver_objective,error\n");
        for r in &self.records {
            let status = if r.ok() { "ok" } else { "error" };
            let _ = write!(out, "{},{},{},{status}", r.method, r.repetition, r.seed);
            match &r.metrics {
                Some(m) => {
                    for v in m.values() {
                        let _ = write!(out, ",{v}");
                    }
                }
                None => out.push_str(&",".repeat(MetricsReport::NAMES.len())),
            }
            match &r.solver {
                Some(s) => {
                    let _ = write!(out, ",{},{:?},{},{}", s.iterations, s.status, s.residual, s.objective);
                }
                None => out.push_str(",,,,"),
            }
            let msg = r.error.as_deref().unwrap_or("").replace(['"', '\n'], "'");
            let _ = writeln!(out, ",\"{msg}\"");
        }
        out
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes to JSON")
    }

    /// Writes `summary.csv`, `records.csv`, `report.json` and `config.toml`
    /// into `dir`.
    pub fn write(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let files = [
            ("summary.csv", self.summary_csv()),
            ("records.csv", self.records_csv()),
            ("report.json", self.to_json()),
            ("config.toml", self.config.to_toml()),
        ];
        for (name, text) in files {
            let path = dir.join(name);
            fs::write(&path, text).map_err(|e| Error::io(&path, e))?;
        }
        Ok(())
    }
}

fn population_stats(values: &[MetricsReport]) -> Option<(MetricsReport, MetricsReport)> {
    if values.is_empty() {
        return None;
    }
    let n = values.len() as f64;
    let mut mean = [0.0; 7];
    for v in values {
        for (m, x) in mean.iter_mut().zip(v.values()) {
            *m += x;
        }
    }
    mean.iter_mut().for_each(|m| *m /= n);
    let mut var = [0.0; 7];
    for v in values {
        for ((s, x), m) in var.iter_mut().zip(v.values()).zip(mean) {
            *s += (x - m) * (x - m);
        }
    }
    let std = var.map(|s| (s / n).sqrt());
    Some((MetricsReport::from_values(mean), MetricsReport::from_values(std)))
}

fn summarize(methods: &[Method], records: &[RunRecord]) -> Vec<SummaryRow> {
    methods
        .iter()
        .map(|&method| {
            let runs: Vec<&RunRecord> = records.iter().filter(|r| r.method == method).collect();
            let metrics: Vec<MetricsReport> = runs.iter().filter_map(|r| r.metrics).collect();
            let stats = population_stats(&metrics);
            SummaryRow {
                method,
                succeeded: runs.iter().filter(|r| r.ok()).count(),
                failed: runs.iter().filter(|r| !r.ok()).count(),
                mean: stats.map(|s| s.0),
                std: stats.map(|s| s.1),
            }
        })
        .collect()
}

fn prepare_dataset(cfg: &ExperimentConfig, base: Option<&MultiViewDataset>, seed: u64) -> Result<MultiViewDataset> {
    let clean = match (&cfg.dataset, base) {
        (_, Some(ds)) => ds.clone(),
        (DatasetSpec::Synthetic { n_per_cluster }, None) => synthetic_two_view(*n_per_cluster, seed),
        (DatasetSpec::Files { views, labels }, None) => load_views(views, labels.as_deref())?,
    };
    match cfg.errors {
        ErrorSpec::Clean => Ok(clean),
        ErrorSpec::GaussianSnr { snr } => inject_gaussian_noise(&clean, snr, seed),
        ErrorSpec::SampleFraction { fraction } => Ok(inject_sample_corruption(&clean, fraction, seed)?.0),
    }
}

struct Repetition<'a> {
    cfg: &'a ExperimentConfig,
    ds: MultiViewDataset,
    transitions: Option<Result<Vec<TransitionMatrix>>>,
    kmeans: KMeansConfig,
    emvc: EmvcConfig,
}

impl Repetition<'_> {
    fn run(&mut self, method: Method) -> Result<(ClusteringResult, Option<usize>)> {
        let k = self.cfg.clusters;
        match method {
            Method::Emvc => {
                let mode = self.cfg.sigma_mode;
                let ds = &self.ds;
                let views = self
                    .transitions
                    .get_or_insert_with(|| ds.views.iter().map(|v| view_transition(v, mode)).collect());
                let views = views.as_ref().map_err(|e| Error::Numerical(e.to_string()))?;
                Ok((solver::cluster(views, &self.emvc, &self.kmeans, k, &self.cfg.spectral)?, None))
            }
            Method::Bsv => {
                let (r, view) = best_single_view(&self.ds, k, &self.kmeans)?;
                Ok((r, Some(view)))
            }
            Method::FeatConcat => Ok((feature_concat(&self.ds, k, &self.kmeans)?, None)),
            Method::KernelAdd => Ok((kernel_addition(&self.ds, k, &self.kmeans, self.cfg.sigma_mode)?, None)),
        }
    }
}

/// Runs every method on every repetition. Repetition `r` uses seed
/// `cfg.seed + r` for data generation and error injection, and seeds derived
/// from it for k-means and the solver. A failing method is recorded and the
/// remaining methods still run; only an invalid configuration or unreadable
/// input aborts.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    cfg.validate()?;
    let base = match &cfg.dataset {
        DatasetSpec::Files { views, labels } => Some(load_views(views, labels.as_deref())?),
        DatasetSpec::Synthetic { .. } => None,
    };
    let mut records = Vec::new();
    for rep in 0..cfg.repetitions {
        let seed = cfg.seed.wrapping_add(rep as u64);
        let ds = prepare_dataset(cfg, base.as_ref(), seed)?;
        let truth = ds.labels.clone();
        let mut run = Repetition {
            cfg,
            ds,
            transitions: None,
            kmeans: KMeansConfig {
                seed: derive_seed(seed, 1),
                ..cfg.kmeans.clone()
            },
            emvc: EmvcConfig {
                seed: derive_seed(seed, 2),
                ..cfg.emvc.clone()
            },
        };
        for &method in &cfg.methods {
            info!("repetition {rep}: running {method}");
            let outcome = run.run(method).and_then(|(result, view)| {
                let metrics = truth.as_ref().map(|t| evaluate(&result.labels, t)).transpose()?;
                Ok((result, view, metrics))
            });
            records.push(match outcome {
                Ok((result, chosen_view, metrics)) => RunRecord {
                    method,
                    repetition: rep,
                    seed,
                    error: None,
                    metrics,
                    solver: result.solver,
                    chosen_view,
                    labels: result.labels,
                },
                Err(e) => {
                    warn!("repetition {rep}: {method} failed: {e}");
                    RunRecord {
                        method,
                        repetition: rep,
                        seed,
                        error: Some(e.to_string()),
                        metrics: None,
                        solver: None,
                        chosen_view: None,
                        labels: Vec::new(),
                    }
                }
            });
        }
    }
    // Report order is method order, then repetition; the sort is stable.
    records.sort_by_key(|r| cfg.methods.iter().position(|&m| m == r.method));
    Ok(ExperimentReport {
        summary: summarize(&cfg.methods, &records),
        config: cfg.clone(),
        records,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub lambda: f64,
    pub beta: f64,
    pub succeeded: usize,
    pub failed: usize,
    pub accuracy_mean: Option<f64>,
    pub accuracy_std: Option<f64>,
    pub nmi_mean: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepReport {
    pub config: ExperimentConfig,
    pub rows: Vec<SweepRow>,
}

impl SweepReport {
    pub fn all_ok(&self) -> bool {
        self.rows.iter().all(|r| r.failed == 0)
    }

    /// Row with the highest mean accuracy; the first such row on ties.
    pub fn best(&self) -> Option<&SweepRow> {
        self.rows.iter().fold(None, |best: Option<&SweepRow>, row| match (best, row.accuracy_mean) {
            (Some(b), Some(a)) if a <= b.accuracy_mean.unwrap_or(f64::NEG_INFINITY) => Some(b),
            (_, Some(_)) => Some(row),
            (b, None) => b,
        })
    }

    pub fn to_csv(&self) -> String {
        let opt = |v: Option<f64>| v.map_or_else(String::new, |x| x.to_string());
        let mut out = String::from("lambda,beta,succeeded,failed,accuracy_mean,accuracy_std,nmi_mean\n");
        for r in &self.rows {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{}",
                r.lambda,
                r.beta,
                r.succeeded,
                r.failed,
                opt(r.accuracy_mean),
                opt(r.accuracy_std),
                opt(r.nmi_mean)
            );
        }
        out
    }

    pub fn write(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let files = [
            ("sweep.csv", self.to_csv()),
            ("sweep.json", serde_json::to_string_pretty(self).expect("sweep serializes to JSON")),
        ];
        for (name, text) in files {
            let path = dir.join(name);
            fs::write(&path, text).map_err(|e| Error::io(&path, e))?;
        }
        Ok(())
    }
}

/// Runs the EMVC method for every `(lambda, beta)` pair, `lambda` varying
/// slowest. Other configured methods are ignored since they do not depend on
/// either parameter.
pub fn sweep(cfg: &ExperimentConfig, lambdas: &[f64], betas: &[f64]) -> Result<SweepReport> {
    if lambdas.is_empty() || betas.is_empty() {
        return Err(Error::Config("sweep grids must be non-empty".into()));
    }
    let mut rows = Vec::with_capacity(lambdas.len() * betas.len());
    for &lambda in lambdas {
        for &beta in betas {
            let point = ExperimentConfig {
                methods: vec![Method::Emvc],
                emvc: EmvcConfig {
                    lambda,
                    beta,
                    ..cfg.emvc.clone()
                },
                ..cfg.clone()
            };
            info!("sweep point lambda={lambda:e} beta={beta:e}");
            let report = run_experiment(&point)?;
            let row = &report.summary[0];
            rows.push(SweepRow {
                lambda,
                beta,
                succeeded: row.succeeded,
                failed: row.failed,
                accuracy_mean: row.mean.map(|m| m.accuracy),
                accuracy_std: row.std.map(|m| m.accuracy),
                nmi_mean: row.mean.map(|m| m.nmi),
            });
        }
    }
    Ok(SweepReport {
        config: ExperimentConfig {
            methods: vec![Method::Emvc],
            ..cfg.clone()
        },
        rows,
    })
}
