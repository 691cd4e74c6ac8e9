use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use emvc::data::{inject_gaussian_noise, inject_sample_corruption, save_views, synthetic_two_view};
use emvc::experiment::{run_experiment, sweep, DatasetSpec, ErrorSpec, ExperimentConfig, Method};
use emvc::{Error, SigmaMode};

/// Robust multi-view spectral clustering experiments.
#[derive(Parser)]
#[command(name = "emvc", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the configured methods and write summary/records reports.
    Run(ExperimentArgs),
    /// Grid search over lambda and beta for the EMVC method.
    Sweep {
        #[command(flatten)]
        args: ExperimentArgs,
        #[arg(long, value_delimiter = ',', required = true)]
        lambda_grid: Vec<f64>,
        #[arg(long, value_delimiter = ',', required = true)]
        beta_grid: Vec<f64>,
    },
    /// Write the synthetic two-view dataset (optionally with injected errors) as CSV.
    Generate {
        /// Samples per cluster.
        #[arg(long, default_value_t = 500)]
        synthetic: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        snr: Option<f64>,
        #[arg(long)]
        corrupt_fraction: Option<f64>,
        #[arg(long)]
        out: PathBuf,
    },
}

/// Every flag overrides the matching config-file field.
#[derive(Args)]
struct ExperimentArgs {
    /// TOML experiment configuration.
    #[arg(long)]
    config: Option<PathBuf>,
    /// View CSV files, one per view (comma-separated or repeated).
    #[arg(long, value_delimiter = ',', conflicts_with = "synthetic")]
    dataset: Vec<PathBuf>,
    /// Single-column ground-truth label file for --dataset.
    #[arg(long, requires = "dataset")]
    labels: Option<PathBuf>,
    /// Use the synthetic two-view dataset with this many samples per cluster.
    #[arg(long)]
    synthetic: Option<usize>,
    /// Comma-separated subset of emvc, bsv, feat_concat, kernel_add.
    #[arg(long, value_delimiter = ',')]
    methods: Vec<String>,
    #[arg(long)]
    clusters: Option<usize>,
    #[arg(long)]
    lambda: Option<f64>,
    #[arg(long)]
    beta: Option<f64>,
    /// Add white Gaussian noise at this linear signal-to-noise ratio.
    #[arg(long, conflicts_with = "corrupt_fraction")]
    snr: Option<f64>,
    /// Corrupt this fraction of samples in every view.
    #[arg(long)]
    corrupt_fraction: Option<f64>,
    #[arg(long)]
    reps: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Kernel width rule: median_squared or median_raw.
    #[arg(long)]
    sigma_mode: Option<String>,
    /// Output directory for report files.
    #[arg(long)]
    out: Option<PathBuf>,
}

impl ExperimentArgs {
    fn resolve(&self) -> Result<ExperimentConfig, Error> {
        let mut cfg = match &self.config {
            Some(path) => ExperimentConfig::load(path)?,
            None => ExperimentConfig::default(),
        };
        if !self.dataset.is_empty() {
            cfg.dataset = DatasetSpec::Files {
                views: self.dataset.clone(),
                labels: self.labels.clone(),
            };
        }
        if let Some(n) = self.synthetic {
            cfg.dataset = DatasetSpec::Synthetic { n_per_cluster: n };
        }
        if !self.methods.is_empty() {
            cfg.methods = self.methods.iter().map(|m| m.parse()).collect::<Result<Vec<Method>, _>>()?;
        }
        if let Some(snr) = self.snr {
            cfg.errors = ErrorSpec::GaussianSnr { snr };
        }
        if let Some(fraction) = self.corrupt_fraction {
            cfg.errors = ErrorSpec::SampleFraction { fraction };
        }
        if let Some(mode) = &self.sigma_mode {
            cfg.sigma_mode = match mode.as_str() {
                "median_squared" => SigmaMode::MedianSquared,
                "median_raw" => SigmaMode::MedianRaw,
                other => return Err(Error::Config(format!("unknown sigma mode {other:?}"))),
            };
        }
        cfg.clusters = self.clusters.unwrap_or(cfg.clusters);
        cfg.emvc.lambda = self.lambda.unwrap_or(cfg.emvc.lambda);
        cfg.emvc.beta = self.beta.unwrap_or(cfg.emvc.beta);
        cfg.repetitions = self.reps.unwrap_or(cfg.repetitions);
        cfg.seed = self.seed.unwrap_or(cfg.seed);
        if self.out.is_some() {
            cfg.out = self.out.clone();
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

fn run(cli: Cli) -> Result<bool, Error> {
    match cli.command {
        Command::Run(args) => {
            let cfg = args.resolve()?;
            let report = run_experiment(&cfg)?;
            print!("{}", report.table());
            if let Some(dir) = &cfg.out {
                report.write(dir)?;
            }
            for r in report.records.iter().filter(|r| !r.ok()) {
                eprintln!(
                    "{} failed on repetition {}: {}",
                    r.method,
                    r.repetition,
                    r.error.as_deref().unwrap_or_default()
                );
            }
            Ok(report.all_ok())
        }
        Command::Sweep {
            args,
            lambda_grid,
            beta_grid,
        } => {
            let cfg = args.resolve()?;
            let report = sweep(&cfg, &lambda_grid, &beta_grid)?;
            print!("{}", report.to_csv());
            if let Some(dir) = &cfg.out {
                report.write(dir)?;
            }
            Ok(report.all_ok())
        }
        Command::Generate {
            synthetic,
            seed,
            snr,
            corrupt_fraction,
            out,
        } => {
            if synthetic == 0 {
                return Err(Error::Config("--synthetic must be at least 1".into()));
            }
            let mut ds = synthetic_two_view(synthetic, seed);
            if let Some(snr) = snr {
                ds = inject_gaussian_noise(&ds, snr, seed)?;
            }
            if let Some(fraction) = corrupt_fraction {
                let (corrupted, idx) = inject_sample_corruption(&ds, fraction, seed)?;
                ds = corrupted;
                let list: Vec<String> = idx.iter().map(|i| i.to_string()).collect();
                let path = out.join("corrupted.csv");
                std::fs::create_dir_all(&out).map_err(|e| Error::Io { path: out.clone(), source: e })?;
                std::fs::write(&path, list.join("\n") + "\n").map_err(|e| Error::Io { path, source: e })?;
            }
            for p in save_views(&ds, &out)? {
                println!("{}", p.display());
            }
            Ok(true)
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
