//! Robust multi-view spectral clustering.
//!
//! Each view of a dataset becomes a random-walk transition matrix over the
//! samples. The views are decomposed into one shared low-rank transition
//! matrix plus per-view sparse error, and the shared matrix is clustered with
//! a Markov-chain spectral method.
//!
//! ```
//! use emvc::{data, graph, kmeans::KMeansConfig, markov::SpectralConfig, metrics, solver};
//!
//! let ds = data::synthetic_two_view(20, 7);
//! let views: Vec<_> = ds
//!     .views
//!     .iter()
//!     .map(|v| graph::view_transition(v, graph::SigmaMode::default()))
//!     .collect::<Result<_, _>>()?;
//! let cfg = solver::EmvcConfig { lambda: 0.01, beta: 0.01, ..Default::default() };
//! let result = solver::cluster(&views, &cfg, &KMeansConfig::with_k(2), 2, &SpectralConfig::default())?;
//! let report = metrics::evaluate(&result.labels, ds.labels.as_ref().unwrap())?;
//! assert!(report.accuracy >= 0.5);
//! # Ok::<(), emvc::Error>(())
//! ```

pub mod baselines;
pub mod data;
pub mod error;
pub mod experiment;
pub mod graph;
pub mod kmeans;
mod linalg;
pub mod markov;
pub mod metrics;
pub mod prox;
pub mod rng;
pub mod solver;

pub use error::{Error, Result};
pub use graph::{SigmaMode, TransitionMatrix, ViewMatrix};
pub use metrics::{ClusteringResult, MetricsReport};
pub use solver::{EmvcConfig, SolverState, SolverStatus};
