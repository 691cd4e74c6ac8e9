//! Augmented Lagrangian solver for the shared-transition decomposition
//!
//! ```text
//! min  ||P||_* + beta ||E||_{2,1} + lambda ||E||_{G1}
//! s.t. P_k = P + E_k  (k = 1..K),  P >= 0,  P 1 = 1
//! ```
//!
//! where `E = [E_1; ...; E_K]` stacks the per-view error matrices. An
//! auxiliary `Q = P` carries the nuclear norm. Each iteration updates, in
//! order: the shared matrix `P` (row-wise simplex projection), the error stack
//! `E` (one reweighted least-squares step), `Q` (singular value thresholding),
//! then the multipliers `Z`, `Y_k` and the penalty `mu`.

use log::debug;
use nalgebra::{DMatrix, DMatrixView};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::TransitionMatrix;
use crate::kmeans::KMeansConfig;
use crate::linalg;
use crate::markov::{cluster_markov, SpectralConfig};
use crate::metrics::ClusteringResult;
use crate::prox::{group_l1_norm, l21_norm, nuclear_norm, project_simplex_in_place, svt};
use crate::rng::stream_rng;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EmvcConfig {
    /// Weight of the group-l1 term.
    pub lambda: f64,
    /// Weight of the l2,1 term.
    pub beta: f64,
    pub mu0: f64,
    pub rho: f64,
    pub mu_max: f64,
    /// Feasibility tolerance (max-entry norm) for declaring convergence.
    pub eps: f64,
    pub max_iters: usize,
    /// Floor on row and segment norms in the reweighting denominators.
    pub reweight_eps: f64,
    /// Seed for the random initial error stack.
    pub seed: u64,
}

impl Default for EmvcConfig {
    fn default() -> Self {
        EmvcConfig {
            lambda: 1.0,
            beta: 1.0,
            mu0: 1e-6,
            rho: 1.9,
            mu_max: 1e10,
            eps: 1e-8,
            max_iters: 500,
            reweight_eps: 1e-10,
            seed: 0,
        }
    }
}

impl EmvcConfig {
    pub fn validate(&self) -> Result<()> {
        let checks = [
            (self.lambda >= 0.0 && self.lambda.is_finite(), "lambda must be finite and >= 0"),
            (self.beta >= 0.0 && self.beta.is_finite(), "beta must be finite and >= 0"),
            (self.mu0 > 0.0 && self.mu0.is_finite(), "mu0 must be positive"),
            (self.rho > 1.0 && self.rho.is_finite(), "rho must exceed 1"),
            (self.mu_max >= self.mu0 && self.mu_max.is_finite(), "mu_max must be >= mu0"),
            (self.eps > 0.0, "eps must be positive"),
            (self.max_iters >= 1, "max_iters must be at least 1"),
            (self.reweight_eps > 0.0, "reweight_eps must be positive"),
        ];
        match checks.iter().find(|(ok, _)| !ok) {
            Some((_, msg)) => Err(Error::Config((*msg).into())),
            None => Ok(()),
        }
    }
}

/// Vertically stacked per-view error matrices, `(K N) x N`.
#[derive(Debug, Clone, PartialEq)]
pub struct ErrorStack {
    data: DMatrix<f64>,
    k: usize,
}

impl ErrorStack {
    pub fn new(data: DMatrix<f64>, k: usize) -> Result<Self> {
        let n = data.ncols();
        if k == 0 || data.nrows() != k * n {
            return Err(Error::Shape(format!(
                "error stack of {}x{} is not K*N x N for K={k}",
                data.nrows(),
                n
            )));
        }
        linalg::ensure_finite(&data, "error stack")?;
        Ok(ErrorStack { data, k })
    }

    pub fn zeros(k: usize, n: usize) -> Self {
        ErrorStack {
            data: DMatrix::zeros(k * n, n),
            k,
        }
    }

    pub fn from_views(views: &[DMatrix<f64>]) -> Result<Self> {
        let n = views.first().map_or(0, |v| v.ncols());
        let mut data = DMatrix::zeros(views.len() * n, n);
        for (j, v) in views.iter().enumerate() {
            if v.shape() != (n, n) {
                return Err(Error::Shape("view error blocks must all be N x N".into()));
            }
            data.rows_mut(j * n, n).copy_from(v);
        }
        ErrorStack::new(data, views.len())
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn n(&self) -> usize {
        self.data.ncols()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.data
    }

    /// The error block of view `j`.
    pub fn view(&self, j: usize) -> DMatrixView<'_, f64> {
        let n = self.n();
        self.data.rows(j * n, n)
    }

    pub fn group_l1(&self) -> f64 {
        group_l1_norm(&self.data, self.k, self.n()).expect("stack shape is an invariant")
    }

    pub fn l21(&self) -> f64 {
        l21_norm(&self.data).expect("stack entries are finite")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolverStatus {
    Running,
    Converged,
    NotConverged,
}

#[derive(Debug, Clone)]
pub struct SolverState {
    /// Shared transition matrix; all zeros before the first iteration.
    pub p_hat: DMatrix<f64>,
    pub e: ErrorStack,
    pub q: DMatrix<f64>,
    /// Multiplier for `P = Q`.
    pub z: DMatrix<f64>,
    /// Multipliers for `P + E_k = P_k`.
    pub y: Vec<DMatrix<f64>>,
    pub mu: f64,
    pub iter: usize,
    pub objective_history: Vec<f64>,
    pub residual_history: Vec<f64>,
    pub status: SolverStatus,
}

impl SolverState {
    /// Starting point: zero `P`, `Q`, `Z`, `Y_k`, uniform random `E` in `[0, 1)`.
    pub fn initial(k: usize, n: usize, cfg: &EmvcConfig) -> Self {
        let mut rng = stream_rng(cfg.seed, 0);
        let e = DMatrix::from_fn(k * n, n, |_, _| rng.random::<f64>());
        SolverState {
            p_hat: DMatrix::zeros(n, n),
            e: ErrorStack { data: e, k },
            q: DMatrix::zeros(n, n),
            z: DMatrix::zeros(n, n),
            y: vec![DMatrix::zeros(n, n); k],
            mu: cfg.mu0,
            iter: 0,
            objective_history: Vec::new(),
            residual_history: Vec::new(),
            status: SolverStatus::Running,
        }
    }

    pub fn n(&self) -> usize {
        self.p_hat.nrows()
    }

    pub fn k(&self) -> usize {
        self.y.len()
    }

    /// The shared matrix as a validated [`TransitionMatrix`]; fails before the
    /// first iteration.
    pub fn shared_transition(&self) -> Result<TransitionMatrix> {
        TransitionMatrix::new(self.p_hat.clone())
    }

    /// `(max_k ||P + E_k - P_k||_max, ||P - Q||_max)`.
    pub fn feasibility(&self, views: &[TransitionMatrix]) -> (f64, f64) {
        let coupling = views
            .iter()
            .enumerate()
            .map(|(j, v)| (&self.p_hat + self.e.view(j) - v.matrix()).amax())
            .fold(0.0, f64::max);
        (coupling, (&self.p_hat - &self.q).amax())
    }

    pub fn summary(&self) -> SolverSummary {
        SolverSummary {
            iterations: self.iter,
            status: self.status,
            residual: self.residual_history.last().copied().unwrap_or(f64::INFINITY),
            objective: self.objective_history.last().copied().unwrap_or(f64::NAN),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverSummary {
    pub iterations: usize,
    pub status: SolverStatus,
    pub residual: f64,
    pub objective: f64,
}

/// `||P||_* + beta ||E||_{2,1} + lambda ||E||_{G1}`.
pub fn objective(p_hat: &DMatrix<f64>, e: &ErrorStack, lambda: f64, beta: f64) -> Result<f64> {
    if p_hat.shape() != (e.n(), e.n()) {
        return Err(Error::Shape("shared matrix and error stack disagree on N".into()));
    }
    Ok(nuclear_norm(p_hat)? + beta * e.l21() + lambda * e.group_l1())
}

/// `svt(P + Z / mu, 1 / mu)`.
pub fn update_q(p_hat: &DMatrix<f64>, z: &DMatrix<f64>, mu: f64) -> Result<DMatrix<f64>> {
    svt(&(p_hat + z / mu), 1.0 / mu)
}

/// Right-hand side of the error update: `vstack_k(P_k - P - Y_k / mu)`.
pub fn error_target(state: &SolverState, views: &[TransitionMatrix]) -> DMatrix<f64> {
    let n = state.n();
    let mut b = DMatrix::zeros(state.k() * n, n);
    for (j, (v, y)) in views.iter().zip(&state.y).enumerate() {
        let block = v.matrix() - &state.p_hat - y / state.mu;
        b.rows_mut(j * n, n).copy_from(&block);
    }
    b
}

/// Reweighting factors built from the current error stack: per row
/// `1 / (2 ||e^r||)` and per (column, view) segment `1 / (2 ||e_l^j||)`,
/// with norms floored at `floor`.
pub struct Reweighting {
    pub rows: Vec<f64>,
    /// Indexed `[column * K + view]`.
    pub segments: Vec<f64>,
}

impl Reweighting {
    pub fn from_stack(e: &ErrorStack, floor: f64) -> Self {
        let (k, n) = (e.k(), e.n());
        let m = e.matrix();
        let mut row_sq = vec![0.0; k * n];
        let mut segments = Vec::with_capacity(k * n);
        for col in m.column_iter() {
            for j in 0..k {
                let seg = col.rows(j * n, n);
                let mut seg_sq = 0.0;
                for (r, &x) in seg.iter().enumerate() {
                    seg_sq += x * x;
                    row_sq[j * n + r] += x * x;
                }
                segments.push(0.5 / seg_sq.sqrt().max(floor));
            }
        }
        let rows = row_sq.iter().map(|s| 0.5 / s.sqrt().max(floor)).collect();
        Reweighting { rows, segments }
    }

    /// Diagonal of `(beta/mu) D_rows + (lambda/mu) D_l + I` for column `l`.
    pub fn system_diagonal(&self, l: usize, k: usize, lambda: f64, beta: f64, mu: f64) -> Vec<f64> {
        let n = self.rows.len() / k;
        (0..k * n)
            .map(|r| 1.0 + beta / mu * self.rows[r] + lambda / mu * self.segments[l * k + r / n])
            .collect()
    }
}

/// One reweighted least-squares step for the error stack. Column `l` solves
/// `((beta/mu) D + (lambda/mu) D_l + I) e_l = b_l` with the weights taken from
/// the previous stack; the system is diagonal, so each entry is a division.
pub fn update_e(state: &SolverState, views: &[TransitionMatrix], cfg: &EmvcConfig) -> ErrorStack {
    let k = state.k();
    let n = state.n();
    let weights = Reweighting::from_stack(&state.e, cfg.reweight_eps);
    let mut b = error_target(state, views);
    let (row_scale, seg_scale) = (cfg.beta / state.mu, cfg.lambda / state.mu);
    for (l, mut col) in b.column_iter_mut().enumerate() {
        for (r, x) in col.iter_mut().enumerate() {
            *x /= 1.0 + row_scale * weights.rows[r] + seg_scale * weights.segments[l * k + r / n];
        }
    }
    ErrorStack { data: b, k }
}

/// `C = (Q - Z/mu + sum_k (P_k - E_k - Y_k/mu)) / (K + 1)`.
pub fn consensus_target(state: &SolverState, views: &[TransitionMatrix]) -> DMatrix<f64> {
    let inv_mu = 1.0 / state.mu;
    let mut c = &state.q - &state.z * inv_mu;
    for (j, (v, y)) in views.iter().zip(&state.y).enumerate() {
        c += v.matrix();
        c -= state.e.view(j);
        c -= y * inv_mu;
    }
    c / (state.k() as f64 + 1.0)
}

/// Projects every row of the consensus target onto the probability simplex.
pub fn update_p_hat(state: &SolverState, views: &[TransitionMatrix]) -> Result<TransitionMatrix> {
    let c = consensus_target(state, views);
    linalg::ensure_finite(&c, "consensus target")?;
    // Rows of C are the columns of Cᵀ, which are contiguous.
    let mut ct = c.transpose();
    let n = ct.nrows();
    for col in ct.as_mut_slice().chunks_exact_mut(n) {
        project_simplex_in_place(col);
    }
    Ok(TransitionMatrix::from_stochastic(ct.transpose()))
}

pub struct Multipliers {
    pub z: DMatrix<f64>,
    pub y: Vec<DMatrix<f64>>,
    pub mu: f64,
}

/// `Z += mu (P - Q)`, `Y_k += mu (P + E_k - P_k)`, `mu <- min(rho mu, mu_max)`.
pub fn update_multipliers(
    state: &SolverState,
    views: &[TransitionMatrix],
    cfg: &EmvcConfig,
) -> Multipliers {
    let mu = state.mu;
    let z = &state.z + (&state.p_hat - &state.q) * mu;
    let y = views
        .iter()
        .zip(&state.y)
        .enumerate()
        .map(|(j, (v, y))| y + (&state.p_hat + state.e.view(j) - v.matrix()) * mu)
        .collect();
    Multipliers {
        z,
        y,
        mu: (cfg.rho * mu).min(cfg.mu_max),
    }
}

fn check_views(views: &[TransitionMatrix]) -> Result<usize> {
    let first = views
        .first()
        .ok_or_else(|| Error::Config("at least one view is required".into()))?;
    let n = first.n();
    if views.iter().any(|v| v.n() != n) {
        return Err(Error::Shape("all views must have the same number of samples".into()));
    }
    Ok(n)
}

/// Runs one full iteration in place and returns the feasibility residual.
pub fn step(state: &mut SolverState, views: &[TransitionMatrix], cfg: &EmvcConfig) -> Result<f64> {
    state.p_hat = update_p_hat(state, views)?.into_inner();
    state.e = update_e(state, views, cfg);
    state.q = update_q(&state.p_hat, &state.z, state.mu)?;
    let (coupling, split) = state.feasibility(views);
    let residual = coupling.max(split);
    let m = update_multipliers(state, views, cfg);
    state.z = m.z;
    state.y = m.y;
    state.mu = m.mu;
    state.iter += 1;
    state
        .objective_history
        .push(objective(&state.p_hat, &state.e, cfg.lambda, cfg.beta)?);
    state.residual_history.push(residual);
    Ok(residual)
}

/// Iterates until both feasibility residuals are at most `cfg.eps` or
/// `cfg.max_iters` is reached. Hitting the limit is not an error: the state is
/// returned with [`SolverStatus::NotConverged`].
pub fn solve(views: &[TransitionMatrix], cfg: &EmvcConfig) -> Result<SolverState> {
    cfg.validate()?;
    let n = check_views(views)?;
    let mut state = SolverState::initial(views.len(), n, cfg);
    while state.iter < cfg.max_iters {
        let residual = step(&mut state, views, cfg)?;
        if let [.., prev, last] = state.objective_history[..] {
            if (prev - last).abs() <= 1e-12 * prev.abs().max(1.0) {
                debug!("iteration {}: objective stagnant at {last:.6e}", state.iter);
            }
        }
        if residual <= cfg.eps {
            state.status = SolverStatus::Converged;
            return Ok(state);
        }
    }
    state.status = SolverStatus::NotConverged;
    Ok(state)
}

/// Solves for the shared transition matrix and clusters it into `r` groups.
pub fn cluster(
    views: &[TransitionMatrix],
    cfg: &EmvcConfig,
    kmeans_cfg: &KMeansConfig,
    r: usize,
    spectral: &SpectralConfig,
) -> Result<ClusteringResult> {
    let state = solve(views, cfg)?;
    let p_hat = state.shared_transition()?;
    let labels = cluster_markov(&p_hat, r, kmeans_cfg, spectral)?;
    Ok(ClusteringResult {
        labels,
        metrics: None,
        solver: Some(state.summary()),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use nalgebra::dmatrix;

    fn tm(m: DMatrix<f64>) -> TransitionMatrix {
        TransitionMatrix::new(m).unwrap()
    }

    fn sample_views() -> Vec<TransitionMatrix> {
        vec![
            tm(dmatrix![0.5, 0.3, 0.2; 0.2, 0.6, 0.2; 0.1, 0.1, 0.8]),
            tm(dmatrix![0.4, 0.4, 0.2; 0.3, 0.5, 0.2; 0.2, 0.2, 0.6]),
        ]
    }

    #[test]
    fn config_defaults_and_validation() {
        let cfg = EmvcConfig::default();
        assert_eq!((cfg.mu0, cfg.rho, cfg.mu_max, cfg.eps), (1e-6, 1.9, 1e10, 1e-8));
        assert!(cfg.validate().is_ok());
        assert!(EmvcConfig { rho: 1.0, ..cfg.clone() }.validate().is_err());
        assert!(EmvcConfig { lambda: -1.0, ..cfg }.validate().is_err());
    }

    #[test]
    fn objective_trivial_values() {
        let zero = ErrorStack::zeros(2, 3);
        assert_eq!(objective(&DMatrix::zeros(3, 3), &zero, 1.0, 1.0).unwrap(), 0.0);
        let v = objective(&DMatrix::identity(3, 3), &zero, 5.0, 7.0).unwrap();
        assert_relative_eq!(v, 3.0, epsilon = 1e-12);
        assert!(matches!(
            objective(&DMatrix::identity(2, 2), &zero, 1.0, 1.0),
            Err(Error::Shape(_))
        ));
    }

    #[test]
    fn error_stack_shape_checked() {
        assert!(ErrorStack::new(DMatrix::zeros(5, 2), 2).is_err());
        let s = ErrorStack::new(DMatrix::from_fn(4, 2, |i, j| (i * 2 + j) as f64), 2).unwrap();
        assert_eq!(s.view(1), dmatrix![4.0, 5.0; 6.0, 7.0]);
    }

    #[test]
    fn q_update_of_zero_is_zero() {
        let q = update_q(&DMatrix::zeros(3, 3), &DMatrix::zeros(3, 3), 2.0).unwrap();
        assert_eq!(q, DMatrix::zeros(3, 3));
    }

    #[test]
    fn q_update_large_mu_is_near_identity_map() {
        let p = dmatrix![0.5, 0.5; 0.1, 0.9];
        let z = dmatrix![0.3, -0.2; 0.7, 0.1];
        let mu = 1e6;
        let q = update_q(&p, &z, mu).unwrap();
        assert!((q - (&p + &z / mu)).norm() <= 2.0 / mu);
    }

    #[test]
    fn e_update_without_regularization_is_target() {
        let views = sample_views();
        let cfg = EmvcConfig {
            lambda: 0.0,
            beta: 0.0,
            ..Default::default()
        };
        let mut state = SolverState::initial(2, 3, &cfg);
        state.p_hat = views[0].matrix().clone();
        state.y[1] = DMatrix::from_element(3, 3, 0.25);
        state.mu = 0.5;
        let e = update_e(&state, &views, &cfg);
        assert_eq!(e.matrix(), &error_target(&state, &views));
    }

    #[test]
    fn e_update_with_huge_previous_norms_approaches_target() {
        let views = sample_views();
        let cfg = EmvcConfig::default();
        let mut state = SolverState::initial(2, 3, &cfg);
        state.p_hat = views[1].matrix().clone();
        state.mu = 1.0;
        state.e = ErrorStack::new(DMatrix::from_element(6, 3, 1e6), 2).unwrap();
        let e = update_e(&state, &views, &cfg);
        let b = error_target(&state, &views);
        let min_norm = 1e6 * 3f64.sqrt();
        let bound = (cfg.beta + cfg.lambda) / (2.0 * state.mu * min_norm);
        for (x, t) in e.matrix().iter().zip(b.iter()) {
            assert!((x - t).abs() <= bound * t.abs() + 1e-15);
        }
    }

    #[test]
    fn p_update_fixed_point_for_single_view() {
        let view = sample_views().remove(0);
        let cfg = EmvcConfig::default();
        let mut state = SolverState::initial(1, 3, &cfg);
        state.q = view.matrix().clone();
        state.e = ErrorStack::zeros(1, 3);
        let p = update_p_hat(&state, std::slice::from_ref(&view)).unwrap();
        assert_relative_eq!(p.matrix(), view.matrix(), epsilon = 1e-15);
    }

    #[test]
    fn multipliers_unchanged_at_feasible_point() {
        let views = sample_views();
        let cfg = EmvcConfig::default();
        let mut state = SolverState::initial(2, 3, &cfg);
        state.p_hat = views[0].matrix().clone();
        state.q = state.p_hat.clone();
        state.e = ErrorStack::from_views(&[
            DMatrix::zeros(3, 3),
            views[1].matrix() - views[0].matrix(),
        ])
        .unwrap();
        state.z = DMatrix::from_element(3, 3, 0.3);
        state.mu = 2.0;
        let m = update_multipliers(&state, &views, &cfg);
        assert_relative_eq!(m.z, state.z, epsilon = 1e-15);
        for (a, b) in m.y.iter().zip(&state.y) {
            assert_relative_eq!(a, b, epsilon = 1e-15);
        }
        assert_eq!(m.mu, 2.0 * 1.9);

        state.mu = cfg.mu_max;
        assert_eq!(update_multipliers(&state, &views, &cfg).mu, cfg.mu_max);
    }

    #[test]
    fn solve_single_view_is_feasible() {
        let views = vec![sample_views().remove(0)];
        let state = solve(&views, &EmvcConfig::default()).unwrap();
        assert_eq!(state.status, SolverStatus::Converged);
        let (coupling, split) = state.feasibility(&views);
        assert!(coupling <= 1e-8 && split <= 1e-8);
        assert!(state.shared_transition().is_ok());
    }

    #[test]
    fn solve_rejects_mismatched_views() {
        let views = vec![
            tm(DMatrix::from_element(2, 2, 0.5)),
            tm(DMatrix::from_element(3, 3, 1.0 / 3.0)),
        ];
        assert!(matches!(solve(&views, &EmvcConfig::default()), Err(Error::Shape(_))));
        assert!(matches!(solve(&[], &EmvcConfig::default()), Err(Error::Config(_))));
    }

    #[test]
    fn solve_is_deterministic() {
        let views = sample_views();
        let cfg = EmvcConfig {
            seed: 11,
            ..Default::default()
        };
        let a = solve(&views, &cfg).unwrap();
        let b = solve(&views, &cfg).unwrap();
        assert_eq!(a.p_hat, b.p_hat);
        assert_eq!(a.objective_history, b.objective_history);
    }

    #[test]
    fn not_converged_is_reported_not_raised() {
        let cfg = EmvcConfig {
            max_iters: 3,
            ..Default::default()
        };
        let state = solve(&sample_views(), &cfg).unwrap();
        assert_eq!(state.status, SolverStatus::NotConverged);
        assert_eq!(state.iter, 3);
    }
}
