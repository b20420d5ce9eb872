//! Kalman tracking of a network process observed on a subset of nodes.
//!
//! A fitted pure-AR model (G-VARMA with Q = 0, or GP-VAR) becomes the state
//! dynamics through its block-companion form; each step observes a few
//! nodes of the current graph signal and conditions the whole state on
//! them. Steps are sequential; independent tracking runs can go in
//! parallel.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::graph::SpectralBasis;
use crate::models::{GVarmaModel, GpVarModel};
use crate::time_vertex::TimeVertexSignal;

/// Which nodes are observed at one time step and how noisy they are.
#[derive(Debug, Clone)]
pub struct ObservationModel {
    /// Observed node indices; may be empty (pure prediction step).
    pub sample_set: Vec<usize>,
    /// Variance of the i.i.d. observation noise.
    pub noise_variance: f64,
}

impl ObservationModel {
    pub fn validate(&self, n: usize) -> Result<()> {
        let mut seen = vec![false; n];
        for &node in &self.sample_set {
            if node >= n {
                return Err(Error::invalid(format!("observed node {node} out of range")));
            }
            if seen[node] {
                return Err(Error::invalid(format!("node {node} observed twice in one step")));
            }
            seen[node] = true;
        }
        if !(self.noise_variance.is_finite() && self.noise_variance >= 0.0) {
            return Err(Error::invalid("noise variance must be finite and nonnegative"));
        }
        Ok(())
    }
}

/// Gaussian belief over the companion state (the last P graph signals).
#[derive(Debug, Clone)]
pub struct TrackerState {
    pub mean: DVector<f64>,
    pub covariance: DMatrix<f64>,
}

impl TrackerState {
    /// Symmetrize and clip tiny negative eigenvalues to zero.
    fn sanitized(mean: DVector<f64>, covariance: DMatrix<f64>) -> Result<Self> {
        let covariance = (&covariance + covariance.transpose()) * 0.5;
        let scale = covariance.norm().max(1.0);
        // fast path: positive definite needs no clipping
        if covariance.clone().cholesky().is_some() {
            return Ok(TrackerState { mean, covariance });
        }
        let eig = covariance.symmetric_eigen();
        let mut vals = eig.eigenvalues;
        for v in vals.iter_mut() {
            if *v < 0.0 {
                if *v < -1e-6 * scale {
                    return Err(Error::numerical(format!(
                        "tracker covariance lost positive semidefiniteness (eigenvalue {v:.3e})"
                    )));
                }
                *v = 0.0;
            }
        }
        let covariance = &eig.eigenvectors * DMatrix::from_diagonal(&vals) * eig.eigenvectors.transpose();
        Ok(TrackerState { mean, covariance })
    }
}

/// Companion-form dynamics: `z_t = A z_{t-1} + [eps_t; 0; ...]`.
#[derive(Debug, Clone)]
pub struct StateSpace {
    pub transition: DMatrix<f64>,
    pub process_noise: DMatrix<f64>,
    /// Number of graph nodes (top-block size).
    pub n: usize,
    /// Temporal order (number of stacked blocks).
    pub p: usize,
}

impl StateSpace {
    pub fn dim(&self) -> usize {
        self.n * self.p
    }

    pub fn spectral_radius(&self) -> f64 {
        self.transition
            .complex_eigenvalues()
            .iter()
            .fold(0.0f64, |m, z| m.max(z.norm()))
    }
}

fn companion_from_blocks(lags: Vec<DMatrix<f64>>, noise_top: DMatrix<f64>) -> StateSpace {
    let p = lags.len();
    let n = noise_top.nrows();
    let dim = n * p.max(1);
    let mut a = DMatrix::<f64>::zeros(dim, dim);
    for (idx, lag) in lags.iter().enumerate() {
        // top block row holds -Psi_p
        a.view_mut((0, idx * n), (n, n)).copy_from(&(-lag));
    }
    for block in 1..p {
        for i in 0..n {
            a[(block * n + i, (block - 1) * n + i)] = 1.0;
        }
    }
    let mut q = DMatrix::<f64>::zeros(dim, dim);
    q.view_mut((0, 0), (n, n)).copy_from(&noise_top);
    StateSpace {
        transition: a,
        process_noise: q,
        n,
        p: p.max(1),
    }
}

/// Companion realization of a pure-AR G-VARMA model (`Q` must be 0).
pub fn build_state_space_gvarma(model: &GVarmaModel, basis: &SpectralBasis) -> Result<StateSpace> {
    if model.q() > 0 {
        return Err(Error::invalid(
            "tracking requires Q = 0; MA terms have no finite companion form here",
        ));
    }
    let lags = model.dense_ar_matrices(basis)?;
    let noise = model.innovation().dense(basis);
    Ok(companion_from_blocks(lags, noise))
}

/// Companion realization of a GP-VAR model.
pub fn build_state_space_gpvar(model: &GpVarModel) -> Result<StateSpace> {
    let lags = model.lag_matrices();
    let n = model.n();
    let sigma = model.innovation_power() / n as f64;
    let noise = DMatrix::identity(n, n) * sigma;
    Ok(companion_from_blocks(lags, noise))
}

/// Stationary state covariance: the fixed point of
/// `cov = A cov A^T + Q`, iterated to 1e-10.
pub fn stationary_covariance(ss: &StateSpace) -> Result<DMatrix<f64>> {
    let mut cov = ss.process_noise.clone();
    for _ in 0..100_000 {
        let next = &ss.transition * &cov * ss.transition.transpose() + &ss.process_noise;
        let delta = (&next - &cov).norm();
        cov = next;
        if delta <= 1e-10 {
            return Ok((&cov + cov.transpose()) * 0.5);
        }
    }
    Err(Error::numerical(
        "Lyapunov fixed point did not converge; the model is not stable",
    ))
}

/// One predict-update cycle. Returns the new state and the filtered
/// estimate of the current graph signal (the top block of the mean).
///
/// The update uses the Joseph-form covariance for numerical symmetry. An
/// innovation covariance with condition number above 1e12 is refused.
pub fn kalman_step(
    state: &TrackerState,
    ss: &StateSpace,
    om: &ObservationModel,
    values: &[f64],
) -> Result<(TrackerState, DVector<f64>)> {
    let dim = ss.dim();
    if state.mean.len() != dim || state.covariance.nrows() != dim {
        return Err(Error::dims("tracker state does not match the state space"));
    }
    om.validate(ss.n)?;
    if values.len() != om.sample_set.len() {
        return Err(Error::dims(format!(
            "{} observed values for {} sampled nodes",
            values.len(),
            om.sample_set.len()
        )));
    }

    // predict
    let mean_pred = &ss.transition * &state.mean;
    let cov_pred =
        &ss.transition * &state.covariance * ss.transition.transpose() + &ss.process_noise;

    if om.sample_set.is_empty() {
        let state = TrackerState::sanitized(mean_pred, cov_pred)?;
        let estimate = state.mean.rows(0, ss.n).into_owned();
        return Ok((state, estimate));
    }

    // update: C picks observed rows of the top block
    let m = om.sample_set.len();
    let mut c = DMatrix::<f64>::zeros(m, dim);
    for (row, &node) in om.sample_set.iter().enumerate() {
        c[(row, node)] = 1.0;
    }
    let innovation_cov =
        &c * &cov_pred * c.transpose() + DMatrix::identity(m, m) * om.noise_variance;
    let eig = innovation_cov.clone().symmetric_eigen();
    let max_eig = eig.eigenvalues.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let min_eig = eig.eigenvalues.iter().cloned().fold(f64::INFINITY, f64::min);
    if min_eig <= 0.0 || !min_eig.is_finite() || max_eig / min_eig > 1e12 {
        return Err(Error::numerical(
            "innovation covariance is ill-conditioned; increase the observation noise variance",
        ));
    }

    let y = DVector::from_column_slice(values);
    let residual = &y - &c * &mean_pred;
    // K = P C^T H^{-1} through the eigendecomposition of H
    let mut h_inv = DMatrix::<f64>::zeros(m, m);
    for i in 0..m {
        let col = eig.eigenvectors.column(i);
        h_inv += col * col.transpose() / eig.eigenvalues[i];
    }
    let gain = &cov_pred * c.transpose() * h_inv;
    let mean = &mean_pred + &gain * residual;

    let i_kc = DMatrix::<f64>::identity(dim, dim) - &gain * &c;
    let cov = &i_kc * &cov_pred * i_kc.transpose()
        + &gain * DMatrix::identity(m, m) * om.noise_variance * gain.transpose();

    let state = TrackerState::sanitized(mean, cov)?;
    let estimate = state.mean.rows(0, ss.n).into_owned();
    Ok((state, estimate))
}

/// Observations for one tracking step.
#[derive(Debug, Clone)]
pub struct ObservationStep {
    pub model: ObservationModel,
    pub values: Vec<f64>,
}

/// Filtered and one-step-predicted estimates for a whole tracking run.
#[derive(Debug, Clone)]
pub struct TrackOutput {
    /// Filtered graph-signal estimates, one column per step.
    pub filtered: TimeVertexSignal,
    /// Open-loop (pre-update) estimates, one column per step.
    pub predicted: TimeVertexSignal,
    /// Trace of the state covariance after each update.
    pub covariance_trace: Vec<f64>,
}

/// Track a process over time from partial observations.
///
/// The state starts at the model's stationary distribution (zero mean and
/// the Lyapunov covariance) unless an explicit initial mean is given.
pub fn track(
    ss: &StateSpace,
    steps: &[ObservationStep],
    init_mean: Option<DVector<f64>>,
) -> Result<TrackOutput> {
    let dim = ss.dim();
    let mean = match init_mean {
        Some(m) => {
            if m.len() != dim {
                return Err(Error::dims("initial mean must match the state dimension"));
            }
            m
        }
        None => DVector::zeros(dim),
    };
    let cov = stationary_covariance(ss)?;
    let mut state = TrackerState::sanitized(mean, cov)?;

    let t_len = steps.len();
    let mut filtered = DMatrix::zeros(ss.n, t_len);
    let mut predicted = DMatrix::zeros(ss.n, t_len);
    let mut covariance_trace = Vec::with_capacity(t_len);
    for (t, step) in steps.iter().enumerate() {
        let open_loop = (&ss.transition * &state.mean).rows(0, ss.n).into_owned();
        predicted.column_mut(t).copy_from(&open_loop);
        let (next, estimate) = kalman_step(&state, ss, &step.model, &step.values)?;
        filtered.column_mut(t).copy_from(&estimate);
        covariance_trace.push(next.covariance.trace());
        state = next;
    }
    Ok(TrackOutput {
        filtered,
        predicted,
        covariance_trace,
    })
}
