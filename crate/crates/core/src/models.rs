//! G-VARMA and GP-VAR process models: simulation, one- and k-step
//! prediction, and the theoretical one-step MSE.
//!
//! A G-VARMA recursion is a vector ARMA whose coefficient matrices are
//! graph filters, so after a GFT it decouples into N independent scalar
//! ARMA recursions. A GP-VAR further restricts the lag matrices to
//! Laplacian polynomials `Psi_p = sum_l psi[l][p] L^l`, which keeps the
//! vertex-domain recursion sparse and local.

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::graph::{SparseSym, SpectralBasis};
use crate::time_vertex::TimeVertexSignal;

/// Innovation covariance, either as a spectrum (diagonal in the GFT basis,
/// the form every JWSS fit produces) or as a dense matrix.
#[derive(Debug, Clone)]
pub enum InnovationCovariance {
    /// Diagonal of `U^T Sigma U`: one variance per graph frequency.
    Spectral(DVector<f64>),
    Dense(DMatrix<f64>),
}

impl InnovationCovariance {
    pub fn identity(n: usize) -> Self {
        InnovationCovariance::Spectral(DVector::from_element(n, 1.0))
    }

    fn validate(&self, n: usize) -> Result<()> {
        match self {
            InnovationCovariance::Spectral(s) => {
                if s.len() != n {
                    return Err(Error::dims("innovation spectrum length must be N"));
                }
                if s.iter().any(|v| !v.is_finite() || *v < 0.0) {
                    return Err(Error::invalid("innovation spectrum must be nonnegative"));
                }
            }
            InnovationCovariance::Dense(m) => {
                if m.nrows() != n || m.ncols() != n {
                    return Err(Error::dims("innovation covariance must be N x N"));
                }
                let scale = m.norm().max(1e-300);
                for i in 0..n {
                    for j in (i + 1)..n {
                        if (m[(i, j)] - m[(j, i)]).abs() > 1e-9 * scale {
                            return Err(Error::invalid("innovation covariance must be symmetric"));
                        }
                    }
                }
                let min = m
                    .clone()
                    .symmetric_eigen()
                    .eigenvalues
                    .iter()
                    .cloned()
                    .fold(f64::INFINITY, f64::min);
                if min < -1e-8 * scale {
                    return Err(Error::invalid("innovation covariance must be PSD"));
                }
            }
        }
        Ok(())
    }

    pub fn trace(&self) -> f64 {
        match self {
            InnovationCovariance::Spectral(s) => s.sum(),
            InnovationCovariance::Dense(m) => m.trace(),
        }
    }

    /// Per-frequency variances `diag(U^T Sigma U)`.
    pub fn spectrum(&self, basis: &SpectralBasis) -> DVector<f64> {
        match self {
            InnovationCovariance::Spectral(s) => s.clone(),
            InnovationCovariance::Dense(m) => {
                let rotated = basis.eigenvectors.transpose() * m * &basis.eigenvectors;
                rotated.diagonal()
            }
        }
    }

    /// Dense `N x N` covariance.
    pub fn dense(&self, basis: &SpectralBasis) -> DMatrix<f64> {
        match self {
            InnovationCovariance::Spectral(s) => {
                &basis.eigenvectors * DMatrix::from_diagonal(s) * basis.eigenvectors.transpose()
            }
            InnovationCovariance::Dense(m) => m.clone(),
        }
    }
}

/// Spectral radius of the companion matrix of `x_t = -sum_p a_p x_{t-p}`.
pub(crate) fn companion_spectral_radius(ar: &[f64]) -> f64 {
    let p = ar.len();
    if p == 0 || ar.iter().all(|v| *v == 0.0) {
        return 0.0;
    }
    let mut c = DMatrix::zeros(p, p);
    for (j, &a) in ar.iter().enumerate() {
        c[(0, j)] = -a;
    }
    for i in 1..p {
        c[(i, i - 1)] = 1.0;
    }
    c.complex_eigenvalues()
        .iter()
        .fold(0.0f64, |m, z| m.max(z.norm()))
}

const STABILITY_MARGIN: f64 = 1e-6;

/// G-VARMA model: per-lag diagonal spectra of the AR and MA graph filters
/// plus the innovation covariance. `b_0` is the all-ones spectrum by
/// construction and is never stored.
#[derive(Debug, Clone)]
pub struct GVarmaModel {
    n: usize,
    ar_spectra: Vec<DVector<f64>>,
    ma_spectra: Vec<DVector<f64>>,
    innovation: InnovationCovariance,
}

impl GVarmaModel {
    pub fn new(
        n: usize,
        ar_spectra: Vec<DVector<f64>>,
        ma_spectra: Vec<DVector<f64>>,
        innovation: InnovationCovariance,
    ) -> Result<Self> {
        for s in ar_spectra.iter().chain(ma_spectra.iter()) {
            if s.len() != n {
                return Err(Error::dims("every spectrum must have length N"));
            }
            if s.iter().any(|v| !v.is_finite()) {
                return Err(Error::invalid("spectra must be finite"));
            }
        }
        innovation.validate(n)?;
        Ok(GVarmaModel {
            n,
            ar_spectra,
            ma_spectra,
            innovation,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn p(&self) -> usize {
        self.ar_spectra.len()
    }

    pub fn q(&self) -> usize {
        self.ma_spectra.len()
    }

    pub fn ar_spectra(&self) -> &[DVector<f64>] {
        &self.ar_spectra
    }

    pub fn ma_spectra(&self) -> &[DVector<f64>] {
        &self.ma_spectra
    }

    pub fn innovation(&self) -> &InnovationCovariance {
        &self.innovation
    }

    /// Scalar AR coefficients of frequency `n`.
    fn ar_at(&self, n: usize) -> Vec<f64> {
        self.ar_spectra.iter().map(|s| s[n]).collect()
    }

    fn ma_at(&self, n: usize) -> Vec<f64> {
        self.ma_spectra.iter().map(|s| s[n]).collect()
    }

    /// Check per-frequency stationarity of the AR part.
    pub fn check_stable(&self) -> Result<()> {
        for n in 0..self.n {
            let radius = companion_spectral_radius(&self.ar_at(n));
            if radius >= 1.0 - STABILITY_MARGIN {
                return Err(Error::Unstable(format!(
                    "AR spectrum at frequency {n} has companion spectral radius {radius:.6}"
                )));
            }
        }
        Ok(())
    }

    /// Dense lag matrices `a_p(L) = U diag(a_p) U^T`.
    pub fn dense_ar_matrices(&self, basis: &SpectralBasis) -> Result<Vec<DMatrix<f64>>> {
        if basis.n() != self.n {
            return Err(Error::dims("basis size does not match the model"));
        }
        Ok(self
            .ar_spectra
            .iter()
            .map(|s| &basis.eigenvectors * DMatrix::from_diagonal(s) * basis.eigenvectors.transpose())
            .collect())
    }

    /// Smallest achievable one-step prediction MSE: `trace(Sigma_eps)`.
    pub fn theoretical_one_step_mse(&self) -> f64 {
        self.innovation.trace()
    }
}

/// GP-VAR model: scalar coefficients `psi[p-1][l]` of the Laplacian
/// polynomial at each temporal lag, plus the Laplacian they refer to.
#[derive(Debug, Clone)]
pub struct GpVarModel {
    psi: Vec<Vec<f64>>,
    laplacian: DMatrix<f64>,
    /// Total innovation power `trace(Sigma_eps)`; innovations are modeled
    /// isotropic, `Sigma_eps = (power / N) I`.
    innovation_power: f64,
    restricted: bool,
}

impl GpVarModel {
    pub fn new(
        psi: Vec<Vec<f64>>,
        laplacian: DMatrix<f64>,
        innovation_power: f64,
        restricted: bool,
    ) -> Result<Self> {
        let n = laplacian.nrows();
        if n == 0 || laplacian.ncols() != n {
            return Err(Error::invalid("laplacian must be square and non-empty"));
        }
        for (pm1, poly) in psi.iter().enumerate() {
            if poly.is_empty() {
                return Err(Error::invalid(format!("psi polynomial at lag {} is empty", pm1 + 1)));
            }
            if poly.iter().any(|v| !v.is_finite()) {
                return Err(Error::invalid("psi coefficients must be finite"));
            }
            if restricted && poly.len() - 1 > pm1 + 1 {
                return Err(Error::invalid(format!(
                    "restricted model requires L_p <= p, got L_{} = {}",
                    pm1 + 1,
                    poly.len() - 1
                )));
            }
        }
        if !(innovation_power.is_finite() && innovation_power >= 0.0) {
            return Err(Error::invalid("innovation power must be nonnegative"));
        }
        Ok(GpVarModel {
            psi,
            laplacian,
            innovation_power,
            restricted,
        })
    }

    pub fn n(&self) -> usize {
        self.laplacian.nrows()
    }

    pub fn p(&self) -> usize {
        self.psi.len()
    }

    /// Polynomial orders `L_p` per lag.
    pub fn orders(&self) -> Vec<usize> {
        self.psi.iter().map(|poly| poly.len() - 1).collect()
    }

    pub fn psi(&self) -> &[Vec<f64>] {
        &self.psi
    }

    pub fn laplacian(&self) -> &DMatrix<f64> {
        &self.laplacian
    }

    pub fn innovation_power(&self) -> f64 {
        self.innovation_power
    }

    pub fn is_restricted(&self) -> bool {
        self.restricted
    }

    pub fn theoretical_one_step_mse(&self) -> f64 {
        self.innovation_power
    }

    /// Dense lag matrices `Psi_p = sum_l psi[l][p] L^l`.
    pub fn lag_matrices(&self) -> Vec<DMatrix<f64>> {
        let n = self.n();
        let eye = DMatrix::<f64>::identity(n, n);
        self.psi
            .iter()
            .map(|poly| {
                let mut acc = DMatrix::zeros(n, n);
                let mut power = eye.clone();
                for (l, &c) in poly.iter().enumerate() {
                    if l > 0 {
                        power = &power * &self.laplacian;
                    }
                    acc += &power * c;
                }
                acc
            })
            .collect()
    }

    /// Per-frequency AR spectra `a_p(lambda) = sum_l psi[l][p] lambda^l`.
    pub fn ar_spectra_on(&self, eigenvalues: &DVector<f64>) -> Vec<DVector<f64>> {
        self.psi
            .iter()
            .map(|poly| {
                DVector::from_fn(eigenvalues.len(), |n, _| {
                    poly.iter()
                        .rev()
                        .fold(0.0, |acc, &c| acc * eigenvalues[n] + c)
                })
            })
            .collect()
    }

    pub fn check_stable(&self) -> Result<()> {
        let eigenvalues = self.laplacian.clone().symmetric_eigenvalues();
        let spectra = self.ar_spectra_on(&eigenvalues);
        for n in 0..self.n() {
            let ar: Vec<f64> = spectra.iter().map(|s| s[n]).collect();
            let radius = companion_spectral_radius(&ar);
            if radius >= 1.0 - STABILITY_MARGIN {
                return Err(Error::Unstable(format!(
                    "coefficients give companion spectral radius {radius:.6} at eigenvalue {}",
                    eigenvalues[n]
                )));
            }
        }
        Ok(())
    }

    /// The same process expressed as a G-VARMA with diagonal spectra
    /// evaluated on `basis` (which must decompose this model's Laplacian).
    pub fn equivalent_gvarma(&self, basis: &SpectralBasis) -> Result<GVarmaModel> {
        if basis.n() != self.n() {
            return Err(Error::dims("basis size does not match the model"));
        }
        let diff = (&basis.laplacian - &self.laplacian).norm();
        if diff > 1e-9 * self.laplacian.norm().max(1.0) {
            return Err(Error::invalid("basis was built from a different laplacian"));
        }
        let spectra = self.ar_spectra_on(&basis.eigenvalues);
        let sigma = self.innovation_power / self.n() as f64;
        GVarmaModel::new(
            self.n(),
            spectra,
            vec![],
            InnovationCovariance::Spectral(DVector::from_element(self.n(), sigma)),
        )
    }
}

/// A simulated trajectory together with the innovations that drove it
/// (vertex domain, one column per emitted time step).
#[derive(Debug, Clone)]
pub struct SimulationOutput {
    pub signal: TimeVertexSignal,
    pub innovations: TimeVertexSignal,
}

/// Columns of standard normal draws, the shared noise source of both
/// simulators: identical `(seed, N, steps)` means identical draws, which is
/// what makes the vertex-domain and GFT-domain simulators comparable
/// trajectory-for-trajectory.
fn standard_normal_columns(n: usize, steps: usize, seed: u64) -> DMatrix<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut m = DMatrix::zeros(n, steps);
    for t in 0..steps {
        for i in 0..n {
            m[(i, t)] = StandardNormal.sample(&mut rng);
        }
    }
    m
}

/// Simulate a G-VARMA process by running the decoupled per-frequency
/// recursion in the GFT domain and rotating back.
pub fn gvarma_simulate(
    model: &GVarmaModel,
    basis: &SpectralBasis,
    t_len: usize,
    seed: u64,
    burn_in: usize,
) -> Result<TimeVertexSignal> {
    Ok(gvarma_simulate_full(model, basis, t_len, seed, burn_in)?.signal)
}

/// As [`gvarma_simulate`], also returning the injected innovations.
pub fn gvarma_simulate_full(
    model: &GVarmaModel,
    basis: &SpectralBasis,
    t_len: usize,
    seed: u64,
    burn_in: usize,
) -> Result<SimulationOutput> {
    if basis.n() != model.n() {
        return Err(Error::dims("basis size does not match the model"));
    }
    if t_len == 0 {
        return Err(Error::invalid("t_len must be positive"));
    }
    model.check_stable()?;
    let n = model.n();
    let p = model.p();
    let q = model.q();
    let total = burn_in + t_len;

    let z = standard_normal_columns(n, total, seed);
    // innovations in the GFT domain
    let eps_hat = match model.innovation() {
        InnovationCovariance::Spectral(s) => {
            let sd = s.map(|v| v.sqrt());
            let rotated = basis.eigenvectors.transpose() * &z;
            DMatrix::from_fn(n, total, |i, t| sd[i] * rotated[(i, t)])
        }
        InnovationCovariance::Dense(m) => {
            let chol = m
                .clone()
                .cholesky()
                .ok_or_else(|| Error::numerical("innovation covariance is not positive definite"))?;
            basis.eigenvectors.transpose() * chol.l() * &z
        }
    };

    let mut xhat = DMatrix::<f64>::zeros(n, total);
    for t in 0..total {
        for i in 0..n {
            let mut v = eps_hat[(i, t)];
            for lag in 1..=q.min(t) {
                v += model.ma_spectra[lag - 1][i] * eps_hat[(i, t - lag)];
            }
            for lag in 1..=p.min(t) {
                v -= model.ar_spectra[lag - 1][i] * xhat[(i, t - lag)];
            }
            xhat[(i, t)] = v;
        }
    }

    let x = &basis.eigenvectors * xhat.columns(burn_in, t_len).into_owned();
    let innovations = &basis.eigenvectors * eps_hat.columns(burn_in, t_len).into_owned();
    Ok(SimulationOutput {
        signal: x,
        innovations,
    })
}

/// Simulate a GP-VAR process in the vertex domain with sparse mat-vecs.
pub fn gpvar_simulate(model: &GpVarModel, t_len: usize, seed: u64, burn_in: usize) -> Result<TimeVertexSignal> {
    Ok(gpvar_simulate_full(model, t_len, seed, burn_in)?.signal)
}

/// As [`gpvar_simulate`], also returning the injected innovations.
pub fn gpvar_simulate_full(
    model: &GpVarModel,
    t_len: usize,
    seed: u64,
    burn_in: usize,
) -> Result<SimulationOutput> {
    if t_len == 0 {
        return Err(Error::invalid("t_len must be positive"));
    }
    model.check_stable()?;
    let n = model.n();
    let p = model.p();
    let total = burn_in + t_len;
    let sparse = SparseSym::from_dense(model.laplacian())?;
    let sigma = (model.innovation_power() / n as f64).sqrt();

    let eps = standard_normal_columns(n, total, seed) * sigma;
    let mut x = DMatrix::<f64>::zeros(n, total);
    for t in 0..total {
        let mut col = eps.column(t).into_owned();
        for lag in 1..=p.min(t) {
            let prev = x.column(t - lag).into_owned();
            col -= sparse.poly_apply(&model.psi[lag - 1], &prev);
        }
        x.column_mut(t).copy_from(&col);
    }

    Ok(SimulationOutput {
        signal: x.columns(burn_in, t_len).into_owned(),
        innovations: eps.columns(burn_in, t_len).into_owned(),
    })
}

/// Forecast over a horizon: predicted signals plus the model-implied MSE of
/// each step (step 1 is `trace(Sigma_eps)`).
#[derive(Debug, Clone)]
pub struct Forecast {
    pub horizon: usize,
    /// `N x horizon`; column `j` is the `(j+1)`-step-ahead prediction.
    pub predictions: DMatrix<f64>,
    pub predicted_mse: DVector<f64>,
}

/// Cumulative squared impulse response of a scalar ARMA recursion
/// `x_t = -sum a_p x_{t-p} + eps_t + sum b_q eps_{t-q}`, scaled by the
/// innovation variance: the k-step linear prediction error variance.
fn scalar_prediction_variances(ar: &[f64], ma: &[f64], sigma2: f64, horizon: usize) -> Vec<f64> {
    let mut impulse = vec![0.0; horizon];
    let mut out = Vec::with_capacity(horizon);
    let mut cumulative = 0.0;
    for j in 0..horizon {
        let mut v = if j == 0 {
            1.0
        } else if j <= ma.len() {
            ma[j - 1]
        } else {
            0.0
        };
        for (pm1, &a) in ar.iter().enumerate() {
            let lag = pm1 + 1;
            if j >= lag {
                v -= a * impulse[j - lag];
            }
        }
        impulse[j] = v;
        cumulative += v * v;
        out.push(sigma2 * cumulative);
    }
    out
}

/// k-step-ahead G-VARMA prediction.
///
/// Runs per-frequency in the GFT domain. Past innovations are recovered by
/// the innovations recursion from the start of the supplied history
/// (zero-initialized before it); unknown future innovations enter at their
/// zero mean.
pub fn gvarma_predict(
    model: &GVarmaModel,
    basis: &SpectralBasis,
    history: &TimeVertexSignal,
    horizon: usize,
) -> Result<Forecast> {
    if basis.n() != model.n() {
        return Err(Error::dims("basis size does not match the model"));
    }
    if history.nrows() != model.n() {
        return Err(Error::dims("history rows must equal N"));
    }
    if horizon == 0 {
        return Err(Error::invalid("horizon must be positive"));
    }
    let needed = model.p().max(model.q());
    let t_hist = history.ncols();
    if t_hist < needed {
        return Err(Error::invalid(format!(
            "history length {t_hist} is shorter than max(P,Q) = {needed}"
        )));
    }

    let n = model.n();
    let xhat = basis.eigenvectors.transpose() * history;
    let mut predictions_hat = DMatrix::<f64>::zeros(n, horizon);
    let spectrum = model.innovation.spectrum(basis);
    let mut mse = DVector::zeros(horizon);

    for i in 0..n {
        let ar = model.ar_at(i);
        let ma = model.ma_at(i);

        // innovations over the history (zero before its start)
        let mut eps = vec![0.0; t_hist];
        for t in 0..t_hist {
            let mut pred = 0.0;
            for (lag_m1, &a) in ar.iter().enumerate() {
                let lag = lag_m1 + 1;
                if t >= lag {
                    pred -= a * xhat[(i, t - lag)];
                }
            }
            for (lag_m1, &b) in ma.iter().enumerate() {
                let lag = lag_m1 + 1;
                if t >= lag {
                    pred += b * eps[t - lag];
                }
            }
            eps[t] = xhat[(i, t)] - pred;
        }

        // recurse forward, future innovations at their zero mean
        let mut future = vec![0.0; horizon];
        for j in 0..horizon {
            let mut v = 0.0;
            for (lag_m1, &a) in ar.iter().enumerate() {
                let lag = lag_m1 + 1;
                let idx = t_hist + j;
                let past = idx as isize - lag as isize;
                let value = if past >= t_hist as isize {
                    future[past as usize - t_hist]
                } else if past >= 0 {
                    xhat[(i, past as usize)]
                } else {
                    0.0
                };
                v -= a * value;
            }
            for (lag_m1, &b) in ma.iter().enumerate() {
                let lag = lag_m1 + 1;
                let idx = t_hist + j;
                let past = idx as isize - lag as isize;
                // future innovations are zero-mean, only realized ones count
                if past >= 0 && (past as usize) < t_hist {
                    v += b * eps[past as usize];
                }
            }
            future[j] = v;
        }
        for j in 0..horizon {
            predictions_hat[(i, j)] = future[j];
        }

        let vars = scalar_prediction_variances(&ar, &ma, spectrum[i], horizon);
        for j in 0..horizon {
            mse[j] += vars[j];
        }
    }

    Ok(Forecast {
        horizon,
        predictions: &basis.eigenvectors * predictions_hat,
        predicted_mse: mse,
    })
}

/// k-step-ahead GP-VAR prediction in the vertex domain (sparse Horner
/// evaluation, predictions fed back for steps beyond one).
pub fn gpvar_predict(model: &GpVarModel, history: &TimeVertexSignal, horizon: usize) -> Result<Forecast> {
    if history.nrows() != model.n() {
        return Err(Error::dims("history rows must equal N"));
    }
    if horizon == 0 {
        return Err(Error::invalid("horizon must be positive"));
    }
    let t_hist = history.ncols();
    if t_hist < model.p() {
        return Err(Error::invalid(format!(
            "history length {t_hist} is shorter than P = {}",
            model.p()
        )));
    }

    let n = model.n();
    let sparse = SparseSym::from_dense(model.laplacian())?;
    let mut predictions = DMatrix::<f64>::zeros(n, horizon);
    for j in 0..horizon {
        let mut col = DVector::zeros(n);
        for (lag_m1, poly) in model.psi.iter().enumerate() {
            let lag = lag_m1 + 1;
            let idx = t_hist + j;
            let past = idx as isize - lag as isize;
            let value = if past >= t_hist as isize {
                predictions.column(past as usize - t_hist).into_owned()
            } else if past >= 0 {
                history.column(past as usize).into_owned()
            } else {
                DVector::zeros(n)
            };
            col -= sparse.poly_apply(poly, &value);
        }
        predictions.column_mut(j).copy_from(&col);
    }

    // k-step error variance from the matrix impulse response
    let lags = model.lag_matrices();
    let sigma2 = model.innovation_power() / n as f64;
    let mut impulse: Vec<DMatrix<f64>> = Vec::with_capacity(horizon);
    let mut mse = DVector::zeros(horizon);
    let mut cumulative = 0.0;
    for j in 0..horizon {
        let mut m = if j == 0 {
            DMatrix::identity(n, n)
        } else {
            DMatrix::zeros(n, n)
        };
        for (lag_m1, a) in lags.iter().enumerate() {
            let lag = lag_m1 + 1;
            if j >= lag {
                m -= a * &impulse[j - lag];
            }
        }
        cumulative += m.norm_squared();
        impulse.push(m);
        mse[j] = sigma2 * cumulative;
    }

    Ok(Forecast {
        horizon,
        predictions,
        predicted_mse: mse,
    })
}
