//! Parameter estimation: GFT-decoupled per-frequency ARMA fitting for
//! G-VARMA, optimal low-rank frequency selection, autocorrelation
//! estimation, and GP-VAR coefficient solving.
//!
//! The decoupling result is what makes G-VARMA fitting tractable: rotating
//! the data by the Laplacian eigenvectors turns the `N`-variate estimation
//! problem into `N` independent univariate ARMA fits, one per graph
//! frequency. Each scalar fit runs Gauss-Newton on the conditional
//! sum-of-squares, started from a Hannan-Rissanen two-stage regression.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::graph::SpectralBasis;
use crate::models::{GVarmaModel, GpVarModel, InnovationCovariance};
use crate::stationarity::{estimate_jpsd, smooth_jpsd, SmoothingConfig};
use crate::time_vertex::{TemporalBasis, TimeVertexSignal};

type C64 = Complex<f64>;

/// One graph frequency's time series: row `n` of `U^T X`.
#[derive(Debug, Clone)]
pub struct FrequencySeries {
    pub index: usize,
    pub series: DVector<f64>,
}

/// Rotate a time-vertex signal into per-frequency scalar series.
pub fn decouple(basis: &SpectralBasis, x: &TimeVertexSignal) -> Result<Vec<FrequencySeries>> {
    if x.nrows() != basis.n() {
        return Err(Error::dims(format!(
            "signal has {} rows, basis size is {}",
            x.nrows(),
            basis.n()
        )));
    }
    let xhat = basis.eigenvectors.transpose() * x;
    Ok((0..basis.n())
        .map(|n| FrequencySeries {
            index: n,
            series: xhat.row(n).transpose(),
        })
        .collect())
}

/// Sample autocorrelation matrices `R(i) = E[x_{t+i} x_t^T]` for lags
/// `0..=max_lag`, with `R(0)` symmetrized.
#[derive(Debug, Clone)]
pub struct Autocorrelation {
    matrices: Vec<DMatrix<f64>>,
}

impl Autocorrelation {
    pub fn max_lag(&self) -> usize {
        self.matrices.len() - 1
    }

    pub fn lag(&self, i: usize) -> &DMatrix<f64> {
        &self.matrices[i]
    }

    /// `R(-i) = R(i)^T` for signed lags.
    pub fn lag_signed(&self, i: isize) -> DMatrix<f64> {
        if i >= 0 {
            self.matrices[i as usize].clone()
        } else {
            self.matrices[(-i) as usize].transpose()
        }
    }
}

/// Estimate autocorrelation matrices from one trajectory:
/// `R(i) = (T-i)^{-1} sum_{tau} x_{tau+i} x_tau^T`.
pub fn estimate_autocorrelation(x: &TimeVertexSignal, max_lag: usize) -> Result<Autocorrelation> {
    let t_len = x.ncols();
    if max_lag >= t_len {
        return Err(Error::invalid(format!(
            "max_lag {max_lag} must be smaller than T = {t_len}"
        )));
    }
    let n = x.nrows();
    let mut matrices = Vec::with_capacity(max_lag + 1);
    for lag in 0..=max_lag {
        let mut r = DMatrix::<f64>::zeros(n, n);
        for tau in 0..(t_len - lag) {
            let xi = x.column(tau + lag);
            let xj = x.column(tau);
            r += xi * xj.transpose();
        }
        r /= (t_len - lag) as f64;
        if lag == 0 {
            r = (&r + r.transpose()) * 0.5;
        }
        matrices.push(r);
    }
    Ok(Autocorrelation { matrices })
}

/// Result of one univariate ARMA fit.
#[derive(Debug, Clone)]
pub struct UnivariateArmaFit {
    /// AR coefficients `a_1..a_P` of `x_t = -sum a_p x_{t-p} + ...`.
    pub ar: Vec<f64>,
    /// MA coefficients `b_1..b_Q` (`b_0 = 1` implicit).
    pub ma: Vec<f64>,
    /// Residual variance of the conditional innovations recursion.
    pub variance: f64,
    pub converged: bool,
    pub iterations: usize,
}

/// Reflect characteristic roots of `1 + c_1 z + ... + c_k z^k` (in the
/// backshift variable) that fall inside the closed unit disk: a root of
/// modulus `rho` moves to modulus `1/rho` at the same phase. Rebuilds real
/// coefficients from the reflected root set.
fn reflect_roots(coeffs: &mut [f64]) {
    let k = coeffs.len();
    if k == 0 || coeffs.iter().all(|c| *c == 0.0) {
        return;
    }
    // characteristic roots mu = 1/z solve mu^k + c_1 mu^{k-1} + ... + c_k = 0
    let mut companion = DMatrix::<f64>::zeros(k, k);
    for (j, &c) in coeffs.iter().enumerate() {
        companion[(0, j)] = -c;
    }
    for i in 1..k {
        companion[(i, i - 1)] = 1.0;
    }
    let mut roots: Vec<C64> = companion.complex_eigenvalues().iter().cloned().collect();
    let mut changed = false;
    for mu in roots.iter_mut() {
        let m = mu.norm();
        if m >= 1.0 {
            *mu /= m * m;
            changed = true;
        }
    }
    if !changed {
        return;
    }
    // expand prod (mu - mu_i) back into monic coefficients
    let mut poly = vec![C64::new(1.0, 0.0)];
    for root in roots {
        let mut next = vec![C64::new(0.0, 0.0); poly.len() + 1];
        for (i, &c) in poly.iter().enumerate() {
            next[i] += c;
            next[i + 1] -= c * root;
        }
        poly = next;
    }
    for (i, c) in coeffs.iter_mut().enumerate() {
        *c = poly[i + 1].re;
    }
}

/// Residuals of the conditional innovations recursion
/// `eps_t = x_t + sum_p a_p x_{t-p} - sum_q b_q eps_{t-q}` for
/// `t >= max(P, Q)`, with pre-window innovations pinned to zero.
fn css_residuals(series: &DVector<f64>, ar: &[f64], ma: &[f64]) -> Vec<f64> {
    let t_len = series.len();
    let start = ar.len().max(ma.len());
    let mut eps = vec![0.0; t_len];
    for t in start..t_len {
        let mut v = series[t];
        for (pm1, &a) in ar.iter().enumerate() {
            v += a * series[t - pm1 - 1];
        }
        for (qm1, &b) in ma.iter().enumerate() {
            let idx = t - qm1 - 1;
            if idx >= start {
                v -= b * eps[idx];
            }
        }
        eps[t] = v;
    }
    eps[start..].to_vec()
}

fn css_objective(series: &DVector<f64>, ar: &[f64], ma: &[f64], gamma: f64) -> f64 {
    let r: f64 = css_residuals(series, ar, ma).iter().map(|v| v * v).sum();
    let reg: f64 = ar.iter().chain(ma.iter()).map(|v| v * v).sum();
    r + gamma * reg
}

/// Ordinary least squares via SVD (minimum-norm when rank-deficient).
fn least_squares(design: &DMatrix<f64>, target: &DVector<f64>) -> DVector<f64> {
    let svd = design.clone().svd(true, true);
    let scale = svd.singular_values.iter().cloned().fold(0.0f64, f64::max);
    svd.solve(target, 1e-12 * scale.max(1.0)).unwrap_or_else(|_| {
        DVector::zeros(design.ncols())
    })
}

/// Two-stage Hannan-Rissanen start: a long autoregression whitens the
/// series, then the ARMA coefficients come from regressing on lagged values
/// and lagged long-AR residuals.
fn hannan_rissanen(series: &DVector<f64>, p: usize, q: usize) -> (Vec<f64>, Vec<f64>) {
    let t_len = series.len();
    if p == 0 && q == 0 {
        return (vec![], vec![]);
    }
    let long_order = (t_len / 4).min(20).max(p).max(1);

    let mut resid = vec![0.0; t_len];
    if q > 0 {
        let rows = t_len - long_order;
        let mut design = DMatrix::zeros(rows, long_order);
        let mut target = DVector::zeros(rows);
        for t in long_order..t_len {
            for i in 0..long_order {
                design[(t - long_order, i)] = series[t - 1 - i];
            }
            target[t - long_order] = series[t];
        }
        let alpha = least_squares(&design, &target);
        for t in long_order..t_len {
            let mut pred = 0.0;
            for i in 0..long_order {
                pred += alpha[i] * series[t - 1 - i];
            }
            resid[t] = series[t] - pred;
        }
    }

    let start = p.max(if q > 0 { long_order + q } else { 0 });
    let rows = t_len.saturating_sub(start);
    if rows <= p + q {
        return (vec![0.0; p], vec![0.0; q]);
    }
    let mut design = DMatrix::zeros(rows, p + q);
    let mut target = DVector::zeros(rows);
    for t in start..t_len {
        for i in 0..p {
            design[(t - start, i)] = series[t - 1 - i];
        }
        for j in 0..q {
            design[(t - start, p + j)] = resid[t - 1 - j];
        }
        target[t - start] = series[t];
    }
    let theta = least_squares(&design, &target);
    let ar: Vec<f64> = (0..p).map(|i| -theta[i]).collect();
    let ma: Vec<f64> = (0..q).map(|j| theta[p + j]).collect();
    (ar, ma)
}

/// Fit a univariate ARMA(P, Q) to one frequency series by Gauss-Newton on
/// the conditional sum of squares with an l2 coefficient penalty `gamma`.
///
/// Stationarity of the AR polynomial and invertibility of the MA polynomial
/// are maintained by root reflection. Non-convergence is reported through
/// the `converged` flag, not as an error; the best iterate is returned.
pub fn fit_arma_univariate(
    series: &DVector<f64>,
    p: usize,
    q: usize,
    gamma: f64,
    max_iters: usize,
    tolerance: f64,
) -> Result<UnivariateArmaFit> {
    let t_len = series.len();
    if t_len <= 2 * (p + q) + 1 {
        return Err(Error::invalid(format!(
            "series length {t_len} too short for ARMA({p},{q})"
        )));
    }
    if !(gamma.is_finite() && gamma >= 0.0) {
        return Err(Error::invalid("gamma must be finite and nonnegative"));
    }
    if series.iter().any(|v| !v.is_finite()) {
        return Err(Error::invalid("series contains non-finite values"));
    }
    if series.iter().all(|v| *v == 0.0) {
        return Ok(UnivariateArmaFit {
            ar: vec![0.0; p],
            ma: vec![0.0; q],
            variance: 0.0,
            converged: true,
            iterations: 0,
        });
    }
    if p == 0 && q == 0 {
        let variance = series.iter().map(|v| v * v).sum::<f64>() / t_len as f64;
        return Ok(UnivariateArmaFit {
            ar: vec![],
            ma: vec![],
            variance,
            converged: true,
            iterations: 0,
        });
    }

    let (mut ar, mut ma) = hannan_rissanen(series, p, q);
    reflect_roots(&mut ar);
    reflect_roots(&mut ma);

    let start = p.max(q);
    let n_par = p + q;
    let mut objective = css_objective(series, &ar, &ma, gamma);
    let mut converged = false;
    let mut iterations = 0;

    for iter in 0..max_iters {
        iterations = iter + 1;

        // residuals and their derivatives share the innovations recursion
        let mut eps = vec![0.0; t_len];
        let mut deps = vec![vec![0.0; t_len]; n_par];
        for t in start..t_len {
            let mut v = series[t];
            for (pm1, &a) in ar.iter().enumerate() {
                v += a * series[t - pm1 - 1];
            }
            for (qm1, &b) in ma.iter().enumerate() {
                let idx = t - qm1 - 1;
                if idx >= start {
                    v -= b * eps[idx];
                }
            }
            eps[t] = v;

            for k in 0..n_par {
                let mut d = if k < p {
                    series[t - k - 1]
                } else {
                    let idx = t as isize - (k - p) as isize - 1;
                    if idx >= start as isize {
                        -eps[idx as usize]
                    } else {
                        0.0
                    }
                };
                for (qm1, &b) in ma.iter().enumerate() {
                    let idx = t as isize - qm1 as isize - 1;
                    if idx >= start as isize {
                        d -= b * deps[k][idx as usize];
                    }
                }
                deps[k][t] = d;
            }
        }

        let mut jtj = DMatrix::<f64>::zeros(n_par, n_par);
        let mut jtr = DVector::<f64>::zeros(n_par);
        for t in start..t_len {
            for a in 0..n_par {
                jtr[a] += deps[a][t] * eps[t];
                for b in a..n_par {
                    jtj[(a, b)] += deps[a][t] * deps[b][t];
                }
            }
        }
        for a in 0..n_par {
            for b in 0..a {
                jtj[(a, b)] = jtj[(b, a)];
            }
        }
        let theta = DVector::from_fn(n_par, |k, _| if k < p { ar[k] } else { ma[k - p] });
        let grad = jtr + &theta * gamma;
        let mut hess = jtj + DMatrix::identity(n_par, n_par) * gamma;

        let delta = loop {
            match hess.clone().cholesky() {
                Some(ch) => break ch.solve(&(-&grad)),
                None => {
                    // Levenberg fallback on a degenerate normal matrix
                    let bump = 1e-8 * hess.trace().max(1.0);
                    hess += DMatrix::identity(n_par, n_par) * bump;
                }
            }
        };

        // step halving
        let mut accepted = false;
        let mut alpha = 1.0;
        for _ in 0..12 {
            let mut ar_new = ar.clone();
            let mut ma_new = ma.clone();
            for k in 0..p {
                ar_new[k] = ar[k] + alpha * delta[k];
            }
            for k in 0..q {
                ma_new[k] = ma[k] + alpha * delta[p + k];
            }
            reflect_roots(&mut ar_new);
            reflect_roots(&mut ma_new);
            let trial = css_objective(series, &ar_new, &ma_new, gamma);
            if trial < objective {
                let improvement = objective - trial;
                ar = ar_new;
                ma = ma_new;
                objective = trial;
                accepted = true;
                if improvement <= tolerance * objective.max(1e-300) {
                    converged = true;
                }
                break;
            }
            alpha *= 0.5;
        }
        if !accepted {
            // no descent direction left; current iterate is the optimum
            converged = true;
            break;
        }
        if converged {
            break;
        }
    }

    let residuals = css_residuals(series, &ar, &ma);
    let variance = residuals.iter().map(|v| v * v).sum::<f64>() / residuals.len().max(1) as f64;
    Ok(UnivariateArmaFit {
        ar,
        ma,
        variance,
        converged,
        iterations,
    })
}

/// Fit configuration shared by the G-VARMA and GP-VAR estimators.
#[derive(Debug, Clone)]
pub struct FitConfig {
    pub p: usize,
    pub q: usize,
    /// l2 coefficient penalty.
    pub gamma: f64,
    pub smoothing: SmoothingConfig,
    pub max_gn_iters: usize,
    pub gn_tolerance: f64,
}

impl FitConfig {
    pub fn new(p: usize, q: usize) -> Self {
        FitConfig {
            p,
            q,
            gamma: 0.0,
            smoothing: SmoothingConfig::none(),
            max_gn_iters: 50,
            gn_tolerance: 1e-8,
        }
    }

    pub fn with_gamma(mut self, gamma: f64) -> Self {
        self.gamma = gamma;
        self
    }

    pub fn with_smoothing(mut self, smoothing: SmoothingConfig) -> Self {
        self.smoothing = smoothing;
        self
    }
}

/// Per-frequency diagnostics of a G-VARMA fit.
#[derive(Debug, Clone, Serialize)]
pub struct FrequencyDiagnostic {
    pub index: usize,
    pub converged: bool,
    pub iterations: usize,
    pub residual_variance: f64,
}

/// Machine-readable fit report (serializes to the JSON fit-report format).
#[derive(Debug, Clone, Serialize, Default)]
pub struct FitReport {
    pub method: String,
    pub per_frequency: Vec<FrequencyDiagnostic>,
    /// Selected graph frequencies when a low-rank plan was used.
    pub selected: Option<Vec<usize>>,
    pub objective: Option<f64>,
    pub warnings: Vec<String>,
}

/// A fitted G-VARMA model plus its report.
#[derive(Debug, Clone)]
pub struct GvarmaFit {
    pub model: GVarmaModel,
    pub report: FitReport,
}

/// Rescale each frequency series of `x` to the marginal power of the
/// smoothed JPSD and recompose. This is how spectral smoothing enters both
/// fitting paths: the models are then fitted to the rescaled process.
pub fn smooth_rescale(
    basis: &SpectralBasis,
    x: &TimeVertexSignal,
    smoothing: &SmoothingConfig,
) -> Result<TimeVertexSignal> {
    smoothing.validate()?;
    if smoothing.is_none() {
        return Ok(x.clone());
    }
    let t_len = x.ncols();
    let tbasis = TemporalBasis::new(t_len)?;
    let jpsd = estimate_jpsd(basis, &tbasis, std::slice::from_ref(x))?;
    let smoothed = smooth_jpsd(&jpsd, &basis.eigenvalues, tbasis.frequencies(), smoothing)?;
    let mut xhat = basis.eigenvectors.transpose() * x;
    for n in 0..basis.n() {
        let raw: f64 = jpsd.values().row(n).sum();
        let target: f64 = smoothed.values().row(n).sum();
        if raw > 0.0 {
            let scale = (target / raw).sqrt();
            for t in 0..t_len {
                xhat[(n, t)] *= scale;
            }
        }
    }
    Ok(&basis.eigenvectors * xhat)
}

fn fit_gvarma_inner(
    basis: &SpectralBasis,
    x: &TimeVertexSignal,
    config: &FitConfig,
    mask: Option<&[usize]>,
) -> Result<GvarmaFit> {
    let t_len = x.ncols();
    let needed = 4 * config.p.max(config.q) + 4;
    if t_len < needed {
        return Err(Error::invalid(format!(
            "need T >= {needed} samples for P = {}, Q = {}, got {t_len}",
            config.p, config.q
        )));
    }
    config.smoothing.validate()?;
    let n = basis.n();
    let rescaled;
    let data = if config.smoothing.is_none() {
        x
    } else {
        rescaled = smooth_rescale(basis, x, &config.smoothing)?;
        &rescaled
    };
    let series = decouple(basis, data)?;
    let mut warnings = Vec::new();

    let fit_mask: Vec<bool> = match mask {
        None => vec![true; n],
        Some(sel) => {
            let mut m = vec![false; n];
            for &idx in sel {
                m[idx] = true;
            }
            m
        }
    };

    let mut ar_spectra = vec![DVector::<f64>::zeros(n); config.p];
    let mut ma_spectra = vec![DVector::<f64>::zeros(n); config.q];
    let mut innovation = DVector::<f64>::zeros(n);
    let mut per_frequency = Vec::with_capacity(n);
    for fs in &series {
        if !fit_mask[fs.index] {
            continue;
        }
        let fit = fit_arma_univariate(
            &fs.series,
            config.p,
            config.q,
            config.gamma,
            config.max_gn_iters,
            config.gn_tolerance,
        )?;
        if !fit.converged {
            warnings.push(format!(
                "frequency {} did not converge in {} iterations",
                fs.index, fit.iterations
            ));
        }
        for (k, &a) in fit.ar.iter().enumerate() {
            ar_spectra[k][fs.index] = a;
        }
        for (k, &b) in fit.ma.iter().enumerate() {
            ma_spectra[k][fs.index] = b;
        }
        innovation[fs.index] = fit.variance;
        per_frequency.push(FrequencyDiagnostic {
            index: fs.index,
            converged: fit.converged,
            iterations: fit.iterations,
            residual_variance: fit.variance,
        });
    }

    let model = GVarmaModel::new(
        n,
        ar_spectra,
        ma_spectra,
        InnovationCovariance::Spectral(innovation),
    )?;
    Ok(GvarmaFit {
        model,
        report: FitReport {
            method: "gvarma".into(),
            per_frequency,
            selected: mask.map(|s| s.to_vec()),
            objective: None,
            warnings,
        },
    })
}

/// Fit a G-VARMA model by decoupled per-frequency ARMA estimation,
/// optionally rescaling each series to a spectrally smoothed power first.
pub fn fit_gvarma(basis: &SpectralBasis, x: &TimeVertexSignal, config: &FitConfig) -> Result<GvarmaFit> {
    fit_gvarma_inner(basis, x, config, None)
}

/// The `K` graph frequencies kept by an optimal low-rank approximation.
#[derive(Debug, Clone)]
pub struct LowRankPlan {
    pub k: usize,
    /// Selected frequency indices, ascending.
    pub selected: Vec<usize>,
    /// `N x K` matrix of the selected eigenvector columns.
    pub partial_basis: DMatrix<f64>,
}

/// Source of the diagonal power used for frequency selection.
pub enum CovarianceInput<'a> {
    /// Dense covariance; the diagonal of `U^T Sigma U` is computed.
    Dense(&'a DMatrix<f64>),
    /// Precomputed per-frequency power.
    Spectrum(&'a DVector<f64>),
}

/// Pick the `K` graph frequencies with the largest diagonal power
/// `[U^T Sigma U]_nn` (ties to the smaller index). By the low-rank
/// optimality result this subset minimizes the expected Frobenius
/// approximation error among all rotations and subsets.
pub fn select_low_rank(basis: &SpectralBasis, input: CovarianceInput<'_>, k: usize) -> Result<LowRankPlan> {
    let n = basis.n();
    if k == 0 || k > n {
        return Err(Error::invalid(format!("K must be in 1..={n}, got {k}")));
    }
    let power: DVector<f64> = match input {
        CovarianceInput::Spectrum(s) => {
            if s.len() != n {
                return Err(Error::dims("spectrum length must be N"));
            }
            s.clone()
        }
        CovarianceInput::Dense(m) => {
            if m.nrows() != n || m.ncols() != n {
                return Err(Error::dims("covariance must be N x N"));
            }
            DVector::from_fn(n, |i, _| {
                let col = basis.eigenvectors.column(i);
                (col.transpose() * m * col)[(0, 0)]
            })
        }
    };
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| power[b].total_cmp(&power[a]).then(a.cmp(&b)));
    let mut selected: Vec<usize> = order.into_iter().take(k).collect();
    selected.sort_unstable();
    let mut partial = DMatrix::zeros(n, k);
    for (c, &idx) in selected.iter().enumerate() {
        partial.column_mut(c).copy_from(&basis.eigenvectors.column(idx));
    }
    Ok(LowRankPlan {
        k,
        selected,
        partial_basis: partial,
    })
}

/// Low-rank G-VARMA fit: estimate the per-frequency power from the sample
/// covariance, keep the top `K` frequencies, and fit only those series.
/// Discarded frequencies get zero dynamics and zero innovation power.
pub fn fit_gvarma_low_rank(
    basis: &SpectralBasis,
    x: &TimeVertexSignal,
    config: &FitConfig,
    k: usize,
) -> Result<(GvarmaFit, LowRankPlan)> {
    let t_len = x.ncols() as f64;
    let xhat = basis.eigenvectors.transpose() * x;
    let power = DVector::from_fn(basis.n(), |n, _| xhat.row(n).norm_squared() / t_len);
    let plan = select_low_rank(basis, CovarianceInput::Spectrum(&power), k)?;
    let fit = fit_gvarma_inner(basis, x, config, Some(&plan.selected))?;
    Ok((fit, plan))
}

/// A fitted GP-VAR model plus diagnostics.
#[derive(Debug, Clone)]
pub struct GpVarFit {
    pub model: GpVarModel,
    pub report: FitReport,
}

fn psi_index_set(p: usize, orders: &[usize]) -> Result<Vec<(usize, usize)>> {
    if orders.len() != p {
        return Err(Error::invalid(format!(
            "need one polynomial order per lag: got {} orders for P = {p}",
            orders.len()
        )));
    }
    let mut idx = Vec::new();
    for (pm1, &l_p) in orders.iter().enumerate() {
        for l in 0..=l_p {
            idx.push((l, pm1 + 1));
        }
    }
    Ok(idx)
}

fn laplacian_powers(l: &DMatrix<f64>, max_order: usize) -> Vec<DMatrix<f64>> {
    let n = l.nrows();
    let mut powers = vec![DMatrix::<f64>::identity(n, n)];
    for _ in 0..max_order {
        let next = powers.last().unwrap() * l;
        powers.push(next);
    }
    powers
}

/// Evaluate the quadratic one-step MSE form
/// `trace(R(0)) + 2 c^T psi + psi^T G psi` pieces shared by both GP-VAR
/// estimators.
fn gpvar_quadratic(
    laplacian: &DMatrix<f64>,
    autocorr: &Autocorrelation,
    index: &[(usize, usize)],
) -> (DMatrix<f64>, DVector<f64>, f64) {
    let max_order = index.iter().map(|&(l, _)| l).max().unwrap_or(0);
    let powers = laplacian_powers(laplacian, max_order);
    let dim = index.len();

    let mut gram = DMatrix::<f64>::zeros(dim, dim);
    let mut linear = DVector::<f64>::zeros(dim);
    for (u, &(lu, pu)) in index.iter().enumerate() {
        let sym = autocorr.lag(pu).clone() + autocorr.lag(pu).transpose();
        linear[u] = 0.5 * (&powers[lu] * sym).trace();
        for (v, &(lv, pv)) in index.iter().enumerate() {
            let r = autocorr.lag_signed(pv as isize - pu as isize);
            gram[(u, v)] = (&powers[lu] * r * &powers[lv]).trace();
        }
    }
    let gram = (&gram + gram.transpose()) * 0.5;
    let constant = autocorr.lag(0).trace();
    (gram, linear, constant)
}

fn objective_value(gram: &DMatrix<f64>, linear: &DVector<f64>, constant: f64, psi: &DVector<f64>) -> f64 {
    constant + 2.0 * linear.dot(psi) + (psi.transpose() * gram * psi)[(0, 0)]
}

fn psi_table(index: &[(usize, usize)], p: usize, orders: &[usize], flat: &DVector<f64>) -> Vec<Vec<f64>> {
    let mut table: Vec<Vec<f64>> = (0..p).map(|pm1| vec![0.0; orders[pm1] + 1]).collect();
    for (u, &(l, lag)) in index.iter().enumerate() {
        table[lag - 1][l] = flat[u];
    }
    table
}

/// Fit GP-VAR coefficients by minimizing the one-step prediction MSE, which
/// is quadratic in the coefficients given the autocorrelation matrices.
/// The achieved objective doubles as the innovation-power estimate.
pub fn fit_gpvar_mse(
    laplacian: &DMatrix<f64>,
    autocorr: &Autocorrelation,
    p: usize,
    orders: &[usize],
) -> Result<GpVarFit> {
    if autocorr.max_lag() < p {
        return Err(Error::invalid(format!(
            "autocorrelation must hold lags 0..={p}, has 0..={}",
            autocorr.max_lag()
        )));
    }
    let index = psi_index_set(p, orders)?;
    let mut warnings = Vec::new();
    if index.is_empty() {
        let model = GpVarModel::new(vec![], laplacian.clone(), autocorr.lag(0).trace().max(0.0), false)?;
        let objective = model.innovation_power();
        return Ok(GpVarFit {
            model,
            report: FitReport {
                method: "gpvar-mse".into(),
                objective: Some(objective),
                ..Default::default()
            },
        });
    }

    let (gram, linear, constant) = gpvar_quadratic(laplacian, autocorr, &index);
    let psi = if gram.norm() == 0.0 {
        // a process with no energy has nothing to fit
        DVector::zeros(index.len())
    } else {
        match gram.clone().cholesky() {
            Some(ch) => ch.solve(&(-&linear)),
            None => {
                warnings.push("gram matrix is singular; solved with ridge fallback".into());
                let dim = gram.nrows();
                let ridge = 1e-8 * gram.trace() / dim as f64;
                let bumped = &gram + DMatrix::identity(dim, dim) * ridge.max(1e-300);
                bumped
                    .cholesky()
                    .ok_or_else(|| Error::numerical("gram matrix is not positive semidefinite"))?
                    .solve(&(-&linear))
            }
        }
    };
    let objective = objective_value(&gram, &linear, constant, &psi).max(0.0);
    let table = psi_table(&index, p, orders, &psi);
    let model = GpVarModel::new(table, laplacian.clone(), objective, false)?;
    Ok(GpVarFit {
        model,
        report: FitReport {
            method: "gpvar-mse".into(),
            objective: Some(objective),
            warnings,
            ..Default::default()
        },
    })
}

/// Fit GP-VAR coefficients from the Yule-Walker moment equations
/// `R(i) + sum_p Psi_p R(i-p) = 0`, `i = 1..P`, solved in least squares
/// (minimum-norm when rank-deficient).
pub fn fit_gpvar_yule_walker(
    laplacian: &DMatrix<f64>,
    autocorr: &Autocorrelation,
    p: usize,
    orders: &[usize],
) -> Result<GpVarFit> {
    if autocorr.max_lag() < p {
        return Err(Error::invalid(format!(
            "autocorrelation must hold lags 0..={p}, has 0..={}",
            autocorr.max_lag()
        )));
    }
    let index = psi_index_set(p, orders)?;
    let mut warnings = Vec::new();
    if index.is_empty() {
        let model = GpVarModel::new(vec![], laplacian.clone(), autocorr.lag(0).trace().max(0.0), false)?;
        return Ok(GpVarFit {
            model,
            report: FitReport {
                method: "gpvar-yw".into(),
                ..Default::default()
            },
        });
    }

    let n = laplacian.nrows();
    let max_order = index.iter().map(|&(l, _)| l).max().unwrap_or(0);
    let powers = laplacian_powers(laplacian, max_order);
    let rows = p * n * n;
    let dim = index.len();
    let mut design = DMatrix::<f64>::zeros(rows, dim);
    let mut target = DVector::<f64>::zeros(rows);
    for i in 1..=p {
        let base = (i - 1) * n * n;
        let ri = autocorr.lag(i);
        for (flat, v) in ri.iter().enumerate() {
            target[base + flat] = -v;
        }
        for (u, &(l, lag)) in index.iter().enumerate() {
            let block = &powers[l] * autocorr.lag_signed(i as isize - lag as isize);
            for (flat, v) in block.iter().enumerate() {
                design[(base + flat, u)] = *v;
            }
        }
    }

    let svd = design.clone().svd(true, true);
    let smax = svd.singular_values.iter().cloned().fold(0.0f64, f64::max);
    let cutoff = 1e-10 * smax.max(1.0);
    let rank = svd.singular_values.iter().filter(|s| **s > cutoff).count();
    if rank < dim {
        warnings.push(format!(
            "yule-walker system is rank deficient ({rank}/{dim}); returning the minimum-norm solution"
        ));
    }
    let psi = svd
        .solve(&target, cutoff)
        .map_err(|e| Error::numerical(format!("yule-walker solve failed: {e}")))?;

    let (gram, linear, constant) = gpvar_quadratic(laplacian, autocorr, &index);
    let objective = objective_value(&gram, &linear, constant, &psi).max(0.0);
    let table = psi_table(&index, p, orders, &psi);
    let model = GpVarModel::new(table, laplacian.clone(), objective, false)?;
    Ok(GpVarFit {
        model,
        report: FitReport {
            method: "gpvar-yw".into(),
            objective: Some(objective),
            warnings,
            ..Default::default()
        },
    })
}
