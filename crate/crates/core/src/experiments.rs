//! Experiment orchestration: train/validation/test splits, the rNMSE
//! metric, cross-validation grid search, SI epidemic simulation, forecaster
//! comparison tables and the low-rank fitting trade-off sweep.

use std::ops::Range;
use std::time::Instant;

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, Distribution};

use crate::error::{Error, Result};
use crate::fitting::{
    estimate_autocorrelation, fit_arma_univariate, fit_gpvar_mse, fit_gvarma, fit_gvarma_low_rank,
    FitConfig,
};
use crate::graph::{Graph, SpectralBasis};
use crate::models::{gpvar_predict, gvarma_predict, GVarmaModel, GpVarModel};
use crate::stationarity::SmoothingConfig;
use crate::time_vertex::TimeVertexSignal;

/// Root normalized MSE between a truth sequence and its estimates:
/// `sqrt(sum_t ||est_t - truth_t||^2 / sum_t ||truth_t||^2)`.
pub fn rnmse(truth: &DMatrix<f64>, estimates: &DMatrix<f64>) -> Result<f64> {
    if truth.shape() != estimates.shape() {
        return Err(Error::dims(format!(
            "truth is {:?}, estimates are {:?}",
            truth.shape(),
            estimates.shape()
        )));
    }
    let den = truth.norm_squared();
    if den == 0.0 {
        return Err(Error::invalid("truth sequence has zero energy"));
    }
    let num = (estimates - truth).norm_squared();
    Ok((num / den).sqrt())
}

/// Temporal split fractions; all strictly positive and summing to one.
#[derive(Debug, Clone, Copy)]
pub struct SplitSpec {
    pub train_frac: f64,
    pub valid_frac: f64,
    pub test_frac: f64,
}

impl SplitSpec {
    pub fn new(train_frac: f64, valid_frac: f64, test_frac: f64) -> Result<Self> {
        for f in [train_frac, valid_frac, test_frac] {
            if !(f.is_finite() && f > 0.0) {
                return Err(Error::invalid("split fractions must be strictly positive"));
            }
        }
        if (train_frac + valid_frac + test_frac - 1.0).abs() > 1e-9 {
            return Err(Error::invalid("split fractions must sum to 1"));
        }
        Ok(SplitSpec {
            train_frac,
            valid_frac,
            test_frac,
        })
    }
}

/// Contiguous column ranges (train, validation, test): boundaries at
/// `floor(T * frac)` with the remainder going to test.
pub fn split(t_len: usize, spec: &SplitSpec) -> Result<(Range<usize>, Range<usize>, Range<usize>)> {
    let train_end = (t_len as f64 * spec.train_frac).floor() as usize;
    let valid_end = (t_len as f64 * (spec.train_frac + spec.valid_frac)).floor() as usize;
    if train_end == 0 || valid_end <= train_end || t_len <= valid_end {
        return Err(Error::invalid(format!(
            "series of length {t_len} is too short for the requested split"
        )));
    }
    Ok((0..train_end, train_end..valid_end, valid_end..t_len))
}

/// Scalar k-step ARMA prediction, the per-node building block of the
/// disjoint-ARMA baseline (same innovations convention as the G-VARMA
/// predictor).
fn scalar_arma_predict(series: &[f64], ar: &[f64], ma: &[f64], horizon: usize) -> Vec<f64> {
    let t_hist = series.len();
    let mut eps = vec![0.0; t_hist];
    for t in 0..t_hist {
        let mut pred = 0.0;
        for (pm1, &a) in ar.iter().enumerate() {
            if t > pm1 {
                pred -= a * series[t - pm1 - 1];
            }
        }
        for (qm1, &b) in ma.iter().enumerate() {
            if t > qm1 {
                pred += b * eps[t - qm1 - 1];
            }
        }
        eps[t] = series[t] - pred;
    }
    let mut future = vec![0.0; horizon];
    for j in 0..horizon {
        let mut v = 0.0;
        let idx = t_hist + j;
        for (pm1, &a) in ar.iter().enumerate() {
            let past = idx as isize - pm1 as isize - 1;
            let value = if past >= t_hist as isize {
                future[past as usize - t_hist]
            } else if past >= 0 {
                series[past as usize]
            } else {
                0.0
            };
            v -= a * value;
        }
        for (qm1, &b) in ma.iter().enumerate() {
            let past = idx as isize - qm1 as isize - 1;
            if past >= 0 && (past as usize) < t_hist {
                v += b * eps[past as usize];
            }
        }
        future[j] = v;
    }
    future
}

/// Any of the fitted forecasters, unified for evaluation.
enum Predictor {
    GVarma(GVarmaModel),
    GpVar(GpVarModel),
    /// Per-node `(ar, ma)` coefficient pairs.
    DisjointArma(Vec<(Vec<f64>, Vec<f64>)>),
}

impl Predictor {
    fn predict(&self, basis: &SpectralBasis, history: &DMatrix<f64>, horizon: usize) -> Result<DMatrix<f64>> {
        match self {
            Predictor::GVarma(m) => Ok(gvarma_predict(m, basis, history, horizon)?.predictions),
            Predictor::GpVar(m) => Ok(gpvar_predict(m, history, horizon)?.predictions),
            Predictor::DisjointArma(fits) => {
                let n = history.nrows();
                let mut out = DMatrix::zeros(n, horizon);
                for (node, (ar, ma)) in fits.iter().enumerate() {
                    let series: Vec<f64> = (0..history.ncols()).map(|t| history[(node, t)]).collect();
                    let f = scalar_arma_predict(&series, ar, ma, horizon);
                    for j in 0..horizon {
                        out[(node, j)] = f[j];
                    }
                }
                Ok(out)
            }
        }
    }

    fn min_history(&self) -> usize {
        match self {
            Predictor::GVarma(m) => m.p().max(m.q()).max(1),
            Predictor::GpVar(m) => m.p().max(1),
            Predictor::DisjointArma(fits) => fits
                .iter()
                .map(|(ar, ma)| ar.len().max(ma.len()))
                .max()
                .unwrap_or(1)
                .max(1),
        }
    }
}

/// Rolling per-step rNMSE of a predictor over the columns of `window`.
/// Forecast origins run over every column that leaves enough history; the
/// history always starts at column 0 of `x`.
fn rolling_rnmse(
    predictor: &Predictor,
    basis: &SpectralBasis,
    x: &DMatrix<f64>,
    window: Range<usize>,
    horizon: usize,
    mean: &DVector<f64>,
) -> Result<Vec<f64>> {
    let mut num = vec![0.0; horizon];
    let mut den = vec![0.0; horizon];
    let first_origin = window.start.max(predictor.min_history());
    for origin in first_origin..window.end {
        // predict from everything before `origin`
        let history = x.columns(0, origin).into_owned();
        let preds = predictor.predict(basis, &history, horizon)?;
        for h in 1..=horizon {
            let target = origin + h - 1;
            if target >= window.end {
                break;
            }
            let truth = x.column(target) + mean;
            let est = preds.column(h - 1) + mean;
            num[h - 1] += (est.clone() - truth.clone()).norm_squared();
            den[h - 1] += truth.norm_squared();
        }
    }
    let mut out = Vec::with_capacity(horizon);
    for h in 0..horizon {
        if den[h] == 0.0 {
            return Err(Error::invalid(format!(
                "no evaluation targets for step {} in the window",
                h + 1
            )));
        }
        out.push((num[h] / den[h]).sqrt());
    }
    Ok(out)
}

/// One grid-search cell.
#[derive(Debug, Clone, PartialEq)]
pub enum Candidate {
    GVarma { p: usize, q: usize, gamma: f64, sigma_g: f64 },
    GpVar { p: usize, l: usize, sigma_g: f64 },
}

impl Candidate {
    fn order_sum(&self) -> usize {
        match self {
            Candidate::GVarma { p, q, .. } => p + q,
            Candidate::GpVar { p, .. } => *p,
        }
    }

    fn gamma(&self) -> f64 {
        match self {
            Candidate::GVarma { gamma, .. } => *gamma,
            Candidate::GpVar { .. } => 0.0,
        }
    }

    fn smoothing(&self) -> SmoothingConfig {
        let sigma_g = match self {
            Candidate::GVarma { sigma_g, .. } => *sigma_g,
            Candidate::GpVar { sigma_g, .. } => *sigma_g,
        };
        SmoothingConfig { sigma_g, sigma_t: 0.0 }
    }

    pub fn label(&self) -> String {
        match self {
            Candidate::GVarma { p, q, gamma, sigma_g } => {
                format!("gvarma(p={p},q={q},gamma={gamma},sigma_g={sigma_g})")
            }
            Candidate::GpVar { p, l, sigma_g } => format!("gpvar(p={p},l={l},sigma_g={sigma_g})"),
        }
    }
}

/// Either family of fitted model.
#[derive(Debug, Clone)]
pub enum FittedModel {
    GVarma(GVarmaModel),
    GpVar(GpVarModel),
}

fn fit_candidate(
    candidate: &Candidate,
    basis: &SpectralBasis,
    data: &DMatrix<f64>,
) -> Result<FittedModel> {
    match candidate {
        Candidate::GVarma { p, q, gamma, .. } => {
            let cfg = FitConfig::new(*p, *q)
                .with_gamma(*gamma)
                .with_smoothing(candidate.smoothing());
            Ok(FittedModel::GVarma(fit_gvarma(basis, data, &cfg)?.model))
        }
        Candidate::GpVar { p, l, .. } => {
            let smoothing = candidate.smoothing();
            let data = if smoothing.is_none() {
                data.clone()
            } else {
                crate::fitting::smooth_rescale(basis, data, &smoothing)?
            };
            let r = estimate_autocorrelation(&data, *p)?;
            let orders = vec![*l; *p];
            Ok(FittedModel::GpVar(
                fit_gpvar_mse(&basis.laplacian, &r, *p, &orders)?.model,
            ))
        }
    }
}

fn into_predictor(model: FittedModel) -> Predictor {
    match model {
        FittedModel::GVarma(m) => Predictor::GVarma(m),
        FittedModel::GpVar(m) => Predictor::GpVar(m),
    }
}

/// Score of one candidate on the validation window.
#[derive(Debug, Clone)]
pub struct CandidateScore {
    pub candidate: Candidate,
    /// Mean rNMSE over steps `1..=horizon`, or None when the fit failed.
    pub validation_score: Option<f64>,
    pub per_step: Vec<f64>,
    pub error: Option<String>,
}

/// Outcome of a grid search: the winning candidate refitted on
/// train+validation, its per-step test scores, and the full score table.
#[derive(Debug, Clone)]
pub struct GridSearchOutcome {
    pub best: Candidate,
    pub model: FittedModel,
    pub test_rnmse: Vec<f64>,
    pub scores: Vec<CandidateScore>,
}

/// Fit every candidate on the training window, select the one with the
/// lowest mean validation rNMSE over steps `1..=horizon` (ties: fewer
/// orders, then smaller gamma, then listing order), refit it on
/// train+validation and score it on the test window.
///
/// The in-sample per-node mean is subtracted before any fitting and
/// restored in every evaluation.
pub fn grid_search(
    basis: &SpectralBasis,
    x: &TimeVertexSignal,
    candidates: &[Candidate],
    spec: &SplitSpec,
    horizon: usize,
) -> Result<GridSearchOutcome> {
    if candidates.is_empty() {
        return Err(Error::invalid("empty candidate grid"));
    }
    if horizon == 0 {
        return Err(Error::invalid("horizon must be positive"));
    }
    let (train, valid, test) = split(x.ncols(), spec)?;

    // in-sample mean: per-node, over train + validation
    let in_sample = x.columns(0, valid.end).into_owned();
    let mean = DVector::from_fn(x.nrows(), |i, _| in_sample.row(i).mean());
    let centered = DMatrix::from_fn(x.nrows(), x.ncols(), |i, t| x[(i, t)] - mean[i]);

    let train_data = centered.columns(0, train.end).into_owned();
    let mut scores = Vec::with_capacity(candidates.len());
    for candidate in candidates {
        let outcome = fit_candidate(candidate, basis, &train_data).and_then(|model| {
            let predictor = into_predictor(model);
            rolling_rnmse(&predictor, basis, &centered, valid.clone(), horizon, &mean)
        });
        match outcome {
            Ok(per_step) => {
                let score = per_step.iter().sum::<f64>() / horizon as f64;
                scores.push(CandidateScore {
                    candidate: candidate.clone(),
                    validation_score: Some(score),
                    per_step,
                    error: None,
                });
            }
            Err(e) => scores.push(CandidateScore {
                candidate: candidate.clone(),
                validation_score: None,
                per_step: vec![],
                error: Some(e.to_string()),
            }),
        }
    }

    let best_index = scores
        .iter()
        .enumerate()
        .filter(|(_, s)| s.validation_score.is_some())
        .min_by(|(ia, a), (ib, b)| {
            let sa = a.validation_score.unwrap();
            let sb = b.validation_score.unwrap();
            sa.total_cmp(&sb)
                .then(a.candidate.order_sum().cmp(&b.candidate.order_sum()))
                .then(a.candidate.gamma().total_cmp(&b.candidate.gamma()))
                .then(ia.cmp(ib))
        })
        .map(|(i, _)| i)
        .ok_or_else(|| {
            let detail: Vec<String> = scores
                .iter()
                .map(|s| format!("{}: {}", s.candidate.label(), s.error.as_deref().unwrap_or("?")))
                .collect();
            Error::numerical(format!("every grid cell failed: {}", detail.join("; ")))
        })?;

    let best = scores[best_index].candidate.clone();
    // refit on the whole in-sample span
    let in_sample_centered = centered.columns(0, valid.end).into_owned();
    let model = fit_candidate(&best, basis, &in_sample_centered)?;
    let predictor = into_predictor(model.clone());
    let test_rnmse = rolling_rnmse(&predictor, basis, &centered, test, horizon, &mean)?;

    Ok(GridSearchOutcome {
        best,
        model,
        test_rnmse,
        scores,
    })
}

/// SI epidemic scenario parameters.
#[derive(Debug, Clone)]
pub struct SiConfig {
    /// Per-day infection probability per infected contact, scaled by the
    /// edge weight.
    pub infection_rate: f64,
    /// Individuals living at each node.
    pub population: u64,
    /// Days an individual stays infected before reverting to susceptible.
    pub recovery_days: usize,
    /// Simulated horizon in days.
    pub horizon: usize,
    /// Nodes whose whole population starts infected.
    pub initial_infected: Vec<usize>,
    pub seed: u64,
}

impl SiConfig {
    fn validate(&self, n: usize) -> Result<()> {
        if !(0.0..=1.0).contains(&self.infection_rate) {
            return Err(Error::invalid("infection rate must be in [0, 1]"));
        }
        if self.population == 0 {
            return Err(Error::invalid("population must be at least 1"));
        }
        if self.recovery_days == 0 {
            return Err(Error::invalid("recovery must take at least 1 day"));
        }
        if self.horizon == 0 {
            return Err(Error::invalid("horizon must be at least 1 day"));
        }
        for &node in &self.initial_infected {
            if node >= n {
                return Err(Error::invalid(format!("seed node {node} out of range")));
            }
        }
        Ok(())
    }
}

/// Discrete-day stochastic susceptible-infected(-susceptible) simulation.
///
/// Each infected individual at node `j` independently infects each
/// susceptible individual at node `i` with per-day probability
/// `rate * W_ij` (self-contacts have weight 1); infected individuals
/// revert to susceptible after `recovery_days` days. Output entry `(n, t)`
/// is the infected fraction at node `n` on day `t` (day 0 is the seeded
/// initial state).
pub fn simulate_si(graph: &Graph, config: &SiConfig) -> Result<TimeVertexSignal> {
    let n = graph.n_nodes();
    config.validate(n)?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let w = graph.adjacency();

    // infected[node][age] = count infected `age` days ago
    let mut infected: Vec<Vec<u64>> = vec![vec![0; config.recovery_days]; n];
    let mut susceptible: Vec<u64> = vec![config.population; n];
    for &node in &config.initial_infected {
        infected[node][0] = config.population;
        susceptible[node] = 0;
    }

    let mut out = DMatrix::zeros(n, config.horizon);
    let record = |day: usize, infected: &[Vec<u64>], out: &mut DMatrix<f64>| {
        for node in 0..n {
            let count: u64 = infected[node].iter().sum();
            out[(node, day)] = count as f64 / config.population as f64;
        }
    };
    record(0, &infected, &mut out);

    for day in 1..config.horizon {
        let counts: Vec<u64> = (0..n).map(|i| infected[i].iter().sum()).collect();

        // escape probability per susceptible individual at node i
        let mut p_infect = vec![0.0f64; n];
        for i in 0..n {
            let mut log_escape = 0.0f64;
            if counts[i] > 0 {
                log_escape += counts[i] as f64 * (1.0 - config.infection_rate).max(0.0).ln();
            }
            for j in 0..n {
                let weight = w[(i, j)];
                if weight > 0.0 && counts[j] > 0 {
                    let contact = (config.infection_rate * weight).clamp(0.0, 1.0);
                    if contact >= 1.0 {
                        log_escape = f64::NEG_INFINITY;
                    } else {
                        log_escape += counts[j] as f64 * (1.0 - contact).ln();
                    }
                }
            }
            p_infect[i] = (1.0 - log_escape.exp()).clamp(0.0, 1.0);
        }

        // recoveries first, then new infections from yesterday's counts
        for i in 0..n {
            let recovered = infected[i][config.recovery_days - 1];
            for age in (1..config.recovery_days).rev() {
                infected[i][age] = infected[i][age - 1];
            }
            infected[i][0] = 0;
            susceptible[i] += recovered;
        }
        for i in 0..n {
            let new_cases = if p_infect[i] <= 0.0 || susceptible[i] == 0 {
                0
            } else if p_infect[i] >= 1.0 {
                susceptible[i]
            } else {
                Binomial::new(susceptible[i], p_infect[i])
                    .map_err(|e| Error::numerical(format!("binomial draw failed: {e}")))?
                    .sample(&mut rng)
            };
            infected[i][0] = new_cases;
            susceptible[i] -= new_cases;
        }
        record(day, &infected, &mut out);
    }
    Ok(out)
}

/// Fixed configurations for the four compared forecasters.
#[derive(Debug, Clone)]
pub struct ForecasterConfigs {
    pub gvarma: Candidate,
    pub gpvar: Candidate,
    /// Temporal order of the restricted GP-VAR baseline (`L_p = p`).
    pub rgpvar_p: usize,
    /// Per-node disjoint ARMA orders and penalty: `(p, q, gamma)`.
    pub arma: (usize, usize, f64),
}

/// One row of the long-format rNMSE table.
#[derive(Debug, Clone)]
pub struct EvalRow {
    pub method: String,
    /// 0 is the in-sample one-step sanity row; 1..=H are test steps.
    pub step: usize,
    pub rnmse: f64,
}

/// Fit G-VARMA, GP-VAR, restricted GP-VAR and disjoint per-node ARMA on the
/// in-sample window and score per-step test rNMSE for each, plus a step-0
/// in-sample sanity row.
pub fn evaluate_forecasters(
    basis: &SpectralBasis,
    x: &TimeVertexSignal,
    configs: &ForecasterConfigs,
    spec: &SplitSpec,
    horizon: usize,
) -> Result<Vec<EvalRow>> {
    if horizon == 0 {
        return Err(Error::invalid("horizon must be positive"));
    }
    let (train, valid, test) = split(x.ncols(), spec)?;
    let in_sample = x.columns(0, valid.end).into_owned();
    let mean = DVector::from_fn(x.nrows(), |i, _| in_sample.row(i).mean());
    let centered = DMatrix::from_fn(x.nrows(), x.ncols(), |i, t| x[(i, t)] - mean[i]);
    let fit_data = centered.columns(0, valid.end).into_owned();

    let mut predictors: Vec<(String, Predictor)> = Vec::new();
    predictors.push((
        "gvarma".into(),
        into_predictor(fit_candidate(&configs.gvarma, basis, &fit_data)?),
    ));
    predictors.push((
        "gpvar".into(),
        into_predictor(fit_candidate(&configs.gpvar, basis, &fit_data)?),
    ));
    {
        let p = configs.rgpvar_p;
        let r = estimate_autocorrelation(&fit_data, p)?;
        let orders: Vec<usize> = (1..=p).collect();
        let fit = fit_gpvar_mse(&basis.laplacian, &r, p, &orders)?;
        predictors.push(("rgpvar".into(), Predictor::GpVar(fit.model)));
    }
    {
        let (p, q, gamma) = configs.arma;
        let mut fits = Vec::with_capacity(x.nrows());
        for node in 0..x.nrows() {
            let series = fit_data.row(node).transpose();
            let fit = fit_arma_univariate(&series, p, q, gamma, 50, 1e-8)?;
            fits.push((fit.ar, fit.ma));
        }
        predictors.push(("arma".into(), Predictor::DisjointArma(fits)));
    }

    let mut rows = Vec::new();
    for (name, predictor) in &predictors {
        // step 0: in-sample one-step sanity score on the training window
        let insample = rolling_rnmse(predictor, basis, &centered, train.clone(), 1, &mean)?;
        rows.push(EvalRow {
            method: name.clone(),
            step: 0,
            rnmse: insample[0],
        });
        let test_scores = rolling_rnmse(predictor, basis, &centered, test.clone(), horizon, &mean)?;
        for (h, score) in test_scores.iter().enumerate() {
            rows.push(EvalRow {
                method: name.clone(),
                step: h + 1,
                rnmse: *score,
            });
        }
    }
    Ok(rows)
}

/// One point of the low-rank fitting trade-off sweep.
#[derive(Debug, Clone)]
pub struct LowRankSweepPoint {
    pub k: usize,
    pub fit_seconds: f64,
    /// Wall-clock speed-up of the rank-`k` fit relative to the full fit.
    pub speedup: f64,
    /// One-step test rNMSE of the rank-`k` model.
    pub rnmse: f64,
    /// rNMSE minus the full-rank rNMSE.
    pub rnmse_loss: f64,
}

/// Sweep the number of retained graph frequencies and report fit time and
/// prediction accuracy against the full-rank fit. Fits happen on the
/// in-sample window; rNMSE is one-step-ahead over the test window.
pub fn low_rank_tradeoff(
    basis: &SpectralBasis,
    x: &TimeVertexSignal,
    config: &FitConfig,
    ks: &[usize],
    spec: &SplitSpec,
    timing_reps: usize,
) -> Result<Vec<LowRankSweepPoint>> {
    if ks.is_empty() {
        return Err(Error::invalid("empty K sweep"));
    }
    let reps = timing_reps.max(1);
    let (_, valid, test) = split(x.ncols(), spec)?;
    let in_sample = x.columns(0, valid.end).into_owned();
    let mean = DVector::from_fn(x.nrows(), |i, _| in_sample.row(i).mean());
    let centered = DMatrix::from_fn(x.nrows(), x.ncols(), |i, t| x[(i, t)] - mean[i]);
    let fit_data = centered.columns(0, valid.end).into_owned();

    let time_fit = |k: usize| -> Result<(FittedModel, f64)> {
        let mut best = f64::INFINITY;
        let mut model = None;
        for _ in 0..reps {
            let start = Instant::now();
            let (fit, _) = fit_gvarma_low_rank(basis, &fit_data, config, k)?;
            best = best.min(start.elapsed().as_secs_f64());
            model = Some(fit.model);
        }
        Ok((FittedModel::GVarma(model.unwrap()), best))
    };

    let n = basis.n();
    let (full_model, full_time) = time_fit(n)?;
    let full_rnmse = rolling_rnmse(
        &into_predictor(full_model),
        basis,
        &centered,
        test.clone(),
        1,
        &mean,
    )?[0];

    let mut out = Vec::with_capacity(ks.len());
    for &k in ks {
        let (model, seconds) = time_fit(k)?;
        let score = rolling_rnmse(&into_predictor(model), basis, &centered, test.clone(), 1, &mean)?[0];
        out.push(LowRankSweepPoint {
            k,
            fit_seconds: seconds,
            speedup: full_time / seconds,
            rnmse: score,
            rnmse_loss: score - full_rnmse,
        });
    }
    Ok(out)
}
