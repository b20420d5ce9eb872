//! Command-line interface: simulate processes on graphs, fit G-VARMA and
//! GP-VAR models, predict, track from partial observations, evaluate
//! forecasters and run cross-validation grid searches.
//!
//! Exit codes: 0 success, 2 invalid input, 3 numerical failure.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use graphts_core::error::Error;
use graphts_core::experiments::{
    evaluate_forecasters, grid_search, simulate_si, Candidate, FittedModel, ForecasterConfigs,
    SiConfig, SplitSpec,
};
use graphts_core::fitting::{
    estimate_autocorrelation, fit_gpvar_mse, fit_gvarma, fit_gvarma_low_rank, smooth_rescale,
    FitConfig,
};
use graphts_core::graph::{Normalization, SpectralBasis};
use graphts_core::io;
use graphts_core::models::{gpvar_predict, gpvar_simulate, gvarma_predict, gvarma_simulate};
use graphts_core::stationarity::{synth_jwss, SmoothingConfig};
use graphts_core::time_vertex::TemporalBasis;
use graphts_core::tracking::{
    build_state_space_gpvar, build_state_space_gvarma, track, ObservationModel, ObservationStep,
};

#[derive(Parser)]
#[command(name = "graphts", version, about = "Forecast and track time series on graphs")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Build graphs from point coordinates
    #[command(subcommand)]
    Graph(GraphCommand),
    /// Generate synthetic data on a graph
    #[command(subcommand)]
    Simulate(SimulateCommand),
    /// Fit a model to a signal
    #[command(subcommand)]
    Fit(FitCommand),
    /// k-step-ahead prediction from a fitted model
    Predict(PredictArgs),
    /// Kalman tracking from partial observations
    Track(TrackArgs),
    /// Compare the built-in forecasters on one dataset
    Eval(EvalArgs),
    /// Cross-validation grid search over model orders
    Gridsearch(GridSearchArgs),
}

#[derive(Subcommand)]
enum GraphCommand {
    /// k-nearest-neighbor graph with Gaussian-kernel edge weights
    Knn {
        /// Coordinates CSV (header node,x,y[,z])
        #[arg(long)]
        coords: PathBuf,
        /// Number of nearest neighbors
        #[arg(long, default_value_t = 10)]
        k: usize,
        /// Output edge-list CSV
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Args)]
struct GraphArgs {
    /// Graph edge-list CSV (header i,j,weight)
    #[arg(long)]
    graph: PathBuf,
    /// Laplacian normalization: combinatorial or unit-spectral-norm
    #[arg(long, default_value = "unit-spectral-norm")]
    normalization: String,
}

impl GraphArgs {
    fn basis(&self) -> Result<SpectralBasis, Error> {
        let graph = io::read_graph_csv(&self.graph)?;
        let normalization: Normalization = self.normalization.parse()?;
        SpectralBasis::from_graph(&graph, normalization)
    }
}

#[derive(Subcommand)]
enum SimulateCommand {
    /// Draw one realization of a JWSS process with a given JPSD
    Jwss {
        #[command(flatten)]
        graph: GraphArgs,
        /// JPSD CSV (header lambda_index,omega_index,power)
        #[arg(long)]
        jpsd: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Output signal CSV
        #[arg(long)]
        out: PathBuf,
    },
    /// Simulate a GP-VAR model from a model file
    Gpvar {
        #[command(flatten)]
        graph: GraphArgs,
        /// Model JSON produced by `fit gpvar` (or written by hand)
        #[arg(long)]
        model: PathBuf,
        /// Number of emitted time steps
        #[arg(long)]
        steps: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Samples discarded before the emitted window
        #[arg(long, default_value_t = 200)]
        burn_in: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Simulate a G-VARMA model from a model file
    Gvarma {
        #[command(flatten)]
        graph: GraphArgs,
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        steps: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 200)]
        burn_in: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Stochastic susceptible-infected epidemic over the graph
    Si {
        #[command(flatten)]
        graph: GraphArgs,
        /// Per-day infection probability per contact
        #[arg(long, default_value_t = 1e-3)]
        rate: f64,
        /// Individuals per node
        #[arg(long, default_value_t = 60)]
        population: u64,
        /// Days until an infected individual reverts to susceptible
        #[arg(long, default_value_t = 12)]
        recovery: usize,
        /// Simulated days
        #[arg(long, default_value_t = 122)]
        steps: usize,
        /// Initially infected node (repeatable)
        #[arg(long = "seed-node", default_values_t = [0usize])]
        seed_nodes: Vec<usize>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Subcommand)]
enum FitCommand {
    /// Decoupled per-frequency ARMA fit of a G-VARMA model
    Gvarma {
        #[command(flatten)]
        graph: GraphArgs,
        /// Signal CSV (header node,t1,...,tT)
        #[arg(long)]
        signal: PathBuf,
        /// AR order P
        #[arg(long, default_value_t = 2)]
        p: usize,
        /// MA order Q
        #[arg(long, default_value_t = 0)]
        q: usize,
        /// l2 coefficient penalty
        #[arg(long, default_value_t = 0.0)]
        gamma: f64,
        /// Gaussian width of the graph-frequency JPSD smoothing
        #[arg(long = "sigma-g", default_value_t = 0.0)]
        sigma_g: f64,
        /// Keep only the K most powerful graph frequencies
        #[arg(long = "low-rank")]
        low_rank: Option<usize>,
        /// Output model JSON
        #[arg(long)]
        out: PathBuf,
        /// Optional fit report JSON
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// GP-VAR coefficients by one-step MSE minimization
    Gpvar {
        #[command(flatten)]
        graph: GraphArgs,
        #[arg(long)]
        signal: PathBuf,
        /// Temporal order P
        #[arg(long, default_value_t = 2)]
        p: usize,
        /// Laplacian polynomial order L (same for every lag)
        #[arg(long, default_value_t = 2)]
        l: usize,
        #[arg(long = "sigma-g", default_value_t = 0.0)]
        sigma_g: f64,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        report: Option<PathBuf>,
    },
}

#[derive(Args)]
struct PredictArgs {
    #[command(flatten)]
    graph: GraphArgs,
    /// History signal CSV
    #[arg(long)]
    signal: PathBuf,
    /// Fitted model JSON
    #[arg(long)]
    model: PathBuf,
    /// Prediction horizon
    #[arg(long, default_value_t = 5)]
    horizon: usize,
    /// Output forecast CSV (one column per step)
    #[arg(long)]
    out: PathBuf,
    /// Optional per-step predicted-MSE CSV
    #[arg(long = "mse-out")]
    mse_out: Option<PathBuf>,
}

#[derive(Args)]
struct TrackArgs {
    #[command(flatten)]
    graph: GraphArgs,
    /// Observation CSV (header t,node,value; absent pairs unobserved)
    #[arg(long)]
    obs: PathBuf,
    /// Fitted model JSON (Q = 0)
    #[arg(long)]
    model: PathBuf,
    /// Number of tracked steps (default: last observed time)
    #[arg(long)]
    steps: Option<usize>,
    /// Observation noise variance; 0 picks 1e-6 x mean observed power
    #[arg(long, default_value_t = 0.0)]
    noise: f64,
    /// Output CSV of filtered estimates
    #[arg(long)]
    out: PathBuf,
    /// Optional CSV of open-loop (pre-update) estimates
    #[arg(long = "predicted-out")]
    predicted_out: Option<PathBuf>,
    /// Optional CSV of per-step covariance traces
    #[arg(long = "trace-out")]
    trace_out: Option<PathBuf>,
}

#[derive(Args)]
struct EvalArgs {
    #[command(flatten)]
    graph: GraphArgs,
    #[arg(long)]
    signal: PathBuf,
    /// Train,validation,test fractions
    #[arg(long, default_value = "0.35,0.15,0.5")]
    split: String,
    #[arg(long, default_value_t = 5)]
    horizon: usize,
    #[arg(long = "gvarma-p", default_value_t = 2)]
    gvarma_p: usize,
    #[arg(long = "gvarma-q", default_value_t = 0)]
    gvarma_q: usize,
    #[arg(long, default_value_t = 0.0)]
    gamma: f64,
    #[arg(long = "sigma-g", default_value_t = 0.0)]
    sigma_g: f64,
    #[arg(long = "gpvar-p", default_value_t = 2)]
    gpvar_p: usize,
    #[arg(long = "gpvar-l", default_value_t = 2)]
    gpvar_l: usize,
    #[arg(long = "rgpvar-p", default_value_t = 2)]
    rgpvar_p: usize,
    #[arg(long = "arma-p", default_value_t = 2)]
    arma_p: usize,
    #[arg(long = "arma-q", default_value_t = 0)]
    arma_q: usize,
    /// Output CSV (method,step,rnmse)
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct GridSearchArgs {
    #[command(flatten)]
    graph: GraphArgs,
    #[arg(long)]
    signal: PathBuf,
    /// Model family: gvarma or gpvar
    #[arg(long)]
    family: String,
    /// Comma-separated P grid
    #[arg(long = "p-grid", default_value = "1,2,3")]
    p_grid: String,
    /// Comma-separated Q grid (gvarma)
    #[arg(long = "q-grid", default_value = "0")]
    q_grid: String,
    /// Comma-separated L grid (gpvar)
    #[arg(long = "l-grid", default_value = "1,2")]
    l_grid: String,
    /// Comma-separated gamma grid (gvarma)
    #[arg(long = "gamma-grid", default_value = "0")]
    gamma_grid: String,
    /// Comma-separated sigma_g grid
    #[arg(long = "sigma-g-grid", default_value = "0")]
    sigma_g_grid: String,
    #[arg(long, default_value = "0.35,0.15,0.5")]
    split: String,
    #[arg(long, default_value_t = 5)]
    horizon: usize,
    /// Output score-table CSV
    #[arg(long)]
    out: PathBuf,
    /// Optional per-step test-score CSV for the winner
    #[arg(long = "test-out")]
    test_out: Option<PathBuf>,
    /// Optional model JSON for the refit winner
    #[arg(long = "model-out")]
    model_out: Option<PathBuf>,
}

fn parse_split(text: &str) -> Result<SplitSpec, Error> {
    let parts: Vec<&str> = text.split(',').collect();
    if parts.len() != 3 {
        return Err(Error::invalid("--split needs three comma-separated fractions"));
    }
    let mut vals = [0.0; 3];
    for (i, p) in parts.iter().enumerate() {
        vals[i] = p
            .trim()
            .parse()
            .map_err(|_| Error::invalid(format!("cannot parse split fraction '{p}'")))?;
    }
    SplitSpec::new(vals[0], vals[1], vals[2])
}

fn parse_grid<T: std::str::FromStr>(text: &str, what: &str) -> Result<Vec<T>, Error> {
    let mut out = Vec::new();
    for part in text.split(',') {
        out.push(
            part.trim()
                .parse()
                .map_err(|_| Error::invalid(format!("cannot parse {what} value '{part}'")))?,
        );
    }
    if out.is_empty() {
        return Err(Error::invalid(format!("empty {what} grid")));
    }
    Ok(out)
}

fn write_table(path: &PathBuf, header: &str, rows: &[String]) -> Result<(), Error> {
    let mut out = String::from(header);
    out.push('\n');
    for row in rows {
        out.push_str(row);
        out.push('\n');
    }
    std::fs::write(path, out)?;
    Ok(())
}

fn run(cli: Cli) -> Result<(), Error> {
    match cli.command {
        Command::Graph(cmd) => match cmd {
            GraphCommand::Knn { coords, k, out } => {
                let points = io::read_coords_csv(&coords)?;
                let graph = graphts_core::graph::build_knn_graph(&points, k)?;
                io::write_graph_csv(&out, &graph)?;
            }
        },
        Command::Simulate(sim) => match sim {
            SimulateCommand::Jwss {
                graph,
                jpsd,
                seed,
                out,
            } => {
                let basis = graph.basis()?;
                let jpsd = io::read_jpsd_csv(&jpsd)?;
                let tbasis = TemporalBasis::new(jpsd.shape().1)?;
                let x = synth_jwss(&basis, &tbasis, &jpsd, seed)?;
                io::write_signal_csv(&out, &x)?;
            }
            SimulateCommand::Gpvar {
                graph,
                model,
                steps,
                seed,
                burn_in,
                out,
            } => {
                let basis = graph.basis()?;
                let model = match io::load_model(&model, &basis)? {
                    io::StoredModel::GpVar(m) => m,
                    io::StoredModel::GVarma(_) => {
                        return Err(Error::invalid("expected a gpvar model file"))
                    }
                };
                let x = gpvar_simulate(&model, steps, seed, burn_in)?;
                io::write_signal_csv(&out, &x)?;
            }
            SimulateCommand::Gvarma {
                graph,
                model,
                steps,
                seed,
                burn_in,
                out,
            } => {
                let basis = graph.basis()?;
                let model = match io::load_model(&model, &basis)? {
                    io::StoredModel::GVarma(m) => m,
                    io::StoredModel::GpVar(_) => {
                        return Err(Error::invalid("expected a gvarma model file"))
                    }
                };
                let x = gvarma_simulate(&model, &basis, steps, seed, burn_in)?;
                io::write_signal_csv(&out, &x)?;
            }
            SimulateCommand::Si {
                graph,
                rate,
                population,
                recovery,
                steps,
                seed_nodes,
                seed,
                out,
            } => {
                let g = io::read_graph_csv(&graph.graph)?;
                let config = SiConfig {
                    infection_rate: rate,
                    population,
                    recovery_days: recovery,
                    horizon: steps,
                    initial_infected: seed_nodes,
                    seed,
                };
                let x = simulate_si(&g, &config)?;
                io::write_signal_csv(&out, &x)?;
            }
        },
        Command::Fit(fit) => match fit {
            FitCommand::Gvarma {
                graph,
                signal,
                p,
                q,
                gamma,
                sigma_g,
                low_rank,
                out,
                report,
            } => {
                let basis = graph.basis()?;
                let x = io::read_signal_csv(&signal)?;
                let cfg = FitConfig::new(p, q)
                    .with_gamma(gamma)
                    .with_smoothing(SmoothingConfig {
                        sigma_g,
                        sigma_t: 0.0,
                    });
                let fit = match low_rank {
                    Some(k) => fit_gvarma_low_rank(&basis, &x, &cfg, k)?.0,
                    None => fit_gvarma(&basis, &x, &cfg)?,
                };
                for warning in &fit.report.warnings {
                    eprintln!("warning: {warning}");
                }
                io::save_gvarma_model(&out, &fit.model, &basis)?;
                if let Some(report_path) = report {
                    io::save_fit_report(&report_path, &fit.report)?;
                }
            }
            FitCommand::Gpvar {
                graph,
                signal,
                p,
                l,
                sigma_g,
                out,
                report,
            } => {
                let basis = graph.basis()?;
                let x = io::read_signal_csv(&signal)?;
                let smoothing = SmoothingConfig {
                    sigma_g,
                    sigma_t: 0.0,
                };
                let data = if smoothing.is_none() {
                    x
                } else {
                    smooth_rescale(&basis, &x, &smoothing)?
                };
                let r = estimate_autocorrelation(&data, p)?;
                let orders = vec![l; p];
                let fit = fit_gpvar_mse(&basis.laplacian, &r, p, &orders)?;
                for warning in &fit.report.warnings {
                    eprintln!("warning: {warning}");
                }
                io::save_gpvar_model(&out, &fit.model, basis.normalization)?;
                if let Some(report_path) = report {
                    io::save_fit_report(&report_path, &fit.report)?;
                }
            }
        },
        Command::Predict(args) => {
            let basis = args.graph.basis()?;
            let history = io::read_signal_csv(&args.signal)?;
            let forecast = match io::load_model(&args.model, &basis)? {
                io::StoredModel::GVarma(m) => gvarma_predict(&m, &basis, &history, args.horizon)?,
                io::StoredModel::GpVar(m) => gpvar_predict(&m, &history, args.horizon)?,
            };
            io::write_signal_csv(&args.out, &forecast.predictions)?;
            if let Some(mse_out) = args.mse_out {
                let rows: Vec<String> = (0..forecast.horizon)
                    .map(|j| format!("{},{}", j + 1, forecast.predicted_mse[j]))
                    .collect();
                write_table(&mse_out, "step,predicted_mse", &rows)?;
            }
        }
        Command::Track(args) => {
            let basis = args.graph.basis()?;
            let ss = match io::load_model(&args.model, &basis)? {
                io::StoredModel::GVarma(m) => build_state_space_gvarma(&m, &basis)?,
                io::StoredModel::GpVar(m) => build_state_space_gpvar(&m)?,
            };
            let observations = io::read_observations_csv(&args.obs)?;
            if !(args.noise.is_finite() && args.noise >= 0.0) {
                return Err(Error::invalid("--noise must be finite and nonnegative"));
            }
            let noise = if args.noise > 0.0 {
                args.noise
            } else {
                // small artificial noise from the observed signal power
                let power = observations.iter().map(|&(_, _, v)| v * v).sum::<f64>()
                    / observations.len().max(1) as f64;
                (1e-6 * power).max(1e-12)
            };
            let t_len = match args.steps {
                Some(t) => t,
                None => observations.iter().map(|&(t, _, _)| t + 1).max().unwrap_or(0),
            };
            if t_len == 0 {
                return Err(Error::invalid("nothing to track: no steps requested"));
            }
            let mut steps: Vec<ObservationStep> = (0..t_len)
                .map(|_| ObservationStep {
                    model: ObservationModel {
                        sample_set: vec![],
                        noise_variance: noise,
                    },
                    values: vec![],
                })
                .collect();
            for (t, node, value) in observations {
                if node >= basis.n() {
                    return Err(Error::invalid(format!("observed node {node} out of range")));
                }
                if t < t_len {
                    steps[t].model.sample_set.push(node);
                    steps[t].values.push(value);
                }
            }
            let output = track(&ss, &steps, None)?;
            io::write_signal_csv(&args.out, &output.filtered)?;
            if let Some(path) = args.predicted_out {
                io::write_signal_csv(&path, &output.predicted)?;
            }
            if let Some(path) = args.trace_out {
                let rows: Vec<String> = output
                    .covariance_trace
                    .iter()
                    .enumerate()
                    .map(|(t, trace)| format!("{},{}", t + 1, trace))
                    .collect();
                write_table(&path, "t,covariance_trace", &rows)?;
            }
        }
        Command::Eval(args) => {
            let basis = args.graph.basis()?;
            let x = io::read_signal_csv(&args.signal)?;
            let spec = parse_split(&args.split)?;
            let configs = ForecasterConfigs {
                gvarma: Candidate::GVarma {
                    p: args.gvarma_p,
                    q: args.gvarma_q,
                    gamma: args.gamma,
                    sigma_g: args.sigma_g,
                },
                gpvar: Candidate::GpVar {
                    p: args.gpvar_p,
                    l: args.gpvar_l,
                    sigma_g: args.sigma_g,
                },
                rgpvar_p: args.rgpvar_p,
                arma: (args.arma_p, args.arma_q, args.gamma),
            };
            let rows = evaluate_forecasters(&basis, &x, &configs, &spec, args.horizon)?;
            let lines: Vec<String> = rows
                .iter()
                .map(|r| format!("{},{},{}", r.method, r.step, r.rnmse))
                .collect();
            write_table(&args.out, "method,step,rnmse", &lines)?;
        }
        Command::Gridsearch(args) => {
            let basis = args.graph.basis()?;
            let x = io::read_signal_csv(&args.signal)?;
            let spec = parse_split(&args.split)?;
            let p_grid: Vec<usize> = parse_grid(&args.p_grid, "P")?;
            let sigma_g_grid: Vec<f64> = parse_grid(&args.sigma_g_grid, "sigma_g")?;
            let candidates: Vec<Candidate> = match args.family.as_str() {
                "gvarma" => {
                    let q_grid: Vec<usize> = parse_grid(&args.q_grid, "Q")?;
                    let gamma_grid: Vec<f64> = parse_grid(&args.gamma_grid, "gamma")?;
                    let mut cells = Vec::new();
                    for &p in &p_grid {
                        for &q in &q_grid {
                            for &gamma in &gamma_grid {
                                for &sigma_g in &sigma_g_grid {
                                    cells.push(Candidate::GVarma { p, q, gamma, sigma_g });
                                }
                            }
                        }
                    }
                    cells
                }
                "gpvar" => {
                    let l_grid: Vec<usize> = parse_grid(&args.l_grid, "L")?;
                    let mut cells = Vec::new();
                    for &p in &p_grid {
                        for &l in &l_grid {
                            for &sigma_g in &sigma_g_grid {
                                cells.push(Candidate::GpVar { p, l, sigma_g });
                            }
                        }
                    }
                    cells
                }
                other => return Err(Error::invalid(format!("unknown family '{other}'"))),
            };
            let outcome = grid_search(&basis, &x, &candidates, &spec, args.horizon)?;
            let cells = |c: &Candidate| -> String {
                match c {
                    Candidate::GVarma { p, q, gamma, sigma_g } => {
                        format!("gvarma,{p},{q},,{gamma},{sigma_g}")
                    }
                    Candidate::GpVar { p, l, sigma_g } => format!("gpvar,{p},,{l},,{sigma_g}"),
                }
            };
            let lines: Vec<String> = outcome
                .scores
                .iter()
                .map(|s| {
                    let score = s
                        .validation_score
                        .map(|v| v.to_string())
                        .unwrap_or_default();
                    let err = s.error.clone().unwrap_or_default().replace(',', ";");
                    let selected = if s.candidate == outcome.best { "1" } else { "0" };
                    format!("{},{score},{selected},{err}", cells(&s.candidate))
                })
                .collect();
            write_table(
                &args.out,
                "family,p,q,l,gamma,sigma_g,validation_rnmse,selected,error",
                &lines,
            )?;
            println!("selected {}", outcome.best.label());
            if let Some(path) = args.test_out {
                let rows: Vec<String> = outcome
                    .test_rnmse
                    .iter()
                    .enumerate()
                    .map(|(h, score)| format!("{},{}", h + 1, score))
                    .collect();
                write_table(&path, "step,rnmse", &rows)?;
            }
            if let Some(path) = args.model_out {
                match &outcome.model {
                    FittedModel::GVarma(m) => io::save_gvarma_model(&path, m, &basis)?,
                    FittedModel::GpVar(m) => io::save_gpvar_model(&path, m, basis.normalization)?,
                }
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            if err.is_invalid_input() {
                ExitCode::from(2)
            } else {
                ExitCode::from(3)
            }
        }
    }
}
