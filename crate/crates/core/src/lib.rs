//! Forecasting and tracking of multivariate time series evolving over a
//! known graph.
//!
//! The central objects are a weighted undirected [`Graph`] with its cached
//! Laplacian eigenbasis ([`SpectralBasis`]), time-varying graph signals
//! (`N x T` matrices, one column per time step), and two process models:
//!
//! - [`GVarmaModel`]: a vector ARMA whose coefficient matrices are graph
//!   filters. Rotating by the Laplacian eigenvectors decouples it into `N`
//!   scalar ARMA recursions, which is how it is simulated, predicted and
//!   fitted ([`fitting::fit_gvarma`]).
//! - [`GpVarModel`]: a VAR whose lag matrices are Laplacian polynomials,
//!   simulated and predicted with sparse mat-vecs and fitted from the
//!   process autocorrelation ([`fitting::fit_gpvar_mse`],
//!   [`fitting::fit_gpvar_yule_walker`]).
//!
//! Around them: joint time-vertex spectral analysis ([`time_vertex`],
//! [`stationarity`]), optimal low-rank frequency selection
//! ([`fitting::select_low_rank`]), Kalman tracking from partial node
//! observations ([`tracking`]), and experiment orchestration — splits,
//! rNMSE, grid search, an SI epidemic simulator ([`experiments`]).
//!
//! Everything is deterministic given a seed; types are immutable after
//! construction and operations are pure functions.

pub mod error;
pub mod experiments;
pub mod fitting;
pub mod graph;
pub mod io;
pub mod models;
pub mod stationarity;
pub mod time_vertex;
pub mod tracking;

pub use error::{Error, Result};
pub use experiments::{Candidate, SiConfig, SplitSpec};
pub use fitting::{FitConfig, FitReport, LowRankPlan};
pub use graph::{Graph, GraphSignal, Normalization, SparseSym, SpectralBasis};
pub use models::{Forecast, GVarmaModel, GpVarModel, InnovationCovariance};
pub use stationarity::{Jpsd, SmoothingConfig};
pub use time_vertex::{JointResponse, TemporalBasis, TimeVertexSignal, TvArmaCoeffs, TvInit};
