//! Shared fixtures for the benchmark suite: deterministic graphs, models
//! and signals at the scales the benchmarks exercise.

use graphts_core::graph::{build_knn_graph, Graph, Normalization, SpectralBasis};
use graphts_core::models::{gvarma_simulate, GVarmaModel, GpVarModel, InnovationCovariance};
use graphts_core::TimeVertexSignal;
use nalgebra::DVector;
use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// k-NN graph over uniformly random 2-D points.
pub fn knn_graph(n: usize, k: usize, seed: u64) -> Graph {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let coords: Vec<Vec<f64>> = (0..n)
        .map(|_| vec![10.0 * rng.random::<f64>(), 10.0 * rng.random::<f64>()])
        .collect();
    build_knn_graph(&coords, k).unwrap()
}

pub fn basis(n: usize, seed: u64) -> SpectralBasis {
    let graph = knn_graph(n, 10.min(n - 1), seed);
    SpectralBasis::from_graph(&graph, Normalization::UnitSpectralNorm).unwrap()
}

/// Stable diagonal-spectra AR(2) model.
pub fn gvarma_model(basis: &SpectralBasis, seed: u64) -> GVarmaModel {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = basis.n();
    let a1 = DVector::from_fn(n, |_, _| 1.2 * (rng.random::<f64>() - 0.5));
    let a2 = DVector::from_fn(n, |_, _| 0.3 * (rng.random::<f64>() - 0.5));
    GVarmaModel::new(n, vec![a1, a2], vec![], InnovationCovariance::identity(n)).unwrap()
}

/// Stable low-order Laplacian-polynomial model.
pub fn gpvar_model(basis: &SpectralBasis) -> GpVarModel {
    GpVarModel::new(
        vec![vec![-0.55, 0.25], vec![0.12, -0.08]],
        basis.laplacian.clone(),
        basis.n() as f64,
        false,
    )
    .unwrap()
}

pub fn signal(basis: &SpectralBasis, model: &GVarmaModel, t_len: usize, seed: u64) -> TimeVertexSignal {
    gvarma_simulate(model, basis, t_len, seed, 200).unwrap()
}
