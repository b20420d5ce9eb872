use criterion::{criterion_group, criterion_main, BatchSize, Criterion};
use std::hint::black_box;

use graphts_bench::{basis, gpvar_model, gvarma_model, knn_graph, signal};
use graphts_core::experiments::{evaluate_forecasters, Candidate, ForecasterConfigs, SplitSpec};
use graphts_core::fitting::{estimate_autocorrelation, fit_gpvar_mse, fit_gvarma, FitConfig};
use graphts_core::graph::{laplacian, Normalization, SpectralBasis};
use graphts_core::models::{gpvar_predict, gvarma_predict, gvarma_simulate};
use graphts_core::time_vertex::{ijft, jft, TemporalBasis};
use graphts_core::tracking::{build_state_space_gvarma, track, ObservationModel, ObservationStep};
use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn bench_spectral(c: &mut Criterion) {
    let mut group = c.benchmark_group("spectral");
    for n in [32usize, 100] {
        let graph = knn_graph(n, 10, 1);
        let lap = laplacian(&graph, Normalization::Combinatorial).unwrap();
        group.bench_function(format!("eigendecompose_n{n}"), |b| {
            b.iter(|| {
                graphts_core::graph::eigendecompose(black_box(&lap), Normalization::Combinatorial)
                    .unwrap()
            })
        });
    }
    let bas = basis(32, 2);
    let model = gvarma_model(&bas, 3);
    let x = signal(&bas, &model, 744, 4);
    let tb = TemporalBasis::new(744).unwrap();
    group.bench_function("jft_32x744", |b| {
        b.iter(|| jft(black_box(&bas), black_box(&tb), black_box(&x)).unwrap())
    });
    let spectrum = jft(&bas, &tb, &x).unwrap();
    group.bench_function("ijft_32x744", |b| {
        b.iter(|| ijft(black_box(&bas), black_box(&tb), black_box(&spectrum)).unwrap())
    });
    group.finish();
}

fn bench_fitting(c: &mut Criterion) {
    let mut group = c.benchmark_group("fitting");
    group.sample_size(20);
    let bas = basis(32, 5);
    let model = gvarma_model(&bas, 6);
    let x = signal(&bas, &model, 744, 7);
    group.bench_function("fit_gvarma_p2_32x744", |b| {
        b.iter(|| fit_gvarma(black_box(&bas), black_box(&x), &FitConfig::new(2, 0)).unwrap())
    });
    group.bench_function("fit_gpvar_p2_l2_32x744", |b| {
        b.iter(|| {
            let r = estimate_autocorrelation(black_box(&x), 2).unwrap();
            fit_gpvar_mse(&bas.laplacian, &r, 2, &[2, 2]).unwrap()
        })
    });
    group.finish();
}

fn bench_prediction(c: &mut Criterion) {
    let mut group = c.benchmark_group("prediction");
    let bas = basis(32, 8);
    let model = gvarma_model(&bas, 9);
    let x = signal(&bas, &model, 744, 10);
    group.bench_function("gvarma_predict_h5", |b| {
        b.iter(|| gvarma_predict(black_box(&model), &bas, black_box(&x), 5).unwrap())
    });
    let gp = gpvar_model(&bas);
    group.bench_function("gpvar_predict_h5", |b| {
        b.iter(|| gpvar_predict(black_box(&gp), black_box(&x), 5).unwrap())
    });
    group.finish();
}

fn bench_tracking(c: &mut Criterion) {
    let mut group = c.benchmark_group("tracking");
    group.sample_size(20);
    let bas = basis(32, 11);
    let model = gvarma_model(&bas, 12);
    let ss = build_state_space_gvarma(&model, &bas).unwrap();
    let x = gvarma_simulate(&model, &bas, 200, 13, 100).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(14);
    let steps: Vec<ObservationStep> = (0..200)
        .map(|t| {
            let nodes: Vec<usize> = (0..32).filter(|_| rng.random::<f64>() < 0.75).collect();
            let values = nodes.iter().map(|&i| x[(i, t)]).collect();
            ObservationStep {
                model: ObservationModel {
                    sample_set: nodes,
                    noise_variance: 1e-4,
                },
                values,
            }
        })
        .collect();
    group.bench_function("track_75pct_32x200", |b| {
        b.iter_batched(
            || steps.clone(),
            |steps| track(black_box(&ss), &steps, None).unwrap(),
            BatchSize::SmallInput,
        )
    });
    group.finish();
}

fn bench_evaluation(c: &mut Criterion) {
    let mut group = c.benchmark_group("evaluation");
    group.sample_size(10);
    let bas = basis(24, 15);
    let model = gvarma_model(&bas, 16);
    let x = signal(&bas, &model, 400, 17);
    let spec = SplitSpec::new(0.35, 0.15, 0.5).unwrap();
    let configs = ForecasterConfigs {
        gvarma: Candidate::GVarma {
            p: 2,
            q: 0,
            gamma: 0.0,
            sigma_g: 0.0,
        },
        gpvar: Candidate::GpVar {
            p: 2,
            l: 2,
            sigma_g: 0.0,
        },
        rgpvar_p: 2,
        arma: (2, 0, 0.0),
    };
    group.bench_function("evaluate_forecasters_24x400_h5", |b| {
        b.iter(|| evaluate_forecasters(black_box(&bas), &x, &configs, &spec, 5).unwrap())
    });
    group.finish();
}

fn bench_basis_build(c: &mut Criterion) {
    c.bench_function("spectral_basis_knn_100", |b| {
        b.iter(|| {
            let graph = knn_graph(100, 10, 18);
            SpectralBasis::from_graph(&graph, Normalization::UnitSpectralNorm).unwrap()
        })
    });
}

criterion_group!(
    benches,
    bench_spectral,
    bench_fitting,
    bench_prediction,
    bench_tracking,
    bench_evaluation,
    bench_basis_build
);
criterion_main!(benches);
