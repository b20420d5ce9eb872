//! Exit-code contract and subcommand behaviors exercised through the
//! real binary and the documented wire formats.

use std::path::{Path, PathBuf};
use std::process::Command;

use graphts_core::graph::{Graph, Normalization, SpectralBasis};
use graphts_core::io;
use graphts_core::models::GpVarModel;

fn bin() -> &'static str {
    env!("CARGO_BIN_EXE_graphts")
}

fn workdir(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join("graphts-cli-tests").join(name);
    let _ = std::fs::remove_dir_all(&dir);
    std::fs::create_dir_all(&dir).unwrap();
    dir
}

fn run(args: &[&str]) -> (i32, String) {
    let output = Command::new(bin()).args(args).output().expect("spawn graphts");
    (
        output.status.code().unwrap_or(-1),
        String::from_utf8_lossy(&output.stderr).to_string(),
    )
}

fn small_graph(dir: &Path) -> String {
    let graph = Graph::new(
        5,
        vec![
            (0, 1, 1.0),
            (1, 2, 1.0),
            (2, 3, 1.0),
            (3, 4, 1.0),
            (0, 4, 0.5),
            (1, 3, 0.6),
        ],
    )
    .unwrap();
    let path = dir.join("graph.csv");
    io::write_graph_csv(&path, &graph).unwrap();
    path.to_str().unwrap().to_string()
}

#[test]
fn missing_file_exits_with_2() {
    let dir = workdir("missing");
    let graph = small_graph(&dir);
    let out = dir.join("out.csv");
    let (code, stderr) = run(&[
        "fit",
        "gvarma",
        "--graph",
        &graph,
        "--signal",
        "/nonexistent/signal.csv",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(code, 2, "stderr: {stderr}");
}

#[test]
fn malformed_csv_exits_with_2() {
    let dir = workdir("malformed");
    let graph = small_graph(&dir);
    let signal = dir.join("signal.csv");
    std::fs::write(&signal, "wrong,header\n0,1\n").unwrap();
    let (code, stderr) = run(&[
        "fit",
        "gpvar",
        "--graph",
        &graph,
        "--signal",
        signal.to_str().unwrap(),
        "--out",
        dir.join("m.json").to_str().unwrap(),
    ]);
    assert_eq!(code, 2, "stderr: {stderr}");
    assert!(stderr.contains("invalid input") || stderr.contains("header"));
}

#[test]
fn unstable_model_simulation_exits_with_3() {
    let dir = workdir("unstable");
    let graph_path = small_graph(&dir);
    let graph = io::read_graph_csv(Path::new(&graph_path)).unwrap();
    let basis = SpectralBasis::from_graph(&graph, Normalization::UnitSpectralNorm).unwrap();
    // AR coefficient far outside the stability region
    let model = GpVarModel::new(vec![vec![-1.5]], basis.laplacian.clone(), 5.0, false).unwrap();
    let model_path = dir.join("model.json");
    io::save_gpvar_model(&model_path, &model, Normalization::UnitSpectralNorm).unwrap();
    let (code, stderr) = run(&[
        "simulate",
        "gpvar",
        "--graph",
        &graph_path,
        "--model",
        model_path.to_str().unwrap(),
        "--steps",
        "10",
        "--out",
        dir.join("x.csv").to_str().unwrap(),
    ]);
    assert_eq!(code, 3, "stderr: {stderr}");
    assert!(stderr.contains("unstable"), "stderr: {stderr}");
}

#[test]
fn checksum_mismatch_exits_with_2() {
    let dir = workdir("checksum");
    let graph_path = small_graph(&dir);
    let graph = io::read_graph_csv(Path::new(&graph_path)).unwrap();
    let basis = SpectralBasis::from_graph(&graph, Normalization::UnitSpectralNorm).unwrap();
    let model = GpVarModel::new(vec![vec![-0.4]], basis.laplacian.clone(), 5.0, false).unwrap();
    let model_path = dir.join("model.json");
    io::save_gpvar_model(&model_path, &model, Normalization::UnitSpectralNorm).unwrap();

    // different graph: the model file must be refused
    let other = Graph::new(5, vec![(0, 1, 1.0), (1, 2, 1.0), (2, 3, 1.0), (3, 4, 1.0)]).unwrap();
    let other_path = dir.join("other.csv");
    io::write_graph_csv(&other_path, &other).unwrap();
    let (code, stderr) = run(&[
        "simulate",
        "gpvar",
        "--graph",
        other_path.to_str().unwrap(),
        "--model",
        model_path.to_str().unwrap(),
        "--steps",
        "10",
        "--out",
        dir.join("x.csv").to_str().unwrap(),
    ]);
    assert_eq!(code, 2, "stderr: {stderr}");
    assert!(stderr.contains("checksum"), "stderr: {stderr}");
}

#[test]
fn si_fit_track_round_trip() {
    let dir = workdir("track");
    let graph_path = small_graph(&dir);
    let path = |name: &str| dir.join(name).to_str().unwrap().to_string();

    let (code, stderr) = run(&[
        "simulate",
        "si",
        "--graph",
        &graph_path,
        "--rate",
        "0.08",
        "--population",
        "50",
        "--recovery",
        "6",
        "--steps",
        "200",
        "--seed-node",
        "0",
        "--seed",
        "5",
        "--out",
        &path("si.csv"),
    ]);
    assert_eq!(code, 0, "stderr: {stderr}");

    let (code, stderr) = run(&[
        "fit",
        "gvarma",
        "--graph",
        &graph_path,
        "--signal",
        &path("si.csv"),
        "--p",
        "2",
        "--q",
        "0",
        "--out",
        &path("model.json"),
    ]);
    assert_eq!(code, 0, "stderr: {stderr}");

    // observe 3 of 5 nodes at every step
    let signal = io::read_signal_csv(Path::new(&path("si.csv"))).unwrap();
    let mut observations = Vec::new();
    for t in 0..60 {
        for node in [0usize, 2, 4] {
            observations.push((t, node, signal[(node, t)]));
        }
    }
    io::write_observations_csv(Path::new(&path("obs.csv")), &observations).unwrap();

    let (code, stderr) = run(&[
        "track",
        "--graph",
        &graph_path,
        "--obs",
        &path("obs.csv"),
        "--model",
        &path("model.json"),
        "--out",
        &path("tracked.csv"),
        "--trace-out",
        &path("trace.csv"),
    ]);
    assert_eq!(code, 0, "stderr: {stderr}");

    let tracked = io::read_signal_csv(Path::new(&path("tracked.csv"))).unwrap();
    assert_eq!(tracked.shape(), (5, 60));
    // observed nodes should be reconstructed closely
    let mut num = 0.0;
    let mut den = 0.0;
    for t in 0..60 {
        for node in [0usize, 2, 4] {
            num += (tracked[(node, t)] - signal[(node, t)]).powi(2);
            den += signal[(node, t)].powi(2);
        }
    }
    assert!(den > 0.0);
    assert!((num / den).sqrt() < 0.2, "observed-node rNMSE {}", (num / den).sqrt());

    let trace = std::fs::read_to_string(path("trace.csv")).unwrap();
    assert!(trace.starts_with("t,covariance_trace\n1,"));
}

#[test]
fn gridsearch_writes_score_table_and_model() {
    let dir = workdir("gridsearch");
    let graph_path = small_graph(&dir);
    let path = |name: &str| dir.join(name).to_str().unwrap().to_string();

    let (code, stderr) = run(&[
        "simulate",
        "si",
        "--graph",
        &graph_path,
        "--rate",
        "0.08",
        "--population",
        "50",
        "--recovery",
        "6",
        "--steps",
        "240",
        "--seed",
        "9",
        "--out",
        &path("si.csv"),
    ]);
    assert_eq!(code, 0, "stderr: {stderr}");

    let (code, stderr) = run(&[
        "gridsearch",
        "--graph",
        &graph_path,
        "--signal",
        &path("si.csv"),
        "--family",
        "gvarma",
        "--p-grid",
        "1,2",
        "--q-grid",
        "0",
        "--gamma-grid",
        "0,0.5",
        "--out",
        &path("scores.csv"),
        "--test-out",
        &path("test.csv"),
        "--model-out",
        &path("best.json"),
    ]);
    assert_eq!(code, 0, "stderr: {stderr}");

    let scores = std::fs::read_to_string(path("scores.csv")).unwrap();
    assert!(scores.starts_with("family,p,q,l,gamma,sigma_g,validation_rnmse,selected,error\n"));
    assert_eq!(scores.lines().count(), 5, "4 cells + header:\n{scores}");
    assert_eq!(
        scores.lines().filter(|l| l.split(',').nth(7) == Some("1")).count(),
        1,
        "exactly one selected cell:\n{scores}"
    );
    let test = std::fs::read_to_string(path("test.csv")).unwrap();
    assert!(test.starts_with("step,rnmse\n1,"));
    assert!(std::fs::metadata(path("best.json")).is_ok());
}

#[test]
fn graph_knn_builds_from_coordinates() {
    let dir = workdir("knn");
    let path = |name: &str| dir.join(name).to_str().unwrap().to_string();
    let coords: Vec<Vec<f64>> = vec![
        vec![0.0, 0.0],
        vec![1.0, 0.0],
        vec![2.0, 0.1],
        vec![0.1, 1.0],
        vec![1.9, 1.1],
    ];
    io::write_coords_csv(Path::new(&path("coords.csv")), &coords).unwrap();
    let (code, stderr) = run(&[
        "graph",
        "knn",
        "--coords",
        &path("coords.csv"),
        "--k",
        "2",
        "--out",
        &path("graph.csv"),
    ]);
    assert_eq!(code, 0, "stderr: {stderr}");
    let graph = io::read_graph_csv(Path::new(&path("graph.csv"))).unwrap();
    assert_eq!(graph.n_nodes(), 5);
    // every node keeps at least its own 2 nearest neighbors
    for node in 0..5 {
        let degree = graph
            .edges()
            .iter()
            .filter(|&&(i, j, _)| i == node || j == node)
            .count();
        assert!(degree >= 2, "node {node} has degree {degree}");
    }
    // a too-small point set is invalid input
    let (code, _) = run(&[
        "graph",
        "knn",
        "--coords",
        &path("coords.csv"),
        "--k",
        "5",
        "--out",
        &path("g2.csv"),
    ]);
    assert_eq!(code, 2);
}

#[test]
fn jwss_simulation_has_requested_shape() {
    let dir = workdir("jwss");
    let graph_path = small_graph(&dir);
    let path = |name: &str| dir.join(name).to_str().unwrap().to_string();

    // flat unit JPSD over a 5 x 12 grid
    let mut rows = String::from("lambda_index,omega_index,power\n");
    for i in 0..5 {
        for j in 0..12 {
            rows.push_str(&format!("{i},{j},1.0\n"));
        }
    }
    std::fs::write(path("jpsd.csv"), rows).unwrap();

    let (code, stderr) = run(&[
        "simulate",
        "jwss",
        "--graph",
        &graph_path,
        "--jpsd",
        &path("jpsd.csv"),
        "--seed",
        "3",
        "--out",
        &path("x.csv"),
    ]);
    assert_eq!(code, 0, "stderr: {stderr}");
    let x = io::read_signal_csv(Path::new(&path("x.csv"))).unwrap();
    assert_eq!(x.shape(), (5, 12));
}
