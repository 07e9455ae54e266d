//! Property checks shared by the proptest suite and the acceptance run.

use dynetforge::agog::{augment, gru_update, AgogHyper, AgogParams};
use dynetforge::dynamics::build_dataset;
use dynetforge::graph::{generate_graph, normalized_laplacian};
use dynetforge::io::{checkpoint_from_bytes, checkpoint_to_bytes, dataset_from_bytes, dataset_to_bytes};
use dynetforge::train::{error_over_time, metrics};
use dynetforge::{
    train, DatasetConfig, DynamicsKind, GraphFamily, GraphParams, Matrix, ModelKind, Protocol, Tape, TrainConfig,
};
use nalgebra::DMatrix;
use proptest::prelude::*;
use proptest::test_runner::TestCaseError;

type Check = Result<(), TestCaseError>;

pub fn family() -> impl Strategy<Value = GraphFamily> {
    prop::sample::select(GraphFamily::ALL.to_vec())
}

pub fn dynamics() -> impl Strategy<Value = DynamicsKind> {
    prop::sample::select(vec![DynamicsKind::Gene, DynamicsKind::Kuramoto, DynamicsKind::Mutualistic])
}

pub fn matrix(rows: usize, cols: usize, lo: f64, hi: f64) -> impl Strategy<Value = Matrix> {
    prop::collection::vec(lo..hi, rows * cols).prop_map(move |v| Matrix::from_vec(rows, cols, v).unwrap())
}

pub fn snapshots(count: usize, rows: usize) -> impl Strategy<Value = Vec<Matrix>> {
    prop::collection::vec(matrix(rows, 1, -3.0, 3.0), count)
}

pub fn laplacian_spectrum(fam: GraphFamily, side: usize, seed: u64) -> Check {
    let n = side * side;
    let g = generate_graph(fam, n, &GraphParams::default(), seed).unwrap();
    let phi = normalized_laplacian(&g).phi;
    for i in 0..n {
        for j in 0..n {
            prop_assert_eq!(phi.get(i, j), phi.get(j, i));
        }
    }
    let eig = DMatrix::from_row_slice(n, n, phi.as_slice()).symmetric_eigenvalues();
    for &l in eig.iter() {
        prop_assert!((-1e-9..=2.0 + 1e-9).contains(&l), "eigenvalue {}", l);
    }
    Ok(())
}

pub fn zero_augmentation(h: Matrix, p: usize) -> Check {
    let mut tape = Tape::new();
    let v = tape.constant(h.clone());
    let a = augment(&mut tape, v, p).unwrap();
    let out = tape.value(a);
    let d = h.cols();
    prop_assert_eq!(out.shape(), (h.rows(), d + p));
    prop_assert_eq!(out.slice_cols(0, d), h);
    prop_assert!(out.slice_cols(d, d + p).as_slice().iter().all(|&x| x == 0.0));
    Ok(())
}

/// `ĥ = (1 - z) n + z h_obs` with `n = tanh(..)`, so every entry lies between
/// `h_obs` and some value in `[-1, 1]`.
pub fn gru_convex_bound(seed: u64, h_pred: Matrix, h_obs: Matrix) -> Check {
    let (n, d) = h_obs.shape();
    let params = AgogParams::init(AgogHyper::new(n, 1, d, h_pred.cols() - d), seed);
    let mut tape = Tape::new();
    let (_, vars) = params.bind(&mut tape).unwrap();
    let hp = tape.constant(h_pred);
    let ho = tape.constant(h_obs.clone());
    let out = gru_update(&mut tape, &vars, hp, ho).unwrap();
    for (&y, &o) in tape.value(out).as_slice().iter().zip(h_obs.as_slice()) {
        prop_assert!(y >= o.min(-1.0) - 1e-12 && y <= o.max(1.0) + 1e-12, "{} vs {}", y, o);
    }
    Ok(())
}

pub fn norm_l1_identity(pred: Vec<Matrix>, truth: Vec<Matrix>) -> Check {
    let refs: Vec<&Matrix> = truth.iter().collect();
    let m = metrics(&pred, &refs).unwrap();
    let entries: Vec<f64> = truth.iter().flat_map(|t| t.as_slice().to_vec()).collect();
    let mean_abs = entries.iter().map(|x| x.abs()).sum::<f64>() / entries.len() as f64;
    let norm = m.norm_l1.unwrap();
    prop_assert!((norm - m.mae / mean_abs).abs() <= 1e-12 * norm.max(1.0));
    Ok(())
}

pub fn series_mean_is_mae(pred: Vec<Matrix>, truth: Vec<Matrix>) -> Check {
    let refs: Vec<&Matrix> = truth.iter().collect();
    let series = error_over_time(&pred, &refs).unwrap();
    let mean = series.iter().sum::<f64>() / series.len() as f64;
    let mae = metrics(&pred, &refs).unwrap().mae;
    prop_assert!((mean - mae).abs() <= 1e-12 * mae.max(1.0));
    Ok(())
}

pub fn dataset_round_trip(fam: GraphFamily, dynk: DynamicsKind, regular: bool, seed: u64) -> Check {
    let protocol = if regular { Protocol::Regular } else { Protocol::Irregular };
    let mut cfg = DatasetConfig::new(fam, dynk, 16, protocol).with_seed(seed).with_train_frac(0.3);
    cfg.snapshots = Some(30);
    cfg.holdout = Some(6);
    // Some mutualistic draws leave a node stuck at a singular denominator.
    let ds = build_dataset(&cfg);
    prop_assume!(ds.is_ok());
    let ds = ds.unwrap();
    let bytes = dataset_to_bytes(&ds).unwrap();
    let back = dataset_from_bytes(&bytes).unwrap();
    prop_assert_eq!(&back, &ds);
    prop_assert_eq!(dataset_to_bytes(&back).unwrap(), bytes);
    Ok(())
}

pub fn checkpoint_round_trip(kind: ModelKind, epochs: usize, seed: u64) -> Check {
    let mut cfg = DatasetConfig::new(GraphFamily::Grid, DynamicsKind::Gene, 9, Protocol::Regular).with_seed(seed);
    cfg.snapshots = Some(10);
    let ds = build_dataset(&cfg).unwrap();
    let mut tc = TrainConfig::new(kind).with_epochs(epochs).with_seed(seed);
    tc.hidden = 3;
    tc.augment = 1;
    tc.gcn_hidden = 3;
    tc.rnn_hidden = 2;
    let model = train(&ds, &tc).unwrap();
    let bytes = checkpoint_to_bytes(&model).unwrap();
    let back = checkpoint_from_bytes(&bytes).unwrap();
    prop_assert_eq!(&back, &model);
    prop_assert_eq!(checkpoint_to_bytes(&back).unwrap(), bytes);
    Ok(())
}
