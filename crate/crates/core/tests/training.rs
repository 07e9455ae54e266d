use dynetforge::dynamics::build_dataset;
use dynetforge::io::checkpoint_to_bytes;
use dynetforge::train::{run_experiment_matrix, MatrixOptions, MatrixSpec, Metric};
use dynetforge::{
    evaluate, train, Dataset, DatasetConfig, DynamicsKind, Error, GraphFamily, ModelKind, Protocol, Task,
    TrainConfig,
};

fn small(protocol: Protocol, dynamics: DynamicsKind, seed: u64) -> Dataset {
    let mut cfg = DatasetConfig::new(GraphFamily::Grid, dynamics, 16, protocol)
        .with_seed(seed)
        .with_train_frac(0.3);
    cfg.snapshots = Some(30);
    cfg.holdout = Some(6);
    build_dataset(&cfg).unwrap()
}

fn tiny(kind: ModelKind, epochs: usize) -> TrainConfig {
    let mut c = TrainConfig::new(kind).with_epochs(epochs).with_seed(5);
    c.hidden = 6;
    c.augment = 2;
    c
}

#[test]
fn training_is_bit_for_bit_repeatable() {
    let ds = small(Protocol::Irregular, DynamicsKind::Gene, 3);
    for kind in [ModelKind::Agog, ModelKind::Ndcn] {
        let a = train(&ds, &tiny(kind, 15)).unwrap();
        let b = train(&ds, &tiny(kind, 15)).unwrap();
        assert_eq!(checkpoint_to_bytes(&a).unwrap(), checkpoint_to_bytes(&b).unwrap(), "{kind}");
        let ra = evaluate(&a, &ds, Task::Extrap).unwrap();
        let rb = evaluate(&b, &ds, Task::Extrap).unwrap();
        assert_eq!(ra, rb);
    }
}

#[test]
fn every_trainable_model_lowers_its_loss() {
    let irregular = small(Protocol::Irregular, DynamicsKind::Gene, 1);
    let regular = small(Protocol::Regular, DynamicsKind::Gene, 1);
    for kind in ModelKind::ALL {
        if kind == ModelKind::Oracle {
            continue;
        }
        let ds = if kind.cell().is_some() { &regular } else { &irregular };
        let model = train(ds, &tiny(kind, 60)).unwrap();
        let trace = &model.loss_trace;
        assert_eq!(trace.len(), 60);
        assert!(trace[59] < 0.5 * trace[0], "{kind}: {} -> {}", trace[0], trace[59]);
    }
}

#[test]
fn zero_epochs_keeps_the_initialization() {
    let ds = small(Protocol::Irregular, DynamicsKind::Gene, 2);
    let untrained = train(&ds, &tiny(ModelKind::Agog, 0)).unwrap();
    let again = train(&ds, &tiny(ModelKind::Agog, 0)).unwrap();
    assert!(untrained.loss_trace.is_empty());
    assert_eq!(untrained.optimizer.step, 0);
    assert_eq!(untrained, again);
}

#[test]
fn oracle_scores_zero_on_every_task() {
    let irregular = small(Protocol::Irregular, DynamicsKind::Kuramoto, 4);
    let regular = small(Protocol::Regular, DynamicsKind::Kuramoto, 4);
    let check = |ds: &Dataset, task: Task| {
        let oracle = train(ds, &TrainConfig::new(ModelKind::Oracle)).unwrap();
        let report = evaluate(&oracle, ds, task).unwrap();
        assert_eq!(report.value(task, "Oracle", Metric::Mae), Some(0.0), "{task}");
        assert!(report.series.iter().all(|s| s.error == 0.0));
    };
    check(&irregular, Task::Interp);
    check(&irregular, Task::Extrap);
    check(&regular, Task::Regular);
}

#[test]
fn tasks_require_their_split() {
    let regular = small(Protocol::Regular, DynamicsKind::Gene, 1);
    let model = train(&regular, &tiny(ModelKind::Agog, 1)).unwrap();
    let err = evaluate(&model, &regular, Task::Interp).unwrap_err();
    assert!(err.to_string().contains("no interp_test split"), "{err}");

    let irregular = small(Protocol::Irregular, DynamicsKind::Gene, 1);
    let err = train(&irregular, &tiny(ModelKind::GruGnn, 1)).unwrap_err();
    assert!(matches!(err, Error::Incompatible(_)), "{err}");
}

#[test]
fn agog_predicts_the_updated_state_at_a_train_time() {
    let ds = small(Protocol::Irregular, DynamicsKind::Gene, 6);
    let model = train(&ds, &tiny(ModelKind::Agog, 20)).unwrap();
    let train_times = ds.train_view().times;
    let at_train = model.predict_times(&ds, &train_times[1..2], Task::Interp).unwrap();
    let nudged = model.predict_times(&ds, &[train_times[1] + 1e-9], Task::Interp).unwrap();
    // A query just past a train time starts from the same anchor, one tiny step later.
    let gap = at_train[0].zip_map(&nudged[0], |a, b| (a - b).abs()).max_abs();
    assert!(gap < 1e-6, "{gap}");
}

#[test]
fn matrix_results_do_not_depend_on_job_count() {
    let spec = MatrixSpec::from_toml(
        r#"
        dynamics = ["gene", "kuramoto"]
        graphs = ["grid"]
        methods = ["agog", "ndcn", "gru-gnn"]
        seeds = [1, 2]
        tasks = ["interp", "extrap", "regular"]
        n = 9
        epochs = 4
        hidden = 4
        augment = 1
        "#,
    )
    .unwrap();
    let one = run_experiment_matrix(&spec, &MatrixOptions { jobs: 1, dataset_dir: None }).unwrap();
    let two = run_experiment_matrix(&spec, &MatrixOptions { jobs: 2, dataset_dir: None }).unwrap();
    assert!(one.failures.is_empty(), "{:?}", one.failures);
    assert_eq!(one.report, two.report);
    assert_eq!(one.aggregate, two.aggregate);
    // GRU-GNN only runs the regular task; AGOG and NDCN run all three.
    let rows = one.report.rows.len();
    assert_eq!(rows, 2 * 2 * (3 + 3 + 1) * 2);
}
