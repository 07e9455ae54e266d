use std::collections::BTreeMap;
use std::path::PathBuf;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{evaluate, EvalReport, Metric, ModelKind, ReportRow, Task, TrainConfig};
use crate::dynamics::{build_dataset, Dataset, DatasetConfig, DynamicsKind, Protocol};
use crate::error::{Error, Result};
use crate::graph::GraphFamily;

/// Grid of experiments: every dynamics × graph family × seed gets its own
/// datasets, and every method runs every applicable task on them.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MatrixSpec {
    pub dynamics: Vec<DynamicsKind>,
    pub graphs: Vec<GraphFamily>,
    pub methods: Vec<ModelKind>,
    pub seeds: Vec<u64>,
    pub tasks: Vec<Task>,
    #[serde(default = "default_n")]
    pub n: usize,
    #[serde(default = "default_train_frac")]
    pub train_frac: f64,
    #[serde(default = "default_epochs")]
    pub epochs: usize,
    #[serde(default = "default_lr")]
    pub lr: f64,
    #[serde(default = "default_hidden")]
    pub hidden: usize,
    #[serde(default = "default_augment")]
    pub augment: usize,
}

fn default_n() -> usize {
    400
}
fn default_train_frac() -> f64 {
    0.1
}
fn default_epochs() -> usize {
    800
}
fn default_lr() -> f64 {
    0.01
}
fn default_hidden() -> usize {
    20
}
fn default_augment() -> usize {
    5
}

impl MatrixSpec {
    pub fn from_toml(text: &str) -> Result<Self> {
        let spec: MatrixSpec = toml::from_str(text)?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        let empty = [
            ("dynamics", self.dynamics.is_empty()),
            ("graphs", self.graphs.is_empty()),
            ("methods", self.methods.is_empty()),
            ("seeds", self.seeds.is_empty()),
            ("tasks", self.tasks.is_empty()),
        ];
        if let Some((name, _)) = empty.iter().find(|(_, e)| *e) {
            return Err(Error::Config(format!("matrix spec lists no {name}")));
        }
        Ok(())
    }

    /// `(dynamics, family)` pairs in spec order.
    pub fn cells(&self) -> Vec<(DynamicsKind, GraphFamily)> {
        self.dynamics
            .iter()
            .flat_map(|&d| self.graphs.iter().map(move |&g| (d, g)))
            .collect()
    }

    fn protocols(&self) -> Vec<Protocol> {
        let mut out = Vec::new();
        for task in &self.tasks {
            if !out.contains(&task.protocol()) {
                out.push(task.protocol());
            }
        }
        out
    }

    fn dataset_config(&self, dynamics: DynamicsKind, graph: GraphFamily, protocol: Protocol, seed: u64) -> DatasetConfig {
        DatasetConfig::new(graph, dynamics, self.n, protocol)
            .with_seed(seed)
            .with_train_frac(self.train_frac)
    }

    fn train_config(&self, method: ModelKind, seed: u64) -> TrainConfig {
        let mut c = TrainConfig::new(method).with_epochs(self.epochs).with_seed(seed);
        c.lr = self.lr;
        c.hidden = self.hidden;
        c.augment = self.augment;
        c
    }
}

#[derive(Clone, Debug, Default)]
pub struct MatrixOptions {
    /// Worker threads; 0 means one per available core.
    pub jobs: usize,
    /// Where to keep each generated dataset file, if anywhere.
    pub dataset_dir: Option<PathBuf>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct CellFailure {
    pub dynamics: DynamicsKind,
    pub graph: GraphFamily,
    pub protocol: Protocol,
    pub method: Option<ModelKind>,
    pub seed: u64,
    pub message: String,
}

/// Mean and sample standard deviation of one metric across seeds.
#[derive(Clone, Debug, PartialEq)]
pub struct AggregateRow {
    pub task: Task,
    pub dynamics: DynamicsKind,
    pub graph: GraphFamily,
    pub method: String,
    pub metric: Metric,
    /// `None` when no seed produced a defined value.
    pub mean: Option<f64>,
    pub std: Option<f64>,
    /// Seeds with a defined value.
    pub count: usize,
}

#[derive(Clone, Debug, Default)]
pub struct MatrixOutcome {
    pub report: EvalReport,
    pub aggregate: Vec<AggregateRow>,
    pub failures: Vec<CellFailure>,
}

struct DatasetJob {
    dynamics: DynamicsKind,
    graph: GraphFamily,
    protocol: Protocol,
    seed: u64,
}

/// Builds the datasets, then trains and evaluates every method on them.
///
/// Results are collected in spec order, so the outcome does not depend on
/// the number of workers.
pub fn run_experiment_matrix(spec: &MatrixSpec, options: &MatrixOptions) -> Result<MatrixOutcome> {
    spec.validate()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(options.jobs)
        .build()
        .map_err(|e| Error::Config(format!("cannot start worker pool: {e}")))?;

    let mut jobs = Vec::new();
    for (dynamics, graph) in spec.cells() {
        for &seed in &spec.seeds {
            for protocol in spec.protocols() {
                jobs.push(DatasetJob { dynamics, graph, protocol, seed });
            }
        }
    }

    if let Some(dir) = &options.dataset_dir {
        std::fs::create_dir_all(dir)?;
    }
    let datasets: Vec<std::result::Result<Dataset, String>> = pool.install(|| {
        jobs.par_iter()
            .map(|job| {
                let config = spec.dataset_config(job.dynamics, job.graph, job.protocol, job.seed);
                let dataset = build_dataset(&config).map_err(|e| e.to_string())?;
                if let Some(dir) = &options.dataset_dir {
                    let name = format!(
                        "{}_{}_{}_seed{}.dset",
                        job.dynamics, job.graph, job.protocol, job.seed
                    );
                    crate::io::write_dataset(&dir.join(name), &dataset).map_err(|e| e.to_string())?;
                }
                Ok(dataset)
            })
            .collect()
    });

    let mut outcome = MatrixOutcome::default();
    let mut runs = Vec::new();
    for (job_index, (job, dataset)) in jobs.iter().zip(&datasets).enumerate() {
        match dataset {
            Err(message) => outcome.failures.push(CellFailure {
                dynamics: job.dynamics,
                graph: job.graph,
                protocol: job.protocol,
                method: None,
                seed: job.seed,
                message: message.clone(),
            }),
            Ok(_) => {
                for &method in &spec.methods {
                    let tasks: Vec<Task> = spec
                        .tasks
                        .iter()
                        .copied()
                        .filter(|t| t.protocol() == job.protocol && method.supports(*t))
                        .collect();
                    if !tasks.is_empty() {
                        runs.push((job_index, method, tasks));
                    }
                }
            }
        }
    }

    let results: Vec<Result<EvalReport>> = pool.install(|| {
        runs.par_iter()
            .map(|(job_index, method, tasks)| {
                let dataset = datasets[*job_index].as_ref().expect("only built datasets are run");
                let model = super::train(dataset, &spec.train_config(*method, jobs[*job_index].seed))?;
                let mut report = EvalReport::default();
                for &task in tasks {
                    report.extend(evaluate(&model, dataset, task)?);
                }
                Ok(report)
            })
            .collect()
    });

    for ((job_index, method, _), result) in runs.iter().zip(results) {
        match result {
            Ok(report) => outcome.report.extend(report),
            Err(e) => {
                let job = &jobs[*job_index];
                log::warn!("{} on {}/{} seed {} failed: {e}", method, job.dynamics, job.graph, job.seed);
                outcome.failures.push(CellFailure {
                    dynamics: job.dynamics,
                    graph: job.graph,
                    protocol: job.protocol,
                    method: Some(*method),
                    seed: job.seed,
                    message: e.to_string(),
                });
            }
        }
    }
    outcome.report.rows.sort_by(|a, b| row_key(a).cmp(&row_key(b)));
    outcome.aggregate = aggregate(&outcome.report.rows);
    Ok(outcome)
}

fn row_key(r: &ReportRow) -> (Task, DynamicsKind, GraphFamily, String, Metric, u64) {
    (r.task, r.dynamics, r.graph, r.method.clone(), r.metric, r.seed)
}

/// Groups rows by everything except the seed.
pub fn aggregate(rows: &[ReportRow]) -> Vec<AggregateRow> {
    type Key = (Task, DynamicsKind, GraphFamily, String, Metric);
    let mut groups: BTreeMap<Key, (Vec<f64>, usize)> = BTreeMap::new();
    let mut order: Vec<Key> = Vec::new();
    for r in rows {
        let key = (r.task, r.dynamics, r.graph, r.method.clone(), r.metric);
        let entry = groups.entry(key.clone()).or_insert_with(|| {
            order.push(key);
            (Vec::new(), 0)
        });
        entry.1 += 1;
        if let Some(v) = r.value {
            entry.0.push(v);
        }
    }
    order
        .into_iter()
        .map(|key| {
            let (values, _) = &groups[&key];
            let count = values.len();
            let mean = (count > 0).then(|| values.iter().sum::<f64>() / count as f64);
            let std = mean.map(|m| {
                if count < 2 {
                    0.0
                } else {
                    let ss: f64 = values.iter().map(|v| (v - m) * (v - m)).sum();
                    (ss / (count - 1) as f64).sqrt()
                }
            });
            let (task, dynamics, graph, method, metric) = key;
            AggregateRow { task, dynamics, graph, method, metric, mean, std, count }
        })
        .collect()
}
