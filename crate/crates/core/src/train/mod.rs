//! Training loops, evaluation tasks, metrics and experiment matrices.

mod eval;
mod loss;
mod matrix;

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::agog::{inference_rollout, train_rollout, AgogHyper, AgogParams, InferenceMode, StepPolicy};
use crate::autodiff::{
    adam_step, AdamConfig, AdamState, BoundParams, Matrix, ParamSet, SparseMatrix, Tape, Var,
};
use crate::baselines::{
    ndcn_forward, ndcn_loss, ndcn_predict, temporal_gnn_forward, temporal_gnn_predict, CellKind,
    NdcnHyper, NdcnParams, TemporalGnnHyper, TemporalGnnParams,
};
use crate::dynamics::{Dataset, Protocol, SplitLabel};
use crate::error::{Error, Result};
use crate::graph::normalized_laplacian;

pub use eval::{
    error_over_time, evaluate, metrics, EvalReport, Metric, Metrics, ReportRow, SeriesRow, Task,
};
pub use loss::agog_loss;
pub use matrix::{
    aggregate, run_experiment_matrix, AggregateRow, CellFailure, MatrixOptions, MatrixOutcome,
    MatrixSpec,
};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ModelKind {
    #[serde(rename = "agog")]
    Agog,
    /// AGOG trained without the continuity term.
    #[serde(rename = "agog-star")]
    AgogStar,
    #[serde(rename = "ndcn")]
    Ndcn,
    #[serde(rename = "gru-gnn")]
    GruGnn,
    #[serde(rename = "lstm-gnn")]
    LstmGnn,
    #[serde(rename = "rnn-gnn")]
    RnnGnn,
    /// Answers every query with the ground truth. Used to test the evaluation path.
    #[serde(rename = "oracle")]
    Oracle,
}

impl ModelKind {
    pub const ALL: [ModelKind; 7] = [
        ModelKind::Agog,
        ModelKind::AgogStar,
        ModelKind::Ndcn,
        ModelKind::GruGnn,
        ModelKind::LstmGnn,
        ModelKind::RnnGnn,
        ModelKind::Oracle,
    ];

    /// Command-line spelling.
    pub fn as_str(self) -> &'static str {
        match self {
            ModelKind::Agog => "agog",
            ModelKind::AgogStar => "agog-star",
            ModelKind::Ndcn => "ndcn",
            ModelKind::GruGnn => "gru-gnn",
            ModelKind::LstmGnn => "lstm-gnn",
            ModelKind::RnnGnn => "rnn-gnn",
            ModelKind::Oracle => "oracle",
        }
    }

    /// Name used in report tables.
    pub fn method_name(self) -> &'static str {
        match self {
            ModelKind::Agog => "AGOG",
            ModelKind::AgogStar => "AGOG*",
            ModelKind::Ndcn => "NDCN",
            ModelKind::GruGnn => "GRU-GNN",
            ModelKind::LstmGnn => "LSTM-GNN",
            ModelKind::RnnGnn => "RNN-GNN",
            ModelKind::Oracle => "Oracle",
        }
    }

    pub fn cell(self) -> Option<CellKind> {
        match self {
            ModelKind::GruGnn => Some(CellKind::Gru),
            ModelKind::LstmGnn => Some(CellKind::Lstm),
            ModelKind::RnnGnn => Some(CellKind::Rnn),
            _ => None,
        }
    }

    /// Whether the model can be trained on and evaluated with `task`.
    pub fn supports(self, task: Task) -> bool {
        self.cell().is_none() || task == Task::Regular
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ModelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let lower = s.to_ascii_lowercase();
        ModelKind::ALL
            .into_iter()
            .find(|m| m.as_str() == lower || m.method_name().to_ascii_lowercase() == lower)
            .ok_or_else(|| Error::Config(format!("unknown model `{s}`")))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub model: ModelKind,
    pub epochs: usize,
    pub lr: f64,
    pub seed: u64,
    /// Hidden width `d` of AGOG and NDCN.
    pub hidden: usize,
    /// Augmented width `p` of AGOG.
    pub augment: usize,
    /// Graph-convolution width of the temporal baselines.
    pub gcn_hidden: usize,
    /// Recurrent width of the temporal baselines.
    pub rnn_hidden: usize,
    /// Euler sub-step bound; `None` uses the dataset horizon / 200.
    pub step_policy: Option<StepPolicy>,
    pub continuity: bool,
}

impl TrainConfig {
    pub fn new(model: ModelKind) -> Self {
        Self {
            model,
            epochs: 800,
            lr: 0.01,
            seed: 0,
            hidden: 20,
            augment: 5,
            gcn_hidden: 10,
            rnn_hidden: 5,
            step_policy: None,
            continuity: model != ModelKind::AgogStar,
        }
    }

    pub fn with_epochs(mut self, epochs: usize) -> Self {
        self.epochs = epochs;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return Err(Error::Config(format!("learning rate must be positive, got {}", self.lr)));
        }
        if self.hidden == 0 || self.gcn_hidden == 0 || self.rnn_hidden == 0 {
            return Err(Error::Config("hidden sizes must be positive".into()));
        }
        if let Some(p) = self.step_policy {
            if !(p.max_step > 0.0 && p.max_step.is_finite()) {
                return Err(Error::Config(format!("Euler step must be positive, got {}", p.max_step)));
            }
        }
        Ok(())
    }
}

/// Trainable tensors of any model kind.
#[derive(Clone, Debug, PartialEq)]
pub enum ModelParams {
    Agog(AgogParams),
    Ndcn(NdcnParams),
    Temporal(TemporalGnnParams),
    Oracle,
}

impl ModelParams {
    /// Fresh seeded parameters for a graph of `n` nodes with `k`-dimensional states.
    pub fn init(config: &TrainConfig, n: usize, k: usize) -> Self {
        match config.model {
            ModelKind::Agog | ModelKind::AgogStar => ModelParams::Agog(AgogParams::init(
                AgogHyper::new(n, k, config.hidden, config.augment),
                config.seed,
            )),
            ModelKind::Ndcn => ModelParams::Ndcn(NdcnParams::init(
                NdcnHyper { n, k, d: config.hidden },
                config.seed,
            )),
            ModelKind::GruGnn | ModelKind::LstmGnn | ModelKind::RnnGnn => {
                ModelParams::Temporal(TemporalGnnParams::init(
                    TemporalGnnHyper {
                        n,
                        k,
                        g1: config.gcn_hidden,
                        g2: config.rnn_hidden,
                        cell: config.model.cell().expect("temporal kind"),
                    },
                    config.seed,
                ))
            }
            ModelKind::Oracle => ModelParams::Oracle,
        }
    }

    /// Rebuilds parameters from a stored tensor set, checking every shape.
    pub fn from_set(config: &TrainConfig, n: usize, k: usize, set: ParamSet) -> Result<Self> {
        Ok(match Self::init(config, n, k) {
            ModelParams::Agog(p) => ModelParams::Agog(AgogParams::from_set(p.hyper, set)?),
            ModelParams::Ndcn(p) => ModelParams::Ndcn(NdcnParams::from_set(p.hyper, set)?),
            ModelParams::Temporal(p) => {
                ModelParams::Temporal(TemporalGnnParams::from_set(p.hyper, set)?)
            }
            ModelParams::Oracle => {
                if !set.is_empty() {
                    return Err(Error::Format("oracle checkpoints carry no tensors".into()));
                }
                ModelParams::Oracle
            }
        })
    }

    pub fn set(&self) -> Option<&ParamSet> {
        match self {
            ModelParams::Agog(p) => Some(&p.set),
            ModelParams::Ndcn(p) => Some(&p.set),
            ModelParams::Temporal(p) => Some(&p.set),
            ModelParams::Oracle => None,
        }
    }

    fn set_mut(&mut self) -> Option<&mut ParamSet> {
        match self {
            ModelParams::Agog(p) => Some(&mut p.set),
            ModelParams::Ndcn(p) => Some(&mut p.set),
            ModelParams::Temporal(p) => Some(&mut p.set),
            ModelParams::Oracle => None,
        }
    }
}

/// A model together with everything needed to resume or evaluate it.
#[derive(Clone, Debug, PartialEq)]
pub struct TrainedModel {
    pub config: TrainConfig,
    pub n: usize,
    pub k: usize,
    /// Sub-step policy resolved against the training dataset.
    pub policy: StepPolicy,
    pub params: ModelParams,
    pub adam: AdamConfig,
    pub optimizer: AdamState,
    /// Full-batch loss before each update.
    pub loss_trace: Vec<f64>,
}

impl TrainedModel {
    /// Untrained model with seeded parameters, sized for `dataset`.
    pub fn initialize(dataset: &Dataset, config: &TrainConfig) -> Result<Self> {
        config.validate()?;
        let (n, k) = (dataset.n(), dataset.state_dim());
        let params = ModelParams::init(config, n, k);
        let optimizer = AdamState::new(params.set().unwrap_or(&ParamSet::new()));
        Ok(Self {
            config: config.clone(),
            n,
            k,
            policy: config
                .step_policy
                .unwrap_or_else(|| StepPolicy::for_horizon(dataset.horizon)),
            params,
            adam: AdamConfig::with_lr(config.lr),
            optimizer,
            loss_trace: Vec::new(),
        })
    }

    pub fn kind(&self) -> ModelKind {
        self.config.model
    }

    fn check_dataset(&self, dataset: &Dataset) -> Result<()> {
        if dataset.n() != self.n || dataset.state_dim() != self.k {
            return Err(Error::Incompatible(format!(
                "model is sized for {} nodes x {} dims, dataset has {} x {}",
                self.n,
                self.k,
                dataset.n(),
                dataset.state_dim()
            )));
        }
        if self.kind().cell().is_some() && dataset.protocol != Protocol::Regular {
            return Err(Error::Incompatible(format!(
                "{} needs an equally spaced (regular) dataset",
                self.kind().method_name()
            )));
        }
        Ok(())
    }

    /// Runs `epochs` more full-batch epochs, calling `progress(epoch, loss)` after each.
    pub fn fit(
        &mut self,
        dataset: &Dataset,
        epochs: usize,
        mut progress: impl FnMut(usize, f64),
    ) -> Result<()> {
        self.check_dataset(dataset)?;
        if matches!(self.params, ModelParams::Oracle) {
            return Ok(());
        }
        let phi = laplacian_operator(dataset)?;
        let view = dataset.train_view();
        if view.times.len() < 2 {
            return Err(Error::MissingSplit("train"));
        }
        let mut tape = Tape::new();
        for _ in 0..epochs {
            let epoch = self.loss_trace.len();
            tape.reset();
            let (loss, grads) = {
                let (loss, bound) = self.record_loss(&mut tape, &phi, &view.times, &view.states)?;
                let value = tape.scalar(loss);
                if !value.is_finite() {
                    return Err(Error::NonFiniteLoss { epoch, value });
                }
                tape.backward(loss)?;
                (value, bound.take_grads(&mut tape))
            };
            let set = self.params.set_mut().expect("trainable");
            adam_step(set, &grads, &mut self.optimizer, &self.adam)?;
            self.loss_trace.push(loss);
            progress(epoch, loss);
        }
        Ok(())
    }

    /// Binds the parameters and records the training loss on `tape`.
    fn record_loss(
        &self,
        tape: &mut Tape,
        phi: &Arc<SparseMatrix>,
        times: &[f64],
        states: &[&Matrix],
    ) -> Result<(Var, BoundParams)> {
        let observed = |tape: &mut Tape, states: &[&Matrix]| -> Vec<Var> {
            states.iter().map(|s| tape.constant((*s).clone())).collect()
        };
        Ok(match &self.params {
            ModelParams::Agog(p) => {
                let (bound, vars) = p.bind(tape)?;
                let r = train_rollout(tape, &vars, phi, &self.policy, times, states)?;
                let x = observed(tape, states);
                (agog_loss(tape, &r.predicted, &r.updated, &x, self.config.continuity)?, bound)
            }
            ModelParams::Ndcn(p) => {
                let (bound, vars) = p.bind(tape)?;
                let preds = ndcn_forward(tape, &vars, phi, states[0], times[0], times, &self.policy)?;
                let x = observed(tape, states);
                (ndcn_loss(tape, &preds, &x)?, bound)
            }
            ModelParams::Temporal(p) => {
                let (bound, vars) = p.bind(tape)?;
                let preds = temporal_gnn_forward(tape, &vars, phi, &states[..states.len() - 1])?;
                let x = observed(tape, &states[1..]);
                (ndcn_loss(tape, &preds, &x)?, bound)
            }
            ModelParams::Oracle => unreachable!("oracle is never trained"),
        })
    }

    /// Model output at each query time of `task`, in the split's time order.
    ///
    /// Only the training split of `dataset` reaches the model; the oracle
    /// alone reads test states.
    pub fn predict(&self, dataset: &Dataset, task: Task) -> Result<(Vec<usize>, Vec<Matrix>)> {
        self.check_dataset(dataset)?;
        let label = task.check(dataset)?;
        if !self.kind().supports(task) {
            return Err(Error::Incompatible(format!(
                "{} only supports the regular task",
                self.kind().method_name()
            )));
        }
        let queries = dataset.view(label);
        let predictions = self.predict_times(dataset, &queries.times, task)?;
        Ok((queries.indices, predictions))
    }

    /// Model output at arbitrary times, answered as `task` would answer them.
    pub fn predict_times(&self, dataset: &Dataset, queries: &[f64], task: Task) -> Result<Vec<Matrix>> {
        self.check_dataset(dataset)?;
        let train = dataset.train_view();
        if train.times.is_empty() {
            return Err(Error::MissingSplit("train"));
        }
        if queries.is_empty() {
            return Ok(Vec::new());
        }
        let phi = laplacian_operator(dataset)?;
        let mut tape = Tape::new();
        Ok(match &self.params {
            ModelParams::Agog(p) => {
                let (_, vars) = p.bind(&mut tape)?;
                let mode = match task {
                    Task::Interp => InferenceMode::Interpolation,
                    Task::Extrap | Task::Regular => InferenceMode::Extrapolation,
                };
                inference_rollout(&mut tape, &vars, &phi, &self.policy, &train.times, &train.states, queries, mode)?
            }
            ModelParams::Ndcn(p) => {
                let (_, vars) = p.bind(&mut tape)?;
                let mut order: Vec<usize> = (0..queries.len()).collect();
                order.sort_by(|&a, &b| queries[a].total_cmp(&queries[b]));
                let sorted: Vec<f64> = order.iter().map(|&i| queries[i]).collect();
                let preds = ndcn_predict(&mut tape, &vars, &phi, train.states[0], train.times[0], &sorted, &self.policy)?;
                let mut out = vec![Matrix::zeros(0, 0); queries.len()];
                for (pred, i) in preds.into_iter().zip(order) {
                    out[i] = pred;
                }
                out
            }
            ModelParams::Temporal(p) => {
                let (_, vars) = p.bind(&mut tape)?;
                let last = *train.times.last().expect("non-empty");
                let spacing = if train.times.len() > 1 {
                    train.times[1] - train.times[0]
                } else {
                    return Err(Error::MissingSplit("train"));
                };
                let mut steps = Vec::with_capacity(queries.len());
                for &q in queries {
                    let s = ((q - last) / spacing).round();
                    if !(s >= 1.0) || ((q - last) - s * spacing).abs() > 1e-6 * spacing.max(1.0) {
                        return Err(Error::Incompatible(format!(
                            "query {q} is not a whole number of steps after the last observation {last}"
                        )));
                    }
                    steps.push(s as usize);
                }
                let horizon = *steps.iter().max().expect("non-empty");
                let rolled = temporal_gnn_predict(&mut tape, &vars, &phi, &train.states, horizon)?;
                steps.iter().map(|&s| rolled[s - 1].clone()).collect()
            }
            ModelParams::Oracle => oracle_states(dataset, queries)?,
        })
    }
}

/// Stored states where a query hits a snapshot exactly, re-integration elsewhere.
fn oracle_states(dataset: &Dataset, queries: &[f64]) -> Result<Vec<Matrix>> {
    let mut out = Vec::with_capacity(queries.len());
    for &q in queries {
        match dataset.timestamps.iter().position(|&t| t == q) {
            Some(i) => out.push(dataset.states[i].clone()),
            None => out.extend(dataset.reintegrate(&[q])?),
        }
    }
    Ok(out)
}

/// Sparse normalized Laplacian of the dataset graph.
pub fn laplacian_operator(dataset: &Dataset) -> Result<Arc<SparseMatrix>> {
    let phi = normalized_laplacian(&dataset.graph).phi;
    Ok(Arc::new(SparseMatrix::from_dense(&phi)?))
}

/// Initializes `config.model` for `dataset` and trains it for `config.epochs` epochs.
pub fn train(dataset: &Dataset, config: &TrainConfig) -> Result<TrainedModel> {
    train_with_progress(dataset, config, |_, _| {})
}

pub fn train_with_progress(
    dataset: &Dataset,
    config: &TrainConfig,
    progress: impl FnMut(usize, f64),
) -> Result<TrainedModel> {
    let mut model = TrainedModel::initialize(dataset, config)?;
    if dataset.count(SplitLabel::Train) < 2 {
        return Err(Error::MissingSplit("train"));
    }
    model.fit(dataset, config.epochs, progress)?;
    Ok(model)
}
