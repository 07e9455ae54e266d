use std::fmt;
use std::str::FromStr;

use rand::seq::index;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{
    integrate_reference, sample_schedule, Coefficients, DynamicsError, DynamicsKind, DynamicsSpec,
    NetworkSystem, Protocol, Tolerances,
};
use crate::autodiff::Matrix;
use crate::graph::{generate_graph, Graph, GraphFamily, GraphParams};
use crate::{seeded_rng, stream};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SplitLabel {
    Train,
    InterpTest,
    ExtrapTest,
}

impl SplitLabel {
    pub fn as_str(self) -> &'static str {
        match self {
            SplitLabel::Train => "train",
            SplitLabel::InterpTest => "interp_test",
            SplitLabel::ExtrapTest => "extrap_test",
        }
    }
}

impl fmt::Display for SplitLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for SplitLabel {
    type Err = DynamicsError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "train" => Ok(SplitLabel::Train),
            "interp_test" => Ok(SplitLabel::InterpTest),
            "extrap_test" => Ok(SplitLabel::ExtrapTest),
            _ => Err(DynamicsError::Config(format!("unknown split label `{s}`"))),
        }
    }
}

/// Everything needed to build a [`Dataset`] deterministically.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DatasetConfig {
    pub family: GraphFamily,
    pub graph_params: GraphParams,
    pub n: usize,
    pub dynamics: DynamicsKind,
    pub protocol: Protocol,
    /// Fraction of the non-holdout snapshots used for training (irregular protocol only).
    pub train_frac: f64,
    pub horizon: Option<f64>,
    pub seed: u64,
    /// Total snapshot count; defaults to 120 (irregular) or 80 (regular).
    pub snapshots: Option<usize>,
    /// Trailing snapshots held out for extrapolation; defaults to 20 (irregular)
    /// or the last 20% (regular).
    pub holdout: Option<usize>,
    pub tolerances: Tolerances,
    /// Replaces the default coefficient tables.
    pub coefficients: Option<Coefficients>,
    /// Flip the Kuramoto coupling to the classical attractive sign.
    pub classical_kuramoto: bool,
}

impl DatasetConfig {
    pub fn new(family: GraphFamily, dynamics: DynamicsKind, n: usize, protocol: Protocol) -> Self {
        Self {
            family,
            graph_params: GraphParams::default(),
            n,
            dynamics,
            protocol,
            train_frac: 0.1,
            horizon: None,
            seed: 0,
            snapshots: None,
            holdout: None,
            tolerances: Tolerances::default(),
            coefficients: None,
            classical_kuramoto: false,
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_train_frac(mut self, frac: f64) -> Self {
        self.train_frac = frac;
        self
    }

    pub fn horizon(&self) -> f64 {
        self.horizon.unwrap_or_else(|| self.dynamics.default_horizon())
    }

    pub fn snapshot_count(&self) -> usize {
        self.snapshots
            .unwrap_or_else(|| self.protocol.default_snapshots())
    }

    pub fn holdout_count(&self) -> usize {
        let count = self.snapshot_count();
        self.holdout.unwrap_or(match self.protocol {
            Protocol::Irregular => 20,
            Protocol::Regular => count - (0.8 * count as f64).round() as usize,
        })
    }
}

/// Timestamped node-state snapshots of one simulated trajectory, with split labels.
#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    pub graph: Graph,
    pub dynamics: DynamicsSpec,
    pub protocol: Protocol,
    pub train_frac: f64,
    pub horizon: f64,
    pub tolerances: Tolerances,
    pub seed: u64,
    /// State at time 0, where the simulation starts.
    pub initial_state: Matrix,
    pub timestamps: Vec<f64>,
    /// One `n × k` snapshot per timestamp.
    pub states: Vec<Matrix>,
    pub split: Vec<SplitLabel>,
}

/// Times and states of one split, in time order.
#[derive(Clone, Debug)]
pub struct SplitView<'a> {
    pub indices: Vec<usize>,
    pub times: Vec<f64>,
    pub states: Vec<&'a Matrix>,
}

impl Dataset {
    pub fn n(&self) -> usize {
        self.graph.n
    }

    pub fn state_dim(&self) -> usize {
        self.dynamics.state_dim
    }

    /// The first snapshot.
    pub fn x0(&self) -> &Matrix {
        &self.states[0]
    }

    pub fn len(&self) -> usize {
        self.timestamps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.timestamps.is_empty()
    }

    pub fn indices(&self, label: SplitLabel) -> Vec<usize> {
        self.split
            .iter()
            .enumerate()
            .filter(|(_, &l)| l == label)
            .map(|(i, _)| i)
            .collect()
    }

    pub fn count(&self, label: SplitLabel) -> usize {
        self.split.iter().filter(|&&l| l == label).count()
    }

    pub fn view(&self, label: SplitLabel) -> SplitView<'_> {
        let indices = self.indices(label);
        SplitView {
            times: indices.iter().map(|&i| self.timestamps[i]).collect(),
            states: indices.iter().map(|&i| &self.states[i]).collect(),
            indices,
        }
    }

    pub fn train_view(&self) -> SplitView<'_> {
        self.view(SplitLabel::Train)
    }

    /// Checks the structural invariants.
    pub fn validate(&self) -> Result<(), DynamicsError> {
        let t = self.timestamps.len();
        if self.states.len() != t || self.split.len() != t {
            return Err(DynamicsError::Config(format!(
                "{} timestamps, {} states, {} split labels",
                t,
                self.states.len(),
                self.split.len()
            )));
        }
        if self.timestamps.windows(2).any(|w| w[1] <= w[0]) {
            return Err(DynamicsError::Config(
                "timestamps must be strictly increasing".into(),
            ));
        }
        let shape = (self.n(), self.state_dim());
        if self.initial_state.shape() != shape || self.states.iter().any(|s| s.shape() != shape) {
            return Err(DynamicsError::Config(format!(
                "every state must be {}x{}",
                shape.0, shape.1
            )));
        }
        self.dynamics.validate(self.n())?;
        Ok(())
    }

    /// Re-runs the reference integration from the stored initial state.
    pub fn reintegrate(&self, times: &[f64]) -> Result<Vec<Matrix>, DynamicsError> {
        simulate(
            &self.dynamics,
            &self.graph,
            &self.initial_state,
            times,
            self.tolerances,
        )
    }
}

/// Integrates `spec` on `graph` from `initial` at time 0 to every time in `times`.
pub fn simulate(
    spec: &DynamicsSpec,
    graph: &Graph,
    initial: &Matrix,
    times: &[f64],
    tolerances: Tolerances,
) -> Result<Vec<Matrix>, DynamicsError> {
    let system = NetworkSystem::new(spec, graph)?;
    let trajectory = integrate_reference(
        |_, z, dz| system.eval(z, dz),
        0.0,
        initial.as_slice(),
        times,
        tolerances,
    )?;
    trajectory
        .into_iter()
        .map(|v| {
            Matrix::from_vec(graph.n, spec.state_dim, v)
                .map_err(|e| DynamicsError::Config(e.to_string()))
        })
        .collect()
}

/// Generates the graph, simulates the dynamics and samples the labelled snapshots.
pub fn build_dataset(config: &DatasetConfig) -> Result<Dataset, DynamicsError> {
    let count = config.snapshot_count();
    let holdout = config.holdout_count();
    if holdout >= count {
        return Err(DynamicsError::Config(format!(
            "holdout {holdout} leaves no training snapshots out of {count}"
        )));
    }
    let observable = count - holdout;
    let train_count = match config.protocol {
        Protocol::Irregular => {
            if !(config.train_frac > 0.0 && config.train_frac <= 1.0) {
                return Err(DynamicsError::Config(format!(
                    "train fraction must be in (0, 1], got {}",
                    config.train_frac
                )));
            }
            (observable as f64 * config.train_frac).round() as usize
        }
        Protocol::Regular => observable,
    };
    if train_count < 2 {
        return Err(DynamicsError::Config(format!(
            "only {train_count} training snapshots; at least 2 are needed"
        )));
    }

    let graph = generate_graph(config.family, config.n, &config.graph_params, config.seed)?;
    let mut dynamics = match &config.coefficients {
        Some(c) => DynamicsSpec {
            coefficients: c.clone(),
            state_dim: 1,
        },
        None => DynamicsSpec::default_for(config.dynamics, config.n, config.seed),
    };
    if dynamics.kind() != config.dynamics {
        return Err(DynamicsError::Config(format!(
            "coefficients are for {} but dynamics is {}",
            dynamics.kind(),
            config.dynamics
        )));
    }
    if config.classical_kuramoto {
        if let Coefficients::Kuramoto { sign, .. } = &mut dynamics.coefficients {
            *sign = -*sign;
        }
    }
    dynamics.validate(config.n)?;

    let horizon = config.horizon();
    let timestamps = sample_schedule(config.protocol, horizon, count, config.seed)?;

    let (lo, hi) = config.dynamics.initial_range();
    let mut rng = seeded_rng(config.seed, stream::INITIAL_STATE);
    let initial_state = Matrix::from_fn(config.n, dynamics.state_dim, |_, _| {
        lo + (hi - lo) * rng.gen::<f64>()
    });
    let states = simulate(
        &dynamics,
        &graph,
        &initial_state,
        &timestamps,
        config.tolerances,
    )?;

    let mut split = vec![SplitLabel::ExtrapTest; count];
    match config.protocol {
        Protocol::Irregular => {
            split[..observable].fill(SplitLabel::InterpTest);
            // The first snapshot anchors every rollout and is always observed.
            split[0] = SplitLabel::Train;
            let mut rng = seeded_rng(config.seed, stream::SPLIT);
            for i in index::sample(&mut rng, observable - 1, train_count - 1) {
                split[i + 1] = SplitLabel::Train;
            }
        }
        Protocol::Regular => split[..observable].fill(SplitLabel::Train),
    }

    let dataset = Dataset {
        graph,
        dynamics,
        protocol: config.protocol,
        train_frac: config.train_frac,
        horizon,
        tolerances: config.tolerances,
        seed: config.seed,
        initial_state,
        timestamps,
        states,
        split,
    };
    dataset.validate()?;
    Ok(dataset)
}
