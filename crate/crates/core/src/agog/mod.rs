//! Autoregressive GNN-ODE-GRU model.
//!
//! Observations are encoded into an `n × d` hidden state, padded with `p`
//! zero columns, and carried to the next observation time by explicit Euler
//! steps of a graph ODE. At each observed time a GRU cell fuses the solver
//! output with the encoding of the new observation, and the fused state is
//! re-padded to start the next solve. Both the solver output and the fused
//! state are decoded, giving the prediction `x'` and the updated prediction
//! `x̂` used by the two-term loss.

mod gru;
mod rollout;

use std::sync::Arc;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::autodiff::{BoundParams, Matrix, ParamSet, SparseMatrix, Tape, TensorError, Var};
use crate::{seeded_rng, stream};

pub use gru::GruVars;
pub(crate) use gru::init_gru;
pub use rollout::{inference_rollout, train_rollout, InferenceMode, Rollout};

#[derive(Debug, Error)]
pub enum ModelError {
    #[error(transparent)]
    Tensor(#[from] TensorError),
    #[error("non-finite state after Euler sub-step {substep} of {total}")]
    NonFiniteState { substep: usize, total: usize },
    #[error("solve interval runs backwards: {start} -> {end}")]
    BackwardInterval { start: f64, end: f64 },
    #[error("need at least {needed} observations, got {got}")]
    TooFewObservations { needed: usize, got: usize },
    #[error("observation times must be strictly increasing")]
    UnsortedTimes,
    #[error("query time {query} precedes the first observation at {first}")]
    QueryBeforeFirst { query: f64, first: f64 },
    #[error("extrapolation query {query} is not after the last observation at {last}")]
    QueryNotAfterLast { query: f64, last: f64 },
    #[error("{0}")]
    Unsupported(String),
}

/// Sub-step policy for the fixed-step Euler solver.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct StepPolicy {
    /// Largest allowed sub-step.
    pub max_step: f64,
}

impl StepPolicy {
    /// Default policy: 200 sub-steps across the dataset horizon.
    pub fn for_horizon(horizon: f64) -> Self {
        Self {
            max_step: horizon / 200.0,
        }
    }

    /// Number of uniform sub-steps for an interval of length `gap > 0`.
    pub fn substeps(&self, gap: f64) -> usize {
        // Guard against gaps that are an exact multiple of the step up to rounding.
        let m = (gap / self.max_step - 1e-9).ceil();
        if m.is_finite() && m >= 1.0 {
            m as usize
        } else {
            1
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct AgogHyper {
    /// Node count.
    pub n: usize,
    /// Node-state dimension.
    pub k: usize,
    /// Hidden dimension.
    pub d: usize,
    /// Augmented (zero-initialized) dimension.
    pub p: usize,
}

impl AgogHyper {
    pub fn new(n: usize, k: usize, d: usize, p: usize) -> Self {
        Self { n, k, d, p }
    }

    /// Width of the augmented hidden state.
    pub fn width(&self) -> usize {
        self.d + self.p
    }
}

/// Uniform on `±sqrt(1 / rows)`.
pub(crate) fn init_weight(rows: usize, cols: usize, rng: &mut ChaCha8Rng) -> Matrix {
    let bound = (1.0 / rows.max(1) as f64).sqrt();
    Matrix::from_fn(rows, cols, |_, _| rng.gen_range(-bound..=bound))
}

/// All trainable tensors of the model.
///
/// | name | shape |
/// |---|---|
/// | `W_e`, `b_e` | `k×d`, `n×d` |
/// | `theta_1`, `theta_0`, `b_0` | `(d+p)×(d+p)`, `(d+p)×(d+p)`, `n×(d+p)` |
/// | `W_o`, `b_o` | `(d+p)×k`, `n×k` |
/// | `W_r`, `W_z`, `W_h` | `(d+p)×d` |
/// | `U_r`, `U_z`, `U_h` | `d×d` |
/// | `b_wr`, `b_ur`, `b_wz`, `b_uz`, `b_wh`, `b_uh` | `n×d` |
#[derive(Clone, Debug, PartialEq)]
pub struct AgogParams {
    pub hyper: AgogHyper,
    pub set: ParamSet,
}

impl AgogParams {
    pub fn init(hyper: AgogHyper, seed: u64) -> Self {
        let AgogHyper { n, k, d, p } = hyper;
        let w = d + p;
        let mut rng = seeded_rng(seed, stream::PARAM_INIT);
        let mut set = ParamSet::new();
        set.push("W_e", init_weight(k, d, &mut rng));
        set.push("b_e", Matrix::zeros(n, d));
        set.push("theta_1", init_weight(w, w, &mut rng));
        set.push("theta_0", init_weight(w, w, &mut rng));
        set.push("b_0", Matrix::zeros(n, w));
        set.push("W_o", init_weight(w, k, &mut rng));
        set.push("b_o", Matrix::zeros(n, k));
        init_gru(&mut set, "", n, w, d, &mut rng);
        Self { hyper, set }
    }

    /// Wraps an existing tensor set, checking every expected name and shape.
    pub fn from_set(hyper: AgogHyper, set: ParamSet) -> Result<Self, ModelError> {
        let AgogHyper { n, k, d, p } = hyper;
        let w = d + p;
        let expected: [(&str, (usize, usize)); 19] = [
            ("W_e", (k, d)),
            ("b_e", (n, d)),
            ("theta_1", (w, w)),
            ("theta_0", (w, w)),
            ("b_0", (n, w)),
            ("W_o", (w, k)),
            ("b_o", (n, k)),
            ("W_r", (w, d)),
            ("W_z", (w, d)),
            ("W_h", (w, d)),
            ("U_r", (d, d)),
            ("U_z", (d, d)),
            ("U_h", (d, d)),
            ("b_wr", (n, d)),
            ("b_ur", (n, d)),
            ("b_wz", (n, d)),
            ("b_uz", (n, d)),
            ("b_wh", (n, d)),
            ("b_uh", (n, d)),
        ];
        check_shapes(&set, &expected)?;
        Ok(Self { hyper, set })
    }

    /// Records the parameters on `tape`.
    pub fn bind(&self, tape: &mut Tape) -> Result<(BoundParams, AgogVars), ModelError> {
        let bound = self.set.bind(tape);
        let vars = AgogVars::from_bound(&bound, self.hyper)?;
        Ok((bound, vars))
    }
}

pub(crate) fn check_shapes(
    set: &ParamSet,
    expected: &[(&str, (usize, usize))],
) -> Result<(), ModelError> {
    if set.len() != expected.len() {
        return Err(ModelError::Unsupported(format!(
            "expected {} parameter tensors, found {}",
            expected.len(),
            set.len()
        )));
    }
    for &(name, shape) in expected {
        let m = set.by_name(name)?;
        if m.shape() != shape {
            return Err(TensorError::ShapeMismatch {
                op: "parameter shape",
                left: shape,
                right: m.shape(),
            }
            .into());
        }
    }
    Ok(())
}

/// Graph ODE weights: `dh/dt = Φ h θ_1 + h θ_0 + b_0`.
#[derive(Clone, Copy, Debug)]
pub struct GnnOdeVars {
    pub theta_1: Var,
    pub theta_0: Var,
    pub b_0: Var,
}

/// Tape handles for [`AgogParams`].
#[derive(Clone, Copy, Debug)]
pub struct AgogVars {
    pub hyper: AgogHyper,
    pub w_e: Var,
    pub b_e: Var,
    pub ode: GnnOdeVars,
    pub w_o: Var,
    pub b_o: Var,
    pub gru: GruVars,
}

impl AgogVars {
    pub fn from_bound(bound: &BoundParams, hyper: AgogHyper) -> Result<Self, ModelError> {
        Ok(Self {
            hyper,
            w_e: bound.var("W_e")?,
            b_e: bound.var("b_e")?,
            ode: GnnOdeVars {
                theta_1: bound.var("theta_1")?,
                theta_0: bound.var("theta_0")?,
                b_0: bound.var("b_0")?,
            },
            w_o: bound.var("W_o")?,
            b_o: bound.var("b_o")?,
            gru: GruVars::bind(bound, "")?,
        })
    }
}

/// `x W_e + b_e`
pub fn encode(tape: &mut Tape, vars: &AgogVars, x: Var) -> Result<Var, ModelError> {
    let xw = tape.matmul(x, vars.w_e)?;
    Ok(tape.add(xw, vars.b_e)?)
}

/// `h W_o + b_o`, applied to both solver outputs and re-padded updated states.
pub fn decode(tape: &mut Tape, vars: &AgogVars, h: Var) -> Result<Var, ModelError> {
    let hw = tape.matmul(h, vars.w_o)?;
    Ok(tape.add(hw, vars.b_o)?)
}

/// Appends `p` zero columns. `p = 0` returns `h` unchanged.
pub fn augment(tape: &mut Tape, h: Var, p: usize) -> Result<Var, ModelError> {
    if p == 0 {
        return Ok(h);
    }
    let rows = tape.shape(h).0;
    let zeros = tape.constant(Matrix::zeros(rows, p));
    Ok(tape.concat_cols(h, zeros)?)
}

/// `Φ h θ_1 + h θ_0 + b_0`. Time does not enter explicitly.
pub fn gnn_ode_rhs(
    tape: &mut Tape,
    ode: &GnnOdeVars,
    phi: &Arc<SparseMatrix>,
    h: Var,
) -> Result<Var, ModelError> {
    let mixed = tape.matmul(h, ode.theta_1)?;
    let diffused = tape.propagate(phi, mixed)?;
    let own = tape.matmul(h, ode.theta_0)?;
    Ok(tape.add_all(&[diffused, own, ode.b_0])?)
}

/// Explicit Euler from `t_start` to `t_end` with uniform sub-steps chosen by
/// `policy`, recorded on the tape so gradients flow through every step.
///
/// A zero-length interval returns `h_start` itself.
pub fn euler_solve<F>(
    tape: &mut Tape,
    h_start: Var,
    t_start: f64,
    t_end: f64,
    policy: &StepPolicy,
    mut rhs: F,
) -> Result<Var, ModelError>
where
    F: FnMut(&mut Tape, Var) -> Result<Var, ModelError>,
{
    if !(t_end >= t_start) {
        return Err(ModelError::BackwardInterval {
            start: t_start,
            end: t_end,
        });
    }
    if t_end == t_start {
        return Ok(h_start);
    }
    let total = policy.substeps(t_end - t_start);
    let dt = (t_end - t_start) / total as f64;
    let mut h = h_start;
    for substep in 1..=total {
        let slope = rhs(tape, h)?;
        let delta = tape.scale(slope, dt);
        h = tape.add(h, delta)?;
        if !tape.value(h).is_finite() {
            return Err(ModelError::NonFiniteState { substep, total });
        }
    }
    Ok(h)
}

/// GRU fusion of the solver output `h_pred` (`n×(d+p)`) with the observation
/// encoding `h_obs` (`n×d`). A saturated update gate returns `h_obs`.
pub fn gru_update(
    tape: &mut Tape,
    vars: &AgogVars,
    h_pred: Var,
    h_obs: Var,
) -> Result<Var, ModelError> {
    vars.gru.step(tape, h_pred, h_obs)
}
