use std::sync::Arc;

use super::{augment, decode, encode, euler_solve, gnn_ode_rhs, gru_update, AgogVars, ModelError, StepPolicy};
use crate::autodiff::{Matrix, SparseMatrix, Tape, Var};

/// Tape handles produced by one pass over the observed snapshots.
#[derive(Clone, Debug, Default)]
pub struct Rollout {
    /// `x'_i`: decoded solver output at each observation (`x'_0 = x̂_0`).
    pub predicted: Vec<Var>,
    /// `x̂_i`: decoded GRU-updated state at each observation.
    pub updated: Vec<Var>,
    /// Augmented updated hidden state at each observation, the start of the next solve.
    pub anchors: Vec<Var>,
}

fn check_times(times: &[f64], states: usize) -> Result<(), ModelError> {
    if times.len() != states {
        return Err(ModelError::Unsupported(format!(
            "{} observation times for {} states",
            times.len(),
            states
        )));
    }
    if times.is_empty() {
        return Err(ModelError::TooFewObservations { needed: 1, got: 0 });
    }
    if times.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(ModelError::UnsortedTimes);
    }
    Ok(())
}

/// Runs the encode / solve / update / decode cycle over the observations.
pub fn train_rollout(
    tape: &mut Tape,
    vars: &AgogVars,
    phi: &Arc<SparseMatrix>,
    policy: &StepPolicy,
    times: &[f64],
    states: &[&Matrix],
) -> Result<Rollout, ModelError> {
    check_times(times, states.len())?;
    let p = vars.hyper.p;
    let mut out = Rollout::default();

    let x0 = tape.constant(states[0].clone());
    let h0 = encode(tape, vars, x0)?;
    let mut anchor = augment(tape, h0, p)?;
    let x_hat = decode(tape, vars, anchor)?;
    out.predicted.push(x_hat);
    out.updated.push(x_hat);
    out.anchors.push(anchor);

    for i in 1..times.len() {
        let h_pred = euler_solve(tape, anchor, times[i - 1], times[i], policy, |tape, h| {
            gnn_ode_rhs(tape, &vars.ode, phi, h)
        })?;
        out.predicted.push(decode(tape, vars, h_pred)?);
        let x = tape.constant(states[i].clone());
        let h_obs = encode(tape, vars, x)?;
        let fused = gru_update(tape, vars, h_pred, h_obs)?;
        anchor = augment(tape, fused, p)?;
        out.updated.push(decode(tape, vars, anchor)?);
        out.anchors.push(anchor);
    }
    Ok(out)
}

/// How test-time queries are answered.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum InferenceMode {
    /// Solve from the latest observation at or before each query.
    Interpolation,
    /// Chain one solve from the last observation through the sorted queries.
    Extrapolation,
}

/// Predicted states at `queries` given the observed snapshots.
///
/// The observed pass is recorded once; per-query nodes are dropped from the
/// tape after each answer so memory stays bounded by a single solve.
pub fn inference_rollout(
    tape: &mut Tape,
    vars: &AgogVars,
    phi: &Arc<SparseMatrix>,
    policy: &StepPolicy,
    times: &[f64],
    states: &[&Matrix],
    queries: &[f64],
    mode: InferenceMode,
) -> Result<Vec<Matrix>, ModelError> {
    let rollout = train_rollout(tape, vars, phi, policy, times, states)?;
    let first = times[0];
    let last = *times.last().expect("checked non-empty");
    let mark = tape.len();
    let rhs = |tape: &mut Tape, h: Var| gnn_ode_rhs(tape, &vars.ode, phi, h);
    let mut answers = Vec::with_capacity(queries.len());

    match mode {
        InferenceMode::Interpolation => {
            for &q in queries {
                if q < first || q.is_nan() {
                    return Err(ModelError::QueryBeforeFirst { query: q, first });
                }
                let a = times.partition_point(|&t| t <= q) - 1;
                if times[a] == q {
                    answers.push(tape.value(rollout.updated[a]).clone());
                    continue;
                }
                let h = euler_solve(tape, rollout.anchors[a], times[a], q, policy, rhs)?;
                let x = decode(tape, vars, h)?;
                answers.push(tape.value(x).clone());
                tape.truncate(mark);
            }
        }
        InferenceMode::Extrapolation => {
            let mut order: Vec<usize> = (0..queries.len()).collect();
            order.sort_by(|&a, &b| queries[a].total_cmp(&queries[b]));
            let mut slots: Vec<Option<Matrix>> = vec![None; queries.len()];
            let mut state = tape.value(rollout.anchors[times.len() - 1]).clone();
            let mut t = last;
            for i in order {
                let q = queries[i];
                if !(q > last) {
                    return Err(ModelError::QueryNotAfterLast { query: q, last });
                }
                let h0 = tape.constant(state);
                let h = euler_solve(tape, h0, t, q, policy, rhs)?;
                let x = decode(tape, vars, h)?;
                slots[i] = Some(tape.value(x).clone());
                state = tape.value(h).clone();
                t = q;
                tape.truncate(mark);
            }
            answers.extend(slots.into_iter().map(|s| s.expect("every slot filled")));
        }
    }
    Ok(answers)
}
