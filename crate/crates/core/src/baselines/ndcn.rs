use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::agog::{check_shapes, euler_solve, init_weight, GnnOdeVars, ModelError, StepPolicy};
use crate::autodiff::{BoundParams, Matrix, ParamSet, SparseMatrix, Tape, TensorError, Var};
use crate::{seeded_rng, stream};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct NdcnHyper {
    pub n: usize,
    pub k: usize,
    pub d: usize,
}

/// `W_e: k×d`, `b_e: n×d`, `theta_1, theta_0: d×d`, `b_0: n×d`, `W_o: d×k`, `b_o: n×k`.
#[derive(Clone, Debug, PartialEq)]
pub struct NdcnParams {
    pub hyper: NdcnHyper,
    pub set: ParamSet,
}

impl NdcnParams {
    pub fn init(hyper: NdcnHyper, seed: u64) -> Self {
        let NdcnHyper { n, k, d } = hyper;
        let mut rng = seeded_rng(seed, stream::PARAM_INIT);
        let mut set = ParamSet::new();
        set.push("W_e", init_weight(k, d, &mut rng));
        set.push("b_e", Matrix::zeros(n, d));
        set.push("theta_1", init_weight(d, d, &mut rng));
        set.push("theta_0", init_weight(d, d, &mut rng));
        set.push("b_0", Matrix::zeros(n, d));
        set.push("W_o", init_weight(d, k, &mut rng));
        set.push("b_o", Matrix::zeros(n, k));
        Self { hyper, set }
    }

    pub fn from_set(hyper: NdcnHyper, set: ParamSet) -> Result<Self, ModelError> {
        let NdcnHyper { n, k, d } = hyper;
        check_shapes(
            &set,
            &[
                ("W_e", (k, d)),
                ("b_e", (n, d)),
                ("theta_1", (d, d)),
                ("theta_0", (d, d)),
                ("b_0", (n, d)),
                ("W_o", (d, k)),
                ("b_o", (n, k)),
            ],
        )?;
        Ok(Self { hyper, set })
    }

    pub fn bind(&self, tape: &mut Tape) -> Result<(BoundParams, NdcnVars), ModelError> {
        let bound = self.set.bind(tape);
        let vars = NdcnVars {
            w_e: bound.var("W_e")?,
            b_e: bound.var("b_e")?,
            ode: GnnOdeVars {
                theta_1: bound.var("theta_1")?,
                theta_0: bound.var("theta_0")?,
                b_0: bound.var("b_0")?,
            },
            w_o: bound.var("W_o")?,
            b_o: bound.var("b_o")?,
        };
        Ok((bound, vars))
    }
}

#[derive(Clone, Copy, Debug)]
pub struct NdcnVars {
    pub w_e: Var,
    pub b_e: Var,
    pub ode: GnnOdeVars,
    pub w_o: Var,
    pub b_o: Var,
}

impl NdcnVars {
    fn encode(&self, tape: &mut Tape, x: Var) -> Result<Var, ModelError> {
        let xw = tape.matmul(x, self.w_e)?;
        Ok(tape.add(xw, self.b_e)?)
    }

    fn decode(&self, tape: &mut Tape, h: Var) -> Result<Var, ModelError> {
        let hw = tape.matmul(h, self.w_o)?;
        Ok(tape.add(hw, self.b_o)?)
    }

    fn rhs(&self, tape: &mut Tape, phi: &Arc<SparseMatrix>, h: Var) -> Result<Var, ModelError> {
        crate::agog::gnn_ode_rhs(tape, &self.ode, phi, h)
    }
}

fn check_queries(t0: f64, queries: &[f64]) -> Result<(), ModelError> {
    if let Some(&q) = queries.first() {
        if q < t0 || q.is_nan() {
            return Err(ModelError::QueryBeforeFirst { query: q, first: t0 });
        }
    }
    if queries.windows(2).any(|w| !(w[1] >= w[0])) {
        return Err(ModelError::UnsortedTimes);
    }
    Ok(())
}

/// Encodes `x0` once and decodes one chained solve at each sorted query time.
pub fn ndcn_forward(
    tape: &mut Tape,
    vars: &NdcnVars,
    phi: &Arc<SparseMatrix>,
    x0: &Matrix,
    t0: f64,
    queries: &[f64],
    policy: &StepPolicy,
) -> Result<Vec<Var>, ModelError> {
    check_queries(t0, queries)?;
    let x = tape.constant(x0.clone());
    let mut h = vars.encode(tape, x)?;
    let mut t = t0;
    let mut out = Vec::with_capacity(queries.len());
    for &q in queries {
        h = euler_solve(tape, h, t, q, policy, |tape, h| vars.rhs(tape, phi, h))?;
        t = q;
        out.push(vars.decode(tape, h)?);
    }
    Ok(out)
}

/// Value-only variant of [`ndcn_forward`] that keeps the tape short.
pub fn ndcn_predict(
    tape: &mut Tape,
    vars: &NdcnVars,
    phi: &Arc<SparseMatrix>,
    x0: &Matrix,
    t0: f64,
    queries: &[f64],
    policy: &StepPolicy,
) -> Result<Vec<Matrix>, ModelError> {
    check_queries(t0, queries)?;
    let mark = tape.len();
    let x = tape.constant(x0.clone());
    let h = vars.encode(tape, x)?;
    let mut state = tape.value(h).clone();
    tape.truncate(mark);
    let mut t = t0;
    let mut out = Vec::with_capacity(queries.len());
    for &q in queries {
        let h0 = tape.constant(state);
        let h = euler_solve(tape, h0, t, q, policy, |tape, h| vars.rhs(tape, phi, h))?;
        let x = vars.decode(tape, h)?;
        out.push(tape.value(x).clone());
        state = tape.value(h).clone();
        t = q;
        tape.truncate(mark);
    }
    Ok(out)
}

/// Mean over snapshots of the mean absolute deviation.
pub fn ndcn_loss(tape: &mut Tape, predictions: &[Var], observations: &[Var]) -> Result<Var, ModelError> {
    if predictions.len() != observations.len() {
        return Err(ModelError::Unsupported(format!(
            "{} predictions for {} observations",
            predictions.len(),
            observations.len()
        )));
    }
    if predictions.is_empty() {
        return Err(TensorError::Empty { op: "ndcn loss" }.into());
    }
    let mut terms = Vec::with_capacity(predictions.len());
    for (&p, &o) in predictions.iter().zip(observations) {
        let diff = tape.sub(p, o)?;
        terms.push(tape.mean_abs(diff)?);
    }
    let total = tape.add_all(&terms)?;
    Ok(tape.scale(total, 1.0 / terms.len() as f64))
}
