use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::agog::{check_shapes, init_gru, init_weight, GruVars, ModelError};
use crate::autodiff::{BoundParams, Matrix, ParamSet, SparseMatrix, Tape, Var};
use crate::{seeded_rng, stream};

/// Recurrent cell used after the graph-convolution block.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CellKind {
    Gru,
    Lstm,
    Rnn,
}

impl CellKind {
    pub fn as_str(self) -> &'static str {
        match self {
            CellKind::Gru => "gru",
            CellKind::Lstm => "lstm",
            CellKind::Rnn => "rnn",
        }
    }
}

impl fmt::Display for CellKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for CellKind {
    type Err = ModelError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "gru" => Ok(CellKind::Gru),
            "lstm" => Ok(CellKind::Lstm),
            "rnn" => Ok(CellKind::Rnn),
            _ => Err(ModelError::Unsupported(format!("unknown cell `{s}`"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TemporalGnnHyper {
    pub n: usize,
    pub k: usize,
    /// Graph-convolution width.
    pub g1: usize,
    /// Recurrent hidden width.
    pub g2: usize,
    pub cell: CellKind,
}

const LSTM_GATES: [&str; 4] = ["i", "f", "g", "o"];

#[derive(Clone, Debug, PartialEq)]
pub struct TemporalGnnParams {
    pub hyper: TemporalGnnHyper,
    pub set: ParamSet,
}

impl TemporalGnnParams {
    pub fn init(hyper: TemporalGnnHyper, seed: u64) -> Self {
        let TemporalGnnHyper { n, k, g1, g2, cell } = hyper;
        let mut rng = seeded_rng(seed, stream::PARAM_INIT);
        let mut set = ParamSet::new();
        set.push("W_e", init_weight(k, g1, &mut rng));
        set.push("b_e", Matrix::zeros(n, g1));
        match cell {
            CellKind::Gru => init_gru(&mut set, "", n, g1, g2, &mut rng),
            CellKind::Lstm => {
                for gate in LSTM_GATES {
                    set.push(format!("W_{gate}"), init_weight(g1, g2, &mut rng));
                    set.push(format!("U_{gate}"), init_weight(g2, g2, &mut rng));
                }
                for gate in LSTM_GATES {
                    set.push(format!("b_w{gate}"), Matrix::zeros(n, g2));
                    set.push(format!("b_u{gate}"), Matrix::zeros(n, g2));
                }
            }
            CellKind::Rnn => {
                set.push("W_h", init_weight(g1, g2, &mut rng));
                set.push("U_h", init_weight(g2, g2, &mut rng));
                set.push("b_wh", Matrix::zeros(n, g2));
                set.push("b_uh", Matrix::zeros(n, g2));
            }
        }
        set.push("W_d", init_weight(g2, k, &mut rng));
        set.push("b_d", Matrix::zeros(n, k));
        Self { hyper, set }
    }

    pub fn from_set(hyper: TemporalGnnHyper, set: ParamSet) -> Result<Self, ModelError> {
        let reference = Self::init(hyper, 0);
        let expected: Vec<(&str, (usize, usize))> =
            reference.set.iter().map(|(n, m)| (n, m.shape())).collect();
        check_shapes(&set, &expected)?;
        Ok(Self { hyper, set })
    }

    pub fn bind(&self, tape: &mut Tape) -> Result<(BoundParams, TemporalVars), ModelError> {
        let bound = self.set.bind(tape);
        let cell = match self.hyper.cell {
            CellKind::Gru => CellVars::Gru(GruVars::bind(&bound, "")?),
            CellKind::Lstm => {
                let gate = |g: &str| -> Result<[Var; 4], ModelError> {
                    Ok([
                        bound.var(&format!("W_{g}"))?,
                        bound.var(&format!("b_w{g}"))?,
                        bound.var(&format!("U_{g}"))?,
                        bound.var(&format!("b_u{g}"))?,
                    ])
                };
                CellVars::Lstm([gate("i")?, gate("f")?, gate("g")?, gate("o")?])
            }
            CellKind::Rnn => CellVars::Rnn([
                bound.var("W_h")?,
                bound.var("b_wh")?,
                bound.var("U_h")?,
                bound.var("b_uh")?,
            ]),
        };
        let vars = TemporalVars {
            hyper: self.hyper,
            w_e: bound.var("W_e")?,
            b_e: bound.var("b_e")?,
            cell,
            w_d: bound.var("W_d")?,
            b_d: bound.var("b_d")?,
        };
        Ok((bound, vars))
    }
}

/// Per-gate `[W, b_w, U, b_u]` handles.
#[derive(Clone, Copy, Debug)]
pub enum CellVars {
    Gru(GruVars),
    /// Gates in the order input, forget, candidate, output.
    Lstm([[Var; 4]; 4]),
    Rnn([Var; 4]),
}

#[derive(Clone, Copy, Debug)]
pub struct TemporalVars {
    pub hyper: TemporalGnnHyper,
    pub w_e: Var,
    pub b_e: Var,
    pub cell: CellVars,
    pub w_d: Var,
    pub b_d: Var,
}

/// Recurrent state: hidden, plus the memory cell for LSTM.
#[derive(Clone, Copy, Debug)]
struct CellState {
    h: Var,
    c: Option<Var>,
}

fn affine_pair(tape: &mut Tape, z: Var, h: Var, g: [Var; 4]) -> Result<Var, ModelError> {
    let zw = tape.matmul(z, g[0])?;
    let hu = tape.matmul(h, g[2])?;
    Ok(tape.add_all(&[zw, g[1], hu, g[3]])?)
}

impl TemporalVars {
    /// `ReLU(Φ x W_e + b_e)`.
    pub fn gcn(&self, tape: &mut Tape, phi: &Arc<SparseMatrix>, x: Var) -> Result<Var, ModelError> {
        let xw = tape.matmul(x, self.w_e)?;
        let mixed = tape.propagate(phi, xw)?;
        let pre = tape.add(mixed, self.b_e)?;
        Ok(tape.relu(pre))
    }

    fn zero_state(&self, tape: &mut Tape) -> CellState {
        let shape = (self.hyper.n, self.hyper.g2);
        let h = tape.constant(Matrix::zeros(shape.0, shape.1));
        let c = match self.cell {
            CellVars::Lstm(_) => Some(tape.constant(Matrix::zeros(shape.0, shape.1))),
            _ => None,
        };
        CellState { h, c }
    }

    fn cell_step(&self, tape: &mut Tape, z: Var, state: CellState) -> Result<CellState, ModelError> {
        match self.cell {
            CellVars::Gru(gru) => Ok(CellState {
                h: gru.step(tape, z, state.h)?,
                c: None,
            }),
            CellVars::Rnn(g) => {
                let pre = affine_pair(tape, z, state.h, g)?;
                Ok(CellState {
                    h: tape.tanh(pre),
                    c: None,
                })
            }
            CellVars::Lstm(gates) => {
                let c_prev = state.c.expect("LSTM state carries a memory cell");
                let pre_i = affine_pair(tape, z, state.h, gates[0])?;
                let pre_f = affine_pair(tape, z, state.h, gates[1])?;
                let pre_g = affine_pair(tape, z, state.h, gates[2])?;
                let pre_o = affine_pair(tape, z, state.h, gates[3])?;
                let i = tape.sigmoid(pre_i);
                let f = tape.sigmoid(pre_f);
                let g = tape.tanh(pre_g);
                let o = tape.sigmoid(pre_o);
                let keep = tape.mul(f, c_prev)?;
                let write = tape.mul(i, g)?;
                let c = tape.add(keep, write)?;
                let squashed = tape.tanh(c);
                Ok(CellState {
                    h: tape.mul(o, squashed)?,
                    c: Some(c),
                })
            }
        }
    }

    fn readout(&self, tape: &mut Tape, h: Var) -> Result<Var, ModelError> {
        let hw = tape.matmul(h, self.w_d)?;
        Ok(tape.add(hw, self.b_d)?)
    }

    fn step(
        &self,
        tape: &mut Tape,
        phi: &Arc<SparseMatrix>,
        x: Var,
        state: CellState,
    ) -> Result<(Var, CellState), ModelError> {
        let z = self.gcn(tape, phi, x)?;
        let state = self.cell_step(tape, z, state)?;
        Ok((self.readout(tape, state.h)?, state))
    }
}

/// Teacher-forced pass: entry `t` of the result predicts `inputs[t + 1]`.
pub fn temporal_gnn_forward(
    tape: &mut Tape,
    vars: &TemporalVars,
    phi: &Arc<SparseMatrix>,
    inputs: &[&Matrix],
) -> Result<Vec<Var>, ModelError> {
    let mut state = vars.zero_state(tape);
    let mut out = Vec::with_capacity(inputs.len());
    for x in inputs {
        let x = tape.constant((*x).clone());
        let (pred, next) = vars.step(tape, phi, x, state)?;
        out.push(pred);
        state = next;
    }
    Ok(out)
}

/// Teacher-forced over `inputs`, then `steps` predictions where each one is
/// fed back as the next input.
pub fn temporal_gnn_predict(
    tape: &mut Tape,
    vars: &TemporalVars,
    phi: &Arc<SparseMatrix>,
    inputs: &[&Matrix],
    steps: usize,
) -> Result<Vec<Matrix>, ModelError> {
    if inputs.is_empty() {
        return Err(ModelError::TooFewObservations { needed: 1, got: 0 });
    }
    let mark = tape.len();
    let mut state = vars.zero_state(tape);
    let mut pred = state.h;
    for x in inputs {
        let x = tape.constant((*x).clone());
        (pred, state) = vars.step(tape, phi, x, state)?;
    }
    let mut next = tape.value(pred).clone();
    let mut carried = (
        tape.value(state.h).clone(),
        state.c.map(|c| tape.value(c).clone()),
    );
    tape.truncate(mark);

    let mut out = Vec::with_capacity(steps);
    for _ in 0..steps {
        out.push(next.clone());
        let x = tape.constant(next);
        let h = tape.constant(carried.0);
        let c = carried.1.map(|c| tape.constant(c));
        let (pred, s) = vars.step(tape, phi, x, CellState { h, c })?;
        next = tape.value(pred).clone();
        carried = (tape.value(s.h).clone(), s.c.map(|c| tape.value(c).clone()));
        tape.truncate(mark);
    }
    Ok(out)
}
