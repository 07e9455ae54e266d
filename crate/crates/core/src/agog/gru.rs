use rand_chacha::ChaCha8Rng;

use super::{init_weight, ModelError};
use crate::autodiff::{BoundParams, Matrix, ParamSet, Tape, Var};

/// Handles for a gated recurrent cell with per-node biases.
///
/// Input weights (`W_*`) map the cell input, recurrent weights (`U_*`) map the
/// carried hidden state:
///
/// ```text
/// r = σ(x W_r + b_wr + h U_r + b_ur)
/// z = σ(x W_z + b_wz + h U_z + b_uz)
/// n = tanh(x W_h + b_wh + r ⊙ (h U_h + b_uh))
/// h' = (1 - z) ⊙ n + z ⊙ h
/// ```
#[derive(Clone, Copy, Debug)]
pub struct GruVars {
    pub w_r: Var,
    pub w_z: Var,
    pub w_h: Var,
    pub u_r: Var,
    pub u_z: Var,
    pub u_h: Var,
    pub b_wr: Var,
    pub b_ur: Var,
    pub b_wz: Var,
    pub b_uz: Var,
    pub b_wh: Var,
    pub b_uh: Var,
}

const WEIGHTS: [&str; 6] = ["W_r", "W_z", "W_h", "U_r", "U_z", "U_h"];
const BIASES: [&str; 6] = ["b_wr", "b_ur", "b_wz", "b_uz", "b_wh", "b_uh"];

/// Appends the twelve GRU tensors to `set` under `prefix`.
pub(crate) fn init_gru(
    set: &mut ParamSet,
    prefix: &str,
    n: usize,
    input: usize,
    hidden: usize,
    rng: &mut ChaCha8Rng,
) {
    for name in WEIGHTS {
        let rows = if name.starts_with('W') { input } else { hidden };
        set.push(format!("{prefix}{name}"), init_weight(rows, hidden, rng));
    }
    for name in BIASES {
        set.push(format!("{prefix}{name}"), Matrix::zeros(n, hidden));
    }
}

impl GruVars {
    pub fn bind(bound: &BoundParams, prefix: &str) -> Result<Self, ModelError> {
        let v = |name: &str| bound.var(&format!("{prefix}{name}"));
        Ok(Self {
            w_r: v("W_r")?,
            w_z: v("W_z")?,
            w_h: v("W_h")?,
            u_r: v("U_r")?,
            u_z: v("U_z")?,
            u_h: v("U_h")?,
            b_wr: v("b_wr")?,
            b_ur: v("b_ur")?,
            b_wz: v("b_wz")?,
            b_uz: v("b_uz")?,
            b_wh: v("b_wh")?,
            b_uh: v("b_uh")?,
        })
    }

    /// One cell update. The result is `(1 - z) ⊙ n + z ⊙ hidden`, computed as
    /// `n + z ⊙ (hidden - n)`.
    pub fn step(&self, tape: &mut Tape, input: Var, hidden: Var) -> Result<Var, ModelError> {
        let gate = |tape: &mut Tape, w: Var, bw: Var, u: Var, bu: Var| -> Result<Var, ModelError> {
            let xw = tape.matmul(input, w)?;
            let hu = tape.matmul(hidden, u)?;
            let pre = tape.add_all(&[xw, bw, hu, bu])?;
            Ok(tape.sigmoid(pre))
        };
        let r = gate(tape, self.w_r, self.b_wr, self.u_r, self.b_ur)?;
        let z = gate(tape, self.w_z, self.b_wz, self.u_z, self.b_uz)?;

        let xw = tape.matmul(input, self.w_h)?;
        let xw = tape.add(xw, self.b_wh)?;
        let hu = tape.matmul(hidden, self.u_h)?;
        let hu = tape.add(hu, self.b_uh)?;
        let reset = tape.mul(r, hu)?;
        let pre = tape.add(xw, reset)?;
        let candidate = tape.tanh(pre);

        let diff = tape.sub(hidden, candidate)?;
        let blend = tape.mul(z, diff)?;
        Ok(tape.add(candidate, blend)?)
    }
}
