use crate::agog::ModelError;
use crate::autodiff::{Tape, TensorError, Var};

/// Reconstruction term `mean_i |x'_i - x_i|`, plus the continuity term
/// `mean_i |x̂_i - x'_i|` when `continuity` is set. Each `|·|` is a mean over
/// entries.
pub fn agog_loss(
    tape: &mut Tape,
    predicted: &[Var],
    updated: &[Var],
    observed: &[Var],
    continuity: bool,
) -> Result<Var, ModelError> {
    if predicted.len() != observed.len() || updated.len() != observed.len() {
        return Err(ModelError::Unsupported(format!(
            "loss sequences differ in length: {} predicted, {} updated, {} observed",
            predicted.len(),
            updated.len(),
            observed.len()
        )));
    }
    if observed.is_empty() {
        return Err(TensorError::Empty { op: "loss" }.into());
    }
    let count = observed.len() as f64;
    let mut recon = Vec::with_capacity(observed.len());
    for (&p, &x) in predicted.iter().zip(observed) {
        let d = tape.sub(p, x)?;
        recon.push(tape.mean_abs(d)?);
    }
    let recon = tape.add_all(&recon)?;
    let recon = tape.scale(recon, 1.0 / count);
    if !continuity {
        return Ok(recon);
    }
    let mut cont = Vec::with_capacity(observed.len());
    for (&u, &p) in updated.iter().zip(predicted) {
        let d = tape.sub(u, p)?;
        cont.push(tape.mean_abs(d)?);
    }
    let cont = tape.add_all(&cont)?;
    let cont = tape.scale(cont, 1.0 / count);
    Ok(tape.add(recon, cont)?)
}
