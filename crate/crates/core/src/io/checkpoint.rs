use std::path::Path;

use serde::{Deserialize, Serialize};

use super::container::{assemble, disassemble, encode_f64s, sha256_hex, verify_checksum, F64Reader};
use crate::agog::StepPolicy;
use crate::autodiff::{AdamConfig, AdamState, Matrix, ParamSet};
use crate::error::{Error, Result};
use crate::train::{ModelKind, ModelParams, TrainConfig, TrainedModel};

const MAGIC: &str = "dynetforge-checkpoint v1";
const FORMAT_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Header {
    format_version: u32,
    model_type: ModelKind,
    hyperparams: Hyperparams,
    train_config: TrainConfig,
    step_policy: StepPolicy,
    tensors: Vec<TensorEntry>,
    optimizer: OptimizerBlock,
    loss_trace: Vec<f64>,
    payload_sha256: String,
}

#[derive(Serialize, Deserialize, PartialEq, Debug)]
#[serde(deny_unknown_fields)]
struct Hyperparams {
    n: usize,
    k: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    d: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    p: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    g1: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    g2: Option<usize>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct TensorEntry {
    name: String,
    rows: usize,
    cols: usize,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct OptimizerBlock {
    kind: String,
    config: AdamConfig,
    step: u64,
    /// Payload order: parameters, then first moments, then second moments.
    layout: String,
}

fn hyperparams(model: &TrainedModel) -> Hyperparams {
    let mut h = Hyperparams { n: model.n, k: model.k, d: None, p: None, g1: None, g2: None };
    match &model.params {
        ModelParams::Agog(p) => {
            h.d = Some(p.hyper.d);
            h.p = Some(p.hyper.p);
        }
        ModelParams::Ndcn(p) => h.d = Some(p.hyper.d),
        ModelParams::Temporal(p) => {
            h.g1 = Some(p.hyper.g1);
            h.g2 = Some(p.hyper.g2);
        }
        ModelParams::Oracle => {}
    }
    h
}

pub fn checkpoint_to_bytes(model: &TrainedModel) -> Result<Vec<u8>> {
    let empty = ParamSet::new();
    let set = model.params.set().unwrap_or(&empty);
    let mut payload = Vec::new();
    for (_, m) in set.iter() {
        encode_f64s(m.as_slice(), &mut payload);
    }
    for m in model.optimizer.m.iter().chain(&model.optimizer.v) {
        encode_f64s(m.as_slice(), &mut payload);
    }
    let header = Header {
        format_version: FORMAT_VERSION,
        model_type: model.kind(),
        hyperparams: hyperparams(model),
        train_config: model.config.clone(),
        step_policy: model.policy,
        tensors: set
            .iter()
            .map(|(name, m)| TensorEntry { name: name.to_string(), rows: m.rows(), cols: m.cols() })
            .collect(),
        optimizer: OptimizerBlock {
            kind: "adam".into(),
            config: model.adam,
            step: model.optimizer.step,
            layout: "parameters, then first moments, then second moments; each in tensor order, row-major little-endian f64".into(),
        },
        loss_trace: model.loss_trace.clone(),
        payload_sha256: sha256_hex(&payload),
    };
    let text = serde_json::to_string_pretty(&header)?;
    Ok(assemble(MAGIC, &text, &payload))
}

pub fn checkpoint_from_bytes(bytes: &[u8]) -> Result<TrainedModel> {
    let (text, payload) = disassemble(MAGIC, bytes)?;
    let header: Header = serde_json::from_str(text)?;
    if header.format_version != FORMAT_VERSION {
        return Err(Error::Format(format!(
            "unsupported checkpoint format version {}",
            header.format_version
        )));
    }
    if header.model_type != header.train_config.model {
        return Err(Error::Format("model type disagrees with the training config".into()));
    }
    verify_checksum(&header.payload_sha256, payload)?;

    let mut reader = F64Reader::new(payload);
    let mut read = |e: &TensorEntry| -> Result<Matrix> {
        Ok(Matrix::from_vec(e.rows, e.cols, reader.take(e.rows * e.cols)?)?)
    };
    let mut set = ParamSet::new();
    for e in &header.tensors {
        set.push(e.name.clone(), read(e)?);
    }
    let m = header.tensors.iter().map(&mut read).collect::<Result<Vec<_>>>()?;
    let v = header.tensors.iter().map(&mut read).collect::<Result<Vec<_>>>()?;
    reader.finish()?;

    let Hyperparams { n, k, .. } = header.hyperparams;
    let params = ModelParams::from_set(&header.train_config, n, k, set)?;
    let model = TrainedModel {
        config: header.train_config,
        n,
        k,
        policy: header.step_policy,
        params,
        adam: header.optimizer.config,
        optimizer: AdamState { step: header.optimizer.step, m, v },
        loss_trace: header.loss_trace,
    };
    if hyperparams(&model) != header.hyperparams {
        return Err(Error::Format("hyperparameters disagree with the stored tensors".into()));
    }
    Ok(model)
}

pub fn write_checkpoint(path: &Path, model: &TrainedModel) -> Result<()> {
    std::fs::write(path, checkpoint_to_bytes(model)?)?;
    Ok(())
}

pub fn read_checkpoint(path: &Path) -> Result<TrainedModel> {
    checkpoint_from_bytes(&std::fs::read(path)?)
}
