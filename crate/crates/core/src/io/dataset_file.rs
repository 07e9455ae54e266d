use std::path::Path;

use serde::{Deserialize, Serialize};

use super::container::{assemble, disassemble, encode_f64s, sha256_hex, verify_checksum, F64Reader};
use crate::autodiff::Matrix;
use crate::dynamics::{Dataset, DynamicsSpec, Protocol, SplitLabel, Tolerances};
use crate::error::{Error, Result};
use crate::graph::{Graph, GraphFamily, GraphParams};

const MAGIC: &str = "dynetforge-dataset v1";
const FORMAT_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Header {
    format_version: u32,
    graph: GraphBlock,
    dynamics: DynamicsBlock,
    schedule: ScheduleBlock,
    split: SplitBlock,
    states: StatesBlock,
    provenance: Provenance,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct GraphBlock {
    n: usize,
    family: GraphFamily,
    params: GraphParams,
    seed: u64,
    edges: Vec<(usize, usize)>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct DynamicsBlock {
    spec: DynamicsSpec,
    horizon: f64,
    tolerances: Tolerances,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ScheduleBlock {
    protocol: Protocol,
    timestamps: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct SplitBlock {
    train_frac: f64,
    labels: Vec<SplitLabel>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct StatesBlock {
    /// Number of `n × k` blocks in the payload: the initial state, then one per timestamp.
    blocks: usize,
    n: usize,
    k: usize,
    layout: String,
    sha256: String,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Provenance {
    tool: String,
    version: String,
    seed: u64,
}

pub fn dataset_to_bytes(dataset: &Dataset) -> Result<Vec<u8>> {
    dataset.validate()?;
    let mut payload = Vec::with_capacity((dataset.len() + 1) * dataset.initial_state.len() * 8);
    encode_f64s(dataset.initial_state.as_slice(), &mut payload);
    for s in &dataset.states {
        encode_f64s(s.as_slice(), &mut payload);
    }
    let header = Header {
        format_version: FORMAT_VERSION,
        graph: GraphBlock {
            n: dataset.graph.n,
            family: dataset.graph.family,
            params: dataset.graph.params.clone(),
            seed: dataset.graph.seed,
            edges: dataset.graph.edges().to_vec(),
        },
        dynamics: DynamicsBlock {
            spec: dataset.dynamics.clone(),
            horizon: dataset.horizon,
            tolerances: dataset.tolerances,
        },
        schedule: ScheduleBlock {
            protocol: dataset.protocol,
            timestamps: dataset.timestamps.clone(),
        },
        split: SplitBlock {
            train_frac: dataset.train_frac,
            labels: dataset.split.clone(),
        },
        states: StatesBlock {
            blocks: dataset.len() + 1,
            n: dataset.n(),
            k: dataset.state_dim(),
            layout: "row-major n x k little-endian f64 blocks; initial state at time 0, then one per timestamp".into(),
            sha256: sha256_hex(&payload),
        },
        provenance: Provenance {
            tool: "dynetforge".into(),
            version: crate::VERSION.into(),
            seed: dataset.seed,
        },
    };
    let text = serde_json::to_string_pretty(&header)?;
    Ok(assemble(MAGIC, &text, &payload))
}

pub fn dataset_from_bytes(bytes: &[u8]) -> Result<Dataset> {
    let (text, payload) = disassemble(MAGIC, bytes)?;
    let header: Header = serde_json::from_str(text)?;
    if header.format_version != FORMAT_VERSION {
        return Err(Error::Format(format!(
            "unsupported dataset format version {}",
            header.format_version
        )));
    }
    verify_checksum(&header.states.sha256, payload)?;
    let g = header.graph;
    let graph = Graph::from_edges(g.n, g.family, g.params, g.seed, g.edges)?;
    let StatesBlock { blocks, n, k, .. } = header.states;
    if n != graph.n || blocks != header.schedule.timestamps.len() + 1 {
        return Err(Error::Format("state block counts disagree with the header".into()));
    }
    let mut reader = F64Reader::new(payload);
    let mut read_block = || -> Result<Matrix> { Ok(Matrix::from_vec(n, k, reader.take(n * k)?)?) };
    let initial_state = read_block()?;
    let states = (1..blocks).map(|_| read_block()).collect::<Result<Vec<_>>>()?;
    reader.finish()?;
    let dataset = Dataset {
        graph,
        dynamics: header.dynamics.spec,
        protocol: header.schedule.protocol,
        train_frac: header.split.train_frac,
        horizon: header.dynamics.horizon,
        tolerances: header.dynamics.tolerances,
        seed: header.provenance.seed,
        initial_state,
        timestamps: header.schedule.timestamps,
        states,
        split: header.split.labels,
    };
    dataset.validate()?;
    Ok(dataset)
}

pub fn write_dataset(path: &Path, dataset: &Dataset) -> Result<()> {
    std::fs::write(path, dataset_to_bytes(dataset)?)?;
    Ok(())
}

pub fn read_dataset(path: &Path) -> Result<Dataset> {
    dataset_from_bytes(&std::fs::read(path)?)
}
