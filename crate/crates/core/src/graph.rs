//! Benchmark network families and the normalized Laplacian.

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::autodiff::Matrix;
use crate::seeded_rng;

#[derive(Debug, Error, PartialEq)]
pub enum GraphError {
    #[error("graph needs at least 2 nodes, got {0}")]
    TooFewNodes(usize),
    #[error("grid family needs a perfect-square node count, got {0}")]
    NotSquare(usize),
    #[error("invalid parameter {name} = {value}: {reason}")]
    InvalidParam {
        name: &'static str,
        value: f64,
        reason: &'static str,
    },
    #[error("unknown graph family `{0}`")]
    UnknownFamily(String),
    #[error("edge ({0}, {1}) is invalid for a {2}-node graph")]
    BadEdge(usize, usize, usize),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GraphFamily {
    Community,
    Grid,
    Er,
    Powerlaw,
    Smallworld,
}

impl GraphFamily {
    pub const ALL: [GraphFamily; 5] = [
        GraphFamily::Community,
        GraphFamily::Grid,
        GraphFamily::Er,
        GraphFamily::Powerlaw,
        GraphFamily::Smallworld,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            GraphFamily::Community => "community",
            GraphFamily::Grid => "grid",
            GraphFamily::Er => "er",
            GraphFamily::Powerlaw => "powerlaw",
            GraphFamily::Smallworld => "smallworld",
        }
    }
}

impl fmt::Display for GraphFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for GraphFamily {
    type Err = GraphError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "community" | "sbm" => Ok(GraphFamily::Community),
            "grid" | "lattice" => Ok(GraphFamily::Grid),
            "er" | "random" => Ok(GraphFamily::Er),
            "powerlaw" | "power-law" | "ba" => Ok(GraphFamily::Powerlaw),
            "smallworld" | "small-world" | "ws" => Ok(GraphFamily::Smallworld),
            _ => Err(GraphError::UnknownFamily(s.to_string())),
        }
    }
}

/// Generator settings for every family; only the fields of the chosen family are read.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GraphParams {
    /// Number of equal blocks in the stochastic block model.
    pub blocks: usize,
    pub p_in: f64,
    pub p_out: f64,
    /// ER edge probability; `None` picks `8 / (n - 1)` (expected mean degree 8).
    pub er_p: Option<f64>,
    /// Edges added per new node in preferential attachment.
    pub ba_m: usize,
    /// Ring-lattice degree of the Watts–Strogatz construction (even).
    pub ws_k: usize,
    pub ws_beta: f64,
}

impl Default for GraphParams {
    fn default() -> Self {
        Self {
            blocks: 4,
            p_in: 0.25,
            p_out: 0.01,
            er_p: None,
            ba_m: 2,
            ws_k: 4,
            ws_beta: 0.1,
        }
    }
}

impl GraphParams {
    pub fn er_probability(&self, n: usize) -> f64 {
        self.er_p
            .unwrap_or_else(|| if n > 1 { (8.0 / (n as f64 - 1.0)).min(1.0) } else { 0.0 })
    }
}

/// Undirected simple graph.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Graph {
    pub n: usize,
    pub family: GraphFamily,
    pub params: GraphParams,
    pub seed: u64,
    /// Sorted `(i, j)` pairs with `i < j`.
    edges: Vec<(usize, usize)>,
}

impl Graph {
    /// Builds a graph from an arbitrary edge list, normalizing orientation and order.
    pub fn from_edges(
        n: usize,
        family: GraphFamily,
        params: GraphParams,
        seed: u64,
        edges: impl IntoIterator<Item = (usize, usize)>,
    ) -> Result<Self, GraphError> {
        let mut set = BTreeSet::new();
        for (a, b) in edges {
            if a == b || a >= n || b >= n {
                return Err(GraphError::BadEdge(a, b, n));
            }
            set.insert((a.min(b), a.max(b)));
        }
        Ok(Self {
            n,
            family,
            params,
            seed,
            edges: set.into_iter().collect(),
        })
    }

    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn degrees(&self) -> Vec<usize> {
        let mut deg = vec![0; self.n];
        for &(a, b) in &self.edges {
            deg[a] += 1;
            deg[b] += 1;
        }
        deg
    }

    /// Sorted neighbor lists.
    pub fn neighbors(&self) -> Vec<Vec<usize>> {
        let mut adj = vec![Vec::new(); self.n];
        for &(a, b) in &self.edges {
            adj[a].push(b);
            adj[b].push(a);
        }
        for list in &mut adj {
            list.sort_unstable();
        }
        adj
    }

    pub fn adjacency(&self) -> Matrix {
        let mut a = Matrix::zeros(self.n, self.n);
        for &(i, j) in &self.edges {
            a.set(i, j, 1.0);
            a.set(j, i, 1.0);
        }
        a
    }

    pub fn component_count(&self) -> usize {
        let mut parent: Vec<usize> = (0..self.n).collect();
        fn find(parent: &mut [usize], mut x: usize) -> usize {
            while parent[x] != x {
                parent[x] = parent[parent[x]];
                x = parent[x];
            }
            x
        }
        let mut components = self.n;
        for &(a, b) in &self.edges {
            let (ra, rb) = (find(&mut parent, a), find(&mut parent, b));
            if ra != rb {
                parent[ra] = rb;
                components -= 1;
            }
        }
        components
    }
}

fn check_probability(name: &'static str, value: f64) -> Result<(), GraphError> {
    if !(0.0..=1.0).contains(&value) || value.is_nan() {
        return Err(GraphError::InvalidParam {
            name,
            value,
            reason: "must lie in [0, 1]",
        });
    }
    Ok(())
}

/// Generates one network of the given family. Deterministic in `(family, n, params, seed)`.
pub fn generate_graph(
    family: GraphFamily,
    n: usize,
    params: &GraphParams,
    seed: u64,
) -> Result<Graph, GraphError> {
    if n < 2 {
        return Err(GraphError::TooFewNodes(n));
    }
    let mut rng = seeded_rng(seed, crate::stream::GRAPH);
    let edges = match family {
        GraphFamily::Grid => grid_edges(n)?,
        GraphFamily::Er => {
            let p = params.er_probability(n);
            check_probability("er_p", p)?;
            er_edges(n, p, &mut rng)
        }
        GraphFamily::Community => {
            check_probability("p_in", params.p_in)?;
            check_probability("p_out", params.p_out)?;
            if params.blocks == 0 || params.blocks > n {
                return Err(GraphError::InvalidParam {
                    name: "blocks",
                    value: params.blocks as f64,
                    reason: "must be in [1, n]",
                });
            }
            sbm_edges(n, params.blocks, params.p_in, params.p_out, &mut rng)
        }
        GraphFamily::Powerlaw => {
            if params.ba_m == 0 || params.ba_m >= n {
                return Err(GraphError::InvalidParam {
                    name: "ba_m",
                    value: params.ba_m as f64,
                    reason: "must be in [1, n)",
                });
            }
            ba_edges(n, params.ba_m, &mut rng)
        }
        GraphFamily::Smallworld => {
            if params.ws_k == 0 || params.ws_k % 2 != 0 || params.ws_k >= n {
                return Err(GraphError::InvalidParam {
                    name: "ws_k",
                    value: params.ws_k as f64,
                    reason: "must be even and in [2, n)",
                });
            }
            check_probability("ws_beta", params.ws_beta)?;
            ws_edges(n, params.ws_k, params.ws_beta, &mut rng)
        }
    };
    Graph::from_edges(n, family, params.clone(), seed, edges)
}

fn grid_edges(n: usize) -> Result<Vec<(usize, usize)>, GraphError> {
    let side = (n as f64).sqrt().round() as usize;
    if side * side != n {
        return Err(GraphError::NotSquare(n));
    }
    let mut edges = Vec::with_capacity(2 * side * (side - 1));
    for r in 0..side {
        for c in 0..side {
            let v = r * side + c;
            if c + 1 < side {
                edges.push((v, v + 1));
            }
            if r + 1 < side {
                edges.push((v, v + side));
            }
        }
    }
    Ok(edges)
}

fn er_edges(n: usize, p: f64, rng: &mut ChaCha8Rng) -> Vec<(usize, usize)> {
    let mut edges = Vec::new();
    for i in 0..n {
        for j in (i + 1)..n {
            if rng.gen::<f64>() < p {
                edges.push((i, j));
            }
        }
    }
    edges
}

/// Block of node `v` when `n` nodes are split into `blocks` near-equal contiguous groups.
pub fn block_of(v: usize, n: usize, blocks: usize) -> usize {
    (v * blocks) / n
}

fn sbm_edges(
    n: usize,
    blocks: usize,
    p_in: f64,
    p_out: f64,
    rng: &mut ChaCha8Rng,
) -> Vec<(usize, usize)> {
    let mut edges = Vec::new();
    for i in 0..n {
        for j in (i + 1)..n {
            let p = if block_of(i, n, blocks) == block_of(j, n, blocks) {
                p_in
            } else {
                p_out
            };
            if rng.gen::<f64>() < p {
                edges.push((i, j));
            }
        }
    }
    edges
}

/// Preferential attachment: `m` initial isolated nodes; each later node attaches
/// to `m` distinct targets drawn proportionally to degree, so the graph ends
/// with exactly `m * (n - m)` edges.
fn ba_edges(n: usize, m: usize, rng: &mut ChaCha8Rng) -> Vec<(usize, usize)> {
    let mut edges = Vec::with_capacity(m * (n - m));
    // Each node appears once per incident edge end.
    let mut repeated: Vec<usize> = Vec::with_capacity(2 * m * (n - m));
    let mut targets: Vec<usize> = (0..m).collect();
    for source in m..n {
        for &t in &targets {
            edges.push((t, source));
        }
        repeated.extend_from_slice(&targets);
        repeated.extend(std::iter::repeat(source).take(m));
        let mut chosen = BTreeSet::new();
        // Insertion order of the draw is kept so the sequence is reproducible.
        let mut next = Vec::with_capacity(m);
        while chosen.len() < m {
            let pick = repeated[rng.gen_range(0..repeated.len())];
            if chosen.insert(pick) {
                next.push(pick);
            }
        }
        targets = next;
    }
    edges
}

fn ws_edges(n: usize, k: usize, beta: f64, rng: &mut ChaCha8Rng) -> Vec<(usize, usize)> {
    let half = k / 2;
    let mut set: BTreeSet<(usize, usize)> = BTreeSet::new();
    let key = |a: usize, b: usize| (a.min(b), a.max(b));
    for u in 0..n {
        for j in 1..=half {
            set.insert(key(u, (u + j) % n));
        }
    }
    for j in 1..=half {
        for u in 0..n {
            let v = (u + j) % n;
            if rng.gen::<f64>() >= beta {
                continue;
            }
            let degree_u = set.iter().filter(|&&(a, b)| a == u || b == u).count();
            if degree_u >= n - 1 {
                continue;
            }
            let w = loop {
                let w = rng.gen_range(0..n);
                if w != u && !set.contains(&key(u, w)) {
                    break w;
                }
            };
            set.remove(&key(u, v));
            set.insert(key(u, w));
        }
    }
    set.into_iter().collect()
}

/// Normalized Laplacian `D^{-1/2} (D - A) D^{-1/2}` as a dense symmetric matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct LaplacianMatrix {
    pub phi: Matrix,
}

/// Isolated nodes get an all-zero row and column (`0^{-1/2}` is taken as 0).
pub fn normalized_laplacian(graph: &Graph) -> LaplacianMatrix {
    let deg = graph.degrees();
    let inv_sqrt: Vec<f64> = deg
        .iter()
        .map(|&d| if d == 0 { 0.0 } else { 1.0 / (d as f64).sqrt() })
        .collect();
    let mut phi = Matrix::zeros(graph.n, graph.n);
    for (i, &d) in deg.iter().enumerate() {
        if d > 0 {
            phi.set(i, i, 1.0);
        }
    }
    for &(i, j) in graph.edges() {
        let w = -inv_sqrt[i] * inv_sqrt[j];
        phi.set(i, j, w);
        phi.set(j, i, w);
    }
    LaplacianMatrix { phi }
}
