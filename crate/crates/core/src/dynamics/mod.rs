//! Ground-truth network dynamics and the datasets sampled from them.

mod dataset;
mod dopri5;
mod schedule;

use std::fmt;
use std::str::FromStr;

use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::autodiff::Matrix;
use crate::graph::{Graph, GraphError};
use crate::{seeded_rng, stream};

pub use dataset::{build_dataset, simulate, Dataset, DatasetConfig, SplitLabel, SplitView};
pub use dopri5::{integrate_reference, Tolerances};
pub use schedule::{sample_schedule, Protocol};

/// Smallest denominator magnitude allowed in the mutualistic interaction term.
pub const MUTUALISTIC_DENOMINATOR_FLOOR: f64 = 1e-8;

#[derive(Debug, Error)]
pub enum DynamicsError {
    #[error("non-finite state entry at node {node}")]
    NonFiniteState { node: usize },
    #[error("state has {got} entries, expected {expected}")]
    StateLength { expected: usize, got: usize },
    #[error("coefficient `{name}` has length {got}, expected {expected}")]
    CoefficientLength {
        name: &'static str,
        expected: usize,
        got: usize,
    },
    #[error("step size underflow at t = {t} (h = {h:e})")]
    StepUnderflow { t: f64, h: f64 },
    #[error("integrator exceeded {steps} steps before t = {t}")]
    TooManySteps { t: f64, steps: usize },
    #[error("output times must be sorted and not before t0 = {t0}")]
    UnsortedTimes { t0: f64 },
    #[error("tolerances must be positive (rtol = {rtol}, atol = {atol})")]
    BadTolerance { rtol: f64, atol: f64 },
    #[error("infeasible schedule: {0}")]
    Schedule(String),
    #[error("invalid dataset configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Graph(#[from] GraphError),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DynamicsKind {
    Gene,
    Kuramoto,
    Mutualistic,
}

impl DynamicsKind {
    pub const ALL: [DynamicsKind; 3] = [
        DynamicsKind::Gene,
        DynamicsKind::Kuramoto,
        DynamicsKind::Mutualistic,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            DynamicsKind::Gene => "gene",
            DynamicsKind::Kuramoto => "kuramoto",
            DynamicsKind::Mutualistic => "mutualistic",
        }
    }

    pub fn default_horizon(self) -> f64 {
        match self {
            DynamicsKind::Gene | DynamicsKind::Mutualistic => 5.0,
            DynamicsKind::Kuramoto => 10.0,
        }
    }

    /// Range of the seeded uniform initial state.
    pub fn initial_range(self) -> (f64, f64) {
        match self {
            DynamicsKind::Gene | DynamicsKind::Mutualistic => (0.0, 5.0),
            DynamicsKind::Kuramoto => (0.0, std::f64::consts::TAU),
        }
    }
}

impl fmt::Display for DynamicsKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for DynamicsKind {
    type Err = DynamicsError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "gene" | "gene-regulation" => Ok(DynamicsKind::Gene),
            "kuramoto" => Ok(DynamicsKind::Kuramoto),
            "mutualistic" | "mutual" => Ok(DynamicsKind::Mutualistic),
            _ => Err(DynamicsError::Config(format!("unknown dynamics `{s}`"))),
        }
    }
}

/// Per-node coefficient tables of the three governing equations.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "lowercase")]
pub enum Coefficients {
    /// `dz_i/dt = -b_i z_i + Σ_j A_ij z_j^h / (z_j^h + 1)`
    Gene { b: Vec<f64>, hill: f64 },
    /// `dz_i/dt = ω_i + sign · k_i Σ_j A_ij sin(z_i - z_j)`
    ///
    /// `sign = +1` is the form used throughout this crate; `-1` gives the
    /// classical attractive coupling.
    Kuramoto {
        omega: Vec<f64>,
        coupling: Vec<f64>,
        sign: f64,
    },
    /// `dz_i/dt = -b_i + z_i (1 - z_i/k_i)(z_i/c_i - 1) + Σ_j A_ij z_i z_j / (d_i + e_i z_i + h_j z_j)`
    Mutualistic {
        b: Vec<f64>,
        k: Vec<f64>,
        c: Vec<f64>,
        d: Vec<f64>,
        e: Vec<f64>,
        h: Vec<f64>,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DynamicsSpec {
    pub coefficients: Coefficients,
    /// Node-state dimension; every column evolves under the same scalar law.
    pub state_dim: usize,
}

impl DynamicsSpec {
    /// Default coefficients for `n` nodes. Kuramoto natural frequencies are
    /// drawn i.i.d. standard normal from `seed`.
    pub fn default_for(kind: DynamicsKind, n: usize, seed: u64) -> Self {
        let coefficients = match kind {
            DynamicsKind::Gene => Coefficients::Gene {
                b: vec![1.0; n],
                hill: 2.0,
            },
            DynamicsKind::Kuramoto => {
                let mut rng = seeded_rng(seed, stream::COEFFICIENTS);
                Coefficients::Kuramoto {
                    omega: (0..n).map(|_| StandardNormal.sample(&mut rng)).collect(),
                    coupling: vec![1.0; n],
                    sign: 1.0,
                }
            }
            DynamicsKind::Mutualistic => Coefficients::Mutualistic {
                b: vec![0.1; n],
                k: vec![5.0; n],
                c: vec![1.0; n],
                d: vec![5.0; n],
                e: vec![0.9; n],
                h: vec![0.1; n],
            },
        };
        Self {
            coefficients,
            state_dim: 1,
        }
    }

    pub fn kind(&self) -> DynamicsKind {
        match self.coefficients {
            Coefficients::Gene { .. } => DynamicsKind::Gene,
            Coefficients::Kuramoto { .. } => DynamicsKind::Kuramoto,
            Coefficients::Mutualistic { .. } => DynamicsKind::Mutualistic,
        }
    }

    /// Checks every per-node table against the node count.
    pub fn validate(&self, n: usize) -> Result<(), DynamicsError> {
        let check = |name: &'static str, v: &Vec<f64>| {
            if v.len() != n {
                Err(DynamicsError::CoefficientLength {
                    name,
                    expected: n,
                    got: v.len(),
                })
            } else {
                Ok(())
            }
        };
        match &self.coefficients {
            Coefficients::Gene { b, .. } => check("b", b),
            Coefficients::Kuramoto {
                omega, coupling, ..
            } => {
                check("omega", omega)?;
                check("coupling", coupling)
            }
            Coefficients::Mutualistic { b, k, c, d, e, h } => {
                check("b", b)?;
                check("k", k)?;
                check("c", c)?;
                check("d", d)?;
                check("e", e)?;
                check("h", h)
            }
        }?;
        if self.state_dim == 0 {
            return Err(DynamicsError::Config("state_dim must be positive".into()));
        }
        Ok(())
    }
}

/// A dynamics law bound to a concrete graph, ready for repeated evaluation.
pub struct NetworkSystem<'a> {
    spec: &'a DynamicsSpec,
    neighbors: Vec<Vec<usize>>,
}

impl<'a> NetworkSystem<'a> {
    pub fn new(spec: &'a DynamicsSpec, graph: &Graph) -> Result<Self, DynamicsError> {
        spec.validate(graph.n)?;
        Ok(Self {
            spec,
            neighbors: graph.neighbors(),
        })
    }

    pub fn n(&self) -> usize {
        self.neighbors.len()
    }

    pub fn state_len(&self) -> usize {
        self.n() * self.spec.state_dim
    }

    /// Writes the time derivative of the row-major `n × k` state `z` into `out`.
    pub fn eval(&self, z: &[f64], out: &mut [f64]) {
        let k = self.spec.state_dim;
        let at = |node: usize, col: usize| z[node * k + col];
        match &self.spec.coefficients {
            Coefficients::Gene { b, hill } => {
                let saturation = |v: f64| {
                    let p = hill_pow(v, *hill);
                    p / (p + 1.0)
                };
                for col in 0..k {
                    // Neighbor contributions only depend on the neighbor's own state.
                    let sat: Vec<f64> = (0..self.n()).map(|j| saturation(at(j, col))).collect();
                    for (i, nb) in self.neighbors.iter().enumerate() {
                        let coupling: f64 = nb.iter().map(|&j| sat[j]).sum();
                        out[i * k + col] = -b[i] * at(i, col) + coupling;
                    }
                }
            }
            Coefficients::Kuramoto {
                omega,
                coupling,
                sign,
            } => {
                for col in 0..k {
                    for (i, nb) in self.neighbors.iter().enumerate() {
                        let zi = at(i, col);
                        let s: f64 = nb.iter().map(|&j| (zi - at(j, col)).sin()).sum();
                        out[i * k + col] = omega[i] + sign * coupling[i] * s;
                    }
                }
            }
            Coefficients::Mutualistic {
                b,
                k: cap,
                c,
                d,
                e,
                h,
            } => {
                for col in 0..k {
                    for (i, nb) in self.neighbors.iter().enumerate() {
                        let zi = at(i, col);
                        let logistic = zi * (1.0 - zi / cap[i]) * (zi / c[i] - 1.0);
                        let interaction: f64 = nb
                            .iter()
                            .map(|&j| {
                                let zj = at(j, col);
                                zi * zj / guard_denominator(d[i] + e[i] * zi + h[j] * zj)
                            })
                            .sum();
                        out[i * k + col] = -b[i] + logistic + interaction;
                    }
                }
            }
        }
    }
}

fn hill_pow(v: f64, exponent: f64) -> f64 {
    if exponent.fract() == 0.0 && exponent.abs() <= i32::MAX as f64 {
        v.powi(exponent as i32)
    } else {
        v.powf(exponent)
    }
}

/// Clamps the magnitude to at least [`MUTUALISTIC_DENOMINATOR_FLOOR`], keeping the sign.
fn guard_denominator(x: f64) -> f64 {
    if x.abs() >= MUTUALISTIC_DENOMINATOR_FLOOR {
        x
    } else if x < 0.0 {
        -MUTUALISTIC_DENOMINATOR_FLOOR
    } else {
        MUTUALISTIC_DENOMINATOR_FLOOR
    }
}

/// Time derivative of the `n × k` state `z` under `spec` on `graph`.
pub fn dynamics_rhs(spec: &DynamicsSpec, graph: &Graph, z: &Matrix) -> Result<Matrix, DynamicsError> {
    let system = NetworkSystem::new(spec, graph)?;
    if z.len() != system.state_len() {
        return Err(DynamicsError::StateLength {
            expected: system.state_len(),
            got: z.len(),
        });
    }
    if let Some(pos) = z.as_slice().iter().position(|v| !v.is_finite()) {
        return Err(DynamicsError::NonFiniteState {
            node: pos / spec.state_dim,
        });
    }
    let mut out = Matrix::zeros(graph.n, spec.state_dim);
    system.eval(z.as_slice(), out.as_mut_slice());
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{GraphFamily, GraphParams};

    fn graph(n: usize, edges: &[(usize, usize)]) -> Graph {
        Graph::from_edges(
            n,
            GraphFamily::Er,
            GraphParams::default(),
            0,
            edges.iter().copied(),
        )
        .unwrap()
    }

    #[test]
    fn gene_isolated_node_decays() {
        let spec = DynamicsSpec::default_for(DynamicsKind::Gene, 1, 0);
        let g = Graph::from_edges(1, GraphFamily::Er, GraphParams::default(), 0, []).unwrap();
        let d = dynamics_rhs(&spec, &g, &Matrix::scalar(2.0)).unwrap();
        assert_eq!(d.as_slice(), &[-2.0]);
    }

    #[test]
    fn gene_neighbor_term() {
        let spec = DynamicsSpec::default_for(DynamicsKind::Gene, 2, 0);
        let g = graph(2, &[(0, 1)]);
        let z = Matrix::from_rows(&[[1.0], [2.0]]);
        let d = dynamics_rhs(&spec, &g, &z).unwrap();
        assert!((d.get(0, 0) - (-1.0 + 4.0 / 5.0)).abs() < 1e-15);
        assert!((d.get(1, 0) - (-2.0 + 0.5)).abs() < 1e-15);
    }

    #[test]
    fn kuramoto_equal_phases() {
        let spec = DynamicsSpec {
            coefficients: Coefficients::Kuramoto {
                omega: vec![0.3, 0.7],
                coupling: vec![1.0, 1.0],
                sign: 1.0,
            },
            state_dim: 1,
        };
        let g = graph(2, &[(0, 1)]);
        let d = dynamics_rhs(&spec, &g, &Matrix::from_rows(&[[1.2], [1.2]])).unwrap();
        assert_eq!(d.as_slice(), &[0.3, 0.7]);
    }

    #[test]
    fn kuramoto_sign_follows_printed_form() {
        let spec = DynamicsSpec {
            coefficients: Coefficients::Kuramoto {
                omega: vec![0.0, 0.0],
                coupling: vec![1.0, 1.0],
                sign: 1.0,
            },
            state_dim: 1,
        };
        let g = graph(2, &[(0, 1)]);
        let d = dynamics_rhs(&spec, &g, &Matrix::from_rows(&[[1.0], [0.0]])).unwrap();
        assert!((d.get(0, 0) - 1f64.sin()).abs() < 1e-15);
        assert!((d.get(1, 0) + 1f64.sin()).abs() < 1e-15);
    }

    #[test]
    fn mutualistic_at_carrying_capacity() {
        let spec = DynamicsSpec::default_for(DynamicsKind::Mutualistic, 1, 0);
        let g = Graph::from_edges(1, GraphFamily::Er, GraphParams::default(), 0, []).unwrap();
        let d = dynamics_rhs(&spec, &g, &Matrix::scalar(5.0)).unwrap();
        assert!((d.get(0, 0) + 0.1).abs() < 1e-15);
    }

    #[test]
    fn mutualistic_denominator_is_guarded() {
        let spec = DynamicsSpec {
            coefficients: Coefficients::Mutualistic {
                b: vec![0.0; 2],
                k: vec![5.0; 2],
                c: vec![1.0; 2],
                d: vec![0.0; 2],
                e: vec![0.0; 2],
                h: vec![0.0; 2],
            },
            state_dim: 1,
        };
        let g = graph(2, &[(0, 1)]);
        let d = dynamics_rhs(&spec, &g, &Matrix::from_rows(&[[1.0], [1.0]])).unwrap();
        assert!(d.is_finite());
        assert!((d.get(0, 0) - 1.0 / MUTUALISTIC_DENOMINATOR_FLOOR).abs() < 1.0);
    }

    #[test]
    fn rejects_non_finite_state() {
        let spec = DynamicsSpec::default_for(DynamicsKind::Gene, 2, 0);
        let g = graph(2, &[(0, 1)]);
        let err = dynamics_rhs(&spec, &g, &Matrix::from_rows(&[[1.0], [f64::NAN]])).unwrap_err();
        assert!(matches!(err, DynamicsError::NonFiniteState { node: 1 }));
    }

    #[test]
    fn multi_column_states_evolve_independently() {
        let mut spec = DynamicsSpec::default_for(DynamicsKind::Gene, 3, 0);
        spec.state_dim = 2;
        let g = graph(3, &[(0, 1), (1, 2)]);
        let z = Matrix::from_rows(&[[0.5, 2.0], [1.5, 0.1], [3.0, 1.0]]);
        let both = dynamics_rhs(&spec, &g, &z).unwrap();
        spec.state_dim = 1;
        for col in 0..2 {
            let single = dynamics_rhs(&spec, &g, &z.slice_cols(col, col + 1)).unwrap();
            assert_eq!(single, both.slice_cols(col, col + 1));
        }
    }
}
