//! Oracles shared by the integration tests and the acceptance run.
#![allow(dead_code)]

pub mod props;

use std::sync::Arc;

use dynetforge::agog::{euler_solve, train_rollout, AgogHyper, AgogParams, StepPolicy};
use dynetforge::dynamics::{integrate_reference, NetworkSystem, Tolerances};
use dynetforge::graph::{generate_graph, normalized_laplacian, Graph, GraphFamily, GraphParams};
use dynetforge::train::agog_loss;
use dynetforge::{DynamicsKind, DynamicsSpec, Matrix, SparseMatrix, Tape};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn laplacian(graph: &Graph) -> Arc<SparseMatrix> {
    Arc::new(SparseMatrix::from_dense(&normalized_laplacian(graph).phi).unwrap())
}

/// A small seeded AGOG problem: parameters, operator, times and snapshots.
pub struct GradProblem {
    pub params: AgogParams,
    pub phi: Arc<SparseMatrix>,
    pub policy: StepPolicy,
    pub times: Vec<f64>,
    pub states: Vec<Matrix>,
}

impl GradProblem {
    pub fn new(n: usize, d: usize, p: usize, snapshots: usize, seed: u64) -> Self {
        let graph = generate_graph(GraphFamily::Smallworld, n, &GraphParams::default(), seed).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut params = AgogParams::init(AgogHyper::new(n, 1, d, p), seed);
        // Move off the zero-bias initialization so no term sits on a special point.
        for i in 0..params.set.len() {
            for v in params.set.get_mut(i).as_mut_slice() {
                *v += rng.gen_range(-0.2..0.2);
            }
        }
        let mut times = vec![0.0];
        for _ in 1..snapshots {
            let last = *times.last().unwrap();
            times.push(last + rng.gen_range(0.1..0.4));
        }
        let states = (0..snapshots)
            .map(|_| Matrix::from_fn(n, 1, |_, _| rng.gen_range(0.0..2.0)))
            .collect();
        Self { params, phi: laplacian(&graph), policy: StepPolicy { max_step: 0.05 }, times, states }
    }

    fn record(&self, tape: &mut Tape, params: &AgogParams) -> (dynetforge::Var, dynetforge::autodiff::BoundParams) {
        let (bound, vars) = params.bind(tape).unwrap();
        let states: Vec<&Matrix> = self.states.iter().collect();
        let r = train_rollout(tape, &vars, &self.phi, &self.policy, &self.times, &states).unwrap();
        let obs: Vec<_> = self.states.iter().map(|s| tape.constant(s.clone())).collect();
        let loss = agog_loss(tape, &r.predicted, &r.updated, &obs, true).unwrap();
        (loss, bound)
    }

    pub fn loss(&self, params: &AgogParams) -> f64 {
        let mut tape = Tape::new();
        let (loss, _) = self.record(&mut tape, params);
        tape.scalar(loss)
    }

    pub fn gradients(&self) -> Vec<Matrix> {
        let mut tape = Tape::new();
        let (loss, bound) = self.record(&mut tape, &self.params);
        tape.backward(loss).unwrap();
        bound.take_grads(&mut tape)
    }
}

/// Denominator floor for relative errors, so gradients that are zero up to
/// rounding are compared on an absolute scale.
pub const GRAD_FLOOR: f64 = 1e-6;

/// Worst relative error between reverse-mode and central-difference
/// gradients, with the tensor name and entry where it occurs.
pub fn gradcheck(problem: &GradProblem, step: f64) -> (f64, String) {
    let analytic = problem.gradients();
    let mut worst = (0.0, String::new());
    let mut probe = problem.params.clone();
    for (t, grad) in analytic.iter().enumerate() {
        let name = problem.params.set.iter().nth(t).unwrap().0.to_string();
        for e in 0..grad.len() {
            let original = probe.set.get(t).as_slice()[e];
            probe.set.get_mut(t).as_mut_slice()[e] = original + step;
            let up = problem.loss(&probe);
            probe.set.get_mut(t).as_mut_slice()[e] = original - step;
            let down = problem.loss(&probe);
            probe.set.get_mut(t).as_mut_slice()[e] = original;
            let numeric = (up - down) / (2.0 * step);
            let a = grad.as_slice()[e];
            let rel = (a - numeric).abs() / a.abs().max(numeric.abs()).max(GRAD_FLOOR);
            if rel > worst.0 {
                worst = (rel, format!("{name}[{e}]: analytic {a:e}, numeric {numeric:e}"));
            }
        }
    }
    worst
}

/// `|z(1) - e^{-1}|` for DOPRI5 on `dz/dt = -z`, `z(0) = 1`.
pub fn dopri_decay_error(tol: f64) -> f64 {
    let out = integrate_reference(
        |_, y, dy| dy[0] = -y[0],
        0.0,
        &[1.0],
        &[1.0],
        Tolerances { rtol: tol, atol: tol },
    )
    .unwrap();
    (out[0][0] - (-1.0f64).exp()).abs()
}

/// Largest gap at `t = 1` between DOPRI5 and a fine explicit Euler run on a
/// two-node gene-regulation system.
pub fn gene_pair_gap(euler_dt: f64) -> f64 {
    let graph = Graph::from_edges(2, GraphFamily::Er, GraphParams::default(), 0, [(0, 1)]).unwrap();
    let spec = DynamicsSpec::default_for(DynamicsKind::Gene, 2, 0);
    let system = NetworkSystem::new(&spec, &graph).unwrap();
    let z0 = [1.5, 0.5];
    let reference = integrate_reference(
        |_, y, dy| system.eval(y, dy),
        0.0,
        &z0,
        &[1.0],
        Tolerances { rtol: 1e-10, atol: 1e-12 },
    )
    .unwrap()
    .remove(0);

    let steps = (1.0 / euler_dt).round() as usize;
    let mut z = z0.to_vec();
    let mut dz = vec![0.0; 2];
    for _ in 0..steps {
        system.eval(&z, &mut dz);
        for (a, b) in z.iter_mut().zip(&dz) {
            *a += euler_dt * b;
        }
    }
    z.iter().zip(&reference).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max)
}

/// Endpoint error of the model's Euler solver on `dz/dt = -z` over `[0, 1]`.
pub fn euler_decay_error(substeps: usize) -> f64 {
    let mut tape = Tape::new();
    let z0 = tape.constant(Matrix::scalar(1.0));
    let policy = StepPolicy { max_step: 1.0 / substeps as f64 };
    let z1 = euler_solve(&mut tape, z0, 0.0, 1.0, &policy, |tape, z| Ok(tape.scale(z, -1.0))).unwrap();
    (tape.scalar(z1) - (-1.0f64).exp()).abs()
}
