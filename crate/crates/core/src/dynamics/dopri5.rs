//! Adaptive Dormand–Prince 5(4) integrator used to generate ground truth.

use serde::{Deserialize, Serialize};

use super::DynamicsError;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Tolerances {
    pub rtol: f64,
    pub atol: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            rtol: 1e-8,
            atol: 1e-10,
        }
    }
}

const MAX_STEPS: usize = 5_000_000;
/// Unclipped steps shorter than this (relative to `max(|t|, 1)`) count as a
/// stiff blow-up. Finite-time singularities and states trapped at a singular
/// denominator both drive the controller down here long before `MAX_STEPS`.
const MIN_RELATIVE_STEP: f64 = 1e-10;
const SAFETY: f64 = 0.9;
const MIN_FACTOR: f64 = 0.2;
const MAX_FACTOR: f64 = 10.0;

const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;

const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
// Fifth-order weights; also the last stage row (FSAL).
const B1: f64 = 35.0 / 384.0;
const B3: f64 = 500.0 / 1113.0;
const B4: f64 = 125.0 / 192.0;
const B5: f64 = -2187.0 / 6784.0;
const B6: f64 = 11.0 / 84.0;
// Fifth minus fourth order weights.
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

struct Workspace {
    k: [Vec<f64>; 7],
    stage: Vec<f64>,
    y_new: Vec<f64>,
}

impl Workspace {
    fn new(dim: usize) -> Self {
        Self {
            k: std::array::from_fn(|_| vec![0.0; dim]),
            stage: vec![0.0; dim],
            y_new: vec![0.0; dim],
        }
    }
}

fn error_norm(err: impl Iterator<Item = f64>, y: &[f64], y_new: &[f64], tol: &Tolerances) -> f64 {
    let mut acc = 0.0;
    let mut count = 0usize;
    for ((e, a), b) in err.zip(y).zip(y_new) {
        let scale = tol.atol + tol.rtol * a.abs().max(b.abs());
        acc += (e / scale).powi(2);
        count += 1;
    }
    if count == 0 {
        0.0
    } else {
        (acc / count as f64).sqrt()
    }
}

/// Integrates `dy/dt = rhs(t, y)` from `(t0, y0)` and returns the state at every `t_eval`.
///
/// Steps are clipped to land exactly on each requested time, so no
/// interpolation error is added on top of the controlled local error.
pub fn integrate_reference<F>(
    mut rhs: F,
    t0: f64,
    y0: &[f64],
    t_eval: &[f64],
    tol: Tolerances,
) -> Result<Vec<Vec<f64>>, DynamicsError>
where
    F: FnMut(f64, &[f64], &mut [f64]),
{
    if !(tol.rtol > 0.0 && tol.atol > 0.0) {
        return Err(DynamicsError::BadTolerance {
            rtol: tol.rtol,
            atol: tol.atol,
        });
    }
    if t_eval.first().is_some_and(|&t| t < t0) || t_eval.windows(2).any(|w| w[1] < w[0]) {
        return Err(DynamicsError::UnsortedTimes { t0 });
    }
    if let Some(node) = y0.iter().position(|v| !v.is_finite()) {
        return Err(DynamicsError::NonFiniteState { node });
    }

    let dim = y0.len();
    let mut ws = Workspace::new(dim);
    let mut y = y0.to_vec();
    let mut t = t0;
    rhs(t, &y, &mut ws.k[0]);
    let mut h = initial_step(&mut rhs, t0, &y, &ws.k[0].clone(), &tol);
    let mut steps = 0usize;
    let mut out = Vec::with_capacity(t_eval.len());
    let mut last_rejected = false;

    for &target in t_eval {
        while t < target {
            if steps >= MAX_STEPS {
                return Err(DynamicsError::TooManySteps { t, steps });
            }
            steps += 1;
            let remaining = target - t;
            let lands = h >= remaining;
            let h_try = if lands { remaining } else { h };

            let err = try_step(&mut rhs, t, &y, h_try, &mut ws);
            let norm = error_norm(err.iter().copied(), &y, &ws.y_new, &tol);
            if norm.is_nan() {
                return Err(DynamicsError::StepUnderflow { t, h: h_try });
            }
            if norm <= 1.0 {
                if !lands && h_try < MIN_RELATIVE_STEP * t.abs().max(1.0) {
                    return Err(DynamicsError::StepUnderflow { t, h: h_try });
                }
                t = if lands { target } else { t + h_try };
                std::mem::swap(&mut y, &mut ws.y_new);
                // FSAL: k[6] is the derivative at the accepted point.
                let (first, rest) = ws.k.split_at_mut(1);
                first[0].copy_from_slice(&rest[5]);
                let mut factor = if norm == 0.0 {
                    MAX_FACTOR
                } else {
                    (SAFETY * norm.powf(-0.2)).clamp(MIN_FACTOR, MAX_FACTOR)
                };
                if last_rejected {
                    factor = factor.min(1.0);
                }
                last_rejected = false;
                // A clipped step says nothing about how large the next one may be.
                h = if lands { h.max(h_try * factor) } else { h_try * factor };
            } else {
                last_rejected = true;
                h = h_try * (SAFETY * norm.powf(-0.2)).max(MIN_FACTOR);
                if h < MIN_RELATIVE_STEP * t.abs().max(1.0) {
                    return Err(DynamicsError::StepUnderflow { t, h });
                }
            }
        }
        out.push(y.clone());
    }
    Ok(out)
}

/// Computes the stages for one trial step, leaves the fifth-order solution in
/// `ws.y_new`, and returns the embedded error estimate.
fn try_step<F>(rhs: &mut F, t: f64, y: &[f64], h: f64, ws: &mut Workspace) -> Vec<f64>
where
    F: FnMut(f64, &[f64], &mut [f64]),
{
    let dim = y.len();
    let Workspace { k, stage, y_new } = ws;

    for i in 0..dim {
        stage[i] = y[i] + h * A21 * k[0][i];
    }
    rhs(t + C2 * h, stage, &mut k[1]);
    for i in 0..dim {
        stage[i] = y[i] + h * (A31 * k[0][i] + A32 * k[1][i]);
    }
    rhs(t + C3 * h, stage, &mut k[2]);
    for i in 0..dim {
        stage[i] = y[i] + h * (A41 * k[0][i] + A42 * k[1][i] + A43 * k[2][i]);
    }
    rhs(t + C4 * h, stage, &mut k[3]);
    for i in 0..dim {
        stage[i] = y[i] + h * (A51 * k[0][i] + A52 * k[1][i] + A53 * k[2][i] + A54 * k[3][i]);
    }
    rhs(t + C5 * h, stage, &mut k[4]);
    for i in 0..dim {
        stage[i] = y[i]
            + h * (A61 * k[0][i] + A62 * k[1][i] + A63 * k[2][i] + A64 * k[3][i] + A65 * k[4][i]);
    }
    rhs(t + h, stage, &mut k[5]);
    for i in 0..dim {
        y_new[i] = y[i]
            + h * (B1 * k[0][i] + B3 * k[2][i] + B4 * k[3][i] + B5 * k[4][i] + B6 * k[5][i]);
    }
    rhs(t + h, y_new, &mut k[6]);
    (0..dim)
        .map(|i| {
            h * (E1 * k[0][i] + E3 * k[2][i] + E4 * k[3][i] + E5 * k[4][i] + E6 * k[5][i]
                + E7 * k[6][i])
        })
        .collect()
}

fn initial_step<F>(rhs: &mut F, t0: f64, y0: &[f64], f0: &[f64], tol: &Tolerances) -> f64
where
    F: FnMut(f64, &[f64], &mut [f64]),
{
    let scaled = |v: &[f64]| {
        let mut acc = 0.0;
        for (x, y) in v.iter().zip(y0) {
            acc += (x / (tol.atol + tol.rtol * y.abs())).powi(2);
        }
        (acc / v.len().max(1) as f64).sqrt()
    };
    let d0 = scaled(y0);
    let d1 = scaled(f0);
    let h0 = if d0 < 1e-5 || d1 < 1e-5 {
        1e-6
    } else {
        0.01 * d0 / d1
    };
    let y1: Vec<f64> = y0.iter().zip(f0).map(|(y, f)| y + h0 * f).collect();
    let mut f1 = vec![0.0; y0.len()];
    rhs(t0 + h0, &y1, &mut f1);
    let diff: Vec<f64> = f1.iter().zip(f0).map(|(a, b)| a - b).collect();
    let d2 = scaled(&diff) / h0;
    let h1 = if d1.max(d2) <= 1e-15 {
        (h0 * 1e-3).max(1e-6)
    } else {
        (0.01 / d1.max(d2)).powf(0.2)
    };
    (100.0 * h0).min(h1)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exponential_decay() {
        let tol = Tolerances {
            rtol: 1e-9,
            atol: 1e-9,
        };
        let out = integrate_reference(
            |_, y, dy| dy[0] = -y[0],
            0.0,
            &[1.0],
            &[0.5, 1.0],
            tol,
        )
        .unwrap();
        assert!((out[1][0] - (-1f64).exp()).abs() < 1e-8);
        assert!((out[0][0] - (-0.5f64).exp()).abs() < 1e-8);
    }

    #[test]
    fn zero_rhs_is_constant() {
        let out = integrate_reference(
            |_, _, dy| dy.fill(0.0),
            0.0,
            &[1.5, -2.0],
            &[0.0, 1.0, 3.0],
            Tolerances::default(),
        )
        .unwrap();
        for row in out {
            assert_eq!(row, vec![1.5, -2.0]);
        }
    }

    #[test]
    fn oscillator_keeps_phase() {
        let out = integrate_reference(
            |_, y, dy| {
                dy[0] = y[1];
                dy[1] = -y[0];
            },
            0.0,
            &[1.0, 0.0],
            &[std::f64::consts::TAU],
            Tolerances {
                rtol: 1e-10,
                atol: 1e-12,
            },
        )
        .unwrap();
        assert!((out[0][0] - 1.0).abs() < 1e-8);
        assert!(out[0][1].abs() < 1e-8);
    }

    #[test]
    fn input_validation() {
        let f = |_: f64, _: &[f64], dy: &mut [f64]| dy.fill(0.0);
        assert!(matches!(
            integrate_reference(f, 1.0, &[0.0], &[0.5], Tolerances::default()),
            Err(DynamicsError::UnsortedTimes { .. })
        ));
        assert!(matches!(
            integrate_reference(f, 0.0, &[0.0], &[2.0, 1.0], Tolerances::default()),
            Err(DynamicsError::UnsortedTimes { .. })
        ));
        let bad = Tolerances {
            rtol: 0.0,
            atol: 1e-9,
        };
        assert!(integrate_reference(f, 0.0, &[0.0], &[1.0], bad).is_err());
    }

    #[test]
    fn blow_up_reports_failing_time() {
        // y' = y^2 from y(0) = 1 explodes at t = 1.
        let err = integrate_reference(
            |_, y, dy| dy[0] = y[0] * y[0],
            0.0,
            &[1.0],
            &[2.0],
            Tolerances::default(),
        )
        .unwrap_err();
        match err {
            DynamicsError::StepUnderflow { t, .. } | DynamicsError::TooManySteps { t, .. } => {
                assert!((t - 1.0).abs() < 1e-6, "failed at {t}")
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn state_trapped_at_a_singularity_fails_fast() {
        // The sign of y' flips across y = 0 with |y'| ~ 1/|y|, so the state chatters there.
        let err = integrate_reference(
            |_, y, dy| dy[0] = -y[0].signum() / y[0].abs().max(1e-8),
            0.0,
            &[1.0],
            &[5.0],
            Tolerances::default(),
        )
        .unwrap_err();
        assert!(matches!(err, DynamicsError::StepUnderflow { .. }), "{err:?}");
    }
}
