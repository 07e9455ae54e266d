use std::fmt::Write as _;
use std::path::Path;

use crate::autodiff::Matrix;
use crate::dynamics::{Dataset, Protocol};
use crate::error::{Error, Result};
use crate::train::{Task, TrainedModel};

/// Truth and prediction at one requested time.
#[derive(Clone, Debug, PartialEq)]
pub struct VizFrame {
    pub time: f64,
    pub truth: Matrix,
    pub prediction: Matrix,
    pub mae: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct GridLayout {
    pub rows: usize,
    pub cols: usize,
    /// True when `n` is not a perfect square and nodes are laid out in one row.
    pub strip: bool,
}

/// `s × s` for `n = s²`, otherwise a `1 × n` strip.
pub fn grid_layout(n: usize) -> GridLayout {
    let s = (n as f64).sqrt().round() as usize;
    if s * s == n {
        GridLayout { rows: s, cols: s, strip: false }
    } else {
        GridLayout { rows: 1, cols: n, strip: true }
    }
}

/// Predictions and ground truth at `times`.
///
/// Times up to the last training snapshot are answered by interpolation,
/// later ones by rolling forward. Truth comes from the stored snapshot when a
/// time matches one exactly and from re-integration otherwise.
pub fn snapshot_frames(model: &TrainedModel, dataset: &Dataset, times: &[f64]) -> Result<Vec<VizFrame>> {
    let train = dataset.train_view();
    let last = *train.times.last().ok_or(Error::MissingSplit("train"))?;
    let mut frames = Vec::with_capacity(times.len());
    for &t in times {
        if !(t >= 0.0 && t <= dataset.horizon) {
            return Err(Error::Config(format!("time {t} is outside [0, {}]", dataset.horizon)));
        }
        let task = if t <= last {
            Task::Interp
        } else if dataset.protocol == Protocol::Regular {
            Task::Regular
        } else {
            Task::Extrap
        };
        let prediction = model.predict_times(dataset, &[t], task)?.remove(0);
        let truth = match dataset.timestamps.iter().position(|&s| s == t) {
            Some(i) => dataset.states[i].clone(),
            None => dataset.reintegrate(&[t])?.remove(0),
        };
        let mae = prediction
            .as_slice()
            .iter()
            .zip(truth.as_slice())
            .map(|(a, b)| (a - b).abs())
            .sum::<f64>()
            / truth.len() as f64;
        frames.push(VizFrame { time: t, truth, prediction, mae });
    }
    Ok(frames)
}

fn write_grid(out: &mut String, m: &Matrix, component: usize, layout: GridLayout) {
    for r in 0..layout.rows {
        let line: Vec<String> = (0..layout.cols)
            .map(|c| m.get(r * layout.cols + c, component).to_string())
            .collect();
        let _ = writeln!(out, "{}", line.join(" "));
    }
}

/// Text blocks of truth and prediction grids, one per time and state component.
pub fn render_viz(frames: &[VizFrame]) -> String {
    let mut out = String::from("# dynetforge snapshot grids\n");
    let Some(first) = frames.first() else {
        return out;
    };
    let layout = grid_layout(first.truth.rows());
    let _ = writeln!(out, "layout {} {}", layout.rows, layout.cols);
    if layout.strip {
        let _ = writeln!(out, "# node count is not a perfect square; nodes are laid out in one row");
    }
    for f in frames {
        let _ = writeln!(out, "\ntime {}", f.time);
        let _ = writeln!(out, "mae {}", f.mae);
        for c in 0..f.truth.cols() {
            let _ = writeln!(out, "truth {c}");
            write_grid(&mut out, &f.truth, c, layout);
            let _ = writeln!(out, "prediction {c}");
            write_grid(&mut out, &f.prediction, c, layout);
        }
    }
    out
}

/// Writes the grids; returns the layout so callers can warn about strips.
pub fn write_viz(path: &Path, frames: &[VizFrame]) -> Result<GridLayout> {
    std::fs::write(path, render_viz(frames))?;
    Ok(grid_layout(frames.first().map_or(0, |f| f.truth.rows())))
}
