use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::TrainedModel;
use crate::autodiff::Matrix;
use crate::dynamics::{Dataset, DynamicsKind, Protocol, SplitLabel};
use crate::error::{Error, Result};
use crate::graph::GraphFamily;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Task {
    /// Held-out snapshots inside the observed time range (irregular data).
    Interp,
    /// Trailing snapshots after the observed range (irregular data).
    Extrap,
    /// Trailing snapshots of an equally spaced sequence.
    Regular,
}

impl Task {
    pub const ALL: [Task; 3] = [Task::Interp, Task::Extrap, Task::Regular];

    pub fn as_str(self) -> &'static str {
        match self {
            Task::Interp => "interp",
            Task::Extrap => "extrap",
            Task::Regular => "regular",
        }
    }

    pub fn protocol(self) -> Protocol {
        match self {
            Task::Interp | Task::Extrap => Protocol::Irregular,
            Task::Regular => Protocol::Regular,
        }
    }

    pub fn split(self) -> SplitLabel {
        match self {
            Task::Interp => SplitLabel::InterpTest,
            Task::Extrap | Task::Regular => SplitLabel::ExtrapTest,
        }
    }

    /// The split answered by this task, if `dataset` has one.
    pub fn check(self, dataset: &Dataset) -> Result<SplitLabel> {
        let label = self.split();
        if dataset.count(label) == 0 {
            return Err(Error::MissingSplit(label.as_str()));
        }
        if dataset.protocol != self.protocol() {
            return Err(Error::Incompatible(format!(
                "{} task needs a {} dataset, got {}",
                self,
                self.protocol(),
                dataset.protocol
            )));
        }
        Ok(label)
    }
}

impl fmt::Display for Task {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Task {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "interp" | "interpolation" => Ok(Task::Interp),
            "extrap" | "extrapolation" => Ok(Task::Extrap),
            "regular" => Ok(Task::Regular),
            _ => Err(Error::Config(format!("unknown task `{s}`"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Metric {
    #[serde(rename = "MAE")]
    Mae,
    #[serde(rename = "NormL1")]
    NormL1,
}

impl Metric {
    pub fn as_str(self) -> &'static str {
        match self {
            Metric::Mae => "MAE",
            Metric::NormL1 => "NormL1",
        }
    }
}

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Metric {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "MAE" => Ok(Metric::Mae),
            "NormL1" => Ok(Metric::NormL1),
            _ => Err(Error::Format(format!("unknown metric `{s}`"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Metrics {
    pub mae: f64,
    /// `None` when every truth entry is zero.
    pub norm_l1: Option<f64>,
    pub truth_mean_abs: f64,
}

/// MAE over all entries and MAE divided by the mean absolute truth value.
pub fn metrics(predictions: &[Matrix], truth: &[&Matrix]) -> Result<Metrics> {
    if predictions.len() != truth.len() {
        return Err(Error::Incompatible(format!(
            "{} predictions for {} truth snapshots",
            predictions.len(),
            truth.len()
        )));
    }
    let mut abs_err = 0.0;
    let mut abs_truth = 0.0;
    let mut count = 0usize;
    for (p, t) in predictions.iter().zip(truth) {
        if p.shape() != t.shape() {
            return Err(Error::Incompatible(format!(
                "prediction is {}x{}, truth is {}x{}",
                p.rows(),
                p.cols(),
                t.rows(),
                t.cols()
            )));
        }
        for (a, b) in p.as_slice().iter().zip(t.as_slice()) {
            abs_err += (a - b).abs();
            abs_truth += b.abs();
        }
        count += t.len();
    }
    if count == 0 {
        return Err(Error::Incompatible("no entries to score".into()));
    }
    let mae = abs_err / count as f64;
    let truth_mean_abs = abs_truth / count as f64;
    Ok(Metrics {
        mae,
        norm_l1: (truth_mean_abs > 0.0).then(|| mae / truth_mean_abs),
        truth_mean_abs,
    })
}

/// Mean absolute error over nodes at each snapshot.
pub fn error_over_time(predictions: &[Matrix], truth: &[&Matrix]) -> Result<Vec<f64>> {
    if predictions.len() != truth.len() {
        return Err(Error::Incompatible(format!(
            "{} predictions for {} truth snapshots",
            predictions.len(),
            truth.len()
        )));
    }
    predictions
        .iter()
        .zip(truth)
        .map(|(p, t)| {
            if p.shape() != t.shape() || t.is_empty() {
                return Err(Error::Incompatible("prediction and truth shapes differ".into()));
            }
            let total: f64 = p.as_slice().iter().zip(t.as_slice()).map(|(a, b)| (a - b).abs()).sum();
            Ok(total / t.len() as f64)
        })
        .collect()
}

/// One table cell: a metric value for one method on one realization.
#[derive(Clone, Debug, PartialEq)]
pub struct ReportRow {
    pub task: Task,
    pub dynamics: DynamicsKind,
    pub graph: GraphFamily,
    pub method: String,
    pub metric: Metric,
    /// `None` marks an undefined NormL1 (all-zero truth).
    pub value: Option<f64>,
    pub seed: u64,
}

/// Mean error over nodes at one test snapshot.
#[derive(Clone, Debug, PartialEq)]
pub struct SeriesRow {
    pub task: Task,
    pub dynamics: DynamicsKind,
    pub graph: GraphFamily,
    pub method: String,
    pub seed: u64,
    /// Snapshot index in the dataset.
    pub index: usize,
    pub time: f64,
    pub error: f64,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct EvalReport {
    pub rows: Vec<ReportRow>,
    pub series: Vec<SeriesRow>,
}

impl EvalReport {
    pub fn extend(&mut self, other: EvalReport) {
        self.rows.extend(other.rows);
        self.series.extend(other.series);
    }

    pub fn value(&self, task: Task, method: &str, metric: Metric) -> Option<f64> {
        self.rows
            .iter()
            .find(|r| r.task == task && r.method == method && r.metric == metric)
            .and_then(|r| r.value)
    }
}

/// Scores `model` on the test split of `task`.
pub fn evaluate(model: &TrainedModel, dataset: &Dataset, task: Task) -> Result<EvalReport> {
    let (indices, predictions) = model.predict(dataset, task)?;
    let truth: Vec<&Matrix> = indices.iter().map(|&i| &dataset.states[i]).collect();
    let m = metrics(&predictions, &truth)?;
    let series = error_over_time(&predictions, &truth)?;
    let method = model.kind().method_name().to_string();
    let dynamics = dataset.dynamics.kind();
    let graph = dataset.graph.family;
    let seed = dataset.seed;
    let row = |metric, value| ReportRow {
        task,
        dynamics,
        graph,
        method: method.clone(),
        metric,
        value,
        seed,
    };
    Ok(EvalReport {
        rows: vec![row(Metric::Mae, Some(m.mae)), row(Metric::NormL1, m.norm_l1)],
        series: indices
            .iter()
            .zip(series)
            .map(|(&index, error)| SeriesRow {
                task,
                dynamics,
                graph,
                method: method.clone(),
                seed,
                index,
                time: dataset.timestamps[index],
                error,
            })
            .collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_predictions() {
        let t = Matrix::from_rows(&[[1.0], [-2.0]]);
        let m = metrics(&[t.clone()], &[&t]).unwrap();
        assert_eq!(m.mae, 0.0);
        assert_eq!(m.norm_l1, Some(0.0));
    }

    #[test]
    fn small_hand_case() {
        let p = Matrix::from_rows(&[[3.0, 1.0]]);
        let t = Matrix::from_rows(&[[2.0, 2.0]]);
        let m = metrics(&[p], &[&t]).unwrap();
        assert_eq!(m.mae, 1.0);
        assert_eq!(m.norm_l1, Some(0.5));
    }

    #[test]
    fn zero_truth_is_undefined() {
        let p = Matrix::filled(2, 1, 1.0);
        let t = Matrix::zeros(2, 1);
        let m = metrics(&[p], &[&t]).unwrap();
        assert_eq!(m.mae, 1.0);
        assert_eq!(m.norm_l1, None);
    }

    #[test]
    fn series_of_constant_offset() {
        let truth: Vec<Matrix> = (0..4).map(|i| Matrix::filled(3, 1, i as f64)).collect();
        let preds: Vec<Matrix> = truth.iter().map(|m| m.map(|v| v - 0.25)).collect();
        let refs: Vec<&Matrix> = truth.iter().collect();
        let s = error_over_time(&preds, &refs).unwrap();
        assert_eq!(s, vec![0.25; 4]);
        let m = metrics(&preds, &refs).unwrap();
        assert_eq!(s.iter().sum::<f64>() / s.len() as f64, m.mae);
    }

    #[test]
    fn task_names_round_trip() {
        for t in Task::ALL {
            assert_eq!(t.as_str().parse::<Task>().unwrap(), t);
        }
        assert!("sideways".parse::<Task>().is_err());
    }
}
