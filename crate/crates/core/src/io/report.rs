use std::fmt::Write as _;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::train::{AggregateRow, ReportRow, SeriesRow};

pub const REPORT_HEADER: &str = "task,dynamics,graph,method,metric,value,seed";
pub const SERIES_HEADER: &str = "task,dynamics,graph,method,seed,index,time,error";
pub const AGGREGATE_HEADER: &str = "task,dynamics,graph,method,metric,mean,std,count";

const UNDEFINED: &str = "undefined";

fn opt(v: Option<f64>) -> String {
    v.map_or_else(|| UNDEFINED.to_string(), |x| x.to_string())
}

pub fn render_report(rows: &[ReportRow]) -> String {
    let mut out = String::new();
    for r in rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{}",
            r.task,
            r.dynamics,
            r.graph,
            r.method,
            r.metric,
            opt(r.value),
            r.seed
        );
    }
    out
}

pub fn render_series(rows: &[SeriesRow]) -> String {
    let mut out = String::new();
    for r in rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{}",
            r.task, r.dynamics, r.graph, r.method, r.seed, r.index, r.time, r.error
        );
    }
    out
}

pub fn render_aggregate(rows: &[AggregateRow]) -> String {
    let mut out = format!("{AGGREGATE_HEADER}\n");
    for r in rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{}",
            r.task,
            r.dynamics,
            r.graph,
            r.method,
            r.metric,
            opt(r.mean),
            opt(r.std),
            r.count
        );
    }
    out
}

/// Per-snapshot series file next to a report: `report.csv` → `report.series.csv`.
pub fn series_path(report: &Path) -> PathBuf {
    let stem = report.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    report.with_file_name(format!("{stem}.series.csv"))
}

fn append_with_header(path: &Path, header: &str, body: &str) -> Result<()> {
    let fresh = match std::fs::metadata(path) {
        Ok(m) => m.len() == 0,
        Err(_) => true,
    };
    if !fresh {
        let existing = std::fs::read_to_string(path)?;
        if existing.lines().next() != Some(header) {
            return Err(Error::Format(format!(
                "{} does not start with the expected header `{header}`",
                path.display()
            )));
        }
    }
    let mut file = std::fs::OpenOptions::new().create(true).append(true).open(path)?;
    if fresh {
        writeln!(file, "{header}")?;
    }
    file.write_all(body.as_bytes())?;
    Ok(())
}

/// Appends rows, writing the header first if the file is new or empty.
pub fn append_report(path: &Path, rows: &[ReportRow]) -> Result<()> {
    append_with_header(path, REPORT_HEADER, &render_report(rows))
}

pub fn append_series(path: &Path, rows: &[SeriesRow]) -> Result<()> {
    append_with_header(path, SERIES_HEADER, &render_series(rows))
}

pub fn write_aggregate(path: &Path, rows: &[AggregateRow]) -> Result<()> {
    std::fs::write(path, render_aggregate(rows))?;
    Ok(())
}

fn parse<T: std::str::FromStr>(field: &str, what: &str) -> Result<T> {
    field
        .parse()
        .map_err(|_| Error::Format(format!("bad {what} `{field}`")))
}

fn body_lines<'a>(text: &'a str, header: &str, width: usize) -> Result<Vec<Vec<&'a str>>> {
    let mut lines = text.lines();
    if lines.next() != Some(header) {
        return Err(Error::Format(format!("expected header `{header}`")));
    }
    lines
        .filter(|l| !l.is_empty())
        .map(|l| {
            let f: Vec<&str> = l.split(',').collect();
            if f.len() != width {
                return Err(Error::Format(format!("expected {width} fields in `{l}`")));
            }
            Ok(f)
        })
        .collect()
}

pub fn read_report(path: &Path) -> Result<Vec<ReportRow>> {
    let text = std::fs::read_to_string(path)?;
    body_lines(&text, REPORT_HEADER, 7)?
        .into_iter()
        .map(|f| {
            Ok(ReportRow {
                task: f[0].parse()?,
                dynamics: f[1].parse()?,
                graph: f[2].parse()?,
                method: f[3].to_string(),
                metric: f[4].parse()?,
                value: if f[5] == UNDEFINED { None } else { Some(parse(f[5], "value")?) },
                seed: parse(f[6], "seed")?,
            })
        })
        .collect()
}

pub fn read_series(path: &Path) -> Result<Vec<SeriesRow>> {
    let text = std::fs::read_to_string(path)?;
    body_lines(&text, SERIES_HEADER, 8)?
        .into_iter()
        .map(|f| {
            Ok(SeriesRow {
                task: f[0].parse()?,
                dynamics: f[1].parse()?,
                graph: f[2].parse()?,
                method: f[3].to_string(),
                seed: parse(f[4], "seed")?,
                index: parse(f[5], "index")?,
                time: parse(f[6], "time")?,
                error: parse(f[7], "error")?,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::DynamicsKind;
    use crate::graph::GraphFamily;
    use crate::train::{Metric, Task};

    fn rows() -> Vec<ReportRow> {
        vec![
            ReportRow {
                task: Task::Interp,
                dynamics: DynamicsKind::Gene,
                graph: GraphFamily::Grid,
                method: "AGOG*".into(),
                metric: Metric::Mae,
                value: Some(0.1 + 0.2),
                seed: 4,
            },
            ReportRow {
                task: Task::Regular,
                dynamics: DynamicsKind::Kuramoto,
                graph: GraphFamily::Community,
                method: "GRU-GNN".into(),
                metric: Metric::NormL1,
                value: None,
                seed: 1,
            },
        ]
    }

    #[test]
    fn append_twice_then_read() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("r.csv");
        append_report(&path, &rows()).unwrap();
        append_report(&path, &rows()).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert_eq!(text.lines().filter(|l| *l == REPORT_HEADER).count(), 1);
        let back = read_report(&path).unwrap();
        assert_eq!(back.len(), 4);
        assert_eq!(back[..2], rows()[..]);
        assert_eq!(back[2..], rows()[..]);
    }

    #[test]
    fn foreign_file_is_refused() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("r.csv");
        std::fs::write(&path, "something,else\n").unwrap();
        assert!(append_report(&path, &rows()).is_err());
    }

    #[test]
    fn series_file_name() {
        assert_eq!(series_path(Path::new("/x/report.csv")), PathBuf::from("/x/report.series.csv"));
    }
}
