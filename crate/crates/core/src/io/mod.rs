//! File formats.
//!
//! Datasets and checkpoints share one container: a magic line, the byte
//! length of a JSON header on its own line, the header itself, then a
//! little-endian `f64` payload whose SHA-256 is recorded in the header.
//! Reports are CSV; snapshot grids are plain whitespace-separated text.

mod checkpoint;
mod container;
mod dataset_file;
mod report;
mod viz;

pub use checkpoint::{checkpoint_from_bytes, checkpoint_to_bytes, read_checkpoint, write_checkpoint};
pub use dataset_file::{dataset_from_bytes, dataset_to_bytes, read_dataset, write_dataset};
pub use report::{
    append_report, append_series, read_report, read_series, render_aggregate, render_report,
    render_series, series_path, write_aggregate, AGGREGATE_HEADER, REPORT_HEADER, SERIES_HEADER,
};
pub use viz::{grid_layout, render_viz, snapshot_frames, write_viz, GridLayout, VizFrame};
