//! Files in and out: PCPNet-style ASCII clouds, `.normals` output, PLY
//! heatmaps, JSON reports and synthetic test surfaces.

mod dataset;
mod heatmap;
mod report;
pub mod synthetic;
mod text;

use std::fs;
use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};

pub use dataset::{load_dataset, load_shape, read_split, Shape};
pub use heatmap::{heat_color, write_heatmap_ply, HEAT_MAX_DEG};
pub use report::{
    to_json, Backend, BenchRecord, EstimateReport, RunConfig, StageTimingsMs, TimingStats,
};
pub use text::{read_normals, read_pidx, read_xyz, write_normals, write_xyz};

/// Writes `bytes` to a sibling temp file and renames it over `path`.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d,
        _ => Path::new("."),
    };
    let name = path
        .file_name()
        .ok_or_else(|| Error::InvalidArgument(format!("{} is not a file path", path.display())))?;
    let tmp = dir.join(format!(
        ".{}.tmp{}",
        name.to_string_lossy(),
        std::process::id()
    ));
    let write = || -> std::io::Result<()> {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
        fs::rename(&tmp, path)
    };
    write().map_err(|e| {
        let _ = fs::remove_file(&tmp);
        Error::io(path, e)
    })
}
