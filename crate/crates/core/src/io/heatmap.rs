use std::fmt::Write as _;
use std::path::Path;

use super::write_atomic;
use crate::error::{Error, Result};
use crate::geometry::Vec3;

/// Errors at or above this angle get the full red color.
pub const HEAT_MAX_DEG: f64 = 90.0;

/// Linear ramp from blue `(0,0,255)` at 0° to red `(255,0,0)` at 90°.
pub fn heat_color(error_deg: f64) -> [u8; 3] {
    let t = if error_deg.is_nan() {
        1.0
    } else {
        (error_deg / HEAT_MAX_DEG).clamp(0.0, 1.0)
    };
    let r = (255.0 * t).round() as u8;
    let b = (255.0 * (1.0 - t)).round() as u8;
    [r, 0, b]
}

/// ASCII PLY with float positions and `uchar` colors.
pub fn write_heatmap_ply(path: &Path, positions: &[Vec3], errors_deg: &[f64]) -> Result<()> {
    if positions.len() != errors_deg.len() {
        return Err(Error::ShapeMismatch(format!(
            "{} positions but {} error values",
            positions.len(),
            errors_deg.len()
        )));
    }
    let mut s = String::with_capacity(64 + positions.len() * 40);
    s.push_str("ply\nformat ascii 1.0\ncomment unoriented normal error, 0-90 deg, blue to red\n");
    let _ = writeln!(s, "element vertex {}", positions.len());
    s.push_str(
        "property float x\nproperty float y\nproperty float z\n\
         property uchar red\nproperty uchar green\nproperty uchar blue\nend_header\n",
    );
    for (p, &e) in positions.iter().zip(errors_deg) {
        let [r, g, b] = heat_color(e);
        let _ = writeln!(s, "{} {} {} {r} {g} {b}", p.x as f32, p.y as f32, p.z as f32);
    }
    write_atomic(path, s.as_bytes())
}
