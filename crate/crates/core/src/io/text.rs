use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use super::write_atomic;
use crate::error::{Error, Result};
use crate::geometry::Vec3;

fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

/// Non-blank lines with their 1-based line numbers.
fn records(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty())
}

fn parse_triples(path: &Path, text: &str) -> Result<Vec<Vec3>> {
    let mut out = Vec::new();
    for (line, rec) in records(text) {
        let mut v = [0.0; 3];
        let mut fields = rec.split_whitespace();
        for (axis, slot) in v.iter_mut().enumerate() {
            let tok = fields.next().ok_or_else(|| Error::Parse {
                path: path.to_path_buf(),
                line,
                msg: format!("expected 3 values, found {axis}"),
            })?;
            *slot = tok.parse::<f64>().map_err(|e| Error::Parse {
                path: path.to_path_buf(),
                line,
                msg: format!("bad number {tok:?}: {e}"),
            })?;
            if !slot.is_finite() {
                return Err(Error::Parse {
                    path: path.to_path_buf(),
                    line,
                    msg: format!("non-finite value {tok:?}"),
                });
            }
        }
        if let Some(extra) = fields.next() {
            return Err(Error::Parse {
                path: path.to_path_buf(),
                line,
                msg: format!("unexpected extra field {extra:?}"),
            });
        }
        out.push(Vec3::from(v));
    }
    Ok(out)
}

/// One `x y z` triple per line.
pub fn read_xyz(path: &Path) -> Result<Vec<Vec3>> {
    parse_triples(path, &read_text(path)?)
}

/// One `nx ny nz` triple per line; vectors are returned as stored.
pub fn read_normals(path: &Path) -> Result<Vec<Vec3>> {
    parse_triples(path, &read_text(path)?)
}

/// One point id per line, each checked against `n`.
pub fn read_pidx(path: &Path, n: usize) -> Result<Vec<usize>> {
    let text = read_text(path)?;
    let mut ids = Vec::new();
    for (line, rec) in records(&text) {
        let id: usize = rec.parse().map_err(|e| Error::Parse {
            path: path.to_path_buf(),
            line,
            msg: format!("bad point id {rec:?}: {e}"),
        })?;
        if id >= n {
            return Err(Error::Parse {
                path: path.to_path_buf(),
                line,
                msg: format!("point id {id} out of range for {n} points"),
            });
        }
        ids.push(id);
    }
    Ok(ids)
}

fn format_triples(v: &[Vec3]) -> String {
    let mut s = String::with_capacity(v.len() * 48);
    for p in v {
        // 9 significant digits
        let _ = writeln!(s, "{:.8e} {:.8e} {:.8e}", p.x, p.y, p.z);
    }
    s
}

pub fn write_normals(path: &Path, normals: &[Vec3]) -> Result<()> {
    write_atomic(path, format_triples(normals).as_bytes())
}

pub fn write_xyz(path: &Path, points: &[Vec3]) -> Result<()> {
    write_atomic(path, format_triples(points).as_bytes())
}
