use std::fs;
use std::path::{Path, PathBuf};

use super::text::{read_normals, read_pidx, read_xyz};
use crate::error::{Error, Result};
use crate::geometry::{PointCloud, Vec3};

/// One shape of a PCPNet-style dataset.
#[derive(Clone, Debug)]
pub struct Shape {
    pub name: String,
    pub cloud: PointCloud,
    /// Evaluation subset from `<name>.pidx`, when that file exists.
    pub subset: Option<Vec<usize>>,
}

/// Shape names, one per non-blank line.
pub fn read_split(path: &Path) -> Result<Vec<String>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Ok(text
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty())
        .map(str::to_owned)
        .collect())
}

/// Loads `<dir>/<name>.xyz` and `<name>.normals` (both required) and
/// `<name>.pidx` if present. Stored normals are rescaled to unit length.
pub fn load_shape(dir: &Path, name: &str) -> Result<Shape> {
    let path = |ext: &str| -> PathBuf { dir.join(format!("{name}.{ext}")) };
    let xyz_path = path("xyz");
    let positions = read_xyz(&xyz_path)?;
    if positions.is_empty() {
        return Err(Error::Data {
            path: xyz_path,
            msg: "no points".into(),
        });
    }
    let normals_path = path("normals");
    let normals = read_normals(&normals_path)?;
    if normals.len() != positions.len() {
        return Err(Error::Data {
            path: normals_path,
            msg: format!(
                "{} normals for {} points in {}",
                normals.len(),
                positions.len(),
                xyz_path.display()
            ),
        });
    }
    let normals = normals
        .into_iter()
        .enumerate()
        .map(|(i, n)| {
            let len = n.norm();
            if len > 1e-12 {
                Ok(n / len)
            } else {
                Err(Error::Parse {
                    path: normals_path.clone(),
                    line: i + 1,
                    msg: "zero-length normal".into(),
                })
            }
        })
        .collect::<Result<Vec<Vec3>>>()?;
    let cloud = PointCloud::with_normals(positions, normals)?;
    let pidx_path = path("pidx");
    let subset = if pidx_path.exists() {
        Some(read_pidx(&pidx_path, cloud.len())?)
    } else {
        None
    };
    Ok(Shape {
        name: name.to_owned(),
        cloud,
        subset,
    })
}

/// Every shape listed in `split_file`, in split order.
pub fn load_dataset(dir: &Path, split_file: &Path) -> Result<Vec<Shape>> {
    let names = read_split(split_file)?;
    if names.is_empty() {
        return Err(Error::Data {
            path: split_file.to_path_buf(),
            msg: "split lists no shapes".into(),
        });
    }
    names.iter().map(|n| load_shape(dir, n)).collect()
}
