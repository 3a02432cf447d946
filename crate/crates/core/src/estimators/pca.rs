use nalgebra::Matrix3;

use super::eigen::symmetric_eigen3;
use crate::error::{Error, Result};
use crate::geometry::Vec3;

/// Relative size below which the middle eigenvalue counts as zero.
const RANK_TOLERANCE: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PlaneFit {
    pub normal: Vec3,
    pub centroid: Vec3,
    /// Covariance eigenvalues, ascending.
    pub eigenvalues: [f64; 3],
    /// Eigenvectors as columns, matching `eigenvalues`.
    pub axes: Matrix3<f64>,
}

/// Flip `v` so its first component with magnitude above 1e-12 is positive.
pub fn canonical_sign(v: Vec3) -> Vec3 {
    match v.iter().find(|c| c.abs() > 1e-12) {
        Some(&c) if c < 0.0 => -v,
        _ => v,
    }
}

pub fn pca_normal(neighbors: &[Vec3]) -> Result<PlaneFit> {
    if neighbors.len() < 3 {
        return Err(Error::Degenerate(format!(
            "plane fit needs 3 points, got {}",
            neighbors.len()
        )));
    }
    let n = neighbors.len() as f64;
    let centroid = neighbors.iter().fold(Vec3::zeros(), |acc, p| acc + p) / n;
    let mut cov = Matrix3::zeros();
    for p in neighbors {
        let d = p - centroid;
        cov += d * d.transpose();
    }
    cov /= n;

    let eig = symmetric_eigen3(&cov);
    let values = eig.values.map(|v| v.max(0.0));
    if values[2] <= 0.0 || values[1] <= RANK_TOLERANCE * values[2] {
        return Err(Error::Degenerate(
            "neighbors are collinear or coincident".into(),
        ));
    }
    let normal = canonical_sign(eig.vectors.column(0).normalize());
    let mut axes = eig.vectors;
    axes.set_column(0, &normal);
    Ok(PlaneFit {
        normal,
        centroid,
        eigenvalues: values,
        axes,
    })
}
