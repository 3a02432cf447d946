use nalgebra::Vector3;

use crate::error::{Error, Result};

pub type Vec3 = Vector3<f64>;

/// Tolerance on the length of ground-truth normals.
const UNIT_TOLERANCE: f64 = 1e-4;

/// `N` positions plus optional ground-truth unit normals.
#[derive(Clone, Debug, PartialEq)]
pub struct PointCloud {
    positions: Vec<Vec3>,
    gt_normals: Option<Vec<Vec3>>,
}

impl PointCloud {
    pub fn new(positions: Vec<Vec3>) -> Result<Self> {
        if let Some(i) = positions
            .iter()
            .position(|p| !p.iter().all(|c| c.is_finite()))
        {
            return Err(Error::InvalidArgument(format!(
                "position {i} is not finite"
            )));
        }
        Ok(Self {
            positions,
            gt_normals: None,
        })
    }

    pub fn with_normals(positions: Vec<Vec3>, normals: Vec<Vec3>) -> Result<Self> {
        let mut cloud = Self::new(positions)?;
        cloud.set_normals(normals)?;
        Ok(cloud)
    }

    pub fn set_normals(&mut self, normals: Vec<Vec3>) -> Result<()> {
        if normals.len() != self.positions.len() {
            return Err(Error::ShapeMismatch(format!(
                "{} normals for {} points",
                normals.len(),
                self.positions.len()
            )));
        }
        if let Some(i) = normals
            .iter()
            .position(|n| !((n.norm() - 1.0).abs() <= UNIT_TOLERANCE))
        {
            return Err(Error::InvalidArgument(format!(
                "normal {i} has length {}, expected unit",
                normals[i].norm()
            )));
        }
        self.gt_normals = Some(normals);
        Ok(())
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.positions.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    #[inline]
    pub fn positions(&self) -> &[Vec3] {
        &self.positions
    }

    #[inline]
    pub fn position(&self, id: usize) -> Vec3 {
        self.positions[id]
    }

    pub fn gt_normals(&self) -> Option<&[Vec3]> {
        self.gt_normals.as_deref()
    }

    pub fn centroid(&self) -> Vec3 {
        let sum = self.positions.iter().fold(Vec3::zeros(), |acc, p| acc + p);
        sum / self.positions.len().max(1) as f64
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_non_finite() {
        let err = PointCloud::new(vec![Vec3::new(0.0, f64::NAN, 0.0)]);
        assert!(err.is_err());
    }

    #[test]
    fn rejects_non_unit_normals() {
        let pts = vec![Vec3::zeros(), Vec3::x()];
        assert!(PointCloud::with_normals(pts.clone(), vec![Vec3::z(), Vec3::z() * 1.01]).is_err());
        assert!(PointCloud::with_normals(pts.clone(), vec![Vec3::z()]).is_err());
        assert!(PointCloud::with_normals(pts, vec![Vec3::z(), -Vec3::y()]).is_ok());
    }
}
