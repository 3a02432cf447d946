use rayon::prelude::*;

use super::{jet_normal, pca_normal};
use crate::error::{Error, Result};
use crate::geometry::{PointCloud, SpatialIndex, Vec3};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Method {
    Pca,
    Jet,
}

/// Classical per-point estimation: one fit over the `k` nearest neighbors
/// of every point, the point itself first. Jet fits that are degenerate fall
/// back to the plane of the same neighborhood.
pub fn pointwise_normals(
    cloud: &PointCloud,
    index: &SpatialIndex,
    k: usize,
    method: Method,
) -> Result<Vec<Vec3>> {
    if k < 3 {
        return Err(Error::Config(format!("neighborhood of {k} points is too small")));
    }
    (0..cloud.len())
        .into_par_iter()
        .map(|i| {
            let p = cloud.position(i);
            let mut ids = index.knn(&p, k);
            if let Some(pos) = ids.iter().position(|&j| j == i) {
                ids[..=pos].rotate_right(1);
            }
            let pts: Vec<Vec3> = ids.iter().map(|&j| cloud.position(j)).collect();
            let pts = if ids[0] == i { pts } else { std::iter::once(p).chain(pts).collect() };
            match method {
                Method::Pca => Ok(pca_normal(&pts)?.normal),
                Method::Jet => match jet_normal(&pts) {
                    Ok(fit) => Ok(fit.normal),
                    Err(Error::Degenerate(_)) => Ok(pca_normal(&pts)?.normal),
                    Err(e) => Err(e),
                },
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::angle_error_unoriented;
    use crate::io::synthetic::fibonacci_sphere;

    #[test]
    fn sphere_pointwise() {
        let cloud = fibonacci_sphere(3000).unwrap();
        let index = SpatialIndex::build(&cloud).unwrap();
        let gt = cloud.gt_normals().unwrap();
        for method in [Method::Pca, Method::Jet] {
            let n = pointwise_normals(&cloud, &index, 18, method).unwrap();
            let worst = n
                .iter()
                .zip(gt)
                .map(|(a, b)| angle_error_unoriented(a, b).unwrap())
                .fold(0.0, f64::max);
            assert!(worst < 2.0, "{method:?}: {worst}");
        }
        assert!(pointwise_normals(&cloud, &index, 2, Method::Pca).is_err());
    }
}
