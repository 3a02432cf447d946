use nalgebra::{Matrix3, Matrix6, Vector6};

use super::pca::{canonical_sign, pca_normal};
use crate::error::{Error, Result};
use crate::geometry::Vec3;

const MAX_CONDITION: f64 = 1e12;
/// Conditioning above which the quadratic terms get Tikhonov damping.
const DAMPING_CONDITION: f64 = 1e8;
const DAMPING: f64 = 1e-10;

/// Order-2 height function `h(u,v) = c0 + c1 u + c2 v + c3 u² + c4 uv + c5 v²`
/// fitted in a PCA frame whose origin is the query point.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct JetFit {
    pub normal: Vec3,
    pub coeffs: [f64; 6],
    /// Columns `(e1, e2, e3)`: tangent axes and the height axis.
    pub frame: Matrix3<f64>,
    pub origin: Vec3,
}

impl JetFit {
    /// Unit normal of the fitted surface above the projection of `p`, oriented
    /// along the frame's height axis.
    pub fn normal_at(&self, p: &Vec3) -> Vec3 {
        let local = self.frame.transpose() * (p - self.origin);
        let (u, v) = (local.x, local.y);
        let c = &self.coeffs;
        let hu = c[1] + 2.0 * c[3] * u + c[4] * v;
        let hv = c[2] + c[4] * u + 2.0 * c[5] * v;
        (self.frame * Vec3::new(-hu, -hv, 1.0)).normalize()
    }
}

/// Fits a jet to `neighbors`; the first neighbor is the query point.
pub fn jet_normal(neighbors: &[Vec3]) -> Result<JetFit> {
    if neighbors.len() < 6 {
        return Err(Error::Degenerate(format!(
            "jet fit needs 6 points, got {}",
            neighbors.len()
        )));
    }
    let plane = pca_normal(neighbors)?;
    let e3 = plane.normal;
    let e1 = plane.axes.column(2).into_owned();
    let e1 = (e1 - e3 * e3.dot(&e1)).normalize();
    let e2 = e3.cross(&e1);
    let frame = Matrix3::from_columns(&[e1, e2, e3]);
    let origin = neighbors[0];

    let local: Vec<Vec3> = neighbors
        .iter()
        .map(|p| frame.transpose() * (p - origin))
        .collect();
    // Scale u, v to unit range so the normal matrix is well conditioned.
    let extent = local
        .iter()
        .map(|q| q.x.hypot(q.y))
        .fold(0.0, f64::max);
    if extent <= 0.0 {
        return Err(Error::Degenerate("neighbors project to a point".into()));
    }

    let mut ata = Matrix6::zeros();
    let mut atb = Vector6::zeros();
    for q in &local {
        let (u, v) = (q.x / extent, q.y / extent);
        let row = Vector6::new(1.0, u, v, u * u, u * v, v * v);
        ata += row * row.transpose();
        atb += row * q.z;
    }

    let eig = ata.symmetric_eigen();
    let max = eig.eigenvalues.amax();
    let min = eig.eigenvalues.iter().fold(f64::INFINITY, |m, &v| m.min(v.abs()));
    let condition = if min > 0.0 { max / min } else { f64::INFINITY };
    if condition > MAX_CONDITION {
        return Err(Error::Degenerate(format!(
            "jet normal equations singular (condition {condition:.3e})"
        )));
    }
    if condition > DAMPING_CONDITION {
        for i in 3..6 {
            ata[(i, i)] += DAMPING * max;
        }
    }
    let sol = ata
        .cholesky()
        .ok_or_else(|| Error::Degenerate("jet normal equations not positive definite".into()))?
        .solve(&atb);

    let s = extent;
    let coeffs = [
        sol[0],
        sol[1] / s,
        sol[2] / s,
        sol[3] / (s * s),
        sol[4] / (s * s),
        sol[5] / (s * s),
    ];
    let mut fit = JetFit {
        normal: Vec3::z(),
        coeffs,
        frame,
        origin,
    };
    fit.normal = canonical_sign(fit.normal_at(&origin));
    Ok(fit)
}
