use serde::{Deserialize, Serialize};

use super::cloud::Vec3;
use crate::error::{Error, Result};

/// RMSE of unoriented angle errors (degrees) and PGP at 5° and 10°.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub rmse_deg: f64,
    pub pgp5: f64,
    pub pgp10: f64,
    pub n_evaluated: usize,
}

/// Angle between the lines spanned by `a` and `b`, in degrees, in `[0, 90]`.
pub fn angle_error_unoriented(a: &Vec3, b: &Vec3) -> Result<f64> {
    let (na, nb) = (a.norm(), b.norm());
    if na == 0.0 || nb == 0.0 {
        return Err(Error::InvalidArgument("zero-length normal".into()));
    }
    // atan2 form of arccos(|a·b| / |a||b|); stays accurate near 0°.
    let cross = a.cross(b).norm();
    let dot = a.dot(b).abs();
    Ok(cross.atan2(dot).to_degrees().clamp(0.0, 90.0))
}

pub fn evaluate(pred: &[Vec3], gt: &[Vec3], subset: Option<&[usize]>) -> Result<MetricReport> {
    if pred.len() != gt.len() {
        return Err(Error::ShapeMismatch(format!(
            "{} predicted vs {} ground-truth normals",
            pred.len(),
            gt.len()
        )));
    }
    let errors: Vec<f64> = match subset {
        Some(ids) => ids
            .iter()
            .map(|&i| {
                if i >= pred.len() {
                    return Err(Error::IdOutOfRange { id: i, n: pred.len() });
                }
                angle_error_unoriented(&pred[i], &gt[i])
            })
            .collect::<Result<_>>()?,
        None => pred
            .iter()
            .zip(gt)
            .map(|(p, g)| angle_error_unoriented(p, g))
            .collect::<Result<_>>()?,
    };
    report_from_errors(&errors)
}

pub(crate) fn report_from_errors(errors: &[f64]) -> Result<MetricReport> {
    if errors.is_empty() {
        return Err(Error::InvalidArgument("nothing to evaluate".into()));
    }
    let n = errors.len() as f64;
    let sq: f64 = errors.iter().map(|e| e * e).sum();
    let below = |alpha: f64| errors.iter().filter(|&&e| e < alpha).count() as f64 / n;
    Ok(MetricReport {
        rmse_deg: (sq / n).sqrt(),
        pgp5: below(5.0),
        pgp10: below(10.0),
        n_evaluated: errors.len(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rotated_z_about_x(deg: f64) -> Vec3 {
        let t = deg.to_radians();
        Vec3::new(0.0, t.sin(), t.cos())
    }

    #[test]
    fn angle_basics() {
        let a = Vec3::new(0.3, -0.2, 0.9);
        assert_eq!(angle_error_unoriented(&a, &a).unwrap(), 0.0);
        assert_eq!(angle_error_unoriented(&-a, &a).unwrap(), 0.0);
        assert!((angle_error_unoriented(&Vec3::x(), &Vec3::y()).unwrap() - 90.0).abs() < 1e-12);
        assert!(angle_error_unoriented(&Vec3::zeros(), &a).is_err());
    }

    #[test]
    fn perfect_prediction() {
        let gt = vec![Vec3::z(), Vec3::x(), -Vec3::y()];
        let r = evaluate(&gt, &gt, None).unwrap();
        assert_eq!(r.rmse_deg, 0.0);
        assert_eq!((r.pgp5, r.pgp10), (1.0, 1.0));
    }

    #[test]
    fn half_at_seven_degrees() {
        let gt = vec![Vec3::z(); 4];
        let pred = vec![
            rotated_z_about_x(7.0),
            rotated_z_about_x(7.0),
            Vec3::z(),
            Vec3::z(),
        ];
        let r = evaluate(&pred, &gt, None).unwrap();
        assert_eq!(r.pgp5, 0.5);
        assert_eq!(r.pgp10, 1.0);
        assert!((r.rmse_deg - 24.5f64.sqrt()).abs() < 1e-9);
    }

    #[test]
    fn subset_and_mismatch() {
        let gt = vec![Vec3::z(); 3];
        let pred = vec![Vec3::z(), Vec3::x(), Vec3::z()];
        let r = evaluate(&pred, &gt, Some(&[0, 2])).unwrap();
        assert_eq!(r.n_evaluated, 2);
        assert_eq!(r.rmse_deg, 0.0);
        assert!(evaluate(&pred, &gt, Some(&[3])).is_err());
        assert!(evaluate(&pred[..2], &gt, None).is_err());
    }
}
