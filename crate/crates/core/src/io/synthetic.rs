//! Analytic test surfaces with exact normals.

use rand::Rng;

use crate::error::{Error, Result};
use crate::geometry::{PointCloud, Vec3};
use crate::seed::stage_rng;

/// `n` points on the unit sphere along a Fibonacci spiral; normals point
/// outward.
pub fn fibonacci_sphere(n: usize) -> Result<PointCloud> {
    if n == 0 {
        return Err(Error::EmptyCloud);
    }
    let golden = std::f64::consts::PI * (3.0 - 5f64.sqrt());
    let pts: Vec<Vec3> = (0..n)
        .map(|i| {
            let z = 1.0 - (2.0 * i as f64 + 1.0) / n as f64;
            let r = (1.0 - z * z).max(0.0).sqrt();
            let phi = golden * i as f64;
            Vec3::new(r * phi.cos(), r * phi.sin(), z)
        })
        .collect();
    PointCloud::with_normals(pts.clone(), pts)
}

/// `n` seeded uniform points on the unit square in the `z = 0` plane.
pub fn plane(n: usize, seed: u64) -> Result<PointCloud> {
    if n == 0 {
        return Err(Error::EmptyCloud);
    }
    let mut rng = stage_rng(seed, "synthetic.plane");
    let pts: Vec<Vec3> = (0..n)
        .map(|_| Vec3::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), 0.0))
        .collect();
    PointCloud::with_normals(pts, vec![Vec3::z(); n])
}

/// `n` seeded points on the height field `z = a·(sin πx + cos πy)` over the
/// unit square.
pub fn wave(n: usize, amplitude: f64, seed: u64) -> Result<PointCloud> {
    if n == 0 {
        return Err(Error::EmptyCloud);
    }
    let pi = std::f64::consts::PI;
    let mut rng = stage_rng(seed, "synthetic.wave");
    let mut pts = Vec::with_capacity(n);
    let mut normals = Vec::with_capacity(n);
    for _ in 0..n {
        let (x, y): (f64, f64) = (rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
        let z = amplitude * ((pi * x).sin() + (pi * y).cos());
        let hx = amplitude * pi * (pi * x).cos();
        let hy = -amplitude * pi * (pi * y).sin();
        pts.push(Vec3::new(x, y, z));
        normals.push(Vec3::new(-hx, -hy, 1.0).normalize());
    }
    PointCloud::with_normals(pts, normals)
}
