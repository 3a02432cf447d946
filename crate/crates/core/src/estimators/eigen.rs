use nalgebra::{Matrix3, Vector3};

/// Eigen-decomposition of a symmetric 3×3 matrix, eigenvalues ascending and
/// eigenvectors as the matching columns of `vectors` (orthonormal).
#[derive(Clone, Copy, Debug)]
pub struct Eigen3 {
    pub values: [f64; 3],
    pub vectors: Matrix3<f64>,
}

const MAX_SWEEPS: usize = 16;

/// Closed-form eigenvalues from the characteristic polynomial, eigenvectors
/// from row cross products, then Jacobi sweeps to polish the basis.
pub fn symmetric_eigen3(a: &Matrix3<f64>) -> Eigen3 {
    let a = (a + a.transpose()) * 0.5;
    let scale = a.amax();
    if scale == 0.0 || !scale.is_finite() {
        return Eigen3 {
            values: [0.0; 3],
            vectors: Matrix3::identity(),
        };
    }
    let m = a / scale;
    let v = initial_basis(&m);
    let (values, vectors) = jacobi_polish(&m, v);

    let mut order = [0usize, 1, 2];
    order.sort_by(|&i, &j| values[i].total_cmp(&values[j]));
    let mut out = Matrix3::zeros();
    let mut vals = [0.0; 3];
    for (dst, &src) in order.iter().enumerate() {
        vals[dst] = values[src] * scale;
        out.set_column(dst, &vectors.column(src));
    }
    Eigen3 {
        values: vals,
        vectors: out,
    }
}

fn initial_basis(m: &Matrix3<f64>) -> Matrix3<f64> {
    let q = m.trace() / 3.0;
    let b = m - Matrix3::identity() * q;
    let p = ((b * b).trace() / 6.0).sqrt();
    if p <= f64::EPSILON {
        return Matrix3::identity();
    }
    let r = ((b / p).determinant() / 2.0).clamp(-1.0, 1.0);
    let phi = r.acos() / 3.0;
    let largest = q + 2.0 * p * phi.cos();
    let smallest = q + 2.0 * p * (phi + 2.0 * std::f64::consts::FRAC_PI_3).cos();
    let middle = 3.0 * q - largest - smallest;

    // Start from the eigenvalue farthest from the other two.
    let (first, second) = if largest - middle >= middle - smallest {
        (largest, middle)
    } else {
        (smallest, middle)
    };
    let Some(e0) = null_vector(&(m - Matrix3::identity() * first)) else {
        return Matrix3::identity();
    };
    let (u, w) = complement(&e0);
    // Restrict to the plane orthogonal to e0 and solve the 2×2 problem.
    let muu = u.dot(&(m * u));
    let muw = u.dot(&(m * w));
    let mww = w.dot(&(m * w));
    let (c, s) = {
        let (x, y) = (muu - second, muw);
        let (x2, y2) = (muw, mww - second);
        // null vector of [[x, y], [x2, y2]], pick the better conditioned row
        if x * x + y * y >= x2 * x2 + y2 * y2 {
            normalize2(-y, x)
        } else {
            normalize2(-y2, x2)
        }
    };
    let e1 = u * c + w * s;
    let e2 = e0.cross(&e1);
    Matrix3::from_columns(&[e0, e1, e2])
}

fn normalize2(x: f64, y: f64) -> (f64, f64) {
    let n = x.hypot(y);
    if n <= f64::EPSILON {
        (1.0, 0.0)
    } else {
        (x / n, y / n)
    }
}

fn null_vector(a: &Matrix3<f64>) -> Option<Vector3<f64>> {
    let r0: Vector3<f64> = a.row(0).transpose();
    let r1: Vector3<f64> = a.row(1).transpose();
    let r2: Vector3<f64> = a.row(2).transpose();
    let best = [r0.cross(&r1), r0.cross(&r2), r1.cross(&r2)]
        .into_iter()
        .max_by(|x, y| x.norm_squared().total_cmp(&y.norm_squared()))?;
    let n = best.norm();
    (n > 1e-300).then(|| best / n)
}

/// Two unit vectors completing `n` to an orthonormal basis.
fn complement(n: &Vector3<f64>) -> (Vector3<f64>, Vector3<f64>) {
    let helper = if n.x.abs() > n.y.abs() {
        Vector3::new(-n.z, 0.0, n.x)
    } else {
        Vector3::new(0.0, n.z, -n.y)
    };
    let u = helper.normalize();
    (u, n.cross(&u))
}

fn jacobi_polish(m: &Matrix3<f64>, mut v: Matrix3<f64>) -> ([f64; 3], Matrix3<f64>) {
    let mut d = v.transpose() * m * v;
    for _ in 0..MAX_SWEEPS {
        let off = d[(0, 1)].powi(2) + d[(0, 2)].powi(2) + d[(1, 2)].powi(2);
        if off <= 1e-32 * d.norm_squared().max(f64::MIN_POSITIVE) {
            break;
        }
        for (p, q) in [(0, 1), (0, 2), (1, 2)] {
            let apq = d[(p, q)];
            if apq == 0.0 {
                continue;
            }
            let theta = (d[(q, q)] - d[(p, p)]) / (2.0 * apq);
            let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
            let t = if theta == 0.0 { 1.0 } else { t };
            let c = 1.0 / (t * t + 1.0).sqrt();
            let s = t * c;
            let mut rot = Matrix3::identity();
            rot[(p, p)] = c;
            rot[(q, q)] = c;
            rot[(p, q)] = s;
            rot[(q, p)] = -s;
            d = rot.transpose() * d * rot;
            v *= rot;
        }
    }
    ([d[(0, 0)], d[(1, 1)], d[(2, 2)]], v)
}
