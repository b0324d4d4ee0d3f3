//! Left singular vectors by one-sided (Hestenes) Jacobi.

use nalgebra::DMatrix;

const MAX_SWEEPS: usize = 80;

/// Singular values (unsorted) and left singular vectors of the d×M matrix
/// `w`. The vector matrix is d×d and orthogonal, including the null space.
pub(super) fn left_singular(w: &DMatrix<f64>) -> (Vec<f64>, DMatrix<f64>) {
    let d = w.nrows();
    // Jacobi on X = Wᵀ, reduced to its d×d triangular factor when M > d
    let mut x = if w.ncols() > d { w.transpose().qr().r() } else { w.transpose() };
    let mut v = DMatrix::<f64>::identity(d, d);
    for _ in 0..MAX_SWEEPS {
        let mut rotated = false;
        for p in 0..d {
            for q in p + 1..d {
                let a = x.column(p).norm_squared();
                let b = x.column(q).norm_squared();
                let g = x.column(p).dot(&x.column(q));
                if g == 0.0 || g.abs() <= f64::EPSILON * (a * b).sqrt() {
                    continue;
                }
                rotated = true;
                let zeta = (b - a) / (2.0 * g);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                rotate(&mut x, p, q, c, s);
                rotate(&mut v, p, q, c, s);
            }
        }
        if !rotated {
            break;
        }
    }
    let values = (0..d).map(|j| x.column(j).norm()).collect();
    (values, v)
}

fn rotate(m: &mut DMatrix<f64>, p: usize, q: usize, c: f64, s: f64) {
    for i in 0..m.nrows() {
        let (xp, xq) = (m[(i, p)], m[(i, q)]);
        m[(i, p)] = c * xp - s * xq;
        m[(i, q)] = s * xp + c * xq;
    }
}
