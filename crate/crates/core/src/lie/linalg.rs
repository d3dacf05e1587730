//! Singular value decomposition by one-sided Jacobi rotations.
//!
//! nalgebra's bidiagonal SVD (0.33 through 0.35) can return factors that do
//! not reconstruct the input when tiny entries sit next to unit ones, e.g.
//! the 4x2 matrix in `tests::bidiagonal_regression`. The rank decisions
//! behind filtrations and fixed sets need the small singular values to be
//! right, and Jacobi is accurate to high relative precision on the small
//! matrices used here.

use nalgebra::{DMatrix, DVector};

const SWEEPS: usize = 80;

/// `a = u * diag(s) * v^T` with `s` sorted decreasingly; `u` is `m x n`
/// (columns for zero singular values are zero) and `v` is `n x n` orthogonal.
#[derive(Clone, Debug)]
pub struct Svd {
    pub u: DMatrix<f64>,
    pub s: DVector<f64>,
    pub v: DMatrix<f64>,
}

pub fn svd(a: &DMatrix<f64>) -> Svd {
    let (m, n) = a.shape();
    let mut w = a.clone();
    let mut v = DMatrix::<f64>::identity(n, n);
    for _ in 0..SWEEPS {
        let mut rotated = false;
        for p in 0..n {
            for q in p + 1..n {
                let alpha = w.column(p).norm_squared();
                let beta = w.column(q).norm_squared();
                let gamma = w.column(p).dot(&w.column(q));
                if gamma == 0.0 || gamma.abs() <= f64::EPSILON * (alpha * beta).sqrt() {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (2.0 * gamma);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                for i in 0..m {
                    let (x, y) = (w[(i, p)], w[(i, q)]);
                    w[(i, p)] = c * x - s * y;
                    w[(i, q)] = s * x + c * y;
                }
                for i in 0..n {
                    let (x, y) = (v[(i, p)], v[(i, q)]);
                    v[(i, p)] = c * x - s * y;
                    v[(i, q)] = s * x + c * y;
                }
            }
        }
        if !rotated {
            break;
        }
    }
    let sig: Vec<f64> = (0..n).map(|j| w.column(j).norm()).collect();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| sig[b].total_cmp(&sig[a]));
    let mut u = DMatrix::zeros(m, n);
    let mut vs = DMatrix::zeros(n, n);
    let mut s = DVector::zeros(n);
    for (k, &j) in order.iter().enumerate() {
        s[k] = sig[j];
        if sig[j] > 0.0 {
            u.set_column(k, &(w.column(j) / sig[j]));
        }
        vs.set_column(k, &v.column(j));
    }
    Svd { u, s, v: vs }
}

impl Svd {
    /// Minimum-norm least-squares solution, dropping singular values `<= tol`.
    pub fn solve(&self, b: &DVector<f64>, tol: f64) -> DVector<f64> {
        let mut x = DVector::zeros(self.v.nrows());
        for k in 0..self.s.len() {
            if self.s[k] > tol {
                let c = self.u.column(k).dot(b) / self.s[k];
                x += self.v.column(k) * c;
            }
        }
        x
    }

    pub fn min_singular(&self) -> f64 {
        self.s.iter().copied().fold(f64::INFINITY, f64::min)
    }
}

/// Left singular vectors with singular value above `rel_tol * max(sigma_max, 1)`.
/// Runs Jacobi on `a^T`, so only `m` columns are rotated.
pub fn column_space(a: &DMatrix<f64>, rel_tol: f64) -> DMatrix<f64> {
    let t = svd(&a.transpose());
    let smax = t.s.iter().copied().fold(0.0, f64::max);
    let tol = rel_tol * smax.max(1.0);
    let k = t.s.iter().filter(|&&s| s > tol).count();
    t.v.columns(0, k).into_owned()
}
