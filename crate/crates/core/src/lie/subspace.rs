//! Subspaces of the ambient euclidean space carried by an orthonormal basis.
//!
//! Spans are computed by a Jacobi SVD; singular values at or below
//! `RANK_TOL * max(sigma_max, 1)` are treated as zero. The absolute floor
//! keeps rounding residue (vectors of size ~1e-17) from being promoted to a
//! full-rank span.

use nalgebra::{DMatrix, DVector};

use super::linalg::{column_space, svd};
use super::AlgVector;

pub const RANK_TOL: f64 = 1e-10;

#[derive(Clone, Debug)]
pub struct Subspace {
    ambient: usize,
    /// ambient x dim, orthonormal columns.
    basis: DMatrix<f64>,
}

impl Subspace {
    pub fn zero(ambient: usize) -> Self {
        Self {
            ambient,
            basis: DMatrix::zeros(ambient, 0),
        }
    }

    pub fn full(ambient: usize) -> Self {
        Self {
            ambient,
            basis: DMatrix::identity(ambient, ambient),
        }
    }

    pub fn span(ambient: usize, vectors: &[DVector<f64>]) -> Self {
        if vectors.is_empty() {
            return Self::zero(ambient);
        }
        let m = DMatrix::from_columns(vectors);
        Self::column_span(&m)
    }

    pub fn span_alg(ambient: usize, vectors: &[AlgVector]) -> Self {
        let cols: Vec<DVector<f64>> = vectors.iter().map(AlgVector::to_dvector).collect();
        Self::span(ambient, &cols)
    }

    /// Column space of an arbitrary `ambient x m` matrix.
    pub fn column_span(m: &DMatrix<f64>) -> Self {
        let ambient = m.nrows();
        if m.ncols() == 0 || m.iter().all(|&x| x == 0.0) {
            return Self::zero(ambient);
        }
        let basis = column_space(m, RANK_TOL);
        if basis.ncols() == 0 {
            Self::zero(ambient)
        } else {
            Self { ambient, basis }
        }
    }

    /// Orthonormal basis given directly (columns must already be orthonormal).
    pub fn from_orthonormal(basis: DMatrix<f64>) -> Self {
        Self {
            ambient: basis.nrows(),
            basis,
        }
    }

    pub fn ambient(&self) -> usize {
        self.ambient
    }

    pub fn dim(&self) -> usize {
        self.basis.ncols()
    }

    pub fn is_zero(&self) -> bool {
        self.dim() == 0
    }

    pub fn basis(&self) -> &DMatrix<f64> {
        &self.basis
    }

    pub fn basis_vectors(&self) -> Vec<DVector<f64>> {
        self.basis.column_iter().map(|c| c.into_owned()).collect()
    }

    pub fn sum(&self, other: &Subspace) -> Subspace {
        let mut cols = self.basis_vectors();
        cols.extend(other.basis_vectors());
        Subspace::span(self.ambient, &cols)
    }

    pub fn project(&self, x: &DVector<f64>) -> DVector<f64> {
        if self.is_zero() {
            return DVector::zeros(self.ambient);
        }
        &self.basis * (self.basis.transpose() * x)
    }

    /// Coordinates of the projection of `x` in this subspace's basis.
    pub fn coordinates(&self, x: &DVector<f64>) -> DVector<f64> {
        self.basis.transpose() * x
    }

    pub fn projector(&self) -> DMatrix<f64> {
        &self.basis * self.basis.transpose()
    }

    /// Orthogonal complement of `inner` inside `self`.
    pub fn complement_of(&self, inner: &Subspace) -> Subspace {
        if self.is_zero() {
            return Subspace::zero(self.ambient);
        }
        let residual = &self.basis - inner.projector() * &self.basis;
        Subspace::column_span(&residual)
    }

    /// Largest distance from a unit basis vector of `other` to `self`.
    /// Zero (up to rounding) iff `other` is contained in `self`.
    pub fn containment_residual(&self, other: &Subspace) -> f64 {
        other
            .basis_vectors()
            .iter()
            .map(|b| (b - self.project(b)).norm())
            .fold(0.0, f64::max)
    }

    /// Distance from `x` to `self`.
    pub fn residual(&self, x: &DVector<f64>) -> f64 {
        (x - self.project(x)).norm()
    }

    /// Two subspaces coincide iff each contains the other.
    pub fn same_as(&self, other: &Subspace, tol: f64) -> bool {
        self.dim() == other.dim()
            && self.containment_residual(other) <= tol
            && other.containment_residual(self) <= tol
    }
}

/// Orthonormal basis of the null space of `m` (acting on column vectors of
/// length `m.ncols()`), with singular-value threshold `tol`.
pub fn null_space(m: &DMatrix<f64>, tol: f64) -> DMatrix<f64> {
    let n = m.ncols();
    if n == 0 {
        return DMatrix::zeros(0, 0);
    }
    let d = svd(m);
    let cols: Vec<DVector<f64>> = (0..n).filter(|&k| d.s[k] <= tol).map(|k| d.v.column(k).into_owned()).collect();
    if cols.is_empty() {
        DMatrix::zeros(n, 0)
    } else {
        DMatrix::from_columns(&cols)
    }
}
