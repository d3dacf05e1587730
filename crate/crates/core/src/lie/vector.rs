use std::ops::{Add, AddAssign, Index, Mul, Neg, Sub};

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

/// Coordinates of a Lie algebra element in the fixed orthonormal basis.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct AlgVector(Vec<f64>);

impl AlgVector {
    pub fn new(coords: Vec<f64>) -> Self {
        Self(coords)
    }

    pub fn zeros(dim: usize) -> Self {
        Self(vec![0.0; dim])
    }

    /// The `i`-th basis vector (0-based).
    pub fn basis(dim: usize, i: usize) -> Self {
        let mut v = vec![0.0; dim];
        v[i] = 1.0;
        Self(v)
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.0
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.0
    }

    pub fn norm(&self) -> f64 {
        self.0.iter().map(|x| x * x).sum::<f64>().sqrt()
    }

    pub fn dot(&self, other: &Self) -> f64 {
        self.0.iter().zip(&other.0).map(|(a, b)| a * b).sum()
    }

    pub fn scale(&self, s: f64) -> Self {
        Self(self.0.iter().map(|x| x * s).collect())
    }

    pub fn is_zero(&self) -> bool {
        self.0.iter().all(|&x| x == 0.0)
    }

    /// Max-abs distance, used by the tolerance checks.
    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        self.0
            .iter()
            .zip(&other.0)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }

    pub fn to_dvector(&self) -> DVector<f64> {
        DVector::from_column_slice(&self.0)
    }

    pub fn from_dvector(v: &DVector<f64>) -> Self {
        Self(v.as_slice().to_vec())
    }
}

impl From<Vec<f64>> for AlgVector {
    fn from(v: Vec<f64>) -> Self {
        Self(v)
    }
}

impl Index<usize> for AlgVector {
    type Output = f64;
    fn index(&self, i: usize) -> &f64 {
        &self.0[i]
    }
}

impl Add<&AlgVector> for &AlgVector {
    type Output = AlgVector;
    fn add(self, rhs: &AlgVector) -> AlgVector {
        AlgVector(self.0.iter().zip(&rhs.0).map(|(a, b)| a + b).collect())
    }
}

impl Sub<&AlgVector> for &AlgVector {
    type Output = AlgVector;
    fn sub(self, rhs: &AlgVector) -> AlgVector {
        AlgVector(self.0.iter().zip(&rhs.0).map(|(a, b)| a - b).collect())
    }
}

impl AddAssign<&AlgVector> for AlgVector {
    fn add_assign(&mut self, rhs: &AlgVector) {
        for (a, b) in self.0.iter_mut().zip(&rhs.0) {
            *a += b;
        }
    }
}

impl Neg for &AlgVector {
    type Output = AlgVector;
    fn neg(self) -> AlgVector {
        AlgVector(self.0.iter().map(|x| -x).collect())
    }
}

impl Mul<&AlgVector> for f64 {
    type Output = AlgVector;
    fn mul(self, rhs: &AlgVector) -> AlgVector {
        rhs.scale(self)
    }
}
