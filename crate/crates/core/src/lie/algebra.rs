use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::{filtration, AlgVector};
use crate::error::{Error, Result};

/// Residual threshold for antisymmetry and Jacobi checks.
pub const STRUCTURE_TOL: f64 = 1e-12;

/// A finite-dimensional nilpotent Lie algebra given by structure constants
/// `[e_i, e_j] = sum_k c[i][j][k] e_k` in an orthonormal basis.
#[derive(Clone, Debug)]
pub struct NilpotentAlgebra {
    dim: usize,
    step: usize,
    labels: Vec<String>,
    tensor: Vec<f64>,
    // nonzero entries (i, j, k, c), used by the hot bracket path
    entries: Vec<(usize, usize, usize, f64)>,
}

/// JSON form: `{dim, step, brackets: [[i, j, [[k, coeff], ...]], ...], labels}`,
/// indices 1-based. A bracket listed only as `[i, j]` is antisymmetrized.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct AlgebraDoc {
    pub dim: usize,
    pub step: usize,
    pub brackets: Vec<(usize, usize, Vec<(usize, f64)>)>,
    #[serde(default)]
    pub labels: Vec<String>,
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct ValidationReport {
    pub antisymmetry_residual: f64,
    pub jacobi_residual: f64,
    pub declared_step: usize,
    /// `None` when the lower central series does not reach zero.
    pub computed_step: Option<usize>,
    pub passed: bool,
    pub failures: Vec<String>,
}

impl NilpotentAlgebra {
    /// Raw tensor, indexed `[(i * dim + j) * dim + k]`, no symmetrization.
    pub fn from_tensor(dim: usize, step: usize, tensor: Vec<f64>, labels: Vec<String>) -> Result<Self> {
        if dim == 0 || step == 0 {
            return Err(Error::InvalidAlgebra("dim and step must be positive".into()));
        }
        if tensor.len() != dim * dim * dim {
            return Err(Error::InvalidAlgebra(format!(
                "structure tensor has {} entries, expected {}",
                tensor.len(),
                dim * dim * dim
            )));
        }
        let labels = if labels.is_empty() {
            (1..=dim).map(|i| format!("e{i}")).collect()
        } else if labels.len() == dim {
            labels
        } else {
            return Err(Error::InvalidAlgebra(format!("{} labels for dimension {dim}", labels.len())));
        };
        let mut entries = Vec::new();
        for i in 0..dim {
            for j in 0..dim {
                for k in 0..dim {
                    let c = tensor[(i * dim + j) * dim + k];
                    if c != 0.0 {
                        entries.push((i, j, k, c));
                    }
                }
            }
        }
        Ok(Self {
            dim,
            step,
            labels,
            tensor,
            entries,
        })
    }

    /// Brackets given 0-based as `(i, j, [(k, c)])`; the `(j, i)` entry is
    /// filled in by antisymmetry unless it is listed explicitly.
    pub fn from_brackets(dim: usize, step: usize, brackets: &[(usize, usize, Vec<(usize, f64)>)]) -> Result<Self> {
        let mut tensor = vec![0.0; dim * dim * dim];
        let listed: std::collections::HashSet<(usize, usize)> = brackets.iter().map(|(i, j, _)| (*i, *j)).collect();
        for (i, j, terms) in brackets {
            for &(k, c) in terms {
                if *i >= dim || *j >= dim || k >= dim {
                    return Err(Error::InvalidAlgebra(format!("index out of range in [{i},{j}] -> {k}")));
                }
                tensor[(i * dim + j) * dim + k] = c;
                if !listed.contains(&(*j, *i)) {
                    tensor[(j * dim + i) * dim + k] = -c;
                }
            }
        }
        Self::from_tensor(dim, step, tensor, Vec::new())
    }

    pub fn from_doc(doc: &AlgebraDoc) -> Result<Self> {
        let zero_based: Result<Vec<_>> = doc
            .brackets
            .iter()
            .map(|(i, j, terms)| {
                let shift = |x: usize| {
                    x.checked_sub(1)
                        .ok_or_else(|| Error::InvalidAlgebra("indices are 1-based".into()))
                };
                let terms: Result<Vec<_>> = terms.iter().map(|&(k, c)| Ok((shift(k)?, c))).collect();
                Ok((shift(*i)?, shift(*j)?, terms?))
            })
            .collect();
        let mut alg = Self::from_brackets(doc.dim, doc.step, &zero_based?)?;
        if !doc.labels.is_empty() {
            if doc.labels.len() != doc.dim {
                return Err(Error::InvalidAlgebra("label count differs from dim".into()));
            }
            alg.labels = doc.labels.clone();
        }
        Ok(alg)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let doc: AlgebraDoc = serde_json::from_str(s)?;
        Self::from_doc(&doc)
    }

    pub fn to_doc(&self) -> AlgebraDoc {
        let d = self.dim;
        let mut brackets = Vec::new();
        for i in 0..d {
            for j in 0..d {
                let terms: Vec<(usize, f64)> = (0..d)
                    .filter_map(|k| {
                        let c = self.c(i, j, k);
                        (c != 0.0).then_some((k + 1, c))
                    })
                    .collect();
                if !terms.is_empty() {
                    brackets.push((i + 1, j + 1, terms));
                }
            }
        }
        AlgebraDoc {
            dim: d,
            step: self.step,
            brackets,
            labels: self.labels.clone(),
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn step(&self) -> usize {
        self.step
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    #[inline]
    pub fn c(&self, i: usize, j: usize, k: usize) -> f64 {
        self.tensor[(i * self.dim + j) * self.dim + k]
    }

    pub fn is_abelian(&self) -> bool {
        self.entries.is_empty()
    }

    fn check_dim(&self, v: &AlgVector) -> Result<()> {
        if v.dim() != self.dim {
            Err(Error::DimensionMismatch {
                expected: self.dim,
                got: v.dim(),
            })
        } else {
            Ok(())
        }
    }

    pub fn bracket(&self, x: &AlgVector, y: &AlgVector) -> Result<AlgVector> {
        self.check_dim(x)?;
        self.check_dim(y)?;
        let mut out = vec![0.0; self.dim];
        self.bracket_into(x.as_slice(), y.as_slice(), &mut out);
        Ok(AlgVector::new(out))
    }

    /// `out = [x, y]`; slices must have length `dim`.
    #[inline]
    pub fn bracket_into(&self, x: &[f64], y: &[f64], out: &mut [f64]) {
        out.iter_mut().for_each(|o| *o = 0.0);
        for &(i, j, k, c) in &self.entries {
            out[k] += c * x[i] * y[j];
        }
    }

    /// Matrix of `ad_x = [x, .]`.
    pub fn ad_matrix(&self, x: &AlgVector) -> DMatrix<f64> {
        let d = self.dim;
        let mut m = DMatrix::zeros(d, d);
        for &(i, j, k, c) in &self.entries {
            m[(k, j)] += c * x[i];
        }
        m
    }

    pub fn basis_vector(&self, i: usize) -> AlgVector {
        AlgVector::basis(self.dim, i)
    }

    pub fn validate(&self) -> ValidationReport {
        let d = self.dim;
        let mut antisym = 0.0f64;
        for i in 0..d {
            for j in 0..d {
                for k in 0..d {
                    antisym = antisym.max((self.c(i, j, k) + self.c(j, i, k)).abs());
                }
            }
        }
        let mut jacobi = 0.0f64;
        let mut t1 = vec![0.0; d];
        let mut t2 = vec![0.0; d];
        let basis: Vec<AlgVector> = (0..d).map(|i| self.basis_vector(i)).collect();
        for a in 0..d {
            for b in 0..d {
                for c in 0..d {
                    let (x, y, z) = (basis[a].as_slice(), basis[b].as_slice(), basis[c].as_slice());
                    let mut sum = vec![0.0; d];
                    for (p, q, r) in [(x, y, z), (y, z, x), (z, x, y)] {
                        self.bracket_into(q, r, &mut t1);
                        self.bracket_into(p, &t1, &mut t2);
                        for (s, v) in sum.iter_mut().zip(&t2) {
                            *s += v;
                        }
                    }
                    jacobi = jacobi.max(sum.iter().fold(0.0, |m, v| m.max(v.abs())));
                }
            }
        }
        let computed_step = filtration::nilpotency_step(self);
        let mut failures = Vec::new();
        if antisym > STRUCTURE_TOL {
            failures.push(format!("antisymmetry violated (max residual {antisym:e})"));
        }
        if jacobi > STRUCTURE_TOL {
            failures.push(format!("Jacobi identity violated (max residual {jacobi:e})"));
        }
        match computed_step {
            None => failures.push("lower central series does not terminate".into()),
            Some(s) if s != self.step => failures.push(format!("declared step {} but computed step {s}", self.step)),
            _ => {}
        }
        ValidationReport {
            antisymmetry_residual: antisym,
            jacobi_residual: jacobi,
            declared_step: self.step,
            computed_step,
            passed: failures.is_empty(),
            failures,
        }
    }

    /// Bilinearity constant of the euclidean norm, `sup ||[u, v]||` over unit
    /// balls, estimated by alternating top-singular-vector updates from every
    /// basis start. Exact for the presets shipped here.
    pub fn euclidean_bilinearity(&self) -> f64 {
        if self.is_abelian() {
            return 0.0;
        }
        let d = self.dim;
        let mut best = 0.0f64;
        for start in 0..d {
            let mut u = self.basis_vector(start);
            let mut value = 0.0;
            for _ in 0..200 {
                // v maximizes ||[u, v]||: top right singular vector of ad_u
                let v = top_right_singular(&self.ad_matrix(&u));
                let Some(v) = v else { break };
                // u maximizes ||[u, v]|| = ||-ad_v u||
                let next = match top_right_singular(&self.ad_matrix(&v)) {
                    Some(n) => n,
                    None => break,
                };
                let val = self.bracket(&next, &v).map(|b| b.norm()).unwrap_or(0.0);
                u = next;
                if (val - value).abs() < 1e-15 {
                    value = val;
                    break;
                }
                value = val;
            }
            best = best.max(value);
        }
        best
    }
}

fn top_right_singular(m: &DMatrix<f64>) -> Option<AlgVector> {
    if m.ncols() == 0 {
        return None;
    }
    let d = super::linalg::svd(m);
    if d.s[0] <= 0.0 {
        return None;
    }
    Some(AlgVector::new(d.v.column(0).iter().copied().collect()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lie::presets;

    #[test]
    fn heisenberg_bracket() {
        let h = presets::heisenberg();
        let e = |i| h.basis_vector(i);
        assert_eq!(h.bracket(&e(0), &e(1)).unwrap(), e(2));
        assert_eq!(h.bracket(&e(1), &e(0)).unwrap(), -&e(2));
        let x = AlgVector::new(vec![0.3, -1.2, 4.0]);
        assert!(h.bracket(&x, &x).unwrap().is_zero());
    }

    #[test]
    fn bracket_dimension_mismatch() {
        let h = presets::heisenberg();
        let err = h.bracket(&AlgVector::zeros(2), &AlgVector::zeros(3)).unwrap_err();
        assert!(matches!(err, Error::DimensionMismatch { expected: 3, got: 2 }));
    }

    #[test]
    fn presets_validate() {
        let h = presets::heisenberg().validate();
        assert!(h.passed, "{h:?}");
        assert_eq!(h.computed_step, Some(2));
        let f = presets::filiform4().validate();
        assert!(f.passed, "{f:?}");
        assert_eq!(f.computed_step, Some(3));
        assert!(presets::engel5().validate().passed);
        assert_eq!(presets::abelian(4).validate().computed_step, Some(1));
    }

    #[test]
    fn antisymmetry_defect_is_flagged() {
        let mut t = vec![0.0; 27];
        t[(0 * 3 + 1) * 3 + 2] = 1.0; // c[1][2][3] = 1, c[2][1][3] = 0
        let alg = NilpotentAlgebra::from_tensor(3, 2, t, Vec::new()).unwrap();
        let r = alg.validate();
        assert!(!r.passed);
        assert!((r.antisymmetry_residual - 1.0).abs() < 1e-15);
        assert!(r.failures.iter().any(|f| f.contains("antisymmetry")));
    }

    #[test]
    fn jacobi_defect_is_flagged() {
        // [e1,e2]=e3, [e2,e3]=e1, [e3,e1]=e2 style defect: [e1,e2]=e3, [e1,e3]=e1
        let alg = NilpotentAlgebra::from_brackets(3, 2, &[(0, 1, vec![(2, 1.0)]), (1, 2, vec![(1, 1.0)])]).unwrap();
        let r = alg.validate();
        assert!(r.jacobi_residual > 0.5 || r.computed_step.is_none());
        assert!(!r.passed);
    }

    #[test]
    fn wrong_declared_step() {
        let alg = NilpotentAlgebra::from_brackets(3, 3, &[(0, 1, vec![(2, 1.0)])]).unwrap();
        let r = alg.validate();
        assert_eq!(r.computed_step, Some(2));
        assert!(!r.passed);
    }

    #[test]
    fn json_round_trip_uses_one_based_indices() {
        let json = r#"{"dim":3,"step":2,"brackets":[[1,2,[[3,1.0]]]],"labels":["x","y","z"]}"#;
        let alg = NilpotentAlgebra::from_json(json).unwrap();
        assert_eq!(alg.c(0, 1, 2), 1.0);
        assert_eq!(alg.c(1, 0, 2), -1.0);
        assert_eq!(alg.labels()[2], "z");
        let back = NilpotentAlgebra::from_doc(&alg.to_doc()).unwrap();
        assert_eq!(back.tensor, alg.tensor);
        assert!(NilpotentAlgebra::from_json(r#"{"dim":3,"step":2,"brackets":[[0,2,[[3,1.0]]]]}"#).is_err());
    }

    #[test]
    fn euclidean_bilinearity_heisenberg_is_one() {
        assert!((presets::heisenberg().euclidean_bilinearity() - 1.0).abs() < 1e-12);
        assert_eq!(presets::abelian(3).euclidean_bilinearity(), 0.0);
    }
}
