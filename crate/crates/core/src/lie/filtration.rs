//! Lower central series and the drift-weighted filtrations `F_v`.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::{AlgVector, NilpotentAlgebra, Subspace};
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FiltrationKind {
    LowerCentral,
    Weighted(AlgVector),
}

/// Nested ideals `n = n(1) ⊇ n(2) ⊇ ... ⊇ n(depth) ⊋ {0}` together with the
/// orthogonal layers `m_i = n(i) ⊖ n(i+1)`; layer `i` carries weight `i`.
/// Some layers of a weighted filtration may be `{0}`.
/// Worst residuals of the structural properties of a filtration; every
/// residual is a subspace-containment distance.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FiltrationInvariants {
    pub depth: usize,
    pub step: usize,
    /// Largest `|<a, b>|` between basis vectors of distinct layers.
    pub orthogonality: f64,
    /// Layers `i..` summed against the ideal of weight `i`, both ways.
    pub nestedness: f64,
    /// `[n(i), n(j)] ⊆ n(i+j)`.
    pub bracket_containment: f64,
    /// `γ_i ⊆ n(i)`.
    pub contains_lower_central: f64,
    /// `n(2i) ⊆ γ_{i+1}`.
    pub inside_lower_central: f64,
    /// `s <= depth <= 2s`.
    pub depth_in_range: bool,
}

impl FiltrationInvariants {
    pub fn max_residual(&self) -> f64 {
        [
            self.orthogonality,
            self.nestedness,
            self.bracket_containment,
            self.contains_lower_central,
            self.inside_lower_central,
        ]
        .into_iter()
        .fold(0.0, f64::max)
    }
}

#[derive(Clone, Debug)]
pub struct Filtration {
    kind: FiltrationKind,
    dim: usize,
    ideals: Vec<Subspace>,
    layers: Vec<Subspace>,
    // transposed layer bases, for fast per-layer coordinates
    layer_rows: Vec<DMatrix<f64>>,
}

/// `span{[a, b] : a ∈ A, b ∈ B}`.
pub fn bracket_span(alg: &NilpotentAlgebra, a: &Subspace, b: &Subspace) -> Subspace {
    let d = alg.dim();
    let mut out = Vec::with_capacity(a.dim() * b.dim());
    let mut buf = vec![0.0; d];
    for x in a.basis_vectors() {
        for y in b.basis_vectors() {
            alg.bracket_into(x.as_slice(), y.as_slice(), &mut buf);
            out.push(DVector::from_column_slice(&buf));
        }
    }
    Subspace::span(d, &out)
}

/// Step of the lower central series, or `None` if it stalls above zero.
pub fn nilpotency_step(alg: &NilpotentAlgebra) -> Option<usize> {
    let d = alg.dim();
    let full = Subspace::full(d);
    let mut gamma = full.clone();
    let mut step = 1;
    loop {
        let next = bracket_span(alg, &full, &gamma);
        if next.is_zero() {
            return Some(step);
        }
        if next.dim() >= gamma.dim() {
            return None;
        }
        gamma = next;
        step += 1;
    }
}

impl Filtration {
    fn from_ideals(kind: FiltrationKind, dim: usize, ideals: Vec<Subspace>) -> Self {
        let mut layers = Vec::with_capacity(ideals.len());
        for (i, ideal) in ideals.iter().enumerate() {
            let next = ideals.get(i + 1).cloned().unwrap_or_else(|| Subspace::zero(dim));
            layers.push(ideal.complement_of(&next));
        }
        let layer_rows = layers.iter().map(|l| l.basis().transpose()).collect();
        Self {
            kind,
            dim,
            ideals,
            layers,
            layer_rows,
        }
    }

    pub fn lower_central_series(alg: &NilpotentAlgebra) -> Self {
        let d = alg.dim();
        let full = Subspace::full(d);
        let mut ideals = vec![full.clone()];
        // at most d strict decreases are possible
        for _ in 0..d {
            let next = bracket_span(alg, &full, ideals.last().unwrap());
            if next.is_zero() || next.dim() >= ideals.last().unwrap().dim() {
                break;
            }
            ideals.push(next);
        }
        Self::from_ideals(FiltrationKind::LowerCentral, d, ideals)
    }

    /// `n(0) = n(1) = n`, `n(i+1) = [n, n(i)] + [v, n(i-1)]`, iterated until
    /// two consecutive ideals vanish.
    pub fn weighted(alg: &NilpotentAlgebra, v: &AlgVector) -> Result<Self> {
        let d = alg.dim();
        if v.dim() != d {
            return Err(Error::DimensionMismatch { expected: d, got: v.dim() });
        }
        let full = Subspace::full(d);
        let line = Subspace::span_alg(d, std::slice::from_ref(v));
        // seq[i] = n(i)
        let mut seq = vec![full.clone(), full.clone()];
        // c <= 2s <= 2d, plus slack for the two trailing zeros
        for _ in 0..(2 * d + 2) {
            let i = seq.len() - 1;
            let next = bracket_span(alg, &full, &seq[i]).sum(&bracket_span(alg, &line, &seq[i - 1]));
            let stop = next.is_zero() && seq[i].is_zero();
            seq.push(next);
            if stop {
                break;
            }
        }
        let depth = seq.iter().rposition(|s| !s.is_zero()).unwrap_or(1).max(1);
        let ideals = seq[1..=depth].to_vec();
        Ok(Self::from_ideals(FiltrationKind::Weighted(v.clone()), d, ideals))
    }

    pub fn kind(&self) -> &FiltrationKind {
        &self.kind
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// `s` for the lower central series, `c` for a weighted filtration.
    pub fn depth(&self) -> usize {
        self.ideals.len()
    }

    /// Ideal of weight `i` (1-based); `i = 0` is the whole algebra and
    /// indices past the depth are `{0}`.
    pub fn ideal(&self, i: usize) -> Subspace {
        match i {
            0 => Subspace::full(self.dim),
            i if i <= self.ideals.len() => self.ideals[i - 1].clone(),
            _ => Subspace::zero(self.dim),
        }
    }

    /// Layer of weight `i` (1-based).
    pub fn layer(&self, i: usize) -> &Subspace {
        &self.layers[i - 1]
    }

    pub fn layers(&self) -> &[Subspace] {
        &self.layers
    }

    pub fn layer_dims(&self) -> Vec<usize> {
        self.layers.iter().map(Subspace::dim).collect()
    }

    fn check(&self, x: &AlgVector) -> Result<()> {
        if x.dim() != self.dim {
            Err(Error::DimensionMismatch { expected: self.dim, got: x.dim() })
        } else {
            Ok(())
        }
    }

    /// Components of `x` in each layer; they sum to `x`.
    pub fn layer_project(&self, x: &AlgVector) -> Result<Vec<AlgVector>> {
        self.check(x)?;
        let xv = x.to_dvector();
        Ok(self
            .layers
            .iter()
            .map(|l| AlgVector::from_dvector(&l.project(&xv)))
            .collect())
    }

    /// Coordinates of each layer component in its own orthonormal basis.
    pub fn layer_coordinates(&self, x: &[f64]) -> Vec<Vec<f64>> {
        self.layer_rows
            .iter()
            .map(|rows| {
                (0..rows.nrows())
                    .map(|r| rows.row(r).iter().zip(x).map(|(a, b)| a * b).sum())
                    .collect()
            })
            .collect()
    }

    /// Euclidean norms of each layer component, written into `out`.
    pub fn layer_norms_into(&self, x: &[f64], out: &mut [f64]) {
        for (o, rows) in out.iter_mut().zip(&self.layer_rows) {
            let mut acc = 0.0;
            for r in 0..rows.nrows() {
                let c: f64 = rows.row(r).iter().zip(x).map(|(a, b)| a * b).sum();
                acc += c * c;
            }
            *o = acc.sqrt();
        }
    }

    /// Checks pairwise orthogonality, nestedness and the containments
    /// relating this filtration to the lower central series of `alg`.
    pub fn invariants(&self, alg: &NilpotentAlgebra) -> FiltrationInvariants {
        let c = self.depth();
        let lc = Filtration::lower_central_series(alg);
        let s = lc.depth();
        let mut orth = 0.0f64;
        for a in 0..c {
            for b in a + 1..c {
                let (la, lb) = (&self.layers[a], &self.layers[b]);
                if !la.is_zero() && !lb.is_zero() {
                    orth = orth.max((la.basis().transpose() * lb.basis()).amax());
                }
            }
        }
        let mut nest = 0.0f64;
        for i in 1..=c + 1 {
            let sum = (i..=c).fold(Subspace::zero(self.dim), |acc, j| acc.sum(self.layer(j)));
            let ideal = self.ideal(i);
            nest = nest.max(sum.containment_residual(&ideal)).max(ideal.containment_residual(&sum));
        }
        let mut brk = 0.0f64;
        for i in 1..=c {
            for j in i..=c {
                let br = bracket_span(alg, &self.ideal(i), &self.ideal(j));
                brk = brk.max(self.ideal(i + j).containment_residual(&br));
            }
        }
        let mut lower = 0.0f64;
        let mut upper = 0.0f64;
        for i in 1..=2 * c + 1 {
            lower = lower.max(self.ideal(i).containment_residual(&lc.ideal(i)));
            upper = upper.max(lc.ideal(i + 1).containment_residual(&self.ideal(2 * i)));
        }
        FiltrationInvariants {
            depth: c,
            step: s,
            orthogonality: orth,
            nestedness: nest,
            bracket_containment: brk,
            contains_lower_central: lower,
            inside_lower_central: upper,
            depth_in_range: s <= c && c <= 2 * s,
        }
    }

    /// Rebuild a vector from per-layer coordinates.
    pub fn from_layer_coordinates(&self, coords: &[Vec<f64>]) -> AlgVector {
        let mut out = DVector::zeros(self.dim);
        for (layer, c) in self.layers.iter().zip(coords) {
            if !c.is_empty() {
                out += layer.basis() * DVector::from_column_slice(c);
            }
        }
        AlgVector::from_dvector(&out)
    }
}
