//! Fixed-point sets of euclidean isometries and the defect functionals of
//! lifts of a finite group `F` into `R^d ⋊ F`.
//!
//! A lift assigns to each `f` an isometry with rotation part `rho(f)`.
//! `delta` measures how far the fixed sets of the lifted elements are from
//! sharing a point; `big_delta` measures how badly the lift fails the
//! relators `f1 f2 (f1 f2)^{-1}`.

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lie::linalg::svd;
use crate::lie::null_space;
use crate::semidirect::FiniteActionGroup;

pub const ORTHO_TOL: f64 = 1e-10;
/// Relative residual above which `(A - I) x = -u` is declared inconsistent.
pub const FIX_TOL: f64 = 1e-9;
const RANK_TOL: f64 = 1e-10;

/// `x -> rotation * x + translation`.
#[derive(Clone, Debug, PartialEq)]
pub struct IsometryElement {
    pub translation: DVector<f64>,
    pub rotation: DMatrix<f64>,
}

impl IsometryElement {
    pub fn new(translation: DVector<f64>, rotation: DMatrix<f64>) -> Result<Self> {
        let d = translation.len();
        if rotation.nrows() != d || rotation.ncols() != d {
            return Err(Error::DimensionMismatch { expected: d, got: rotation.nrows() });
        }
        let err = (rotation.transpose() * &rotation - DMatrix::identity(d, d)).amax();
        if err > ORTHO_TOL {
            return Err(Error::InvalidGroup(format!("rotation part not orthogonal (residual {err:e})")));
        }
        Ok(Self { translation, rotation })
    }

    pub fn identity(d: usize) -> Self {
        Self {
            translation: DVector::zeros(d),
            rotation: DMatrix::identity(d, d),
        }
    }

    pub fn translation_by(u: DVector<f64>) -> Self {
        let d = u.len();
        Self {
            translation: u,
            rotation: DMatrix::identity(d, d),
        }
    }

    pub fn dim(&self) -> usize {
        self.translation.len()
    }

    pub fn apply(&self, x: &DVector<f64>) -> DVector<f64> {
        &self.rotation * x + &self.translation
    }

    /// `self ∘ other`.
    pub fn compose(&self, other: &Self) -> Self {
        Self {
            translation: &self.rotation * &other.translation + &self.translation,
            rotation: &self.rotation * &other.rotation,
        }
    }

    pub fn inverse(&self) -> Self {
        let rt = self.rotation.transpose();
        Self {
            translation: -(&rt * &self.translation),
            rotation: rt,
        }
    }

    pub fn pow(&self, k: usize) -> Self {
        (0..k).fold(Self::identity(self.dim()), |acc, _| acc.compose(self))
    }

    /// `z ∘ self ∘ z^{-1}`.
    pub fn conjugate_by(&self, z: &Self) -> Self {
        z.compose(self).compose(&z.inverse())
    }

    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        (&self.translation - &other.translation)
            .amax()
            .max((&self.rotation - &other.rotation).amax())
    }
}

/// `point + span(directions)`, with orthonormal direction columns.
#[derive(Clone, Debug)]
pub struct AffineSubspace {
    pub point: DVector<f64>,
    pub directions: DMatrix<f64>,
}

impl AffineSubspace {
    pub fn dim(&self) -> usize {
        self.directions.ncols()
    }

    pub fn project(&self, x: &DVector<f64>) -> DVector<f64> {
        let r = x - &self.point;
        &self.point + &self.directions * (self.directions.transpose() * r)
    }

    pub fn distance(&self, x: &DVector<f64>) -> f64 {
        (x - self.project(x)).norm()
    }

    /// Orthogonal projector onto the complement of the direction space.
    fn normal_projector(&self) -> DMatrix<f64> {
        let d = self.point.len();
        DMatrix::identity(d, d) - &self.directions * self.directions.transpose()
    }
}

/// Fixed points of `g`, or `None` when `-u` is not in the range of `A - I`.
pub fn fix_set(g: &IsometryElement) -> Option<AffineSubspace> {
    let d = g.dim();
    let m = &g.rotation - DMatrix::identity(d, d);
    let rhs = -&g.translation;
    let x = svd(&m).solve(&rhs, RANK_TOL);
    let resid = (&m * &x - &rhs).norm();
    if resid > FIX_TOL * (1.0 + g.translation.norm()) {
        return None;
    }
    Some(AffineSubspace {
        point: x,
        directions: null_space(&m, RANK_TOL),
    })
}

/// Projects `u` onto the range of `A - I`, so that `(A, u)` has a fixed point.
pub fn project_to_range(rotation: &DMatrix<f64>, u: &DVector<f64>) -> DVector<f64> {
    let d = u.len();
    let ker = null_space(&(rotation - DMatrix::identity(d, d)).transpose(), RANK_TOL);
    u - &ker * (ker.transpose() * u)
}

/// `g = tau ∘ g'` with `tau` the translation by the mean translation of
/// `g^order`, and `g'` having a fixed point and commuting with `tau`.
pub fn fix_decompose(g: &IsometryElement, order: usize) -> Result<(DVector<f64>, IsometryElement)> {
    let d = g.dim();
    let p = g.pow(order);
    if (&p.rotation - DMatrix::identity(d, d)).amax() > FIX_TOL {
        return Err(Error::OrderMismatch { order });
    }
    let tau = p.translation / order as f64;
    let gp = IsometryElement {
        translation: &g.translation - &tau,
        rotation: g.rotation.clone(),
    };
    Ok((tau, gp))
}

/// A lift of `F` into `R^d ⋊ F`: one isometry per group element, with
/// rotation part the representation matrix of that element.
#[derive(Clone, Debug)]
pub struct Lift {
    group: FiniteActionGroup,
    elements: Vec<IsometryElement>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct LiftDoc {
    pub representation: Vec<Vec<Vec<f64>>>,
    pub table: Vec<Vec<usize>>,
    pub translations: Vec<Vec<f64>>,
}

impl Lift {
    pub fn new(group: FiniteActionGroup, translations: Vec<DVector<f64>>) -> Result<Self> {
        if translations.len() != group.order() {
            return Err(Error::DimensionMismatch {
                expected: group.order(),
                got: translations.len(),
            });
        }
        let elements = translations
            .into_iter()
            .enumerate()
            .map(|(f, u)| IsometryElement::new(u, group.matrix(f).clone()))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { group, elements })
    }

    /// The zero-translation lift, which is a section.
    pub fn linear(group: FiniteActionGroup) -> Self {
        let d = group.dim();
        let t = vec![DVector::zeros(d); group.order()];
        Self::new(group, t).expect("consistent sizes")
    }

    pub fn group(&self) -> &FiniteActionGroup {
        &self.group
    }

    pub fn elements(&self) -> &[IsometryElement] {
        &self.elements
    }

    pub fn element(&self, f: usize) -> &IsometryElement {
        &self.elements[f]
    }

    /// Every lifted element has a fixed point.
    pub fn in_sigma(&self) -> bool {
        self.elements.iter().all(|g| fix_set(g).is_some())
    }

    /// `z T z^{-1}`, a lift of `F` through the conjugated representation.
    pub fn conjugate_by(&self, z: &IsometryElement) -> Result<Self> {
        let elements: Vec<IsometryElement> = self.elements.iter().map(|g| g.conjugate_by(z)).collect();
        let group = FiniteActionGroup::new(elements.iter().map(|g| g.rotation.clone()).collect())?;
        Ok(Self { group, elements })
    }

    /// Multiplies every translation by `lambda` (conjugation by `x -> lambda x`).
    pub fn scaled(&self, lambda: f64) -> Self {
        Self {
            group: self.group.clone(),
            elements: self
                .elements
                .iter()
                .map(|g| IsometryElement {
                    translation: &g.translation * lambda,
                    rotation: g.rotation.clone(),
                })
                .collect(),
        }
    }

    pub fn to_doc(&self) -> LiftDoc {
        let n = self.group.order();
        LiftDoc {
            representation: self.group.to_doc().matrices,
            table: (0..n).map(|a| (0..n).map(|b| self.group.mul(a, b)).collect()).collect(),
            translations: self.elements.iter().map(|g| g.translation.iter().copied().collect()).collect(),
        }
    }

    pub fn from_doc(doc: &LiftDoc) -> Result<Self> {
        let group = FiniteActionGroup::from_doc(&crate::semidirect::GroupDoc {
            matrices: doc.representation.clone(),
        })?;
        let n = group.order();
        let table_ok = doc.table.len() == n
            && (0..n).all(|a| doc.table[a].len() == n && (0..n).all(|b| doc.table[a][b] == group.mul(a, b)));
        if !table_ok {
            return Err(Error::InvalidGroup("table does not match the representation".into()));
        }
        Self::new(group, doc.translations.iter().map(|t| DVector::from_column_slice(t)).collect())
    }
}

#[derive(Clone, Debug)]
pub struct DeltaValue {
    pub value: f64,
    pub minimizer: DVector<f64>,
}

/// `min_x sum_f d(x, Fix(T(f)))^2` through the normal equations.
pub fn delta(lift: &Lift) -> Result<DeltaValue> {
    let d = lift.group.dim();
    let mut fixes = Vec::with_capacity(lift.elements.len());
    for (f, g) in lift.elements.iter().enumerate() {
        fixes.push(fix_set(g).ok_or(Error::NotInSigma(f))?);
    }
    let mut lhs = DMatrix::zeros(d, d);
    let mut rhs = DVector::zeros(d);
    let projs: Vec<DMatrix<f64>> = fixes.iter().map(AffineSubspace::normal_projector).collect();
    for (p, fx) in projs.iter().zip(&fixes) {
        lhs += p;
        rhs += p * &fx.point;
    }
    let x = svd(&lhs).solve(&rhs, RANK_TOL);
    let value = projs
        .iter()
        .zip(&fixes)
        .map(|(p, fx)| (p * (&x - &fx.point)).norm_squared())
        .sum();
    Ok(DeltaValue { value, minimizer: x })
}

/// `max ||w(T)||^2` over the relators `f1 f2 (f1 f2)^{-1}`.
pub fn big_delta(lift: &Lift) -> Result<f64> {
    let n = lift.group.order();
    let d = lift.group.dim();
    let id = DMatrix::identity(d, d);
    let mut worst = 0.0f64;
    for a in 0..n {
        for b in 0..n {
            let c = lift.group.inv(lift.group.mul(a, b));
            let w = lift.elements[a].compose(&lift.elements[b]).compose(&lift.elements[c]);
            if (&w.rotation - &id).amax() > FIX_TOL {
                return Err(Error::CorruptLift(a, b));
            }
            worst = worst.max(w.translation.norm_squared());
        }
    }
    Ok(worst)
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ScanRow {
    pub replicate: u64,
    pub delta_raw: f64,
    /// `Delta` of the lift rescaled to `delta = 1`.
    pub big_delta: f64,
    pub ratio: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Histogram {
    pub edges: Vec<f64>,
    pub counts: Vec<usize>,
}

impl Histogram {
    pub fn build(values: &[f64], bins: usize) -> Self {
        let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let width = if hi > lo { (hi - lo) / bins as f64 } else { 1.0 };
        let edges = (0..=bins).map(|i| lo + width * i as f64).collect();
        let mut counts = vec![0; bins];
        for &v in values {
            let i = (((v - lo) / width) as usize).min(bins - 1);
            counts[i] += 1;
        }
        Self { edges, counts }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ScanResult {
    /// Empirical lower estimate of `inf Delta / delta` over the samples.
    pub c_hat: f64,
    pub argmin: LiftDoc,
    pub histogram: Histogram,
    pub rows: Vec<ScanRow>,
    /// Draws rejected because they were sections (`delta = 0`).
    pub sections_skipped: usize,
}

/// Draws a random member of `Sigma`: Gaussian translations projected onto
/// `range(rho(f) - I)`.
pub fn sample_sigma(group: &FiniteActionGroup, rng: &mut ChaCha8Rng) -> Result<Lift> {
    let d = group.dim();
    let t = (0..group.order())
        .map(|f| {
            let u = DVector::from_fn(d, |_, _| StandardNormal.sample(rng));
            project_to_range(group.matrix(f), &u)
        })
        .collect();
    Lift::new(group.clone(), t)
}

/// Floor below which a draw counts as a section.
pub const SECTION_TOL: f64 = 1e-12;

/// Samples `replications` lifts in `Sigma`, rescales each to `delta = 1`,
/// and reports the smallest `Delta`.
pub fn delta_ratio_scan(group: &FiniteActionGroup, replications: usize, seed: u64) -> Result<ScanResult> {
    let draws: Vec<Result<Option<(ScanRow, Lift)>>> = (0..replications as u64)
        .into_par_iter()
        .map(|r| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(r);
            let lift = sample_sigma(group, &mut rng)?;
            let dl = delta(&lift)?;
            if dl.value <= SECTION_TOL {
                return Ok(None);
            }
            let unit = lift.scaled(1.0 / dl.value.sqrt());
            let bd = big_delta(&unit)?;
            Ok(Some((
                ScanRow {
                    replicate: r,
                    delta_raw: dl.value,
                    big_delta: bd,
                    ratio: bd,
                },
                unit,
            )))
        })
        .collect();
    let mut rows = Vec::new();
    let mut best: Option<(f64, Lift)> = None;
    let mut skipped = 0;
    for d in draws {
        match d? {
            None => skipped += 1,
            Some((row, lift)) => {
                if best.as_ref().is_none_or(|b| row.ratio < b.0) {
                    best = Some((row.ratio, lift));
                }
                rows.push(row);
            }
        }
    }
    let Some((c_hat, argmin)) = best else {
        return Err(Error::EmptyScan(format!("all {replications} draws were sections")));
    };
    let ratios: Vec<f64> = rows.iter().map(|r| r.ratio).collect();
    Ok(ScanResult {
        c_hat,
        argmin: argmin.to_doc(),
        histogram: Histogram::build(&ratios, 20),
        rows,
        sections_skipped: skipped,
    })
}

pub fn rotation2(theta: f64) -> DMatrix<f64> {
    let (s, c) = theta.sin_cos();
    DMatrix::from_row_slice(2, 2, &[c, -s, s, c])
}

/// Cyclic group of rotations by multiples of `2 pi / n` on `R^2`.
pub fn cyclic2(n: usize) -> FiniteActionGroup {
    FiniteActionGroup::generated_by(&[rotation2(std::f64::consts::TAU / n as f64)], n).expect("cyclic group")
}

/// Dihedral group of order `2n` on `R^2`.
pub fn dihedral2(n: usize) -> FiniteActionGroup {
    let refl = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, -1.0]);
    FiniteActionGroup::generated_by(&[rotation2(std::f64::consts::TAU / n as f64), refl], 2 * n).expect("dihedral group")
}

/// Named scan actions: `d4-r2` (order 8) and `s3-r2` (order 6), both
/// irreducible on `R^2`.
pub fn scan_preset(name: &str) -> Result<FiniteActionGroup> {
    match name {
        "d4-r2" => Ok(dihedral2(4)),
        "s3-r2" => Ok(dihedral2(3)),
        _ => Err(Error::UnknownPreset(name.into())),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn v(x: &[f64]) -> DVector<f64> {
        DVector::from_column_slice(x)
    }

    #[test]
    fn fix_set_examples() {
        let id = IsometryElement::identity(3);
        assert_eq!(fix_set(&id).unwrap().dim(), 3);
        assert!(fix_set(&IsometryElement::translation_by(v(&[1.0, 0.0]))).is_none());
        let g = IsometryElement::new(v(&[1.0, 0.0]), rotation2(std::f64::consts::FRAC_PI_2)).unwrap();
        let fx = fix_set(&g).unwrap();
        assert_eq!(fx.dim(), 0);
        assert!((fx.point - v(&[0.5, 0.5])).amax() < 1e-12);
    }

    #[test]
    fn glide_reflection() {
        let refl = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, -1.0]);
        let g = IsometryElement::new(v(&[3.0, 2.0]), refl).unwrap();
        assert!(fix_set(&g).is_none());
        let (tau, gp) = fix_decompose(&g, 2).unwrap();
        assert!((tau - v(&[3.0, 0.0])).amax() < 1e-12);
        assert!((&gp.translation - v(&[0.0, 2.0])).amax() < 1e-12);
        let fx = fix_set(&gp).unwrap();
        assert_eq!(fx.dim(), 1);
        assert!((fx.point[1] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn translation_decomposes_to_identity() {
        let g = IsometryElement::translation_by(v(&[1.0, -2.0]));
        let (tau, gp) = fix_decompose(&g, 2).unwrap();
        assert!((tau - v(&[1.0, -2.0])).amax() < 1e-12);
        assert!(gp.max_abs_diff(&IsometryElement::identity(2)) < 1e-12);
    }

    #[test]
    fn order_mismatch() {
        let g = IsometryElement::new(v(&[0.0, 0.0]), rotation2(std::f64::consts::FRAC_PI_2)).unwrap();
        assert!(matches!(fix_decompose(&g, 2), Err(Error::OrderMismatch { order: 2 })));
    }

    #[test]
    fn linear_lift_is_section() {
        let lift = Lift::linear(dihedral2(4));
        assert!(delta(&lift).unwrap().value < 1e-20);
        assert_eq!(big_delta(&lift).unwrap(), 0.0);
    }

    #[test]
    fn cyclic_defect_example() {
        let c4 = cyclic2(4);
        // BFS order: id, r, r^2, r^3
        let t = vec![v(&[0.0, 0.0]), v(&[1.0, 0.0]), v(&[0.0, 0.0]), v(&[0.0, 0.0])];
        let lift = Lift::new(c4, t).unwrap();
        assert!(big_delta(&lift).unwrap() >= 2.0 - 1e-9);
    }

    #[test]
    fn not_in_sigma() {
        let lift = Lift::new(FiniteActionGroup::trivial(2), vec![v(&[1.0, 0.0])]).unwrap();
        assert!(!lift.in_sigma());
        assert!(matches!(delta(&lift), Err(Error::NotInSigma(0))));
    }

    #[test]
    fn lift_doc_roundtrip() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let lift = sample_sigma(&dihedral2(3), &mut rng).unwrap();
        let back = Lift::from_doc(&lift.to_doc()).unwrap();
        assert!((delta(&lift).unwrap().value - delta(&back).unwrap().value).abs() < 1e-12);
    }

    #[test]
    fn scan_runs() {
        let r = delta_ratio_scan(&dihedral2(4), 200, 3).unwrap();
        assert!(r.c_hat > 0.0);
        assert_eq!(r.rows.len() + r.sections_skipped, 200);
        assert!(matches!(scan_preset("nope"), Err(Error::UnknownPreset(_))));
    }
}
