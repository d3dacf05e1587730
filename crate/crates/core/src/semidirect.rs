//! `G = N ⋊ Q` for a finite group `Q` of orthogonal automorphisms, step
//! distributions on `G`, and the derived constants `R_mu`, `kappa_mu`,
//! `v_mu` and the conjugator `y`.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lie::linalg::svd;
use crate::lie::{null_space, AlgVector, Bch, Filtration, NilpotentAlgebra, Subspace};

/// Residual threshold for the group hypotheses.
pub const GROUP_TOL: f64 = 1e-10;
/// Products are matched to table entries at this max-abs distance.
const MATCH_TOL: f64 = 1e-8;
/// Eigenvalue-1 detection threshold for the invariant space `V`.
pub const INVARIANT_TOL: f64 = 1e-8;

fn max_abs(m: &DMatrix<f64>) -> f64 {
    m.iter().fold(0.0, |a, &b| a.max(b.abs()))
}

#[derive(Clone, Debug)]
pub struct FiniteActionGroup {
    dim: usize,
    matrices: Vec<DMatrix<f64>>,
    table: Vec<Vec<usize>>,
    identity: usize,
    inverses: Vec<usize>,
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct GroupReport {
    pub order: usize,
    pub orthogonality_residual: f64,
    pub automorphism_residual: f64,
    pub table_residual: f64,
    pub associative: bool,
    pub passed: bool,
    pub failures: Vec<String>,
}

/// JSON form of `Q`: row-major matrices.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct GroupDoc {
    pub matrices: Vec<Vec<Vec<f64>>>,
}

impl FiniteActionGroup {
    /// Builds the Cayley table by matching products; the list must be closed
    /// under multiplication and contain the identity.
    pub fn new(matrices: Vec<DMatrix<f64>>) -> Result<Self> {
        let Some(first) = matrices.first() else {
            return Err(Error::InvalidGroup("empty element list".into()));
        };
        let dim = first.nrows();
        if matrices.iter().any(|m| m.nrows() != dim || m.ncols() != dim) {
            return Err(Error::InvalidGroup("matrices must all be square of the same size".into()));
        }
        let find = |m: &DMatrix<f64>| matrices.iter().position(|x| max_abs(&(x - m)) <= MATCH_TOL);
        let identity = find(&DMatrix::identity(dim, dim))
            .ok_or_else(|| Error::InvalidGroup("identity matrix is missing".into()))?;
        let mut table = vec![vec![0; matrices.len()]; matrices.len()];
        for (a, ma) in matrices.iter().enumerate() {
            for (b, mb) in matrices.iter().enumerate() {
                table[a][b] = find(&(ma * mb))
                    .ok_or_else(|| Error::InvalidGroup(format!("product of elements {a} and {b} is not in the list")))?;
            }
        }
        let inverses = (0..matrices.len())
            .map(|a| {
                table[a]
                    .iter()
                    .position(|&c| c == identity)
                    .ok_or_else(|| Error::InvalidGroup(format!("element {a} has no inverse")))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            dim,
            matrices,
            table,
            identity,
            inverses,
        })
    }

    /// Closure of a generating set, listed in breadth-first order from the
    /// identity.
    pub fn generated_by(generators: &[DMatrix<f64>], max_order: usize) -> Result<Self> {
        let Some(g0) = generators.first() else {
            return Err(Error::InvalidGroup("no generators".into()));
        };
        let dim = g0.nrows();
        let mut elems = vec![DMatrix::identity(dim, dim)];
        let mut frontier = 0;
        while frontier < elems.len() {
            let cur = elems[frontier].clone();
            for g in generators {
                let p = &cur * g;
                if !elems.iter().any(|e| max_abs(&(e - &p)) <= MATCH_TOL) {
                    if elems.len() >= max_order {
                        return Err(Error::InvalidGroup(format!("generated group exceeds order {max_order}")));
                    }
                    elems.push(p);
                }
            }
            frontier += 1;
        }
        Self::new(elems)
    }

    pub fn trivial(dim: usize) -> Self {
        Self::new(vec![DMatrix::identity(dim, dim)]).expect("identity group")
    }

    pub fn from_doc(doc: &GroupDoc) -> Result<Self> {
        let mats = doc
            .matrices
            .iter()
            .map(|rows| {
                let n = rows.len();
                if rows.iter().any(|r| r.len() != n) {
                    return Err(Error::InvalidGroup("matrices must be square".into()));
                }
                Ok(DMatrix::from_fn(n, n, |i, j| rows[i][j]))
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(mats)
    }

    pub fn to_doc(&self) -> GroupDoc {
        GroupDoc {
            matrices: self
                .matrices
                .iter()
                .map(|m| (0..m.nrows()).map(|i| m.row(i).iter().copied().collect()).collect())
                .collect(),
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn order(&self) -> usize {
        self.matrices.len()
    }

    pub fn identity(&self) -> usize {
        self.identity
    }

    pub fn matrix(&self, k: usize) -> &DMatrix<f64> {
        &self.matrices[k]
    }

    pub fn mul(&self, a: usize, b: usize) -> usize {
        self.table[a][b]
    }

    pub fn inv(&self, a: usize) -> usize {
        self.inverses[a]
    }

    /// Smallest subgroup containing `gens` (sorted indices).
    pub fn subgroup_generated(&self, gens: &[usize]) -> Vec<usize> {
        let mut inside = vec![false; self.order()];
        inside[self.identity] = true;
        let mut stack = vec![self.identity];
        while let Some(a) = stack.pop() {
            for &g in gens {
                let c = self.table[a][g];
                if !inside[c] {
                    inside[c] = true;
                    stack.push(c);
                }
            }
        }
        (0..self.order()).filter(|&k| inside[k]).collect()
    }

    pub fn validate(&self, alg: &NilpotentAlgebra) -> GroupReport {
        let mut failures = Vec::new();
        let d = self.dim;
        let mut ortho = 0.0f64;
        let mut auto = 0.0f64;
        let mut table_res = 0.0f64;
        if d != alg.dim() {
            failures.push(format!("matrices act on dimension {d}, algebra has dimension {}", alg.dim()));
        }
        for m in &self.matrices {
            ortho = ortho.max(max_abs(&(m.transpose() * m - DMatrix::identity(d, d))));
            if d == alg.dim() {
                for a in 0..d {
                    for b in 0..d {
                        let lhs = m * alg.bracket(&alg.basis_vector(a), &alg.basis_vector(b)).unwrap().to_dvector();
                        let ma = AlgVector::from_dvector(&m.column(a).into_owned());
                        let mb = AlgVector::from_dvector(&m.column(b).into_owned());
                        let rhs = alg.bracket(&ma, &mb).unwrap().to_dvector();
                        auto = auto.max((lhs - rhs).amax());
                    }
                }
            }
        }
        let n = self.order();
        for a in 0..n {
            for b in 0..n {
                table_res = table_res.max(max_abs(&(&self.matrices[a] * &self.matrices[b] - &self.matrices[self.table[a][b]])));
            }
        }
        let associative = (0..n).all(|a| {
            (0..n).all(|b| (0..n).all(|c| self.table[self.table[a][b]][c] == self.table[a][self.table[b][c]]))
        });
        if ortho > GROUP_TOL {
            failures.push(format!("non-orthogonal matrix (residual {ortho:e})"));
        }
        if auto > GROUP_TOL {
            failures.push(format!("matrix is not a Lie algebra automorphism (residual {auto:e})"));
        }
        if table_res > GROUP_TOL {
            failures.push(format!("Cayley table mismatch (residual {table_res:e})"));
        }
        if !associative {
            failures.push("Cayley table is not associative".into());
        }
        GroupReport {
            order: n,
            orthogonality_residual: ortho,
            automorphism_residual: auto,
            table_residual: table_res,
            associative,
            passed: failures.is_empty(),
            failures,
        }
    }
}

/// `g = (xi, kappa)` with `xi = log` of the `N` part and `kappa` an index
/// into `Q`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GroupElement {
    pub xi: AlgVector,
    pub kappa: usize,
}

impl GroupElement {
    pub fn new(xi: AlgVector, kappa: usize) -> Self {
        Self { xi, kappa }
    }
}

#[derive(Clone, Debug)]
pub struct Semidirect {
    q: FiniteActionGroup,
    bch: Bch,
}

impl Semidirect {
    pub fn new(alg: &NilpotentAlgebra, q: FiniteActionGroup) -> Result<Self> {
        if q.dim() != alg.dim() {
            return Err(Error::DimensionMismatch { expected: alg.dim(), got: q.dim() });
        }
        Ok(Self { q, bch: Bch::new(alg)? })
    }

    pub fn algebra(&self) -> &NilpotentAlgebra {
        self.bch.algebra()
    }

    pub fn bch(&self) -> &Bch {
        &self.bch
    }

    pub fn q(&self) -> &FiniteActionGroup {
        &self.q
    }

    pub fn identity(&self) -> GroupElement {
        GroupElement::new(AlgVector::zeros(self.q.dim()), self.q.identity())
    }

    /// `Ad(kappa) x`.
    pub fn act(&self, kappa: usize, x: &AlgVector) -> AlgVector {
        AlgVector::from_dvector(&(self.q.matrix(kappa) * x.to_dvector()))
    }

    /// `(xi1 * Ad(kappa1) xi2, kappa1 kappa2)`.
    pub fn multiply(&self, g1: &GroupElement, g2: &GroupElement) -> GroupElement {
        let moved = self.act(g1.kappa, &g2.xi);
        GroupElement::new(
            self.bch.product(&g1.xi, &moved).expect("dimensions checked at construction"),
            self.q.mul(g1.kappa, g2.kappa),
        )
    }

    /// `(-Ad(kappa^-1) xi, kappa^-1)`.
    pub fn inverse(&self, g: &GroupElement) -> GroupElement {
        let k = self.q.inv(g.kappa);
        GroupElement::new(-&self.act(k, &g.xi), k)
    }

    /// `c_y(g) = (-y, 1) g (y, 1)`.
    pub fn conjugate_by(&self, y: &AlgVector, g: &GroupElement) -> GroupElement {
        let id = self.q.identity();
        let left = GroupElement::new(-y, id);
        let right = GroupElement::new(y.clone(), id);
        self.multiply(&self.multiply(&left, g), &right)
    }
}

/// `kappa_mu`, or the explicit marker that `W = {0}`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "value", rename_all = "snake_case")]
pub enum SpectralConstant {
    NoW,
    Value(f64),
}

impl SpectralConstant {
    pub fn value(&self) -> Option<f64> {
        match self {
            SpectralConstant::NoW => None,
            SpectralConstant::Value(v) => Some(*v),
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct AtomDoc {
    pub p: f64,
    pub xi: Vec<f64>,
    #[serde(default)]
    pub kappa: usize,
}

/// `{atoms: [{p, xi, kappa}], Q: {matrices}}`; `Q` defaults to the trivial group.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct StepDistributionDoc {
    pub atoms: Vec<AtomDoc>,
    #[serde(rename = "Q", default, skip_serializing_if = "Option::is_none")]
    pub q: Option<GroupDoc>,
}

/// Constants derived from a step distribution, echoed into experiment outputs.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct DerivedConstants {
    pub r_mu: f64,
    pub kappa_mu: SpectralConstant,
    pub v_mu: AlgVector,
    pub w_mu: AlgVector,
    pub y: AlgVector,
    pub mu_q: Vec<f64>,
    pub subgroup: Vec<usize>,
    pub v_dim: usize,
    pub w_dim: usize,
}

#[derive(Clone, Debug)]
pub struct StepDistribution {
    group: Semidirect,
    atoms: Vec<(f64, GroupElement)>,
    lower: Filtration,
    v_basis: DMatrix<f64>,
    w_basis: DMatrix<f64>,
    /// `sum_k p_k (I - Ad(k))` restricted to `W`, in `W` coordinates.
    gap_operator: DMatrix<f64>,
    derived: DerivedConstants,
}

impl StepDistribution {
    pub fn new(group: Semidirect, atoms: Vec<(f64, GroupElement)>) -> Result<Self> {
        let d = group.algebra().dim();
        if atoms.is_empty() {
            return Err(Error::InvalidDistribution("no atoms".into()));
        }
        let mut total = 0.0;
        for (p, g) in &atoms {
            if !(*p > 0.0 && p.is_finite()) {
                return Err(Error::InvalidDistribution(format!("probability {p} is not positive")));
            }
            if g.xi.dim() != d {
                return Err(Error::DimensionMismatch { expected: d, got: g.xi.dim() });
            }
            if g.kappa >= group.q().order() {
                return Err(Error::InvalidDistribution(format!("kappa index {} out of range", g.kappa)));
            }
            total += p;
        }
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidDistribution(format!("probabilities sum to {total}")));
        }
        let q = group.q();
        let mut mu_q = vec![0.0; q.order()];
        for (p, g) in &atoms {
            mu_q[g.kappa] += p;
        }
        let support: Vec<usize> = (0..q.order()).filter(|&k| mu_q[k] > 0.0).collect();
        let subgroup = q.subgroup_generated(&support);
        let lower = Filtration::lower_central_series(group.algebra());
        let b1 = lower.layer(1).basis().clone();
        let m1 = b1.ncols();

        // V: common fixed vectors of the subgroup inside m^1
        let mut stacked = DMatrix::zeros(subgroup.len() * d, m1);
        for (r, &k) in subgroup.iter().enumerate() {
            let block = (q.matrix(k) - DMatrix::identity(d, d)) * &b1;
            stacked.view_mut((r * d, 0), (d, m1)).copy_from(&block);
        }
        let v_coords = null_space(&stacked, INVARIANT_TOL);
        let v_basis = &b1 * &v_coords;
        let v_space = Subspace::from_orthonormal(v_basis.clone());
        let w_space = lower.layer(1).complement_of(&v_space);
        let w_basis = w_space.basis().clone();

        let mut op = DMatrix::zeros(d, d);
        for &k in &support {
            op += (DMatrix::identity(d, d) - q.matrix(k)) * mu_q[k];
        }
        let gap_operator = w_basis.transpose() * &op * &w_basis;

        let r_mu = atoms.iter().map(|(_, g)| g.xi.norm()).fold(0.0, f64::max);
        let mut mean = DVector::zeros(d);
        for (p, g) in &atoms {
            mean += lower.layer(1).project(&g.xi.to_dvector()) * *p;
        }
        let v_mu = v_space.project(&mean);
        let w_mu = w_space.project(&mean);
        let (kappa_mu, y) = if w_basis.ncols() == 0 {
            (SpectralConstant::NoW, DVector::zeros(d))
        } else {
            let smin = svd(&gap_operator).min_singular();
            if smin <= 1e-12 {
                return Err(Error::SingularRestriction(smin));
            }
            let rhs = w_basis.transpose() * &w_mu;
            let sol = gap_operator
                .clone()
                .lu()
                .solve(&rhs)
                .ok_or(Error::SingularRestriction(smin))?;
            (SpectralConstant::Value(smin), &w_basis * sol)
        };
        let derived = DerivedConstants {
            r_mu,
            kappa_mu,
            v_mu: AlgVector::from_dvector(&v_mu),
            w_mu: AlgVector::from_dvector(&w_mu),
            y: AlgVector::from_dvector(&y),
            mu_q,
            subgroup,
            v_dim: v_basis.ncols(),
            w_dim: w_basis.ncols(),
        };
        Ok(Self {
            group,
            atoms,
            lower,
            v_basis,
            w_basis,
            gap_operator,
            derived,
        })
    }

    pub fn from_doc(alg: &NilpotentAlgebra, doc: &StepDistributionDoc) -> Result<Self> {
        let q = match &doc.q {
            Some(g) => FiniteActionGroup::from_doc(g)?,
            None => FiniteActionGroup::trivial(alg.dim()),
        };
        let group = Semidirect::new(alg, q)?;
        let atoms = doc
            .atoms
            .iter()
            .map(|a| (a.p, GroupElement::new(AlgVector::new(a.xi.clone()), a.kappa)))
            .collect();
        Self::new(group, atoms)
    }

    pub fn to_doc(&self) -> StepDistributionDoc {
        StepDistributionDoc {
            atoms: self
                .atoms
                .iter()
                .map(|(p, g)| AtomDoc {
                    p: *p,
                    xi: g.xi.as_slice().to_vec(),
                    kappa: g.kappa,
                })
                .collect(),
            q: Some(self.group.q().to_doc()),
        }
    }

    pub fn group(&self) -> &Semidirect {
        &self.group
    }

    pub fn atoms(&self) -> &[(f64, GroupElement)] {
        &self.atoms
    }

    pub fn derived(&self) -> &DerivedConstants {
        &self.derived
    }

    pub fn r_mu(&self) -> f64 {
        self.derived.r_mu
    }

    pub fn mu_q(&self) -> &[f64] {
        &self.derived.mu_q
    }

    /// Orthonormal bases (as ambient columns) of `V` and `W` inside `m^1`.
    pub fn invariant_split(&self) -> (&DMatrix<f64>, &DMatrix<f64>) {
        (&self.v_basis, &self.w_basis)
    }

    pub fn spectral_constant(&self) -> SpectralConstant {
        self.derived.kappa_mu
    }

    /// `Sum mu_Q(k) (I - Ad(k))` on `W`, in `W` coordinates.
    pub fn gap_operator(&self) -> &DMatrix<f64> {
        &self.gap_operator
    }

    /// `(v_mu, y, R_mu)`.
    pub fn essential_average(&self) -> (&AlgVector, &AlgVector, f64) {
        (&self.derived.v_mu, &self.derived.y, self.derived.r_mu)
    }

    pub fn is_centred(&self) -> bool {
        self.derived.v_mu.norm() <= 1e-12
    }

    /// The measure `c_y mu` whose abelianized mean is `v_mu`.
    pub fn conjugated(&self) -> Result<StepDistribution> {
        let y = &self.derived.y;
        let atoms = self
            .atoms
            .iter()
            .map(|(p, g)| (*p, self.group.conjugate_by(y, g)))
            .collect();
        Self::new(self.group.clone(), atoms)
    }

    /// `E theta_1(xi)` over the atoms.
    pub fn abelian_mean(&self) -> AlgVector {
        let mut mean = DVector::zeros(self.group.algebra().dim());
        for (p, g) in &self.atoms {
            mean += self.lower.layer(1).project(&g.xi.to_dvector()) * *p;
        }
        AlgVector::from_dvector(&mean)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lie::presets;

    fn rot90() -> DMatrix<f64> {
        DMatrix::from_row_slice(2, 2, &[0.0, -1.0, 1.0, 0.0])
    }

    #[test]
    fn heisenberg_flip_is_automorphism() {
        let h = presets::heisenberg();
        let flip = DMatrix::from_diagonal(&DVector::from_column_slice(&[-1.0, -1.0, 1.0]));
        let q = FiniteActionGroup::generated_by(&[flip], 8).unwrap();
        assert_eq!(q.order(), 2);
        assert!(q.validate(&h).passed);
        let bad = DMatrix::from_diagonal(&DVector::from_column_slice(&[1.0, -1.0, 1.0]));
        let q = FiniteActionGroup::generated_by(&[bad], 8).unwrap();
        assert!(!q.validate(&h).passed);
    }

    #[test]
    fn c4_on_plane() {
        let a = presets::abelian(2);
        let q = FiniteActionGroup::generated_by(&[rot90()], 8).unwrap();
        assert_eq!(q.order(), 4);
        assert!(q.validate(&a).passed);
        let g = Semidirect::new(&a, q.clone()).unwrap();
        let mu = StepDistribution::new(g, vec![(1.0, GroupElement::new(AlgVector::new(vec![1.0, 0.0]), 1))]).unwrap();
        let (v, w) = mu.invariant_split();
        assert_eq!((v.ncols(), w.ncols()), (0, 2));
        let k = mu.spectral_constant().value().unwrap();
        assert!((k - 2f64.sqrt()).abs() < 1e-12);
        let (v_mu, y, r) = mu.essential_average();
        assert!(v_mu.norm() < 1e-15);
        assert!(y.max_abs_diff(&AlgVector::new(vec![0.5, 0.5])) < 1e-12);
        assert!(y.norm() <= r / k + 1e-12);
        assert!(mu.conjugated().unwrap().abelian_mean().norm() < 1e-12);
    }

    #[test]
    fn flip_eps_spectral_constant_is_exact() {
        let a = presets::abelian(1);
        let flip = DMatrix::from_element(1, 1, -1.0);
        let q = FiniteActionGroup::new(vec![DMatrix::identity(1, 1), flip]).unwrap();
        let g = Semidirect::new(&a, q).unwrap();
        let mu = StepDistribution::new(
            g,
            vec![
                (0.99, GroupElement::new(AlgVector::new(vec![1.0]), 0)),
                (0.01, GroupElement::new(AlgVector::new(vec![0.0]), 1)),
            ],
        )
        .unwrap();
        assert_eq!(mu.spectral_constant(), SpectralConstant::Value(0.02));
    }

    #[test]
    fn trivial_group_has_no_w() {
        let a = presets::abelian(1);
        let g = Semidirect::new(&a, FiniteActionGroup::trivial(1)).unwrap();
        let mu = StepDistribution::new(g, vec![(1.0, GroupElement::new(AlgVector::new(vec![3.0]), 0))]).unwrap();
        assert_eq!(mu.spectral_constant(), SpectralConstant::NoW);
        let (v, y, _) = mu.essential_average();
        assert_eq!(v.as_slice(), &[3.0]);
        assert!(y.is_zero());
        let json = serde_json::to_string(&mu.spectral_constant()).unwrap();
        assert_eq!(json, r#"{"kind":"no_w"}"#);
    }

    #[test]
    fn flip_multiplication() {
        let a = presets::abelian(1);
        let q = FiniteActionGroup::new(vec![DMatrix::identity(1, 1), DMatrix::from_element(1, 1, -1.0)]).unwrap();
        let g = Semidirect::new(&a, q).unwrap();
        let x = GroupElement::new(AlgVector::new(vec![1.0]), 1);
        let sq = g.multiply(&x, &x);
        assert_eq!(sq.kappa, 0);
        assert_eq!(sq.xi.as_slice(), &[0.0]);
    }

    #[test]
    fn rejects_bad_distributions() {
        let a = presets::abelian(1);
        let g = Semidirect::new(&a, FiniteActionGroup::trivial(1)).unwrap();
        let e = |x| GroupElement::new(AlgVector::new(vec![x]), 0);
        assert!(StepDistribution::new(g.clone(), vec![(0.5, e(1.0))]).is_err());
        assert!(StepDistribution::new(g.clone(), vec![(1.5, e(1.0)), (-0.5, e(0.0))]).is_err());
        assert!(StepDistribution::new(g, vec![(1.0, GroupElement::new(AlgVector::new(vec![1.0]), 3))]).is_err());
    }

    #[test]
    fn non_closed_list_rejected() {
        assert!(FiniteActionGroup::new(vec![DMatrix::identity(2, 2), rot90()]).is_err());
    }
}
