//! Truncated Baker-Campbell-Hausdorff product via Dynkin's formula.
//!
//! The coefficient table is built once per degree bound with exact rationals:
//! every sequence of pairs `(r_1,s_1)..(r_n,s_n)` with `r_i + s_i > 0` adds
//! `(-1)^(n-1) / (n * m * prod r_i! s_i!)` to the right-nested word
//! `x^r1 y^s1 ... x^rn y^sn` of length `m`. Words are then reduced with
//! `[a, a] = 0` and `[a, b] = -[b, a]` on their innermost pair, and the
//! surviving words are evaluated through a shared-suffix program.

use std::collections::BTreeMap;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};

use super::{AlgVector, NilpotentAlgebra};
use crate::error::{Error, Result};

/// Largest step supported unless a caller raises the cap explicitly.
pub const DEFAULT_MAX_STEP: usize = 6;

/// Letter 0 is `x`, letter 1 is `y`.
pub type Word = Vec<u8>;

#[derive(Clone, Debug)]
pub struct DynkinTable {
    degree: usize,
    /// `by_degree[m - 1]`: reduced words of length `m` with exact coefficients.
    by_degree: Vec<Vec<(Word, BigRational)>>,
}

fn factorial(n: usize) -> BigInt {
    (1..=n).fold(BigInt::one(), |acc, k| acc * BigInt::from(k))
}

fn enumerate(
    rem: usize,
    m: usize,
    seq: &mut Vec<(usize, usize)>,
    acc: &mut BTreeMap<Word, BigRational>,
) {
    if rem == 0 {
        let n = seq.len();
        let mut denom = BigInt::from(n) * BigInt::from(m);
        for &(r, s) in seq.iter() {
            denom *= factorial(r) * factorial(s);
        }
        let sign = if n % 2 == 1 { BigInt::one() } else { -BigInt::one() };
        let coef = BigRational::new(sign, denom);
        let mut word = Word::with_capacity(m);
        for &(r, s) in seq.iter() {
            word.extend(std::iter::repeat_n(0u8, r));
            word.extend(std::iter::repeat_n(1u8, s));
        }
        *acc.entry(word).or_insert_with(BigRational::zero) += coef;
        return;
    }
    for k in 1..=rem {
        for r in 0..=k {
            seq.push((r, k - r));
            enumerate(rem - k, m, seq, acc);
            seq.pop();
        }
    }
}

impl DynkinTable {
    pub fn new(degree: usize) -> Self {
        let mut by_degree = Vec::with_capacity(degree);
        for m in 1..=degree {
            let mut raw = BTreeMap::new();
            enumerate(m, m, &mut Vec::new(), &mut raw);
            let mut reduced: BTreeMap<Word, BigRational> = BTreeMap::new();
            for (mut word, coef) in raw {
                let mut coef = coef;
                if m >= 2 {
                    let (a, b) = (word[m - 2], word[m - 1]);
                    if a == b {
                        continue;
                    }
                    if a == 1 {
                        word.swap(m - 2, m - 1);
                        coef = -coef;
                    }
                }
                *reduced.entry(word).or_insert_with(BigRational::zero) += coef;
            }
            by_degree.push(reduced.into_iter().filter(|(_, c)| !c.is_zero()).collect());
        }
        Self { degree, by_degree }
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn terms(&self, m: usize) -> &[(Word, BigRational)] {
        &self.by_degree[m - 1]
    }

    /// `A_i = max(1, S_i * W_i)`, `S_i` the sum of absolute coefficients of
    /// the degree-`i` words and `W_i` their number.
    pub fn a_constant(&self, i: usize) -> f64 {
        let terms = self.terms(i);
        let s: BigRational = terms.iter().map(|(_, c)| c.abs()).fold(BigRational::zero(), |a, b| a + b);
        let w = BigRational::from_integer(BigInt::from(terms.len()));
        (s * w).to_f64().unwrap_or(f64::INFINITY).max(1.0)
    }
}

pub fn word_string(w: &[u8]) -> String {
    w.iter().map(|&l| if l == 0 { 'x' } else { 'y' }).collect()
}

#[derive(Clone, Copy, Debug)]
struct Node {
    letter: u8,
    child: usize,
}

/// Evaluates `x * y` on a fixed algebra.
#[derive(Clone, Debug)]
pub struct Bch {
    alg: NilpotentAlgebra,
    table: DynkinTable,
    // nodes 0 and 1 are the letters themselves
    nodes: Vec<Node>,
    terms: Vec<(usize, f64)>,
}

/// Per-thread buffers for repeated products.
#[derive(Clone, Debug)]
pub struct BchScratch {
    values: Vec<f64>,
    tmp: Vec<f64>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct BchTerm {
    pub word: String,
    pub coefficient: String,
}

impl Bch {
    pub fn new(alg: &NilpotentAlgebra) -> Result<Self> {
        Self::with_cap(alg, DEFAULT_MAX_STEP)
    }

    pub fn with_cap(alg: &NilpotentAlgebra, max_step: usize) -> Result<Self> {
        let step = alg.step();
        if step > max_step {
            return Err(Error::StepTooLarge { step, max: max_step });
        }
        let table = DynkinTable::new(step);
        let mut nodes = vec![Node { letter: 0, child: usize::MAX }, Node { letter: 1, child: usize::MAX }];
        let mut index: BTreeMap<(u8, usize), usize> = BTreeMap::new();
        let mut terms = Vec::new();
        for m in 1..=step {
            for (word, coef) in table.terms(m) {
                let mut id = word[m - 1] as usize;
                for &letter in word[..m - 1].iter().rev() {
                    id = *index.entry((letter, id)).or_insert_with(|| {
                        nodes.push(Node { letter, child: id });
                        nodes.len() - 1
                    });
                }
                terms.push((id, coef.to_f64().expect("finite coefficient")));
            }
        }
        Ok(Self {
            alg: alg.clone(),
            table,
            nodes,
            terms,
        })
    }

    pub fn algebra(&self) -> &NilpotentAlgebra {
        &self.alg
    }

    pub fn table(&self) -> &DynkinTable {
        &self.table
    }

    pub fn describe(&self) -> Vec<BchTerm> {
        (1..=self.table.degree())
            .flat_map(|m| self.table.terms(m).iter())
            .map(|(w, c)| BchTerm {
                word: word_string(w),
                coefficient: c.to_string(),
            })
            .collect()
    }

    pub fn scratch(&self) -> BchScratch {
        let d = self.alg.dim();
        BchScratch {
            values: vec![0.0; self.nodes.len() * d],
            tmp: vec![0.0; d],
        }
    }

    pub fn product_into(&self, x: &[f64], y: &[f64], out: &mut [f64], ws: &mut BchScratch) {
        let d = self.alg.dim();
        let vals = &mut ws.values;
        vals[..d].copy_from_slice(x);
        vals[d..2 * d].copy_from_slice(y);
        for (id, node) in self.nodes.iter().enumerate().skip(2) {
            let (head, tail) = vals.split_at_mut(id * d);
            let letter = &head[node.letter as usize * d..(node.letter as usize + 1) * d];
            let child = &head[node.child * d..(node.child + 1) * d];
            self.alg.bracket_into(letter, child, &mut tail[..d]);
        }
        out.iter_mut().for_each(|o| *o = 0.0);
        for &(id, c) in &self.terms {
            for (o, v) in out.iter_mut().zip(&vals[id * d..(id + 1) * d]) {
                *o += c * v;
            }
        }
    }

    pub fn product(&self, x: &AlgVector, y: &AlgVector) -> Result<AlgVector> {
        let d = self.alg.dim();
        for v in [x, y] {
            if v.dim() != d {
                return Err(Error::DimensionMismatch { expected: d, got: v.dim() });
            }
        }
        let mut out = vec![0.0; d];
        self.product_into(x.as_slice(), y.as_slice(), &mut out, &mut self.scratch());
        Ok(AlgVector::new(out))
    }

    /// `e^{ad a} b = sum_k ad_a^k b / k!`, i.e. `a * b * (-a)`.
    pub fn conj_into(&self, a: &[f64], b: &[f64], out: &mut [f64], ws: &mut BchScratch) {
        let d = self.alg.dim();
        out.copy_from_slice(b);
        let mut term = b.to_vec();
        for k in 1..self.alg.step().max(1) {
            self.alg.bracket_into(a, &term, &mut ws.tmp[..d]);
            let inv = 1.0 / k as f64;
            for (t, n) in term.iter_mut().zip(&ws.tmp) {
                *t = n * inv;
            }
            for (o, t) in out.iter_mut().zip(&term) {
                *o += t;
            }
        }
    }

    pub fn conj(&self, a: &AlgVector, b: &AlgVector) -> AlgVector {
        let mut out = vec![0.0; self.alg.dim()];
        self.conj_into(a.as_slice(), b.as_slice(), &mut out, &mut self.scratch());
        AlgVector::new(out)
    }
}
