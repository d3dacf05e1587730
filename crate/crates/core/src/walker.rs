//! Monte Carlo simulation of the `mu`-random walk on `N ⋊ Q`.
//!
//! The recentred position `y_k = z_k * (-k v)` is updated with one BCH
//! product per step through the conjugated-increment form
//! `y_k = y_{k-1} * e^{ad((k-1) v)} Ad(q_{k-1}) zeta_j`, where
//! `zeta_j = xi_j * (-v)` is precomputed per atom.

use rand::distr::Distribution;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::weighted::WeightedAliasIndex;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lie::{AlgVector, Bch, Filtration, FiltrationKind};
use crate::norms::{GaugeParams, HomogeneousNorm};
use crate::semidirect::{FiniteActionGroup, StepDistribution};

/// Default ceiling on `horizon * replications`.
pub const DEFAULT_MAX_STEPS: u128 = 2_000_000_000;

#[derive(Clone, Debug)]
pub struct WalkConfig {
    pub mu: StepDistribution,
    pub norm: HomogeneousNorm,
    /// Recentring drift; `v_mu` of `mu` by default.
    pub drift: AlgVector,
    pub horizon: u64,
    /// Sorted checkpoint times in `1..=horizon`.
    pub checkpoints: Vec<u64>,
    pub replications: usize,
    pub seed: u64,
    pub scaling_exponent: f64,
    pub max_steps: u128,
    /// Recompute `z_n * (-n v)` from the plain product at every checkpoint.
    pub cross_check: bool,
    /// Bound `2 R_mu / kappa_mu` on the distance change caused by
    /// conjugating the original measure, when that happened.
    pub conjugation_offset: Option<f64>,
}

impl WalkConfig {
    pub fn new(mu: StepDistribution, norm: HomogeneousNorm, horizon: u64, replications: usize, seed: u64) -> Self {
        let drift = mu.derived().v_mu.clone();
        Self {
            mu,
            norm,
            drift,
            horizon,
            checkpoints: vec![horizon],
            replications,
            seed,
            scaling_exponent: 0.5,
            max_steps: DEFAULT_MAX_STEPS,
            cross_check: false,
            conjugation_offset: None,
        }
    }

    /// Conjugates `mu` by its `y` when needed and builds the norm over
    /// `F_{v_mu}`, which is the lower central series when `mu` is centred.
    pub fn adapted(
        mu: &StepDistribution,
        gauge: &GaugeParams,
        horizon: u64,
        replications: usize,
        seed: u64,
    ) -> Result<Self> {
        let (run_mu, offset) = if mu.derived().y.is_zero() {
            (mu.clone(), None)
        } else {
            let k = mu.spectral_constant().value().unwrap_or(f64::INFINITY);
            (mu.conjugated()?, Some(2.0 * mu.r_mu() / k))
        };
        let alg = run_mu.group().algebra();
        let v = run_mu.derived().v_mu.clone();
        let filt = if run_mu.is_centred() {
            Filtration::lower_central_series(alg)
        } else {
            Filtration::weighted(alg, &v)?
        };
        let norm = HomogeneousNorm::build(alg, &filt, gauge)?;
        let mut cfg = Self::new(run_mu, norm, horizon, replications, seed);
        cfg.conjugation_offset = offset;
        Ok(cfg)
    }

    pub fn with_checkpoints(mut self, checkpoints: Vec<u64>) -> Self {
        self.checkpoints = checkpoints;
        self
    }

    pub fn with_scaling(mut self, alpha: f64) -> Self {
        self.scaling_exponent = alpha;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let d = self.mu.group().algebra().dim();
        if self.norm.algebra().dim() != d || self.drift.dim() != d {
            return Err(Error::DimensionMismatch { expected: d, got: self.norm.algebra().dim() });
        }
        if self.replications == 0 {
            return Err(Error::InvalidConfig("replications must be at least 1".into()));
        }
        if self.horizon == 0 {
            return Err(Error::InvalidConfig("horizon must be at least 1".into()));
        }
        if self.checkpoints.is_empty() {
            return Err(Error::InvalidConfig("no checkpoints".into()));
        }
        if self.checkpoints.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidConfig("checkpoints must be strictly increasing".into()));
        }
        if self.checkpoints[0] == 0 || *self.checkpoints.last().unwrap() > self.horizon {
            return Err(Error::InvalidConfig("checkpoints must lie in 1..=horizon".into()));
        }
        let requested = self.horizon as u128 * self.replications as u128;
        if requested > self.max_steps {
            return Err(Error::ResourceCeiling {
                requested,
                ceiling: self.max_steps,
            });
        }
        Ok(())
    }
}

/// One trajectory, observed at the checkpoints.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WalkSample {
    pub stream: u64,
    pub checkpoints: Vec<u64>,
    /// `M_n = max_{k <= n} |y_k|`.
    pub running_max: Vec<f64>,
    /// `|y_n|`.
    pub norm_at: Vec<f64>,
    /// Euclidean norms of the layer components of `y_n` (norm's filtration).
    pub layer_norms: Vec<Vec<f64>>,
    pub final_y: AlgVector,
    pub final_z: AlgVector,
    pub final_q: usize,
    /// Index of the atom drawn at every step, if there is one.
    pub constant_atom: Option<usize>,
    /// Max relative gap between incremental and direct recentring.
    pub cross_check_residual: Option<f64>,
}

/// Precomputed per-walk tables shared by all replicates.
pub struct Walker<'a> {
    cfg: &'a WalkConfig,
    bch: &'a Bch,
    q: &'a FiniteActionGroup,
    filt: &'a Filtration,
    alias: WeightedAliasIndex<f64>,
    kappas: Vec<usize>,
    // moved[q][j] = Ad(q) zeta_j, flattened
    moved: Vec<f64>,
    // plain[q][j] = Ad(q) xi_j, for the cross-check
    plain: Vec<f64>,
    dim: usize,
    natoms: usize,
    drift_zero: bool,
}

impl<'a> Walker<'a> {
    pub fn new(cfg: &'a WalkConfig) -> Result<Self> {
        cfg.validate()?;
        let group = cfg.mu.group();
        let bch = group.bch();
        let q = group.q();
        let d = group.algebra().dim();
        let atoms = cfg.mu.atoms();
        let weights: Vec<f64> = atoms.iter().map(|(p, _)| *p).collect();
        let alias =
            WeightedAliasIndex::new(weights).map_err(|e| Error::InvalidDistribution(format!("alias table: {e}")))?;
        let neg_v = -&cfg.drift;
        let mut moved = Vec::with_capacity(q.order() * atoms.len() * d);
        let mut plain = Vec::with_capacity(q.order() * atoms.len() * d);
        for k in 0..q.order() {
            for (_, g) in atoms {
                let zeta = bch.product(&g.xi, &neg_v)?;
                moved.extend_from_slice(group.act(k, &zeta).as_slice());
                plain.extend_from_slice(group.act(k, &g.xi).as_slice());
            }
        }
        Ok(Self {
            cfg,
            bch,
            q,
            filt: cfg.norm.filtration(),
            alias,
            kappas: atoms.iter().map(|(_, g)| g.kappa).collect(),
            moved,
            plain,
            dim: d,
            natoms: atoms.len(),
            drift_zero: cfg.drift.is_zero(),
        })
    }

    /// The first `len` atom indices drawn on `stream`, as `simulate` draws them.
    pub fn atom_sequence(&self, stream: u64, len: u64) -> Vec<usize> {
        let mut rng = ChaCha8Rng::seed_from_u64(self.cfg.seed);
        rng.set_stream(stream);
        (0..len).map(|_| self.alias.sample(&mut rng)).collect()
    }

    pub fn simulate(&self, stream: u64) -> WalkSample {
        let cfg = self.cfg;
        let d = self.dim;
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        rng.set_stream(stream);
        let mut ws = self.bch.scratch();
        let mut y = vec![0.0; d];
        let mut next = vec![0.0; d];
        let mut inc = vec![0.0; d];
        let mut shift = vec![0.0; d];
        let mut z = vec![0.0; d];
        let mut znext = vec![0.0; d];
        let mut q = self.q.identity();
        let mut running = 0.0f64;
        let mut constant: Option<Option<usize>> = None;
        let n_cp = cfg.checkpoints.len();
        let mut running_max = Vec::with_capacity(n_cp);
        let mut norm_at = Vec::with_capacity(n_cp);
        let mut layer_norms = Vec::with_capacity(n_cp);
        let mut residual = 0.0f64;
        let mut cp = 0;
        let depth = self.filt.depth();
        for k in 1..=cfg.horizon {
            let j = self.alias.sample(&mut rng);
            constant = Some(match constant {
                None => Some(j),
                Some(Some(c)) if c == j => Some(c),
                _ => None,
            });
            let off = (q * self.natoms + j) * d;
            let m = &self.moved[off..off + d];
            if self.drift_zero {
                self.bch.product_into(&y, m, &mut next, &mut ws);
            } else {
                let s = (k - 1) as f64;
                for (sh, v) in shift.iter_mut().zip(cfg.drift.as_slice()) {
                    *sh = s * v;
                }
                self.bch.conj_into(&shift, m, &mut inc, &mut ws);
                self.bch.product_into(&y, &inc, &mut next, &mut ws);
            }
            std::mem::swap(&mut y, &mut next);
            if cfg.cross_check {
                self.bch.product_into(&z, &self.plain[off..off + d], &mut znext, &mut ws);
                std::mem::swap(&mut z, &mut znext);
            }
            q = self.q.mul(q, self.kappas[j]);
            let norm = cfg.norm.eval_slice(&y);
            running = running.max(norm);
            if k == cfg.checkpoints[cp] {
                running_max.push(running);
                norm_at.push(norm);
                let mut ln = vec![0.0; depth];
                self.filt.layer_norms_into(&y, &mut ln);
                layer_norms.push(ln);
                if cfg.cross_check {
                    let back: Vec<f64> = cfg.drift.as_slice().iter().map(|v| -(k as f64) * v).collect();
                    self.bch.product_into(&z, &back, &mut znext, &mut ws);
                    let scale = znext.iter().chain(&y).fold(1.0f64, |a, b| a.max(b.abs()));
                    let gap = znext.iter().zip(&y).fold(0.0f64, |a, (p, q)| a.max((p - q).abs()));
                    residual = residual.max(gap / scale);
                }
                cp += 1;
                if cp == n_cp {
                    // nothing further is recorded past the last checkpoint
                    if k < cfg.horizon {
                        let (fy, fz, fq, fc) = self.finish(&mut rng, k, y, q, constant.flatten(), &mut ws);
                        return WalkSample {
                            stream,
                            checkpoints: cfg.checkpoints.clone(),
                            running_max,
                            norm_at,
                            layer_norms,
                            final_y: fy,
                            final_z: fz,
                            final_q: fq,
                            constant_atom: fc,
                            cross_check_residual: cfg.cross_check.then_some(residual),
                        };
                    }
                    break;
                }
            }
        }
        let n = cfg.horizon as f64;
        let fwd: Vec<f64> = cfg.drift.as_slice().iter().map(|v| n * v).collect();
        let mut zfin = vec![0.0; d];
        self.bch.product_into(&y, &fwd, &mut zfin, &mut ws);
        WalkSample {
            stream,
            checkpoints: cfg.checkpoints.clone(),
            running_max,
            norm_at,
            layer_norms,
            final_y: AlgVector::new(y),
            final_z: AlgVector::new(zfin),
            final_q: q,
            constant_atom: constant.flatten(),
            cross_check_residual: cfg.cross_check.then_some(residual),
        }
    }

    /// Runs the remaining steps without observing the norm.
    fn finish(
        &self,
        rng: &mut ChaCha8Rng,
        from: u64,
        mut y: Vec<f64>,
        mut q: usize,
        mut constant: Option<usize>,
        ws: &mut crate::lie::BchScratch,
    ) -> (AlgVector, AlgVector, usize, Option<usize>) {
        let d = self.dim;
        let cfg = self.cfg;
        let mut next = vec![0.0; d];
        let mut inc = vec![0.0; d];
        let mut shift = vec![0.0; d];
        for k in from + 1..=cfg.horizon {
            let j = self.alias.sample(rng);
            if constant != Some(j) {
                constant = None;
            }
            let off = (q * self.natoms + j) * d;
            let m = &self.moved[off..off + d];
            let s = (k - 1) as f64;
            for (sh, v) in shift.iter_mut().zip(cfg.drift.as_slice()) {
                *sh = s * v;
            }
            self.bch.conj_into(&shift, m, &mut inc, ws);
            self.bch.product_into(&y, &inc, &mut next, ws);
            std::mem::swap(&mut y, &mut next);
            q = self.q.mul(q, self.kappas[j]);
        }
        let n = cfg.horizon as f64;
        let fwd: Vec<f64> = cfg.drift.as_slice().iter().map(|v| n * v).collect();
        let mut zfin = vec![0.0; d];
        self.bch.product_into(&y, &fwd, &mut zfin, ws);
        (AlgVector::new(y), AlgVector::new(zfin), q, constant)
    }
}

/// Replicates in replicate order, plus the scaling used for normalization.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SampleMatrix {
    pub checkpoints: Vec<u64>,
    pub scaling_exponent: f64,
    pub samples: Vec<WalkSample>,
}

impl SampleMatrix {
    /// `M_n / n^alpha`, one row per replicate.
    pub fn normalized(&self) -> Vec<Vec<f64>> {
        self.samples
            .iter()
            .map(|s| {
                s.running_max
                    .iter()
                    .zip(&self.checkpoints)
                    .map(|(m, &n)| m / (n as f64).powf(self.scaling_exponent))
                    .collect()
            })
            .collect()
    }

    /// Normalized maxima at checkpoint index `c`, across replicates.
    pub fn normalized_column(&self, c: usize) -> Vec<f64> {
        let scale = (self.checkpoints[c] as f64).powf(self.scaling_exponent);
        self.samples.iter().map(|s| s.running_max[c] / scale).collect()
    }

    pub fn running_max_column(&self, c: usize) -> Vec<f64> {
        self.samples.iter().map(|s| s.running_max[c]).collect()
    }

    pub fn layer_norm_column(&self, c: usize, layer: usize) -> Vec<f64> {
        self.samples.iter().map(|s| s.layer_norms[c][layer - 1]).collect()
    }

    /// Fraction of walks that drew atom `j` at every step.
    pub fn ballistic_fraction(&self, j: usize) -> f64 {
        let hits = self.samples.iter().filter(|s| s.constant_atom == Some(j)).count();
        hits as f64 / self.samples.len() as f64
    }
}

pub fn simulate_walk(cfg: &WalkConfig, stream: u64) -> Result<WalkSample> {
    Ok(Walker::new(cfg)?.simulate(stream))
}

/// Runs `cfg.replications` walks on streams `0..replications`, in parallel on
/// the current rayon pool. Output does not depend on the pool size.
pub fn monte_carlo(cfg: &WalkConfig) -> Result<SampleMatrix> {
    let walker = Walker::new(cfg)?;
    let samples = (0..cfg.replications as u64)
        .into_par_iter()
        .map(|r| walker.simulate(r))
        .collect();
    Ok(SampleMatrix {
        checkpoints: cfg.checkpoints.clone(),
        scaling_exponent: cfg.scaling_exponent,
        samples,
    })
}

/// `y_k = z_k * (-k v)`.
pub fn recentre(bch: &Bch, z: &AlgVector, k: u64, v: &AlgVector) -> Result<AlgVector> {
    bch.product(z, &v.scale(-(k as f64)))
}

/// Composes two independent `n`-step samples `(y, q)` and `(y', q')` into a
/// `2n`-step sample: `(y * nv * Ad(q) y' * (-nv), q q')`.
pub fn doubling_compose(
    bch: &Bch,
    group: &FiniteActionGroup,
    v: &AlgVector,
    n: u64,
    first: (&AlgVector, usize),
    second: (&AlgVector, usize),
) -> Result<(AlgVector, usize)> {
    let moved = AlgVector::from_dvector(&(group.matrix(first.1) * second.0.to_dvector()));
    let shifted = bch.conj(&v.scale(n as f64), &moved);
    Ok((bch.product(first.0, &shifted)?, group.mul(first.1, second.1)))
}

/// Whether the norm's filtration is the lower central series.
pub fn is_lower_central(norm: &HomogeneousNorm) -> bool {
    matches!(norm.filtration().kind(), FiltrationKind::LowerCentral)
}
