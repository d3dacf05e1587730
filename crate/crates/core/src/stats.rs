//! Concentration diagnostics on samples of a nonnegative statistic.
//!
//! Exponents are estimated from moment growth and from tail decay and are
//! never merged. All randomness (bootstrap) comes from seeded substreams.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{Beta, ContinuousCDF, Normal};
use statrs::function::gamma::ln_gamma;

use crate::error::{Error, Result};

pub const DEFAULT_P_SET: [f64; 4] = [2.0, 4.0, 8.0, 16.0];
pub const DEFAULT_TAIL_WINDOW: (f64, f64) = (1e-4, 0.2);
pub const DEFAULT_BOOTSTRAP: usize = 1000;
/// Exponents above this are reported as the bounded-support regime.
pub const BOUNDED_ALPHA: f64 = 6.0;
/// Search range for the moment-model shape parameter.
pub const ALPHA_RANGE: (f64, f64) = (0.05, 64.0);
const TAIL_GRID: usize = 48;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TailPoint {
    pub t: f64,
    pub p_hat: f64,
    pub ci_lo: f64,
    pub ci_hi: f64,
}

/// Exact binomial interval for `k` successes in `n` trials.
pub fn clopper_pearson(k: usize, n: usize, level: f64) -> (f64, f64) {
    let a = (1.0 - level) / 2.0;
    let lo = if k == 0 {
        0.0
    } else {
        Beta::new(k as f64, (n - k + 1) as f64).unwrap().inverse_cdf(a)
    };
    let hi = if k == n {
        1.0
    } else {
        Beta::new((k + 1) as f64, (n - k) as f64).unwrap().inverse_cdf(1.0 - a)
    };
    (lo, hi)
}

fn sorted(samples: &[f64]) -> Vec<f64> {
    let mut s = samples.to_vec();
    s.sort_by(f64::total_cmp);
    s
}

/// Number of entries `>= t` in a sorted slice.
fn exceed_count(sorted: &[f64], t: f64) -> usize {
    sorted.len() - sorted.partition_point(|&x| x < t)
}

/// Empirical `P(X >= t)` with 95% Clopper-Pearson intervals.
pub fn tail_curve(samples: &[f64], t_grid: &[f64]) -> Result<Vec<TailPoint>> {
    if samples.is_empty() {
        return Err(Error::Stats("tail_curve on empty sample".into()));
    }
    if t_grid.windows(2).any(|w| w[0] > w[1]) {
        return Err(Error::Stats("t grid must be sorted".into()));
    }
    let s = sorted(samples);
    let n = s.len();
    Ok(t_grid
        .iter()
        .map(|&t| {
            let k = exceed_count(&s, t);
            let (ci_lo, ci_hi) = clopper_pearson(k, n, 0.95);
            TailPoint {
                t,
                p_hat: k as f64 / n as f64,
                ci_lo,
                ci_hi,
            }
        })
        .collect())
}

/// `(E|x|^p)^{1/p}`, scaled by the max to avoid overflow.
pub fn p_norm(samples: &[f64], p: f64) -> f64 {
    let m = samples.iter().fold(0.0f64, |a, x| a.max(x.abs()));
    if m == 0.0 || samples.is_empty() {
        return 0.0;
    }
    let integral = p.fract() == 0.0 && p <= 64.0;
    let sum: f64 = if integral {
        let k = p as i32;
        samples.iter().map(|x| (x.abs() / m).powi(k)).sum()
    } else {
        samples.iter().map(|x| (x.abs() / m).powf(p)).sum()
    };
    m * (sum / samples.len() as f64).powf(1.0 / p)
}

/// `log ||X||_p` for `|X|` generalized-normal with shape `a` and unit scale.
fn model_log_norm(a: f64, p: f64) -> f64 {
    (ln_gamma((p + 1.0) / a) - ln_gamma(1.0 / a)) / p
}

/// Fits `log ||f||_p ~ log s + model_log_norm(alpha, p)` over `alpha`, with
/// the scale profiled out. Returns `(alpha, rms residual)`.
pub fn fit_moment_shape(p_set: &[f64], log_norms: &[f64]) -> (f64, f64) {
    let resid = |a: f64| {
        let diffs: Vec<f64> = p_set.iter().zip(log_norms).map(|(&p, &l)| l - model_log_norm(a, p)).collect();
        let mean = diffs.iter().sum::<f64>() / diffs.len() as f64;
        diffs.iter().map(|d| (d - mean).powi(2)).sum::<f64>() / diffs.len() as f64
    };
    let (lo, hi) = (ALPHA_RANGE.0.ln(), ALPHA_RANGE.1.ln());
    let grid = 240;
    let at = |i: usize| lo + (hi - lo) * i as f64 / grid as f64;
    let best = (0..=grid)
        .map(|i| (i, resid(at(i).exp())))
        .min_by(|a, b| a.1.total_cmp(&b.1))
        .unwrap()
        .0;
    // golden-section refinement in log alpha
    let (mut a, mut b) = (at(best.saturating_sub(1)), at((best + 1).min(grid)));
    let g = (5f64.sqrt() - 1.0) / 2.0;
    for _ in 0..60 {
        let c = b - g * (b - a);
        let d = a + g * (b - a);
        if resid(c.exp()) <= resid(d.exp()) {
            b = d;
        } else {
            a = c;
        }
    }
    let alpha = ((a + b) / 2.0).exp();
    (alpha, resid(alpha).sqrt())
}

/// Ordinary least-squares `(slope, intercept)`.
pub fn ols(x: &[f64], y: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    let slope = sxy / sxx;
    (slope, my - slope * mx)
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct FitOptions {
    pub p_set: Vec<f64>,
    pub tail_window: (f64, f64),
    pub bootstrap: usize,
    pub confidence: f64,
    pub seed: u64,
    pub min_samples: usize,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self {
            p_set: DEFAULT_P_SET.to_vec(),
            tail_window: DEFAULT_TAIL_WINDOW,
            bootstrap: DEFAULT_BOOTSTRAP,
            confidence: 0.95,
            seed: 0,
            min_samples: 1000,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Ci {
    pub lo: f64,
    pub hi: f64,
}

impl Ci {
    pub fn half_width(&self) -> f64 {
        (self.hi - self.lo) / 2.0
    }

    pub fn contains(&self, x: f64) -> bool {
        self.lo <= x && x <= self.hi
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "flag", rename_all = "snake_case")]
pub enum FitFlag {
    /// Exponent estimates exceed `BOUNDED_ALPHA`: tails vanish at finite range.
    BoundedSupport,
    /// Zero-variance sample at this `n`; excluded from the fit.
    Degenerate { n: u64 },
    /// Fewer than three tail points inside the window.
    ShortTailWindow,
    /// Moment and tail intervals do not overlap.
    Disagreement,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ConcentrationFit {
    /// Shape of the best generalized-normal moment profile of `sup_n ||f_n||_p`.
    pub alpha_moments: f64,
    pub alpha_moments_ci: Ci,
    /// Raw slope of `log sup_n ||f_n||_p` against `log p`.
    pub moment_slope: f64,
    pub moment_fit_rms: f64,
    /// `sup_n ||f_n||_p` for each `p`.
    pub moment_norms: Vec<f64>,
    /// `max_p sup_n ||f_n||_p / p^{1/alpha_moments}`.
    pub c_moment: f64,
    /// Slope of `log(-log p_hat)` against `log t` on the sup-tail curve.
    pub alpha_tail: Option<f64>,
    pub alpha_tail_ci: Option<Ci>,
    /// `P(f >= t) <= c2 exp(-c1 t^alpha_tail)` over the window.
    pub c1: Option<f64>,
    pub c2: Option<f64>,
    pub p_set: Vec<f64>,
    pub tail_window: (f64, f64),
    /// `t` values whose sup-tail lies in the window.
    pub tail_t_used: Vec<f64>,
    pub ns: Vec<u64>,
    pub bootstrap: usize,
    pub seed: u64,
    pub flags: Vec<FitFlag>,
}

impl ConcentrationFit {
    pub fn has_flag(&self, f: &FitFlag) -> bool {
        self.flags.contains(f)
    }

    pub fn bounded_support(&self) -> bool {
        self.has_flag(&FitFlag::BoundedSupport)
    }
}

struct Estimate {
    alpha_moments: f64,
    slope: f64,
    rms: f64,
    norms: Vec<f64>,
    tail: Option<(f64, f64, Vec<(f64, f64)>)>,
}

fn estimate(sorted_by_n: &[Vec<f64>], p_set: &[f64], t_grid: &[f64], window: (f64, f64)) -> Estimate {
    let norms: Vec<f64> = p_set
        .iter()
        .map(|&p| sorted_by_n.iter().map(|s| p_norm(s, p)).fold(0.0, f64::max))
        .collect();
    let logs: Vec<f64> = norms.iter().map(|v| v.ln()).collect();
    let lp: Vec<f64> = p_set.iter().map(|p| p.ln()).collect();
    let (slope, _) = ols(&lp, &logs);
    let (alpha_moments, rms) = fit_moment_shape(p_set, &logs);
    let mut pts = Vec::new();
    for &t in t_grid {
        let p = sorted_by_n
            .iter()
            .map(|s| exceed_count(s, t) as f64 / s.len() as f64)
            .fold(0.0, f64::max);
        if p >= window.0 && p <= window.1 && p < 1.0 {
            pts.push((t, p));
        }
    }
    let tail = (pts.len() >= 3).then(|| {
        let x: Vec<f64> = pts.iter().map(|(t, _)| t.ln()).collect();
        let y: Vec<f64> = pts.iter().map(|(_, p)| (-p.ln()).ln()).collect();
        let (a, b) = ols(&x, &y);
        (a, b.exp(), pts)
    });
    Estimate {
        alpha_moments,
        slope,
        rms,
        norms,
        tail,
    }
}

fn percentile(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let (i, f) = (pos.floor() as usize, pos.fract());
    if i + 1 < sorted.len() {
        sorted[i] * (1.0 - f) + sorted[i + 1] * f
    } else {
        sorted[i]
    }
}

fn percentile_ci(mut vals: Vec<f64>, confidence: f64) -> Ci {
    vals.sort_by(f64::total_cmp);
    let a = (1.0 - confidence) / 2.0;
    Ci {
        lo: percentile(&vals, a),
        hi: percentile(&vals, 1.0 - a),
    }
}

fn is_degenerate(s: &[f64]) -> bool {
    s.iter().all(|&x| x == s[0])
}

/// Estimates the concentration exponent of the family `{f_n}` two ways.
/// Moments use the supremum over `n` at each `p`, tails use the supremum
/// over `n` of the empirical exceedance curve.
pub fn fit_alpha(samples_by_n: &BTreeMap<u64, Vec<f64>>, opts: &FitOptions) -> Result<ConcentrationFit> {
    if opts.p_set.len() < 3 {
        return Err(Error::Stats("need at least three moment orders".into()));
    }
    if samples_by_n.is_empty() {
        return Err(Error::Stats("no samples".into()));
    }
    let mut flags = Vec::new();
    let mut kept: Vec<Vec<f64>> = Vec::new();
    let mut ns = Vec::new();
    for (&n, s) in samples_by_n {
        if s.len() < opts.min_samples {
            return Err(Error::Stats(format!("n = {n}: {} samples, need {}", s.len(), opts.min_samples)));
        }
        if is_degenerate(s) {
            flags.push(FitFlag::Degenerate { n });
            continue;
        }
        kept.push(sorted(&s.iter().map(|x| x.abs()).collect::<Vec<_>>()));
        ns.push(n);
    }
    if kept.is_empty() {
        return Err(Error::Stats("every sample is degenerate".into()));
    }
    let mut pooled: Vec<f64> = kept.iter().flatten().copied().collect();
    pooled.sort_by(f64::total_cmp);
    let t_lo = percentile(&pooled, 1.0 - opts.tail_window.1).max(f64::MIN_POSITIVE);
    let t_hi = *pooled.last().unwrap();
    let t_grid: Vec<f64> = if t_hi > t_lo {
        (0..TAIL_GRID)
            .map(|i| t_lo * (t_hi / t_lo).powf(i as f64 / (TAIL_GRID - 1) as f64))
            .collect()
    } else {
        vec![t_lo]
    };

    let point = estimate(&kept, &opts.p_set, &t_grid, opts.tail_window);
    let boot: Vec<(f64, Option<f64>)> = (0..opts.bootstrap as u64)
        .into_par_iter()
        .map(|b| {
            let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
            rng.set_stream(b);
            let res: Vec<Vec<f64>> = kept
                .iter()
                .map(|s| {
                    let mut r: Vec<f64> = (0..s.len()).map(|_| s[rng.random_range(0..s.len())]).collect();
                    r.sort_by(f64::total_cmp);
                    r
                })
                .collect();
            let e = estimate(&res, &opts.p_set, &t_grid, opts.tail_window);
            (e.alpha_moments, e.tail.map(|t| t.0))
        })
        .collect();
    let alpha_moments_ci = if boot.is_empty() {
        Ci {
            lo: point.alpha_moments,
            hi: point.alpha_moments,
        }
    } else {
        percentile_ci(boot.iter().map(|b| b.0).collect(), opts.confidence)
    };
    let tail_boot: Vec<f64> = boot.iter().filter_map(|b| b.1).collect();

    let c_moment = point
        .norms
        .iter()
        .zip(&opts.p_set)
        .map(|(m, p)| m / p.powf(1.0 / point.alpha_moments))
        .fold(0.0, f64::max);

    let (alpha_tail, alpha_tail_ci, c1, c2, tail_t_used) = match &point.tail {
        Some((a, c1, pts)) => {
            let c2 = pts.iter().map(|(t, p)| p * (c1 * t.powf(*a)).exp()).fold(0.0, f64::max);
            let ci = if tail_boot.is_empty() {
                Ci { lo: *a, hi: *a }
            } else {
                percentile_ci(tail_boot, opts.confidence)
            };
            (Some(*a), Some(ci), Some(*c1), Some(c2), pts.iter().map(|p| p.0).collect())
        }
        None => {
            flags.push(FitFlag::ShortTailWindow);
            (None, None, None, None, Vec::new())
        }
    };

    if point.alpha_moments > BOUNDED_ALPHA || alpha_tail.is_some_and(|a| a > BOUNDED_ALPHA) {
        flags.push(FitFlag::BoundedSupport);
    }
    if let Some(tci) = alpha_tail_ci {
        if tci.hi < alpha_moments_ci.lo || alpha_moments_ci.hi < tci.lo {
            flags.push(FitFlag::Disagreement);
        }
    }

    Ok(ConcentrationFit {
        alpha_moments: point.alpha_moments,
        alpha_moments_ci,
        moment_slope: point.slope,
        moment_fit_rms: point.rms,
        moment_norms: point.norms,
        c_moment,
        alpha_tail,
        alpha_tail_ci,
        c1,
        c2,
        p_set: opts.p_set.clone(),
        tail_window: opts.tail_window,
        tail_t_used,
        ns,
        bootstrap: opts.bootstrap,
        seed: opts.seed,
        flags,
    })
}

/// `||f_n||_p / p^{1/alpha}` for each `n` (rows) and `p` (columns), and the
/// ratio of the largest to the smallest entry.
pub fn moment_flatness(samples_by_n: &BTreeMap<u64, Vec<f64>>, p_set: &[f64], alpha: f64) -> (Vec<Vec<f64>>, f64) {
    let table: Vec<Vec<f64>> = samples_by_n
        .values()
        .map(|s| p_set.iter().map(|&p| p_norm(s, p) / p.powf(1.0 / alpha)).collect())
        .collect();
    let all = table.iter().flatten();
    let max = all.clone().fold(f64::NEG_INFINITY, |a, &b| a.max(b));
    let min = all.fold(f64::INFINITY, |a, &b| a.min(b));
    (table, max / min)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LaplaceVerdict {
    Subgaussian,
    Subexponential,
    Neither,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct LaplacePoint {
    pub t: f64,
    /// `log E exp(t(f - Ef)) - K t^2`.
    pub excess: f64,
    /// Upper confidence bound of the excess.
    pub excess_hi: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct LaplaceReport {
    pub k: f64,
    pub b: Option<f64>,
    pub points: Vec<LaplacePoint>,
    pub max_excess: f64,
    /// Max excess over `|t| < b`, when `b` is given.
    pub max_excess_inside: Option<f64>,
    pub verdict: LaplaceVerdict,
    /// Smallest `|t|` at which the empirical MGF overflowed.
    pub truncated_at: Option<f64>,
}

/// Grid points per side of zero.
const LAPLACE_GRID: usize = 64;

/// Compares the empirical log-MGF of the centred sample with `K t^2`.
/// Verdicts use the lower CI of the excess: a point fails only when the
/// excess is positive beyond sampling error.
pub fn laplace_check(samples: &[f64], k: f64, b: Option<f64>) -> Result<LaplaceReport> {
    if !(k > 0.0) {
        return Err(Error::Stats("K must be positive".into()));
    }
    if samples.is_empty() {
        return Err(Error::Stats("laplace_check on empty sample".into()));
    }
    let n = samples.len() as f64;
    let mean = samples.iter().sum::<f64>() / n;
    let var = samples.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
    let std = var.sqrt();
    let reach = if std > 0.0 { 4.0 / std } else { 4.0 };
    let reach = b.map_or(reach, |b| reach.max(b));
    let z = Normal::standard().inverse_cdf(0.975);
    let mut points = Vec::new();
    let mut truncated_at: Option<f64> = None;
    for side in [1.0, -1.0] {
        for i in 1..=LAPLACE_GRID {
            let t = side * reach * i as f64 / LAPLACE_GRID as f64;
            let vals: Vec<f64> = samples.iter().map(|x| (t * (x - mean)).exp()).collect();
            let m = vals.iter().sum::<f64>() / n;
            if !m.is_finite() {
                truncated_at = Some(truncated_at.map_or(t.abs(), |a: f64| a.min(t.abs())));
                break;
            }
            let sd = (vals.iter().map(|v| (v - m).powi(2)).sum::<f64>() / n).sqrt();
            let se_log = sd / (m * n.sqrt());
            let excess = m.ln() - k * t * t;
            points.push(LaplacePoint {
                t,
                excess,
                excess_hi: excess + z * se_log,
            });
        }
    }
    points.sort_by(|a, b| a.t.total_cmp(&b.t));
    let fails = |p: &LaplacePoint| {
        let se = p.excess_hi - p.excess;
        p.excess - se > 0.0
    };
    let max_excess = points.iter().map(|p| p.excess).fold(f64::NEG_INFINITY, f64::max);
    let max_excess_inside = b.map(|b| {
        points
            .iter()
            .filter(|p| p.t.abs() < b)
            .map(|p| p.excess)
            .fold(f64::NEG_INFINITY, f64::max)
    });
    let all_pass = truncated_at.is_none() && !points.iter().any(fails);
    let inside_pass = b.is_some_and(|b| !points.iter().filter(|p| p.t.abs() < b).any(fails));
    let verdict = if all_pass {
        LaplaceVerdict::Subgaussian
    } else if inside_pass {
        LaplaceVerdict::Subexponential
    } else {
        LaplaceVerdict::Neither
    };
    Ok(LaplaceReport {
        k,
        b,
        points,
        max_excess,
        max_excess_inside,
        verdict,
        truncated_at,
    })
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct LilReport {
    pub alpha: f64,
    pub dyadic_exponents: Vec<u32>,
    /// Per replicate `max_j |y_{2^j}| / (2^j log log 2^j)^alpha`.
    pub c_hat: Vec<f64>,
    pub c_hat_median: f64,
    pub c_hat_q10: f64,
    pub c_hat_q90: f64,
    /// Fraction of replicates whose ratio increases across the top three `j`.
    pub monotone_fraction: f64,
    /// Slope of the log median ratio against `log 2^j`.
    pub growth_slope: f64,
    pub unbounded: bool,
}

/// Median-ratio growth slope above which the flag is raised.
pub const LIL_GROWTH_THRESHOLD: f64 = 0.1;

/// Law-of-iterated-logarithm diagnostic over dyadic checkpoints.
///
/// `trajectories[r]` holds `(n, |y_n|)` with `n = 2^j`, `j >= 2`, the same
/// times for every replicate. The flag fires when the median ratio grows
/// polynomially in `n`; the literal monotone-run fraction is reported
/// alongside.
pub fn lil_diagnostic(trajectories: &[Vec<(u64, f64)>], alpha: f64) -> Result<LilReport> {
    let first = trajectories.first().ok_or_else(|| Error::Stats("no trajectories".into()))?;
    let times: Vec<u64> = first.iter().map(|p| p.0).collect();
    if times.len() < 3 {
        return Err(Error::Stats("need at least three dyadic checkpoints".into()));
    }
    let mut exps = Vec::with_capacity(times.len());
    for &n in &times {
        if !n.is_power_of_two() || n < 4 {
            return Err(Error::Stats(format!("checkpoint {n} is not 2^j with j >= 2")));
        }
        exps.push(n.trailing_zeros());
    }
    if trajectories.iter().any(|t| t.iter().map(|p| p.0).ne(times.iter().copied())) {
        return Err(Error::Stats("replicates disagree on checkpoint times".into()));
    }
    let denom: Vec<f64> = times
        .iter()
        .map(|&n| {
            let n = n as f64;
            (n * n.ln().ln()).powf(alpha)
        })
        .collect();
    let ratios: Vec<Vec<f64>> = trajectories
        .iter()
        .map(|t| t.iter().zip(&denom).map(|(p, d)| p.1 / d).collect())
        .collect();
    let c_hat: Vec<f64> = ratios.iter().map(|r| r.iter().copied().fold(0.0, f64::max)).collect();
    let m = times.len();
    let monotone = ratios.iter().filter(|r| r[m - 3] < r[m - 2] && r[m - 2] < r[m - 1]).count();
    let medians: Vec<f64> = (0..m)
        .map(|j| {
            let col = sorted(&ratios.iter().map(|r| r[j]).collect::<Vec<_>>());
            percentile(&col, 0.5)
        })
        .collect();
    let growth_slope = if medians.iter().all(|&x| x > 0.0) {
        let x: Vec<f64> = times.iter().map(|&n| (n as f64).ln()).collect();
        let y: Vec<f64> = medians.iter().map(|v| v.ln()).collect();
        ols(&x, &y).0
    } else {
        0.0
    };
    let cs = sorted(&c_hat);
    Ok(LilReport {
        alpha,
        dyadic_exponents: exps,
        c_hat_median: percentile(&cs, 0.5),
        c_hat_q10: percentile(&cs, 0.1),
        c_hat_q90: percentile(&cs, 0.9),
        c_hat,
        monotone_fraction: monotone as f64 / trajectories.len() as f64,
        growth_slope,
        unbounded: growth_slope > LIL_GROWTH_THRESHOLD,
    })
}

/// Two-sample Kolmogorov-Smirnov statistic and asymptotic p-value.
pub fn ks_two_sample(a: &[f64], b: &[f64]) -> Result<(f64, f64)> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::Stats("ks on empty sample".into()));
    }
    let (a, b) = (sorted(a), sorted(b));
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j, mut d) = (0usize, 0usize, 0.0f64);
    while i < a.len() && j < b.len() {
        let x = a[i].min(b[j]);
        while i < a.len() && a[i] <= x {
            i += 1;
        }
        while j < b.len() && b[j] <= x {
            j += 1;
        }
        d = d.max((i as f64 / na - j as f64 / nb).abs());
    }
    let en = (na * nb / (na + nb)).sqrt();
    Ok((d, kolmogorov_sf((en + 0.12 + 0.11 / en) * d)))
}

/// `P(K > x)` for the Kolmogorov distribution.
pub fn kolmogorov_sf(x: f64) -> f64 {
    if x < 0.2 {
        return 1.0;
    }
    let s: f64 = (1..=100)
        .map(|k| {
            let k = k as f64;
            let sign = if k as u64 % 2 == 1 { 1.0 } else { -1.0 };
            sign * (-2.0 * k * k * x * x).exp()
        })
        .sum();
    (2.0 * s).clamp(0.0, 1.0)
}

/// Mean and standard error.
pub fn mean_se(samples: &[f64]) -> (f64, f64) {
    let n = samples.len() as f64;
    let mean = samples.iter().sum::<f64>() / n;
    let var = samples.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0).max(1.0);
    (mean, (var / n).sqrt())
}

/// Median of an unsorted sample.
pub fn median(samples: &[f64]) -> f64 {
    percentile(&sorted(samples), 0.5)
}
