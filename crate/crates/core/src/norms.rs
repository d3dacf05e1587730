//! Homogeneous norms `|u| = sup_i phi(u_i)^(1/i)` adapted to a filtration.
//!
//! The underlying norm `phi = max_j phi_j(u^j)` is always split along the
//! lower central layers `m^j`. `phi_1` is the euclidean norm on `m^1`; the
//! higher `phi_j` either rescale the euclidean norm (`ScaledEuclidean`) or
//! are Minkowski functionals of the convex bodies
//! `kappa_j [B_1(1), B_{j-1}(1)]` (`BracketHull`).

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::lie::linalg::svd;
use crate::lie::{AlgVector, Bch, DynkinTable, Filtration, FiltrationKind, NilpotentAlgebra, Subspace};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum GaugeMode {
    #[default]
    ScaledEuclidean,
    BracketHull,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default)]
pub struct GaugeParams {
    pub mode: GaugeMode,
    /// Overrides `kappa_2 .. kappa_s`; defaults to `2 i^2 A_i`.
    pub kappa: Option<Vec<f64>>,
    /// Pairs used to calibrate the scaled gauge and to estimate `C_phi`.
    pub calibration_pairs: usize,
    /// Support directions per layer of dimension >= 2 in hull mode.
    pub hull_directions: usize,
    pub seed: u64,
}

impl Default for GaugeParams {
    fn default() -> Self {
        Self {
            mode: GaugeMode::ScaledEuclidean,
            kappa: None,
            calibration_pairs: 100_000,
            hull_directions: 256,
            seed: 0,
        }
    }
}

/// Gauge on one lower-central layer, in that layer's orthonormal coordinates.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LayerGauge {
    /// `||x|| / scale`.
    Euclidean { scale: f64 },
    /// One-dimensional hull `[-h, h]`.
    Interval { half_width: f64 },
    /// Symmetric polytope given by its vertices.
    Hull { vertices: Vec<Vec<f64>> },
}

impl LayerGauge {
    pub fn eval(&self, x: &[f64]) -> f64 {
        match self {
            LayerGauge::Euclidean { scale } => norm2(x) / scale,
            LayerGauge::Interval { half_width } => norm2(x) / half_width,
            LayerGauge::Hull { vertices } if x.len() == 2 => polygon_gauge(vertices, x),
            LayerGauge::Hull { vertices } => lp_gauge(vertices, x),
        }
    }
}

fn norm2(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}

/// Minkowski functional of `conv(vertices)` by linear programming:
/// `min sum l_k` subject to `sum l_k v_k = x`, `l >= 0`.
pub fn lp_gauge(vertices: &[Vec<f64>], x: &[f64]) -> f64 {
    use microlp::{ComparisonOp, OptimizationDirection, Problem};
    if x.iter().all(|&v| v == 0.0) {
        return 0.0;
    }
    let mut p = Problem::new(OptimizationDirection::Minimize);
    let vars: Vec<_> = vertices.iter().map(|_| p.add_var(1.0, (0.0, f64::INFINITY))).collect();
    for (r, &xr) in x.iter().enumerate() {
        let expr: Vec<_> = vars.iter().zip(vertices).map(|(&v, vert)| (v, vert[r])).collect();
        p.add_constraint(expr, ComparisonOp::Eq, xr);
    }
    match p.solve() {
        Ok(sol) => sol.objective(),
        Err(_) => f64::INFINITY,
    }
}

/// Minkowski functional of a convex polygon containing 0 in its interior,
/// vertices in counter-clockwise order: the max over edges of `n.x / n.a`.
pub fn polygon_gauge(vertices: &[Vec<f64>], x: &[f64]) -> f64 {
    let k = vertices.len();
    let mut best = 0.0f64;
    for i in 0..k {
        let a = &vertices[i];
        let b = &vertices[(i + 1) % k];
        let n = [b[1] - a[1], a[0] - b[0]];
        let c = n[0] * a[0] + n[1] * a[1];
        if c > 0.0 {
            best = best.max((n[0] * x[0] + n[1] * x[1]) / c);
        }
    }
    best
}

/// Counter-clockwise convex hull of planar points (monotone chain), with
/// collinear points removed.
pub fn convex_hull_2d(points: &[[f64; 2]]) -> Vec<[f64; 2]> {
    let mut pts = points.to_vec();
    pts.sort_by(|a, b| a[0].total_cmp(&b[0]).then(a[1].total_cmp(&b[1])));
    pts.dedup();
    if pts.len() < 3 {
        return pts;
    }
    let cross = |o: &[f64; 2], a: &[f64; 2], b: &[f64; 2]| (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0]);
    let mut hull: Vec<[f64; 2]> = Vec::with_capacity(2 * pts.len());
    for pass in 0..2 {
        let start = hull.len();
        let iter: Box<dyn Iterator<Item = &[f64; 2]>> = if pass == 0 {
            Box::new(pts.iter())
        } else {
            Box::new(pts.iter().rev())
        };
        for p in iter {
            while hull.len() >= start + 2 && cross(&hull[hull.len() - 2], &hull[hull.len() - 1], p) <= 0.0 {
                hull.pop();
            }
            hull.push(*p);
        }
        hull.pop();
    }
    hull
}

/// Serializable record of a gauge, hashed into experiment outputs.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct GaugeDescriptor {
    pub mode: GaugeMode,
    pub filtration: FiltrationKind,
    pub layer_dims: Vec<usize>,
    pub lower_layer_dims: Vec<usize>,
    pub kappa: Vec<f64>,
    pub layer_gauges: Vec<LayerGauge>,
    pub fallback_layers: Vec<usize>,
    pub bilinearity_bound: f64,
}

#[derive(Clone, Debug)]
pub struct HomogeneousNorm {
    alg: NilpotentAlgebra,
    filtration: Filtration,
    lower: Filtration,
    mode: GaugeMode,
    kappa: Vec<f64>,
    gauges: Vec<LayerGauge>,
    fallback_layers: Vec<usize>,
    euclidean_bilinearity: f64,
    bilinearity_bound: f64,
    // (F-layer weight i, LC layer j, rows B_j^T Theta_i); zero blocks dropped
    blocks: Vec<(usize, usize, DMatrix<f64>)>,
}

/// Default `kappa_i = 2 i^2 A_i` for `2 <= i <= s`.
pub fn default_kappa(step: usize) -> Vec<f64> {
    if step < 2 {
        return Vec::new();
    }
    let table = DynkinTable::new(step);
    (2..=step).map(|i| 2.0 * (i * i) as f64 * table.a_constant(i)).collect()
}

fn unit_gaussian(rng: &mut ChaCha8Rng, m: usize) -> DVector<f64> {
    loop {
        let v = DVector::from_fn(m, |_, _| rng.sample::<f64, _>(StandardNormal));
        let n = v.norm();
        if n > 1e-300 {
            return v / n;
        }
    }
}

/// Previous-layer unit body used while building the next hull layer.
enum Body {
    Ball { basis: DMatrix<f64>, radius: f64 },
    Vertices(Vec<DVector<f64>>),
}

impl HomogeneousNorm {
    pub fn build(alg: &NilpotentAlgebra, filt: &Filtration, params: &GaugeParams) -> Result<Self> {
        if filt.dim() != alg.dim() {
            return Err(Error::DimensionMismatch { expected: alg.dim(), got: filt.dim() });
        }
        let lower = Filtration::lower_central_series(alg);
        let s = lower.depth();
        let kappa = match &params.kappa {
            Some(k) => {
                if k.len() + 1 < s {
                    return Err(Error::InvalidGauge(format!("need {} kappa values, got {}", s - 1, k.len())));
                }
                if k.iter().any(|&v| !(v > 0.0 && v.is_finite())) {
                    return Err(Error::InvalidGauge("kappa values must be positive and finite".into()));
                }
                k[..s - 1].to_vec()
            }
            None => default_kappa(s),
        };
        let c_e = alg.euclidean_bilinearity();
        let mut blocks = Vec::new();
        for (i, fl) in filt.layers().iter().enumerate() {
            if fl.is_zero() {
                continue;
            }
            let theta = fl.projector();
            for (j, ll) in lower.layers().iter().enumerate() {
                let m = ll.basis().transpose() * &theta;
                if m.iter().any(|v| v.abs() > 1e-14) {
                    blocks.push((i + 1, j + 1, m));
                }
            }
        }
        let mut norm = Self {
            alg: alg.clone(),
            filtration: filt.clone(),
            lower,
            mode: params.mode,
            kappa,
            gauges: Vec::new(),
            fallback_layers: Vec::new(),
            euclidean_bilinearity: c_e,
            bilinearity_bound: 0.0,
            blocks,
        };
        match params.mode {
            GaugeMode::ScaledEuclidean => norm.calibrate_scaled(params)?,
            GaugeMode::BracketHull => norm.build_hull(params)?,
        }
        norm.bilinearity_bound = norm.bilinearity_constant(params.calibration_pairs.max(1), params.seed ^ 0x5eed);
        Ok(norm)
    }

    /// `lambda_i = kappa_2 .. kappa_i C_e^(i-1)`.
    fn product_scale(&self, i: usize) -> f64 {
        let k: f64 = self.kappa[..i - 1].iter().product();
        k * self.euclidean_bilinearity.powi(i as i32 - 1)
    }

    fn calibrate_scaled(&mut self, params: &GaugeParams) -> Result<()> {
        let s = self.lower.depth();
        self.gauges = vec![LayerGauge::Euclidean { scale: 1.0 }];
        for i in 2..=s {
            let base = self.product_scale(i);
            if !(base > 0.0 && base.is_finite()) {
                return Err(Error::InvalidGauge(format!("layer {i} scale is {base}")));
            }
            self.gauges.push(LayerGauge::Euclidean { scale: base });
        }
        // kth-layer output depends only on inputs from layers below k, so the
        // layers can be calibrated in order
        let pairs = params.calibration_pairs.max(1);
        for k in 2..=s {
            for _ in 0..200 {
                let worst = self.sampled_layer_bilinearity(k, pairs, params.seed);
                if worst <= 1.0 {
                    break;
                }
                if let LayerGauge::Euclidean { scale } = &mut self.gauges[k - 1] {
                    *scale *= 2.0;
                }
            }
        }
        Ok(())
    }

    fn build_hull(&mut self, params: &GaugeParams) -> Result<()> {
        let s = self.lower.depth();
        let d = self.alg.dim();
        let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
        let b1 = self.lower.layer(1).basis().clone();
        self.gauges = vec![LayerGauge::Euclidean { scale: 1.0 }];
        let mut prev = Body::Ball { basis: b1.clone(), radius: 1.0 };
        let mut buf = vec![0.0; d];
        for i in 2..=s {
            let bi = self.lower.layer(i).basis().clone();
            let m = bi.ncols();
            let kap = self.kappa[i - 2];
            let directions: Vec<DVector<f64>> = match m {
                1 => vec![DVector::from_element(1, 1.0)],
                2 => {
                    let n = params.hull_directions.max(4);
                    (0..n)
                        .map(|k| {
                            let a = std::f64::consts::PI * k as f64 / n as f64;
                            DVector::from_column_slice(&[a.cos(), a.sin()])
                        })
                        .collect()
                }
                _ => (0..params.hull_directions.max(2 * m)).map(|_| unit_gaussian(&mut rng, m)).collect(),
            };
            let mut points: Vec<DVector<f64>> = Vec::with_capacity(2 * directions.len());
            for n in &directions {
                let nu = &bi * n;
                let (u, w) = match &prev {
                    Body::Ball { basis, radius } => {
                        // M_ab = <nu, [f_a, g_b]>
                        let mut mm = DMatrix::zeros(b1.ncols(), basis.ncols());
                        for a in 0..b1.ncols() {
                            for b in 0..basis.ncols() {
                                self.alg.bracket_into(b1.column(a).as_slice(), basis.column(b).as_slice(), &mut buf);
                                mm[(a, b)] = nu.iter().zip(&buf).map(|(p, q)| p * q).sum();
                            }
                        }
                        let dec = svd(&mm);
                        let uu = dec.u.column(0).into_owned();
                        let ww = dec.v.column(0).into_owned();
                        (&b1 * uu, basis * ww * *radius)
                    }
                    Body::Vertices(verts) => {
                        let mut best: Option<(f64, DVector<f64>, &DVector<f64>)> = None;
                        for w in verts {
                            // <nu, [u, w]> = <g, u> with g_a = <nu, [f_a, w]>
                            let g = DVector::from_fn(b1.ncols(), |a, _| {
                                self.alg.bracket_into(b1.column(a).as_slice(), w.as_slice(), &mut buf);
                                nu.iter().zip(&buf).map(|(p, q)| p * q).sum()
                            });
                            let gn = g.norm();
                            if best.as_ref().is_none_or(|b| gn > b.0) {
                                best = Some((gn, g, w));
                            }
                        }
                        let (gn, g, w) = best.expect("nonempty vertex set");
                        let uu = if gn > 0.0 { g / gn } else { DVector::zeros(b1.ncols()) };
                        (&b1 * uu, w.clone())
                    }
                };
                self.alg.bracket_into(u.as_slice(), w.as_slice(), &mut buf);
                let p = bi.transpose() * DVector::from_column_slice(&buf) * kap;
                points.push(-&p);
                points.push(p);
            }
            let rank = Subspace::span(m, &points).dim();
            if rank < m {
                self.fallback_layers.push(i);
                let scale = self.product_scale(i);
                self.gauges.push(LayerGauge::Euclidean { scale });
                prev = Body::Ball { basis: bi, radius: scale };
                continue;
            }
            let gauge = match m {
                1 => LayerGauge::Interval {
                    half_width: points.iter().map(|p| p[0].abs()).fold(0.0, f64::max),
                },
                2 => {
                    let pts: Vec<[f64; 2]> = points.iter().map(|p| [p[0], p[1]]).collect();
                    LayerGauge::Hull {
                        vertices: convex_hull_2d(&pts).into_iter().map(|p| p.to_vec()).collect(),
                    }
                }
                _ => LayerGauge::Hull {
                    vertices: points.iter().map(|p| p.as_slice().to_vec()).collect(),
                },
            };
            prev = match &gauge {
                LayerGauge::Interval { half_width } => {
                    let b = bi.column(0).into_owned();
                    Body::Vertices(vec![&b * *half_width, &b * -*half_width])
                }
                LayerGauge::Hull { vertices } => Body::Vertices(
                    vertices.iter().map(|v| &bi * DVector::from_column_slice(v)).collect(),
                ),
                LayerGauge::Euclidean { .. } => unreachable!(),
            };
            self.gauges.push(gauge);
        }
        Ok(())
    }

    pub fn algebra(&self) -> &NilpotentAlgebra {
        &self.alg
    }

    pub fn filtration(&self) -> &Filtration {
        &self.filtration
    }

    pub fn lower_central(&self) -> &Filtration {
        &self.lower
    }

    pub fn mode(&self) -> GaugeMode {
        self.mode
    }

    /// `kappa_2 .. kappa_s`.
    pub fn kappa(&self) -> &[f64] {
        &self.kappa
    }

    pub fn layer_gauges(&self) -> &[LayerGauge] {
        &self.gauges
    }

    /// Lower-central layers where the hull was degenerate and the scaled
    /// euclidean gauge was used instead.
    pub fn fallback_layers(&self) -> &[usize] {
        &self.fallback_layers
    }

    /// Sampled estimate of `C_phi` recorded at build time.
    pub fn bilinearity_bound(&self) -> f64 {
        self.bilinearity_bound
    }

    pub fn euclidean_bilinearity(&self) -> f64 {
        self.euclidean_bilinearity
    }

    /// `kappa_s .. kappa_2 C_e^(s-1)`, the constant comparing `||.||_e` to `phi`.
    pub fn efi_constant(&self) -> f64 {
        let s = self.lower.depth();
        if s < 2 {
            1.0
        } else {
            self.product_scale(s)
        }
    }

    /// `phi_j` applied to the `m^j` component of `x`.
    pub fn phi_layer(&self, j: usize, x: &[f64]) -> f64 {
        let rows = self.lower.layer(j).basis();
        let coords: Vec<f64> = (0..rows.ncols())
            .map(|c| rows.column(c).iter().zip(x).map(|(a, b)| a * b).sum())
            .collect();
        self.gauges[j - 1].eval(&coords)
    }

    /// `phi(x) = max_j phi_j(x^j)`.
    pub fn phi(&self, x: &[f64]) -> f64 {
        (1..=self.lower.depth()).map(|j| self.phi_layer(j, x)).fold(0.0, f64::max)
    }

    /// `sup_i phi(x_i)^(1/i)` over the layers of the adapted filtration.
    pub fn eval_slice(&self, x: &[f64]) -> f64 {
        let mut per_layer = [0.0f64; 32];
        let mut spill = Vec::new();
        let depth = self.filtration.depth();
        let phis: &mut [f64] = if depth <= 32 {
            &mut per_layer[..depth]
        } else {
            spill.resize(depth, 0.0);
            &mut spill
        };
        for (i, j, m) in &self.blocks {
            let v = match &self.gauges[j - 1] {
                LayerGauge::Euclidean { scale: h } | LayerGauge::Interval { half_width: h } => {
                    let mut acc = 0.0;
                    for r in 0..m.nrows() {
                        let c: f64 = m.row(r).iter().zip(x).map(|(a, b)| a * b).sum();
                        acc += c * c;
                    }
                    acc.sqrt() / h
                }
                g => {
                    let coords: Vec<f64> = (0..m.nrows())
                        .map(|r| m.row(r).iter().zip(x).map(|(a, b)| a * b).sum())
                        .collect();
                    g.eval(&coords)
                }
            };
            phis[i - 1] = phis[i - 1].max(v);
        }
        phis.iter()
            .enumerate()
            .map(|(i, &p)| if i == 0 { p } else { p.powf(1.0 / (i + 1) as f64) })
            .fold(0.0, f64::max)
    }

    pub fn hom_norm(&self, x: &AlgVector) -> Result<f64> {
        if x.dim() != self.alg.dim() {
            return Err(Error::DimensionMismatch { expected: self.alg.dim(), got: x.dim() });
        }
        Ok(self.eval_slice(x.as_slice()))
    }

    /// A point on the unit sphere of `phi`: independent layer directions
    /// with magnitudes in `[0, 1]`, at least one equal to 1. With
    /// `saturate` every layer sits on its own unit sphere.
    pub fn sample_phi_sphere(&self, rng: &mut ChaCha8Rng, saturate: bool) -> Vec<f64> {
        let s = self.lower.depth();
        let d = self.alg.dim();
        let top = rng.random_range(0..s);
        let mut out = vec![0.0; d];
        for j in 1..=s {
            let layer = self.lower.layer(j);
            let t = if saturate || j - 1 == top { 1.0 } else { rng.random::<f64>() };
            let dir = unit_gaussian(rng, layer.dim());
            let g = self.gauges[j - 1].eval(dir.as_slice());
            let amb = layer.basis() * dir * (t / g);
            for (o, a) in out.iter_mut().zip(amb.iter()) {
                *o += a;
            }
        }
        out
    }

    fn sampled_pairs(&self, count: usize, seed: u64) -> impl Iterator<Item = (Vec<f64>, Vec<f64>)> + '_ {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..count).map(move |k| {
            let sat = k % 3 == 0;
            let u = self.sample_phi_sphere(&mut rng, sat);
            let v = self.sample_phi_sphere(&mut rng, sat);
            (u, v)
        })
    }

    fn sampled_layer_bilinearity(&self, k: usize, count: usize, seed: u64) -> f64 {
        let mut buf = vec![0.0; self.alg.dim()];
        let mut worst = 0.0f64;
        for (u, v) in self.sampled_pairs(count, seed) {
            self.alg.bracket_into(&u, &v, &mut buf);
            worst = worst.max(self.phi_layer(k, &buf));
        }
        worst
    }

    /// Max of `phi([u, v])` over sampled pairs on the unit sphere of `phi`,
    /// a lower estimate of `C_phi`.
    pub fn bilinearity_constant(&self, sample_count: usize, seed: u64) -> f64 {
        if self.alg.is_abelian() {
            return 0.0;
        }
        let mut buf = vec![0.0; self.alg.dim()];
        let mut worst = 0.0f64;
        for (u, v) in self.sampled_pairs(sample_count.max(1), seed) {
            self.alg.bracket_into(&u, &v, &mut buf);
            worst = worst.max(self.phi(&buf));
        }
        worst
    }

    /// Max over sampled pairs of `|u * v| - |u| - |v|`. Half of the pairs are
    /// uniform in the box `[-R, R]^d`, half are dilations `D_r b` with `b`
    /// uniform in the unit box and `r` uniform in `(0, R]`.
    pub fn subadditivity_defect(&self, sample_count: usize, box_radius: f64, seed: u64) -> Result<f64> {
        if !matches!(self.filtration.kind(), FiltrationKind::LowerCentral) {
            return Err(Error::InvalidGauge("subadditivity is defined for the lower central norm".into()));
        }
        let bch = Bch::new(&self.alg)?;
        let mut ws = bch.scratch();
        let d = self.alg.dim();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut prod = vec![0.0; d];
        let mut worst = f64::NEG_INFINITY;
        let draw = |rng: &mut ChaCha8Rng, k: usize| -> Vec<f64> {
            if k % 2 == 0 {
                (0..d).map(|_| rng.random_range(-box_radius..=box_radius)).collect()
            } else {
                let b = AlgVector::new((0..d).map(|_| rng.random_range(-1.0..=1.0)).collect());
                let r = box_radius * (1.0 - rng.random::<f64>());
                dilate(&self.filtration, r, &b).expect("positive radius").into_vec()
            }
        };
        for k in 0..sample_count.max(1) {
            let u = draw(&mut rng, k);
            let v = draw(&mut rng, k);
            bch.product_into(&u, &v, &mut prod, &mut ws);
            let defect = self.eval_slice(&prod) - self.eval_slice(&u) - self.eval_slice(&v);
            worst = worst.max(defect);
        }
        Ok(worst)
    }

    pub fn descriptor(&self) -> GaugeDescriptor {
        GaugeDescriptor {
            mode: self.mode,
            filtration: self.filtration.kind().clone(),
            layer_dims: self.filtration.layer_dims(),
            lower_layer_dims: self.lower.layer_dims(),
            kappa: self.kappa.clone(),
            layer_gauges: self.gauges.clone(),
            fallback_layers: self.fallback_layers.clone(),
            bilinearity_bound: self.bilinearity_bound,
        }
    }

    /// Hex SHA-256 of the descriptor's JSON form.
    pub fn descriptor_hash(&self) -> String {
        let bytes = serde_json::to_vec(&self.descriptor()).expect("descriptor serializes");
        Sha256::digest(&bytes).iter().map(|b| format!("{b:02x}")).collect()
    }
}

/// Adapted dilation: multiplies the weight-`i` component by `r^i`.
pub fn dilate(filt: &Filtration, r: f64, x: &AlgVector) -> Result<AlgVector> {
    if !(r > 0.0) {
        return Err(Error::NonPositiveDilation(r));
    }
    let parts = filt.layer_project(x)?;
    let mut out = AlgVector::zeros(x.dim());
    for (i, p) in parts.iter().enumerate() {
        out += &p.scale(r.powi(i as i32 + 1));
    }
    Ok(out)
}
