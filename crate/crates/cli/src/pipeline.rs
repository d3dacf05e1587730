//! validate → build gauge → derive constants → simulate → fit → emit.

use std::collections::BTreeMap;
use std::fmt::Write;

use nilwalk_core::experiments::{algebra_preset, step_preset};
use nilwalk_core::format::{fmt_f64, parse_walk_csv, walk_csv};
use nilwalk_core::lie::{Bch, Filtration, NilpotentAlgebra};
use nilwalk_core::norms::HomogeneousNorm;
use nilwalk_core::semidirect::{FiniteActionGroup, StepDistribution};
use nilwalk_core::splitting::{delta_ratio_scan, scan_preset};
use nilwalk_core::stats::{clopper_pearson, fit_alpha, tail_curve, FitOptions};
use nilwalk_core::walker::{monte_carlo, SampleMatrix, WalkConfig, DEFAULT_MAX_STEPS};
use nilwalk_core::Error as CoreError;
use serde_json::json;

use crate::config::{
    ExperimentConfig, Kind, AUTO_FIT_REPS, DEFAULT_BOOTSTRAP, DEFAULT_CHECK_PAIRS, DEFAULT_FIT_MIN_N,
};
use crate::error::CliError;
use crate::manifest::{sha256_hex, Artifacts, ConstantAtomBlock, DerivedBlock, GaugeBlock, Manifest};
use crate::svg::tail_plot;

/// Points per checkpoint in the tail CSV.
const TAIL_POINTS: usize = 64;
const FILTRATION_TOL: f64 = 1e-10;

pub struct Outcome {
    pub manifest: Manifest,
    pub artifacts: Artifacts,
    /// Artifacts are still written; the process then exits with code 4.
    pub failure: Option<String>,
}

pub fn run(cfg: &ExperimentConfig) -> Result<Outcome, CliError> {
    cfg.check()?;
    let mut out = Outcome {
        manifest: Manifest::new(cfg),
        artifacts: Artifacts::default(),
        failure: None,
    };
    match cfg.kind {
        Kind::AlgebraCheck => algebra_check(cfg, &mut out)?,
        Kind::Walk => walk(cfg, &mut out)?,
        Kind::Fit => fit(cfg, &mut out)?,
        Kind::SplitScan => split_scan(cfg, &mut out)?,
    }
    out.manifest.files = out.artifacts.entries();
    Ok(out)
}

fn json_bytes<T: serde::Serialize>(v: &T) -> Vec<u8> {
    let mut b = serde_json::to_vec_pretty(v).expect("serializable");
    b.push(b'\n');
    b
}

fn algebra_of(cfg: &ExperimentConfig) -> Result<NilpotentAlgebra, CliError> {
    Ok(match (&cfg.preset, &cfg.algebra) {
        (Some(p), _) => algebra_preset(p)?,
        (None, Some(doc)) => NilpotentAlgebra::from_doc(doc)?,
        (None, None) => return Err(CliError::Schema("no algebra given".into())),
    })
}

fn algebra_check(cfg: &ExperimentConfig, out: &mut Outcome) -> Result<(), CliError> {
    let alg = algebra_of(cfg)?;
    let mut failures = Vec::new();
    let validation = alg.validate();
    failures.extend(validation.failures.iter().cloned());

    let lower = Filtration::lower_central_series(&alg);
    let lower_inv = lower.invariants(&alg);
    if lower_inv.max_residual() > FILTRATION_TOL || !lower_inv.depth_in_range {
        failures.push(format!("lower central invariants: residual {:e}", lower_inv.max_residual()));
    }
    let weighted = Filtration::weighted(&alg, &alg.basis_vector(0))?;
    let weighted_inv = weighted.invariants(&alg);
    if weighted_inv.max_residual() > FILTRATION_TOL || !weighted_inv.depth_in_range {
        failures.push(format!("weighted invariants: residual {:e}", weighted_inv.max_residual()));
    }

    let gauge = cfg.gauge_params();
    let norm = HomogeneousNorm::build(&alg, &lower, &gauge)?;
    let bilinearity = norm.bilinearity_constant(DEFAULT_CHECK_PAIRS, cfg.seed);
    let subadditivity = norm.subadditivity_defect(DEFAULT_CHECK_PAIRS, 1.0, cfg.seed)?;
    if bilinearity > 1.0 + 1e-9 {
        failures.push(format!("sampled bilinearity {bilinearity} exceeds 1"));
    }
    if subadditivity > 1e-9 {
        failures.push(format!("subadditivity defect {subadditivity:e}"));
    }
    let bch = Bch::new(&alg)?;

    let report = json!({
        "algebra": alg.to_doc(),
        "validation": validation,
        "lower_central": {"layer_dims": lower.layer_dims(), "invariants": lower_inv},
        "weighted_e1": {"layer_dims": weighted.layer_dims(), "invariants": weighted_inv},
        "euclidean_bilinearity": alg.euclidean_bilinearity(),
        "gauge": GaugeBlock::of(&norm),
        "sampled_bilinearity": bilinearity,
        "subadditivity_defect": subadditivity,
        "check_pairs": DEFAULT_CHECK_PAIRS,
        "bch_terms": bch.describe(),
        "failures": failures,
    });
    out.artifacts.add("algebra_report.json", json_bytes(&report));
    out.manifest.gauge = Some(GaugeBlock::of(&norm));
    out.manifest.summary = json!({
        "dim": alg.dim(),
        "step": alg.step(),
        "passed": failures.is_empty(),
        "sampled_bilinearity": bilinearity,
        "subadditivity_defect": subadditivity,
    });
    if !failures.is_empty() {
        out.failure = Some(failures.join("; "));
    }
    Ok(())
}

fn step_distribution(cfg: &ExperimentConfig) -> Result<StepDistribution, CliError> {
    Ok(match (&cfg.preset, &cfg.mu) {
        (Some(p), _) => step_preset(p, cfg.eps)?,
        (None, Some(doc)) => {
            let alg = algebra_of(&ExperimentConfig { preset: None, ..cfg.clone() })?;
            StepDistribution::from_doc(&alg, doc)?
        }
        (None, None) => return Err(CliError::Schema("no step distribution given".into())),
    })
}

fn walk(cfg: &ExperimentConfig, out: &mut Outcome) -> Result<(), CliError> {
    let (n, reps) = (cfg.n.unwrap_or(1), cfg.reps.unwrap_or(1));
    // fail on the ceiling before paying for the gauge
    let ceiling = cfg.max_steps.map_or(DEFAULT_MAX_STEPS, u128::from);
    let requested = n as u128 * reps as u128;
    if requested > ceiling {
        return Err(CoreError::ResourceCeiling { requested, ceiling }.into());
    }
    let mu = step_distribution(cfg)?;
    let mut wc = WalkConfig::adapted(&mu, &cfg.gauge_params(), n, reps, cfg.seed)?
        .with_checkpoints(cfg.checkpoint_list())
        .with_scaling(cfg.scaling.unwrap_or(0.5));
    wc.max_steps = ceiling;
    wc.validate()?;
    let m = monte_carlo(&wc)?;

    let gauge = GaugeBlock::of(&wc.norm);
    let header: Vec<(String, String)> = vec![
        ("source".into(), cfg.preset.clone().unwrap_or_else(|| "inline".into())),
        ("seed".into(), cfg.seed.to_string()),
        ("n".into(), n.to_string()),
        ("reps".into(), reps.to_string()),
        ("scaling".into(), fmt_f64(wc.scaling_exponent)),
        ("gauge_sha256".into(), gauge.hash.clone()),
        ("drift".into(), nilwalk_core::format::fmt_vec(wc.drift.as_slice())),
    ];
    out.artifacts.add("walk.csv", walk_csv(&header, &m).into_bytes());
    out.artifacts.add("layers.csv", layers_csv(&m).into_bytes());

    out.manifest.derived = Some(DerivedBlock {
        constants: mu.derived().clone(),
        conjugation_offset: wc.conjugation_offset,
        centred: mu.is_centred(),
    });
    out.manifest.gauge = Some(gauge);
    if mu.atoms().len() >= 2 {
        out.manifest.constant_atom = Some(constant_atom(&mu, &m, n));
    }
    let residual = m
        .samples
        .iter()
        .filter_map(|s| s.cross_check_residual)
        .fold(None, |a: Option<f64>, r| Some(a.map_or(r, |a| a.max(r))));
    let last = m.checkpoints.len() - 1;
    let mut summary = json!({
        "checkpoints": m.checkpoints,
        "median_scaled_max_at_n": nilwalk_core::stats::median(&m.normalized_column(last)),
        "cross_check_residual": residual,
    });

    if reps >= AUTO_FIT_REPS {
        let min_n = cfg.fit_min_n.unwrap_or(DEFAULT_FIT_MIN_N);
        let mut by_n: BTreeMap<u64, Vec<f64>> = BTreeMap::new();
        for (c, &cp) in m.checkpoints.iter().enumerate() {
            if cp >= min_n || c == last {
                by_n.insert(cp, m.normalized_column(c));
            }
        }
        summary["fit"] = fit_artifacts(cfg, &by_n, &mut out.artifacts)?;
    }
    out.manifest.summary = summary;
    Ok(())
}

/// Euclidean norms of the filtration layers of `y_n`:
/// `replicate,n,layer,norm` rows.
fn layers_csv(m: &SampleMatrix) -> String {
    let mut s = String::from("replicate,n,layer,norm\n");
    for smp in &m.samples {
        for (c, &n) in m.checkpoints.iter().enumerate() {
            for (l, v) in smp.layer_norms[c].iter().enumerate() {
                writeln!(s, "{},{},{},{}", smp.stream, n, l + 1, fmt_f64(*v)).unwrap();
            }
        }
    }
    s
}

fn constant_atom(mu: &StepDistribution, m: &SampleMatrix, n: u64) -> ConstantAtomBlock {
    let p = mu.atoms()[0].0;
    let reps = m.samples.len();
    let exact = p.powf(n as f64);
    let observed = m.ballistic_fraction(0);
    let hits = m.samples.iter().filter(|s| s.constant_atom == Some(0)).count();
    let sigma = (exact * (1.0 - exact) / reps as f64).sqrt();
    ConstantAtomBlock {
        atom: 0,
        p_atom: p,
        exact,
        observed,
        hits,
        reps,
        sigma,
        within_3sigma: (observed - exact).abs() <= 3.0 * sigma,
        clopper_pearson_95: clopper_pearson(hits, reps, 0.95),
    }
}

/// Writes `fit.json`, `tail.csv` and `tail.svg`; returns the summary block.
fn fit_artifacts(
    cfg: &ExperimentConfig,
    by_n: &BTreeMap<u64, Vec<f64>>,
    artifacts: &mut Artifacts,
) -> Result<serde_json::Value, CliError> {
    let opts = FitOptions {
        bootstrap: cfg.bootstrap.unwrap_or(DEFAULT_BOOTSTRAP),
        seed: cfg.seed,
        ..Default::default()
    };
    let fit = fit_alpha(by_n, &opts)?;
    artifacts.add("fit.json", json_bytes(&fit));

    let t_max = by_n.values().flatten().copied().fold(0.0, f64::max);
    let grid: Vec<f64> = (0..TAIL_POINTS).map(|i| t_max * i as f64 / (TAIL_POINTS - 1) as f64).collect();
    let mut csv = String::from("n,t,p_hat,ci_lo,ci_hi\n");
    let mut curves = Vec::new();
    for (&n, s) in by_n {
        let pts = tail_curve(s, &grid)?;
        for p in &pts {
            writeln!(csv, "{n},{},{},{},{}", fmt_f64(p.t), fmt_f64(p.p_hat), fmt_f64(p.ci_lo), fmt_f64(p.ci_hi)).unwrap();
        }
        curves.push((n, pts));
    }
    artifacts.add("tail.csv", csv.into_bytes());
    artifacts.add("tail.svg", tail_plot(&curves, &fit).into_bytes());
    Ok(json!({
        "alpha_moments": fit.alpha_moments,
        "alpha_moments_ci": fit.alpha_moments_ci,
        "alpha_tail": fit.alpha_tail,
        "alpha_tail_ci": fit.alpha_tail_ci,
        "flags": fit.flags,
        "ns": fit.ns,
    }))
}

fn fit(cfg: &ExperimentConfig, out: &mut Outcome) -> Result<(), CliError> {
    let path = cfg.input.as_ref().expect("checked");
    let bytes = std::fs::read(path).map_err(|e| CliError::io(path, e))?;
    let text = String::from_utf8(bytes.clone()).map_err(|e| CliError::Schema(format!("{}: {e}", path.display())))?;
    let table = parse_walk_csv(&text).map_err(|e| CliError::Schema(format!("{}: {e}", path.display())))?;
    let min_n = cfg.fit_min_n.unwrap_or(DEFAULT_FIT_MIN_N);
    let mut by_n = table.scaled_by_n();
    let largest = by_n.keys().next_back().copied();
    by_n.retain(|&n, _| n >= min_n || Some(n) == largest);
    if by_n.is_empty() {
        return Err(CliError::Schema(format!("{}: no rows", path.display())));
    }
    let mut summary = fit_artifacts(cfg, &by_n, &mut out.artifacts)?;
    summary["input_sha256"] = json!(sha256_hex(&bytes));
    summary["input_header"] = json!(table.header.iter().cloned().collect::<BTreeMap<_, _>>());
    out.manifest.summary = summary;
    Ok(())
}

fn split_scan(cfg: &ExperimentConfig, out: &mut Outcome) -> Result<(), CliError> {
    let group = match (&cfg.preset, &cfg.group) {
        (Some(p), _) => scan_preset(p)?,
        (None, Some(doc)) => FiniteActionGroup::from_doc(doc)?,
        (None, None) => return Err(CliError::Schema("no group given".into())),
    };
    let reps = cfg.reps.unwrap_or(1);
    let ceiling = cfg.max_steps.map_or(DEFAULT_MAX_STEPS, u128::from);
    let requested = reps as u128 * (group.order() as u128).pow(2);
    if requested > ceiling {
        return Err(CoreError::ResourceCeiling { requested, ceiling }.into());
    }
    let r = delta_ratio_scan(&group, reps, cfg.seed)?;
    let mut csv = String::from("replicate,delta_raw,Delta,ratio\n");
    for row in &r.rows {
        writeln!(
            csv,
            "{},{},{},{}",
            row.replicate,
            fmt_f64(row.delta_raw),
            fmt_f64(row.big_delta),
            fmt_f64(row.ratio)
        )
        .unwrap();
    }
    out.artifacts.add("scan.csv", csv.into_bytes());
    out.artifacts.add(
        "scan.json",
        json_bytes(&json!({
            "c_hat": r.c_hat,
            "sections_skipped": r.sections_skipped,
            "histogram": r.histogram,
            "argmin": r.argmin,
        })),
    );
    out.manifest.summary = json!({
        "c_hat": r.c_hat,
        "order": group.order(),
        "dim": group.dim(),
        "rows": r.rows.len(),
        "sections_skipped": r.sections_skipped,
    });
    Ok(())
}
