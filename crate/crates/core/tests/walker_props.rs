//! Walker against exact enumeration, the plain group law, the doubling
//! identity and classical martingale bounds.

use nalgebra::{DMatrix, DVector};
use nilwalk_core::experiments::step_preset;
use nilwalk_core::lie::{presets, AlgVector};
use nilwalk_core::norms::GaugeParams;
use nilwalk_core::semidirect::{FiniteActionGroup, GroupElement, Semidirect, StepDistribution};
use nilwalk_core::stats::{ks_two_sample, mean_se};
use nilwalk_core::walker::{doubling_compose, monte_carlo, recentre, simulate_walk, WalkConfig, Walker};

fn gauge() -> GaugeParams {
    GaugeParams {
        calibration_pairs: 5_000,
        ..Default::default()
    }
}

/// `H ⋊ Z/2` with the flip `e2 -> -e2, e3 -> -e3`; drift along `e1`, and a
/// nonzero `w_mu` so the measure is conjugated before walking.
fn heisenberg_flip() -> StepDistribution {
    let h = presets::heisenberg();
    let flip = DMatrix::from_diagonal(&DVector::from_column_slice(&[1.0, -1.0, -1.0]));
    let q = FiniteActionGroup::new(vec![DMatrix::identity(3, 3), flip]).unwrap();
    let g = Semidirect::new(&h, q).unwrap();
    let e = |x: Vec<f64>, k| GroupElement::new(AlgVector::new(x), k);
    StepDistribution::new(
        g,
        vec![(0.5, e(vec![1.0, 1.0, 0.0], 0)), (0.25, e(vec![1.0, 0.5, 0.0], 1)), (0.25, e(vec![0.0, -1.0, 0.3], 0))],
    )
    .unwrap()
}

#[test]
fn two_step_maximum_by_enumeration() {
    // the four equally likely paths of the ±1 walk
    let mut exact = 0.0;
    let mut second = 0.0;
    for a in [1.0f64, -1.0] {
        for b in [1.0f64, -1.0] {
            let m = a.abs().max((a + b).abs());
            exact += m / 4.0;
            second += m * m / 4.0;
        }
    }
    assert_eq!(exact, 1.5);
    let reps = 100_000;
    let mu = step_preset("abelian-srw", None).unwrap();
    let cfg = WalkConfig::adapted(&mu, &gauge(), 2, reps, 11).unwrap();
    let m = monte_carlo(&cfg).unwrap().running_max_column(0);
    let (mean, _) = mean_se(&m);
    let sigma = ((second - exact * exact) / reps as f64).sqrt();
    assert!((mean - exact).abs() <= 3.0 * sigma, "{mean} vs {exact} ± {sigma}");
    assert!(m.iter().all(|&x| x == 1.0 || x == 2.0));
}

#[test]
fn ballistic_probability() {
    let eps = 0.01;
    let n = 50;
    let reps = 100_000;
    let mu = step_preset("r1-flip-eps", Some(eps)).unwrap();
    let cfg = WalkConfig::adapted(&mu, &gauge(), n, reps, 5).unwrap();
    let mc = monte_carlo(&cfg).unwrap();
    let exact = (1.0 - eps).powi(n as i32);
    assert!((exact - 0.605).abs() < 5e-4);
    let sigma = (exact * (1.0 - exact) / reps as f64).sqrt();
    let observed = mc.ballistic_fraction(0);
    assert!((observed - exact).abs() <= 3.0 * sigma, "{observed} vs {exact}");
    // the ballistic walks end at z = (n, id)
    for s in mc.samples.iter().filter(|s| s.constant_atom == Some(0)).take(100) {
        assert!((s.final_z.as_slice()[0] - n as f64).abs() < 1e-12);
        assert_eq!(s.final_q, 0);
    }
}

/// Replays the atoms drawn by the walker through the plain group law and
/// compares `w_n` and `y_n = z_n * (-n v)` with the incremental recursion.
fn check_against_group_law(mu: &StepDistribution, steps: u64, streams: u64) {
    let cfg = WalkConfig::adapted(mu, &gauge(), steps, streams as usize, 3).unwrap();
    let walker = Walker::new(&cfg).unwrap();
    let group = cfg.mu.group();
    for stream in 0..streams {
        let sample = walker.simulate(stream);
        let mut w = group.identity();
        for j in walker.atom_sequence(stream, steps) {
            w = group.multiply(&w, &cfg.mu.atoms()[j].1);
        }
        let y = recentre(group.bch(), &w.xi, steps, &cfg.drift).unwrap();
        let scale = 1.0 + w.xi.as_slice().iter().fold(0.0f64, |a, b| a.max(b.abs()));
        assert_eq!(w.kappa, sample.final_q);
        assert!(w.xi.max_abs_diff(&sample.final_z) <= 1e-8 * scale, "{:?} vs {:?}", w.xi, sample.final_z);
        assert!(y.max_abs_diff(&sample.final_y) <= 1e-8 * scale, "{y:?} vs {:?}", sample.final_y);
    }
}

#[test]
fn incremental_recursion_matches_group_law() {
    for name in ["heisenberg-srw", "heisenberg-drift", "filiform4-srw", "engel5-srw"] {
        check_against_group_law(&step_preset(name, None).unwrap(), 1_000, 5);
    }
    check_against_group_law(&heisenberg_flip(), 1_000, 5);
    check_against_group_law(&step_preset("r2-c4", None).unwrap(), 1_000, 2);
}

#[test]
fn cross_check_mode_reports_small_residuals() {
    for mu in [step_preset("heisenberg-drift", None).unwrap(), heisenberg_flip()] {
        let mut cfg = WalkConfig::adapted(&mu, &gauge(), 1_000, 8, 4)
            .unwrap()
            .with_checkpoints(vec![10, 100, 500, 1_000]);
        cfg.cross_check = true;
        for s in monte_carlo(&cfg).unwrap().samples {
            assert!(s.cross_check_residual.unwrap() < 1e-9);
        }
    }
}

/// `(y_2n, q_2n)` from one walk against the composition of two
/// independent `n`-step walks, compared by two-sample KS on `|y_2n|`.
fn doubling_ks(mu: &StepDistribution, n: u64, reps: usize) -> f64 {
    let long = WalkConfig::adapted(mu, &gauge(), 2 * n, reps, 100).unwrap();
    let a = WalkConfig { seed: 200, ..WalkConfig::adapted(mu, &gauge(), n, reps, 0).unwrap() };
    let b = WalkConfig { seed: 300, ..a.clone() };
    let direct: Vec<f64> = monte_carlo(&long).unwrap().samples.iter().map(|s| s.norm_at[0]).collect();
    let first = monte_carlo(&a).unwrap();
    let second = monte_carlo(&b).unwrap();
    let group = a.mu.group();
    let composed: Vec<f64> = first
        .samples
        .iter()
        .zip(&second.samples)
        .map(|(s, t)| {
            let (y, _) = doubling_compose(
                group.bch(),
                group.q(),
                &a.drift,
                n,
                (&s.final_y, s.final_q),
                (&t.final_y, t.final_q),
            )
            .unwrap();
            a.norm.hom_norm(&y).unwrap()
        })
        .collect();
    let (_, p) = ks_two_sample(&direct, &composed).unwrap();
    p
}

#[test]
fn doubling_identity_in_distribution() {
    for (name, mu) in [
        ("heisenberg-srw", step_preset("heisenberg-srw", None).unwrap()),
        ("heisenberg-drift", step_preset("heisenberg-drift", None).unwrap()),
        ("heisenberg-flip", heisenberg_flip()),
    ] {
        let p = doubling_ks(&mu, 64, 10_000);
        assert!(p > 0.01, "{name}: KS p = {p}");
    }
}

#[test]
fn doubling_identity_is_exact_pathwise() {
    // composing the two halves of one path reproduces the path
    let mu = heisenberg_flip();
    let n = 40;
    let cfg = WalkConfig::adapted(&mu, &gauge(), 2 * n, 1, 8).unwrap();
    let walker = Walker::new(&cfg).unwrap();
    let group = cfg.mu.group();
    let atoms = walker.atom_sequence(0, 2 * n);
    let half = |js: &[usize]| {
        let mut w = group.identity();
        for &j in js {
            w = group.multiply(&w, &cfg.mu.atoms()[j].1);
        }
        (recentre(group.bch(), &w.xi, n, &cfg.drift).unwrap(), w.kappa)
    };
    let (y1, q1) = half(&atoms[..n as usize]);
    let (y2, q2) = half(&atoms[n as usize..]);
    let (y, q) = doubling_compose(group.bch(), group.q(), &cfg.drift, n, (&y1, q1), (&y2, q2)).unwrap();
    let full = walker.simulate(0);
    assert_eq!(q, full.final_q);
    assert!(y.max_abs_diff(&full.final_y) < 1e-9);
}

#[test]
fn centred_abelian_projection_is_a_martingale() {
    let reps = 10_000;
    for name in ["heisenberg-srw", "filiform4-srw"] {
        let mu = step_preset(name, None).unwrap();
        for n in [64u64, 256, 1_024] {
            let cfg = WalkConfig::adapted(&mu, &gauge(), n, reps, n).unwrap();
            let mc = monte_carlo(&cfg).unwrap();
            for coord in 0..2 {
                let xs: Vec<f64> = mc.samples.iter().map(|s| s.final_y.as_slice()[coord]).collect();
                let (mean, se) = mean_se(&xs);
                assert!(mean.abs() <= 4.0 * se, "{name} n={n}: mean {mean} se {se}");
                // each coordinate moves by ±1 with probability 1/2: variance n/2
                let sd = se * (reps as f64).sqrt();
                assert!((sd / (n as f64 / 2.0).sqrt() - 1.0).abs() < 0.05, "{name} n={n}: sd {sd}");
            }
        }
    }
}

#[test]
fn maximal_azuma_bound() {
    // P(M_n / sqrt(n) >= 3) <= 4 exp(-9/2) for the ±1 walk
    let mu = step_preset("abelian-srw", None).unwrap();
    let n = 10_000;
    let reps = 10_000;
    let cfg = WalkConfig::adapted(&mu, &gauge(), n, reps, 21).unwrap();
    let col = monte_carlo(&cfg).unwrap().normalized_column(0);
    let k = col.iter().filter(|&&x| x >= 3.0).count();
    let bound = 4.0 * (-4.5f64).exp();
    let (_, hi) = nilwalk_core::stats::clopper_pearson(k, reps, 0.95);
    let p = k as f64 / reps as f64;
    assert!(p <= bound, "{p} > {bound} (upper CI {hi})");
}

#[test]
fn independent_of_thread_count() {
    let mu = step_preset("heisenberg-drift", None).unwrap();
    let cfg = WalkConfig::adapted(&mu, &gauge(), 300, 64, 13)
        .unwrap()
        .with_checkpoints(vec![4, 16, 64, 256, 300]);
    let run = |threads| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap()
            .install(|| monte_carlo(&cfg).unwrap())
    };
    let one = run(1);
    assert_eq!(one, run(4));
    assert_eq!(one.samples[17], simulate_walk(&cfg, 17).unwrap());
}

#[test]
fn running_max_dominates_and_grows() {
    let mu = heisenberg_flip();
    let cps: Vec<u64> = (1..=100).map(|k| 3 * k).collect();
    let cfg = WalkConfig::adapted(&mu, &gauge(), 300, 50, 2).unwrap().with_checkpoints(cps);
    for s in monte_carlo(&cfg).unwrap().samples {
        assert!(s.running_max.windows(2).all(|w| w[0] <= w[1]));
        assert!(s.running_max.iter().zip(&s.norm_at).all(|(m, x)| m >= x));
    }
}

#[test]
fn essential_average_example_walk() {
    // r2-c4 conjugated by y = (1/2, 1/2) has abelianized mean 0
    let mu = step_preset("r2-c4", None).unwrap();
    let cfg = WalkConfig::adapted(&mu, &gauge(), 8, 1, 0).unwrap();
    assert!(cfg.drift.is_zero());
    assert!(cfg.mu.abelian_mean().norm() < 1e-10);
    let offset = cfg.conjugation_offset.unwrap();
    assert!((offset - 2.0 / 2f64.sqrt()).abs() < 1e-12);
    // four steps of the deterministic walk close up a square
    let s = simulate_walk(&WalkConfig { horizon: 4, checkpoints: vec![4], ..cfg }, 0).unwrap();
    assert!(s.final_z.norm() < 1e-12);
    assert_eq!(s.final_q, 0);
}
