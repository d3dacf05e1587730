//! Fixed sets, the two defect functionals and the ratio scan.

use nalgebra::{DMatrix, DVector};
use nilwalk_core::semidirect::FiniteActionGroup;
use nilwalk_core::splitting::{
    big_delta, cyclic2, delta, delta_ratio_scan, dihedral2, fix_decompose, fix_set, rotation2, sample_sigma,
    IsometryElement, Lift, LiftDoc,
};
use nilwalk_core::Error;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn v(x: &[f64]) -> DVector<f64> {
    DVector::from_column_slice(x)
}

/// Signed permutation matrices on `R^3`, order 48.
fn hyperoctahedral3() -> FiniteActionGroup {
    let cycle = DMatrix::from_row_slice(3, 3, &[0.0, 0.0, 1.0, 1.0, 0.0, 0.0, 0.0, 1.0, 0.0]);
    let swap = DMatrix::from_row_slice(3, 3, &[0.0, 1.0, 0.0, 1.0, 0.0, 0.0, 0.0, 0.0, 1.0]);
    let flip = DMatrix::from_diagonal(&v(&[-1.0, 1.0, 1.0]));
    FiniteActionGroup::generated_by(&[cycle, swap, flip], 48).unwrap()
}

fn order_of(a: &DMatrix<f64>) -> usize {
    let d = a.nrows();
    let mut p = a.clone();
    let mut k = 1;
    while (&p - DMatrix::identity(d, d)).amax() > 1e-9 {
        p = &p * a;
        k += 1;
    }
    k
}

fn random_vec(rng: &mut ChaCha8Rng, d: usize, r: f64) -> DVector<f64> {
    DVector::from_fn(d, |_, _| rng.random_range(-r..r))
}

/// A random isometry of the plane, orientation reversing half the time.
fn random_isometry2(rng: &mut ChaCha8Rng) -> IsometryElement {
    let mut rot = rotation2(rng.random_range(0.0..std::f64::consts::TAU));
    if rng.random_bool(0.5) {
        rot *= DMatrix::from_diagonal(&v(&[1.0, -1.0]));
    }
    IsometryElement::new(random_vec(rng, 2, 3.0), rot).unwrap()
}

/// A section with common fixed point `x0`: the linear lift conjugated by
/// the translation to `x0`.
fn section_at(group: &FiniteActionGroup, x0: &DVector<f64>) -> Lift {
    let t = (0..group.order()).map(|f| x0 - group.matrix(f) * x0).collect();
    Lift::new(group.clone(), t).unwrap()
}

/// Least squares residual of the stacked system `(A_f - I) x = -u_f`,
/// which vanishes exactly when the fixed sets share a point.
fn stacked_residual(lift: &Lift) -> f64 {
    let d = lift.group().dim();
    let n = lift.group().order();
    let mut a = DMatrix::zeros(n * d, d);
    let mut b = DVector::zeros(n * d);
    for (f, g) in lift.elements().iter().enumerate() {
        a.view_mut((f * d, 0), (d, d)).copy_from(&(&g.rotation - DMatrix::identity(d, d)));
        b.rows_mut(f * d, d).copy_from(&(-&g.translation));
    }
    let x = a.clone().svd(true, true).solve(&b, 1e-10).unwrap();
    (a * x - b).norm()
}

fn is_closed(lift: &Lift, tol: f64) -> bool {
    let n = lift.group().order();
    (0..n).all(|a| {
        (0..n).all(|b| {
            let ab = lift.group().mul(a, b);
            lift.element(a).compose(lift.element(b)).max_abs_diff(lift.element(ab)) <= tol
        })
    })
}

#[test]
fn fix_decompose_commutes_and_has_a_fixed_point() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for group in [dihedral2(4), dihedral2(3), cyclic2(6), hyperoctahedral3()] {
        let d = group.dim();
        for _ in 0..200 {
            let f = rng.random_range(0..group.order());
            let a = group.matrix(f).clone();
            let g = IsometryElement::new(random_vec(&mut rng, d, 5.0), a.clone()).unwrap();
            let (tau, gp) = fix_decompose(&g, order_of(&a)).unwrap();
            let t = IsometryElement::translation_by(tau);
            assert!(t.compose(&gp).max_abs_diff(&g) < 1e-9);
            assert!(gp.compose(&t).max_abs_diff(&g) < 1e-9);
            let fx = fix_set(&gp).expect("g' has a fixed point");
            assert!((gp.apply(&fx.point) - &fx.point).amax() < 1e-9);
        }
    }
}

#[test]
fn fixed_sets_are_fixed() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let group = hyperoctahedral3();
    for _ in 0..200 {
        let lift = sample_sigma(&group, &mut rng).unwrap();
        for g in lift.elements() {
            let fx = fix_set(g).unwrap();
            let dims = 3 - (&g.rotation - DMatrix::identity(3, 3)).rank(1e-9);
            assert_eq!(fx.dim(), dims);
            let x = fx.project(&random_vec(&mut rng, 3, 4.0));
            assert!((g.apply(&x) - &x).amax() < 1e-9);
        }
    }
}

#[test]
fn rotation_about_a_point() {
    let g = IsometryElement::new(v(&[1.0, 0.0]), rotation2(std::f64::consts::FRAC_PI_2)).unwrap();
    let fx = fix_set(&g).unwrap();
    assert_eq!(fx.dim(), 0);
    assert!((&fx.point - v(&[0.5, 0.5])).amax() < 1e-12);
}

#[test]
fn glide_reflection_splits_into_translation_and_reflection() {
    let refl = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, -1.0]);
    let (a, b) = (2.5, -1.0);
    let g = IsometryElement::new(v(&[a, b]), refl).unwrap();
    let (tau, gp) = fix_decompose(&g, 2).unwrap();
    assert!((tau - v(&[a, 0.0])).amax() < 1e-12);
    let fx = fix_set(&gp).unwrap();
    assert_eq!(fx.dim(), 1);
    // the mirror is the line y = b / 2
    assert!((fx.point[1] - b / 2.0).abs() < 1e-12);
    assert!(fx.directions[(1, 0)].abs() < 1e-12);
}

#[test]
fn delta_vanishes_iff_common_fixed_point() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut zero = 0;
    let mut positive = 0;
    for group in [dihedral2(4), cyclic2(4), hyperoctahedral3()] {
        let d = group.dim();
        for i in 0..200 {
            // half the draws agree with a section on a subset and are
            // random on the rest
            let x0 = random_vec(&mut rng, d, 2.0);
            let base = section_at(&group, &x0);
            let keep_all = i % 2 == 0;
            let noisy = sample_sigma(&group, &mut rng).unwrap();
            let t: Vec<DVector<f64>> = (0..group.order())
                .map(|f| {
                    if keep_all || rng.random_bool(0.7) {
                        base.element(f).translation.clone()
                    } else {
                        noisy.element(f).translation.clone()
                    }
                })
                .collect();
            let lift = Lift::new(group.clone(), t).unwrap();
            let dl = delta(&lift).unwrap().value;
            let common = stacked_residual(&lift) <= 1e-9;
            if dl <= 1e-10 {
                zero += 1;
                assert!(common, "delta {dl} but no common point");
            } else {
                positive += 1;
                assert!(!common, "delta {dl} with a common point");
            }
            if keep_all {
                assert!(dl <= 1e-10);
                assert!(big_delta(&lift).unwrap() <= 1e-10);
            }
        }
    }
    assert!(zero > 100 && positive > 50, "{zero} {positive}");
}

#[test]
fn delta_minimizer_is_common_point_of_sections() {
    let group = dihedral2(4);
    let x0 = v(&[0.3, -1.7]);
    let dl = delta(&section_at(&group, &x0)).unwrap();
    assert!(dl.value < 1e-20);
    assert!((dl.minimizer - x0).amax() < 1e-12);
}

#[test]
fn vanishing_big_delta_is_closure() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for group in [dihedral2(4), dihedral2(3), cyclic2(4)] {
        for i in 0..100 {
            let lift = if i % 2 == 0 {
                section_at(&group, &random_vec(&mut rng, 2, 3.0))
            } else {
                sample_sigma(&group, &mut rng).unwrap()
            };
            let bd = big_delta(&lift).unwrap();
            assert_eq!(bd <= 1e-18, is_closed(&lift, 1e-9), "Delta {bd}");
        }
    }
}

#[test]
fn conjugation_invariance() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for group in [dihedral2(4), dihedral2(3), cyclic2(4)] {
        for _ in 0..100 {
            let lift = sample_sigma(&group, &mut rng).unwrap();
            let z = random_isometry2(&mut rng);
            let conj = lift.conjugate_by(&z).unwrap();
            let (d0, d1) = (delta(&lift).unwrap().value, delta(&conj).unwrap().value);
            let (b0, b1) = (big_delta(&lift).unwrap(), big_delta(&conj).unwrap());
            assert!((d0 - d1).abs() <= 1e-9 * (1.0 + d0), "{d0} {d1}");
            assert!((b0 - b1).abs() <= 1e-9 * (1.0 + b0), "{b0} {b1}");
        }
    }
}

#[test]
fn c4_centroid_example() {
    // id lifted to the identity; r and r^3 rotate about (1, 0), r^2 about the origin
    let c4 = cyclic2(4);
    let about = |f: usize, p: &[f64]| v(p) - c4.matrix(f) * v(p);
    let t = vec![v(&[0.0, 0.0]), about(1, &[1.0, 0.0]), about(2, &[0.0, 0.0]), about(3, &[1.0, 0.0])];
    let lift = Lift::new(c4, t).unwrap();
    let dl = delta(&lift).unwrap();
    // min 2|x - (1, 0)|^2 + |x|^2, attained at (2/3, 0)
    assert!((dl.value - 2.0 / 3.0).abs() < 1e-12, "{}", dl.value);
    assert!((dl.minimizer - v(&[2.0 / 3.0, 0.0])).amax() < 1e-12);
}

#[test]
fn z4_defect_example() {
    let c4 = cyclic2(4);
    let t = vec![v(&[0.0, 0.0]), v(&[1.0, 0.0]), v(&[0.0, 0.0]), v(&[0.0, 0.0])];
    let lift = Lift::new(c4, t).unwrap();
    // T(r) T(r) T(r^2)^{-1} translates by (1, 1)
    assert!(big_delta(&lift).unwrap() >= 2.0 - 1e-9);
}

#[test]
fn trivial_action_has_only_sections() {
    let err = delta_ratio_scan(&FiniteActionGroup::trivial(2), 50, 1).unwrap_err();
    assert!(matches!(err, Error::EmptyScan(_)));
}

#[test]
fn d4_scan_is_positive_and_stable() {
    let group = dihedral2(4);
    let a = delta_ratio_scan(&group, 10_000, 11).unwrap();
    let b = delta_ratio_scan(&group, 10_000, 12).unwrap();
    assert!(a.c_hat > 0.0 && b.c_hat > 0.0);
    assert!((a.c_hat / b.c_hat - 1.0).abs() <= 0.2, "{} {}", a.c_hat, b.c_hat);
    assert_eq!(a.rows.len() + a.sections_skipped, 10_000);
    assert_eq!(a.histogram.counts.iter().sum::<usize>(), a.rows.len());
    for r in &a.rows {
        assert!(r.delta_raw > 0.0 && r.big_delta >= a.c_hat);
    }
    // the reported minimiser is normalised and attains c_hat
    let argmin = Lift::from_doc(&a.argmin).unwrap();
    assert!((delta(&argmin).unwrap().value - 1.0).abs() < 1e-9);
    assert!((big_delta(&argmin).unwrap() - a.c_hat).abs() < 1e-9 * (1.0 + a.c_hat));
}

#[test]
fn scan_is_reproducible() {
    let group = dihedral2(3);
    let a = delta_ratio_scan(&group, 500, 7).unwrap();
    let b = delta_ratio_scan(&group, 500, 7).unwrap();
    assert_eq!(
        serde_json::to_string(&a.rows).unwrap(),
        serde_json::to_string(&b.rows).unwrap()
    );
}

#[test]
fn lift_doc_json_round_trip() {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let lift = sample_sigma(&hyperoctahedral3(), &mut rng).unwrap();
    let json = serde_json::to_string(&lift.to_doc()).unwrap();
    let back = Lift::from_doc(&serde_json::from_str::<LiftDoc>(&json).unwrap()).unwrap();
    for (x, y) in lift.elements().iter().zip(back.elements()) {
        assert_eq!(x, y);
    }
    let mut doc = lift.to_doc();
    doc.table[1][1] = 0;
    doc.table[1][2] = 0;
    assert!(Lift::from_doc(&doc).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn scaling_is_quadratic(seed in 0u64..10_000, lambda in 0.05f64..20.0) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let lift = sample_sigma(&dihedral2(4), &mut rng).unwrap();
        let s = lift.scaled(lambda);
        let (d0, d1) = (delta(&lift).unwrap().value, delta(&s).unwrap().value);
        let (b0, b1) = (big_delta(&lift).unwrap(), big_delta(&s).unwrap());
        let l2 = lambda * lambda;
        prop_assert!((d1 - l2 * d0).abs() <= 1e-9 * (1.0 + l2 * d0));
        prop_assert!((b1 - l2 * b0).abs() <= 1e-9 * (1.0 + l2 * b0));
    }

    #[test]
    fn samples_lie_in_sigma(seed in 0u64..10_000) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for group in [dihedral2(4), dihedral2(3), hyperoctahedral3()] {
            let lift = sample_sigma(&group, &mut rng).unwrap();
            prop_assert!(lift.in_sigma());
        }
    }
}
