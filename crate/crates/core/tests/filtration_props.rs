//! Weighted filtrations for random drifts on every preset algebra.

use nalgebra::DVector;
use nilwalk_core::lie::{presets, AlgVector, Filtration, NilpotentAlgebra};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const TOL: f64 = 1e-10;

fn algebras() -> Vec<(&'static str, NilpotentAlgebra)> {
    vec![
        ("heisenberg", presets::heisenberg()),
        ("filiform4", presets::filiform4()),
        ("engel5", presets::engel5()),
        ("abelian3", presets::abelian(3)),
    ]
}

fn random_v(rng: &mut ChaCha8Rng, alg: &NilpotentAlgebra) -> AlgVector {
    let d = alg.dim();
    match rng.random_range(0..4) {
        // drift inside the derived algebra
        0 => {
            let lc = Filtration::lower_central_series(alg);
            let g2 = lc.ideal(2);
            if g2.is_zero() {
                AlgVector::zeros(d)
            } else {
                let c = DVector::from_fn(g2.dim(), |_, _| rng.random_range(-1.0..1.0));
                AlgVector::from_dvector(&(g2.basis() * c))
            }
        }
        // a single basis direction
        1 => AlgVector::basis(d, rng.random_range(0..d)).scale(rng.random_range(0.5..3.0)),
        _ => AlgVector::new((0..d).map(|_| rng.random_range(-2.0..2.0)).collect()),
    }
}

#[test]
fn invariants_hold_for_random_drifts() {
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    for (name, alg) in algebras() {
        for _ in 0..100 {
            let v = random_v(&mut rng, &alg);
            let f = Filtration::weighted(&alg, &v).unwrap();
            let inv = f.invariants(&alg);
            assert!(inv.depth_in_range, "{name}: depth {} step {}", inv.depth, inv.step);
            assert!(inv.max_residual() <= TOL, "{name}: {inv:?}");
        }
    }
}

#[test]
fn heisenberg_e1_weights_center_three() {
    let h = presets::heisenberg();
    let f = Filtration::weighted(&h, &h.basis_vector(0)).unwrap();
    assert_eq!(f.depth(), 3);
    assert!(f.layer(3).residual(&h.basis_vector(2).to_dvector()) < TOL);
    assert_eq!(f.layer(2).dim(), 0);
}

#[test]
fn only_class_mod_derived_matters() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for (name, alg) in algebras() {
        let lc = Filtration::lower_central_series(&alg);
        let g2 = lc.ideal(2);
        for _ in 0..20 {
            let v = random_v(&mut rng, &alg);
            let mut w = v.to_dvector();
            if !g2.is_zero() {
                w += g2.basis() * DVector::from_fn(g2.dim(), |_, _| rng.random_range(-5.0..5.0));
            }
            let a = Filtration::weighted(&alg, &v).unwrap();
            let b = Filtration::weighted(&alg, &AlgVector::from_dvector(&w)).unwrap();
            assert_eq!(a.depth(), b.depth(), "{name}");
            for i in 1..=a.depth() {
                assert!(a.ideal(i).same_as(&b.ideal(i), 1e-9), "{name} weight {i}");
            }
        }
    }
}

/// Right-nested bracket of factors with weights 2 for `v` and `i` for a
/// random element of `n(i)` lands in `n(p)` with `p` the weight sum.
#[test]
fn iterated_brackets_respect_weights() {
    let mut rng = ChaCha8Rng::seed_from_u64(23);
    for (name, alg) in algebras() {
        let d = alg.dim();
        for _ in 0..50 {
            let v = random_v(&mut rng, &alg);
            let f = Filtration::weighted(&alg, &v).unwrap();
            let c = f.depth();
            let m = rng.random_range(2..=4);
            let mut acc: Option<DVector<f64>> = None;
            let mut weight = 0;
            for _ in 0..m {
                let (x, w) = if rng.random_bool(0.3) {
                    (v.to_dvector(), 2)
                } else {
                    let i = rng.random_range(1..=c);
                    let ideal = f.ideal(i);
                    if ideal.is_zero() {
                        (DVector::zeros(d), i)
                    } else {
                        let co = DVector::from_fn(ideal.dim(), |_, _| rng.random_range(-1.0..1.0));
                        (ideal.basis() * co, i)
                    }
                };
                weight += w;
                acc = Some(match acc {
                    None => x,
                    Some(inner) => {
                        let mut out = vec![0.0; d];
                        alg.bracket_into(x.as_slice(), inner.as_slice(), &mut out);
                        DVector::from_vec(out)
                    }
                });
            }
            let z = acc.unwrap();
            let target = f.ideal(weight);
            assert!(target.residual(&z) <= 1e-10 * (1.0 + z.norm()), "{name}: weight {weight}");
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn layer_components_reconstruct(coords in proptest::collection::vec(-10.0f64..10.0, 5),
                                    v in proptest::collection::vec(-2.0f64..2.0, 5)) {
        let alg = presets::engel5();
        let f = Filtration::weighted(&alg, &AlgVector::new(v)).unwrap();
        let x = AlgVector::new(coords);
        let parts = f.layer_project(&x).unwrap();
        let sum = parts.iter().fold(AlgVector::zeros(5), |acc, p| &acc + p);
        prop_assert!(sum.max_abs_diff(&x) < 1e-12);
        for (i, p) in parts.iter().enumerate() {
            prop_assert!(f.layer(i + 1).residual(&p.to_dvector()) < 1e-12);
        }
    }

    #[test]
    fn lower_central_invariants(seed in 0u64..200) {
        let _ = seed;
        for (_, alg) in algebras() {
            let f = Filtration::lower_central_series(&alg);
            let inv = f.invariants(&alg);
            prop_assert_eq!(inv.depth, alg.step());
            prop_assert!(inv.max_residual() <= TOL);
        }
    }
}
