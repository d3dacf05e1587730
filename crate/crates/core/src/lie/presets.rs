//! Named algebras used by the experiment presets and the tests.

use super::NilpotentAlgebra;

fn build(dim: usize, step: usize, brackets: &[(usize, usize, Vec<(usize, f64)>)]) -> NilpotentAlgebra {
    NilpotentAlgebra::from_brackets(dim, step, brackets).expect("preset algebra is well formed")
}

/// `<e1, e2, e3 | [e1, e2] = e3>`.
pub fn heisenberg() -> NilpotentAlgebra {
    build(3, 2, &[(0, 1, vec![(2, 1.0)])])
}

/// `<e1..e4 | [e1, e2] = e3, [e1, e3] = e4>`.
pub fn filiform4() -> NilpotentAlgebra {
    build(4, 3, &[(0, 1, vec![(2, 1.0)]), (0, 2, vec![(3, 1.0)])])
}

/// Free step-3 algebra on two generators:
/// `[e1, e2] = e3, [e1, e3] = e4, [e2, e3] = e5`.
pub fn engel5() -> NilpotentAlgebra {
    build(
        5,
        3,
        &[(0, 1, vec![(2, 1.0)]), (0, 2, vec![(3, 1.0)]), (1, 2, vec![(4, 1.0)])],
    )
}

pub fn abelian(dim: usize) -> NilpotentAlgebra {
    build(dim, 1, &[])
}

pub fn by_name(name: &str) -> Option<NilpotentAlgebra> {
    match name {
        "heisenberg" => Some(heisenberg()),
        "filiform4" => Some(filiform4()),
        "engel5" => Some(engel5()),
        _ => name
            .strip_prefix("abelian")
            .and_then(|d| d.parse().ok())
            .filter(|&d| d > 0)
            .map(abelian),
    }
}
