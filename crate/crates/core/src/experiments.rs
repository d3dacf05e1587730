//! Named step distributions used by the experiments.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::lie::{presets, AlgVector, NilpotentAlgebra};
use crate::semidirect::{FiniteActionGroup, GroupElement, Semidirect, StepDistribution};

pub const STEP_PRESETS: [&str; 7] = [
    "heisenberg-srw",
    "heisenberg-drift",
    "filiform4-srw",
    "engel5-srw",
    "abelian-srw",
    "r2-c4",
    "r1-flip-eps",
];

pub const DEFAULT_EPS: f64 = 0.01;

fn trivial(alg: &NilpotentAlgebra) -> Result<Semidirect> {
    Semidirect::new(alg, FiniteActionGroup::trivial(alg.dim()))
}

fn atom(xi: Vec<f64>, kappa: usize) -> GroupElement {
    GroupElement::new(AlgVector::new(xi), kappa)
}

/// Uniform on `±e_1, ±e_2`.
fn srw2(alg: &NilpotentAlgebra) -> Result<StepDistribution> {
    let d = alg.dim();
    let mut atoms = Vec::with_capacity(4);
    for i in 0..2 {
        for s in [1.0, -1.0] {
            let mut xi = vec![0.0; d];
            xi[i] = s;
            atoms.push((0.25, atom(xi, 0)));
        }
    }
    StepDistribution::new(trivial(alg)?, atoms)
}

/// Builds the named step distribution. `eps` only affects `r1-flip-eps`.
///
/// * `heisenberg-drift`: `e1 ± e2` with probability ½ each, so `v_mu = e1`.
/// * `abelian-srw`: `±1` on the line.
/// * `r2-c4`: the point mass at `((1, 0), R90)` on `R^2 ⋊ C4`.
/// * `r1-flip-eps`: `(1-eps) δ_(1, id) + eps δ_(0, -1)` on `R ⋊ Z/2`.
pub fn step_preset(name: &str, eps: Option<f64>) -> Result<StepDistribution> {
    match name {
        "heisenberg-srw" => srw2(&presets::heisenberg()),
        "filiform4-srw" => srw2(&presets::filiform4()),
        "engel5-srw" => srw2(&presets::engel5()),
        "heisenberg-drift" => {
            let h = presets::heisenberg();
            StepDistribution::new(
                trivial(&h)?,
                vec![(0.5, atom(vec![1.0, 1.0, 0.0], 0)), (0.5, atom(vec![1.0, -1.0, 0.0], 0))],
            )
        }
        "abelian-srw" => {
            let a = presets::abelian(1);
            StepDistribution::new(trivial(&a)?, vec![(0.5, atom(vec![1.0], 0)), (0.5, atom(vec![-1.0], 0))])
        }
        "r2-c4" => {
            let a = presets::abelian(2);
            let r90 = DMatrix::from_row_slice(2, 2, &[0.0, -1.0, 1.0, 0.0]);
            let q = FiniteActionGroup::generated_by(&[r90], 4)?;
            StepDistribution::new(Semidirect::new(&a, q)?, vec![(1.0, atom(vec![1.0, 0.0], 1))])
        }
        "r1-flip-eps" => {
            let eps = eps.unwrap_or(DEFAULT_EPS);
            if !(eps > 0.0 && eps < 1.0) {
                return Err(Error::InvalidConfig(format!("eps must lie in (0, 1), got {eps}")));
            }
            let a = presets::abelian(1);
            let q = FiniteActionGroup::new(vec![DMatrix::identity(1, 1), DMatrix::from_element(1, 1, -1.0)])?;
            StepDistribution::new(
                Semidirect::new(&a, q)?,
                vec![(1.0 - eps, atom(vec![1.0], 0)), (eps, atom(vec![0.0], 1))],
            )
        }
        _ => Err(Error::UnknownPreset(name.into())),
    }
}

/// Algebra underlying a step preset, or an algebra preset name.
pub fn algebra_preset(name: &str) -> Result<NilpotentAlgebra> {
    match presets::by_name(name) {
        Some(a) => Ok(a),
        None => Ok(step_preset(name, None)?.group().algebra().clone()),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn all_presets_build() {
        for name in STEP_PRESETS {
            let mu = step_preset(name, None).unwrap();
            assert!(mu.r_mu() > 0.0, "{name}");
        }
        assert!(step_preset("nope", None).is_err());
        assert!(step_preset("r1-flip-eps", Some(0.0)).is_err());
    }

    #[test]
    fn drift_and_centring() {
        assert!(step_preset("heisenberg-srw", None).unwrap().is_centred());
        let d = step_preset("heisenberg-drift", None).unwrap();
        assert!(d.derived().v_mu.max_abs_diff(&AlgVector::new(vec![1.0, 0.0, 0.0])) < 1e-15);
        let f = step_preset("r1-flip-eps", Some(0.01)).unwrap();
        assert_eq!(f.spectral_constant().value(), Some(0.02));
    }
}
