mod algebra;
pub mod bch;
pub mod filtration;
pub mod linalg;
pub mod presets;
mod subspace;
mod vector;

pub use algebra::{AlgebraDoc, NilpotentAlgebra, ValidationReport, STRUCTURE_TOL};
pub use bch::{Bch, BchScratch, DynkinTable};
pub use filtration::{bracket_span, nilpotency_step, Filtration, FiltrationInvariants, FiltrationKind};
pub use subspace::{null_space, Subspace, RANK_TOL};
pub use vector::AlgVector;
