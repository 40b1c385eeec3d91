//! Clifford modules `Cl(0,n)^d`, right-linear operators and their semigroups.

mod operator;
mod semigroup;

pub use operator::{
    delta_q, direct_inverse, direct_inverse_with, entry_norm, poly_of_operator, polynomial_of_operator,
    singular_range, CliffordMatrixOperator, CliffordVector, INVERTIBILITY_THRESHOLD,
};
pub(crate) use operator::flat_module_norm;
pub use semigroup::{
    growth_bound, is_in_spherical_resolvent, spectral_abscissa, GrowthBound, SemigroupEvaluator,
    DEFAULT_GROWTH_SAFETY,
};
