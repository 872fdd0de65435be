//! The calculus of bounded linear functionals and operators on GP paths:
//! evaluation, differentiation, integration, projection, composition, and
//! their application to means and kernels (Lk, kL', LkL').

mod diffop;
mod functional;
mod projection;
pub mod quadrature;

pub use diffop::{apply_diffop_to_function, DiffOpTerm, LinearDifferentialOperator};
pub use functional::{
    apply_functionals_to_kernel, integral_functional, weighted_derivative_integral, FunctionalAtom,
    LinearFunctionalSet,
};
pub use projection::{l2_project, TrialProjection};
pub use quadrature::{CompositeRule, QuadratureRule};
