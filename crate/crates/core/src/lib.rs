//! Physics-informed Gaussian process inference for linear PDEs.
//!
//! A linear PDE, its boundary conditions, conservation constraints, and noisy
//! measurements are all encoded as affine observations of a Gaussian process
//! prior over the solution. Conditioning on these observations yields a
//! posterior whose mean approximates the solution and whose covariance
//! quantifies the remaining discretization and measurement uncertainty. With
//! a suitable choice of prior, the posterior mean reproduces classical
//! weighted-residual solvers (collocation, finite volume, Galerkin/FEM)
//! exactly.

pub mod error;
pub mod functions;
pub mod gp;
pub mod information;
pub mod kernels;
pub mod linalg;
pub mod multi_index;
pub mod mwr;
pub mod operators;
pub mod solver;

pub use error::{Error, Result};
pub use functions::{MeanFunction, RealFunction};
pub use gp::{GaussianProcess, GaussianVector};
pub use information::{BlockLabel, BoundaryCondition, InformationBlock};
pub use kernels::Kernel;
pub use multi_index::MultiIndex;
pub use operators::{LinearDifferentialOperator, LinearFunctionalSet, QuadratureRule, TrialProjection};
pub use solver::{Action, Policy, SolverState, StoppingCriterion};
