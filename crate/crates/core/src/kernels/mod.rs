//! Covariance functions closed under linear-operator application.

mod matern;
mod multi_output;
mod parametric;
mod recovery;
mod tensor;

pub use matern::{HalfInteger, IsotropicMaternKernel, MaternKernel1D};
pub use multi_output::MultiOutputKernel;
pub use parametric::ParametricKernel;
pub use recovery::{build_recovery_prior, RecoveryKernel};
pub use tensor::TensorProductKernel;

use crate::error::{Error, Result};
use crate::multi_index::MultiIndex;

/// A positive-semidefinite covariance function, possibly multi-output via a
/// stacked index `(output, x)`, with closed-form mixed partial derivatives up
/// to a per-coordinate smoothness budget.
pub trait Kernel: Send + Sync {
    /// Dimension of the input points.
    fn input_dim(&self) -> usize;

    /// Number of outputs (1 unless the kernel is multi-output).
    fn output_count(&self) -> usize {
        1
    }

    /// Per-coordinate derivative budget β: mixed partials
    /// ∂^{α₁}_{x₁} ∂^{α₂}_{x₂} k are available for α₁, α₂ ≤ β componentwise.
    fn smoothness(&self) -> MultiIndex;

    /// Closed-form ∂^{orders1}_{x1} ∂^{orders2}_{x2} k((out1,x1), (out2,x2)).
    fn derivative(
        &self,
        out1: usize,
        orders1: &MultiIndex,
        x1: &[f64],
        out2: usize,
        orders2: &MultiIndex,
        x2: &[f64],
    ) -> Result<f64>;

    /// Kernel value k((out1,x1), (out2,x2)).
    fn eval_multi(&self, out1: usize, x1: &[f64], out2: usize, x2: &[f64]) -> f64 {
        let zero = MultiIndex::zeros(self.input_dim());
        self.derivative(out1, &zero, x1, out2, &zero, x2)
            .expect("zeroth derivative is always supported")
    }

    /// Kernel value for single-output kernels.
    fn eval(&self, x1: &[f64], x2: &[f64]) -> f64 {
        self.eval_multi(0, x1, 0, x2)
    }
}

/// Checks a requested derivative pair against the kernel's budget.
pub(crate) fn check_budget(
    kernel: &dyn Kernel,
    orders1: &MultiIndex,
    orders2: &MultiIndex,
) -> Result<()> {
    let budget = kernel.smoothness();
    if !orders1.le(&budget) || !orders2.le(&budget) {
        return Err(Error::UnsupportedOrder {
            requested: format!("{orders1} x {orders2}"),
            budget: budget.to_string(),
            context: "kernel derivative",
        });
    }
    Ok(())
}

/// Convenience wrapper for single-output kernels, mirroring the bivariate
/// forms Lk, kL', LkL' with L a point-evaluated partial derivative.
pub fn kernel_derivative(
    kernel: &dyn Kernel,
    orders1: &MultiIndex,
    orders2: &MultiIndex,
    x1: &[f64],
    x2: &[f64],
) -> Result<f64> {
    kernel.derivative(0, orders1, x1, 0, orders2, x2)
}
