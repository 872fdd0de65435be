//! Tensor products of one-dimensional kernels.

use crate::error::Result;
use crate::kernels::{check_budget, Kernel, MaternKernel1D};
use crate::multi_index::MultiIndex;

/// Tensor product k(x₁, x₂) = Πᵢ kᵢ(x₁ᵢ, x₂ᵢ) of one-dimensional Matérn
/// factors, one per input dimension. Mixed partial derivatives factorize
/// across dimensions.
#[derive(Debug, Clone)]
pub struct TensorProductKernel {
    factors: Vec<MaternKernel1D>,
}

impl TensorProductKernel {
    pub fn new(factors: Vec<MaternKernel1D>) -> Result<Self> {
        if factors.is_empty() {
            return Err(crate::error::Error::InvalidParameter {
                name: "factors",
                reason: "tensor product needs at least one factor".into(),
            });
        }
        Ok(Self { factors })
    }

    pub fn factors(&self) -> &[MaternKernel1D] {
        &self.factors
    }
}

impl Kernel for TensorProductKernel {
    fn input_dim(&self) -> usize {
        self.factors.len()
    }

    fn smoothness(&self) -> MultiIndex {
        MultiIndex::new(self.factors.iter().map(|f| f.nu().p()).collect())
    }

    fn derivative(
        &self,
        _out1: usize,
        orders1: &MultiIndex,
        x1: &[f64],
        _out2: usize,
        orders2: &MultiIndex,
        x2: &[f64],
    ) -> Result<f64> {
        check_budget(self, orders1, orders2)?;
        let mut acc = 1.0;
        for (i, factor) in self.factors.iter().enumerate() {
            acc *= factor.mixed_derivative(orders1.order(i), orders2.order(i), x1[i], x2[i])?;
        }
        Ok(acc)
    }
}
