//! Parametric (finite-rank) kernels.

use std::sync::Arc;

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::functions::RealFunction;
use crate::kernels::{check_budget, Kernel};
use crate::multi_index::MultiIndex;

/// Finite-rank kernel k(x₁, x₂) = φ(x₁)ᵀ Σ φ(x₂) with feature functions
/// φᵢ and a positive-semidefinite weight covariance Σ. Any Gram matrix of
/// this kernel has rank at most the number of features.
#[derive(Clone)]
pub struct ParametricKernel {
    features: Vec<Arc<dyn RealFunction>>,
    weight_cov: DMatrix<f64>,
}

impl ParametricKernel {
    pub fn new(features: Vec<Arc<dyn RealFunction>>, weight_cov: DMatrix<f64>) -> Result<Self> {
        if features.is_empty() {
            return Err(Error::InvalidParameter {
                name: "features",
                reason: "need at least one feature function".into(),
            });
        }
        let m = features.len();
        if weight_cov.nrows() != m || weight_cov.ncols() != m {
            return Err(Error::DimensionMismatch {
                context: "parametric kernel weight covariance",
                expected: m,
                got: weight_cov.nrows(),
            });
        }
        let asym = (&weight_cov - weight_cov.transpose()).abs().max();
        if asym > 1e-12 * weight_cov.abs().max().max(1.0) {
            return Err(Error::InvalidParameter {
                name: "weight_cov",
                reason: "must be symmetric".into(),
            });
        }
        Ok(Self {
            features,
            weight_cov,
        })
    }

    /// Independent weights with unit variance.
    pub fn with_unit_weights(features: Vec<Arc<dyn RealFunction>>) -> Result<Self> {
        let m = features.len();
        Self::new(features, DMatrix::identity(m, m))
    }

    pub fn feature_count(&self) -> usize {
        self.features.len()
    }

    fn feature_values(&self, orders: &MultiIndex, x: &[f64]) -> Result<Vec<f64>> {
        self.features
            .iter()
            .map(|f| f.derivative(orders, x))
            .collect()
    }
}

impl Kernel for ParametricKernel {
    fn input_dim(&self) -> usize {
        self.features[0].dim()
    }

    fn smoothness(&self) -> MultiIndex {
        let order = self
            .features
            .iter()
            .map(|f| f.max_derivative_order())
            .min()
            .unwrap_or(0);
        MultiIndex::new(vec![order; self.input_dim()])
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
        let v1 = self.feature_values(orders1, x1)?;
        let v2 = self.feature_values(orders2, x2)?;
        let mut acc = 0.0;
        for i in 0..v1.len() {
            for j in 0..v2.len() {
                acc += v1[i] * self.weight_cov[(i, j)] * v2[j];
            }
        }
        Ok(acc)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::functions::MonomialSum;
    use approx::assert_abs_diff_eq;
    use nalgebra::DMatrix;

    fn quadratic_features() -> Vec<Arc<dyn RealFunction>> {
        vec![
            Arc::new(MonomialSum::poly1d(&[1.0])) as Arc<dyn RealFunction>,
            Arc::new(MonomialSum::poly1d(&[0.0, 1.0])),
            Arc::new(MonomialSum::poly1d(&[0.0, 0.0, 1.0])),
        ]
    }

    #[test]
    fn evaluates_quadratic_form() {
        let k = ParametricKernel::with_unit_weights(quadratic_features()).unwrap();
        // φ(x) = (1, x, x²): k(2, 3) = 1 + 6 + 36 = 43
        assert_abs_diff_eq!(k.eval(&[2.0], &[3.0]), 43.0, epsilon = 1e-12);
    }

    #[test]
    fn gram_rank_bounded_by_feature_count() {
        let k = ParametricKernel::with_unit_weights(quadratic_features()).unwrap();
        let xs: Vec<f64> = (0..8).map(|i| i as f64 * 0.37 - 1.0).collect();
        let gram = DMatrix::from_fn(8, 8, |i, j| k.eval(&[xs[i]], &[xs[j]]));
        let eigs = gram.symmetric_eigenvalues();
        let mut sorted: Vec<f64> = eigs.iter().copied().collect();
        sorted.sort_by(|a, b| b.partial_cmp(a).unwrap());
        // everything beyond the third eigenvalue is numerically zero
        for &lambda in &sorted[3..] {
            assert!(lambda.abs() < 1e-8 * sorted[0].max(1.0));
        }
    }

    #[test]
    fn derivative_differentiates_features() {
        let k = ParametricKernel::with_unit_weights(quadratic_features()).unwrap();
        // ∂₁ k(x1, x2) = (0, 1, 2x1)·(1, x2, x2²)
        let d = k
            .derivative(
                0,
                &MultiIndex::single(1, 0, 1),
                &[2.0],
                0,
                &MultiIndex::zeros(1),
                &[3.0],
            )
            .unwrap();
        assert_abs_diff_eq!(d, 3.0 + 4.0 * 9.0, epsilon = 1e-12);
    }

    #[test]
    fn rejects_asymmetric_weight_cov() {
        let mut cov = DMatrix::identity(3, 3);
        cov[(0, 1)] = 0.5;
        assert!(ParametricKernel::new(quadratic_features(), cov).is_err());
    }
}
