//! Multi-output kernels via the stacked index set {1..d'} × X.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::kernels::{check_budget, Kernel};
use crate::multi_index::MultiIndex;

/// A multi-output kernel realized through the stacked-index reduction: a
/// function f: X → R^{d'} is viewed as a scalar function on {1..d'} × X, so a
/// matrix-valued kernel is a scalar kernel on the stacked index set.
///
/// This implementation stacks pairwise independent outputs, i.e. the
/// matrix-valued kernel is block-diagonal. That is exactly the joint prior
/// shape needed when the solution, the right-hand side, and the boundary
/// flux are modeled as a-priori independent processes.
#[derive(Clone)]
pub struct MultiOutputKernel {
    blocks: Vec<Arc<dyn Kernel>>,
}

impl MultiOutputKernel {
    /// Stacks independent single-output kernels over a common input domain.
    pub fn from_independent(blocks: Vec<Arc<dyn Kernel>>) -> Result<Self> {
        if blocks.is_empty() {
            return Err(Error::InvalidParameter {
                name: "blocks",
                reason: "need at least one output kernel".into(),
            });
        }
        let dim = blocks[0].input_dim();
        for b in &blocks {
            if b.input_dim() != dim {
                return Err(Error::DimensionMismatch {
                    context: "multi-output kernel input dimension",
                    expected: dim,
                    got: b.input_dim(),
                });
            }
            if b.output_count() != 1 {
                return Err(Error::Contract(
                    "multi-output blocks must be single-output kernels".into(),
                ));
            }
        }
        Ok(Self { blocks })
    }

    pub fn block(&self, output: usize) -> &Arc<dyn Kernel> {
        &self.blocks[output]
    }
}

impl Kernel for MultiOutputKernel {
    fn input_dim(&self) -> usize {
        self.blocks[0].input_dim()
    }

    fn output_count(&self) -> usize {
        self.blocks.len()
    }

    fn smoothness(&self) -> MultiIndex {
        // componentwise minimum over the blocks
        let dim = self.input_dim();
        let mut budget = vec![usize::MAX; dim];
        for b in &self.blocks {
            let s = b.smoothness();
            for i in 0..dim {
                budget[i] = budget[i].min(s.order(i));
            }
        }
        MultiIndex::new(budget)
    }

    fn derivative(
        &self,
        out1: usize,
        orders1: &MultiIndex,
        x1: &[f64],
        out2: usize,
        orders2: &MultiIndex,
        x2: &[f64],
    ) -> Result<f64> {
        if out1 >= self.blocks.len() || out2 >= self.blocks.len() {
            return Err(Error::Contract(format!(
                "output index out of range: ({out1}, {out2}) with {} outputs",
                self.blocks.len()
            )));
        }
        if out1 != out2 {
            // independent outputs have zero cross-covariance, but the order
            // request must still be admissible
            check_budget(self.blocks[out1].as_ref(), orders1, orders1)?;
            check_budget(self.blocks[out2].as_ref(), orders2, orders2)?;
            return Ok(0.0);
        }
        self.blocks[out1].derivative(0, orders1, x1, 0, orders2, x2)
    }
}
