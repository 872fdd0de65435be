//! Linear differential operators.

use crate::error::{Error, Result};
use crate::functions::MeanFunction;
use crate::multi_index::MultiIndex;

/// One summand A · ∂^α uᵢ of a linear differential operator.
#[derive(Debug, Clone)]
pub struct DiffOpTerm {
    /// Output (component) of the operand the derivative acts on.
    pub output: usize,
    pub orders: MultiIndex,
    pub coeff: f64,
}

/// A linear differential operator D[u] = Σ A_{i,α} ∂^α uᵢ mapping
/// (possibly vector-valued) functions to real-valued functions.
#[derive(Debug, Clone)]
pub struct LinearDifferentialOperator {
    input_dim: usize,
    terms: Vec<DiffOpTerm>,
}

impl LinearDifferentialOperator {
    pub fn new(input_dim: usize, terms: Vec<DiffOpTerm>) -> Result<Self> {
        if terms.is_empty() {
            return Err(Error::InvalidParameter {
                name: "terms",
                reason: "operator needs at least one term".into(),
            });
        }
        for t in &terms {
            if t.orders.dim() != input_dim {
                return Err(Error::DimensionMismatch {
                    context: "differential operator term",
                    expected: input_dim,
                    got: t.orders.dim(),
                });
            }
        }
        Ok(Self { input_dim, terms })
    }

    /// The identity operator on output component `output`.
    pub fn identity(input_dim: usize, output: usize) -> Self {
        Self {
            input_dim,
            terms: vec![DiffOpTerm {
                output,
                orders: MultiIndex::zeros(input_dim),
                coeff: 1.0,
            }],
        }
    }

    /// The negative Laplacian −Δ = −Σᵢ ∂²ᵢ acting on output `output`.
    pub fn negative_laplacian(input_dim: usize, output: usize) -> Self {
        Self::scaled_negative_laplacian(input_dim, output, 1.0)
    }

    /// −κΔ with constant conductivity κ.
    pub fn scaled_negative_laplacian(input_dim: usize, output: usize, kappa: f64) -> Self {
        let terms = (0..input_dim)
            .map(|axis| DiffOpTerm {
                output,
                orders: MultiIndex::single(input_dim, axis, 2),
                coeff: -kappa,
            })
            .collect();
        Self { input_dim, terms }
    }

    /// Directional first derivative Σᵢ ηᵢ ∂ᵢ.
    pub fn directional(direction: &[f64], output: usize) -> Self {
        let d = direction.len();
        let terms = direction
            .iter()
            .enumerate()
            .filter(|(_, &c)| c != 0.0)
            .map(|(axis, &c)| DiffOpTerm {
                output,
                orders: MultiIndex::single(d, axis, 1),
                coeff: c,
            })
            .collect();
        Self {
            input_dim: d,
            terms,
        }
    }

    /// Heat-equation operator c_p ρ ∂_t − κ Δ_x on coordinates (t, x₁, …).
    pub fn heat(space_dim: usize, c_p_rho: f64, kappa: f64, output: usize) -> Self {
        let dim = space_dim + 1;
        let mut terms = vec![DiffOpTerm {
            output,
            orders: MultiIndex::single(dim, 0, 1),
            coeff: c_p_rho,
        }];
        for axis in 1..dim {
            terms.push(DiffOpTerm {
                output,
                orders: MultiIndex::single(dim, axis, 2),
                coeff: -kappa,
            });
        }
        Self {
            input_dim: dim,
            terms,
        }
    }

    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    pub fn terms(&self) -> &[DiffOpTerm] {
        &self.terms
    }

    /// Highest total derivative order k.
    pub fn order(&self) -> usize {
        self.terms.iter().map(|t| t.orders.total()).max().unwrap_or(0)
    }

    /// Scales all coefficients.
    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            input_dim: self.input_dim,
            terms: self
                .terms
                .iter()
                .map(|t| DiffOpTerm {
                    output: t.output,
                    orders: t.orders.clone(),
                    coeff: factor * t.coeff,
                })
                .collect(),
        }
    }

    /// Exact evaluation D[f](x) = Σ A ∂^α f_out(x); errors if `f` does not
    /// expose a required derivative.
    pub fn apply_to_mean(&self, f: &MeanFunction, x: &[f64]) -> Result<f64> {
        let mut acc = 0.0;
        for t in &self.terms {
            if t.output >= f.output_count() {
                return Err(Error::Contract(format!(
                    "operator term addresses output {} of a {}-output function",
                    t.output,
                    f.output_count()
                )));
            }
            acc += t.coeff * f.derivative(t.output, &t.orders, x)?;
        }
        Ok(acc)
    }
}

/// Evaluates D[f] at a point (exact differentiation, no finite differencing).
pub fn apply_diffop_to_function(
    op: &LinearDifferentialOperator,
    f: &MeanFunction,
    x: &[f64],
) -> Result<f64> {
    op.apply_to_mean(f, x)
}
