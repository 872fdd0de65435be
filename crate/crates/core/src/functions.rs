//! Function objects with closed-form derivatives.
//!
//! Mean functions, PDE right-hand sides, quadrature weights, and trial/test
//! functions are all represented as [`RealFunction`] trait objects. Each
//! carries its own smoothness bookkeeping so that operators requesting
//! derivatives beyond what a function supports fail fast instead of silently
//! finite-differencing.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::multi_index::MultiIndex;

/// A real-valued function on a subset of R^d exposing exact derivatives.
pub trait RealFunction: Send + Sync {
    /// Input dimension.
    fn dim(&self) -> usize {
        1
    }

    fn eval(&self, x: &[f64]) -> f64;

    /// Exact mixed partial derivative ∂^α f(x). The zero multi-index must
    /// reproduce `eval`.
    fn derivative(&self, orders: &MultiIndex, x: &[f64]) -> Result<f64> {
        if orders.is_zero() {
            Ok(self.eval(x))
        } else {
            Err(Error::UnsupportedOrder {
                requested: orders.to_string(),
                budget: "0".into(),
                context: "function derivative",
            })
        }
    }

    /// Highest derivative order available in each coordinate.
    fn max_derivative_order(&self) -> usize {
        0
    }

    /// Points (1D) where the function or one of its derivatives has a kink.
    /// Quadrature rules split integration panels here.
    fn breakpoints(&self) -> Vec<f64> {
        Vec::new()
    }
}

/// Mean function of a (multi-output) process: one component per output.
#[derive(Clone)]
pub struct MeanFunction {
    components: Vec<Arc<dyn RealFunction>>,
}

impl MeanFunction {
    pub fn new(components: Vec<Arc<dyn RealFunction>>) -> Self {
        assert!(!components.is_empty(), "mean needs at least one output");
        Self { components }
    }

    pub fn single(f: Arc<dyn RealFunction>) -> Self {
        Self::new(vec![f])
    }

    /// Zero mean with `outputs` outputs on a `dim`-dimensional domain.
    pub fn zero(outputs: usize, dim: usize) -> Self {
        Self::new(vec![Arc::new(Constant::new(0.0, dim)) as Arc<dyn RealFunction>; outputs])
    }

    pub fn output_count(&self) -> usize {
        self.components.len()
    }

    pub fn component(&self, output: usize) -> &Arc<dyn RealFunction> {
        &self.components[output]
    }

    pub fn eval(&self, output: usize, x: &[f64]) -> f64 {
        self.components[output].eval(x)
    }

    pub fn derivative(&self, output: usize, orders: &MultiIndex, x: &[f64]) -> Result<f64> {
        self.components[output].derivative(orders, x)
    }
}

/// Constant function on R^d.
#[derive(Debug, Clone)]
pub struct Constant {
    value: f64,
    dim: usize,
}

impl Constant {
    pub fn new(value: f64, dim: usize) -> Self {
        Self { value, dim }
    }
}

impl RealFunction for Constant {
    fn dim(&self) -> usize {
        self.dim
    }

    fn eval(&self, _x: &[f64]) -> f64 {
        self.value
    }

    fn derivative(&self, orders: &MultiIndex, _x: &[f64]) -> Result<f64> {
        Ok(if orders.is_zero() { self.value } else { 0.0 })
    }

    fn max_derivative_order(&self) -> usize {
        usize::MAX
    }
}

/// Sum of monomials c · x^α on R^d. Covers affine functions, polynomials in
/// one variable, and products like t·x².
#[derive(Debug, Clone)]
pub struct MonomialSum {
    dim: usize,
    terms: Vec<(f64, MultiIndex)>,
}

impl MonomialSum {
    pub fn new(dim: usize, terms: Vec<(f64, MultiIndex)>) -> Self {
        assert!(terms.iter().all(|(_, a)| a.dim() == dim));
        Self { dim, terms }
    }

    /// 1D polynomial c₀ + c₁x + c₂x² + …
    pub fn poly1d(coeffs: &[f64]) -> Self {
        let terms = coeffs
            .iter()
            .enumerate()
            .map(|(k, &c)| (c, MultiIndex::single(1, 0, k)))
            .collect();
        Self { dim: 1, terms }
    }

    /// Affine function a·x + b in one variable.
    pub fn affine1d(a: f64, b: f64) -> Self {
        Self::poly1d(&[b, a])
    }
}

impl RealFunction for MonomialSum {
    fn dim(&self) -> usize {
        self.dim
    }

    fn eval(&self, x: &[f64]) -> f64 {
        self.terms
            .iter()
            .map(|(c, a)| {
                c * a
                    .orders()
                    .iter()
                    .zip(x)
                    .map(|(&k, &xi)| xi.powi(k as i32))
                    .product::<f64>()
            })
            .sum()
    }

    fn derivative(&self, orders: &MultiIndex, x: &[f64]) -> Result<f64> {
        let mut acc = 0.0;
        for (c, a) in &self.terms {
            let mut term = *c;
            for axis in 0..self.dim {
                let k = a.order(axis);
                let d = orders.order(axis);
                if d > k {
                    term = 0.0;
                    break;
                }
                // falling factorial k (k-1) … (k-d+1) x^{k-d}
                let mut fac = 1.0;
                for j in 0..d {
                    fac *= (k - j) as f64;
                }
                term *= fac * x[axis].powi((k - d) as i32);
            }
            acc += term;
        }
        Ok(acc)
    }

    fn max_derivative_order(&self) -> usize {
        usize::MAX
    }
}

/// Piecewise-linear hat function: 1 at `center`, 0 at `left` and `right`,
/// linear in between, 0 outside. A "half hat" at the domain boundary is
/// expressed by setting `left == center` (or `right == center`).
#[derive(Debug, Clone)]
pub struct HatFunction {
    left: f64,
    center: f64,
    right: f64,
}

impl HatFunction {
    pub fn new(left: f64, center: f64, right: f64) -> Result<Self> {
        if !(left <= center && center <= right && left < right) {
            return Err(Error::InvalidParameter {
                name: "hat nodes",
                reason: format!("need left <= center <= right, got {left}, {center}, {right}"),
            });
        }
        Ok(Self {
            left,
            center,
            right,
        })
    }

    pub fn center(&self) -> f64 {
        self.center
    }

    pub fn support(&self) -> (f64, f64) {
        (self.left, self.right)
    }

    /// Derivative of the hat, a piecewise-constant function.
    pub fn slope_function(&self) -> PiecewiseConstant {
        let mut points = Vec::new();
        let mut values = Vec::new();
        if self.left < self.center {
            points.push(self.left);
            values.push(1.0 / (self.center - self.left));
        }
        if self.center < self.right {
            points.push(self.center);
            values.push(-1.0 / (self.right - self.center));
        }
        points.push(self.right);
        PiecewiseConstant::new(points, values)
    }
}

impl RealFunction for HatFunction {
    fn eval(&self, x: &[f64]) -> f64 {
        let x = x[0];
        if x < self.left || x > self.right {
            0.0
        } else if x <= self.center {
            if self.center == self.left {
                1.0
            } else {
                (x - self.left) / (self.center - self.left)
            }
        } else if self.center == self.right {
            1.0
        } else {
            (self.right - x) / (self.right - self.center)
        }
    }

    /// First derivatives exist piecewise (one-sided at the breakpoints);
    /// `max_derivative_order` stays 0 because the hat is only C⁰ globally.
    fn derivative(&self, orders: &MultiIndex, x: &[f64]) -> Result<f64> {
        match orders.order(0) {
            0 => Ok(self.eval(x)),
            1 => Ok(self.slope_function().eval(x)),
            _ => Err(Error::UnsupportedOrder {
                requested: orders.to_string(),
                budget: "1 (piecewise)".into(),
                context: "hat function derivative",
            }),
        }
    }

    fn breakpoints(&self) -> Vec<f64> {
        vec![self.left, self.center, self.right]
    }
}

/// Piecewise-constant function defined by ascending breakpoints
/// `points[0] < … < points[n]` and `values[i]` on `(points[i], points[i+1])`.
/// Zero outside the covered range.
#[derive(Debug, Clone)]
pub struct PiecewiseConstant {
    points: Vec<f64>,
    values: Vec<f64>,
}

impl PiecewiseConstant {
    pub fn new(points: Vec<f64>, values: Vec<f64>) -> Self {
        assert_eq!(points.len(), values.len() + 1);
        assert!(points.windows(2).all(|w| w[0] < w[1]));
        Self { points, values }
    }

    /// Indicator of the interval `(a, b)`.
    pub fn indicator(a: f64, b: f64) -> Self {
        Self::new(vec![a, b], vec![1.0])
    }
}

impl RealFunction for PiecewiseConstant {
    fn eval(&self, x: &[f64]) -> f64 {
        let x = x[0];
        if x < self.points[0] || x > *self.points.last().unwrap() {
            return 0.0;
        }
        for i in 0..self.values.len() {
            if x <= self.points[i + 1] {
                return self.values[i];
            }
        }
        0.0
    }

    fn breakpoints(&self) -> Vec<f64> {
        self.points.clone()
    }
}

/// Linear combination Σ cᵢ φᵢ of basis functions.
#[derive(Clone)]
pub struct LinearCombination {
    coeffs: Vec<f64>,
    basis: Vec<Arc<dyn RealFunction>>,
}

impl LinearCombination {
    pub fn new(coeffs: Vec<f64>, basis: Vec<Arc<dyn RealFunction>>) -> Result<Self> {
        if coeffs.len() != basis.len() {
            return Err(Error::DimensionMismatch {
                context: "linear combination",
                expected: basis.len(),
                got: coeffs.len(),
            });
        }
        Ok(Self { coeffs, basis })
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }
}

impl RealFunction for LinearCombination {
    fn dim(&self) -> usize {
        self.basis.first().map_or(1, |f| f.dim())
    }

    fn eval(&self, x: &[f64]) -> f64 {
        self.coeffs
            .iter()
            .zip(&self.basis)
            .map(|(c, f)| c * f.eval(x))
            .sum()
    }

    fn derivative(&self, orders: &MultiIndex, x: &[f64]) -> Result<f64> {
        let mut acc = 0.0;
        for (c, f) in self.coeffs.iter().zip(&self.basis) {
            acc += c * f.derivative(orders, x)?;
        }
        Ok(acc)
    }

    fn max_derivative_order(&self) -> usize {
        self.basis
            .iter()
            .map(|f| f.max_derivative_order())
            .min()
            .unwrap_or(0)
    }

    fn breakpoints(&self) -> Vec<f64> {
        let mut pts: Vec<f64> = self.basis.iter().flat_map(|f| f.breakpoints()).collect();
        pts.sort_by(|a, b| a.partial_cmp(b).unwrap());
        pts.dedup();
        pts
    }
}

/// Pointwise product w(x)·f(x); smoothness is the minimum of the factors.
#[derive(Clone)]
pub struct Product {
    factors: Vec<Arc<dyn RealFunction>>,
}

impl Product {
    pub fn new(factors: Vec<Arc<dyn RealFunction>>) -> Self {
        assert!(!factors.is_empty());
        Self { factors }
    }
}

impl RealFunction for Product {
    fn dim(&self) -> usize {
        self.factors[0].dim()
    }

    fn eval(&self, x: &[f64]) -> f64 {
        self.factors.iter().map(|f| f.eval(x)).product()
    }

    fn breakpoints(&self) -> Vec<f64> {
        let mut pts: Vec<f64> = self.factors.iter().flat_map(|f| f.breakpoints()).collect();
        pts.sort_by(|a, b| a.partial_cmp(b).unwrap());
        pts.dedup();
        pts
    }
}

/// Function defined by closures, for cases without a structured form
/// (e.g. smooth heat-source profiles). Derivative closures are optional;
/// `max_order` declares how many are provided per coordinate.
pub struct ClosureFunction {
    dim: usize,
    max_order: usize,
    f: Box<dyn Fn(&[f64]) -> f64 + Send + Sync>,
    df: Option<Box<dyn Fn(&MultiIndex, &[f64]) -> f64 + Send + Sync>>,
}

impl ClosureFunction {
    pub fn new(dim: usize, f: impl Fn(&[f64]) -> f64 + Send + Sync + 'static) -> Self {
        Self {
            dim,
            max_order: 0,
            f: Box::new(f),
            df: None,
        }
    }

    pub fn with_derivatives(
        dim: usize,
        max_order: usize,
        f: impl Fn(&[f64]) -> f64 + Send + Sync + 'static,
        df: impl Fn(&MultiIndex, &[f64]) -> f64 + Send + Sync + 'static,
    ) -> Self {
        Self {
            dim,
            max_order,
            f: Box::new(f),
            df: Some(Box::new(df)),
        }
    }
}

impl RealFunction for ClosureFunction {
    fn dim(&self) -> usize {
        self.dim
    }

    fn eval(&self, x: &[f64]) -> f64 {
        (self.f)(x)
    }

    fn derivative(&self, orders: &MultiIndex, x: &[f64]) -> Result<f64> {
        if orders.is_zero() {
            return Ok(self.eval(x));
        }
        match &self.df {
            Some(df) if orders.orders().iter().all(|&o| o <= self.max_order) => Ok(df(orders, x)),
            _ => Err(Error::UnsupportedOrder {
                requested: orders.to_string(),
                budget: self.max_order.to_string(),
                context: "closure function derivative",
            }),
        }
    }

    fn max_derivative_order(&self) -> usize {
        self.max_order
    }
}
