//! Multi-indices for mixed partial derivatives.

use std::fmt;

/// A `d`-dimensional multi-index of non-negative derivative orders.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct MultiIndex {
    orders: Vec<usize>,
}

impl MultiIndex {
    pub fn new(orders: Vec<usize>) -> Self {
        Self { orders }
    }

    /// The zero multi-index in `dim` dimensions (no differentiation).
    pub fn zeros(dim: usize) -> Self {
        Self {
            orders: vec![0; dim],
        }
    }

    /// A single derivative of `order` w.r.t. coordinate `axis`.
    pub fn single(dim: usize, axis: usize, order: usize) -> Self {
        let mut orders = vec![0; dim];
        orders[axis] = order;
        Self { orders }
    }

    pub fn dim(&self) -> usize {
        self.orders.len()
    }

    pub fn orders(&self) -> &[usize] {
        &self.orders
    }

    pub fn order(&self, axis: usize) -> usize {
        self.orders[axis]
    }

    /// Total order |α| = Σ αᵢ.
    pub fn total(&self) -> usize {
        self.orders.iter().sum()
    }

    pub fn is_zero(&self) -> bool {
        self.orders.iter().all(|&o| o == 0)
    }

    /// Componentwise partial order α ≤ β.
    pub fn le(&self, other: &MultiIndex) -> bool {
        self.orders.len() == other.orders.len()
            && self
                .orders
                .iter()
                .zip(&other.orders)
                .all(|(a, b)| a <= b)
    }

    /// Componentwise sum (composition of derivatives).
    pub fn add(&self, other: &MultiIndex) -> MultiIndex {
        debug_assert_eq!(self.orders.len(), other.orders.len());
        MultiIndex {
            orders: self
                .orders
                .iter()
                .zip(&other.orders)
                .map(|(a, b)| a + b)
                .collect(),
        }
    }
}

impl fmt::Display for MultiIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(")?;
        for (i, o) in self.orders.iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "{o}")?;
        }
        write!(f, ")")
    }
}
