//! Finite sets of bounded linear functionals acting on process paths.
//!
//! Every functional is a finite linear combination of two kinds of atoms:
//! point-evaluated partial derivatives δ_x ∘ ∂^α and weighted quadrature
//! sums Σ w_q ψ(s_q) ∂^α(·)(s_q). An integral functional *is* its quadrature
//! sum: the rule is fixed when the functional is built and never adapted
//! afterwards, so applying the same functional to kernels, means, and sample
//! paths is always the same finite weighted sum of point evaluations. This
//! keeps Gram matrices, cross-covariances, and classical reference solves
//! consistent to machine precision.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::functions::{MeanFunction, RealFunction};
use crate::kernels::Kernel;
use crate::multi_index::MultiIndex;
use crate::operators::diffop::LinearDifferentialOperator;
use crate::operators::projection::TrialProjection;
use crate::operators::quadrature::CompositeRule;

/// An atomic bounded linear functional.
#[derive(Clone)]
pub enum FunctionalAtom {
    /// Point-evaluated mixed partial derivative δ_x ∘ ∂^α on one output.
    PointDeriv {
        output: usize,
        orders: MultiIndex,
        point: Vec<f64>,
    },
    /// Weighted integral ∫ ψ(x) ∂^α u_out(x) dx realized by a fixed
    /// composite quadrature rule (1D).
    Integral {
        output: usize,
        orders: MultiIndex,
        weight: Option<Arc<dyn RealFunction>>,
        rule: Arc<CompositeRule>,
    },
}

impl FunctionalAtom {
    pub fn point(output: usize, point: Vec<f64>) -> Self {
        let dim = point.len();
        Self::PointDeriv {
            output,
            orders: MultiIndex::zeros(dim),
            point,
        }
    }

    pub fn output(&self) -> usize {
        match self {
            Self::PointDeriv { output, .. } | Self::Integral { output, .. } => *output,
        }
    }

    pub fn orders(&self) -> &MultiIndex {
        match self {
            Self::PointDeriv { orders, .. } | Self::Integral { orders, .. } => orders,
        }
    }

    /// Applies the atom to one component of a mean function.
    fn apply_to_mean(&self, mean: &MeanFunction) -> Result<f64> {
        match self {
            Self::PointDeriv {
                output,
                orders,
                point,
            } => mean.derivative(*output, orders, point),
            Self::Integral {
                output,
                orders,
                weight,
                rule,
            } => {
                let mut acc = 0.0;
                for (x, w) in rule.points() {
                    let psi = weight.as_ref().map_or(1.0, |f| f.eval(&[x]));
                    if psi == 0.0 {
                        continue;
                    }
                    acc += w * psi * mean.derivative(*output, orders, &[x])?;
                }
                Ok(acc)
            }
        }
    }

    /// Coefficients of the atom as a weighted sum of point evaluations:
    /// `(nodes, coefficients)`. Point atoms are a single unit coefficient.
    fn node_coefficients(&self) -> Option<Vec<f64>> {
        match self {
            Self::PointDeriv { .. } => None,
            Self::Integral { weight, rule, .. } => Some(
                rule.points()
                    .map(|(x, w)| w * weight.as_ref().map_or(1.0, |f| f.eval(&[x])))
                    .collect(),
            ),
        }
    }
}

/// An ordered, finite block L of bounded linear functionals, stored as a
/// linear recombination `transform · atoms`.
///
/// The atom list is shared behind an `Arc`: blocks derived from the same
/// projection or stacked from the same parents reuse one allocation, which
/// doubles as a cache identity for repeated kernel applications.
#[derive(Clone)]
pub struct LinearFunctionalSet {
    atoms: Arc<Vec<FunctionalAtom>>,
    /// rows × atoms; `None` means the identity (rows = atoms).
    transform: Option<DMatrix<f64>>,
}

impl LinearFunctionalSet {
    pub fn from_atoms(atoms: Vec<FunctionalAtom>) -> Self {
        Self {
            atoms: Arc::new(atoms),
            transform: None,
        }
    }

    pub fn from_shared_atoms(atoms: Arc<Vec<FunctionalAtom>>) -> Self {
        Self {
            atoms,
            transform: None,
        }
    }

    /// Point evaluations δ_x at the given points on one output.
    pub fn point_evaluations(output: usize, points: &[Vec<f64>]) -> Self {
        Self::from_atoms(
            points
                .iter()
                .map(|p| FunctionalAtom::point(output, p.clone()))
                .collect(),
        )
    }

    /// Point evaluations on a 1D domain.
    pub fn point_evaluations_1d(output: usize, xs: &[f64]) -> Self {
        Self::from_atoms(
            xs.iter()
                .map(|&x| FunctionalAtom::point(output, vec![x]))
                .collect(),
        )
    }

    pub fn with_transform(mut self, transform: DMatrix<f64>) -> Result<Self> {
        if transform.ncols() != self.atoms.len() {
            return Err(Error::DimensionMismatch {
                context: "functional transform",
                expected: self.atoms.len(),
                got: transform.ncols(),
            });
        }
        self.transform = match self.transform.take() {
            Some(t) => Some(transform * t),
            None => Some(transform),
        };
        Ok(self)
    }

    /// Number of functionals (rows).
    pub fn len(&self) -> usize {
        self.transform
            .as_ref()
            .map_or(self.atoms.len(), |t| t.nrows())
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn atoms(&self) -> &[FunctionalAtom] {
        &self.atoms
    }

    /// Shared atom storage; pointer identity doubles as a cache key.
    pub fn atoms_arc(&self) -> &Arc<Vec<FunctionalAtom>> {
        &self.atoms
    }

    pub fn transform(&self) -> Option<&DMatrix<f64>> {
        self.transform.as_ref()
    }

    /// Largest derivative order requested per coordinate, for smoothness
    /// bookkeeping.
    pub fn max_orders(&self, dim: usize) -> MultiIndex {
        let mut out = vec![0usize; dim];
        for a in &self.atoms {
            for i in 0..dim {
                out[i] = out[i].max(a.orders().order(i));
            }
        }
        MultiIndex::new(out)
    }

    /// Entrywise linear combination Σ aₖ Lₖ of blocks of equal length.
    pub fn linear_combination(terms: &[(f64, &LinearFunctionalSet)]) -> Result<LinearFunctionalSet> {
        let n = terms
            .first()
            .map(|(_, s)| s.len())
            .ok_or_else(|| Error::Contract("linear combination needs at least one block".into()))?;
        if terms.iter().any(|(_, s)| s.len() != n) {
            return Err(Error::DimensionMismatch {
                context: "functional linear combination",
                expected: n,
                got: terms.iter().map(|(_, s)| s.len()).max().unwrap_or(0),
            });
        }
        let atoms: Vec<FunctionalAtom> = terms
            .iter()
            .flat_map(|(_, s)| s.atoms.iter().cloned())
            .collect();
        let cols: usize = terms.iter().map(|(_, s)| s.atoms.len()).sum();
        let mut transform = DMatrix::zeros(n, cols);
        let mut c0 = 0;
        for (coeff, s) in terms {
            let nc = s.atoms.len();
            match &s.transform {
                Some(t) => transform
                    .view_mut((0, c0), (n, nc))
                    .copy_from(&(t * *coeff)),
                None => {
                    for i in 0..n {
                        transform[(i, c0 + i)] = *coeff;
                    }
                }
            }
            c0 += nc;
        }
        Ok(LinearFunctionalSet {
            atoms,
            transform: Some(transform),
        })
    }

    /// Stacks several functional blocks into one.
    pub fn stack(sets: &[&LinearFunctionalSet]) -> LinearFunctionalSet {
        let atoms: Vec<FunctionalAtom> = sets
            .iter()
            .flat_map(|s| s.atoms.iter().cloned())
            .collect();
        if sets.iter().all(|s| s.transform.is_none()) {
            return LinearFunctionalSet::from_atoms(atoms);
        }
        let rows: usize = sets.iter().map(|s| s.len()).sum();
        let mut transform = DMatrix::zeros(rows, atoms.len());
        let (mut r0, mut c0) = (0, 0);
        for s in sets {
            let (nr, nc) = (s.len(), s.atoms.len());
            match &s.transform {
                Some(t) => transform.view_mut((r0, c0), (nr, nc)).copy_from(t),
                None => {
                    for i in 0..nr {
                        transform[(r0 + i, c0 + i)] = 1.0;
                    }
                }
            }
            r0 += nr;
            c0 += nc;
        }
        LinearFunctionalSet {
            atoms,
            transform: Some(transform),
        }
    }

    /// Composition (l ∘ D) with a linear differential operator: each atom
    /// acting on the real-valued image of D expands into a combination of
    /// atoms acting on the operand's outputs.
    pub fn compose_diffop(&self, op: &LinearDifferentialOperator) -> Result<LinearFunctionalSet> {
        let mut atoms = Vec::with_capacity(self.atoms.len() * op.terms().len());
        let mut expansion = DMatrix::zeros(self.atoms.len(), self.atoms.len() * op.terms().len());
        for (i, atom) in self.atoms.iter().enumerate() {
            if atom.output() != 0 {
                return Err(Error::Contract(
                    "functionals composed with an operator must act on its single-output image"
                        .into(),
                ));
            }
            for term in op.terms() {
                let col = atoms.len();
                let new_atom = match atom {
                    FunctionalAtom::PointDeriv { orders, point, .. } => {
                        FunctionalAtom::PointDeriv {
                            output: term.output,
                            orders: orders.add(&term.orders),
                            point: point.clone(),
                        }
                    }
                    FunctionalAtom::Integral {
                        orders,
                        weight,
                        rule,
                        ..
                    } => FunctionalAtom::Integral {
                        output: term.output,
                        orders: orders.add(&term.orders),
                        weight: weight.clone(),
                        rule: rule.clone(),
                    },
                };
                atoms.push(new_atom);
                expansion[(i, col)] = term.coeff;
            }
        }
        let expansion = expansion.columns(0, atoms.len()).into_owned();
        let transform = match &self.transform {
            Some(t) => t * expansion,
            None => expansion,
        };
        Ok(LinearFunctionalSet {
            atoms,
            transform: Some(transform),
        })
    }

    /// Composition (l ∘ P) with a trial projection: l[P u] = Σᵢ l[φᵢ]·cᵢ[u],
    /// so the composed set is a recombination of the projection's coordinate
    /// functionals.
    pub fn compose_projection(&self, projection: &TrialProjection) -> Result<LinearFunctionalSet> {
        let m = projection.basis_len();
        // V[row_atom, i] = atom[φ_i]
        let mut values = DMatrix::zeros(self.atoms.len(), m);
        for (r, atom) in self.atoms.iter().enumerate() {
            if atom.output() != projection.output() {
                return Err(Error::Contract(format!(
                    "projection acts on output {}, functional atom acts on output {}",
                    projection.output(),
                    atom.output()
                )));
            }
            for i in 0..m {
                values[(r, i)] = atom.apply_to_mean(&MeanFunction::single(
                    projection.basis_function(i).clone(),
                ))?;
            }
        }
        let recomb = values * projection.gram_inverse();
        let transform = match &self.transform {
            Some(t) => t * recomb,
            None => recomb,
        };
        Ok(LinearFunctionalSet {
            atoms: projection.raw_integral_atoms().to_vec(),
            transform: Some(transform),
        })
    }

    /// Applies the block to a mean function: L[m] ∈ R^n.
    pub fn apply_to_mean(&self, mean: &MeanFunction) -> Result<DVector<f64>> {
        let atom_values = DVector::from_iterator(
            self.atoms.len(),
            self.atoms
                .iter()
                .map(|a| a.apply_to_mean(mean))
                .collect::<Result<Vec<f64>>>()?,
        );
        Ok(match &self.transform {
            Some(t) => t * atom_values,
            None => atom_values,
        })
    }

    /// Applies the block to a single-output function.
    pub fn apply_to_function(&self, f: &Arc<dyn RealFunction>) -> Result<DVector<f64>> {
        self.apply_to_mean(&MeanFunction::single(f.clone()))
    }
}

/// Builds a weighted-integral functional ∫ ψ(x)·(·)(x) dx over `region`,
/// realized with the given per-panel Gauss rule split at the weight's
/// breakpoints. `domain` bounds are checked.
pub fn integral_functional(
    weight: Option<Arc<dyn RealFunction>>,
    region: (f64, f64),
    panel_rule: &crate::operators::quadrature::QuadratureRule,
    domain: (f64, f64),
    output: usize,
) -> Result<FunctionalAtom> {
    if region.0 < domain.0 - 1e-12 || region.1 > domain.1 + 1e-12 || region.0 >= region.1 {
        return Err(Error::Domain(format!(
            "integration region [{}, {}] not inside domain [{}, {}]",
            region.0, region.1, domain.0, domain.1
        )));
    }
    let breakpoints = weight.as_ref().map_or(Vec::new(), |w| w.breakpoints());
    let rule = CompositeRule::new(region.0, region.1, &breakpoints, panel_rule)?;
    Ok(FunctionalAtom::Integral {
        output,
        orders: MultiIndex::zeros(1),
        weight,
        rule: Arc::new(rule),
    })
}

/// Like [`integral_functional`], but integrating against a derivative of the
/// operand: ∫ ψ(x) ∂^α(·)(x) dx. This is the building block of weak-form
/// bilinear entries such as B(u, ψ) = ∫ κ u′ ψ′.
pub fn weighted_derivative_integral(
    weight: Option<Arc<dyn RealFunction>>,
    orders: MultiIndex,
    region: (f64, f64),
    panel_rule: &crate::operators::quadrature::QuadratureRule,
    domain: (f64, f64),
    output: usize,
) -> Result<FunctionalAtom> {
    let atom = integral_functional(weight, region, panel_rule, domain, output)?;
    match atom {
        FunctionalAtom::Integral { output, weight, rule, .. } => Ok(FunctionalAtom::Integral {
            output,
            orders,
            weight,
            rule,
        }),
        FunctionalAtom::PointDeriv { .. } => unreachable!("integral builder returns integrals"),
    }
}

/// Computes the matrix L₁ k L₂' with entries (L₁)ᵢ k (L₂)ⱼ'.
///
/// Smoothness bookkeeping fails fast: if any atom requests derivatives
/// beyond the kernel's budget the whole call errors before any entry is
/// computed.
pub fn apply_functionals_to_kernel(
    l1: &LinearFunctionalSet,
    kernel: &dyn Kernel,
    l2: &LinearFunctionalSet,
) -> Result<DMatrix<f64>> {
    let dim = kernel.input_dim();
    let budget = kernel.smoothness();
    for set in [l1, l2] {
        let req = set.max_orders(dim);
        if !req.le(&budget) {
            return Err(Error::UnsupportedOrder {
                requested: req.to_string(),
                budget: budget.to_string(),
                context: "functional application to kernel",
            });
        }
        for atom in set.atoms() {
            if atom.output() >= kernel.output_count() {
                return Err(Error::Contract(format!(
                    "functional output {} out of range for {}-output kernel",
                    atom.output(),
                    kernel.output_count()
                )));
            }
        }
    }

    let mut entries = DMatrix::zeros(l1.atoms.len(), l2.atoms.len());
    for (i, a) in l1.atoms.iter().enumerate() {
        for (j, b) in l2.atoms.iter().enumerate() {
            entries[(i, j)] = atom_pair_value(a, kernel, b)?;
        }
    }
    let entries = match &l1.transform {
        Some(t) => t * entries,
        None => entries,
    };
    let entries = match &l2.transform {
        Some(t) => entries * t.transpose(),
        None => entries,
    };
    Ok(entries)
}

fn atom_pair_value(a: &FunctionalAtom, kernel: &dyn Kernel, b: &FunctionalAtom) -> Result<f64> {
    match (a, b) {
        (
            FunctionalAtom::PointDeriv {
                output: o1,
                orders: d1,
                point: x1,
            },
            FunctionalAtom::PointDeriv {
                output: o2,
                orders: d2,
                point: x2,
            },
        ) => kernel.derivative(*o1, d1, x1, *o2, d2, x2),
        (
            FunctionalAtom::PointDeriv {
                output: o1,
                orders: d1,
                point: x1,
            },
            FunctionalAtom::Integral {
                output: o2,
                orders: d2,
                rule,
                ..
            },
        ) => {
            let coeffs = b.node_coefficients().unwrap();
            let mut acc = 0.0;
            for ((x, _), c) in rule.points().zip(coeffs) {
                if c == 0.0 {
                    continue;
                }
                acc += c * kernel.derivative(*o1, d1, x1, *o2, d2, &[x])?;
            }
            Ok(acc)
        }
        (FunctionalAtom::Integral { .. }, FunctionalAtom::PointDeriv { .. }) => {
            // mirror the mixed case so swapped arguments sum in the same order
            atom_pair_value(b, kernel, a)
        }
        (
            FunctionalAtom::Integral {
                output: o1,
                orders: d1,
                rule: r1,
                ..
            },
            FunctionalAtom::Integral {
                output: o2,
                orders: d2,
                rule: r2,
                ..
            },
        ) => {
            let c1 = a.node_coefficients().unwrap();
            let c2 = b.node_coefficients().unwrap();
            let mut acc = 0.0;
            for ((x1, _), w1) in r1.points().zip(&c1) {
                if *w1 == 0.0 {
                    continue;
                }
                let mut inner = 0.0;
                for ((x2, _), w2) in r2.points().zip(&c2) {
                    if *w2 == 0.0 {
                        continue;
                    }
                    inner += w2 * kernel.derivative(*o1, d1, &[x1], *o2, d2, &[x2])?;
                }
                acc += w1 * inner;
            }
            Ok(acc)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::functions::{Constant, HatFunction, MonomialSum};
    use crate::kernels::{HalfInteger, MaternKernel1D};
    use crate::operators::quadrature::QuadratureRule;
    use approx::assert_abs_diff_eq;

    fn gauss5() -> QuadratureRule {
        QuadratureRule::gauss_legendre(5).unwrap()
    }

    #[test]
    fn dirac_gram_on_exponential_kernel() {
        let k = MaternKernel1D::new(HalfInteger::Nu1_2, 1.0, 1.0).unwrap();
        let l = LinearFunctionalSet::point_evaluations_1d(0, &[0.0, 1.0]);
        let g = apply_functionals_to_kernel(&l, &k, &l).unwrap();
        let e1 = (-1.0f64).exp();
        assert_abs_diff_eq!(g[(0, 0)], 1.0, epsilon = 1e-14);
        assert_abs_diff_eq!(g[(0, 1)], e1, epsilon = 1e-14);
        assert_abs_diff_eq!(g[(1, 0)], e1, epsilon = 1e-14);
        assert_abs_diff_eq!(g[(1, 1)], 1.0, epsilon = 1e-14);
    }

    #[test]
    fn odd_derivative_at_zero_lag() {
        let k = MaternKernel1D::new(HalfInteger::Nu5_2, 1.0, 1.0).unwrap();
        let ddx = LinearFunctionalSet::point_evaluations_1d(0, &[0.0])
            .compose_diffop(&LinearDifferentialOperator::directional(&[1.0], 0))
            .unwrap();
        let delta = LinearFunctionalSet::point_evaluations_1d(0, &[0.0]);
        let m = apply_functionals_to_kernel(&ddx, &k, &delta).unwrap();
        assert_abs_diff_eq!(m[(0, 0)], 0.0);
    }

    #[test]
    fn composition_with_operator_on_function() {
        // δ_{0.5} ∘ (−d²/dx²) applied to x³ gives −3
        let op = LinearDifferentialOperator::negative_laplacian(1, 0);
        let l = LinearFunctionalSet::point_evaluations_1d(0, &[0.5])
            .compose_diffop(&op)
            .unwrap();
        let f: Arc<dyn RealFunction> = Arc::new(MonomialSum::poly1d(&[0.0, 0.0, 0.0, 1.0]));
        let v = l.apply_to_function(&f).unwrap();
        assert_abs_diff_eq!(v[0], -3.0, epsilon = 1e-12);
    }

    #[test]
    fn integral_of_derivative_is_fundamental_theorem() {
        // (∫₀¹ dx) ∘ d/dx applied to x² = 1
        let atom = integral_functional(None, (0.0, 1.0), &gauss5(), (0.0, 1.0), 0).unwrap();
        let l = LinearFunctionalSet::from_atoms(vec![atom])
            .compose_diffop(&LinearDifferentialOperator::directional(&[1.0], 0))
            .unwrap();
        let f: Arc<dyn RealFunction> = Arc::new(MonomialSum::poly1d(&[0.0, 0.0, 1.0]));
        assert_abs_diff_eq!(l.apply_to_function(&f).unwrap()[0], 1.0, epsilon = 1e-13);
    }

    #[test]
    fn integral_examples() {
        let one: Arc<dyn RealFunction> = Arc::new(Constant::new(1.0, 1));
        let atom = integral_functional(None, (0.0, 1.0), &gauss5(), (0.0, 1.0), 0).unwrap();
        let l = LinearFunctionalSet::from_atoms(vec![atom]);
        assert_abs_diff_eq!(l.apply_to_function(&one).unwrap()[0], 1.0, epsilon = 1e-14);

        // indicator of (0, 0.5) against f(x) = x
        let ind: Arc<dyn RealFunction> =
            Arc::new(crate::functions::PiecewiseConstant::indicator(0.0, 0.5));
        let atom = integral_functional(Some(ind), (0.0, 1.0), &gauss5(), (0.0, 1.0), 0).unwrap();
        let l = LinearFunctionalSet::from_atoms(vec![atom]);
        let f: Arc<dyn RealFunction> = Arc::new(MonomialSum::poly1d(&[0.0, 1.0]));
        assert_abs_diff_eq!(l.apply_to_function(&f).unwrap()[0], 0.125, epsilon = 1e-14);

        // unit-height hat of base 2h has area h
        let h = 0.25;
        let hat: Arc<dyn RealFunction> =
            Arc::new(HatFunction::new(0.25, 0.25 + h, 0.25 + 2.0 * h).unwrap());
        let atom = integral_functional(Some(hat), (0.0, 1.0), &gauss5(), (0.0, 1.0), 0).unwrap();
        let l = LinearFunctionalSet::from_atoms(vec![atom]);
        assert_abs_diff_eq!(l.apply_to_function(&one).unwrap()[0], h, epsilon = 1e-14);
    }

    #[test]
    fn region_outside_domain_rejected() {
        let res = integral_functional(None, (-0.5, 0.5), &gauss5(), (0.0, 1.0), 0);
        assert!(matches!(res, Err(Error::Domain(_))));
    }

    #[test]
    fn budget_violation_fails_fast() {
        let k = MaternKernel1D::new(HalfInteger::Nu3_2, 1.0, 1.0).unwrap();
        let op = LinearDifferentialOperator::negative_laplacian(1, 0);
        let l = LinearFunctionalSet::point_evaluations_1d(0, &[0.5])
            .compose_diffop(&op)
            .unwrap();
        let delta = LinearFunctionalSet::point_evaluations_1d(0, &[0.0]);
        assert!(apply_functionals_to_kernel(&l, &k, &delta).is_err());
    }

    #[test]
    fn kernel_application_is_symmetric() {
        let k = MaternKernel1D::new(HalfInteger::Nu5_2, 0.8, 2.0).unwrap();
        let op = LinearDifferentialOperator::negative_laplacian(1, 0);
        let l1 = LinearFunctionalSet::point_evaluations_1d(0, &[0.1, 0.4, 0.9])
            .compose_diffop(&op)
            .unwrap();
        let atom = integral_functional(None, (0.0, 1.0), &gauss5(), (0.0, 1.0), 0).unwrap();
        let l2 = LinearFunctionalSet::stack(&[
            &LinearFunctionalSet::point_evaluations_1d(0, &[0.2, 0.7]),
            &LinearFunctionalSet::from_atoms(vec![atom]),
        ]);
        let m12 = apply_functionals_to_kernel(&l1, &k, &l2).unwrap();
        let m21 = apply_functionals_to_kernel(&l2, &k, &l1).unwrap();
        let diff = (&m12 - m21.transpose()).abs().max();
        assert!(diff < 1e-12, "asymmetry {diff}");
    }
}
