//! Classical method-of-weighted-residuals solver: assemble D̂c = f̂ and solve
//! it directly. This is the reference the probabilistic solver is tested
//! against.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::functions::{HatFunction, Product, RealFunction};
use crate::operators::{
    integral_functional, LinearDifferentialOperator, LinearFunctionalSet, QuadratureRule,
};

/// Boundary handling of a 1D linear Lagrange basis.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BoundaryHandling {
    /// Only interior hats: every basis function vanishes at the boundary.
    ClampedZero,
    /// Interior hats plus modified endpoint elements (half hats), so that
    /// arbitrary piecewise-linear boundary values lie in the span.
    IncludeBoundary,
}

/// Piecewise-linear Lagrange elements on a strictly increasing node grid.
#[derive(Clone)]
pub struct LagrangeBasis1D {
    nodes: Vec<f64>,
    handling: BoundaryHandling,
    hats: Vec<HatFunction>,
}

impl LagrangeBasis1D {
    pub fn new(nodes: Vec<f64>, handling: BoundaryHandling) -> Result<Self> {
        if nodes.len() < 2 || !nodes.windows(2).all(|w| w[0] < w[1]) {
            return Err(Error::Contract(
                "Lagrange basis needs at least two strictly increasing nodes".into(),
            ));
        }
        if handling == BoundaryHandling::ClampedZero && nodes.len() < 3 {
            return Err(Error::Contract(
                "a clamped basis needs at least one interior node".into(),
            ));
        }
        let n = nodes.len();
        let mut hats = Vec::new();
        let range = match handling {
            BoundaryHandling::ClampedZero => 1..n - 1,
            BoundaryHandling::IncludeBoundary => 0..n,
        };
        for i in range {
            let left = if i == 0 { nodes[0] } else { nodes[i - 1] };
            let right = if i + 1 == n { nodes[n - 1] } else { nodes[i + 1] };
            hats.push(HatFunction::new(left, nodes[i], right)?);
        }
        Ok(Self {
            nodes,
            handling,
            hats,
        })
    }

    /// Uniform grid with `count` nodes on [a, b].
    pub fn uniform(a: f64, b: f64, count: usize, handling: BoundaryHandling) -> Result<Self> {
        if count < 2 || !(a < b) {
            return Err(Error::Contract(
                "uniform basis needs a < b and at least two nodes".into(),
            ));
        }
        let nodes = (0..count)
            .map(|i| a + (b - a) * i as f64 / (count - 1) as f64)
            .collect();
        Self::new(nodes, handling)
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn handling(&self) -> BoundaryHandling {
        self.handling
    }

    pub fn len(&self) -> usize {
        self.hats.len()
    }

    pub fn is_empty(&self) -> bool {
        self.hats.is_empty()
    }

    pub fn hat(&self, i: usize) -> &HatFunction {
        &self.hats[i]
    }

    /// Basis functions as shareable function objects.
    pub fn functions(&self) -> Vec<Arc<dyn RealFunction>> {
        self.hats
            .iter()
            .map(|h| Arc::new(h.clone()) as Arc<dyn RealFunction>)
            .collect()
    }

    /// The interior hats (those vanishing at both endpoints).
    pub fn interior_functions(&self) -> Vec<Arc<dyn RealFunction>> {
        let (a, b) = (self.nodes[0], *self.nodes.last().unwrap());
        self.hats
            .iter()
            .filter(|h| h.center() > a && h.center() < b)
            .map(|h| Arc::new(h.clone()) as Arc<dyn RealFunction>)
            .collect()
    }
}

/// A weak-form test function carrying its derivative in closed form.
#[derive(Clone)]
pub struct WeakTestFunction {
    pub function: Arc<dyn RealFunction>,
    pub derivative: Arc<dyn RealFunction>,
}

impl WeakTestFunction {
    pub fn from_hat(hat: &HatFunction) -> Self {
        Self {
            function: Arc::new(hat.clone()),
            derivative: Arc::new(hat.slope_function()),
        }
    }

    pub fn support(&self) -> (f64, f64) {
        let pts = self.function.breakpoints();
        (
            pts.iter().copied().fold(f64::INFINITY, f64::min),
            pts.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        )
    }
}

/// Test rows l_i ∘ D for strong-form collocation at the given points.
pub fn collocation_rows(
    op: &LinearDifferentialOperator,
    points: &[Vec<f64>],
) -> Result<LinearFunctionalSet> {
    LinearFunctionalSet::point_evaluations(0, points).compose_diffop(op)
}

/// Dirichlet boundary rows δ_x.
pub fn dirichlet_rows(sites: &[f64]) -> LinearFunctionalSet {
    LinearFunctionalSet::point_evaluations_1d(0, sites)
}

/// Weak-form stiffness rows u ↦ B(u, ψᵢ) = ∫ κ u′ ψᵢ′ over the domain.
pub fn weak_stiffness_rows(
    kappa: &Arc<dyn RealFunction>,
    tests: &[WeakTestFunction],
    domain: (f64, f64),
    panel_rule: &QuadratureRule,
) -> Result<LinearFunctionalSet> {
    let mut atoms = Vec::with_capacity(tests.len());
    for t in tests {
        let weight: Arc<dyn RealFunction> =
            Arc::new(Product::new(vec![kappa.clone(), t.derivative.clone()]));
        atoms.push(crate::operators::weighted_derivative_integral(
            Some(weight),
            crate::multi_index::MultiIndex::new(vec![1]),
            domain,
            panel_rule,
            domain,
            0,
        )?);
    }
    Ok(LinearFunctionalSet::from_atoms(atoms))
}

/// Subdomain (finite volume) rows u ↦ ∫_{Dᵢ} D[u].
pub fn subdomain_rows(
    op: &LinearDifferentialOperator,
    subdomains: &[(f64, f64)],
    domain: (f64, f64),
    panel_rule: &QuadratureRule,
) -> Result<LinearFunctionalSet> {
    let atoms = subdomains
        .iter()
        .map(|&(a, b)| integral_functional(None, (a, b), panel_rule, domain, 0))
        .collect::<Result<Vec<_>>>()?;
    LinearFunctionalSet::from_atoms(atoms).compose_diffop(op)
}

/// Load vector entries l_i[f].
pub fn load_vector(
    tests: &LinearFunctionalSet,
    rhs: &Arc<dyn RealFunction>,
) -> Result<DVector<f64>> {
    tests.apply_to_function(rhs)
}

/// Weak-form load entries ⟨f, ψᵢ⟩_{L2}.
pub fn weak_load_vector(
    tests: &[WeakTestFunction],
    rhs: &Arc<dyn RealFunction>,
    domain: (f64, f64),
    panel_rule: &QuadratureRule,
) -> Result<DVector<f64>> {
    let atoms = tests
        .iter()
        .map(|t| integral_functional(Some(t.function.clone()), domain, panel_rule, domain, 0))
        .collect::<Result<Vec<_>>>()?;
    LinearFunctionalSet::from_atoms(atoms).apply_to_function(rhs)
}

/// The assembled weighted-residual system D̂ c = f̂.
#[derive(Debug, Clone)]
pub struct MwrSystem {
    dhat: DMatrix<f64>,
    fhat: DVector<f64>,
}

impl MwrSystem {
    pub fn dhat(&self) -> &DMatrix<f64> {
        &self.dhat
    }

    pub fn fhat(&self) -> &DVector<f64> {
        &self.fhat
    }

    /// ‖D̂c − f̂‖_∞ for a candidate coordinate vector.
    pub fn residual_norm(&self, c: &DVector<f64>) -> f64 {
        (&self.dhat * c - &self.fhat).abs().max()
    }
}

/// Assembles D̂_{ij} = rowᵢ[φ⁽ʲ⁾] and pairs it with the given load vector.
/// The rows must already incorporate the differential operator or bilinear
/// form (see [`collocation_rows`], [`weak_stiffness_rows`], …).
pub fn assemble(
    trial: &[Arc<dyn RealFunction>],
    rows: &LinearFunctionalSet,
    rhs: &DVector<f64>,
) -> Result<MwrSystem> {
    if rows.len() != rhs.len() {
        return Err(Error::DimensionMismatch {
            context: "weighted-residual assembly",
            expected: rows.len(),
            got: rhs.len(),
        });
    }
    let mut dhat = DMatrix::zeros(rows.len(), trial.len());
    for (j, phi) in trial.iter().enumerate() {
        dhat.set_column(j, &rows.apply_to_function(phi)?);
    }
    Ok(MwrSystem {
        dhat,
        fhat: rhs.clone(),
    })
}

/// Solves D̂ c = f̂ by dense LU with a condition estimate guard.
pub fn solve(system: &MwrSystem) -> Result<DVector<f64>> {
    let n = system.dhat.nrows();
    if n != system.dhat.ncols() {
        return Err(Error::SingularSystem(format!(
            "system must be square, got {}x{}",
            n,
            system.dhat.ncols()
        )));
    }
    let inv = system
        .dhat
        .clone()
        .try_inverse()
        .ok_or_else(|| Error::SingularSystem("system matrix is singular".into()))?;
    let cond = one_norm(&system.dhat) * one_norm(&inv);
    if !cond.is_finite() || cond > 1e12 {
        return Err(Error::SingularSystem(format!(
            "condition estimate {cond:.3e} exceeds 1e12"
        )));
    }
    let lu = system.dhat.clone().lu();
    let c = lu
        .solve(&system.fhat)
        .ok_or_else(|| Error::SingularSystem("LU solve failed".into()))?;
    Ok(c)
}

/// Assembles and solves the mixed 1D weak Poisson problem
/// −(κ u′)′ = f on (a, b) with Dirichlet values (g_a, g_b): trial functions
/// are the full hat basis, rows are stacked [BC; PDE] with the interior hats
/// as weak test functions.
pub struct PoissonFem1D {
    pub basis: LagrangeBasis1D,
    pub system: MwrSystem,
    pub coords: DVector<f64>,
    pub tests: Vec<WeakTestFunction>,
}

pub fn poisson_fem_1d(
    nodes: Vec<f64>,
    kappa: Arc<dyn RealFunction>,
    rhs: Arc<dyn RealFunction>,
    dirichlet: (f64, f64),
    panel_rule: &QuadratureRule,
) -> Result<PoissonFem1D> {
    let basis = LagrangeBasis1D::new(nodes, BoundaryHandling::IncludeBoundary)?;
    let domain = (basis.nodes()[0], *basis.nodes().last().unwrap());
    let tests: Vec<WeakTestFunction> = basis
        .hats()
        .iter()
        .filter(|h| h.center() > domain.0 && h.center() < domain.1)
        .map(WeakTestFunction::from_hat)
        .collect();

    let bc_rows = dirichlet_rows(&[domain.0, domain.1]);
    let pde_rows = weak_stiffness_rows(&kappa, &tests, domain, panel_rule)?;
    let rows = LinearFunctionalSet::stack(&[&bc_rows, &pde_rows]);

    let mut rhs_vec = DVector::zeros(rows.len());
    rhs_vec[0] = dirichlet.0;
    rhs_vec[1] = dirichlet.1;
    let load = weak_load_vector(&tests, &rhs, domain, panel_rule)?;
    rhs_vec.rows_mut(2, load.len()).copy_from(&load);

    let system = assemble(&basis.functions(), &rows, &rhs_vec)?;
    let coords = solve(&system)?;
    Ok(PoissonFem1D {
        basis,
        system,
        coords,
        tests,
    })
}

impl LagrangeBasis1D {
    fn hats(&self) -> &[HatFunction] {
        &self.hats
    }
}

fn one_norm(m: &DMatrix<f64>) -> f64 {
    (0..m.ncols())
        .map(|j| m.column(j).iter().map(|v| v.abs()).sum::<f64>())
        .fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::functions::Constant;
    use approx::assert_abs_diff_eq;

    fn gauss5() -> QuadratureRule {
        QuadratureRule::gauss_legendre(5).unwrap()
    }

    fn constant(v: f64) -> Arc<dyn RealFunction> {
        Arc::new(Constant::new(v, 1))
    }

    #[test]
    fn lagrange_kronecker_property() {
        let basis =
            LagrangeBasis1D::uniform(0.0, 1.0, 5, BoundaryHandling::IncludeBoundary).unwrap();
        for (i, f) in basis.functions().iter().enumerate() {
            for (j, &x) in basis.nodes().iter().enumerate() {
                let expect = if i == j { 1.0 } else { 0.0 };
                assert_abs_diff_eq!(f.eval(&[x]), expect);
            }
        }
    }

    #[test]
    fn non_monotone_nodes_rejected() {
        assert!(LagrangeBasis1D::new(vec![0.0, 0.5, 0.4], BoundaryHandling::IncludeBoundary).is_err());
    }

    #[test]
    fn span_reproduces_piecewise_linear_interpolation() {
        let basis =
            LagrangeBasis1D::uniform(0.0, 1.0, 5, BoundaryHandling::ClampedZero).unwrap();
        // c = (1, 2, 1) on the three interior hats: value 2 at the middle node
        let combo = crate::functions::LinearCombination::new(
            vec![1.0, 2.0, 1.0],
            basis.functions(),
        )
        .unwrap();
        assert_abs_diff_eq!(combo.eval(&[0.5]), 2.0);
        // midpoint of an element: each covering hat contributes 0.5
        assert_abs_diff_eq!(basis.functions()[0].eval(&[0.375]), 0.5);
        assert_abs_diff_eq!(basis.functions()[1].eval(&[0.375]), 0.5);
    }

    #[test]
    fn uniform_hat_stiffness_is_tridiagonal() {
        let basis =
            LagrangeBasis1D::uniform(0.0, 1.0, 5, BoundaryHandling::ClampedZero).unwrap();
        let tests: Vec<WeakTestFunction> = (0..3)
            .map(|i| WeakTestFunction::from_hat(basis.hat(i)))
            .collect();
        let rows = weak_stiffness_rows(&constant(1.0), &tests, (0.0, 1.0), &gauss5()).unwrap();
        let load = weak_load_vector(&tests, &constant(1.0), (0.0, 1.0), &gauss5()).unwrap();
        let system = assemble(&basis.functions(), &rows, &load).unwrap();
        let h = 0.25;
        for i in 0..3 {
            assert_abs_diff_eq!(system.dhat()[(i, i)], 2.0 / h, epsilon = 1e-12);
            assert_abs_diff_eq!(system.fhat()[i], h, epsilon = 1e-13);
        }
        assert_abs_diff_eq!(system.dhat()[(0, 1)], -1.0 / h, epsilon = 1e-12);
        assert_abs_diff_eq!(system.dhat()[(1, 0)], -1.0 / h, epsilon = 1e-12);
        assert_abs_diff_eq!(system.dhat()[(0, 2)], 0.0, epsilon = 1e-13);
        // Ritz-Galerkin symmetry
        assert!((system.dhat() - system.dhat().transpose()).abs().max() < 1e-12);
    }

    #[test]
    fn interior_fem_is_nodally_exact() {
        // −u″ = 1 on (0,1), zero Dirichlet: u(x) = x(1−x)/2 at the nodes
        let basis =
            LagrangeBasis1D::uniform(0.0, 1.0, 5, BoundaryHandling::ClampedZero).unwrap();
        let tests: Vec<WeakTestFunction> = (0..3)
            .map(|i| WeakTestFunction::from_hat(basis.hat(i)))
            .collect();
        let rows = weak_stiffness_rows(&constant(1.0), &tests, (0.0, 1.0), &gauss5()).unwrap();
        let load = weak_load_vector(&tests, &constant(1.0), (0.0, 1.0), &gauss5()).unwrap();
        let system = assemble(&basis.functions(), &rows, &load).unwrap();
        let c = solve(&system).unwrap();
        assert_abs_diff_eq!(c[0], 0.09375, epsilon = 1e-9);
        assert_abs_diff_eq!(c[1], 0.125, epsilon = 1e-9);
        assert_abs_diff_eq!(c[2], 0.09375, epsilon = 1e-9);
        assert!(system.residual_norm(&c) < 1e-9);
    }

    #[test]
    fn single_hat_scalar_solve() {
        let basis =
            LagrangeBasis1D::uniform(0.0, 1.0, 3, BoundaryHandling::ClampedZero).unwrap();
        let tests = vec![WeakTestFunction::from_hat(basis.hat(0))];
        let rows = weak_stiffness_rows(&constant(1.0), &tests, (0.0, 1.0), &gauss5()).unwrap();
        let load = weak_load_vector(&tests, &constant(1.0), (0.0, 1.0), &gauss5()).unwrap();
        let system = assemble(&basis.functions(), &rows, &load).unwrap();
        let c = solve(&system).unwrap();
        assert_abs_diff_eq!(c[0], system.fhat()[0] / system.dhat()[(0, 0)], epsilon = 1e-14);
    }

    #[test]
    fn collocation_with_polynomial_trial() {
        // trial {1, x, x²}, D = −d²/dx²: each PDE row is (0, 0, −2)
        let trial: Vec<Arc<dyn RealFunction>> = vec![
            constant(1.0),
            Arc::new(crate::functions::MonomialSum::poly1d(&[0.0, 1.0])),
            Arc::new(crate::functions::MonomialSum::poly1d(&[0.0, 0.0, 1.0])),
        ];
        let op = LinearDifferentialOperator::negative_laplacian(1, 0);
        let pde_rows = collocation_rows(&op, &[vec![0.5]]).unwrap();
        let bc_rows = dirichlet_rows(&[0.0, 1.0]);
        let rows = LinearFunctionalSet::stack(&[&bc_rows, &pde_rows]);
        let rhs = DVector::from_vec(vec![0.0, 0.0, 1.0]);
        let system = assemble(&trial, &rows, &rhs).unwrap();
        assert_abs_diff_eq!(system.dhat()[(2, 0)], 0.0);
        assert_abs_diff_eq!(system.dhat()[(2, 1)], 0.0);
        assert_abs_diff_eq!(system.dhat()[(2, 2)], -2.0);
        let c = solve(&system).unwrap();
        // u(x) = x(1−x)/2 exactly
        assert_abs_diff_eq!(c[0], 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(c[1], 0.5, epsilon = 1e-12);
        assert_abs_diff_eq!(c[2], -0.5, epsilon = 1e-12);
    }

    #[test]
    fn singular_system_detected() {
        let trial: Vec<Arc<dyn RealFunction>> = vec![constant(1.0), constant(1.0)];
        let rows = dirichlet_rows(&[0.25, 0.75]);
        let system = assemble(&trial, &rows, &DVector::zeros(2)).unwrap();
        assert!(matches!(solve(&system), Err(Error::SingularSystem(_))));
    }

    #[test]
    fn mixed_poisson_fem_matches_clamped_solution() {
        // zero Dirichlet data must reproduce the interior solve
        let fem = poisson_fem_1d(
            vec![0.0, 0.25, 0.5, 0.75, 1.0],
            constant(1.0),
            constant(1.0),
            (0.0, 0.0),
            &gauss5(),
        )
        .unwrap();
        assert_abs_diff_eq!(fem.coords[0], 0.0, epsilon = 1e-10);
        assert_abs_diff_eq!(fem.coords[1], 0.09375, epsilon = 1e-9);
        assert_abs_diff_eq!(fem.coords[2], 0.125, epsilon = 1e-9);
        assert_abs_diff_eq!(fem.coords[3], 0.09375, epsilon = 1e-9);
        assert_abs_diff_eq!(fem.coords[4], 0.0, epsilon = 1e-10);
    }
}
