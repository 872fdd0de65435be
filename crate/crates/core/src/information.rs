//! Constructors turning PDEs, boundary conditions, conservation laws, and
//! measurements into affine observation blocks I[u] = L[u] − y.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::functions::{MeanFunction, RealFunction};
use crate::gp::{GaussianProcess, GaussianVector};
use crate::mwr::{self, WeakTestFunction};
use crate::operators::{
    integral_functional, LinearDifferentialOperator, LinearFunctionalSet, QuadratureRule,
    TrialProjection,
};

/// Provenance of an information block.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BlockLabel {
    Pde,
    Boundary,
    Stationarity,
    Measurement,
}

/// An affine observation (L, y, μ, Σ) of a process: conditioning enforces
/// L[u] + ε = y with ε ~ N(μ, Σ). The associated information operator is
/// I[u] = L[u] − y.
#[derive(Clone)]
pub struct InformationBlock {
    pub functionals: LinearFunctionalSet,
    pub y: DVector<f64>,
    pub noise_mean: DVector<f64>,
    pub noise_cov: DMatrix<f64>,
    pub label: BlockLabel,
}

impl InformationBlock {
    pub fn new(
        functionals: LinearFunctionalSet,
        y: DVector<f64>,
        noise_mean: DVector<f64>,
        noise_cov: DMatrix<f64>,
        label: BlockLabel,
    ) -> Result<Self> {
        let n = functionals.len();
        if n == 0 {
            return Err(Error::Contract(
                "an information block needs at least one functional".into(),
            ));
        }
        if y.len() != n || noise_mean.len() != n || noise_cov.nrows() != n || noise_cov.ncols() != n
        {
            return Err(Error::DimensionMismatch {
                context: "information block",
                expected: n,
                got: y.len(),
            });
        }
        Ok(Self {
            functionals,
            y,
            noise_mean,
            noise_cov,
            label,
        })
    }

    /// Exact (noise-free) observation L[u] = y.
    pub fn exact(functionals: LinearFunctionalSet, y: DVector<f64>, label: BlockLabel) -> Result<Self> {
        let n = functionals.len();
        Self::new(
            functionals,
            y,
            DVector::zeros(n),
            DMatrix::zeros(n, n),
            label,
        )
    }

    pub fn len(&self) -> usize {
        self.functionals.len()
    }

    pub fn is_empty(&self) -> bool {
        self.functionals.is_empty()
    }

    pub fn noise(&self) -> GaussianVector {
        GaussianVector::new(self.noise_mean.clone(), self.noise_cov.clone())
            .expect("block noise validated at construction")
    }

    /// I[u] = L[u] − y for a concrete (surrogate) function u.
    pub fn evaluate_residual(&self, u: &MeanFunction) -> Result<DVector<f64>> {
        Ok(self.functionals.apply_to_mean(u)? - &self.y)
    }

    /// Conditions a process on this block.
    pub fn conditioned(&self, gp: &GaussianProcess) -> Result<GaussianProcess> {
        gp.condition(&self.functionals, &self.y, &self.noise())
    }
}

/// Right-hand side of an operator equation: either a known function or an
/// output of the joint process (uncertain right-hand side).
#[derive(Clone)]
pub enum RhsSpec {
    Known(Arc<dyn RealFunction>),
    ProcessOutput(usize),
}

/// A rectangular domain (an interval in 1D).
#[derive(Debug, Clone)]
pub struct Domain {
    bounds: Vec<(f64, f64)>,
}

impl Domain {
    pub fn interval(a: f64, b: f64) -> Result<Self> {
        Self::new(vec![(a, b)])
    }

    pub fn new(bounds: Vec<(f64, f64)>) -> Result<Self> {
        if bounds.is_empty() || bounds.iter().any(|(a, b)| !(a < b)) {
            return Err(Error::Domain("domain bounds must satisfy a < b".into()));
        }
        Ok(Self { bounds })
    }

    pub fn dim(&self) -> usize {
        self.bounds.len()
    }

    pub fn bounds(&self) -> &[(f64, f64)] {
        &self.bounds
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.len() == self.dim()
            && x.iter()
                .zip(&self.bounds)
                .all(|(&xi, &(a, b))| xi >= a - 1e-12 && xi <= b + 1e-12)
    }

    /// True if the point lies on the boundary (some coordinate at a bound).
    pub fn on_boundary(&self, x: &[f64]) -> bool {
        self.contains(x)
            && x.iter()
                .zip(&self.bounds)
                .any(|(&xi, &(a, b))| (xi - a).abs() < 1e-12 || (xi - b).abs() < 1e-12)
    }

    /// Exterior normal at a 1D boundary point: −1 at the left endpoint,
    /// +1 at the right.
    pub fn normal_1d(&self, x: f64) -> Result<f64> {
        let (a, b) = self.bounds[0];
        if (x - a).abs() < 1e-12 {
            Ok(-1.0)
        } else if (x - b).abs() < 1e-12 {
            Ok(1.0)
        } else {
            Err(Error::Domain(format!(
                "{x} is not a boundary point of [{a}, {b}]"
            )))
        }
    }
}

/// Enforces the PDE D[u] = f at a finite set of collocation points; with an
/// uncertain right-hand side the block reads D[u](xᵢ) − f̂(xᵢ) = 0 jointly.
pub fn pde_collocation_block(
    op: &LinearDifferentialOperator,
    rhs: &RhsSpec,
    points: &[Vec<f64>],
    domain: &Domain,
) -> Result<InformationBlock> {
    for p in points {
        if !domain.contains(p) {
            return Err(Error::Domain(format!(
                "collocation point {p:?} outside the domain"
            )));
        }
    }
    let composed = LinearFunctionalSet::point_evaluations(0, points).compose_diffop(op)?;
    match rhs {
        RhsSpec::Known(f) => {
            let y = DVector::from_iterator(points.len(), points.iter().map(|p| f.eval(p)));
            InformationBlock::exact(composed, y, BlockLabel::Pde)
        }
        RhsSpec::ProcessOutput(out) => {
            let rhs_evals = LinearFunctionalSet::point_evaluations(*out, points);
            let joint =
                LinearFunctionalSet::linear_combination(&[(1.0, &composed), (-1.0, &rhs_evals)])?;
            InformationBlock::exact(joint, DVector::zeros(points.len()), BlockLabel::Pde)
        }
    }
}

/// Weak-form Galerkin observations B(u, ψᵢ) = ⟨f, ψᵢ⟩ with test functions
/// vanishing on the boundary.
pub fn weak_galerkin_block(
    kappa: &Arc<dyn RealFunction>,
    rhs: &Arc<dyn RealFunction>,
    tests: &[WeakTestFunction],
    domain: (f64, f64),
    panel_rule: &QuadratureRule,
) -> Result<InformationBlock> {
    validate_weak_tests(tests, domain)?;
    let rows = mwr::weak_stiffness_rows(kappa, tests, domain, panel_rule)?;
    let load = mwr::weak_load_vector(tests, rhs, domain, panel_rule)?;
    InformationBlock::exact(rows, load, BlockLabel::Pde)
}

fn validate_weak_tests(tests: &[WeakTestFunction], domain: (f64, f64)) -> Result<()> {
    if tests.is_empty() {
        return Err(Error::Contract("need at least one test function".into()));
    }
    for t in tests {
        let (lo, hi) = t.support();
        if lo < domain.0 - 1e-12 || hi > domain.1 + 1e-12 {
            return Err(Error::Domain(format!(
                "test support [{lo}, {hi}] exceeds the domain [{}, {}]",
                domain.0, domain.1
            )));
        }
        let va = t.function.eval(&[domain.0]);
        let vb = t.function.eval(&[domain.1]);
        if va.abs() > 1e-12 || vb.abs() > 1e-12 {
            return Err(Error::Domain(
                "weak test functions must vanish on the boundary".into(),
            ));
        }
    }
    Ok(())
}

/// Test specification for an MWR information operator.
pub enum MwrTests<'a> {
    /// Strong form: arbitrary test functionals composed with D.
    Strong {
        functionals: LinearFunctionalSet,
        op: &'a LinearDifferentialOperator,
    },
    /// Weak form: test functions inducing B(·, ψᵢ).
    Weak {
        tests: &'a [WeakTestFunction],
        kappa: Arc<dyn RealFunction>,
    },
}

/// The weighted-residual information operator l ∘ D^{(w)} ∘ P with rhs
/// l[f]. With a trial projection the functional reduces to D̂·P_{R^m}[·],
/// so conditioning updates only the trial coordinates; without one
/// (`projection = None`, the identity) the operators act on the full paths.
pub fn mwr_block(
    tests: MwrTests<'_>,
    projection: Option<&Arc<TrialProjection>>,
    rhs: &Arc<dyn RealFunction>,
    domain: (f64, f64),
    panel_rule: &QuadratureRule,
) -> Result<InformationBlock> {
    let (image_rows, load) = match tests {
        MwrTests::Strong { functionals, op } => {
            let load = functionals.apply_to_function(rhs)?;
            (functionals.compose_diffop(op)?, load)
        }
        MwrTests::Weak { tests, kappa } => {
            validate_weak_tests(tests, domain)?;
            let rows = mwr::weak_stiffness_rows(&kappa, tests, domain, panel_rule)?;
            let load = mwr::weak_load_vector(tests, rhs, domain, panel_rule)?;
            (rows, load)
        }
    };
    let rows = match projection {
        Some(p) => image_rows.compose_projection(p)?,
        None => image_rows,
    };
    InformationBlock::exact(rows, load, BlockLabel::Pde)
}

/// Boundary-condition kinds.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BcKind {
    Dirichlet,
    Neumann,
}

/// Prescribed boundary data: known values or an output of the joint process
/// (e.g. an uncertain boundary heat flux).
#[derive(Clone)]
pub enum BoundaryValue {
    Known(Vec<f64>),
    ProcessOutput(usize),
}

/// A Dirichlet or Neumann boundary condition on a set of boundary sites.
#[derive(Clone)]
pub struct BoundaryCondition {
    pub kind: BcKind,
    pub sites: Vec<Vec<f64>>,
    pub value: BoundaryValue,
    /// Exterior normals per site (Neumann); in 1D they default to −1 at the
    /// left endpoint and +1 at the right.
    pub normals: Option<Vec<Vec<f64>>>,
    /// Thermal conductivity κ entering the Neumann flux −κ ⟨η, ∇u⟩.
    pub conductivity: f64,
}

impl BoundaryCondition {
    pub fn dirichlet(sites: Vec<Vec<f64>>, values: Vec<f64>) -> Self {
        Self {
            kind: BcKind::Dirichlet,
            sites,
            value: BoundaryValue::Known(values),
            normals: None,
            conductivity: 1.0,
        }
    }

    pub fn neumann_1d(sites: Vec<f64>, value: BoundaryValue, conductivity: f64) -> Self {
        Self {
            kind: BcKind::Neumann,
            sites: sites.into_iter().map(|x| vec![x]).collect(),
            value,
            normals: None,
            conductivity,
        }
    }
}

/// Builds the observation block of a boundary condition: Dirichlet entries
/// are δ_x[u]; Neumann entries are the boundary heat flux −κ ∂_η u(x),
/// optionally tied to an uncertain flux output.
pub fn boundary_block(bc: &BoundaryCondition, domain: &Domain) -> Result<InformationBlock> {
    if bc.sites.is_empty() {
        return Err(Error::Contract("boundary block needs at least one site".into()));
    }
    for s in &bc.sites {
        if !domain.on_boundary(s) {
            return Err(Error::Domain(format!(
                "site {s:?} does not lie on the domain boundary"
            )));
        }
    }
    let n = bc.sites.len();
    let lhs = match bc.kind {
        BcKind::Dirichlet => LinearFunctionalSet::point_evaluations(0, &bc.sites),
        BcKind::Neumann => {
            // one row per site: −κ Σᵢ ηᵢ ∂ᵢ u at the site
            let mut row_sets = Vec::with_capacity(n);
            for (i, site) in bc.sites.iter().enumerate() {
                let normal = match &bc.normals {
                    Some(ns) => ns[i].clone(),
                    None => {
                        if domain.dim() != 1 {
                            return Err(Error::Contract(
                                "Neumann conditions in d > 1 need explicit normals".into(),
                            ));
                        }
                        vec![domain.normal_1d(site[0])?]
                    }
                };
                let scaled: Vec<f64> = normal.iter().map(|c| -bc.conductivity * c).collect();
                let op = LinearDifferentialOperator::directional(&scaled, 0);
                row_sets.push(
                    LinearFunctionalSet::point_evaluations(0, std::slice::from_ref(site))
                        .compose_diffop(&op)?,
                );
            }
            let refs: Vec<&LinearFunctionalSet> = row_sets.iter().collect();
            LinearFunctionalSet::stack(&refs)
        }
    };
    match &bc.value {
        BoundaryValue::Known(values) => {
            if values.len() != n {
                return Err(Error::DimensionMismatch {
                    context: "boundary values",
                    expected: n,
                    got: values.len(),
                });
            }
            InformationBlock::exact(
                lhs,
                DVector::from_vec(values.clone()),
                BlockLabel::Boundary,
            )
        }
        BoundaryValue::ProcessOutput(out) => {
            let flux_evals = LinearFunctionalSet::point_evaluations(*out, &bc.sites);
            let joint =
                LinearFunctionalSet::linear_combination(&[(1.0, &lhs), (-1.0, &flux_evals)])?;
            InformationBlock::exact(joint, DVector::zeros(n), BlockLabel::Boundary)
        }
    }
}

/// Thermal-stationarity constraint for the 1D strip model: the volumetric
/// heat production balances the boundary flux,
/// h·∫₀^w q̇_V − h·(q̇_A(0) + q̇_A(w)) = 0.
pub fn stationarity_block(
    qv_output: usize,
    qa_output: usize,
    width: f64,
    height: f64,
    panel_rule: &QuadratureRule,
) -> Result<InformationBlock> {
    if !(width > 0.0) || !(height > 0.0) {
        return Err(Error::Contract(
            "stationarity block needs positive width and height".into(),
        ));
    }
    let volume = integral_functional(None, (0.0, width), panel_rule, (0.0, width), qv_output)?;
    let atoms = vec![
        volume,
        crate::operators::FunctionalAtom::point(qa_output, vec![0.0]),
        crate::operators::FunctionalAtom::point(qa_output, vec![width]),
    ];
    let transform = DMatrix::from_row_slice(1, 3, &[height, -height, -height]);
    let functionals = LinearFunctionalSet::from_atoms(atoms).with_transform(transform)?;
    InformationBlock::exact(functionals, DVector::zeros(1), BlockLabel::Stationarity)
}

/// Noisy point measurements of the solution: δ_X[u] + ε = y with
/// ε ~ N(0, σ²I).
pub fn measurement_block(
    sites: &[Vec<f64>],
    values: &DVector<f64>,
    noise_std: f64,
) -> Result<InformationBlock> {
    if sites.is_empty() {
        return Err(Error::Contract(
            "measurement block needs at least one site".into(),
        ));
    }
    if values.len() != sites.len() {
        return Err(Error::DimensionMismatch {
            context: "measurement values",
            expected: sites.len(),
            got: values.len(),
        });
    }
    if noise_std < 0.0 {
        return Err(Error::InvalidParameter {
            name: "noise_std",
            reason: "must be non-negative".into(),
        });
    }
    let n = sites.len();
    InformationBlock::new(
        LinearFunctionalSet::point_evaluations(0, sites),
        values.clone(),
        DVector::zeros(n),
        DMatrix::identity(n, n) * noise_std * noise_std,
        BlockLabel::Measurement,
    )
}
