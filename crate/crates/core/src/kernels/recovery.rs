//! The transformed prior that makes GP inference reproduce classical
//! weighted-residual solutions in the posterior mean.

use std::collections::HashMap;
use std::sync::{Arc, RwLock};

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::functions::MeanFunction;
use crate::kernels::Kernel;
use crate::multi_index::MultiIndex;
use crate::operators::TrialProjection;

/// Covariance k = P k̃ P' + (I−P) k̃ (I−P)' of the recovery prior, expanded as
/// k̃ − P k̃ − k̃ P' + 2 P k̃ P'.
///
/// The construction decorrelates the trial span from its complement, so an
/// observation made through the projection carries no information about the
/// complement and the posterior mean stays inside the trial span.
///
/// All trial integrals (the Gram, M = ∫∫ φ k̃ φ, and the slices q(y) =
/// ∫ φ k̃(·, y)) are evaluated with the projection's own fixed quadrature
/// rule, which makes the cross-covariance annihilation
/// (I−P) k P'_{R^m} = 0 hold to machine precision.
pub struct RecoveryKernel {
    base: Arc<dyn Kernel>,
    projection: Arc<TrialProjection>,
    /// W[i, q] = w_q φ_i(s_q) over the projection's rule nodes
    weighted: DMatrix<f64>,
    /// B = G⁻¹ M G⁻¹ with M = ∫∫ φ_i(x) k̃(x, y) φ_j(y) dx dy
    b_matrix: DMatrix<f64>,
    /// memoized slices q^{(b)}(y), keyed by (derivative order b, bits of y)
    q_cache: RwLock<HashMap<(usize, u64), Arc<DVector<f64>>>>,
    budget: usize,
}

impl RecoveryKernel {
    pub fn new(base: Arc<dyn Kernel>, projection: Arc<TrialProjection>) -> Result<Self> {
        if base.input_dim() != 1 || base.output_count() != 1 {
            return Err(Error::Contract(
                "recovery prior construction supports single-output kernels on 1D domains".into(),
            ));
        }
        let m = projection.basis_len();
        let rule = projection.rule().clone();
        let q = rule.len();
        let mut weighted = DMatrix::zeros(m, q);
        for (qi, (x, w)) in rule.points().enumerate() {
            for i in 0..m {
                weighted[(i, qi)] = w * projection.basis_function(i).eval(&[x]);
            }
        }
        let nodes: Vec<f64> = rule.points().map(|(x, _)| x).collect();
        let node_kernel = DMatrix::from_fn(q, q, |a, b| base.eval(&[nodes[a]], &[nodes[b]]));
        let m_matrix = &weighted * node_kernel * weighted.transpose();
        let b_matrix = projection.gram_inverse() * &m_matrix * projection.gram_inverse();

        let basis_order = projection
            .basis()
            .iter()
            .map(|f| f.max_derivative_order())
            .min()
            .unwrap_or(0);
        let budget = base.smoothness().order(0).min(basis_order);

        Ok(Self {
            base,
            projection,
            weighted,
            b_matrix,
            q_cache: RwLock::new(HashMap::new()),
            budget,
        })
    }

    pub fn base(&self) -> &Arc<dyn Kernel> {
        &self.base
    }

    pub fn projection(&self) -> &Arc<TrialProjection> {
        &self.projection
    }

    /// q^{(b)}_i(y) = Σ_q w_q φ_i(s_q) ∂₂^b k̃(s_q, y)
    fn q_vec(&self, order: usize, y: f64) -> Result<Arc<DVector<f64>>> {
        let key = (order, y.to_bits());
        if let Some(hit) = self.q_cache.read().unwrap().get(&key) {
            return Ok(hit.clone());
        }
        let rule = self.projection.rule();
        let d2 = MultiIndex::new(vec![order]);
        let zero = MultiIndex::zeros(1);
        let slice = DVector::from_iterator(
            rule.len(),
            rule.points()
                .map(|(x, _)| self.base.derivative(0, &zero, &[x], 0, &d2, &[y]))
                .collect::<Result<Vec<f64>>>()?,
        );
        let out = Arc::new(&self.weighted * slice);
        self.q_cache.write().unwrap().insert(key, out.clone());
        Ok(out)
    }

    /// Trial basis values (∂^a φ_i(x))ᵢ.
    fn basis_values(&self, order: usize, x: f64) -> Result<DVector<f64>> {
        let orders = MultiIndex::new(vec![order]);
        Ok(DVector::from_iterator(
            self.projection.basis_len(),
            self.projection
                .basis()
                .iter()
                .map(|f| f.derivative(&orders, &[x]))
                .collect::<Result<Vec<f64>>>()?,
        ))
    }

    /// Coordinate covariance P_{R^m} k̃ P'_{R^m} = G⁻¹ M G⁻¹ of the base
    /// prior, which equals the coordinate covariance of the recovery prior.
    pub fn coordinate_covariance(&self) -> &DMatrix<f64> {
        &self.b_matrix
    }
}

impl Kernel for RecoveryKernel {
    fn input_dim(&self) -> usize {
        1
    }

    fn smoothness(&self) -> MultiIndex {
        MultiIndex::new(vec![self.budget])
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
        let (a, b) = (orders1.order(0), orders2.order(0));
        if a > self.budget || b > self.budget {
            return Err(Error::UnsupportedOrder {
                requested: format!("({a},{b})"),
                budget: format!("({0},{0})", self.budget),
                context: "recovery kernel derivative",
            });
        }
        let base = self.base.derivative(0, orders1, x1, 0, orders2, x2)?;
        let phi1 = self.basis_values(a, x1[0])?;
        let phi2 = self.basis_values(b, x2[0])?;
        let q2 = self.q_vec(b, x2[0])?;
        let q1 = self.q_vec(a, x1[0])?;
        let ginv = self.projection.gram_inverse();
        let term_p_left = (ginv * q2.as_ref()).dot(&phi1);
        let term_p_right = (ginv * q1.as_ref()).dot(&phi2);
        let term_pp = (phi1.transpose() * &self.b_matrix * phi2)[(0, 0)];
        Ok(base - term_p_left - term_p_right + 2.0 * term_pp)
    }
}

/// Builds the recovery prior of a base prior (m̃, k̃) for a trial projection P:
/// the mean becomes P[m̃] (an element of the trial span) and the kernel
/// becomes P k̃ P' + (I−P) k̃ (I−P)'.
///
/// `projection = None` is the identity projection on the full space, for
/// which the prior is returned unchanged.
pub fn build_recovery_prior(
    base_mean: &MeanFunction,
    base_kernel: &Arc<dyn Kernel>,
    projection: Option<&Arc<TrialProjection>>,
) -> Result<(MeanFunction, Arc<dyn Kernel>)> {
    let projection = match projection {
        None => return Ok((base_mean.clone(), base_kernel.clone())),
        Some(p) => p,
    };
    if base_mean.output_count() != 1 {
        return Err(Error::Contract(
            "recovery prior construction supports single-output priors".into(),
        ));
    }
    let projected_mean = projection.project_function(base_mean.component(0))?;
    let kernel = RecoveryKernel::new(base_kernel.clone(), projection.clone())?;
    Ok((
        MeanFunction::single(Arc::new(projected_mean)),
        Arc::new(kernel) as Arc<dyn Kernel>,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::functions::{HatFunction, MonomialSum, RealFunction};
    use crate::kernels::{HalfInteger, MaternKernel1D};
    use crate::operators::{apply_functionals_to_kernel, LinearFunctionalSet, QuadratureRule};
    use approx::assert_abs_diff_eq;

    fn full_hat_basis(nodes: &[f64]) -> Vec<Arc<dyn RealFunction>> {
        let n = nodes.len();
        (0..n)
            .map(|i| {
                let left = if i == 0 { nodes[0] } else { nodes[i - 1] };
                let right = if i + 1 == n { nodes[n - 1] } else { nodes[i + 1] };
                Arc::new(HatFunction::new(left, nodes[i], right).unwrap()) as Arc<dyn RealFunction>
            })
            .collect()
    }

    fn matern32() -> Arc<dyn Kernel> {
        Arc::new(MaternKernel1D::new(HalfInteger::Nu3_2, 1.0, 1.0).unwrap())
    }

    fn projection_on(nodes: &[f64]) -> Arc<TrialProjection> {
        let rule = QuadratureRule::gauss_legendre(8).unwrap();
        Arc::new(
            TrialProjection::l2(
                full_hat_basis(nodes),
                (nodes[0], *nodes.last().unwrap()),
                &rule,
                0,
            )
            .unwrap(),
        )
    }

    #[test]
    fn identity_projection_returns_base() {
        let k = matern32();
        let mean = MeanFunction::zero(1, 1);
        let (m2, k2) = build_recovery_prior(&mean, &k, None).unwrap();
        assert_eq!(m2.output_count(), 1);
        for (x1, x2) in [(0.0, 0.0), (-0.4, 0.7), (1.0, -1.0)] {
            assert_abs_diff_eq!(k2.eval(&[x1], &[x2]), k.eval(&[x1], &[x2]));
        }
    }

    #[test]
    fn cross_covariance_annihilation() {
        // Matérn 3/2 base with 3 linear Lagrange trial functions on (−1, 1):
        // (δ_x ∘ (I−P)) k P'_{R^m} vanishes on a probe grid.
        let p = projection_on(&[-1.0, 0.0, 1.0]);
        let kernel = Arc::new(RecoveryKernel::new(matern32(), p.clone()).unwrap());
        let coords = p.coordinate_functionals();

        let probes: Vec<f64> = (0..20).map(|i| -1.0 + 2.0 * i as f64 / 19.0).collect();
        let deltas = LinearFunctionalSet::point_evaluations_1d(0, &probes);
        let projected = deltas.compose_projection(&p).unwrap();
        let direct = apply_functionals_to_kernel(&deltas, kernel.as_ref(), &coords).unwrap();
        let through_p = apply_functionals_to_kernel(&projected, kernel.as_ref(), &coords).unwrap();
        let max = (&direct - &through_p).abs().max();
        assert!(max < 1e-10, "annihilation violated: {max:.3e}");
    }

    #[test]
    fn projected_mean_interpolates_linear_base_mean() {
        // base mean m̃(x) = x with a full hat basis: the projection of x is x
        // itself, so the recovery mean matches x at the nodes.
        let nodes = [-1.0, 0.0, 1.0];
        let p = projection_on(&nodes);
        let mean = MeanFunction::single(Arc::new(MonomialSum::affine1d(1.0, 0.0)));
        let (m2, _) = build_recovery_prior(&mean, &matern32(), Some(&p)).unwrap();
        for &x in &nodes {
            assert_abs_diff_eq!(m2.eval(0, &[x]), x, epsilon = 1e-10);
        }
    }

    #[test]
    fn derivative_budget_is_basis_limited() {
        let p = projection_on(&[-1.0, 0.0, 1.0]);
        let kernel = RecoveryKernel::new(matern32(), p).unwrap();
        assert_eq!(kernel.smoothness().order(0), 0);
        let one = MultiIndex::new(vec![1]);
        let zero = MultiIndex::zeros(1);
        assert!(kernel.derivative(0, &one, &[0.2], 0, &zero, &[0.1]).is_err());
    }

    #[test]
    fn recovery_kernel_is_symmetric_and_psd_on_grid() {
        let p = projection_on(&[-1.0, -0.5, 0.0, 0.5, 1.0]);
        let kernel = RecoveryKernel::new(matern32(), p).unwrap();
        let xs: Vec<f64> = (0..16).map(|i| -1.0 + 2.0 * i as f64 / 15.0).collect();
        let g = nalgebra::DMatrix::from_fn(16, 16, |i, j| kernel.eval(&[xs[i]], &[xs[j]]));
        let asym = (&g - g.transpose()).abs().max();
        assert!(asym < 1e-12);
        let min_eig = g
            .symmetric_eigenvalues()
            .iter()
            .copied()
            .fold(f64::INFINITY, f64::min);
        assert!(min_eig > -1e-8, "min eigenvalue {min_eig}");
    }
}
