//! Gaussian processes, pushforwards under linear operators, and exact
//! conditioning on finite affine observations.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use rand::RngCore;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::functions::{MeanFunction, RealFunction};
use crate::kernels::Kernel;
use crate::linalg::{JitterPolicy, LowerFactor};
use crate::multi_index::MultiIndex;
use crate::operators::{
    apply_functionals_to_kernel, LinearDifferentialOperator, LinearFunctionalSet,
};

/// A finite-dimensional Gaussian: L[f] ~ N(L[m], L k L').
#[derive(Debug, Clone)]
pub struct GaussianVector {
    mean: DVector<f64>,
    cov: DMatrix<f64>,
}

impl GaussianVector {
    pub fn new(mean: DVector<f64>, cov: DMatrix<f64>) -> Result<Self> {
        if cov.nrows() != mean.len() || cov.ncols() != mean.len() {
            return Err(Error::DimensionMismatch {
                context: "Gaussian vector covariance",
                expected: mean.len(),
                got: cov.nrows(),
            });
        }
        let scale = cov.abs().max().max(1.0);
        let asym = (&cov - cov.transpose()).abs().max();
        if asym > 1e-12 * scale {
            return Err(Error::Contract(format!(
                "covariance must be symmetric (max asymmetry {asym:.3e})"
            )));
        }
        Ok(Self { mean, cov })
    }

    /// Deterministic zero noise of the given dimension (exact constraints).
    pub fn zero(dim: usize) -> Self {
        Self {
            mean: DVector::zeros(dim),
            cov: DMatrix::zeros(dim, dim),
        }
    }

    /// Centered isotropic noise with the given variance.
    pub fn isotropic(dim: usize, variance: f64) -> Self {
        Self {
            mean: DVector::zeros(dim),
            cov: DMatrix::identity(dim, dim) * variance,
        }
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn mean(&self) -> &DVector<f64> {
        &self.mean
    }

    pub fn cov(&self) -> &DMatrix<f64> {
        &self.cov
    }

    /// Marginal variances (diagonal of the covariance).
    pub fn variances(&self) -> DVector<f64> {
        self.cov.diagonal()
    }

    /// Smallest eigenvalue of the covariance; used by validity checks.
    pub fn min_eigenvalue(&self) -> f64 {
        if self.dim() == 0 {
            return 0.0;
        }
        self.cov
            .clone()
            .symmetric_eigenvalues()
            .iter()
            .copied()
            .fold(f64::INFINITY, f64::min)
    }
}

/// One affine observation block: L[u] + ε = y with ε ~ N(μ, Σ).
#[derive(Clone)]
struct Observation {
    functionals: LinearFunctionalSet,
    y: DVector<f64>,
    noise_mean: DVector<f64>,
    noise_cov: DMatrix<f64>,
}

/// A Gaussian process with accumulated affine observation blocks.
///
/// Conditioning is non-destructive: each call returns a new process sharing
/// the immutable prior. All Gram and cross-covariance evaluations use the
/// prior moments only; posterior moments are evaluated lazily through the
/// cached Cholesky factor and representer weights.
#[derive(Clone)]
pub struct GaussianProcess {
    mean: MeanFunction,
    kernel: Arc<dyn Kernel>,
    observations: Vec<Arc<Observation>>,
    factor: LowerFactor,
    residual: DVector<f64>,
    weights: DVector<f64>,
    jitter: JitterPolicy,
    sample_cap: usize,
}

impl GaussianProcess {
    pub fn new(mean: MeanFunction, kernel: Arc<dyn Kernel>) -> Result<Self> {
        if mean.output_count() != kernel.output_count() {
            return Err(Error::DimensionMismatch {
                context: "process mean vs kernel outputs",
                expected: kernel.output_count(),
                got: mean.output_count(),
            });
        }
        Ok(Self {
            mean,
            kernel,
            observations: Vec::new(),
            factor: LowerFactor::empty(),
            residual: DVector::zeros(0),
            weights: DVector::zeros(0),
            jitter: JitterPolicy::default(),
            sample_cap: 2048,
        })
    }

    /// Zero-mean process.
    pub fn zero_mean(kernel: Arc<dyn Kernel>) -> Result<Self> {
        let outputs = kernel.output_count();
        let dim = kernel.input_dim();
        Self::new(MeanFunction::zero(outputs, dim), kernel)
    }

    pub fn with_jitter_policy(mut self, jitter: JitterPolicy) -> Self {
        self.jitter = jitter;
        self
    }

    pub fn with_sample_cap(mut self, cap: usize) -> Self {
        self.sample_cap = cap;
        self
    }

    pub fn prior_mean(&self) -> &MeanFunction {
        &self.mean
    }

    pub fn kernel(&self) -> &Arc<dyn Kernel> {
        &self.kernel
    }

    pub fn observation_count(&self) -> usize {
        self.observations.len()
    }

    /// Total number of observed functionals.
    pub fn observed_dim(&self) -> usize {
        self.residual.len()
    }

    /// Representer weights w = G†(y − L[m] − μ).
    pub fn representer_weights(&self) -> &DVector<f64> {
        &self.weights
    }

    /// The accumulated residual vector y − L[m] − μ, recomputed from the
    /// stored observation blocks.
    pub fn residuals(&self) -> DVector<f64> {
        let mut out = DVector::zeros(self.residual.len());
        let mut row = 0;
        for obs in &self.observations {
            let r = &obs.y
                - obs
                    .functionals
                    .apply_to_mean(&self.mean)
                    .expect("stored blocks were validated when conditioning")
                - &obs.noise_mean;
            out.rows_mut(row, r.len()).copy_from(&r);
            row += r.len();
        }
        out
    }

    /// Accumulated observation noise covariance (block diagonal).
    pub fn noise_cov_blocks(&self) -> Vec<&DMatrix<f64>> {
        self.observations.iter().map(|o| &o.noise_cov).collect()
    }

    /// The functional blocks of all accumulated observations, in order.
    pub fn observation_blocks(&self) -> impl Iterator<Item = &LinearFunctionalSet> {
        self.observations.iter().map(|o| &o.functionals)
    }

    /// The cached lower Cholesky factor of the (jittered) Gram matrix.
    pub fn gram_factor(&self) -> &LowerFactor {
        &self.factor
    }

    /// Conditions on L[u] + ε = y, returning a new process. The existing
    /// factor is extended in place of a full refactorization, so the leading
    /// block of the new factor is bit-identical to the old one.
    pub fn condition(
        &self,
        functionals: &LinearFunctionalSet,
        y: &DVector<f64>,
        noise: &GaussianVector,
    ) -> Result<GaussianProcess> {
        let n = functionals.len();
        if n == 0 {
            return Err(Error::Contract(
                "conditioning requires at least one functional".into(),
            ));
        }
        if y.len() != n {
            return Err(Error::DimensionMismatch {
                context: "conditioning observations",
                expected: n,
                got: y.len(),
            });
        }
        if noise.dim() != n {
            return Err(Error::DimensionMismatch {
                context: "conditioning noise",
                expected: n,
                got: noise.dim(),
            });
        }

        let cross = self.cross_covariance(functionals)?.transpose();
        let mut corner = apply_functionals_to_kernel(functionals, self.kernel.as_ref(), functionals)?;
        symmetrize(&mut corner);
        corner += &noise.cov;
        let (factor, _jitter) = self.factor.extend(&cross, &corner, &self.jitter)?;

        let block_resid = y - functionals.apply_to_mean(&self.mean)? - &noise.mean;
        let mut residual = DVector::zeros(self.residual.len() + n);
        residual
            .rows_mut(0, self.residual.len())
            .copy_from(&self.residual);
        residual
            .rows_mut(self.residual.len(), n)
            .copy_from(&block_resid);
        let weights = factor.solve(&residual);

        let mut observations = self.observations.clone();
        observations.push(Arc::new(Observation {
            functionals: functionals.clone(),
            y: y.clone(),
            noise_mean: noise.mean.clone(),
            noise_cov: noise.cov.clone(),
        }));

        Ok(GaussianProcess {
            mean: self.mean.clone(),
            kernel: self.kernel.clone(),
            observations,
            factor,
            residual,
            weights,
            jitter: self.jitter.clone(),
            sample_cap: self.sample_cap,
        })
    }

    /// Cross-covariance L k I' between a query block and all accumulated
    /// observation functionals, evaluated on the prior kernel.
    fn cross_covariance(&self, query: &LinearFunctionalSet) -> Result<DMatrix<f64>> {
        let total: usize = self.observations.iter().map(|o| o.functionals.len()).sum();
        let mut out = DMatrix::zeros(query.len(), total);
        let mut col = 0;
        for obs in &self.observations {
            let block =
                apply_functionals_to_kernel(query, self.kernel.as_ref(), &obs.functionals)?;
            out.view_mut((0, col), (query.len(), block.ncols()))
                .copy_from(&block);
            col += block.ncols();
        }
        Ok(out)
    }

    /// Predictive distribution of an arbitrary functional block under the
    /// current (possibly conditioned) process.
    pub fn predict_functionals(&self, query: &LinearFunctionalSet) -> Result<GaussianVector> {
        let mut prior_cov =
            apply_functionals_to_kernel(query, self.kernel.as_ref(), query)?;
        symmetrize(&mut prior_cov);
        let mut mean = query.apply_to_mean(&self.mean)?;
        if self.observations.is_empty() {
            return GaussianVector::new(mean, prior_cov);
        }
        let v = self.cross_covariance(query)?;
        mean += &v * &self.weights;
        let z = self.factor.solve_lower_matrix(&v.transpose());
        let mut cov = prior_cov - z.transpose() * &z;
        symmetrize(&mut cov);
        GaussianVector::new(mean, cov)
    }

    /// Predictive distribution of u(X) on output 0.
    pub fn predict(&self, points: &[Vec<f64>]) -> Result<GaussianVector> {
        self.predict_output(0, points)
    }

    /// Predictive distribution of output `output` at the given points.
    pub fn predict_output(&self, output: usize, points: &[Vec<f64>]) -> Result<GaussianVector> {
        self.predict_functionals(&LinearFunctionalSet::point_evaluations(output, points))
    }

    /// Pushforward L[u] of an unconditioned process under a linear
    /// differential operator (Gaussian again, with mean L[m] and kernel LkL').
    ///
    /// For a conditioned process, query the posterior of L[u] through
    /// [`Self::predict_functionals`] with δ_x ∘ L blocks instead.
    pub fn pushforward(&self, op: &LinearDifferentialOperator) -> Result<GaussianProcess> {
        if !self.observations.is_empty() {
            return Err(Error::Contract(
                "pushforward of a conditioned process is not supported; \
                 condition the pushforward of the prior or predict δ∘L functionals"
                    .into(),
            ));
        }
        let budget = self.kernel.smoothness();
        for term in op.terms() {
            if !term.orders.le(&budget) {
                return Err(Error::UnsupportedOrder {
                    requested: term.orders.to_string(),
                    budget: budget.to_string(),
                    context: "pushforward operator",
                });
            }
        }
        let mean = MeanFunction::single(Arc::new(PushforwardMean {
            base: self.mean.clone(),
            op: op.clone(),
        }));
        let kernel: Arc<dyn Kernel> = Arc::new(PushforwardKernel {
            base: self.kernel.clone(),
            op: op.clone(),
        });
        Ok(GaussianProcess {
            mean,
            kernel,
            observations: Vec::new(),
            factor: LowerFactor::empty(),
            residual: DVector::zeros(0),
            weights: DVector::zeros(0),
            jitter: self.jitter.clone(),
            sample_cap: self.sample_cap,
        })
    }

    /// Draws `count` joint samples of output 0 at the given points;
    /// deterministic for a fixed seed. Returns a |X| × count matrix.
    pub fn sample(&self, points: &[Vec<f64>], count: usize, seed: u64) -> Result<DMatrix<f64>> {
        if points.len() > self.sample_cap {
            return Err(Error::Contract(format!(
                "sampling at {} points exceeds the configured cap of {}",
                points.len(),
                self.sample_cap
            )));
        }
        let n = points.len();
        if count == 0 || n == 0 {
            return Ok(DMatrix::zeros(n, count));
        }
        let marginal = self.predict(points)?;
        let (factor, _) = LowerFactor::factor(marginal.cov(), &self.jitter)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut draws = DMatrix::zeros(n, count);
        for c in 0..count {
            let z = DVector::from_fn(n, |_, _| standard_normal(&mut rng));
            let sample = marginal.mean() + factor.matrix() * z;
            draws.set_column(c, &sample);
        }
        Ok(draws)
    }
}

/// Box–Muller transform over the raw 64-bit stream, for a normal-deviate
/// source that is identical across platforms.
fn standard_normal(rng: &mut ChaCha8Rng) -> f64 {
    let u1 = ((rng.next_u64() >> 11) as f64 + 0.5) / (1u64 << 53) as f64;
    let u2 = ((rng.next_u64() >> 11) as f64 + 0.5) / (1u64 << 53) as f64;
    (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
}

fn symmetrize(m: &mut DMatrix<f64>) {
    let n = m.nrows();
    for i in 0..n {
        for j in (i + 1)..n {
            let v = 0.5 * (m[(i, j)] + m[(j, i)]);
            m[(i, j)] = v;
            m[(j, i)] = v;
        }
    }
}

/// Mean of a pushforward process: x ↦ D[m](x).
struct PushforwardMean {
    base: MeanFunction,
    op: LinearDifferentialOperator,
}

impl RealFunction for PushforwardMean {
    fn dim(&self) -> usize {
        self.op.input_dim()
    }

    fn eval(&self, x: &[f64]) -> f64 {
        self.op
            .apply_to_mean(&self.base, x)
            .expect("pushforward budget verified at construction")
    }

    fn derivative(&self, orders: &MultiIndex, x: &[f64]) -> Result<f64> {
        let mut acc = 0.0;
        for term in self.op.terms() {
            acc += term.coeff
                * self
                    .base
                    .derivative(term.output, &term.orders.add(orders), x)?;
        }
        Ok(acc)
    }
}

/// Kernel of a pushforward process: (x₁, x₂) ↦ (L k L')(x₁, x₂).
struct PushforwardKernel {
    base: Arc<dyn Kernel>,
    op: LinearDifferentialOperator,
}

impl Kernel for PushforwardKernel {
    fn input_dim(&self) -> usize {
        self.base.input_dim()
    }

    fn smoothness(&self) -> MultiIndex {
        let base = self.base.smoothness();
        let dim = self.base.input_dim();
        let mut budget = Vec::with_capacity(dim);
        for i in 0..dim {
            let spent = self
                .op
                .terms()
                .iter()
                .map(|t| t.orders.order(i))
                .max()
                .unwrap_or(0);
            budget.push(base.order(i).saturating_sub(spent));
        }
        MultiIndex::new(budget)
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
        let mut acc = 0.0;
        for t1 in self.op.terms() {
            for t2 in self.op.terms() {
                acc += t1.coeff
                    * t2.coeff
                    * self.base.derivative(
                        t1.output,
                        &t1.orders.add(orders1),
                        x1,
                        t2.output,
                        &t2.orders.add(orders2),
                        x2,
                    )?;
            }
        }
        Ok(acc)
    }
}
