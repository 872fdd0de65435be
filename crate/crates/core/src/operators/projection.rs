//! L2-type projections onto finite-dimensional trial spaces.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::functions::{LinearCombination, RealFunction};
use crate::multi_index::MultiIndex;
use crate::operators::functional::FunctionalAtom;
use crate::operators::quadrature::{CompositeRule, QuadratureRule};

/// A bounded projection P = ι ∘ P_{R^m} onto span{φ⁽¹⁾, …, φ⁽ᵐ⁾}, where the
/// coordinate map is P_{R^m}[u] = G⁻¹ (∫ φ⁽ⁱ⁾ u)ᵢ with trial Gram
/// G_{ij} = ∫ φ⁽ⁱ⁾ φ⁽ʲ⁾.
///
/// One fixed composite quadrature rule (split at all basis breakpoints) is
/// used for the Gram, the coordinate functionals, and everything derived
/// from the projection, so that P is idempotent to machine precision.
#[derive(Clone)]
pub struct TrialProjection {
    output: usize,
    basis: Vec<Arc<dyn RealFunction>>,
    region: (f64, f64),
    rule: Arc<CompositeRule>,
    gram: DMatrix<f64>,
    gram_inv: DMatrix<f64>,
    raw_atoms: Vec<FunctionalAtom>,
}

impl TrialProjection {
    /// Builds the L2 projection onto the given basis over `region` on output
    /// component `output`, with `panel_rule` applied per breakpoint panel.
    pub fn l2(
        basis: Vec<Arc<dyn RealFunction>>,
        region: (f64, f64),
        panel_rule: &QuadratureRule,
        output: usize,
    ) -> Result<Self> {
        if basis.is_empty() {
            return Err(Error::InvalidParameter {
                name: "basis",
                reason: "projection needs at least one trial function".into(),
            });
        }
        if !(region.0 < region.1) {
            return Err(Error::InvalidParameter {
                name: "region",
                reason: format!("need an interval, got [{}, {}]", region.0, region.1),
            });
        }
        let mut breakpoints: Vec<f64> = basis.iter().flat_map(|f| f.breakpoints()).collect();
        breakpoints.sort_by(|a, b| a.partial_cmp(b).unwrap());
        breakpoints.dedup();
        let rule = Arc::new(CompositeRule::new(
            region.0,
            region.1,
            &breakpoints,
            panel_rule,
        )?);

        let m = basis.len();
        let q = rule.len();
        // W[i, q] = w_q φ_i(s_q) and Φ[i, q] = φ_i(s_q)
        let mut weighted = DMatrix::zeros(m, q);
        let mut values = DMatrix::zeros(m, q);
        for (qi, (x, w)) in rule.points().enumerate() {
            for i in 0..m {
                let v = basis[i].eval(&[x]);
                values[(i, qi)] = v;
                weighted[(i, qi)] = w * v;
            }
        }
        let gram = &weighted * values.transpose();
        let gram_inv = gram.clone().try_inverse().ok_or_else(|| {
            Error::IllConditionedBasis("trial Gram matrix is singular".into())
        })?;
        // crude 1-norm condition estimate
        let cond = one_norm(&gram) * one_norm(&gram_inv);
        if !cond.is_finite() || cond > 1e12 {
            return Err(Error::IllConditionedBasis(format!(
                "trial Gram condition estimate {cond:.3e} exceeds 1e12"
            )));
        }

        let raw_atoms = basis
            .iter()
            .map(|f| FunctionalAtom::Integral {
                output,
                orders: MultiIndex::zeros(1),
                weight: Some(f.clone()),
                rule: rule.clone(),
            })
            .collect();

        Ok(Self {
            output,
            basis,
            region,
            rule,
            gram,
            gram_inv,
            raw_atoms,
        })
    }

    pub fn output(&self) -> usize {
        self.output
    }

    pub fn basis_len(&self) -> usize {
        self.basis.len()
    }

    pub fn basis(&self) -> &[Arc<dyn RealFunction>] {
        &self.basis
    }

    pub fn basis_function(&self, i: usize) -> &Arc<dyn RealFunction> {
        &self.basis[i]
    }

    pub fn region(&self) -> (f64, f64) {
        self.region
    }

    pub fn gram(&self) -> &DMatrix<f64> {
        &self.gram
    }

    pub fn gram_inverse(&self) -> &DMatrix<f64> {
        &self.gram_inv
    }

    /// The quadrature rule shared by all functionals of this projection.
    pub fn rule(&self) -> &Arc<CompositeRule> {
        &self.rule
    }

    /// The raw integral atoms (∫ φ⁽ⁱ⁾ ·)ᵢ before multiplication by G⁻¹.
    pub fn raw_integral_atoms(&self) -> &[FunctionalAtom] {
        &self.raw_atoms
    }

    /// The coordinate functionals P_{R^m} as a functional block.
    pub fn coordinate_functionals(&self) -> crate::operators::functional::LinearFunctionalSet {
        crate::operators::functional::LinearFunctionalSet::from_atoms(self.raw_atoms.clone())
            .with_transform(self.gram_inv.clone())
            .expect("transform dimensions match by construction")
    }

    /// Coordinates of the projection of `f`, i.e. P_{R^m}[f].
    pub fn project(&self, f: &Arc<dyn RealFunction>) -> Result<DVector<f64>> {
        let mut rhs = DVector::zeros(self.basis.len());
        for (x, w) in self.rule.points() {
            let fv = f.eval(&[x]);
            if fv == 0.0 {
                continue;
            }
            for i in 0..self.basis.len() {
                rhs[i] += w * self.basis[i].eval(&[x]) * fv;
            }
        }
        Ok(&self.gram_inv * rhs)
    }

    /// P[f] as a function (element of the trial span).
    pub fn project_function(&self, f: &Arc<dyn RealFunction>) -> Result<LinearCombination> {
        let coords = self.project(f)?;
        LinearCombination::new(coords.iter().copied().collect(), self.basis.clone())
    }
}

/// Coordinates of the L2 projection of `f` onto the trial span.
pub fn l2_project(projection: &TrialProjection, f: &Arc<dyn RealFunction>) -> Result<DVector<f64>> {
    projection.project(f)
}

fn one_norm(m: &DMatrix<f64>) -> f64 {
    (0..m.ncols())
        .map(|j| m.column(j).iter().map(|v| v.abs()).sum::<f64>())
        .fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::functions::HatFunction;
    use approx::assert_abs_diff_eq;
    use nalgebra::DVector;

    fn interior_hats(nodes: &[f64]) -> Vec<Arc<dyn RealFunction>> {
        nodes
            .windows(3)
            .map(|w| {
                Arc::new(HatFunction::new(w[0], w[1], w[2]).unwrap()) as Arc<dyn RealFunction>
            })
            .collect()
    }

    #[test]
    fn gram_entries_for_uniform_hats() {
        // interior hats on (0,1) with spacing h = 0.25
        let nodes = [0.0, 0.25, 0.5, 0.75, 1.0];
        let basis = interior_hats(&nodes);
        let rule = QuadratureRule::gauss_legendre(4).unwrap();
        let p = TrialProjection::l2(basis, (0.0, 1.0), &rule, 0).unwrap();
        let h = 0.25;
        let g = p.gram();
        for i in 0..3 {
            assert_abs_diff_eq!(g[(i, i)], 2.0 * h / 3.0, epsilon = 1e-14);
        }
        assert_abs_diff_eq!(g[(0, 1)], h / 6.0, epsilon = 1e-14);
        assert_abs_diff_eq!(g[(1, 2)], h / 6.0, epsilon = 1e-14);
        assert_abs_diff_eq!(g[(0, 2)], 0.0, epsilon = 1e-15);
    }

    #[test]
    fn projection_fixes_basis_elements() {
        let nodes = [0.0, 0.25, 0.5, 0.75, 1.0];
        let basis = interior_hats(&nodes);
        let rule = QuadratureRule::gauss_legendre(4).unwrap();
        let p = TrialProjection::l2(basis.clone(), (0.0, 1.0), &rule, 0).unwrap();
        let c = p.project(&basis[1]).unwrap();
        assert_abs_diff_eq!(c[0], 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(c[1], 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(c[2], 0.0, epsilon = 1e-12);
    }

    #[test]
    fn projection_of_linear_function_matches_dense_solve() {
        let nodes = [0.0, 0.25, 0.5, 0.75, 1.0];
        let basis = interior_hats(&nodes);
        let rule = QuadratureRule::gauss_legendre(4).unwrap();
        let p = TrialProjection::l2(basis, (0.0, 1.0), &rule, 0).unwrap();
        let f: Arc<dyn RealFunction> = Arc::new(crate::functions::MonomialSum::poly1d(&[0.0, 1.0]));
        let got = p.project(&f).unwrap();

        // oracle: dense solve of the analytic 3x3 Gram system against
        // ∫ φ_i(x)·x dx = h·x_i
        let h = 0.25;
        let gram = nalgebra::DMatrix::from_row_slice(
            3,
            3,
            &[
                2.0 * h / 3.0,
                h / 6.0,
                0.0,
                h / 6.0,
                2.0 * h / 3.0,
                h / 6.0,
                0.0,
                h / 6.0,
                2.0 * h / 3.0,
            ],
        );
        let rhs = DVector::from_vec(vec![h * 0.25, h * 0.5, h * 0.75]);
        let expect = gram.lu().solve(&rhs).unwrap();
        for i in 0..3 {
            assert_abs_diff_eq!(got[i], expect[i], epsilon = 1e-12);
        }
    }

    #[test]
    fn idempotence_on_the_span() {
        let nodes = [0.0, 0.25, 0.5, 0.75, 1.0];
        let basis = interior_hats(&nodes);
        let rule = QuadratureRule::gauss_legendre(4).unwrap();
        let p = TrialProjection::l2(basis, (0.0, 1.0), &rule, 0).unwrap();
        let f: Arc<dyn RealFunction> = Arc::new(crate::functions::MonomialSum::poly1d(&[0.0, 1.0]));
        let once = p.project(&f).unwrap();
        let reconstructed: Arc<dyn RealFunction> = Arc::new(p.project_function(&f).unwrap());
        let twice = p.project(&reconstructed).unwrap();
        for i in 0..once.len() {
            assert_abs_diff_eq!(once[i], twice[i], epsilon = 1e-12);
        }
    }

    #[test]
    fn degenerate_basis_rejected() {
        let hat: Arc<dyn RealFunction> = Arc::new(HatFunction::new(0.0, 0.5, 1.0).unwrap());
        let rule = QuadratureRule::gauss_legendre(4).unwrap();
        let res = TrialProjection::l2(vec![hat.clone(), hat], (0.0, 1.0), &rule, 0);
        assert!(matches!(
            res,
            Err(Error::IllConditionedBasis(_)) | Err(Error::SingularSystem(_))
        ));
    }
}
