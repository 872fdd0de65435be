//! Half-integer Matérn kernels with closed-form derivatives.

use crate::error::{Error, Result};
use crate::kernels::{check_budget, Kernel};
use crate::multi_index::MultiIndex;

/// Half-integer smoothness parameter ν = p + 1/2 with p ∈ {0, 1, 2, 3}.
///
/// Other values of ν require the Bessel-function form and are rejected at
/// construction: with half-integer ν the kernel is a polynomial times an
/// exponential and all derivatives stay in that family.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HalfInteger {
    /// ν = 1/2 (exponential kernel, continuous paths)
    Nu1_2,
    /// ν = 3/2 (once differentiable paths)
    Nu3_2,
    /// ν = 5/2 (twice differentiable paths)
    Nu5_2,
    /// ν = 7/2 (three times differentiable paths)
    Nu7_2,
}

impl HalfInteger {
    /// Construct from ν; only half-integer values up to 7/2 are accepted.
    pub fn from_nu(nu: f64) -> Result<Self> {
        let candidates = [
            (0.5, Self::Nu1_2),
            (1.5, Self::Nu3_2),
            (2.5, Self::Nu5_2),
            (3.5, Self::Nu7_2),
        ];
        for (v, h) in candidates {
            if (nu - v).abs() < 1e-12 {
                return Ok(h);
            }
        }
        Err(Error::InvalidParameter {
            name: "nu",
            reason: format!("{nu} is not a supported half-integer (1/2, 3/2, 5/2, 7/2)"),
        })
    }

    pub fn nu(self) -> f64 {
        self.p() as f64 + 0.5
    }

    /// Path differentiability order p.
    pub fn p(self) -> usize {
        match self {
            Self::Nu1_2 => 0,
            Self::Nu3_2 => 1,
            Self::Nu5_2 => 2,
            Self::Nu7_2 => 3,
        }
    }

    /// Coefficients of the series polynomial Q_p(s) with s = √(2ν)·r/l, i.e.
    /// k(r) = σ² Q_p(s) e^{-s}.
    fn series_polynomial(self) -> Vec<f64> {
        match self {
            Self::Nu1_2 => vec![1.0],
            Self::Nu3_2 => vec![1.0, 1.0],
            Self::Nu5_2 => vec![1.0, 1.0, 1.0 / 3.0],
            Self::Nu7_2 => vec![1.0, 1.0, 2.0 / 5.0, 1.0 / 15.0],
        }
    }
}

/// Evaluates a polynomial given by ascending coefficients.
fn poly_eval(coeffs: &[f64], s: f64) -> f64 {
    coeffs.iter().rev().fold(0.0, |acc, &c| acc * s + c)
}

/// Applies the map Q ↦ Q' − Q to polynomial coefficients. Differentiating
/// t ↦ Q(ct)e^{-ct} once (t > 0) multiplies by c and applies this map.
fn derive_coeffs(coeffs: &[f64]) -> Vec<f64> {
    let n = coeffs.len();
    let mut out = vec![0.0; n.max(1)];
    for k in 0..n {
        out[k] = -coeffs[k];
        if k + 1 < n {
            out[k] += (k + 1) as f64 * coeffs[k + 1];
        }
    }
    out
}

/// One-dimensional half-integer Matérn kernel
/// k(x₁, x₂) = σ² Q_p(√(2ν)|x₁−x₂|/l) e^{−√(2ν)|x₁−x₂|/l}.
#[derive(Debug, Clone)]
pub struct MaternKernel1D {
    nu: HalfInteger,
    lengthscale: f64,
    output_scale_sq: f64,
    /// scale factor c = √(2ν)/l so that s = c·|t|
    scale: f64,
    /// derivative_tables[n] holds the coefficients of Rₙ = (d/ds − 1)ⁿ Q_p;
    /// the n-th derivative of the radial profile is cⁿ sign(t)ⁿ Rₙ(c|t|)e^{−c|t|}.
    derivative_tables: Vec<Vec<f64>>,
}

impl MaternKernel1D {
    pub fn new(nu: HalfInteger, lengthscale: f64, output_scale_sq: f64) -> Result<Self> {
        if !(lengthscale > 0.0) || !lengthscale.is_finite() {
            return Err(Error::InvalidParameter {
                name: "lengthscale",
                reason: format!("must be positive and finite, got {lengthscale}"),
            });
        }
        if !(output_scale_sq > 0.0) || !output_scale_sq.is_finite() {
            return Err(Error::InvalidParameter {
                name: "output_scale_sq",
                reason: format!("must be positive and finite, got {output_scale_sq}"),
            });
        }
        let p = nu.p();
        let mut tables = Vec::with_capacity(2 * p + 1);
        tables.push(nu.series_polynomial());
        for n in 1..=2 * p {
            let next = derive_coeffs(&tables[n - 1]);
            tables.push(next);
        }
        Ok(Self {
            nu,
            lengthscale,
            output_scale_sq,
            scale: (2.0 * nu.nu()).sqrt() / lengthscale,
            derivative_tables: tables,
        })
    }

    pub fn nu(&self) -> HalfInteger {
        self.nu
    }

    pub fn lengthscale(&self) -> f64 {
        self.lengthscale
    }

    pub fn output_scale_sq(&self) -> f64 {
        self.output_scale_sq
    }

    /// n-th derivative of the radial profile f(t) = k(t, 0)/σ² at lag t.
    ///
    /// f is even and C^{2p}; odd-order derivatives vanish at t = 0.
    fn profile_derivative(&self, n: usize, t: f64) -> f64 {
        debug_assert!(n < self.derivative_tables.len());
        if n % 2 == 1 && t == 0.0 {
            return 0.0;
        }
        let s = self.scale * t.abs();
        let sign = if t < 0.0 && n % 2 == 1 { -1.0 } else { 1.0 };
        sign * self.scale.powi(n as i32) * poly_eval(&self.derivative_tables[n], s) * (-s).exp()
    }

    /// Kernel value k(x₁, x₂).
    pub fn value(&self, x1: f64, x2: f64) -> f64 {
        self.output_scale_sq * self.profile_derivative(0, x1 - x2)
    }

    /// Mixed derivative ∂^{a}_{x₁} ∂^{b}_{x₂} k(x₁, x₂) = (−1)^b f^{(a+b)}(x₁−x₂)·σ².
    pub fn mixed_derivative(&self, a: usize, b: usize, x1: f64, x2: f64) -> Result<f64> {
        let p = self.nu.p();
        if a > p || b > p {
            return Err(Error::UnsupportedOrder {
                requested: format!("({a},{b})"),
                budget: format!("({p},{p})"),
                context: "Matérn derivative",
            });
        }
        let sign = if b % 2 == 1 { -1.0 } else { 1.0 };
        Ok(sign * self.output_scale_sq * self.profile_derivative(a + b, x1 - x2))
    }
}

impl Kernel for MaternKernel1D {
    fn input_dim(&self) -> usize {
        1
    }

    fn smoothness(&self) -> MultiIndex {
        MultiIndex::new(vec![self.nu.p()])
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
        self.mixed_derivative(orders1.order(0), orders2.order(0), x1[0], x2[0])
    }
}

/// Isotropic multivariate Matérn kernel k(x₁, x₂) = σ² f(‖x₁−x₂‖/1)·…
///
/// The claim that this kernel induces a Gaussian measure on C^p for d > 1 is
/// conjectured rather than proven, so derivatives are limited to first order
/// per argument (and none for ν = 1/2); prefer [`TensorProductKernel`] when
/// higher-order operators must be applied.
#[derive(Debug, Clone)]
pub struct IsotropicMaternKernel {
    radial: MaternKernel1D,
    dim: usize,
}

impl IsotropicMaternKernel {
    pub fn new(dim: usize, nu: HalfInteger, lengthscale: f64, output_scale_sq: f64) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidParameter {
                name: "dim",
                reason: "input dimension must be at least 1".into(),
            });
        }
        Ok(Self {
            radial: MaternKernel1D::new(nu, lengthscale, output_scale_sq)?,
            dim,
        })
    }

    fn budget_per_axis(&self) -> usize {
        if self.radial.nu().p() >= 1 {
            1
        } else {
            0
        }
    }
}

impl Kernel for IsotropicMaternKernel {
    fn input_dim(&self) -> usize {
        self.dim
    }

    fn smoothness(&self) -> MultiIndex {
        MultiIndex::new(vec![self.budget_per_axis(); self.dim])
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
        check_budget(self, orders1, orders2)?;
        let diff: Vec<f64> = x1.iter().zip(x2).map(|(a, b)| a - b).collect();
        let r = diff.iter().map(|d| d * d).sum::<f64>().sqrt();
        let sigma_sq = self.radial.output_scale_sq();
        let total1 = orders1.total();
        let total2 = orders2.total();
        match (total1, total2) {
            (0, 0) => Ok(sigma_sq * self.radial.profile_derivative(0, r)),
            (1, 0) | (0, 1) => {
                // ∂/∂x1_i k = f'(r) d_i / r, with the r→0 limit 0 (f'(0) = 0).
                let (orders, sign) = if total1 == 1 { (orders1, 1.0) } else { (orders2, -1.0) };
                let axis = (0..self.dim).find(|&i| orders.order(i) == 1).unwrap();
                if r == 0.0 {
                    return Ok(0.0);
                }
                Ok(sign * sigma_sq * self.radial.profile_derivative(1, r) * diff[axis] / r)
            }
            (1, 1) => {
                // −∂²/∂x1_i ∂x1_j of f(‖·‖), via radial chain rule.
                let i = (0..self.dim).find(|&k| orders1.order(k) == 1).unwrap();
                let j = (0..self.dim).find(|&k| orders2.order(k) == 1).unwrap();
                let f2_0 = self.radial.profile_derivative(2, 0.0);
                if r == 0.0 {
                    return Ok(if i == j { -sigma_sq * f2_0 } else { 0.0 });
                }
                let f1 = self.radial.profile_derivative(1, r);
                let f2 = self.radial.profile_derivative(2, r);
                let kron = if i == j { 1.0 } else { 0.0 };
                let hess = f2 * diff[i] * diff[j] / (r * r)
                    + f1 * (kron / r - diff[i] * diff[j] / (r * r * r));
                Ok(-sigma_sq * hess)
            }
            _ => unreachable!("budget check limits total order per argument to 1"),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn diagonal_equals_output_scale() {
        let k = MaternKernel1D::new(HalfInteger::Nu1_2, 1.0, 1.0).unwrap();
        assert_abs_diff_eq!(k.value(0.0, 0.0), 1.0);
        let k = MaternKernel1D::new(HalfInteger::Nu5_2, 2.0, 9.0).unwrap();
        assert_abs_diff_eq!(k.value(0.0, 0.0), 9.0);
        assert_abs_diff_eq!(k.value(1.3, 1.3), 9.0);
    }

    #[test]
    fn exponential_closed_form() {
        let k = MaternKernel1D::new(HalfInteger::Nu1_2, 1.0, 1.0).unwrap();
        assert_abs_diff_eq!(k.value(0.0, 1.0), (-1.0f64).exp(), epsilon = 1e-15);
        assert_abs_diff_eq!(k.value(1.0, 0.0), (-1.0f64).exp(), epsilon = 1e-15);
    }

    #[test]
    fn construction_rejects_bad_parameters() {
        assert!(MaternKernel1D::new(HalfInteger::Nu3_2, 0.0, 1.0).is_err());
        assert!(MaternKernel1D::new(HalfInteger::Nu3_2, -1.0, 1.0).is_err());
        assert!(MaternKernel1D::new(HalfInteger::Nu3_2, 1.0, 0.0).is_err());
        assert!(HalfInteger::from_nu(1.0).is_err());
        assert!(HalfInteger::from_nu(2.5).is_ok());
    }

    #[test]
    fn derivative_values_at_zero_lag() {
        let k = MaternKernel1D::new(HalfInteger::Nu5_2, 1.0, 1.0).unwrap();
        // zeroth derivative is the kernel
        assert_abs_diff_eq!(k.mixed_derivative(0, 0, 0.0, 0.0).unwrap(), 1.0);
        // odd derivative of an even function at zero lag
        assert_abs_diff_eq!(k.mixed_derivative(1, 0, 0.0, 0.0).unwrap(), 0.0);
        // ∂₁∂₂ k(0,0) = ν/(ν−1) = 5/3 for unit scales
        assert_abs_diff_eq!(
            k.mixed_derivative(1, 1, 0.0, 0.0).unwrap(),
            5.0 / 3.0,
            epsilon = 1e-14
        );
        // ∂²₁∂²₂ k(0,0) = (2ν)²/l⁴ · R₄(0) = 25
        assert_abs_diff_eq!(
            k.mixed_derivative(2, 2, 0.0, 0.0).unwrap(),
            25.0,
            epsilon = 1e-12
        );
    }

    #[test]
    fn budget_enforced() {
        let k = MaternKernel1D::new(HalfInteger::Nu3_2, 1.0, 1.0).unwrap();
        assert!(k.mixed_derivative(1, 1, 0.3, 0.1).is_ok());
        assert!(k.mixed_derivative(2, 0, 0.3, 0.1).is_err());
        assert!(k.mixed_derivative(0, 2, 0.3, 0.1).is_err());
    }

    #[test]
    fn symmetry_under_argument_swap() {
        let k = MaternKernel1D::new(HalfInteger::Nu7_2, 0.7, 2.3).unwrap();
        for (a, b) in [(0, 0), (1, 0), (1, 1), (2, 1), (3, 2)] {
            let d1 = k.mixed_derivative(a, b, 0.4, -0.9).unwrap();
            let d2 = k.mixed_derivative(b, a, -0.9, 0.4).unwrap();
            assert_eq!(d1, d2, "({a},{b}) derivative not symmetric");
        }
    }

    #[test]
    fn isotropic_reduces_to_1d() {
        let iso = IsotropicMaternKernel::new(2, HalfInteger::Nu5_2, 1.3, 2.0).unwrap();
        let one = MaternKernel1D::new(HalfInteger::Nu5_2, 1.3, 2.0).unwrap();
        let v_iso = iso.eval(&[0.3, 0.0], &[1.1, 0.0]);
        let v_one = one.value(0.3, 1.1);
        assert_abs_diff_eq!(v_iso, v_one, epsilon = 1e-15);
    }

    #[test]
    fn isotropic_gradient_matches_finite_difference() {
        let iso = IsotropicMaternKernel::new(2, HalfInteger::Nu5_2, 0.9, 1.5).unwrap();
        let x1 = [0.3, -0.2];
        let x2 = [-0.5, 0.4];
        let h = 1e-5;
        let orders = MultiIndex::single(2, 0, 1);
        let zero = MultiIndex::zeros(2);
        let exact = iso.derivative(0, &orders, &x1, 0, &zero, &x2).unwrap();
        let fd = (iso.eval(&[x1[0] + h, x1[1]], &x2) - iso.eval(&[x1[0] - h, x1[1]], &x2)) / (2.0 * h);
        assert_abs_diff_eq!(exact, fd, epsilon = 1e-8);
    }
}
