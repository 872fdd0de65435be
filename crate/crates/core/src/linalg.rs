//! Dense lower-triangular Cholesky factorization with escalating jitter and
//! incremental block extension.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Jitter escalation ladder applied to a Gram diagonal before factorization.
///
/// Each entry is a multiple of the mean diagonal of the block being
/// factorized. The plain matrix is attempted first; on failure the jitter is
/// escalated by decades.
#[derive(Debug, Clone)]
pub struct JitterPolicy {
    ladder: Vec<f64>,
}

impl JitterPolicy {
    pub fn new(ladder: Vec<f64>) -> Self {
        Self { ladder }
    }

    pub fn ladder(&self) -> &[f64] {
        &self.ladder
    }
}

impl Default for JitterPolicy {
    fn default() -> Self {
        Self {
            ladder: vec![0.0, 1e-10, 1e-9, 1e-8, 1e-7, 1e-6],
        }
    }
}

/// A lower-triangular Cholesky factor that can be grown by trailing blocks
/// without touching the already-computed leading block.
#[derive(Debug, Clone)]
pub struct LowerFactor {
    l: DMatrix<f64>,
}

impl LowerFactor {
    pub fn empty() -> Self {
        Self {
            l: DMatrix::zeros(0, 0),
        }
    }

    pub fn dim(&self) -> usize {
        self.l.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.l
    }

    /// Factorizes a symmetric positive-definite matrix, escalating jitter on
    /// the diagonal until the factorization succeeds.
    pub fn factor(a: &DMatrix<f64>, policy: &JitterPolicy) -> Result<(Self, f64)> {
        Self::empty().extend(&DMatrix::zeros(0, a.nrows()), a, policy)
    }

    /// Extends the factor of G to the factor of [[G, cross], [crossᵀ, corner]]:
    /// the new off-diagonal rows solve L·Xᵀ = cross and the trailing block is
    /// the Cholesky factor of the Schur complement corner − XXᵀ (with jitter
    /// escalation on the corner only). The leading block of the result is
    /// bit-identical to `self`.
    pub fn extend(
        &self,
        cross: &DMatrix<f64>,
        corner: &DMatrix<f64>,
        policy: &JitterPolicy,
    ) -> Result<(Self, f64)> {
        let n = self.dim();
        let k = corner.nrows();
        if cross.nrows() != n || cross.ncols() != k || corner.ncols() != k {
            return Err(Error::DimensionMismatch {
                context: "cholesky extension",
                expected: n * k,
                got: cross.nrows() * cross.ncols(),
            });
        }
        let asym = (corner - corner.transpose()).abs().max();
        let scale = corner.abs().max().max(1.0);
        if asym > 1e-10 * scale {
            return Err(Error::Contract(format!(
                "corner block must be symmetric (max asymmetry {asym:.3e})"
            )));
        }

        // off-diagonal rows: L21ᵀ solves L L21ᵀ = cross
        let mut l21t = cross.clone();
        self.l.solve_lower_triangular_mut(&mut l21t);
        let l21 = l21t.transpose();
        let schur = corner - &l21 * l21.transpose();

        let mean_diag = if k > 0 {
            corner.diagonal().iter().sum::<f64>() / k as f64
        } else {
            0.0
        };
        let mut last_err = String::new();
        for &eps in policy.ladder() {
            let mut attempt = schur.clone();
            if eps > 0.0 {
                let bump = eps * mean_diag.abs().max(f64::MIN_POSITIVE);
                for i in 0..k {
                    attempt[(i, i)] += bump;
                }
            }
            match cholesky_in_place(attempt) {
                Ok(l22) => {
                    let mut l = DMatrix::zeros(n + k, n + k);
                    l.view_mut((0, 0), (n, n)).copy_from(&self.l);
                    l.view_mut((n, 0), (k, n)).copy_from(&l21);
                    l.view_mut((n, n), (k, k)).copy_from(&l22);
                    return Ok((Self { l }, eps));
                }
                Err(msg) => last_err = msg,
            }
        }
        Err(Error::Numerical(format!(
            "Gram factorization failed after jitter escalation up to {:.1e} x mean diagonal \
             (block size {k}, mean diagonal {mean_diag:.6e}): {last_err}",
            policy.ladder().last().copied().unwrap_or(0.0)
        )))
    }

    /// Solves L z = rhs.
    pub fn solve_lower(&self, rhs: &DVector<f64>) -> DVector<f64> {
        let mut z = rhs.clone();
        self.l.solve_lower_triangular_mut(&mut z);
        z
    }

    /// Solves L Z = Rhs columnwise.
    pub fn solve_lower_matrix(&self, rhs: &DMatrix<f64>) -> DMatrix<f64> {
        let mut z = rhs.clone();
        self.l.solve_lower_triangular_mut(&mut z);
        z
    }

    /// Solves (L Lᵀ) x = rhs.
    pub fn solve(&self, rhs: &DVector<f64>) -> DVector<f64> {
        let mut z = self.solve_lower(rhs);
        self.l.transpose().solve_upper_triangular_mut(&mut z);
        z
    }

    /// Reconstructs L Lᵀ.
    pub fn reconstruct(&self) -> DMatrix<f64> {
        &self.l * self.l.transpose()
    }
}

/// Plain unblocked lower Cholesky; fails on a non-positive pivot.
fn cholesky_in_place(mut a: DMatrix<f64>) -> std::result::Result<DMatrix<f64>, String> {
    let n = a.nrows();
    for j in 0..n {
        let mut d = a[(j, j)];
        for k in 0..j {
            d -= a[(j, k)] * a[(j, k)];
        }
        if !(d > 0.0) || !d.is_finite() {
            return Err(format!("non-positive pivot {d:.6e} at index {j}"));
        }
        let d = d.sqrt();
        a[(j, j)] = d;
        for i in (j + 1)..n {
            let mut s = a[(i, j)];
            for k in 0..j {
                s -= a[(i, k)] * a[(j, k)];
            }
            a[(i, j)] = s / d;
        }
    }
    // zero the strict upper triangle
    for j in 1..n {
        for i in 0..j {
            a[(i, j)] = 0.0;
        }
    }
    Ok(a)
}
