//! Dense Cholesky factorization with block extension.
//!
//! The conditioning machinery repeatedly augments an already-factorized
//! kernel matrix with a handful of pending rows, so the factor type supports
//! appending a block without refactorizing the existing part.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Lower-triangular Cholesky factor `L` with `L Lᵀ = A`.
#[derive(Debug, Clone)]
pub struct CholFactor {
    l: DMatrix<f64>,
}

impl CholFactor {
    /// Factorize a symmetric positive-definite matrix.
    pub fn new(a: &DMatrix<f64>) -> Result<Self> {
        let n = a.nrows();
        if a.ncols() != n {
            return Err(Error::argument(format!(
                "cholesky: matrix is {}x{}, expected square",
                a.nrows(),
                a.ncols()
            )));
        }
        // left-looking column factorization over the contiguous buffer
        let mut l = a.lower_triangle();
        let data = l.as_mut_slice();
        for j in 0..n {
            let (head, tail) = data.split_at_mut(j * n);
            let col_j = &mut tail[j..n]; // rows j.. of column j
            for k in 0..j {
                let col_k = &head[k * n + j..k * n + n];
                let ljk = col_k[0];
                if ljk != 0.0 {
                    for (cj, &ck) in col_j.iter_mut().zip(col_k) {
                        *cj -= ljk * ck;
                    }
                }
            }
            let diag = col_j[0];
            if !(diag > 0.0) || !diag.is_finite() {
                return Err(Error::numerical(format!(
                    "cholesky: non-positive pivot {diag:.3e} at column {j} of {n}"
                )));
            }
            let pivot = diag.sqrt();
            col_j[0] = pivot;
            for v in col_j[1..].iter_mut() {
                *v /= pivot;
            }
        }
        Ok(CholFactor { l })
    }

    /// An empty 0x0 factor (the prior, before any conditioning).
    pub fn empty() -> Self {
        CholFactor {
            l: DMatrix::zeros(0, 0),
        }
    }

    /// Wrap an already-lower-triangular factor (used by incremental row
    /// extensions that build the border directly).
    pub(crate) fn from_lower(l: DMatrix<f64>) -> Self {
        debug_assert_eq!(l.nrows(), l.ncols());
        CholFactor { l }
    }

    pub fn n(&self) -> usize {
        self.l.nrows()
    }

    /// The lower-triangular factor.
    pub fn lower(&self) -> &DMatrix<f64> {
        &self.l
    }

    /// Solve `L x = b` in place. Column-oriented forward substitution over
    /// the contiguous column-major buffer.
    pub fn solve_lower_in_place(&self, b: &mut [f64]) {
        let n = self.n();
        debug_assert_eq!(b.len(), n);
        let data = self.l.as_slice();
        for k in 0..n {
            let col = &data[k * n..(k + 1) * n];
            let xk = b[k] / col[k];
            b[k] = xk;
            for (bi, &lik) in b[(k + 1)..].iter_mut().zip(&col[(k + 1)..]) {
                *bi -= lik * xk;
            }
        }
    }

    /// Solve `L x = b`.
    pub fn solve_lower(&self, b: &DVector<f64>) -> DVector<f64> {
        let mut x = b.clone();
        self.solve_lower_in_place(x.as_mut_slice());
        x
    }

    /// Solve `L X = B` column by column.
    pub fn solve_lower_mat(&self, b: &DMatrix<f64>) -> DMatrix<f64> {
        let mut x = b.clone();
        for mut col in x.column_iter_mut() {
            let slice: &mut [f64] = col.as_mut_slice();
            self.solve_lower_in_place(slice);
        }
        x
    }

    /// Solve `Lᵀ x = b` in place.
    pub fn solve_upper_in_place(&self, b: &mut [f64]) {
        let n = self.n();
        debug_assert_eq!(b.len(), n);
        let data = self.l.as_slice();
        for i in (0..n).rev() {
            let col = &data[i * n..(i + 1) * n];
            let mut s = b[i];
            for (bk, &lki) in b[(i + 1)..].iter().zip(&col[(i + 1)..]) {
                s -= lki * bk;
            }
            b[i] = s / col[i];
        }
    }

    /// Solve `L Lᵀ x = b`.
    pub fn solve(&self, b: &DVector<f64>) -> DVector<f64> {
        let mut x = b.clone();
        self.solve_lower_in_place(x.as_mut_slice());
        self.solve_upper_in_place(x.as_mut_slice());
        x
    }

    /// Sum of log-diagonal entries, i.e. `½ log det A`.
    pub fn half_log_det(&self) -> f64 {
        (0..self.n()).map(|i| self.l[(i, i)].ln()).sum()
    }

    /// `L Lᵀ`, for invariant checks.
    pub fn reconstruct(&self) -> DMatrix<f64> {
        &self.l * self.l.transpose()
    }

    /// Extend the factor for the bordered matrix
    /// `[[A, B], [Bᵀ, C]]` given `cross = B` (n×b) and `corner = C` (b×b).
    pub fn extend(&self, cross: &DMatrix<f64>, corner: &DMatrix<f64>) -> Result<Self> {
        let n = self.n();
        let b = corner.nrows();
        if cross.nrows() != n || cross.ncols() != b || corner.ncols() != b {
            return Err(Error::argument(format!(
                "cholesky extend: cross is {}x{}, corner is {}x{}, expected {}x{} and {}x{}",
                cross.nrows(),
                cross.ncols(),
                corner.nrows(),
                corner.ncols(),
                n,
                b,
                b,
                b
            )));
        }
        // V = L⁻¹ B, Schur complement S = C − Vᵀ V, L_new = [[L, 0], [Vᵀ, chol(S)]].
        let v = self.solve_lower_mat(cross);
        let schur = corner - v.transpose() * &v;
        let ls = CholFactor::new(&schur).map_err(|e| {
            Error::numerical(format!("cholesky extend: schur factorization failed: {e}"))
        })?;
        let m = n + b;
        let mut l = DMatrix::<f64>::zeros(m, m);
        l.view_mut((0, 0), (n, n)).copy_from(&self.l);
        l.view_mut((n, 0), (b, n)).copy_from(&v.transpose());
        l.view_mut((n, n), (b, b)).copy_from(ls.lower());
        Ok(CholFactor { l })
    }
}

/// Eigenvalues of a symmetric matrix, ascending.
pub fn symmetric_eigenvalues(a: &DMatrix<f64>) -> DVector<f64> {
    let mut ev = a.clone().symmetric_eigen().eigenvalues;
    ev.as_mut_slice()
        .sort_by(|x, y| x.partial_cmp(y).expect("non-finite eigenvalue"));
    ev
}

/// Solve the symmetric system `A x = b` through an eigendecomposition.
///
/// Returns an error when the smallest singular value falls below
/// `1e-10 · max(1, ‖A‖₂)`.
pub fn solve_symmetric(a: &DMatrix<f64>, b: &DVector<f64>) -> Result<DVector<f64>> {
    let eig = a.clone().symmetric_eigen();
    let sigma_max = eig.eigenvalues.iter().fold(0.0f64, |m, &l| m.max(l.abs()));
    let sigma_min = eig
        .eigenvalues
        .iter()
        .fold(f64::INFINITY, |m, &l| m.min(l.abs()));
    let threshold = 1e-10 * sigma_max.max(1.0);
    if sigma_min < threshold {
        return Err(Error::SingularHessian {
            sigma_min,
            threshold,
        });
    }
    let proj = eig.eigenvectors.transpose() * b;
    let scaled = DVector::from_iterator(
        proj.len(),
        proj.iter()
            .zip(eig.eigenvalues.iter())
            .map(|(p, l)| p / l),
    );
    Ok(&eig.eigenvectors * scaled)
}
