//! Jittered Cholesky factorisation shared by every posterior computation.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn, SymmetricEigen};

use crate::error::{Error, Result};

/// Default relative jitter: `1e-8 * max(diag)`.
pub const DEFAULT_JITTER: f64 = 1e-8;

/// Factor applied to the jitter on the single retry.
const RETRY_FACTOR: f64 = 100.0;

/// Cholesky factor of `A + jitter * I`.
#[derive(Debug, Clone)]
pub struct Factor {
    chol: Cholesky<f64, Dyn>,
    jitter: f64,
}

impl Factor {
    /// Factorises a symmetric matrix, adding a diagonal nugget.
    ///
    /// `nugget` is the amount of white variance already on the diagonal
    /// (observation noise plus white-noise kernel components). Extra jitter is
    /// only the shortfall between it and `rel_jitter * max(diag)`; on failure
    /// the full `100 * rel_jitter * max(diag)` is added once more.
    pub fn new(a: DMatrix<f64>, rel_jitter: f64, nugget: f64) -> Result<Self> {
        let n = a.nrows();
        let max_diag = (0..n).map(|i| a[(i, i)]).fold(0.0_f64, f64::max);
        let scale = if max_diag > 0.0 { max_diag } else { 1.0 };
        let first = (rel_jitter * scale - nugget).max(0.0);
        let retry = first + RETRY_FACTOR * rel_jitter * scale;
        for (attempt, jitter) in [first, retry].into_iter().enumerate() {
            let mut m = a.clone();
            for i in 0..n {
                m[(i, i)] += jitter;
            }
            if let Some(chol) = Cholesky::new(m) {
                if attempt > 0 {
                    log::debug!("cholesky needed retry jitter {jitter:e}");
                }
                return Ok(Factor { chol, jitter });
            }
        }
        Err(Error::IllConditioned {
            min_eigenvalue: smallest_eigenvalue(&a),
        })
    }

    pub fn jitter(&self) -> f64 {
        self.jitter
    }

    pub fn dim(&self) -> usize {
        self.chol.l_dirty().nrows()
    }

    /// `A^{-1} b`.
    pub fn solve(&self, b: &DVector<f64>) -> DVector<f64> {
        self.chol.solve(b)
    }

    /// `A^{-1} B`.
    pub fn solve_mat(&self, b: &DMatrix<f64>) -> DMatrix<f64> {
        self.chol.solve(b)
    }

    /// `L^{-1} B` for the lower factor `L`.
    pub fn solve_lower(&self, b: &DMatrix<f64>) -> DMatrix<f64> {
        let l = self.chol.l();
        l.solve_lower_triangular(b)
            .expect("cholesky factor has a non-zero diagonal")
    }

    pub fn l(&self) -> DMatrix<f64> {
        self.chol.l()
    }

    /// `log |A|`.
    pub fn log_det(&self) -> f64 {
        let l = self.chol.l_dirty();
        2.0 * (0..l.nrows()).map(|i| l[(i, i)].ln()).sum::<f64>()
    }
}

/// Smallest eigenvalue, used to make factorisation failures actionable.
pub fn smallest_eigenvalue(m: &DMatrix<f64>) -> f64 {
    if m.nrows() == 0 {
        return f64::NAN;
    }
    if m.iter().any(|v| !v.is_finite()) {
        return f64::NAN;
    }
    SymmetricEigen::new(m.clone())
        .eigenvalues
        .iter()
        .copied()
        .fold(f64::INFINITY, f64::min)
}
