//! Quadratic-form and low-rank log-determinant terms of the GMRF regularizer.

use ndarray::{Array2, ArrayView2};

use super::cholesky::{cholesky, Cholesky};
use super::sparse::CsrMatrix;
use crate::error::{Error, Result};

/// `tr(Eᵀ K E) = Σᵢⱼ Kᵢⱼ ⟨eᵢ, eⱼ⟩`, visiting only stored entries of `K`.
pub fn trace_quadratic(k: &CsrMatrix, e: ArrayView2<f64>) -> Result<f64> {
    if k.rows() != e.nrows() || k.cols() != e.nrows() {
        return Err(Error::shape(
            "trace_quadratic",
            format!("{} rows", k.rows()),
            format!("{} rows", e.nrows()),
        ));
    }
    let mut total = 0.0;
    for i in 0..k.rows() {
        let (cols, vals) = k.row(i);
        let ei = e.row(i);
        for (&j, &v) in cols.iter().zip(vals) {
            total += v * ei.dot(&e.row(j));
        }
    }
    Ok(total)
}

/// Gradient of [`trace_quadratic`] with respect to `E`: `(K + Kᵀ) E`.
pub fn trace_quadratic_grad(k: &CsrMatrix, e: ArrayView2<f64>) -> Result<Array2<f64>> {
    let ke = k.mul_dense(e)?;
    let kte = k.tr_mul_dense(e)?;
    Ok(ke + kte)
}

/// `log |I + β⁻¹ EᵀE|` together with its factorization, kept for the gradient.
#[derive(Debug, Clone)]
pub struct LogdetGram {
    pub value: f64,
    beta: f64,
    chol: Cholesky,
}

/// Forms the `d×d` matrix `I + β⁻¹ EᵀE` and returns its log-determinant.
///
/// Cost is `O(n d² + d³)`. The `n×n` determinant `|β Iₙ + E Eᵀ|` equals
/// `exp(value) · βⁿ` by the matrix determinant lemma.
pub fn logdet_gram(e: ArrayView2<f64>, beta: f64) -> Result<LogdetGram> {
    if !(beta > 0.0) {
        return Err(Error::InvalidInput(format!("beta must be positive, got {beta}")));
    }
    let d = e.ncols();
    let mut m = e.t().dot(&e) / beta;
    for i in 0..d {
        m[[i, i]] += 1.0;
    }
    let chol = cholesky(m.view())?;
    Ok(LogdetGram {
        value: chol.logdet(),
        beta,
        chol,
    })
}

impl LogdetGram {
    /// `2 β⁻¹ E (I + β⁻¹ EᵀE)⁻¹`.
    pub fn grad(&self, e: ArrayView2<f64>) -> Array2<f64> {
        let inv = self.chol.inverse();
        e.dot(&inv) * (2.0 / self.beta)
    }

    pub fn jitter(&self) -> f64 {
        self.chol.jitter()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use ndarray::array;

    #[test]
    fn zero_embedding_costs_nothing() {
        let k = CsrMatrix::from_triplets(
            2,
            2,
            &[(0, 0, 1.0), (0, 1, -1.0), (1, 0, -1.0), (1, 1, 1.0)],
        )
        .unwrap();
        let e = Array2::<f64>::zeros((2, 3));
        assert_eq!(trace_quadratic(&k, e.view()).unwrap(), 0.0);
        assert_eq!(logdet_gram(e.view(), 0.5).unwrap().value, 0.0);
    }

    #[test]
    fn identical_neighbors_cost_nothing() {
        let k = CsrMatrix::from_triplets(
            2,
            2,
            &[(0, 0, 1.0), (0, 1, -1.0), (1, 0, -1.0), (1, 1, 1.0)],
        )
        .unwrap();
        assert_eq!(trace_quadratic(&k, array![[1.0], [1.0]].view()).unwrap(), 0.0);
    }

    #[test]
    fn scalar_logdet() {
        let v = logdet_gram(array![[1.0]].view(), 1.0).unwrap().value;
        assert_abs_diff_eq!(v, 2f64.ln(), epsilon = 1e-15);
    }

    #[test]
    fn rejects_nonpositive_beta() {
        assert!(logdet_gram(array![[1.0]].view(), 0.0).is_err());
    }
}
