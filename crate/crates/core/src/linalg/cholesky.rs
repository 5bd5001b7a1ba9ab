use ndarray::{Array1, Array2, ArrayView2};

use crate::error::{Error, Result};

/// First jitter tried after a plain factorization fails.
pub const JITTER_START: f64 = 1e-10;
/// Largest jitter before giving up.
pub const JITTER_MAX: f64 = 1e-4;

/// Lower-triangular factor `L` with `L Lᵀ = M + jitter·I`.
#[derive(Debug, Clone)]
pub struct Cholesky {
    l: Array2<f64>,
    jitter: f64,
}

/// Factorizes a symmetric matrix, escalating diagonal jitter by ×10 from
/// [`JITTER_START`] up to [`JITTER_MAX`] when the plain attempt fails.
pub fn cholesky(m: ArrayView2<f64>) -> Result<Cholesky> {
    if m.nrows() != m.ncols() {
        return Err(Error::shape("cholesky", "square", format!("{:?}", m.dim())));
    }
    if let Some(l) = factor(m, 0.0) {
        return Ok(Cholesky { l, jitter: 0.0 });
    }
    let mut jitter = JITTER_START;
    while jitter <= JITTER_MAX * (1.0 + 1e-9) {
        if let Some(l) = factor(m, jitter) {
            log::debug!("cholesky succeeded with jitter {jitter:e}");
            return Ok(Cholesky { l, jitter });
        }
        jitter *= 10.0;
    }
    Err(Error::NotPositiveDefinite { jitter: JITTER_MAX })
}

fn factor(m: ArrayView2<f64>, jitter: f64) -> Option<Array2<f64>> {
    let n = m.nrows();
    let mut l = Array2::<f64>::zeros((n, n));
    for j in 0..n {
        let mut diag = m[[j, j]] + jitter;
        for k in 0..j {
            diag -= l[[j, k]] * l[[j, k]];
        }
        if !(diag > 0.0) || !diag.is_finite() {
            return None;
        }
        let ljj = diag.sqrt();
        l[[j, j]] = ljj;
        for i in (j + 1)..n {
            let mut s = m[[i, j]];
            for k in 0..j {
                s -= l[[i, k]] * l[[j, k]];
            }
            l[[i, j]] = s / ljj;
        }
    }
    Some(l)
}

impl Cholesky {
    pub fn factor(&self) -> &Array2<f64> {
        &self.l
    }

    pub fn jitter(&self) -> f64 {
        self.jitter
    }

    /// `log |L Lᵀ| = 2 Σ log Lᵢᵢ`.
    pub fn logdet(&self) -> f64 {
        2.0 * self.l.diag().iter().map(|v| v.ln()).sum::<f64>()
    }

    /// Solves `L Lᵀ x = b` for a single right-hand side.
    pub fn solve_vec(&self, b: &Array1<f64>) -> Array1<f64> {
        let n = self.l.nrows();
        let mut y = b.clone();
        for i in 0..n {
            let mut s = y[i];
            for k in 0..i {
                s -= self.l[[i, k]] * y[k];
            }
            y[i] = s / self.l[[i, i]];
        }
        for i in (0..n).rev() {
            let mut s = y[i];
            for k in (i + 1)..n {
                s -= self.l[[k, i]] * y[k];
            }
            y[i] = s / self.l[[i, i]];
        }
        y
    }

    /// `(L Lᵀ)⁻¹`, symmetrized.
    pub fn inverse(&self) -> Array2<f64> {
        let n = self.l.nrows();
        let mut inv = Array2::<f64>::zeros((n, n));
        for j in 0..n {
            let mut e = Array1::<f64>::zeros(n);
            e[j] = 1.0;
            inv.column_mut(j).assign(&self.solve_vec(&e));
        }
        let sym = (&inv + &inv.t()) * 0.5;
        sym
    }
}
