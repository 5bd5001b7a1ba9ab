//! Dense kernels and their reverse-mode adjoints.
//!
//! The network is a fixed graph, so each forward kernel is paired with a
//! hand-written backward that maps the output gradient to input gradients.

use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis, Zip};
use rand::Rng;

use crate::error::{Error, Result};

/// Row-major dense matrix used throughout the crate.
pub type DenseMatrix = Array2<f64>;

/// Floor applied to row norms before division.
pub const NORM_EPS: f64 = 1e-12;

pub fn ensure_finite(what: &str, m: ArrayView2<f64>) -> Result<()> {
    if m.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::NonFinite(what.to_string()))
    }
}

/// `a · b`.
pub fn matmul(a: ArrayView2<f64>, b: ArrayView2<f64>) -> Result<DenseMatrix> {
    if a.ncols() != b.nrows() {
        return Err(Error::shape(
            "matmul",
            format!("inner dim {}", a.ncols()),
            format!("inner dim {}", b.nrows()),
        ));
    }
    let out = a.dot(&b);
    ensure_finite("matmul", out.view())?;
    Ok(out)
}

/// Adjoint of `c = a · b`: returns `(ḡ bᵀ, aᵀ ḡ)`.
pub fn matmul_backward(
    a: ArrayView2<f64>,
    b: ArrayView2<f64>,
    grad: ArrayView2<f64>,
) -> (DenseMatrix, DenseMatrix) {
    (grad.dot(&b.t()), a.t().dot(&grad))
}

/// `a · bᵀ`, the layout used by the linear decoders (`W` stored out × in).
pub fn matmul_bt(a: ArrayView2<f64>, b: ArrayView2<f64>) -> Result<DenseMatrix> {
    if a.ncols() != b.ncols() {
        return Err(Error::shape(
            "matmul_bt",
            format!("inner dim {}", a.ncols()),
            format!("inner dim {}", b.ncols()),
        ));
    }
    Ok(a.dot(&b.t()))
}

/// Adjoint of `c = a · bᵀ`: returns `(ḡ b, ḡᵀ a)`.
pub fn matmul_bt_backward(
    a: ArrayView2<f64>,
    b: ArrayView2<f64>,
    grad: ArrayView2<f64>,
) -> (DenseMatrix, DenseMatrix) {
    (grad.dot(&b), grad.t().dot(&a))
}

pub fn add_bias(x: ArrayView2<f64>, bias: ArrayView1<f64>) -> Result<DenseMatrix> {
    if x.ncols() != bias.len() {
        return Err(Error::shape("add_bias", x.ncols(), bias.len()));
    }
    Ok(&x + &bias)
}

/// Gradient of the bias in `x + b`: column sums of the output gradient.
pub fn bias_backward(grad: ArrayView2<f64>) -> Array1<f64> {
    grad.sum_axis(Axis(0))
}

pub fn relu(x: ArrayView2<f64>) -> DenseMatrix {
    x.mapv(|v| v.max(0.0))
}

/// Passes gradient where the pre-activation was strictly positive.
pub fn relu_backward(pre: ArrayView2<f64>, grad: ArrayView2<f64>) -> DenseMatrix {
    let mut out = grad.to_owned();
    Zip::from(&mut out).and(pre).for_each(|g, &p| {
        if p <= 0.0 {
            *g = 0.0;
        }
    });
    out
}

/// Inverted dropout mask: each entry is `0` or `1/(1-p)`.
#[derive(Debug, Clone)]
pub struct DropoutMask {
    scale: Option<DenseMatrix>,
}

impl DropoutMask {
    /// Identity mask (evaluation mode or `p == 0`).
    pub fn identity() -> Self {
        Self { scale: None }
    }

    pub fn sample<R: Rng + ?Sized>(
        shape: (usize, usize),
        p: f64,
        training: bool,
        rng: &mut R,
    ) -> Result<Self> {
        if !(0.0..1.0).contains(&p) {
            return Err(Error::InvalidInput(format!("dropout p={p} not in [0,1)")));
        }
        if !training || p == 0.0 {
            return Ok(Self::identity());
        }
        let keep = 1.0 / (1.0 - p);
        let scale = Array2::from_shape_simple_fn(shape, || {
            if rng.random::<f64>() < p {
                0.0
            } else {
                keep
            }
        });
        Ok(Self { scale: Some(scale) })
    }

    /// Applies the mask; the backward pass is the same operation.
    pub fn apply(&self, x: ArrayView2<f64>) -> DenseMatrix {
        match &self.scale {
            None => x.to_owned(),
            Some(s) => &x * s,
        }
    }

    pub fn is_identity(&self) -> bool {
        self.scale.is_none()
    }
}

/// Output of [`row_unit_normalize`], keeping what the backward pass needs.
#[derive(Debug, Clone)]
pub struct UnitRows {
    pub out: DenseMatrix,
    pub norms: Array1<f64>,
}

/// Maps each row `z` to `z / max(‖z‖₂, ε)`.
pub fn row_unit_normalize(z: ArrayView2<f64>) -> UnitRows {
    let norms: Array1<f64> = z
        .rows()
        .into_iter()
        .map(|r| r.dot(&r).sqrt())
        .collect();
    let mut out = z.to_owned();
    for (mut row, &nrm) in out.rows_mut().into_iter().zip(norms.iter()) {
        row /= nrm.max(NORM_EPS);
    }
    UnitRows { out, norms }
}

/// Adjoint of [`row_unit_normalize`]: `(I − ẑẑᵀ) ḡ / ‖z‖`, or `ḡ / ε` below the floor.
pub fn row_unit_normalize_backward(unit: &UnitRows, grad: ArrayView2<f64>) -> DenseMatrix {
    let mut out = grad.to_owned();
    for ((mut g, y), &nrm) in out
        .rows_mut()
        .into_iter()
        .zip(unit.out.rows())
        .zip(unit.norms.iter())
    {
        if nrm > NORM_EPS {
            let proj = y.dot(&g);
            g.scaled_add(-proj, &y);
            g /= nrm;
        } else {
            g /= NORM_EPS;
        }
    }
    out
}

#[inline]
pub fn sigmoid_scalar(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// `log(1 + eˣ)` without overflow.
#[inline]
pub fn softplus(x: f64) -> f64 {
    if x > 0.0 {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

pub fn sigmoid(x: ArrayView2<f64>) -> DenseMatrix {
    x.mapv(sigmoid_scalar)
}

/// Adjoint of elementwise sigmoid given its output `y`.
pub fn sigmoid_backward(y: ArrayView2<f64>, grad: ArrayView2<f64>) -> DenseMatrix {
    let mut out = grad.to_owned();
    Zip::from(&mut out).and(y).for_each(|g, &s| *g *= s * (1.0 - s));
    out
}

pub fn log_softmax_rows(x: ArrayView2<f64>) -> DenseMatrix {
    let mut out = x.to_owned();
    for mut row in out.rows_mut() {
        let max = row.fold(f64::NEG_INFINITY, |a, &b| a.max(b));
        let lse = max + row.iter().map(|v| (v - max).exp()).sum::<f64>().ln();
        row.mapv_inplace(|v| v - lse);
    }
    out
}

/// Adjoint of row log-softmax given its output `y`: `ḡ − softmax · Σḡ`.
pub fn log_softmax_rows_backward(y: ArrayView2<f64>, grad: ArrayView2<f64>) -> DenseMatrix {
    let mut out = grad.to_owned();
    for (mut g, yr) in out.rows_mut().into_iter().zip(y.rows()) {
        let total = g.sum();
        Zip::from(&mut g).and(&yr).for_each(|gi, &li| *gi -= li.exp() * total);
    }
    out
}

/// Gathers the listed rows into a new matrix.
pub fn gather_rows(m: ArrayView2<f64>, rows: &[usize]) -> DenseMatrix {
    m.select(Axis(0), rows)
}

/// Adds `src` row `k` into `dst` row `rows[k]`.
pub fn scatter_add_rows(dst: &mut DenseMatrix, rows: &[usize], src: ArrayView2<f64>) {
    for (k, &r) in rows.iter().enumerate() {
        let mut d = dst.row_mut(r);
        d += &src.row(k);
    }
}
