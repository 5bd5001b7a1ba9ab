//! GCN encoder on identity inputs and the linear feature/label decoders.
//!
//! Each encoder head computes
//! `E = unitnorm(Â · dropout(relu(Â·W1 + b1)) · W2 + b2)`. The identity
//! input is never materialized: `Â·I·W1` is just `Â·W1`, so `W1` acts as a
//! free per-node embedding table.

use ndarray::{s, Array1, Array2, ArrayView2};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::config::{TrainConfig, Variant};
use crate::error::{Error, Result};
use crate::linalg::{
    self, add_bias, bias_backward, ensure_finite, matmul, matmul_backward, relu, relu_backward,
    row_unit_normalize, row_unit_normalize_backward, CsrMatrix, DropoutMask, UnitRows,
};
use crate::rng::{stream, Stream};

/// Sizes of a run: nodes, latent size, features, classes, covariance rank.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Dims {
    pub n: usize,
    pub d: usize,
    pub m: usize,
    pub c: usize,
    pub r: usize,
}

/// Two-layer GCN weights.
#[derive(Debug, Clone, PartialEq)]
pub struct EncoderHead {
    pub w1: Array2<f64>,
    pub b1: Array1<f64>,
    pub w2: Array2<f64>,
    pub b2: Array1<f64>,
}

impl EncoderHead {
    fn zeros(n: usize, d: usize) -> Self {
        Self {
            w1: Array2::zeros((n, d)),
            b1: Array1::zeros(d),
            w2: Array2::zeros((d, d)),
            b2: Array1::zeros(d),
        }
    }
}

/// All trainable weights. Also used to hold gradients.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    pub encoder: EncoderHead,
    /// Feature decoder, `m × d`.
    pub wx: Array2<f64>,
    pub bx: Array1<f64>,
    /// Label decoder, `c × d`.
    pub wy: Array2<f64>,
    pub by: Array1<f64>,
    /// Covariance head of the stochastic variant.
    pub sigma: Option<EncoderHead>,
}

/// Tensor names in checkpoint order.
pub const TENSOR_NAMES: [&str; 12] = [
    "W1", "b1", "W2", "b2", "Wx", "bx", "Wy", "by", "W1_sigma", "b1_sigma", "W2_sigma",
    "b2_sigma",
];

fn glorot<R: Rng>(rows: usize, cols: usize, fan_in: usize, fan_out: usize, rng: &mut R) -> Array2<f64> {
    let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
    Array2::from_shape_simple_fn((rows, cols), || rng.random_range(-limit..=limit))
}

/// Glorot-uniform weights, zero biases. Every tensor draws from its own
/// stream of `seed`, so shapes of one tensor never shift another.
pub fn init_params(dims: Dims, variant: Variant, seed: u64) -> Result<ModelParams> {
    let Dims { n, d, m, c, .. } = dims;
    if n == 0 || d == 0 || m == 0 {
        return Err(Error::InvalidInput(format!("non-positive dimensions {dims:?}")));
    }
    let head = |offset: u64| EncoderHead {
        w1: glorot(n, d, n, d, &mut stream(seed, Stream::Init, offset)),
        b1: Array1::zeros(d),
        w2: glorot(d, d, d, d, &mut stream(seed, Stream::Init, offset + 1)),
        b2: Array1::zeros(d),
    };
    Ok(ModelParams {
        encoder: head(0),
        wx: glorot(m, d, d, m, &mut stream(seed, Stream::Init, 2)),
        bx: Array1::zeros(m),
        wy: glorot(c, d, d, c, &mut stream(seed, Stream::Init, 3)),
        by: Array1::zeros(c),
        sigma: (variant == Variant::Stoch).then(|| head(4)),
    })
}

impl ModelParams {
    pub fn dims(&self, r: usize) -> Dims {
        Dims {
            n: self.encoder.w1.nrows(),
            d: self.encoder.w1.ncols(),
            m: self.wx.nrows(),
            c: self.wy.nrows(),
            r,
        }
    }

    pub fn zeros_like(&self) -> Self {
        let (n, d) = self.encoder.w1.dim();
        Self {
            encoder: EncoderHead::zeros(n, d),
            wx: Array2::zeros(self.wx.dim()),
            bx: Array1::zeros(self.bx.len()),
            wy: Array2::zeros(self.wy.dim()),
            by: Array1::zeros(self.by.len()),
            sigma: self.sigma.as_ref().map(|_| EncoderHead::zeros(n, d)),
        }
    }

    /// `(name, rows, cols, values)` in checkpoint order.
    pub fn tensors(&self) -> Vec<(&'static str, usize, usize, &[f64])> {
        fn m2(a: &Array2<f64>) -> (usize, usize, &[f64]) {
            (a.nrows(), a.ncols(), a.as_slice().expect("standard layout"))
        }
        fn m1(a: &Array1<f64>) -> (usize, usize, &[f64]) {
            (1, a.len(), a.as_slice().expect("standard layout"))
        }
        let mut parts = vec![
            m2(&self.encoder.w1),
            m1(&self.encoder.b1),
            m2(&self.encoder.w2),
            m1(&self.encoder.b2),
            m2(&self.wx),
            m1(&self.bx),
            m2(&self.wy),
            m1(&self.by),
        ];
        if let Some(h) = &self.sigma {
            parts.extend([m2(&h.w1), m1(&h.b1), m2(&h.w2), m1(&h.b2)]);
        }
        parts
            .into_iter()
            .zip(TENSOR_NAMES)
            .map(|((r, c, v), name)| (name, r, c, v))
            .collect()
    }

    /// Mutable flat views in checkpoint order.
    pub fn tensors_mut(&mut self) -> Vec<&mut [f64]> {
        let mut out: Vec<&mut [f64]> = vec![
            self.encoder.w1.as_slice_mut().unwrap(),
            self.encoder.b1.as_slice_mut().unwrap(),
            self.encoder.w2.as_slice_mut().unwrap(),
            self.encoder.b2.as_slice_mut().unwrap(),
            self.wx.as_slice_mut().unwrap(),
            self.bx.as_slice_mut().unwrap(),
            self.wy.as_slice_mut().unwrap(),
            self.by.as_slice_mut().unwrap(),
        ];
        if let Some(h) = &mut self.sigma {
            out.push(h.w1.as_slice_mut().unwrap());
            out.push(h.b1.as_slice_mut().unwrap());
            out.push(h.w2.as_slice_mut().unwrap());
            out.push(h.b2.as_slice_mut().unwrap());
        }
        out
    }

    pub fn is_finite(&self) -> bool {
        self.tensors()
            .iter()
            .all(|(_, _, _, v)| v.iter().all(|x| x.is_finite()))
    }
}

/// Activations of one encoder head kept for the backward pass.
#[derive(Debug, Clone)]
pub struct HeadCache {
    pre_relu: Array2<f64>,
    mask: DropoutMask,
    dropped: Array2<f64>,
    unit: Option<UnitRows>,
}

/// Runs one head with a pre-drawn dropout mask.
pub fn encode_head(
    head: &EncoderHead,
    a_hat: &CsrMatrix,
    mask: DropoutMask,
    unit_norm: bool,
) -> Result<(Array2<f64>, HeadCache)> {
    let propagated = a_hat.mul_dense(head.w1.view())?;
    let pre_relu = add_bias(propagated.view(), head.b1.view())?;
    let dropped = mask.apply(relu(pre_relu.view()).view());
    let mixed = matmul(dropped.view(), head.w2.view())?;
    let out = add_bias(a_hat.mul_dense(mixed.view())?.view(), head.b2.view())?;
    let (out, unit) = if unit_norm {
        let u = row_unit_normalize(out.view());
        (u.out.clone(), Some(u))
    } else {
        (out, None)
    };
    ensure_finite("encoder output", out.view())?;
    Ok((
        out,
        HeadCache {
            pre_relu,
            mask,
            dropped,
            unit,
        },
    ))
}

/// Backward pass of [`encode_head`]; returns the head's weight gradients.
pub fn encode_head_backward(
    head: &EncoderHead,
    a_hat: &CsrMatrix,
    cache: &HeadCache,
    grad_out: ArrayView2<f64>,
) -> Result<EncoderHead> {
    let grad_pre_norm = match &cache.unit {
        Some(u) => row_unit_normalize_backward(u, grad_out),
        None => grad_out.to_owned(),
    };
    let b2 = bias_backward(grad_pre_norm.view());
    let grad_mixed = a_hat.tr_mul_dense(grad_pre_norm.view())?;
    let (grad_dropped, w2) = matmul_backward(cache.dropped.view(), head.w2.view(), grad_mixed.view());
    let grad_act = cache.mask.apply(grad_dropped.view());
    let grad_pre = relu_backward(cache.pre_relu.view(), grad_act.view());
    let b1 = bias_backward(grad_pre.view());
    let w1 = a_hat.tr_mul_dense(grad_pre.view())?;
    Ok(EncoderHead { w1, b1, w2, b2 })
}

/// Random draws used by one forward pass.
#[derive(Debug, Clone)]
pub struct ForwardNoise {
    pub mask: DropoutMask,
    pub sigma_mask: Option<DropoutMask>,
    /// `n × d` standard normals.
    pub m1: Option<Array2<f64>>,
    /// `r × d` standard normals.
    pub m2: Option<Array2<f64>>,
}

impl ForwardNoise {
    /// No dropout and no sampling (evaluation mode).
    pub fn none() -> Self {
        Self {
            mask: DropoutMask::identity(),
            sigma_mask: None,
            m1: None,
            m2: None,
        }
    }

    /// Draws dropout masks from `dropout_rng` and, for the stochastic variant
    /// in training mode, the Gaussian matrices from `sample_rng`.
    pub fn sample<R1: Rng, R2: Rng>(
        dims: Dims,
        config: &TrainConfig,
        training: bool,
        dropout_rng: &mut R1,
        sample_rng: &mut R2,
    ) -> Result<Self> {
        let shape = (dims.n, dims.d);
        let mask = DropoutMask::sample(shape, config.dropout, training, dropout_rng)?;
        if config.variant != Variant::Stoch {
            return Ok(Self {
                mask,
                sigma_mask: None,
                m1: None,
                m2: None,
            });
        }
        let sigma_mask = DropoutMask::sample(shape, config.dropout, training, dropout_rng)?;
        let (m1, m2) = if training {
            (
                Some(standard_normal((dims.n, dims.d), sample_rng)),
                Some(standard_normal((dims.r, dims.d), sample_rng)),
            )
        } else {
            (None, None)
        };
        Ok(Self {
            mask,
            sigma_mask: Some(sigma_mask),
            m1,
            m2,
        })
    }
}

pub fn standard_normal<R: Rng>(shape: (usize, usize), rng: &mut R) -> Array2<f64> {
    Array2::from_shape_simple_fn(shape, || StandardNormal.sample(rng))
}

/// Everything the forward pass produced.
#[derive(Debug, Clone)]
pub struct ForwardState {
    /// Embeddings `E` (deterministic) or the mean `U` (stochastic).
    pub e: Array2<f64>,
    /// Covariance factor `V` (`n × r`), stochastic only.
    pub v: Option<Array2<f64>>,
    /// Latent variables fed to the decoders.
    pub z: Array2<f64>,
    pub(crate) cache: HeadCache,
    pub(crate) sigma_cache: Option<HeadCache>,
    pub(crate) m2: Option<Array2<f64>>,
    pub(crate) rank: usize,
}

/// Full encoder pass. The stochastic variant builds
/// `Z = U + √β·M1 + V·M2`; without samples (evaluation) `Z = U`.
pub fn forward(
    params: &ModelParams,
    a_hat: &CsrMatrix,
    config: &TrainConfig,
    noise: ForwardNoise,
) -> Result<ForwardState> {
    let rank = config.rank();
    let (e, cache) = encode_head(&params.encoder, a_hat, noise.mask, config.unit_norm)?;
    let Some(sigma) = params.sigma.as_ref() else {
        return Ok(ForwardState {
            z: e.clone(),
            e,
            v: None,
            cache,
            sigma_cache: None,
            m2: None,
            rank,
        });
    };
    let sigma_mask = noise.sigma_mask.unwrap_or_else(DropoutMask::identity);
    let (v_full, sigma_cache) = encode_head(sigma, a_hat, sigma_mask, false)?;
    let v = v_full.slice(s![.., ..rank]).to_owned();
    let mut z = e.clone();
    if let (Some(m1), Some(m2)) = (&noise.m1, &noise.m2) {
        z.scaled_add(config.beta.sqrt(), m1);
        z += &v.dot(m2);
    }
    Ok(ForwardState {
        e,
        v: Some(v),
        z,
        cache,
        sigma_cache: Some(sigma_cache),
        m2: noise.m2,
        rank,
    })
}

/// Backpropagates through the encoder(s).
///
/// `grad_z` is the decoder-side gradient on `Z`, `grad_e` extra gradient on
/// `E`/`U` (regularizer), `grad_v` the regularizer gradient on `V`.
pub fn backward_encoder(
    params: &ModelParams,
    a_hat: &CsrMatrix,
    state: &ForwardState,
    grad_z: ArrayView2<f64>,
    grad_e: Option<ArrayView2<f64>>,
    grad_v: Option<ArrayView2<f64>>,
    grads: &mut ModelParams,
) -> Result<()> {
    let mut g_e = grad_z.to_owned();
    if let Some(extra) = grad_e {
        g_e += &extra;
    }
    grads.encoder = encode_head_backward(&params.encoder, a_hat, &state.cache, g_e.view())?;
    if let (Some(sigma), Some(cache)) = (params.sigma.as_ref(), state.sigma_cache.as_ref()) {
        let (n, d) = state.e.dim();
        let mut g_v = Array2::<f64>::zeros((n, state.rank));
        if let Some(m2) = &state.m2 {
            g_v += &grad_z.dot(&m2.t());
        }
        if let Some(extra) = grad_v {
            g_v += &extra;
        }
        let mut g_full = Array2::<f64>::zeros((n, d));
        g_full.slice_mut(s![.., ..state.rank]).assign(&g_v);
        grads.sigma = Some(encode_head_backward(sigma, a_hat, cache, g_full.view())?);
    }
    Ok(())
}

/// Deterministic encoder output `E` (or `U`).
pub fn encode<R: Rng>(
    params: &ModelParams,
    a_hat: &CsrMatrix,
    config: &TrainConfig,
    training: bool,
    rng: &mut R,
) -> Result<Array2<f64>> {
    let mask = DropoutMask::sample(
        (params.encoder.w1.nrows(), params.encoder.w1.ncols()),
        config.dropout,
        training,
        rng,
    )?;
    Ok(encode_head(&params.encoder, a_hat, mask, config.unit_norm)?.0)
}

/// `(U, V, Z)` for the stochastic variant, drawing fresh `M1`, `M2` from `rng`.
pub fn encode_stochastic<R: Rng>(
    params: &ModelParams,
    a_hat: &CsrMatrix,
    config: &TrainConfig,
    training: bool,
    rng: &mut R,
) -> Result<(Array2<f64>, Array2<f64>, Array2<f64>)> {
    if params.sigma.is_none() {
        return Err(Error::InvalidInput("parameters have no covariance head".into()));
    }
    let cfg = TrainConfig {
        variant: Variant::Stoch,
        ..config.clone()
    };
    let dims = params.dims(cfg.rank());
    if dims.r > dims.n {
        return Err(Error::InvalidInput(format!("rank {} exceeds n={}", dims.r, dims.n)));
    }
    let mut dropout_rng = stream(rng.random(), Stream::Dropout, 0);
    let noise = ForwardNoise::sample(dims, &cfg, training, &mut dropout_rng, rng)?;
    let state = forward(params, a_hat, &cfg, noise)?;
    Ok((state.e, state.v.expect("stochastic state"), state.z))
}

/// `Z Wxᵀ + bx` for every row of `z`.
pub fn decode_features(params: &ModelParams, z: ArrayView2<f64>) -> Result<Array2<f64>> {
    add_bias(linalg::matmul_bt(z, params.wx.view())?.view(), params.bx.view())
}

/// `Z Wyᵀ + by` for every row of `z`.
pub fn decode_labels(params: &ModelParams, z: ArrayView2<f64>) -> Result<Array2<f64>> {
    add_bias(linalg::matmul_bt(z, params.wy.view())?.view(), params.by.view())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{normalized_adjacency, Graph};
    use approx::assert_abs_diff_eq;
    use ndarray::array;

    fn dims(n: usize) -> Dims {
        Dims {
            n,
            d: 4,
            m: 5,
            c: 3,
            r: 4,
        }
    }

    #[test]
    fn init_is_deterministic() {
        let a = init_params(dims(7), Variant::Stoch, 11).unwrap();
        let b = init_params(dims(7), Variant::Stoch, 11).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, init_params(dims(7), Variant::Stoch, 12).unwrap());
        assert!(a.bx.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn init_shapes() {
        let p = init_params(
            Dims {
                n: 2708,
                d: 256,
                m: 1433,
                c: 7,
                r: 256,
            },
            Variant::Det,
            0,
        )
        .unwrap();
        assert_eq!(p.encoder.w1.dim(), (2708, 256));
        assert_eq!(p.wx.dim(), (1433, 256));
        assert_eq!(p.wy.dim(), (7, 256));
        assert!(p.sigma.is_none());
        let limit = (6.0f64 / (2708.0 + 256.0)).sqrt();
        assert!(p.encoder.w1.iter().all(|v| v.abs() <= limit));
    }

    #[test]
    fn init_mean_within_three_standard_errors() {
        let p = init_params(
            Dims {
                n: 500,
                d: 64,
                m: 3,
                c: 2,
                r: 64,
            },
            Variant::Det,
            5,
        )
        .unwrap();
        let w = &p.encoder.w1;
        let limit = (6.0f64 / (500.0 + 64.0)).sqrt();
        let se = limit / 3f64.sqrt() / (w.len() as f64).sqrt();
        assert!(w.mean().unwrap().abs() < 3.0 * se);
    }

    #[test]
    fn isolated_node_normalized() {
        let g = Graph::new(1, &[]).unwrap();
        let a = normalized_adjacency(&g);
        let mut p = init_params(
            Dims {
                n: 1,
                d: 2,
                m: 1,
                c: 0,
                r: 2,
            },
            Variant::Det,
            0,
        )
        .unwrap();
        p.encoder.w1 = array![[1.0, 0.0]];
        p.encoder.w2 = array![[3.0, 4.0], [0.0, 0.0]];
        let cfg = TrainConfig {
            dim: 2,
            dropout: 0.0,
            ..Default::default()
        };
        let mut rng = stream(0, Stream::Dropout, 0);
        let e = encode(&p, &a, &cfg, false, &mut rng).unwrap();
        assert_abs_diff_eq!(e[[0, 0]], 0.6, epsilon = 1e-15);
        assert_abs_diff_eq!(e[[0, 1]], 0.8, epsilon = 1e-15);
    }

    #[test]
    fn decoders_are_affine() {
        let mut p = init_params(dims(3), Variant::Det, 1).unwrap();
        p.bx = array![1.0, 2.0, 3.0, 4.0, 5.0];
        let z0 = Array2::<f64>::zeros((3, 4));
        let x = decode_features(&p, z0.view()).unwrap();
        for row in x.rows() {
            assert_eq!(row, p.bx);
        }
        p.bx.fill(0.0);
        let mut z = Array2::<f64>::zeros((1, 4));
        z[[0, 0]] = 1.0;
        let x = decode_features(&p, z.view()).unwrap();
        assert_eq!(x.row(0), p.wx.column(0));
        assert!(decode_features(&p, Array2::<f64>::zeros((1, 3)).view()).is_err());
    }

    #[test]
    fn stochastic_degenerate_sampling() {
        let g = Graph::new(5, &[(0, 1), (2, 3)]).unwrap();
        let a = normalized_adjacency(&g);
        let mut p = init_params(dims(5), Variant::Stoch, 2).unwrap();
        let h = p.sigma.as_mut().unwrap();
        h.w1.fill(0.0);
        h.b2.fill(0.0);
        let cfg = TrainConfig {
            dim: 4,
            dropout: 0.0,
            beta: 1e-300,
            variant: Variant::Stoch,
            ..Default::default()
        };
        let mut rng = stream(0, Stream::Sampling, 0);
        let (u, v, z) = encode_stochastic(&p, &a, &cfg, true, &mut rng).unwrap();
        assert!(v.iter().all(|&x| x == 0.0));
        for (a, b) in u.iter().zip(z.iter()) {
            assert_abs_diff_eq!(a, b, epsilon = 1e-140);
        }
    }
}
