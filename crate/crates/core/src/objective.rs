//! Loss terms, the two regularizers, and assembly of the training objective.
//!
//! Every loss here is a quantity to minimize.

use ndarray::{Array2, ArrayView2};
use serde::{Deserialize, Serialize};

use crate::config::{Reduction, TrainConfig, Variant};
use crate::data::FeatureKind;
use crate::error::{Error, Result};
use crate::graph::GmrfPrior;
use crate::linalg::{
    bias_backward, gather_rows, matmul_bt_backward, log_softmax_rows, logdet_gram, scatter_add_rows,
    sigmoid_scalar, softplus, trace_quadratic, trace_quadratic_grad, CsrMatrix,
};
use crate::model::{backward_encoder, decode_features, decode_labels, forward, ForwardNoise, ForwardState, ModelParams};

/// Fraction of zero entries among the given rows of a binary matrix.
///
/// Used as the weight on positive entries of the binary likelihood, so rare
/// ones are not drowned out by the many zeros.
pub fn alpha_ber(x: ArrayView2<f64>, rows: &[usize]) -> Result<f64> {
    if rows.is_empty() || x.ncols() == 0 {
        return Err(Error::InvalidInput("no observed entries to derive alpha_ber".into()));
    }
    let zeros = rows
        .iter()
        .map(|&i| x.row(i).iter().filter(|&&v| v == 0.0).count())
        .sum::<usize>();
    let alpha = zeros as f64 / (rows.len() * x.ncols()) as f64;
    if alpha <= 0.0 || alpha >= 1.0 {
        return Err(Error::InvalidInput(format!(
            "observed binary features are constant (alpha_ber = {alpha})"
        )));
    }
    Ok(alpha)
}

/// Likelihood loss of predicted logits `xhat` against `x` (rows aligned).
///
/// * continuous: `Σ (x − x̂)²`
/// * binary: `−Σ [α x log σ(x̂) + (1−α)(1−x) log(1−σ(x̂))]`
/// * categorical: `−Σ x · log_softmax(x̂)`
///
/// Returns the loss and its gradient with respect to `xhat`.
pub fn loss_features(
    xhat: ArrayView2<f64>,
    x: ArrayView2<f64>,
    kind: FeatureKind,
    alpha_ber: f64,
) -> Result<(f64, Array2<f64>)> {
    if xhat.dim() != x.dim() {
        return Err(Error::shape("loss_features", format!("{:?}", x.dim()), format!("{:?}", xhat.dim())));
    }
    match kind {
        FeatureKind::Continuous => {
            let diff = &xhat - &x;
            Ok((diff.iter().map(|d| d * d).sum(), diff * 2.0))
        }
        FeatureKind::Binary => {
            if !(alpha_ber > 0.0 && alpha_ber < 1.0) {
                return Err(Error::InvalidInput(format!("alpha_ber {alpha_ber} not in (0,1)")));
            }
            let mut loss = 0.0;
            let mut grad = Array2::zeros(x.dim());
            for ((g, &s), &t) in grad.iter_mut().zip(xhat.iter()).zip(x.iter()) {
                let pos = alpha_ber * t;
                let neg = (1.0 - alpha_ber) * (1.0 - t);
                loss += pos * softplus(-s) + neg * softplus(s);
                let p = sigmoid_scalar(s);
                *g = pos * (p - 1.0) + neg * p;
            }
            Ok((loss, grad))
        }
        FeatureKind::Categorical => {
            let logp = log_softmax_rows(xhat);
            let loss = -(&logp * &x).sum();
            let mut grad = logp.mapv(f64::exp);
            for (mut g, t) in grad.rows_mut().into_iter().zip(x.rows()) {
                let mass = t.sum();
                g *= mass;
                g -= &t;
            }
            Ok((loss, grad))
        }
    }
}

/// Cross-entropy of label logits `yhat` against class ids (rows aligned).
/// An empty label set costs nothing.
pub fn loss_labels(yhat: ArrayView2<f64>, labels: &[usize]) -> Result<(f64, Array2<f64>)> {
    if yhat.nrows() != labels.len() {
        return Err(Error::shape("loss_labels", format!("{} rows", labels.len()), yhat.nrows()));
    }
    if labels.is_empty() {
        return Ok((0.0, Array2::zeros(yhat.dim())));
    }
    let c = yhat.ncols();
    if let Some(&bad) = labels.iter().find(|&&l| l >= c) {
        return Err(Error::InvalidInput(format!("label {bad} out of range for {c} classes")));
    }
    let logp = log_softmax_rows(yhat);
    let mut grad = logp.mapv(f64::exp);
    let mut loss = 0.0;
    for (i, &l) in labels.iter().enumerate() {
        loss -= logp[[i, l]];
        grad[[i, l]] -= 1.0;
    }
    Ok((loss, grad))
}

/// Deterministic GMRF regularizer `tr(EᵀKE) − α·log|I + β⁻¹EᵀE|` and its gradient.
pub fn loss_gmrf(
    e: ArrayView2<f64>,
    prior: &GmrfPrior,
    alpha_logdet: f64,
    beta: f64,
) -> Result<(f64, Array2<f64>)> {
    let k = prior.information();
    let ld = logdet_gram(e, beta)?;
    let value = trace_quadratic(k, e)? - alpha_logdet * ld.value;
    let mut grad = trace_quadratic_grad(k, e)?;
    grad.scaled_add(-alpha_logdet, &ld.grad(e));
    Ok((value, grad))
}

/// KL divergence from `N(U, Σ)` (shared across the `d` columns) to the
/// GMRF prior, with `Σ = βI + VVᵀ`.
///
/// Computes `0.5·(tr(UᵀKU) + d·(β·tr K + tr(VᵀKV) − log|I + β⁻¹VᵀV| − n·log β))`.
/// The dropped constant is `−0.5·d·n − 0.5·d·log|K|`, with `log|K|` taken on
/// whatever jittered prior makes it finite. Returns `(value, ∂U, ∂V)`.
pub fn kl_structured(
    u: ArrayView2<f64>,
    v: ArrayView2<f64>,
    prior: &GmrfPrior,
    beta: f64,
) -> Result<(f64, Array2<f64>, Array2<f64>)> {
    if u.nrows() != v.nrows() {
        return Err(Error::shape("kl_structured", format!("{} rows", u.nrows()), v.nrows()));
    }
    let k = prior.information();
    let n = u.nrows() as f64;
    let d = u.ncols() as f64;
    let ld = logdet_gram(v, beta)?;
    let trace_sigma = beta * k.trace() + trace_quadratic(k, v)?;
    let value = 0.5 * (trace_quadratic(k, u)? + d * (trace_sigma - ld.value - n * beta.ln()));
    let grad_u = trace_quadratic_grad(k, u)? * 0.5;
    let mut grad_v = trace_quadratic_grad(k, v)?;
    grad_v -= &ld.grad(v);
    grad_v *= 0.5 * d;
    Ok((value, grad_u, grad_v))
}

/// Scalar parts of one objective evaluation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossBreakdown {
    pub l_x: f64,
    pub l_y: f64,
    /// GMRF regularizer (det), KL (stoch) or 0 (noreg), before any λ weighting.
    pub l_reg: f64,
    pub total: f64,
}

/// Fixed inputs of the objective for one run.
#[derive(Debug, Clone, Copy)]
pub struct ObjectiveInput<'a> {
    pub a_hat: &'a CsrMatrix,
    pub prior: &'a GmrfPrior,
    pub features: ArrayView2<'a, f64>,
    pub kind: FeatureKind,
    /// Nodes whose features enter the loss.
    pub feature_nodes: &'a [usize],
    /// Nodes whose labels enter the loss, with their labels.
    pub label_nodes: &'a [usize],
    pub labels: &'a [usize],
    pub alpha_ber: f64,
}

/// Output of [`evaluate_objective`].
#[derive(Debug, Clone)]
pub struct Evaluation {
    pub loss: LossBreakdown,
    pub grads: ModelParams,
    pub state: ForwardState,
}

/// Runs the forward pass, every loss term and the full backward pass.
///
/// * det: `l_x + l_y + λ·l_gmrf`
/// * stoch: `l_x + l_y + KL` (no λ)
/// * noreg: `l_x + l_y`
pub fn evaluate_objective(
    params: &ModelParams,
    input: &ObjectiveInput<'_>,
    config: &TrainConfig,
    noise: ForwardNoise,
) -> Result<Evaluation> {
    if input.feature_nodes.is_empty() {
        return Err(Error::InvalidInput("no observed feature rows in the loss".into()));
    }
    if input.label_nodes.len() != input.labels.len() {
        return Err(Error::shape(
            "objective labels",
            format!("{}", input.label_nodes.len()),
            input.labels.len(),
        ));
    }
    let state = forward(params, input.a_hat, config, noise)?;
    let n = state.z.nrows();
    let (sx, sy, sr) = match config.reduction {
        Reduction::Sum => (1.0, 1.0, 1.0),
        Reduction::Mean => (
            1.0 / input.feature_nodes.len() as f64,
            1.0 / input.label_nodes.len().max(1) as f64,
            1.0 / n as f64,
        ),
    };
    let mut grads = params.zeros_like();
    let mut grad_z = Array2::<f64>::zeros(state.z.dim());

    let z_x = gather_rows(state.z.view(), input.feature_nodes);
    let xhat = decode_features(params, z_x.view())?;
    let x_obs = gather_rows(input.features, input.feature_nodes);
    let (l_x, mut g_xhat) = loss_features(xhat.view(), x_obs.view(), input.kind, input.alpha_ber)?;
    g_xhat *= sx;
    let (g_zx, g_wx) = matmul_bt_backward(z_x.view(), params.wx.view(), g_xhat.view());
    grads.wx = g_wx;
    grads.bx = bias_backward(g_xhat.view());
    scatter_add_rows(&mut grad_z, input.feature_nodes, g_zx.view());

    let mut l_y = 0.0;
    if !input.label_nodes.is_empty() {
        let z_y = gather_rows(state.z.view(), input.label_nodes);
        let yhat = decode_labels(params, z_y.view())?;
        let (ly, mut g_yhat) = loss_labels(yhat.view(), input.labels)?;
        l_y = ly;
        g_yhat *= sy;
        let (g_zy, g_wy) = matmul_bt_backward(z_y.view(), params.wy.view(), g_yhat.view());
        grads.wy = g_wy;
        grads.by = bias_backward(g_yhat.view());
        scatter_add_rows(&mut grad_z, input.label_nodes, g_zy.view());
    }

    let (l_reg, total_reg, grad_e, grad_v) = match config.variant {
        Variant::NoReg => (0.0, 0.0, None, None),
        Variant::Det => {
            let (value, g) = loss_gmrf(state.e.view(), input.prior, config.alpha_logdet, config.beta)?;
            let w = config.lambda * sr;
            (value, config.lambda * value, Some(g * w), None)
        }
        Variant::Stoch => {
            let v = state
                .v
                .as_ref()
                .ok_or_else(|| Error::InvalidInput("stochastic variant needs a covariance head".into()))?;
            let (value, gu, gv) = kl_structured(state.e.view(), v.view(), input.prior, config.beta)?;
            (value, value, Some(gu * sr), Some(gv * sr))
        }
    };
    let loss = LossBreakdown {
        l_x: sx * l_x,
        l_y: sy * l_y,
        l_reg: sr * l_reg,
        total: sx * l_x + sy * l_y + sr * total_reg,
    };
    if !loss.total.is_finite() {
        return Err(Error::NonFinite("objective".into()));
    }
    backward_encoder(
        params,
        input.a_hat,
        &state,
        grad_z.view(),
        grad_e.as_ref().map(|g| g.view()),
        grad_v.as_ref().map(|g| g.view()),
        &mut grads,
    )?;
    Ok(Evaluation { loss, grads, state })
}
