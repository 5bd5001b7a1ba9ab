//! Finite-difference check of the full training objective.

use ndarray::Array2;
use svga_core::config::{TrainConfig, Variant};
use svga_core::data::FeatureKind;
use svga_core::graph::{gmrf_information_matrix, normalized_adjacency};
use svga_core::linalg::CsrMatrix;
use svga_core::model::{init_params, Dims, ForwardNoise, ModelParams};
use svga_core::objective::{evaluate_objective, ObjectiveInput};
use svga_core::rng::{stream, Stream};

use super::{directional_error, gaussian, rng, FD_POINTS};

/// Six-node graph with features of the requested kind, labels on half of the nodes.
struct Instance {
    a_hat: CsrMatrix,
    prior: svga_core::GmrfPrior,
    x: Array2<f64>,
    feature_nodes: Vec<usize>,
    label_nodes: Vec<usize>,
    labels: Vec<usize>,
}

fn instance(kind: FeatureKind) -> Instance {
    let g = svga_core::Graph::new(6, &[(0, 1), (1, 2), (2, 3), (3, 4), (4, 5), (0, 5), (1, 4)]).unwrap();
    let mut r = rng(40);
    let x = match kind {
        FeatureKind::Continuous => gaussian(&mut r, 6, 5),
        FeatureKind::Binary => gaussian(&mut r, 6, 5).mapv(|v| if v > 0.3 { 1.0 } else { 0.0 }),
        FeatureKind::Categorical => Array2::from_shape_fn((6, 5), |(i, j)| f64::from(u8::from((i * 2) % 5 == j))),
    };
    Instance {
        a_hat: normalized_adjacency(&g),
        prior: gmrf_information_matrix(&g),
        x,
        feature_nodes: vec![0, 2, 3, 5],
        label_nodes: vec![1, 2, 4],
        labels: vec![0, 2, 1],
    }
}

fn objective_total(
    p: &ModelParams,
    inst: &Instance,
    kind: FeatureKind,
    cfg: &TrainConfig,
    noise: &ForwardNoise,
) -> (f64, ModelParams) {
    let input = ObjectiveInput {
        a_hat: &inst.a_hat,
        prior: &inst.prior,
        features: inst.x.view(),
        kind,
        feature_nodes: &inst.feature_nodes,
        label_nodes: &inst.label_nodes,
        labels: &inst.labels,
        alpha_ber: 0.6,
    };
    let ev = evaluate_objective(p, &input, cfg, noise.clone()).unwrap();
    (ev.loss.total, ev.grads)
}

/// Worst relative error of the full objective's gradient over every tensor
/// and `FD_POINTS` random parameter points, with the tensor it occurred in.
pub fn full_objective_error(variant: Variant, kind: FeatureKind, unit_norm: bool, dropout: f64) -> (f64, &'static str) {
    let inst = instance(kind);
    let cfg = TrainConfig {
        dim: 4,
        rank: Some(3),
        dropout,
        lambda: 0.7,
        beta: 0.2,
        variant,
        unit_norm,
        ..Default::default()
    };
    let dims = Dims {
        n: 6,
        d: 4,
        m: 5,
        c: 3,
        r: 3,
    };
    let mut r = rng(41);
    let mut worst = (0.0f64, "");
    for point in 0..FD_POINTS {
        let mut params = init_params(dims, variant, point as u64).unwrap();
        // Non-zero biases so their gradients are exercised away from init.
        for t in params.tensors_mut() {
            for v in t.iter_mut() {
                *v += 0.1 * gaussian(&mut r, 1, 1)[[0, 0]];
            }
        }
        let noise = ForwardNoise::sample(
            dims,
            &cfg,
            true,
            &mut stream(point as u64, Stream::Dropout, 0),
            &mut stream(point as u64, Stream::Sampling, 0),
        )
        .unwrap();
        let (_, grads) = objective_total(&params, &inst, kind, &cfg, &noise);
        let names: Vec<&str> = params.tensors().iter().map(|t| t.0).collect();
        for (ti, name) in names.iter().enumerate() {
            let shape = {
                let t = &params.tensors()[ti];
                (t.1, t.2)
            };
            let flat = |p: &ModelParams| {
                Array2::from_shape_vec(shape, p.tensors()[ti].3.to_vec()).unwrap()
            };
            let x0 = flat(&params);
            let g = flat(&grads);
            let f = |x: &Array2<f64>| {
                let mut p = params.clone();
                p.tensors_mut()[ti].copy_from_slice(x.as_slice().unwrap());
                objective_total(&p, &inst, kind, &cfg, &noise).0
            };
            let err = directional_error(&mut r, &x0, &g, f);
            if err >= worst.0 {
                worst = (err, *name);
            }
        }
    }
    worst
}
