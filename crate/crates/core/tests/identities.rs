mod common;

use common::{dense_a_hat, dense_information, gaussian, max_abs_diff, random_graph, rng, to_na};
use nalgebra::DMatrix;
use ndarray::Array2;
use proptest::prelude::*;
use rand::Rng;
use svga_core::linalg::{trace_quadratic, DropoutMask};
use svga_core::model::{encode_head, init_params, Dims};
use svga_core::{gmrf_information_matrix, normalized_adjacency, Graph, Variant};

#[test]
fn potential_product_is_gaussian() {
    let err = common::oracles::potential_product_max_error(50, 1);
    assert!(err < 1e-9, "max error {err:e}");
}

#[test]
fn covariance_trace_identity() {
    let err = common::oracles::trace_identity_max_error(50, 2);
    assert!(err < 1e-10, "max error {err:e}");
}

#[test]
fn determinant_lemma_matches_dense() {
    let err = common::oracles::determinant_lemma_max_error(30, 3);
    assert!(err < 1e-8, "max error {err:e}");
}

#[test]
fn structured_kl_matches_dense_gaussian_kl() {
    let err = common::oracles::kl_dense_max_error(30, 4);
    assert!(err < 1e-6, "max error {err:e}");
}

#[test]
fn sampled_latents_have_structured_moments() {
    let (mean_err, cov_err) = common::oracles::monte_carlo_moments(100_000, 5);
    assert!(mean_err < 0.02, "mean error {mean_err}");
    assert!(cov_err < 0.05, "covariance error {cov_err}");
}

#[test]
fn sparse_matrices_match_dense_construction() {
    let mut r = rng(6);
    for _ in 0..30 {
        let n = r.random_range(1..=20);
        let g = random_graph(&mut r, n, 0.3);
        let a_hat = to_na(normalized_adjacency(&g).to_dense().view());
        let k = to_na(gmrf_information_matrix(&g).information().to_dense().view());
        assert!(max_abs_diff(&a_hat, &dense_a_hat(&g)) < 1e-15);
        assert!(max_abs_diff(&k, &dense_information(&g)) < 1e-15);
        assert!(max_abs_diff(&a_hat, &a_hat.transpose()) == 0.0);
        assert!(max_abs_diff(&k, &k.transpose()) == 0.0);
    }
}

#[test]
fn information_matrix_is_psd() {
    let mut r = rng(7);
    for _ in 0..30 {
        let n = r.random_range(1..=24);
        let p = r.random_range(0.0..0.5);
        let g = random_graph(&mut r, n, p);
        let eig = dense_information(&g).symmetric_eigenvalues();
        assert!(eig.iter().all(|&l| l >= -1e-9), "{eig}");
        let eig = dense_a_hat(&g).symmetric_eigenvalues();
        assert!(eig.iter().all(|&l| l > -1.0 && l <= 1.0 + 1e-12), "{eig}");
    }
}

#[test]
fn trace_quadratic_is_edge_difference_sum() {
    let mut r = rng(8);
    for _ in 0..30 {
        let n = r.random_range(1..=16);
        let g = random_graph(&mut r, n, 0.25);
        let e = gaussian(&mut r, n, 3);
        let deg = g.degrees();
        let mut expected = 0.0;
        for &(u, v) in g.edges() {
            let (su, sv) = ((deg[u] as f64).sqrt(), (deg[v] as f64).sqrt());
            expected += (0..3).map(|c| (e[[u, c]] / su - e[[v, c]] / sv).powi(2)).sum::<f64>();
        }
        for (i, &dg) in deg.iter().enumerate() {
            if dg == 0 {
                expected += e.row(i).dot(&e.row(i));
            }
        }
        let ours = trace_quadratic(gmrf_information_matrix(&g).information(), e.view()).unwrap();
        assert!((ours - expected).abs() < 1e-10 * expected.max(1.0));
    }
}

fn dense_encoder(g: &Graph, w1: &DMatrix<f64>, b1: &[f64], w2: &DMatrix<f64>, b2: &[f64]) -> DMatrix<f64> {
    let a = dense_a_hat(g);
    let n = g.num_nodes();
    let x = DMatrix::<f64>::identity(n, n);
    let mut h = &a * x * w1;
    for mut row in h.row_iter_mut() {
        for (c, v) in row.iter_mut().enumerate() {
            *v = (*v + b1[c]).max(0.0);
        }
    }
    let mut out = &a * h * w2;
    for mut row in out.row_iter_mut() {
        for (c, v) in row.iter_mut().enumerate() {
            *v += b2[c];
        }
        let norm = row.norm().max(1e-12);
        row /= norm;
    }
    out
}

#[test]
fn encoder_matches_dense_identity_input_gcn() {
    let mut r = rng(9);
    let mut graphs = vec![Graph::new(3, &[(0, 1), (1, 2)]).unwrap()];
    for _ in 0..20 {
        let n = r.random_range(2..=32);
        graphs.push(random_graph(&mut r, n, 0.2));
    }
    for (i, g) in graphs.iter().enumerate() {
        let n = g.num_nodes();
        let d = 4;
        let mut params = init_params(Dims { n, d, m: 2, c: 0, r: d }, Variant::Det, i as u64).unwrap();
        params.encoder.b1 = gaussian(&mut r, 1, d).row(0).to_owned();
        params.encoder.b2 = gaussian(&mut r, 1, d).row(0).to_owned();
        let enc = &params.encoder;
        let expected = dense_encoder(
            g,
            &to_na(enc.w1.view()),
            enc.b1.as_slice().unwrap(),
            &to_na(enc.w2.view()),
            enc.b2.as_slice().unwrap(),
        );
        let (out, _) = encode_head(enc, &normalized_adjacency(g), DropoutMask::identity(), true).unwrap();
        assert!(max_abs_diff(&to_na(out.view()), &expected) < 1e-12);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn regularizer_trace_is_nonnegative(seed in any::<u64>(), n in 1usize..14, p in 0.0f64..0.7) {
        let mut r = rng(seed);
        let g = random_graph(&mut r, n, p);
        let e: Array2<f64> = gaussian(&mut r, n, 3);
        let t = trace_quadratic(gmrf_information_matrix(&g).information(), e.view()).unwrap();
        prop_assert!(t >= -1e-12);
    }

    #[test]
    fn constant_signal_on_regular_component_has_zero_trace(n in 3usize..20, c in -3.0f64..3.0) {
        // A cycle is regular, so the D^{1/2}-scaled constant vector is in K's kernel.
        let edges: Vec<_> = (0..n).map(|i| (i, (i + 1) % n)).collect();
        let g = Graph::new(n, &edges).unwrap();
        let e = Array2::from_elem((n, 1), c);
        let t = trace_quadratic(gmrf_information_matrix(&g).information(), e.view()).unwrap();
        prop_assert!(t.abs() < 1e-10);
    }
}
