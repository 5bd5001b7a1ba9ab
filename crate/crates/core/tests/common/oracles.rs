//! Independent dense re-computations shared by the property tests and the
//! acceptance suite. Each returns the worst deviation seen.

use nalgebra::{DMatrix, DVector};
use ndarray::{Array2, ArrayView2};
use rand::Rng;
use svga_core::graph::gmrf_log_potential;
use svga_core::linalg::{logdet_gram, trace_quadratic};
use svga_core::metrics::{corr, ndcg_at_k, recall_at_k, rmse};
use svga_core::model::{encode_stochastic, init_params, Dims};
use svga_core::objective::kl_structured;
use svga_core::{gmrf_information_matrix, normalized_adjacency, TrainConfig, Variant};

use super::{dense_information, gaussian, random_graph, rng, to_na};

/// Log of the potential product against `−½ zᵀ(K + jI)z`.
pub fn potential_product_max_error(cases: usize, seed: u64) -> f64 {
    let mut r = rng(seed);
    let mut worst = 0.0f64;
    for _ in 0..cases {
        let n = r.random_range(1..=16);
        let p = r.random_range(0.05..0.6);
        let g = random_graph(&mut r, n, p);
        let jitter = r.random_range(0.01..1.0);
        let z = gaussian(&mut r, n, 1).column(0).to_owned();
        let ours = gmrf_log_potential(&gmrf_information_matrix(&g), jitter, z.view()).unwrap();
        let k = dense_information(&g) + DMatrix::identity(n, n) * jitter;
        let zv = DVector::from_iterator(n, z.iter().copied());
        let dense = -0.5 * (zv.transpose() * &k * &zv)[(0, 0)];
        worst = worst.max((ours - dense).abs());
    }
    worst
}

/// `tr(KΣ) − β·tr K` against `tr(EᵀKE)` with `Σ = βI + EEᵀ`.
pub fn trace_identity_max_error(cases: usize, seed: u64) -> f64 {
    let mut r = rng(seed);
    let mut worst = 0.0f64;
    for _ in 0..cases {
        let n = r.random_range(2..=16);
        let d = r.random_range(1..=6);
        let beta = r.random_range(0.01..2.0);
        let g = random_graph(&mut r, n, 0.3);
        let e = gaussian(&mut r, n, d);
        let k = dense_information(&g);
        let en = to_na(e.view());
        let sigma = DMatrix::identity(n, n) * beta + &en * en.transpose();
        let lhs = (&k * sigma).trace() - beta * k.trace();
        let rhs = trace_quadratic(gmrf_information_matrix(&g).information(), e.view()).unwrap();
        worst = worst.max((lhs - rhs).abs());
    }
    worst
}

/// Dense `log|βIₙ + VVᵀ|` against the `r×r` form plus `n·log β`.
pub fn determinant_lemma_max_error(cases: usize, seed: u64) -> f64 {
    let mut r = rng(seed);
    let mut worst = 0.0f64;
    for _ in 0..cases {
        let n = r.random_range(1..=64);
        let rank = r.random_range(1..=n.min(16));
        let beta = r.random_range(0.05..3.0);
        let v = gaussian(&mut r, n, rank);
        let vn = to_na(v.view());
        let dense = super::dense_logdet(&(DMatrix::identity(n, n) * beta + &vn * vn.transpose()));
        let ours = logdet_gram(v.view(), beta).unwrap().value + n as f64 * beta.ln();
        worst = worst.max((dense - ours).abs());
    }
    worst
}

/// Sample mean and covariance of the stochastic encoder's `Z` against
/// `U` and `βI + VVᵀ`. Returns `(mean error, covariance error)`.
pub fn monte_carlo_moments(samples: usize, seed: u64) -> (f64, f64) {
    let edges = [(0, 1), (1, 2), (2, 3), (3, 4), (0, 2)];
    let g = svga_core::Graph::new(5, &edges).unwrap();
    let a_hat = normalized_adjacency(&g);
    let (n, d, rank) = (5, 3, 2);
    let config = TrainConfig {
        dim: d,
        rank: Some(rank),
        dropout: 0.0,
        beta: 0.5,
        variant: Variant::Stoch,
        ..TrainConfig::default()
    };
    let params = init_params(Dims { n, d, m: 1, c: 0, r: rank }, Variant::Stoch, seed).unwrap();
    let mut r = rng(seed);
    let (u, v, _) = encode_stochastic(&params, &a_hat, &config, false, &mut r).unwrap();
    let mut sum = Array2::<f64>::zeros((n, d));
    let mut outer = DMatrix::<f64>::zeros(n, n);
    for _ in 0..samples {
        let (_, _, z) = encode_stochastic(&params, &a_hat, &config, true, &mut r).unwrap();
        sum += &z;
        let c = to_na((&z - &u).view());
        outer += &c * c.transpose();
    }
    let mean = sum / samples as f64;
    let mean_err = (&mean - &u).iter().fold(0.0f64, |m, x| m.max(x.abs()));
    let cov = outer / (samples * d) as f64;
    let vn = to_na(v.view());
    let expected = DMatrix::identity(n, n) * config.beta + &vn * vn.transpose();
    (mean_err, super::max_abs_diff(&cov, &expected))
}

/// Dense Gaussian KL to `N(0, (K + jI)⁻¹)` minus the structured KL, against
/// the closed-form constant `½(j‖U‖² + d·j·tr Σ − dn − d·log|K + jI|)`.
pub fn kl_dense_max_error(cases: usize, seed: u64) -> f64 {
    let mut r = rng(seed);
    let mut worst = 0.0f64;
    for _ in 0..cases {
        let n = r.random_range(2..=12);
        let d = r.random_range(1..=4);
        let rank = r.random_range(1..=n.min(4));
        let beta = r.random_range(0.1..2.0);
        let jitter = r.random_range(0.01..0.5);
        let g = random_graph(&mut r, n, 0.4);
        let u = gaussian(&mut r, n, d);
        let v = gaussian(&mut r, n, rank);
        let p = dense_information(&g) + DMatrix::identity(n, n) * jitter;
        let (un, vn) = (to_na(u.view()), to_na(v.view()));
        let sigma = DMatrix::identity(n, n) * beta + &vn * vn.transpose();
        let (nf, df) = (n as f64, d as f64);
        let logdet_p = super::dense_logdet(&p);
        let dense = 0.5
            * (df * (&p * &sigma).trace() + (un.transpose() * &p * &un).trace()
                - df * nf
                - df * logdet_p
                - df * super::dense_logdet(&sigma));
        let (ours, _, _) = kl_structured(u.view(), v.view(), &gmrf_information_matrix(&g), beta).unwrap();
        let expected = 0.5
            * (jitter * un.norm_squared() + df * jitter * sigma.trace() - df * nf - df * logdet_p);
        worst = worst.max((dense - ours - expected).abs());
    }
    worst
}

fn ranked(scores: &[f64]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..scores.len()).collect();
    // Full insertion sort on (score desc, index asc).
    for i in 1..idx.len() {
        let mut j = i;
        while j > 0 {
            let (a, b) = (idx[j - 1], idx[j]);
            let swap = scores[b] > scores[a] || (scores[b] == scores[a] && b < a);
            if !swap {
                break;
            }
            idx.swap(j - 1, j);
            j -= 1;
        }
    }
    idx
}

fn brute_recall(xhat: ArrayView2<f64>, x: ArrayView2<f64>, k: usize) -> f64 {
    let mut total = 0.0;
    let mut rows = 0;
    for i in 0..x.nrows() {
        let truth: Vec<f64> = x.row(i).to_vec();
        let positives = truth.iter().filter(|&&v| v == 1.0).count();
        if positives == 0 {
            continue;
        }
        let order = ranked(&xhat.row(i).to_vec());
        let hits = order.iter().take(k).filter(|&&j| truth[j] == 1.0).count();
        total += hits as f64 / positives as f64;
        rows += 1;
    }
    total / rows as f64
}

fn brute_ndcg(xhat: ArrayView2<f64>, x: ArrayView2<f64>, k: usize) -> f64 {
    let mut total = 0.0;
    let mut rows = 0;
    for i in 0..x.nrows() {
        let truth: Vec<f64> = x.row(i).to_vec();
        let positives = truth.iter().filter(|&&v| v == 1.0).count();
        if positives == 0 {
            continue;
        }
        let order = ranked(&xhat.row(i).to_vec());
        let mut dcg = 0.0;
        for (pos, &j) in order.iter().enumerate().take(k) {
            if truth[j] == 1.0 {
                dcg += 1.0 / ((pos + 2) as f64).log2();
            }
        }
        let mut ideal = 0.0;
        for pos in 0..k.min(positives) {
            ideal += 1.0 / ((pos + 2) as f64).log2();
        }
        total += dcg / ideal;
        rows += 1;
    }
    total / rows as f64
}

fn brute_rmse(xhat: ArrayView2<f64>, x: ArrayView2<f64>) -> f64 {
    let mut total = 0.0;
    for i in 0..x.nrows() {
        let mut sse = 0.0;
        for j in 0..x.ncols() {
            sse += (xhat[[i, j]] - x[[i, j]]).powi(2);
        }
        total += (sse / x.ncols() as f64).sqrt();
    }
    total / x.nrows() as f64
}

fn brute_corr(xhat: ArrayView2<f64>, x: ArrayView2<f64>) -> f64 {
    let mut total = 0.0;
    let mut cols = 0;
    for j in 0..x.ncols() {
        let col: Vec<f64> = x.column(j).to_vec();
        let mean = col.iter().sum::<f64>() / col.len() as f64;
        let sst: f64 = col.iter().map(|v| (v - mean).powi(2)).sum();
        if sst < 1e-12 {
            continue;
        }
        let sse: f64 = (0..x.nrows()).map(|i| (col[i] - xhat[[i, j]]).powi(2)).sum();
        total += 1.0 - sse / sst;
        cols += 1;
    }
    total / cols as f64
}

/// Random `rows × cols` instance: binary truth and scores on a coarse grid
/// so that ties are common.
pub fn metric_instance<R: Rng>(r: &mut R, rows: usize, cols: usize) -> (Array2<f64>, Array2<f64>) {
    let x = Array2::from_shape_simple_fn((rows, cols), || f64::from(u8::from(r.random::<f64>() < 0.3)));
    let xhat = Array2::from_shape_simple_fn((rows, cols), || r.random_range(0..6) as f64 / 5.0);
    (x, xhat)
}

/// Largest deviation between the library metrics and the brute-force ones on
/// random 10×20 instances, over several `k`.
pub fn metric_oracle_max_error(cases: usize, seed: u64) -> f64 {
    let mut r = rng(seed);
    let mut worst = 0.0f64;
    for _ in 0..cases {
        let (x, xhat) = metric_instance(&mut r, 10, 20);
        let nodes: Vec<usize> = (0..10).collect();
        if x.rows().into_iter().all(|row| row.sum() == 0.0) {
            continue;
        }
        for k in [1, 3, 5, 10, 20, 25] {
            let rec = recall_at_k(xhat.view(), x.view(), &nodes, k).unwrap().value;
            let nd = ndcg_at_k(xhat.view(), x.view(), &nodes, k).unwrap().value;
            worst = worst.max((rec - brute_recall(xhat.view(), x.view(), k)).abs());
            worst = worst.max((nd - brute_ndcg(xhat.view(), x.view(), k)).abs());
        }
        let cont = gaussian(&mut r, 10, 20);
        let est = gaussian(&mut r, 10, 20);
        let rm = rmse(est.view(), cont.view(), &nodes).unwrap();
        let co = corr(est.view(), cont.view(), &nodes).unwrap().value;
        worst = worst.max((rm - brute_rmse(est.view(), cont.view())).abs());
        worst = worst.max((co - brute_corr(est.view(), cont.view())).abs());
    }
    worst
}
