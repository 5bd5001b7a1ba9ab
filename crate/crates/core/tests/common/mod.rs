#![allow(dead_code)]

use nalgebra::DMatrix;
use ndarray::{Array2, ArrayView2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use svga_core::Graph;

pub const FD_STEP: f64 = 1e-5;
pub const FD_TOL: f64 = 1e-4;
pub const FD_POINTS: usize = 10;

pub type ChaRng = ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn gaussian<R: Rng>(rng: &mut R, rows: usize, cols: usize) -> Array2<f64> {
    Array2::from_shape_simple_fn((rows, cols), || StandardNormal.sample(rng))
}

/// Erdős–Rényi graph with edge probability `p`.
pub fn random_graph<R: Rng>(rng: &mut R, n: usize, p: f64) -> Graph {
    let mut edges = Vec::new();
    for u in 0..n {
        for v in u + 1..n {
            if rng.random::<f64>() < p {
                edges.push((u, v));
            }
        }
    }
    Graph::new(n, &edges).unwrap()
}

pub fn to_na(m: ArrayView2<f64>) -> DMatrix<f64> {
    DMatrix::from_fn(m.nrows(), m.ncols(), |i, j| m[[i, j]])
}

/// Relative error between a central difference of `f` along a random
/// direction and the directional derivative implied by `grad`.
pub fn directional_error<R, F>(rng: &mut R, x: &Array2<f64>, grad: &Array2<f64>, f: F) -> f64
where
    R: Rng,
    F: Fn(&Array2<f64>) -> f64,
{
    let dir = gaussian(rng, x.nrows(), x.ncols());
    let plus = x + &(&dir * FD_STEP);
    let minus = x - &(&dir * FD_STEP);
    let numeric = (f(&plus) - f(&minus)) / (2.0 * FD_STEP);
    let analytic = (grad * &dir).sum();
    rel_err(numeric, analytic)
}

pub fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1e-6)
}

pub fn dense_logdet(m: &DMatrix<f64>) -> f64 {
    let l = m.clone().cholesky().expect("positive definite").l();
    2.0 * l.diagonal().iter().map(|v| v.ln()).sum::<f64>()
}

pub mod fd;
pub mod oracles;

/// Dense adjacency of `g`.
pub fn dense_adjacency(g: &Graph) -> DMatrix<f64> {
    let mut a = DMatrix::zeros(g.num_nodes(), g.num_nodes());
    for &(u, v) in g.edges() {
        a[(u, v)] = 1.0;
        a[(v, u)] = 1.0;
    }
    a
}

/// `I − D^{-1/2} A D^{-1/2}` built densely; isolated nodes keep a unit row.
pub fn dense_information(g: &Graph) -> DMatrix<f64> {
    let a = dense_adjacency(g);
    let n = g.num_nodes();
    let s: Vec<f64> = (0..n)
        .map(|i| {
            let d = a.row(i).sum();
            if d > 0.0 { d.powf(-0.5) } else { 0.0 }
        })
        .collect();
    DMatrix::from_fn(n, n, |i, j| if i == j { 1.0 } else { 0.0 } - s[i] * a[(i, j)] * s[j])
}

/// `D̃^{-1/2}(A + I)D̃^{-1/2}` built densely.
pub fn dense_a_hat(g: &Graph) -> DMatrix<f64> {
    let n = g.num_nodes();
    let a = dense_adjacency(g) + DMatrix::identity(n, n);
    let s: Vec<f64> = (0..n).map(|i| a.row(i).sum().powf(-0.5)).collect();
    DMatrix::from_fn(n, n, |i, j| s[i] * a[(i, j)] * s[j])
}

pub fn max_abs_diff(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    assert_eq!(a.shape(), b.shape());
    a.iter().zip(b.iter()).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}
