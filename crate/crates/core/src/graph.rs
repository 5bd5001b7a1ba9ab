//! Undirected graphs and the two matrices derived from them: the
//! self-loop-augmented propagation matrix used by the encoder and the
//! normalized Laplacian used as the GMRF information matrix.

use std::collections::BTreeSet;

use ndarray::ArrayView1;

use crate::error::{Error, Result};
use crate::linalg::CsrMatrix;

/// Immutable undirected graph without self-loops or duplicate edges.
#[derive(Debug, Clone, PartialEq)]
pub struct Graph {
    n: usize,
    edges: Vec<(usize, usize)>,
    adjacency: CsrMatrix,
}

impl Graph {
    /// Deduplicates, drops self-loops and symmetrizes `edge_list`.
    pub fn new(n: usize, edge_list: &[(usize, usize)]) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidInput("graph must have at least one node".into()));
        }
        let mut set = BTreeSet::new();
        for &(u, v) in edge_list {
            if u >= n || v >= n {
                return Err(Error::InvalidInput(format!(
                    "edge ({u},{v}) references a node outside [0,{n})"
                )));
            }
            if u != v {
                set.insert((u.min(v), u.max(v)));
            }
        }
        let edges: Vec<_> = set.into_iter().collect();
        let mut triplets = Vec::with_capacity(2 * edges.len());
        for &(u, v) in &edges {
            triplets.push((u, v, 1.0));
            triplets.push((v, u, 1.0));
        }
        let adjacency = CsrMatrix::from_triplets(n, n, &triplets)?;
        Ok(Self {
            n,
            edges,
            adjacency,
        })
    }

    pub fn num_nodes(&self) -> usize {
        self.n
    }

    pub fn num_edges(&self) -> usize {
        self.edges.len()
    }

    /// Each undirected edge once, as `(u, v)` with `u < v`, sorted.
    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    /// Symmetric unit-weight adjacency (each edge stored twice).
    pub fn adjacency(&self) -> &CsrMatrix {
        &self.adjacency
    }

    pub fn neighbors(&self, u: usize) -> &[usize] {
        self.adjacency.row(u).0
    }

    pub fn degree(&self, u: usize) -> usize {
        self.neighbors(u).len()
    }

    pub fn degrees(&self) -> Vec<usize> {
        (0..self.n).map(|u| self.degree(u)).collect()
    }

    /// Subgraph induced by `nodes`, relabelled to `0..nodes.len()` in the given order.
    pub fn induced_subgraph(&self, nodes: &[usize]) -> Result<Graph> {
        let mut index = vec![usize::MAX; self.n];
        for (k, &u) in nodes.iter().enumerate() {
            if u >= self.n {
                return Err(Error::InvalidInput(format!("node {u} out of range")));
            }
            index[u] = k;
        }
        let edges: Vec<_> = self
            .edges
            .iter()
            .filter(|(u, v)| index[*u] != usize::MAX && index[*v] != usize::MAX)
            .map(|&(u, v)| (index[u], index[v]))
            .collect();
        Graph::new(nodes.len().max(1), &edges)
    }

    /// Same node set, keeping only the listed edges.
    pub fn with_edges(&self, edges: &[(usize, usize)]) -> Result<Graph> {
        Graph::new(self.n, edges)
    }
}

/// `Â = D̃^{-1/2}(A + I)D̃^{-1/2}` with `D̃` the degrees including the self-loop.
///
/// An isolated node gets the single entry `Â[i][i] = 1`.
pub fn normalized_adjacency(g: &Graph) -> CsrMatrix {
    let deg: Vec<f64> = (0..g.n).map(|u| (g.degree(u) + 1) as f64).collect();
    let mut triplets = Vec::with_capacity(2 * g.num_edges() + g.n);
    for u in 0..g.n {
        triplets.push((u, u, 1.0 / deg[u]));
        for &v in g.neighbors(u) {
            triplets.push((u, v, 1.0 / (deg[u] * deg[v]).sqrt()));
        }
    }
    CsrMatrix::from_triplets(g.n, g.n, &triplets).expect("valid graph gives valid matrix")
}

/// GMRF prior `N(0, K⁻¹)` with `K = I − D^{-1/2} A D^{-1/2}` and `h = 0`.
///
/// `h` is never stored. Isolated nodes keep an identity row in `K`
/// (their `D^{-1/2}` entry is taken as zero).
#[derive(Debug, Clone)]
pub struct GmrfPrior {
    k: CsrMatrix,
}

impl GmrfPrior {
    pub fn information(&self) -> &CsrMatrix {
        &self.k
    }

    pub fn num_nodes(&self) -> usize {
        self.k.rows()
    }
}

pub fn gmrf_information_matrix(g: &Graph) -> GmrfPrior {
    let inv_sqrt: Vec<f64> = g
        .degrees()
        .into_iter()
        .map(|d| if d == 0 { 0.0 } else { 1.0 / (d as f64).sqrt() })
        .collect();
    let mut triplets = Vec::with_capacity(2 * g.num_edges() + g.n);
    for u in 0..g.n {
        triplets.push((u, u, 1.0));
        for &v in g.neighbors(u) {
            triplets.push((u, v, -inv_sqrt[u] * inv_sqrt[v]));
        }
    }
    GmrfPrior {
        k: CsrMatrix::from_triplets(g.n, g.n, &triplets).expect("valid graph gives valid matrix"),
    }
}

/// Log of the product of node and edge potentials
/// `Πᵢ exp(−½(Kᵢᵢ + jitter) zᵢ²) · Π₍ᵢ,ⱼ₎ exp(−Kᵢⱼ zᵢ zⱼ)` with `h = 0`.
///
/// The normalizer is never computed. Only used to check the Gaussian form
/// of the prior; training never calls it.
pub fn gmrf_log_potential(prior: &GmrfPrior, jitter: f64, z: ArrayView1<f64>) -> Result<f64> {
    if !(jitter > 0.0) {
        return Err(Error::InvalidInput(format!("jitter must be positive, got {jitter}")));
    }
    let k = &prior.k;
    if z.len() != k.rows() {
        return Err(Error::shape("gmrf_log_potential", k.rows(), z.len()));
    }
    if z.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("gmrf_log_potential input".into()));
    }
    let mut log_p = 0.0;
    for i in 0..k.rows() {
        let (cols, vals) = k.row(i);
        for (&j, &kij) in cols.iter().zip(vals) {
            if j == i {
                log_p += -0.5 * (kij + jitter) * z[i] * z[i];
            } else if j > i {
                // one potential per undirected edge
                log_p += -kij * z[i] * z[j];
            }
        }
    }
    Ok(log_p)
}
