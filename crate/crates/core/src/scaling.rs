//! Inference time as a function of edge count.
//!
//! The default [`SubgraphMode::KeepNodes`] keeps every node and drops edges
//! uniformly at random, so only the propagation cost varies between the timed
//! graphs. [`SubgraphMode::Induced`] keeps only the endpoints of the sampled
//! edges, so node count shrinks with the edge count.

use std::time::Instant;

use rand::seq::index::sample;
use serde::{Deserialize, Serialize};

use crate::config::TrainConfig;
use crate::error::{Error, Result};
use crate::graph::{normalized_adjacency, Graph};
use crate::model::{init_params, Dims};
use crate::rng::{stream, Stream};
use crate::train::predict_logits;

/// Edge fractions of the timed subgraphs.
pub const FRACTIONS: [f64; 9] = [0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9];

/// How the timed subgraphs are formed from the sampled edges.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SubgraphMode {
    #[default]
    KeepNodes,
    Induced,
}

/// Keeps `⌊fraction·|E|⌋` edges chosen uniformly without replacement.
pub fn subsample_edges(graph: &Graph, fraction: f64, seed: u64, sub: u64) -> Result<Graph> {
    if !(0.0..=1.0).contains(&fraction) {
        return Err(Error::InvalidInput(format!("edge fraction {fraction} not in [0,1]")));
    }
    let total = graph.num_edges();
    let keep = (fraction * total as f64).floor() as usize;
    let mut idx = sample(&mut stream(seed, Stream::Bench, sub), total, keep).into_vec();
    idx.sort_unstable();
    let edges: Vec<_> = idx.into_iter().map(|i| graph.edges()[i]).collect();
    graph.with_edges(&edges)
}

/// Drops isolated nodes and relabels the rest in ascending order.
pub fn drop_isolated(graph: &Graph) -> Result<Graph> {
    let mut map = vec![usize::MAX; graph.num_nodes()];
    let mut next = 0;
    for &(u, v) in graph.edges() {
        for w in [u, v] {
            if map[w] == usize::MAX {
                map[w] = 0;
            }
        }
    }
    for slot in map.iter_mut().filter(|s| **s == 0) {
        *slot = next;
        next += 1;
    }
    let edges: Vec<_> = graph.edges().iter().map(|&(u, v)| (map[u], map[v])).collect();
    Graph::new(next, &edges)
}

/// Least-squares line `y = slope·x + intercept` with its coefficient of
/// determination.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinearFit {
    pub slope: f64,
    pub intercept: f64,
    pub r2: f64,
}

pub fn linear_fit(xs: &[f64], ys: &[f64]) -> Result<LinearFit> {
    if xs.len() != ys.len() || xs.len() < 2 {
        return Err(Error::InvalidInput("need at least two paired points".into()));
    }
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let syy: f64 = ys.iter().map(|y| (y - my).powi(2)).sum();
    if sxx == 0.0 {
        return Err(Error::InvalidInput("x values are all equal".into()));
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let sse: f64 = xs
        .iter()
        .zip(ys)
        .map(|(x, y)| (y - slope * x - intercept).powi(2))
        .sum();
    let r2 = if syy == 0.0 { 1.0 } else { 1.0 - sse / syy };
    Ok(LinearFit { slope, intercept, r2 })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TimingRow {
    pub fraction: f64,
    pub nodes: usize,
    pub edges: usize,
    pub mean_ms: f64,
    pub min_ms: f64,
    pub runs_ms: Vec<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BenchReport {
    pub mode: SubgraphMode,
    pub nodes: usize,
    pub features: usize,
    pub dim: usize,
    pub rows: Vec<TimingRow>,
    /// Fit of mean time (ms) against edge count.
    pub fit: LinearFit,
    /// Fit of the fastest run (ms) against edge count.
    pub fit_min: LinearFit,
}

/// Times `repeats` evaluation-mode forward passes (encoder and feature
/// decoder over all nodes) on each edge subsample and fits time against
/// edge count.
pub fn bench_inference(
    graph: &Graph,
    features: usize,
    config: &TrainConfig,
    mode: SubgraphMode,
    repeats: usize,
    seed: u64,
) -> Result<BenchReport> {
    if repeats == 0 {
        return Err(Error::InvalidInput("repeats must be positive".into()));
    }
    let mut rows = Vec::with_capacity(FRACTIONS.len());
    for (i, &fraction) in FRACTIONS.iter().enumerate() {
        let mut sub = subsample_edges(graph, fraction, seed, i as u64)?;
        if mode == SubgraphMode::Induced {
            sub = drop_isolated(&sub)?;
        }
        let n = sub.num_nodes();
        let dims = Dims {
            n,
            d: config.dim,
            m: features,
            c: 0,
            r: config.rank().min(n),
        };
        let params = init_params(dims, config.variant, seed)?;
        let all: Vec<usize> = (0..n).collect();
        let a_hat = normalized_adjacency(&sub);
        // One untimed pass warms caches and the allocator.
        predict_logits(&params, &a_hat, config, &all)?;
        let runs_ms = (0..repeats)
            .map(|_| {
                let t = Instant::now();
                predict_logits(&params, &a_hat, config, &all).map(|_| t.elapsed().as_secs_f64() * 1e3)
            })
            .collect::<Result<Vec<f64>>>()?;
        let mean_ms = runs_ms.iter().sum::<f64>() / repeats as f64;
        let min_ms = runs_ms.iter().copied().fold(f64::INFINITY, f64::min);
        log::info!("fraction {fraction}: {n} nodes, {} edges, {mean_ms:.2} ms", sub.num_edges());
        rows.push(TimingRow {
            fraction,
            nodes: n,
            edges: sub.num_edges(),
            mean_ms,
            min_ms,
            runs_ms,
        });
    }
    let xs: Vec<f64> = rows.iter().map(|r| r.edges as f64).collect();
    let means: Vec<f64> = rows.iter().map(|r| r.mean_ms).collect();
    let mins: Vec<f64> = rows.iter().map(|r| r.min_ms).collect();
    Ok(BenchReport {
        mode,
        nodes: graph.num_nodes(),
        features,
        dim: config.dim,
        fit: linear_fit(&xs, &means)?,
        fit_min: linear_fit(&xs, &mins)?,
        rows,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn exact_line() {
        let f = linear_fit(&[1.0, 2.0, 3.0], &[3.0, 5.0, 7.0]).unwrap();
        assert_abs_diff_eq!(f.slope, 2.0, epsilon = 1e-12);
        assert_abs_diff_eq!(f.intercept, 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(f.r2, 1.0, epsilon = 1e-12);
        assert!(linear_fit(&[1.0, 1.0], &[0.0, 1.0]).is_err());
    }

    #[test]
    fn subsample_keeps_nodes() {
        let edges: Vec<_> = (0..20).map(|i| (i, i + 1)).collect();
        let g = Graph::new(21, &edges).unwrap();
        let s = subsample_edges(&g, 0.3, 0, 0).unwrap();
        assert_eq!((s.num_nodes(), s.num_edges()), (21, 6));
        assert!(s.edges().iter().all(|e| g.edges().contains(e)));
    }

    #[test]
    fn induced_relabels_endpoints() {
        let g = Graph::new(6, &[(1, 4), (4, 5)]).unwrap();
        let s = drop_isolated(&g).unwrap();
        assert_eq!(s.num_nodes(), 3);
        assert_eq!(s.edges(), &[(0, 1), (1, 2)]);
    }
}
