//! NeighAgg: estimate a node's features as the mean of its observed
//! neighbors' features.

use ndarray::{Array1, Array2, ArrayView2};

use crate::error::{Error, Result};
use crate::graph::Graph;

/// Mean of observed neighbors' rows for every node.
///
/// A node without observed neighbors gets the mean of all observed rows.
/// With `hops = 2` the 1-hop estimates are averaged over neighbors once more,
/// with the same fallback.
pub fn neigh_agg(graph: &Graph, x: ArrayView2<f64>, observed: &[usize], hops: usize) -> Result<Array2<f64>> {
    let n = graph.num_nodes();
    if x.nrows() != n {
        return Err(Error::shape("neigh_agg", format!("{n} rows"), x.nrows()));
    }
    if observed.is_empty() {
        return Err(Error::InvalidInput("no observed feature rows".into()));
    }
    if !(1..=2).contains(&hops) {
        return Err(Error::InvalidInput(format!("hops must be 1 or 2, got {hops}")));
    }
    let mut is_obs = vec![false; n];
    for &i in observed {
        if i >= n {
            return Err(Error::InvalidInput(format!("observed node {i} out of range")));
        }
        is_obs[i] = true;
    }
    let mut global = Array1::<f64>::zeros(x.ncols());
    for &i in observed {
        global += &x.row(i);
    }
    global /= observed.len() as f64;

    let first = aggregate(graph, x, &is_obs, &global);
    if hops == 1 {
        return Ok(first);
    }
    Ok(aggregate(graph, first.view(), &vec![true; n], &global))
}

fn aggregate(graph: &Graph, x: ArrayView2<f64>, use_row: &[bool], fallback: &Array1<f64>) -> Array2<f64> {
    let mut out = Array2::<f64>::zeros(x.dim());
    for (u, mut row) in out.rows_mut().into_iter().enumerate() {
        let mut count = 0usize;
        for &v in graph.neighbors(u) {
            if use_row[v] {
                row += &x.row(v);
                count += 1;
            }
        }
        if count == 0 {
            row.assign(fallback);
        } else {
            row /= count as f64;
        }
    }
    out
}
