//! Estimation-quality metrics and the on-disk metrics report.
//!
//! Ranking metrics order features by descending score with ties broken by
//! ascending feature index, so results never depend on sort stability.

use std::collections::BTreeMap;
use std::path::Path;

use ndarray::ArrayView2;
use serde::{Deserialize, Serialize};

use crate::config::ValMetric;
use crate::data::FeatureKind;
use crate::error::{Error, Result};

/// Ks reported for ranking metrics unless overridden.
pub const DEFAULT_KS: [usize; 3] = [10, 20, 50];

/// A metric averaged over nodes (or features), with the count of skipped ones.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Score {
    pub value: f64,
    pub evaluated: usize,
    pub skipped: usize,
}

fn check_inputs(xhat: ArrayView2<f64>, x: ArrayView2<f64>, nodes: &[usize]) -> Result<()> {
    if xhat.dim() != x.dim() {
        return Err(Error::shape("metric", format!("{:?}", x.dim()), format!("{:?}", xhat.dim())));
    }
    if nodes.is_empty() {
        return Err(Error::InvalidInput("metric over an empty node set".into()));
    }
    if let Some(&bad) = nodes.iter().find(|&&i| i >= x.nrows()) {
        return Err(Error::InvalidInput(format!("node {bad} out of range")));
    }
    Ok(())
}

/// Indices of the `k` highest scores, best first.
pub fn top_k(scores: &[f64], k: usize) -> Vec<usize> {
    let cmp = |&a: &usize, &b: &usize| scores[b].total_cmp(&scores[a]).then(a.cmp(&b));
    let mut idx: Vec<usize> = (0..scores.len()).collect();
    let k = k.min(idx.len());
    if k < idx.len() && k > 0 {
        idx.select_nth_unstable_by(k - 1, cmp);
    }
    idx.truncate(k);
    idx.sort_unstable_by(cmp);
    idx
}

fn ranking(
    xhat: ArrayView2<f64>,
    x: ArrayView2<f64>,
    nodes: &[usize],
    k: usize,
    per_node: impl Fn(&[usize], &[f64], usize) -> f64,
) -> Result<Score> {
    if k == 0 {
        return Err(Error::InvalidInput("k must be positive".into()));
    }
    check_inputs(xhat, x, nodes)?;
    let (mut sum, mut evaluated, mut skipped) = (0.0, 0, 0);
    for &i in nodes {
        let truth = x.row(i);
        let positives = truth.iter().filter(|&&v| v != 0.0).count();
        if positives == 0 {
            skipped += 1;
            continue;
        }
        let scores = xhat.row(i).to_vec();
        let top = top_k(&scores, k);
        let truth = truth.to_vec();
        sum += per_node(&top, &truth, positives);
        evaluated += 1;
    }
    if evaluated == 0 {
        return Err(Error::InvalidInput("every evaluated row is all zero".into()));
    }
    Ok(Score {
        value: sum / evaluated as f64,
        evaluated,
        skipped,
    })
}

/// Fraction of a node's true entries found in its top `k` scores, averaged
/// over nodes. All-zero rows are skipped.
pub fn recall_at_k(xhat: ArrayView2<f64>, x: ArrayView2<f64>, nodes: &[usize], k: usize) -> Result<Score> {
    ranking(xhat, x, nodes, k, |top, truth, positives| {
        top.iter().filter(|&&j| truth[j] != 0.0).count() as f64 / positives as f64
    })
}

/// DCG@k over binary relevance divided by the ideal DCG with
/// `min(k, ‖x‖₀)` hits, averaged over nodes.
pub fn ndcg_at_k(xhat: ArrayView2<f64>, x: ArrayView2<f64>, nodes: &[usize], k: usize) -> Result<Score> {
    ranking(xhat, x, nodes, k, |top, truth, positives| {
        let gain = |rank: usize| 1.0 / ((rank + 2) as f64).log2();
        let dcg: f64 = top
            .iter()
            .enumerate()
            .filter(|(_, &j)| truth[j] != 0.0)
            .map(|(r, _)| gain(r))
            .sum();
        let ideal: f64 = (0..k.min(positives)).map(gain).sum();
        dcg / ideal
    })
}

/// Mean over nodes of the per-node root-mean-square error.
pub fn rmse(xhat: ArrayView2<f64>, x: ArrayView2<f64>, nodes: &[usize]) -> Result<f64> {
    check_inputs(xhat, x, nodes)?;
    let m = x.ncols().max(1) as f64;
    let total: f64 = nodes
        .iter()
        .map(|&i| {
            let sse: f64 = xhat
                .row(i)
                .iter()
                .zip(x.row(i))
                .map(|(a, b)| (a - b) * (a - b))
                .sum();
            (sse / m).sqrt()
        })
        .sum();
    Ok(total / nodes.len() as f64)
}

/// Mean over features of `1 − SSE/SST`, with `SST` centered on the mean over
/// `nodes`. Features with `SST < 1e-12` are skipped.
pub fn corr(xhat: ArrayView2<f64>, x: ArrayView2<f64>, nodes: &[usize]) -> Result<Score> {
    check_inputs(xhat, x, nodes)?;
    let (mut sum, mut evaluated, mut skipped) = (0.0, 0, 0);
    for j in 0..x.ncols() {
        let mean = nodes.iter().map(|&i| x[[i, j]]).sum::<f64>() / nodes.len() as f64;
        let (mut sse, mut sst) = (0.0, 0.0);
        for &i in nodes {
            sse += (x[[i, j]] - xhat[[i, j]]).powi(2);
            sst += (x[[i, j]] - mean).powi(2);
        }
        if sst < 1e-12 {
            skipped += 1;
            continue;
        }
        sum += 1.0 - sse / sst;
        evaluated += 1;
    }
    if evaluated == 0 {
        return Err(Error::NotApplicable("every feature is constant over the nodes".into()));
    }
    Ok(Score {
        value: sum / evaluated as f64,
        evaluated,
        skipped,
    })
}

/// Share of nodes whose highest score hits the position of the true maximum
/// (one-hot categorical features).
pub fn argmax_accuracy(xhat: ArrayView2<f64>, x: ArrayView2<f64>, nodes: &[usize]) -> Result<f64> {
    check_inputs(xhat, x, nodes)?;
    let hits = nodes
        .iter()
        .filter(|&&i| {
            let pred = top_k(&xhat.row(i).to_vec(), 1);
            let truth = top_k(&x.row(i).to_vec(), 1);
            pred == truth
        })
        .count();
    Ok(hits as f64 / nodes.len() as f64)
}

/// Model-selection score; larger is better.
pub fn validation_score(
    metric: ValMetric,
    xhat: ArrayView2<f64>,
    x: ArrayView2<f64>,
    nodes: &[usize],
) -> Result<f64> {
    Ok(match metric {
        ValMetric::Recall(k) => recall_at_k(xhat, x, nodes, k)?.value,
        ValMetric::Ndcg(k) => ndcg_at_k(xhat, x, nodes, k)?.value,
        ValMetric::NegRmse => -rmse(xhat, x, nodes)?,
        ValMetric::Corr => corr(xhat, x, nodes)?.value,
        ValMetric::Accuracy => argmax_accuracy(xhat, x, nodes)?,
    })
}

/// Metrics of one or more node sets, serialized with sorted keys.
///
/// Metric keys look like `test/recall@10`; counts of skipped rows or
/// features go to `meta`.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub dataset: String,
    pub seed: u64,
    pub config_hash: String,
    pub metrics: BTreeMap<String, f64>,
    pub meta: BTreeMap<String, u64>,
}

impl MetricsReport {
    pub fn new(dataset: impl Into<String>, seed: u64, config_hash: impl Into<String>) -> Self {
        Self {
            dataset: dataset.into(),
            seed,
            config_hash: config_hash.into(),
            ..Default::default()
        }
    }

    pub fn get(&self, key: &str) -> Option<f64> {
        self.metrics.get(key).copied()
    }

    /// Adds the standard metrics for `kind` under `prefix/`.
    pub fn add_split(
        &mut self,
        prefix: &str,
        xhat: ArrayView2<f64>,
        x: ArrayView2<f64>,
        nodes: &[usize],
        kind: FeatureKind,
        ks: &[usize],
    ) -> Result<()> {
        self.meta.insert(format!("{prefix}/nodes"), nodes.len() as u64);
        match kind {
            FeatureKind::Binary => {
                for &k in ks {
                    let r = recall_at_k(xhat, x, nodes, k)?;
                    let n = ndcg_at_k(xhat, x, nodes, k)?;
                    self.metrics.insert(format!("{prefix}/recall@{k}"), r.value);
                    self.metrics.insert(format!("{prefix}/ndcg@{k}"), n.value);
                    self.meta.insert(format!("{prefix}/skipped_zero_rows"), r.skipped as u64);
                }
            }
            FeatureKind::Continuous => {
                self.metrics.insert(format!("{prefix}/rmse"), rmse(xhat, x, nodes)?);
                match corr(xhat, x, nodes) {
                    Ok(c) => {
                        self.metrics.insert(format!("{prefix}/corr"), c.value);
                        self.meta.insert(format!("{prefix}/skipped_constant_features"), c.skipped as u64);
                    }
                    Err(Error::NotApplicable(_)) => {
                        self.meta.insert(format!("{prefix}/skipped_constant_features"), x.ncols() as u64);
                    }
                    Err(e) => return Err(e),
                }
            }
            FeatureKind::Categorical => {
                self.metrics.insert(format!("{prefix}/accuracy"), argmax_accuracy(xhat, x, nodes)?);
            }
        }
        Ok(())
    }

    /// Pretty JSON with every object's keys sorted, newline-terminated.
    pub fn to_json(&self) -> String {
        let value = serde_json::to_value(self).expect("report serializes");
        let mut s = serde_json::to_string_pretty(&value).expect("value serializes");
        s.push('\n');
        s
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()).map_err(|e| Error::io(path, e))
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| Error::Parse {
            path: path.to_path_buf(),
            line: e.line(),
            msg: e.to_string(),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use ndarray::{array, Array2};

    #[test]
    fn worked_recall_example() {
        let x = array![[0.0, 0.0, 1.0, 1.0, 1.0]];
        let s = array![[0.1, 0.7, 0.2, 0.8, 0.9]];
        let r = recall_at_k(s.view(), x.view(), &[0], 3).unwrap();
        assert_eq!(r.value, 2.0 / 3.0);
        let n = ndcg_at_k(s.view(), x.view(), &[0], 3).unwrap();
        let ideal = 1.0 + 1.0 / 3f64.log2() + 0.5;
        assert_abs_diff_eq!(n.value, (1.0 + 1.0 / 3f64.log2()) / ideal, epsilon = 1e-15);
    }

    #[test]
    fn ties_break_by_index() {
        assert_eq!(top_k(&[0.0; 5], 3), vec![0, 1, 2]);
        assert_eq!(top_k(&[1.0, 2.0, 2.0, 0.0], 2), vec![1, 2]);
        assert_eq!(top_k(&[1.0, 2.0], 5), vec![1, 0]);
    }

    #[test]
    fn zero_rows_are_skipped() {
        let x = array![[0.0, 0.0], [1.0, 0.0]];
        let r = recall_at_k(x.view(), x.view(), &[0, 1], 1).unwrap();
        assert_eq!((r.value, r.evaluated, r.skipped), (1.0, 1, 1));
        assert!(recall_at_k(x.view(), x.view(), &[0], 1).is_err());
        assert!(recall_at_k(x.view(), x.view(), &[1], 0).is_err());
    }

    #[test]
    fn regression_extremes() {
        let x = array![[1.0, 2.0, 5.0], [3.0, 2.0, 1.0], [0.0, 2.0, 4.0]];
        let nodes = [0, 1, 2];
        assert_eq!(rmse(x.view(), x.view(), &nodes).unwrap(), 0.0);
        let c = corr(x.view(), x.view(), &nodes).unwrap();
        assert_eq!((c.value, c.skipped), (1.0, 1));
        let means = Array2::from_shape_fn((3, 3), |(_, j)| x.column(j).mean().unwrap());
        assert_abs_diff_eq!(corr(means.view(), x.view(), &nodes).unwrap().value, 0.0, epsilon = 1e-15);
    }

    #[test]
    fn report_keys_are_sorted() {
        let mut r = MetricsReport::new("toy", 1, "abc");
        r.metrics.insert("z".into(), 1.0);
        r.metrics.insert("a".into(), 2.0);
        let json = r.to_json();
        assert!(json.find("\"a\"").unwrap() < json.find("\"z\"").unwrap());
        assert!(json.find("config_hash").unwrap() < json.find("dataset").unwrap());
        let back: MetricsReport = serde_json::from_str(&json).unwrap();
        assert_eq!(back, r);
    }
}
