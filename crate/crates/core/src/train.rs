//! Full-batch training with Adam and early stopping, the three-variant
//! ablation and the hyperparameter grid.

use std::io::Write;
use std::path::Path;
use std::time::Instant;

use ndarray::{Array2, ArrayView2};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::{TrainConfig, ValMetric, Variant};
use crate::data::{Dataset, FeatureKind, SplitMasks};
use crate::error::{Error, Result};
use crate::graph::{gmrf_information_matrix, normalized_adjacency, GmrfPrior};
use crate::linalg::{gather_rows, log_softmax_rows, sigmoid, CsrMatrix};
use crate::metrics::validation_score;
use crate::model::{decode_features, forward, init_params, Dims, ForwardNoise, ModelParams};
use crate::objective::{alpha_ber, evaluate_objective, LossBreakdown, ObjectiveInput};
use crate::optim::Adam;
use crate::rng::{stream, Stream};

/// One line of the training log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub l_x: f64,
    pub l_y: f64,
    pub l_reg: f64,
    pub total: f64,
    pub val_metric: f64,
    pub wall_ms: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub train_metric: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub test_metric: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainLog {
    pub records: Vec<EpochRecord>,
    /// 1-based epoch whose parameters were kept.
    pub best_epoch: usize,
    pub best_val: f64,
}

impl TrainLog {
    /// The record of the kept epoch.
    pub fn best(&self) -> Option<&EpochRecord> {
        self.records.iter().find(|r| r.epoch == self.best_epoch)
    }

    /// Records with wall time zeroed, for reproducibility comparisons.
    pub fn without_timing(&self) -> Vec<EpochRecord> {
        self.records
            .iter()
            .cloned()
            .map(|mut r| {
                r.wall_ms = 0.0;
                r
            })
            .collect()
    }

    /// One JSON object per epoch.
    pub fn write_jsonl(&self, path: &Path) -> Result<()> {
        let io = |e| Error::io(path, e);
        let mut f = std::io::BufWriter::new(std::fs::File::create(path).map_err(io)?);
        for r in &self.records {
            let line = serde_json::to_string(r).expect("record serializes");
            writeln!(f, "{line}").map_err(io)?;
        }
        f.flush().map_err(io)
    }
}

/// Result of [`train`].
#[derive(Debug, Clone)]
pub struct TrainOutcome {
    /// Parameters of the best validation epoch.
    pub params: ModelParams,
    pub log: TrainLog,
    pub val_metric: ValMetric,
    pub alpha_ber: f64,
}

/// Precomputed graph matrices shared by training and inference.
#[derive(Debug, Clone)]
pub struct GraphOps {
    pub a_hat: CsrMatrix,
    pub prior: GmrfPrior,
}

impl GraphOps {
    pub fn new(graph: &crate::graph::Graph) -> Self {
        Self {
            a_hat: normalized_adjacency(graph),
            prior: gmrf_information_matrix(graph),
        }
    }
}

/// Evaluation-mode feature logits for `nodes`: no dropout, and the
/// stochastic variant uses its mean `Z = U`.
pub fn predict_logits(
    params: &ModelParams,
    a_hat: &CsrMatrix,
    config: &TrainConfig,
    nodes: &[usize],
) -> Result<Array2<f64>> {
    let state = forward(params, a_hat, config, ForwardNoise::none())?;
    decode_features(params, gather_rows(state.z.view(), nodes).view())
}

/// Maps logits to estimates on the feature scale: probabilities for binary
/// and categorical features, identity for continuous ones.
pub fn apply_link(kind: FeatureKind, logits: ArrayView2<f64>) -> Array2<f64> {
    match kind {
        FeatureKind::Binary => sigmoid(logits),
        FeatureKind::Continuous => logits.to_owned(),
        FeatureKind::Categorical => log_softmax_rows(logits).mapv(f64::exp),
    }
}

fn numerical(epoch: usize, e: Error) -> Error {
    if e.is_numerical() {
        Error::NumericalAbort {
            epoch,
            msg: e.to_string(),
        }
    } else {
        e
    }
}

/// Trains one model and returns the parameters of the best validation epoch.
///
/// Each epoch is one full-batch Adam step on the features of
/// `masks.feat_train` and the labels of `masks.label_observed`, followed by
/// the validation metric on `masks.feat_val`. Training stops once
/// `patience` consecutive epochs fail to improve on the best score.
pub fn train(data: &Dataset, masks: &SplitMasks, config: &TrainConfig) -> Result<TrainOutcome> {
    config.validate()?;
    let ops = GraphOps::new(&data.graph);
    train_with_ops(data, &ops, masks, config)
}

/// [`train`] with prebuilt graph matrices.
pub fn train_with_ops(
    data: &Dataset,
    ops: &GraphOps,
    masks: &SplitMasks,
    config: &TrainConfig,
) -> Result<TrainOutcome> {
    config.validate()?;
    let x = data.features.values.view();
    let kind = data.features.kind;
    let n = data.graph.num_nodes();
    if masks.feat_train.is_empty() {
        return Err(Error::InvalidInput("no training nodes with observed features".into()));
    }
    if masks.feat_val.is_empty() {
        return Err(Error::InvalidInput("no validation nodes".into()));
    }
    let val_metric = config.val_metric.unwrap_or_else(|| ValMetric::default_for(kind));
    let alpha = match (kind, config.alpha_ber) {
        (_, Some(a)) => a,
        (FeatureKind::Binary, None) => alpha_ber(x, &masks.feat_train)?,
        _ => 0.5,
    };
    let label_nodes: Vec<usize> = match &data.labels {
        Some(_) => masks.label_observed.clone(),
        None => Vec::new(),
    };
    let labels: Vec<usize> = match &data.labels {
        Some(l) => label_nodes.iter().map(|&i| l[i]).collect(),
        None => Vec::new(),
    };
    let dims = Dims {
        n,
        d: config.dim,
        m: x.ncols(),
        c: data.num_classes(),
        r: config.rank(),
    };
    if config.variant == Variant::Stoch && dims.r > n {
        return Err(Error::InvalidInput(format!("rank {} exceeds node count {n}", dims.r)));
    }
    let input = ObjectiveInput {
        a_hat: &ops.a_hat,
        prior: &ops.prior,
        features: x,
        kind,
        feature_nodes: &masks.feat_train,
        label_nodes: &label_nodes,
        labels: &labels,
        alpha_ber: alpha,
    };

    let mut params = init_params(dims, config.variant, config.seed)?;
    let mut adam = Adam::new(config.lr);
    let mut dropout_rng = stream(config.seed, Stream::Dropout, 0);
    let mut sample_rng = stream(config.seed, Stream::Sampling, 0);
    let mut log = TrainLog {
        best_val: f64::NEG_INFINITY,
        ..Default::default()
    };
    let mut best = params.clone();
    let mut stale = 0;
    let start = Instant::now();

    for epoch in 1..=config.max_epochs {
        let noise = ForwardNoise::sample(dims, config, true, &mut dropout_rng, &mut sample_rng)?;
        let ev = evaluate_objective(&params, &input, config, noise).map_err(|e| numerical(epoch, e))?;
        adam.step(&mut params, &ev.grads);
        if !params.is_finite() {
            return Err(Error::NumericalAbort {
                epoch,
                msg: "parameters became non-finite".into(),
            });
        }

        let score = |nodes: &[usize]| -> Result<f64> {
            let logits = predict_logits(&params, &ops.a_hat, config, nodes)?;
            validation_score(val_metric, logits.view(), gather_rows(x, nodes).view(), &local(nodes.len()))
        };
        let val = score(&masks.feat_val).map_err(|e| numerical(epoch, e))?;
        if !val.is_finite() {
            return Err(Error::NumericalAbort {
                epoch,
                msg: format!("validation {val_metric} is {val}"),
            });
        }
        let (train_metric, test_metric) = if config.track_curves {
            let test = if masks.feat_test.is_empty() {
                None
            } else {
                Some(score(&masks.feat_test)?)
            };
            (Some(score(&masks.feat_train)?), test)
        } else {
            (None, None)
        };
        let LossBreakdown { l_x, l_y, l_reg, total } = ev.loss;
        log.records.push(EpochRecord {
            epoch,
            l_x,
            l_y,
            l_reg,
            total,
            val_metric: val,
            wall_ms: start.elapsed().as_secs_f64() * 1e3,
            train_metric,
            test_metric,
        });
        log::debug!("epoch {epoch}: total {total:.6} val {val_metric} {val:.6}");

        if val > log.best_val {
            log.best_val = val;
            log.best_epoch = epoch;
            best.clone_from(&params);
            stale = 0;
        } else {
            stale += 1;
            if stale >= config.patience {
                log::info!("early stop at epoch {epoch}; best epoch {}", log.best_epoch);
                break;
            }
        }
    }
    Ok(TrainOutcome {
        params: best,
        log,
        val_metric,
        alpha_ber: alpha,
    })
}

fn local(len: usize) -> Vec<usize> {
    (0..len).collect()
}

/// The three variants trained with identical seeds and splits.
#[derive(Debug, Clone)]
pub struct Ablation {
    pub det: TrainOutcome,
    pub noreg: TrainOutcome,
    pub stoch: TrainOutcome,
}

impl Ablation {
    pub fn get(&self, variant: Variant) -> &TrainOutcome {
        match variant {
            Variant::Det => &self.det,
            Variant::NoReg => &self.noreg,
            Variant::Stoch => &self.stoch,
        }
    }
}

/// Trains det, noreg and stoch from `base`, recording per-epoch train and
/// test curves.
pub fn run_ablation(data: &Dataset, masks: &SplitMasks, base: &TrainConfig) -> Result<Ablation> {
    let ops = GraphOps::new(&data.graph);
    let run = |variant| {
        let cfg = TrainConfig {
            variant,
            track_curves: true,
            ..base.clone()
        };
        train_with_ops(data, &ops, masks, &cfg)
    };
    Ok(Ablation {
        det: run(Variant::Det)?,
        noreg: run(Variant::NoReg)?,
        stoch: run(Variant::Stoch)?,
    })
}

pub const GRID_DIMS: [usize; 2] = [256, 512];
pub const GRID_DROPOUT: [f64; 2] = [0.0, 0.5];
pub const GRID_LAMBDA: [f64; 3] = [0.01, 0.1, 1.0];
pub const GRID_BETA: [f64; 3] = [0.01, 0.1, 1.0];
pub const GRID_UNIT_NORM: [bool; 2] = [true, false];

/// Every combination of the search space, in a fixed order.
pub fn grid_configs(base: &TrainConfig) -> Vec<TrainConfig> {
    let mut out = Vec::new();
    for &dim in &GRID_DIMS {
        for &dropout in &GRID_DROPOUT {
            for &lambda in &GRID_LAMBDA {
                for &beta in &GRID_BETA {
                    for &unit_norm in &GRID_UNIT_NORM {
                        out.push(TrainConfig {
                            dim,
                            dropout,
                            lambda,
                            beta,
                            unit_norm,
                            rank: base.rank.map(|r| r.min(dim)),
                            ..base.clone()
                        });
                    }
                }
            }
        }
    }
    out
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GridEntry {
    pub config: TrainConfig,
    pub best_val: Option<f64>,
    pub best_epoch: Option<usize>,
    /// Set when the run failed (e.g. a numerical abort).
    pub error: Option<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GridResult {
    pub entries: Vec<GridEntry>,
    /// Index of the entry with the highest validation score (first on ties).
    pub best: Option<usize>,
}

/// Trains every config on `workers` threads and selects the best by
/// validation score. Results do not depend on the worker count.
pub fn run_grid(
    data: &Dataset,
    masks: &SplitMasks,
    configs: &[TrainConfig],
    workers: usize,
) -> Result<GridResult> {
    let ops = GraphOps::new(&data.graph);
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| Error::InvalidInput(format!("thread pool: {e}")))?;
    let entries: Vec<GridEntry> = pool.install(|| {
        configs
            .par_iter()
            .map(|cfg| match train_with_ops(data, &ops, masks, cfg) {
                Ok(out) => GridEntry {
                    config: cfg.clone(),
                    best_val: Some(out.log.best_val),
                    best_epoch: Some(out.log.best_epoch),
                    error: None,
                },
                Err(e) => GridEntry {
                    config: cfg.clone(),
                    best_val: None,
                    best_epoch: None,
                    error: Some(e.to_string()),
                },
            })
            .collect()
    });
    let mut best: Option<usize> = None;
    for (i, e) in entries.iter().enumerate() {
        if let Some(v) = e.best_val {
            if best.is_none_or(|b| v > entries[b].best_val.unwrap_or(f64::NEG_INFINITY)) {
                best = Some(i);
            }
        }
    }
    Ok(GridResult { entries, best })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_has_every_combination() {
        let g = grid_configs(&TrainConfig::default());
        assert_eq!(g.len(), 72);
        assert!(g.iter().all(|c| c.validate().is_ok()));
        assert_eq!(g[0].dim, 256);
        assert_eq!(g[71].dim, 512);
    }

    #[test]
    fn logits_link() {
        let l = ndarray::array![[0.0, 0.0]];
        assert_eq!(apply_link(FeatureKind::Binary, l.view()), ndarray::array![[0.5, 0.5]]);
        assert_eq!(apply_link(FeatureKind::Categorical, l.view()), ndarray::array![[0.5, 0.5]]);
    }
}
