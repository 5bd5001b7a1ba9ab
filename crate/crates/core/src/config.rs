//! Hyperparameters shared by the model, objective and trainer.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::data::FeatureKind;
use crate::error::{Error, Result};

/// Inference scheme.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Variant {
    /// Deterministic embeddings with the GMRF regularizer.
    Det,
    /// Sampled latents from a low-rank structured Gaussian, KL to the GMRF prior.
    Stoch,
    /// Deterministic embeddings without any regularizer.
    NoReg,
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Variant::Det => "det",
            Variant::Stoch => "stoch",
            Variant::NoReg => "noreg",
        })
    }
}

impl FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "det" => Ok(Variant::Det),
            "stoch" => Ok(Variant::Stoch),
            "noreg" => Ok(Variant::NoReg),
            other => Err(Error::InvalidInput(format!("unknown variant `{other}`"))),
        }
    }
}

/// How per-node loss terms are reduced.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Reduction {
    /// Sum over nodes.
    Sum,
    /// Feature and label terms divided by their node counts, regularizer by `n`.
    Mean,
}

/// Model-selection metric computed on validation nodes; larger is better.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ValMetric {
    Recall(usize),
    Ndcg(usize),
    NegRmse,
    Corr,
    Accuracy,
}

impl ValMetric {
    pub fn default_for(kind: FeatureKind) -> Self {
        match kind {
            FeatureKind::Binary => ValMetric::Recall(10),
            FeatureKind::Continuous => ValMetric::NegRmse,
            FeatureKind::Categorical => ValMetric::Accuracy,
        }
    }
}

impl fmt::Display for ValMetric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ValMetric::Recall(k) => write!(f, "recall@{k}"),
            ValMetric::Ndcg(k) => write!(f, "ndcg@{k}"),
            ValMetric::NegRmse => f.write_str("neg_rmse"),
            ValMetric::Corr => f.write_str("corr"),
            ValMetric::Accuracy => f.write_str("accuracy"),
        }
    }
}

impl FromStr for ValMetric {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::InvalidInput(format!("unknown validation metric `{s}`"));
        if let Some((name, k)) = s.split_once('@') {
            let k: usize = k.parse().map_err(|_| bad())?;
            if k == 0 {
                return Err(bad());
            }
            return match name {
                "recall" => Ok(ValMetric::Recall(k)),
                "ndcg" => Ok(ValMetric::Ndcg(k)),
                _ => Err(bad()),
            };
        }
        match s {
            "neg_rmse" => Ok(ValMetric::NegRmse),
            "corr" => Ok(ValMetric::Corr),
            "accuracy" => Ok(ValMetric::Accuracy),
            _ => Err(bad()),
        }
    }
}

impl Serialize for ValMetric {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for ValMetric {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub dim: usize,
    pub dropout: f64,
    pub lambda: f64,
    pub beta: f64,
    /// Weight of the log-determinant term of the regularizer.
    pub alpha_logdet: f64,
    pub lr: f64,
    pub max_epochs: usize,
    pub patience: usize,
    pub variant: Variant,
    pub unit_norm: bool,
    /// Columns of the low-rank covariance factor; `None` means `dim`.
    pub rank: Option<usize>,
    pub seed: u64,
    /// `None` picks a default from the feature kind.
    pub val_metric: Option<ValMetric>,
    pub reduction: Reduction,
    /// Positive-class weight for binary features; `None` derives it from the data.
    pub alpha_ber: Option<f64>,
    /// Record train/test metrics every epoch (for ablation curves).
    pub track_curves: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            dim: 256,
            dropout: 0.5,
            lambda: 1.0,
            beta: 1.0,
            alpha_logdet: 0.5,
            lr: 0.001,
            max_epochs: 2000,
            patience: 100,
            variant: Variant::Det,
            unit_norm: true,
            rank: None,
            seed: 0,
            val_metric: None,
            reduction: Reduction::Sum,
            alpha_ber: None,
            track_curves: false,
        }
    }
}

impl TrainConfig {
    pub fn rank(&self) -> usize {
        self.rank.unwrap_or(self.dim)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidInput(m));
        if self.dim == 0 {
            return bad("dim must be positive".into());
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return bad(format!("dropout {} not in [0,1)", self.dropout));
        }
        if !(self.lr > 0.0) {
            return bad(format!("learning rate must be positive, got {}", self.lr));
        }
        if self.patience == 0 {
            return bad("patience must be at least 1".into());
        }
        if !(self.beta > 0.0) {
            return bad(format!("beta must be positive, got {}", self.beta));
        }
        if !(self.alpha_logdet > 0.0) {
            return bad(format!("alpha_logdet must be positive, got {}", self.alpha_logdet));
        }
        if !(self.lambda >= 0.0) {
            return bad(format!("lambda must be non-negative, got {}", self.lambda));
        }
        if let Some(a) = self.alpha_ber {
            if !(a > 0.0 && a < 1.0) {
                return bad(format!("alpha_ber {a} not in (0,1)"));
            }
        }
        let r = self.rank();
        if r == 0 || r > self.dim {
            return bad(format!("rank {r} must be in [1, dim={}]", self.dim));
        }
        Ok(())
    }

    /// Hex SHA-256 of the canonical JSON encoding.
    pub fn hash(&self) -> String {
        content_hash(self)
    }
}

/// Hex SHA-256 of a value's JSON encoding.
pub fn content_hash<T: Serialize>(value: &T) -> String {
    let json = serde_json::to_vec(value).expect("value serializes");
    hex::encode(Sha256::digest(json))
}
