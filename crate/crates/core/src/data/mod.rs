//! Datasets, the three on-disk text formats, and node split protocols.

mod io;
mod split;

use std::fmt;
use std::str::FromStr;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::Graph;

pub use io::{
    load_dataset, read_edge_list, read_features, read_labels, write_edge_list, write_features,
    write_labels,
};
pub use split::{make_splits, sample_label_mask, SplitMasks, DEFAULT_RATIO};

/// Distribution family of the node features.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FeatureKind {
    Binary,
    Continuous,
    Categorical,
}

impl fmt::Display for FeatureKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            FeatureKind::Binary => "binary",
            FeatureKind::Continuous => "continuous",
            FeatureKind::Categorical => "categorical",
        })
    }
}

impl FromStr for FeatureKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "binary" => Ok(FeatureKind::Binary),
            "continuous" => Ok(FeatureKind::Continuous),
            "categorical" => Ok(FeatureKind::Categorical),
            other => Err(Error::InvalidInput(format!("unknown feature kind `{other}`"))),
        }
    }
}

/// How a feature file stores its values.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FeatureLayout {
    Dense,
    Sparse,
}

/// Dense `n × m` node features tagged with their kind.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureTable {
    pub values: Array2<f64>,
    pub kind: FeatureKind,
    /// Layout the table was read from; also the layout used when saving.
    pub layout: FeatureLayout,
}

impl FeatureTable {
    pub fn new(values: Array2<f64>, kind: FeatureKind) -> Result<Self> {
        let layout = match kind {
            FeatureKind::Continuous => FeatureLayout::Dense,
            _ => FeatureLayout::Sparse,
        };
        let table = Self {
            values,
            kind,
            layout,
        };
        table.validate()?;
        Ok(table)
    }

    pub fn rows(&self) -> usize {
        self.values.nrows()
    }

    pub fn cols(&self) -> usize {
        self.values.ncols()
    }

    /// Checks values against the kind tag.
    pub fn validate(&self) -> Result<()> {
        if self.values.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("feature table".into()));
        }
        match self.kind {
            FeatureKind::Continuous => Ok(()),
            FeatureKind::Binary => {
                if let Some(((i, j), v)) = self
                    .values
                    .indexed_iter()
                    .find(|(_, &v)| v != 0.0 && v != 1.0)
                {
                    return Err(Error::InvalidInput(format!(
                        "binary features hold {v} at ({i},{j})"
                    )));
                }
                Ok(())
            }
            FeatureKind::Categorical => {
                for (i, row) in self.values.rows().into_iter().enumerate() {
                    let ones = row.iter().filter(|&&v| v == 1.0).count();
                    if ones != 1 || row.iter().any(|&v| v != 0.0 && v != 1.0) {
                        return Err(Error::InvalidInput(format!(
                            "categorical row {i} is not one-hot"
                        )));
                    }
                }
                Ok(())
            }
        }
    }
}

/// A graph with node features and optional node labels.
#[derive(Debug, Clone)]
pub struct Dataset {
    pub name: String,
    pub graph: Graph,
    pub features: FeatureTable,
    pub labels: Option<Vec<usize>>,
}

impl Dataset {
    pub fn new(
        name: impl Into<String>,
        graph: Graph,
        features: FeatureTable,
        labels: Option<Vec<usize>>,
    ) -> Result<Self> {
        if features.rows() != graph.num_nodes() {
            return Err(Error::shape(
                "dataset",
                format!("{} feature rows", graph.num_nodes()),
                features.rows(),
            ));
        }
        if let Some(l) = &labels {
            if l.len() != graph.num_nodes() {
                return Err(Error::shape(
                    "dataset",
                    format!("{} labels", graph.num_nodes()),
                    l.len(),
                ));
            }
        }
        Ok(Self {
            name: name.into(),
            graph,
            features,
            labels,
        })
    }

    pub fn num_classes(&self) -> usize {
        self.labels
            .as_ref()
            .and_then(|l| l.iter().max().map(|&c| c + 1))
            .unwrap_or(0)
    }
}
