//! Run-directory layout, node selections and exit-code mapping.

use std::fmt::Display;
use std::path::{Path, PathBuf};

use ndarray::Array2;
use serde::{Deserialize, Serialize};
use svga_core::config::content_hash;
use svga_core::data::{make_splits, read_features, write_features, DEFAULT_RATIO};
use svga_core::{Error, FeatureKind, FeatureTable, TrainConfig};

pub const CONFIG: &str = "config.json";
pub const CHECKPOINT: &str = "checkpoint.bin";
pub const TRAINLOG: &str = "trainlog.jsonl";
pub const METRICS: &str = "metrics.json";
pub const XHAT: &str = "xhat.tsv";

pub const EXIT_USAGE: u8 = 2;
pub const EXIT_DATA: u8 = 3;
pub const EXIT_NUMERICAL: u8 = 4;

/// An error with the process exit code it maps to.
#[derive(Debug)]
pub struct Failure {
    pub code: u8,
    pub error: anyhow::Error,
}

pub type CliResult<T> = std::result::Result<T, Failure>;

pub fn usage(msg: impl Display) -> Failure {
    Failure {
        code: EXIT_USAGE,
        error: anyhow::anyhow!("{msg}"),
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match &e {
            _ if e.is_numerical() => EXIT_NUMERICAL,
            Error::InvalidInput(_) | Error::NotApplicable(_) => EXIT_USAGE,
            _ => EXIT_DATA,
        };
        Failure {
            code,
            error: e.into(),
        }
    }
}

pub trait DataContext<T> {
    /// Reports any failure as a data error.
    fn data(self) -> CliResult<T>;
}

impl<T> DataContext<T> for svga_core::Result<T> {
    fn data(self) -> CliResult<T> {
        self.map_err(|e| Failure {
            code: EXIT_DATA,
            error: e.into(),
        })
    }
}

/// Everything needed to reproduce a run, written before training starts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub edges: PathBuf,
    pub features: PathBuf,
    pub labels: Option<PathBuf>,
    pub split_seed: u64,
    pub label_ratio: f64,
    pub ks: Vec<usize>,
    pub train: TrainConfig,
}

impl RunConfig {
    pub fn hash(&self) -> String {
        content_hash(self)
    }

    pub fn write(&self, dir: &Path) -> CliResult<()> {
        let mut value = serde_json::to_value(self).expect("config serializes");
        value["hash"] = serde_json::Value::String(self.hash());
        let text = serde_json::to_string_pretty(&value).expect("value serializes") + "\n";
        let path = dir.join(CONFIG);
        std::fs::write(&path, text).map_err(|e| Error::io(&path, e)).data()
    }

    pub fn read(dir: &Path) -> CliResult<Self> {
        let path = dir.join(CONFIG);
        let text = std::fs::read_to_string(&path).map_err(|e| Error::io(&path, e)).data()?;
        serde_json::from_str(&text).map_err(|e| Failure {
            code: EXIT_DATA,
            error: anyhow::anyhow!("{}: {e}", path.display()),
        })
    }
}

pub fn absolute(p: &Path) -> CliResult<PathBuf> {
    std::fs::canonicalize(p).map_err(|e| Error::io(p, e)).data()
}

/// Resolves `all`, `train`, `val`, `test` or a file of node ids.
pub fn select_nodes(spec: &str, n: usize, split_seed: u64) -> CliResult<Vec<usize>> {
    let split = || make_splits(n, DEFAULT_RATIO, split_seed).data();
    let nodes = match spec {
        "all" => (0..n).collect(),
        "train" => split()?.feat_train,
        "val" => split()?.feat_val,
        "test" => split()?.feat_test,
        path => read_ids(Path::new(path))?,
    };
    if let Some(&bad) = nodes.iter().find(|&&i| i >= n) {
        return Err(usage(format!("node {bad} out of range for {n} nodes")));
    }
    Ok(nodes)
}

pub fn ids_path(xhat: &Path) -> PathBuf {
    let mut s = xhat.as_os_str().to_owned();
    s.push(".ids");
    PathBuf::from(s)
}

pub fn read_ids(path: &Path) -> CliResult<Vec<usize>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e)).data()?;
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty() && !l.starts_with('#'))
        .map(|(no, l)| {
            l.trim().parse().map_err(|_| Failure {
                code: EXIT_DATA,
                error: anyhow::anyhow!("{}:{}: bad node id `{l}`", path.display(), no + 1),
            })
        })
        .collect()
}

/// Writes the rows of `nodes`; when they are not `0..n` in order, the ids
/// go to the `.ids` sidecar.
pub fn write_estimates(path: &Path, estimates: &Array2<f64>, nodes: &[usize]) -> CliResult<()> {
    let all = nodes.len() == estimates.nrows() && nodes.iter().enumerate().all(|(k, &i)| k == i);
    let rows = svga_core::linalg::gather_rows(estimates.view(), nodes);
    let table = FeatureTable::new(rows, FeatureKind::Continuous).data()?;
    write_features(path, &table).data()?;
    let sidecar = ids_path(path);
    if all {
        if sidecar.exists() {
            std::fs::remove_file(&sidecar).map_err(|e| Error::io(&sidecar, e)).data()?;
        }
    } else {
        let text: String = nodes.iter().map(|i| format!("{i}\n")).collect();
        std::fs::write(&sidecar, text).map_err(|e| Error::io(&sidecar, e)).data()?;
    }
    Ok(())
}

/// Reads an estimate file into an `n`-row matrix; also returns which rows
/// it covered.
pub fn read_estimates(path: &Path, n: Option<usize>) -> CliResult<(Array2<f64>, Vec<usize>)> {
    let table = read_features(path).data()?;
    let sidecar = ids_path(path);
    if !sidecar.exists() {
        if let Some(n) = n {
            if n != table.rows() {
                return Err(usage(format!("estimates have {} rows, expected {n}", table.rows())));
            }
        }
        let ids = (0..table.rows()).collect();
        return Ok((table.values, ids));
    }
    let ids = read_ids(&sidecar)?;
    if ids.len() != table.rows() {
        return Err(usage(format!("{} lists {} ids for {} rows", sidecar.display(), ids.len(), table.rows())));
    }
    let n = n.unwrap_or_else(|| ids.iter().max().map_or(0, |&m| m + 1));
    let mut full = Array2::zeros((n, table.cols()));
    for (row, &i) in table.values.rows().into_iter().zip(&ids) {
        if i >= n {
            return Err(usage(format!("node {i} out of range for {n} nodes")));
        }
        full.row_mut(i).assign(&row);
    }
    Ok((full, ids))
}

/// Checks that every node of `wanted` has an estimate.
pub fn require_covered(wanted: &[usize], covered: &[usize], n: usize) -> CliResult<()> {
    let mut have = vec![false; n];
    covered.iter().for_each(|&i| have[i] = true);
    match wanted.iter().find(|&&i| !have[i]) {
        Some(i) => Err(usage(format!("no estimate for node {i}"))),
        None => Ok(()),
    }
}
