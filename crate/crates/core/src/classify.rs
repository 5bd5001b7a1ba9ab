//! Downstream node classification on estimated features with k-fold
//! cross-validation.

use ndarray::{Array1, Array2, ArrayView2};
use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{normalized_adjacency, Graph};
use crate::linalg::{
    add_bias, bias_backward, gather_rows, log_softmax_rows, matmul, matmul_backward, relu,
    relu_backward, CsrMatrix, DropoutMask,
};
use crate::metrics::top_k;
use crate::optim::Adam;
use crate::rng::{stream, Stream};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Classifier {
    Mlp,
    Gcn,
}

impl std::str::FromStr for Classifier {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "mlp" => Ok(Classifier::Mlp),
            "gcn" => Ok(Classifier::Gcn),
            other => Err(Error::InvalidInput(format!("unknown classifier `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ClassifierConfig {
    pub hidden: usize,
    pub dropout: f64,
    pub lr: f64,
    pub epochs: usize,
    pub folds: usize,
}

impl Default for ClassifierConfig {
    fn default() -> Self {
        Self {
            hidden: 256,
            dropout: 0.5,
            lr: 0.01,
            epochs: 200,
            folds: 5,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ClassifyResult {
    pub classifier: Classifier,
    pub mean_accuracy: f64,
    pub fold_accuracies: Vec<f64>,
}

/// Two-layer network `P·drop(relu(P·X·W1 + b1))·W2 + b2`, where `P` is the
/// normalized adjacency for the GCN and the identity for the MLP.
struct TwoLayer {
    w1: Array2<f64>,
    b1: Array1<f64>,
    w2: Array2<f64>,
    b2: Array1<f64>,
}

struct Prop<'a>(Option<&'a CsrMatrix>);

impl Prop<'_> {
    fn fwd(&self, m: Array2<f64>) -> Result<Array2<f64>> {
        match self.0 {
            Some(a) => a.mul_dense(m.view()),
            None => Ok(m),
        }
    }

    fn bwd(&self, g: Array2<f64>) -> Result<Array2<f64>> {
        match self.0 {
            Some(a) => a.tr_mul_dense(g.view()),
            None => Ok(g),
        }
    }
}

impl TwoLayer {
    fn new<R: Rng>(m: usize, h: usize, c: usize, rng: &mut R) -> Self {
        let mut glorot = |r: usize, k: usize| {
            let limit = (6.0 / (r + k) as f64).sqrt();
            Array2::from_shape_simple_fn((r, k), || rng.random_range(-limit..=limit))
        };
        Self {
            w1: glorot(m, h),
            b1: Array1::zeros(h),
            w2: glorot(h, c),
            b2: Array1::zeros(c),
        }
    }

    fn slices(&mut self) -> Vec<&mut [f64]> {
        vec![
            self.w1.as_slice_mut().unwrap(),
            self.b1.as_slice_mut().unwrap(),
            self.w2.as_slice_mut().unwrap(),
            self.b2.as_slice_mut().unwrap(),
        ]
    }

    /// Logits for all rows of `x`, plus the loss gradients on the weights
    /// for the mean cross-entropy over `train` when `targets` is given.
    fn run(
        &self,
        x: ArrayView2<f64>,
        prop: &Prop<'_>,
        mask: &DropoutMask,
        targets: Option<(&[usize], &[usize])>,
    ) -> Result<(Array2<f64>, Option<[Vec<f64>; 4]>)> {
        let pre = add_bias(prop.fwd(matmul(x, self.w1.view())?)?.view(), self.b1.view())?;
        let hidden = mask.apply(relu(pre.view()).view());
        let logits = add_bias(prop.fwd(matmul(hidden.view(), self.w2.view())?)?.view(), self.b2.view())?;
        let Some((rows, labels)) = targets else {
            return Ok((logits, None));
        };
        let mut g_logits = Array2::<f64>::zeros(logits.dim());
        let logp = log_softmax_rows(gather_rows(logits.view(), rows).view());
        let scale = 1.0 / rows.len() as f64;
        for (k, (&i, &l)) in rows.iter().zip(labels).enumerate() {
            for j in 0..logits.ncols() {
                g_logits[[i, j]] = scale * (logp[[k, j]].exp() - if j == l { 1.0 } else { 0.0 });
            }
        }
        let g_b2 = bias_backward(g_logits.view());
        let g_mixed = prop.bwd(g_logits)?;
        let (g_hidden, g_w2) = matmul_backward(hidden.view(), self.w2.view(), g_mixed.view());
        let g_pre = relu_backward(pre.view(), mask.apply(g_hidden.view()).view());
        let g_b1 = bias_backward(g_pre.view());
        let g_xw = prop.bwd(g_pre)?;
        let (_, g_w1) = matmul_backward(x, self.w1.view(), g_xw.view());
        Ok((
            logits,
            Some([g_w1.into_raw_vec_and_offset().0, g_b1.to_vec(), g_w2.into_raw_vec_and_offset().0, g_b2.to_vec()]),
        ))
    }
}

fn predict(logits: ArrayView2<f64>, rows: &[usize]) -> Vec<usize> {
    rows.iter().map(|&i| top_k(&logits.row(i).to_vec(), 1)[0]).collect()
}

/// Mean k-fold accuracy of `classifier` on features `x` (one row per
/// evaluated node) and their labels.
///
/// For the GCN, `graph` must be the subgraph induced by the evaluated nodes,
/// with node `i` matching row `i` of `x`. Folds are a seeded random
/// partition. Data with a single class is reported as not applicable.
pub fn downstream_classify(
    x: ArrayView2<f64>,
    labels: &[usize],
    graph: Option<&Graph>,
    classifier: Classifier,
    config: &ClassifierConfig,
    seed: u64,
) -> Result<ClassifyResult> {
    let n = x.nrows();
    if labels.len() != n {
        return Err(Error::shape("downstream_classify", format!("{n} labels"), labels.len()));
    }
    if config.folds < 2 || n < config.folds {
        return Err(Error::InvalidInput(format!("cannot split {n} nodes into {} folds", config.folds)));
    }
    let c = labels.iter().max().map_or(0, |&m| m + 1);
    let distinct = {
        let mut seen = vec![false; c];
        labels.iter().for_each(|&l| seen[l] = true);
        seen.iter().filter(|&&s| s).count()
    };
    if distinct < 2 {
        return Err(Error::NotApplicable("labels contain a single class".into()));
    }
    let a_hat = match (classifier, graph) {
        (Classifier::Gcn, Some(g)) if g.num_nodes() == n => Some(normalized_adjacency(g)),
        (Classifier::Gcn, _) => {
            return Err(Error::InvalidInput("gcn needs the induced subgraph of the evaluated nodes".into()))
        }
        (Classifier::Mlp, _) => None,
    };
    let prop = Prop(a_hat.as_ref());

    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut stream(seed, Stream::Folds, 0));
    let mut fold_accuracies = Vec::with_capacity(config.folds);
    for fold in 0..config.folds {
        let mut test: Vec<usize> = order.iter().copied().skip(fold).step_by(config.folds).collect();
        let mut train: Vec<usize> = order
            .iter()
            .enumerate()
            .filter(|(k, _)| k % config.folds != fold)
            .map(|(_, &i)| i)
            .collect();
        test.sort_unstable();
        train.sort_unstable();
        let train_labels: Vec<usize> = train.iter().map(|&i| labels[i]).collect();

        let mut init_rng = stream(seed, Stream::Classifier, 2 * fold as u64);
        let mut drop_rng = stream(seed, Stream::Classifier, 2 * fold as u64 + 1);
        let mut net = TwoLayer::new(x.ncols(), config.hidden, c, &mut init_rng);
        let mut adam = Adam::new(config.lr);
        for _ in 0..config.epochs {
            let mask = DropoutMask::sample((n, config.hidden), config.dropout, true, &mut drop_rng)?;
            let (_, grads) = net.run(x, &prop, &mask, Some((&train, &train_labels)))?;
            let grads = grads.expect("targets given");
            let g: Vec<&[f64]> = grads.iter().map(|v| v.as_slice()).collect();
            adam.update(&mut net.slices(), &g);
        }
        let (logits, _) = net.run(x, &prop, &DropoutMask::identity(), None)?;
        let pred = predict(logits.view(), &test);
        let hits = pred.iter().zip(&test).filter(|(p, &i)| **p == labels[i]).count();
        fold_accuracies.push(hits as f64 / test.len() as f64);
    }
    Ok(ClassifyResult {
        classifier,
        mean_accuracy: fold_accuracies.iter().sum::<f64>() / fold_accuracies.len() as f64,
        fold_accuracies,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> ClassifierConfig {
        ClassifierConfig {
            hidden: 16,
            epochs: 100,
            ..Default::default()
        }
    }

    #[test]
    fn one_hot_features_are_separable() {
        let labels: Vec<usize> = (0..60).map(|i| i % 3).collect();
        let x = Array2::from_shape_fn((60, 3), |(i, j)| if labels[i] == j { 1.0 } else { 0.0 });
        let r = downstream_classify(x.view(), &labels, None, Classifier::Mlp, &small(), 0).unwrap();
        assert_eq!(r.mean_accuracy, 1.0);
        assert_eq!(r.fold_accuracies.len(), 5);
    }

    #[test]
    fn single_class_is_not_applicable() {
        let x = Array2::<f64>::zeros((10, 2));
        let err = downstream_classify(x.view(), &[0; 10], None, Classifier::Mlp, &small(), 0).unwrap_err();
        assert!(matches!(err, Error::NotApplicable(_)));
    }

    #[test]
    fn gcn_requires_graph() {
        let x = Array2::<f64>::zeros((10, 2));
        let labels: Vec<usize> = (0..10).map(|i| i % 2).collect();
        assert!(downstream_classify(x.view(), &labels, None, Classifier::Gcn, &small(), 0).is_err());
    }
}
