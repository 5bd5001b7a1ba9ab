//! Subcommand implementations.

use std::path::Path;

use serde::Serialize;
use svga_core::baselines::neigh_agg;
use svga_core::checkpoint;
use svga_core::classify::{downstream_classify, ClassifierConfig};
use svga_core::data::{load_dataset, make_splits, read_edge_list, read_features, read_labels, sample_label_mask, DEFAULT_RATIO};
use svga_core::metrics::MetricsReport;
use svga_core::scaling::{bench_inference, SubgraphMode};
use svga_core::train::{apply_link, grid_configs, predict_logits, run_ablation, run_grid, GraphOps};
use svga_core::{Dataset, Error, SplitMasks, TrainConfig, Variant};

use crate::run_dir::*;
use crate::{AblateArgs, BenchArgs, ClassifyArgs, DataArgs, EstimateArgs, EvaluateArgs, GridArgs, Method, Preset, SynthArgs, TrainArgs};

fn write_json<T: Serialize>(path: &Path, value: &T) -> CliResult<()> {
    let text = serde_json::to_string_pretty(value).expect("serializable") + "\n";
    std::fs::write(path, text).map_err(|e| Error::io(path, e)).data()
}

fn emit<T: Serialize>(out: Option<&Path>, value: &T) -> CliResult<()> {
    match out {
        Some(p) => write_json(p, value),
        None => {
            println!("{}", serde_json::to_string_pretty(value).expect("serializable"));
            Ok(())
        }
    }
}

fn create_dir(dir: &Path) -> CliResult<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e)).data()
}

fn check_config(cfg: &TrainConfig) -> CliResult<()> {
    cfg.validate().map_err(|e| usage(e.to_string()))
}

/// Loads the data and builds the split and label masks.
fn prepare(data: &DataArgs) -> CliResult<(Dataset, SplitMasks)> {
    if !(0.0..=1.0).contains(&data.label_ratio) {
        return Err(usage(format!("--label-ratio {} not in [0,1]", data.label_ratio)));
    }
    if data.label_ratio > 0.0 && data.labels.is_none() {
        return Err(usage("--label-ratio needs --labels"));
    }
    let ds = load_dataset(&data.edges, &data.features, data.labels.as_deref()).data()?;
    let n = ds.graph.num_nodes();
    let mut masks = make_splits(n, DEFAULT_RATIO, data.split_seed).data()?;
    if ds.labels.is_some() {
        masks.label_observed = sample_label_mask(n, data.label_ratio, data.split_seed).data()?;
    }
    Ok((ds, masks))
}

/// Evaluation-mode estimates of every node on the feature scale.
fn estimates_of(ds: &Dataset, params: &svga_core::ModelParams, cfg: &TrainConfig) -> CliResult<ndarray::Array2<f64>> {
    let ops = GraphOps::new(&ds.graph);
    let all: Vec<usize> = (0..ds.graph.num_nodes()).collect();
    let logits = predict_logits(params, &ops.a_hat, cfg, &all)?;
    Ok(apply_link(ds.features.kind, logits.view()))
}

fn run_report(run: &RunConfig, ds: &Dataset, masks: &SplitMasks, estimates: &ndarray::Array2<f64>) -> CliResult<MetricsReport> {
    let mut report = MetricsReport::new(&ds.name, run.train.seed, run.hash());
    let x = ds.features.values.view();
    for (name, nodes) in [("val", &masks.feat_val), ("test", &masks.feat_test)] {
        report.add_split(name, estimates.view(), x, nodes, ds.features.kind, &run.ks)?;
    }
    Ok(report)
}

pub fn train(a: TrainArgs, lambda_given: bool) -> CliResult<()> {
    let cfg = a.model.config();
    if cfg.variant == Variant::NoReg && lambda_given {
        log::warn!("--lambda is ignored by the noreg variant");
    }
    check_config(&cfg)?;
    if a.ks.contains(&0) {
        return Err(usage("--ks values must be positive"));
    }
    let (ds, masks) = prepare(&a.data)?;
    let run = RunConfig {
        edges: absolute(&a.data.edges)?,
        features: absolute(&a.data.features)?,
        labels: a.data.labels.as_deref().map(absolute).transpose()?,
        split_seed: a.data.split_seed,
        label_ratio: a.data.label_ratio,
        ks: a.ks.clone(),
        train: cfg.clone(),
    };
    create_dir(&a.out)?;
    run.write(&a.out)?;

    let outcome = svga_core::train(&ds, &masks, &cfg)?;
    checkpoint::save(&a.out.join(CHECKPOINT), &outcome.params).data()?;
    outcome.log.write_jsonl(&a.out.join(TRAINLOG)).data()?;
    let estimates = estimates_of(&ds, &outcome.params, &cfg)?;
    let report = run_report(&run, &ds, &masks, &estimates)?;
    report.write(&a.out.join(METRICS)).data()?;
    if a.write_xhat {
        let all: Vec<usize> = (0..ds.graph.num_nodes()).collect();
        write_estimates(&a.out.join(XHAT), &estimates, &all)?;
    }
    println!(
        "best epoch {} of {} ({} = {:.6}); report in {}",
        outcome.log.best_epoch,
        outcome.log.records.len(),
        outcome.val_metric,
        outcome.log.best_val,
        a.out.join(METRICS).display()
    );
    Ok(())
}

pub fn estimate(a: EstimateArgs) -> CliResult<()> {
    let (estimates, n, split_seed) = match a.method {
        Method::Svga => {
            let dir = a.run.as_deref().expect("required by clap");
            let run = RunConfig::read(dir)?;
            let ds = load_dataset(&run.edges, &run.features, run.labels.as_deref()).data()?;
            let params = checkpoint::load(&dir.join(CHECKPOINT)).data()?;
            let n = ds.graph.num_nodes();
            (estimates_of(&ds, &params, &run.train)?, n, run.split_seed)
        }
        Method::Neighagg => {
            let features = read_features(a.features.as_deref().expect("required by clap")).data()?;
            let n = features.rows();
            let graph = read_edge_list(a.edges.as_deref().expect("required by clap"), Some(n)).data()?;
            let masks = make_splits(n, DEFAULT_RATIO, a.split_seed).data()?;
            let est = neigh_agg(&graph, features.values.view(), &masks.feat_train, a.hops).map_err(usage)?;
            (est, n, a.split_seed)
        }
    };
    let nodes = select_nodes(&a.nodes, n, split_seed)?;
    write_estimates(&a.out, &estimates, &nodes)?;
    println!("wrote {} rows to {}", nodes.len(), a.out.display());
    Ok(())
}

pub fn evaluate(a: EvaluateArgs) -> CliResult<()> {
    if a.ks.contains(&0) {
        return Err(usage("--ks values must be positive"));
    }
    let report = if let Some(dir) = a.run.as_deref() {
        let run = RunConfig::read(dir)?;
        let ds = load_dataset(&run.edges, &run.features, run.labels.as_deref()).data()?;
        let masks = make_splits(ds.graph.num_nodes(), DEFAULT_RATIO, run.split_seed).data()?;
        let xhat = dir.join(XHAT);
        let estimates = if xhat.exists() {
            read_estimates(&xhat, Some(ds.graph.num_nodes()))?.0
        } else {
            let params = checkpoint::load(&dir.join(CHECKPOINT)).data()?;
            estimates_of(&ds, &params, &run.train)?
        };
        run_report(&run, &ds, &masks, &estimates)?
    } else {
        let (Some(xhat), Some(features)) = (a.xhat.as_deref(), a.features.as_deref()) else {
            return Err(usage("evaluate needs --run, or --xhat with --features"));
        };
        let truth = read_features(features).data()?;
        let n = truth.rows();
        let (estimates, covered) = read_estimates(xhat, Some(n))?;
        if estimates.ncols() != truth.cols() {
            return Err(usage(format!("estimates have {} columns, truth has {}", estimates.ncols(), truth.cols())));
        }
        let nodes = select_nodes(&a.nodes, n, a.split_seed)?;
        require_covered(&nodes, &covered, n)?;
        let name = features
            .parent()
            .and_then(|p| p.file_name())
            .map_or_else(|| "dataset".to_string(), |s| s.to_string_lossy().into_owned());
        let mut report = MetricsReport::new(name, a.split_seed, "");
        report.add_split(&a.nodes_label(), estimates.view(), truth.values.view(), &nodes, truth.kind, &a.ks)?;
        report
    };
    match a.out.as_deref() {
        Some(p) => report.write(p).data(),
        None => {
            print!("{}", report.to_json());
            Ok(())
        }
    }
}

impl EvaluateArgs {
    fn nodes_label(&self) -> String {
        match self.nodes.as_str() {
            s @ ("all" | "train" | "val" | "test") => s.to_string(),
            _ => "nodes".to_string(),
        }
    }
}

/// Number of labelled nodes in a label file.
fn count_labels(path: &Path) -> CliResult<usize> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e)).data()?;
    Ok(text.lines().filter(|l| !l.trim().is_empty() && !l.starts_with('#')).count())
}

#[derive(Serialize)]
struct ClassifyReport {
    classifier: svga_core::classify::Classifier,
    nodes: usize,
    folds: usize,
    /// `None` when the labels hold a single class.
    mean_accuracy: Option<f64>,
    fold_accuracies: Vec<f64>,
}

pub fn classify(a: ClassifyArgs) -> CliResult<()> {
    let n = count_labels(&a.labels)?;
    let labels = read_labels(&a.labels, n).data()?;
    let (estimates, covered) = read_estimates(&a.xhat, Some(n))?;
    let nodes = select_nodes(&a.nodes, n, a.split_seed)?;
    require_covered(&nodes, &covered, n)?;
    let x = svga_core::linalg::gather_rows(estimates.view(), &nodes);
    let y: Vec<usize> = nodes.iter().map(|&i| labels[i]).collect();
    let graph = match a.edges.as_deref() {
        Some(p) => Some(read_edge_list(p, Some(n)).data()?.induced_subgraph(&nodes).data()?),
        None => None,
    };
    let config = ClassifierConfig {
        folds: a.folds,
        ..Default::default()
    };
    let report = match downstream_classify(x.view(), &y, graph.as_ref(), a.classifier, &config, a.seed) {
        Ok(r) => ClassifyReport {
            classifier: a.classifier,
            nodes: nodes.len(),
            folds: a.folds,
            mean_accuracy: Some(r.mean_accuracy),
            fold_accuracies: r.fold_accuracies,
        },
        Err(Error::NotApplicable(msg)) => {
            log::warn!("classification not applicable: {msg}");
            ClassifyReport {
                classifier: a.classifier,
                nodes: nodes.len(),
                folds: a.folds,
                mean_accuracy: None,
                fold_accuracies: Vec::new(),
            }
        }
        Err(e) => return Err(e.into()),
    };
    emit(a.out.as_deref(), &report)
}

#[derive(Serialize)]
struct AblationRow {
    variant: Variant,
    seed: u64,
    best_epoch: usize,
    best_val: f64,
    train_at_best: Option<f64>,
    test_at_best: Option<f64>,
    final_train: Option<f64>,
}

pub fn ablate(a: AblateArgs) -> CliResult<()> {
    let base = a.model.config();
    check_config(&base)?;
    if a.seeds.is_empty() {
        return Err(usage("--seeds must list at least one seed"));
    }
    let (ds, masks) = prepare(&a.data)?;
    create_dir(&a.out)?;
    let mut rows = Vec::new();
    for &seed in &a.seeds {
        let cfg = TrainConfig { seed, ..base.clone() };
        let ab = run_ablation(&ds, &masks, &cfg)?;
        for variant in [Variant::Det, Variant::NoReg, Variant::Stoch] {
            let out = ab.get(variant);
            out.log
                .write_jsonl(&a.out.join(format!("trainlog_{variant}_seed{seed}.jsonl")))
                .data()?;
            let best = out.log.best();
            rows.push(AblationRow {
                variant,
                seed,
                best_epoch: out.log.best_epoch,
                best_val: out.log.best_val,
                train_at_best: best.and_then(|r| r.train_metric),
                test_at_best: best.and_then(|r| r.test_metric),
                final_train: out.log.records.last().and_then(|r| r.train_metric),
            });
        }
    }
    write_json(&a.out.join("ablation.json"), &rows)?;
    for variant in [Variant::Det, Variant::NoReg, Variant::Stoch] {
        let mine: Vec<&AblationRow> = rows.iter().filter(|r| r.variant == variant).collect();
        let mean = |f: fn(&AblationRow) -> Option<f64>| {
            mine.iter().filter_map(|r| f(r)).sum::<f64>() / mine.len() as f64
        };
        println!(
            "{variant}\ttest@best {:.4}\ttrain@best {:.4}\tfinal train {:.4}",
            mean(|r| r.test_at_best),
            mean(|r| r.train_at_best),
            mean(|r| r.final_train)
        );
    }
    Ok(())
}

pub fn grid(a: GridArgs) -> CliResult<()> {
    let base = a.model.config();
    check_config(&base)?;
    let (ds, masks) = prepare(&a.data)?;
    let configs = grid_configs(&base);
    let result = run_grid(&ds, &masks, &configs, a.workers)?;
    write_json(&a.out, &result)?;
    match result.best {
        Some(i) => {
            let e = &result.entries[i];
            println!(
                "best: dim {} dropout {} lambda {} beta {} unit_norm {} (val {:.6})",
                e.config.dim,
                e.config.dropout,
                e.config.lambda,
                e.config.beta,
                e.config.unit_norm,
                e.best_val.unwrap_or(f64::NAN)
            );
            Ok(())
        }
        None => Err(Failure {
            code: EXIT_NUMERICAL,
            error: anyhow::anyhow!("every grid configuration failed"),
        }),
    }
}

pub fn bench(a: BenchArgs) -> CliResult<()> {
    let cfg = a.model.config();
    check_config(&cfg)?;
    let features = read_features(&a.features).data()?;
    let graph = read_edge_list(&a.edges, Some(features.rows())).data()?;
    let mode = if a.induced {
        SubgraphMode::Induced
    } else {
        SubgraphMode::KeepNodes
    };
    let report = bench_inference(&graph, features.cols(), &cfg, mode, a.repeats, cfg.seed)?;
    println!("fraction\tnodes\tedges\tmean_ms\tmin_ms");
    for r in &report.rows {
        println!(
            "{:.1}\t{}\t{}\t{:.3}\t{:.3}",
            r.fraction, r.nodes, r.edges, r.mean_ms, r.min_ms
        );
    }
    println!("mean: slope {:.6e} ms/edge, R^2 {:.4}", report.fit.slope, report.fit.r2);
    println!("min:  slope {:.6e} ms/edge, R^2 {:.4}", report.fit_min.slope, report.fit_min.r2);
    if let Some(p) = a.out.as_deref() {
        write_json(p, &report)?;
    }
    Ok(())
}

pub fn synth(a: SynthArgs) -> CliResult<()> {
    use svga_core::data::{write_edge_list, write_features, write_labels};
    use svga_core::synth::{citation_like, SynthSpec};
    let spec = match a.preset {
        Preset::Small => SynthSpec::small(),
        Preset::Pubmed => SynthSpec::pubmed_shaped(),
    };
    let ds = citation_like(&spec, a.seed)?;
    create_dir(&a.out)?;
    write_edge_list(&a.out.join("edges.tsv"), &ds.graph).data()?;
    write_features(&a.out.join("features.tsv"), &ds.features).data()?;
    if let Some(l) = &ds.labels {
        write_labels(&a.out.join("labels.tsv"), l).data()?;
    }
    println!(
        "{} nodes, {} edges, {} {} features in {}",
        ds.graph.num_nodes(),
        ds.graph.num_edges(),
        ds.features.cols(),
        ds.features.kind,
        a.out.display()
    );
    Ok(())
}
