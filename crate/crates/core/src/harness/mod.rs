//! Evaluation protocol: per-class random splits, validation-tuned enhancement,
//! repeated seeds, and paired comparison against the base model.

mod curves;
mod pipeline;
mod sweep;

pub use curves::{correlation_samelabel_curve, reliability_curve, CorrelationBin, ReliabilityBin};
pub use pipeline::{seg_pipeline, SegChoice, SegOutcome};
pub use sweep::{noise_accuracy_sweep, trainsize_accuracy_sweep, SweepRow};

use std::io::Write;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::augment::{default_tau_grid, training_examples, tune_tna};
use crate::error::{Error, Result};
use crate::graph::Graph;
use crate::model::{predict, train, train_on, ModelConfig};
use crate::seeds::derive_seed;
use crate::split::Split;
use crate::topology::{apply_decision, default_grid, tune_tu, TUMode, TUThresholds, TUTuning};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ProtocolConfig {
    pub n_train_per_class: usize,
    pub n_val_per_class: usize,
    pub n_splits: usize,
    pub n_seeds: usize,
    pub master_seed: u64,
}

impl Default for ProtocolConfig {
    fn default() -> Self {
        Self {
            n_train_per_class: 20,
            n_val_per_class: 30,
            n_splits: 10,
            n_seeds: 10,
            master_seed: 0,
        }
    }
}

impl ProtocolConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_train_per_class == 0 {
            return Err(Error::config("n_train_per_class must be at least 1"));
        }
        if self.n_splits == 0 || self.n_seeds == 0 {
            return Err(Error::config("n_splits and n_seeds must be at least 1"));
        }
        Ok(())
    }

    /// Model seed for the final training of `(split, seed)`; shared by all methods.
    pub fn run_seed(&self, split: usize, seed: usize) -> u64 {
        derive_seed(self.master_seed, &[split as u64, seed as u64], "final")
    }

    fn tune_seed(&self, split: usize) -> u64 {
        derive_seed(self.master_seed, &[split as u64], "tune")
    }
}

/// `n_splits` splits, each with exactly `n_train_per_class` training and
/// `n_val_per_class` validation nodes per class; all other nodes are test.
pub fn make_splits(graph: &Graph, protocol: &ProtocolConfig) -> Result<Vec<Split>> {
    protocol.validate()?;
    let required = protocol.n_train_per_class + protocol.n_val_per_class;
    let mut members: Vec<Vec<usize>> = vec![Vec::new(); graph.num_classes()];
    for (v, &l) in graph.labels().iter().enumerate() {
        members[l].push(v);
    }
    if let Some((class, m)) = members.iter().enumerate().find(|(_, m)| m.len() < required) {
        return Err(Error::ClassTooSmall {
            class,
            available: m.len(),
            required,
        });
    }
    Ok((0..protocol.n_splits)
        .map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(protocol.master_seed, &[i as u64], "split"));
            let (mut train, mut val, mut test) = (Vec::new(), Vec::new(), Vec::new());
            for class in &members {
                let mut order = class.clone();
                order.shuffle(&mut rng);
                train.extend_from_slice(&order[..protocol.n_train_per_class]);
                val.extend_from_slice(&order[protocol.n_train_per_class..required]);
                test.extend_from_slice(&order[required..]);
            }
            train.sort_unstable();
            val.sort_unstable();
            test.sort_unstable();
            Split::new(train, val, test)
        })
        .collect())
}

/// Fraction of the base model's error removed: `(new - base) / (1 - base)`.
pub fn error_reduction(base_acc: f64, new_acc: f64) -> Result<f64> {
    if base_acc.is_nan() || base_acc >= 1.0 {
        return Err(Error::config(format!("base accuracy {base_acc} leaves no error to reduce")));
    }
    Ok((new_acc - base_acc) / (1.0 - base_acc))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "method", rename_all = "lowercase")]
pub enum Method {
    Baseline,
    Tu { mode: TUMode },
    Tna,
    Seg,
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Method::Baseline => f.write_str("baseline"),
            Method::Tu { mode } => write!(f, "tu-{mode}"),
            Method::Tna => f.write_str("tna"),
            Method::Seg => f.write_str("seg"),
        }
    }
}

/// Threshold grids and ensemble size used when tuning enhancements.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SearchSpace {
    pub delete_grid: Vec<TUThresholds>,
    pub add_grid: Vec<TUThresholds>,
    pub modify_grid: Vec<TUThresholds>,
    pub tau_grid: Vec<f64>,
    /// Proposal models for augmentation.
    pub num_models: usize,
    /// Topology modes tried by the joint pipeline, in tie-break order.
    pub seg_tu_modes: Vec<TUMode>,
}

impl Default for SearchSpace {
    fn default() -> Self {
        Self {
            delete_grid: default_grid(TUMode::Delete),
            add_grid: default_grid(TUMode::Add),
            modify_grid: default_grid(TUMode::Modify),
            tau_grid: default_tau_grid(),
            num_models: 2,
            seg_tu_modes: vec![TUMode::Delete, TUMode::Add, TUMode::Modify],
        }
    }
}

impl SearchSpace {
    pub fn grid(&self, mode: TUMode) -> &[TUThresholds] {
        match mode {
            TUMode::Delete => &self.delete_grid,
            TUMode::Add => &self.add_grid,
            TUMode::Modify => &self.modify_grid,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TuSummary {
    pub mode: TUMode,
    pub thresholds: TUThresholds,
    pub val_accuracy: f64,
    pub num_deletions: usize,
    pub num_additions: usize,
}

impl From<&TUTuning> for TuSummary {
    fn from(t: &TUTuning) -> Self {
        Self {
            mode: t.mode,
            thresholds: t.best,
            val_accuracy: t.val_accuracy,
            num_deletions: t.decision.deletions.len(),
            num_additions: t.decision.additions.len(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TnaSummary {
    pub tau_c: f64,
    pub val_accuracy: f64,
    pub num_added: usize,
    pub pseudo_label_errors: usize,
}

/// What was selected on one split.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SplitChoice {
    pub tu: Option<TuSummary>,
    pub tna: Option<TnaSummary>,
    pub seg: Option<SegChoice>,
    /// Mean validation accuracy of the final models over seeds.
    pub val_accuracy: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub mean: f64,
    pub std: f64,
}

/// Mean and sample standard deviation (0 for a single value).
pub fn summarize(xs: &[f64]) -> Summary {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let std = if xs.len() > 1 {
        (xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
    } else {
        0.0
    };
    Summary { mean, std }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PairedStats {
    pub mean_diff: f64,
    /// Standard error of the mean difference.
    pub std_error: f64,
    pub n: usize,
}

/// Statistics of `a[i] - b[i]`.
pub fn paired_difference(a: &[f64], b: &[f64]) -> Result<PairedStats> {
    if a.len() != b.len() || a.is_empty() {
        return Err(Error::DimensionMismatch(format!(
            "paired samples need equal non-zero lengths ({} vs {})",
            a.len(),
            b.len()
        )));
    }
    let diffs: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    let s = summarize(&diffs);
    Ok(PairedStats {
        mean_diff: s.mean,
        std_error: s.std / (diffs.len() as f64).sqrt(),
        n: diffs.len(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BaselineComparison {
    pub accuracies: Vec<Vec<f64>>,
    pub mean: f64,
    pub std: f64,
    pub error_reduction: Option<f64>,
    /// Over per-split means.
    pub paired: PairedStats,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub method: Method,
    pub model: ModelConfig,
    pub protocol: ProtocolConfig,
    pub search: SearchSpace,
    /// Test accuracy per split (outer) and seed (inner).
    pub accuracies: Vec<Vec<f64>>,
    /// Over all split x seed runs.
    pub mean: f64,
    pub std: f64,
    /// Per-split averages over seeds and their spread.
    pub split_means: Vec<f64>,
    pub split_std: f64,
    pub chosen: Vec<SplitChoice>,
    pub baseline: Option<BaselineComparison>,
}

impl RunReport {
    fn flat(grid: &[Vec<f64>]) -> Vec<f64> {
        grid.iter().flatten().copied().collect()
    }

    /// Recomputes `(mean, std, split_std)` from the raw grid.
    pub fn recompute(&self) -> (f64, f64, f64) {
        let all = summarize(&Self::flat(&self.accuracies));
        let split_means: Vec<f64> = self.accuracies.iter().map(|r| summarize(r).mean).collect();
        (all.mean, all.std, summarize(&split_means).std)
    }

    /// Flat `split,seed,accuracy` rows.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["split", "seed", "accuracy", "baseline_accuracy"])
            .map_err(|e| Error::Internal(e.to_string()))?;
        for (i, row) in self.accuracies.iter().enumerate() {
            for (j, acc) in row.iter().enumerate() {
                let base = self
                    .baseline
                    .as_ref()
                    .map(|b| b.accuracies[i][j].to_string())
                    .unwrap_or_default();
                w.write_record([i.to_string(), j.to_string(), acc.to_string(), base])
                    .map_err(|e| Error::Internal(e.to_string()))?;
            }
        }
        w.flush().map_err(|e| Error::Internal(e.to_string()))
    }
}

/// Serializes flat rows as CSV with a header line.
pub fn write_csv<T: Serialize, W: Write>(rows: &[T], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for row in rows {
        w.serialize(row).map_err(|e| Error::Internal(e.to_string()))?;
    }
    w.flush().map_err(|e| Error::Internal(e.to_string()))
}

fn tuning_config(base: &ModelConfig, protocol: &ProtocolConfig, split: usize) -> ModelConfig {
    base.clone().with_seed(protocol.tune_seed(split))
}

/// Validation and test accuracy of one final training run.
pub(crate) fn evaluate(
    graph: &Graph,
    examples: &[(usize, usize)],
    split: &Split,
    config: &ModelConfig,
) -> Result<(f64, f64)> {
    let model = train_on(graph, examples, config)?;
    let preds = predict(&model, graph)?;
    Ok((
        preds.accuracy(graph.labels(), &split.val),
        preds.accuracy(graph.labels(), &split.test),
    ))
}

fn baseline_row(graph: &Graph, split: &Split, base: &ModelConfig, protocol: &ProtocolConfig, i: usize) -> Result<Vec<f64>> {
    (0..protocol.n_seeds)
        .into_par_iter()
        .map(|j| {
            let model = train(graph, split, &base.clone().with_seed(protocol.run_seed(i, j)))?;
            Ok(predict(&model, graph)?.accuracy(graph.labels(), &split.test))
        })
        .collect()
}

fn run_split(
    graph: &Graph,
    split: &Split,
    method: Method,
    base: &ModelConfig,
    protocol: &ProtocolConfig,
    search: &SearchSpace,
    i: usize,
) -> Result<(Vec<f64>, SplitChoice)> {
    let tune_cfg = tuning_config(base, protocol, i);
    let swap_seed = derive_seed(protocol.master_seed, &[i as u64], "swap");
    let seeds: Vec<ModelConfig> = (0..protocol.n_seeds)
        .map(|j| base.clone().with_seed(protocol.run_seed(i, j)))
        .collect();
    let run_all = |g: &Graph, examples: &[(usize, usize)]| -> Result<Vec<(f64, f64)>> {
        seeds.par_iter().map(|cfg| evaluate(g, examples, split, cfg)).collect()
    };
    let finish = |runs: Vec<(f64, f64)>, mut choice: SplitChoice| {
        choice.val_accuracy = summarize(&runs.iter().map(|r| r.0).collect::<Vec<_>>()).mean;
        (runs.into_iter().map(|r| r.1).collect(), choice)
    };
    let base_examples = training_examples(graph, split, &Default::default());

    match method {
        Method::Baseline => Ok(finish(run_all(graph, &base_examples)?, SplitChoice::default())),
        Method::Tu { mode } => {
            let tuning = tune_tu(graph, split, &tune_cfg, mode, search.grid(mode))?;
            let updated = apply_decision(graph, &tuning.decision)?;
            let choice = SplitChoice {
                tu: Some(TuSummary::from(&tuning)),
                ..Default::default()
            };
            Ok(finish(run_all(&updated, &base_examples)?, choice))
        }
        Method::Tna => {
            let tuning = tune_tna(graph, split, &tune_cfg, search.num_models, &search.tau_grid, swap_seed)?;
            let examples = training_examples(graph, split, &tuning.augmented);
            let choice = SplitChoice {
                tna: Some(TnaSummary {
                    tau_c: tuning.best_tau,
                    val_accuracy: tuning.val_accuracy,
                    num_added: tuning.augmented.len(),
                    pseudo_label_errors: tuning.augmented.pseudo_label_errors(graph.labels()),
                }),
                ..Default::default()
            };
            Ok(finish(run_all(graph, &examples)?, choice))
        }
        Method::Seg => {
            let tu = best_tu(graph, split, &tune_cfg, search)?;
            let tna = tune_tna(graph, split, &tune_cfg, search.num_models, &search.tau_grid, swap_seed)?;
            let setups = pipeline::seg_setups(
                graph,
                split,
                &tune_cfg,
                &tu.decision,
                &tna.augmented,
                tna.best_tau,
                search.num_models,
                swap_seed,
            )?;
            let runs: Vec<Vec<(f64, f64)>> = setups
                .iter()
                .map(|(g, ex)| run_all(g, ex))
                .collect::<Result<_>>()?;
            let mean_val: Vec<f64> = runs
                .iter()
                .map(|r| summarize(&r.iter().map(|x| x.0).collect::<Vec<_>>()).mean)
                .collect();
            let pick = pipeline::argmax_first(&mean_val);
            let choice = SplitChoice {
                tu: Some(TuSummary::from(&tu)),
                tna: Some(TnaSummary {
                    tau_c: tna.best_tau,
                    val_accuracy: tna.val_accuracy,
                    num_added: tna.augmented.len(),
                    pseudo_label_errors: tna.augmented.pseudo_label_errors(graph.labels()),
                }),
                seg: Some(SegChoice::ORDER[pick]),
                ..Default::default()
            };
            Ok(finish(runs.into_iter().nth(pick).unwrap(), choice))
        }
    }
}

/// Tunes every configured topology mode and keeps the best by validation
/// accuracy, earlier modes winning ties.
pub(crate) fn best_tu(graph: &Graph, split: &Split, tune_cfg: &ModelConfig, search: &SearchSpace) -> Result<TUTuning> {
    if search.seg_tu_modes.is_empty() {
        return Err(Error::config("seg_tu_modes is empty"));
    }
    let tunings: Vec<TUTuning> = search
        .seg_tu_modes
        .iter()
        .map(|&m| tune_tu(graph, split, tune_cfg, m, search.grid(m)))
        .collect::<Result<_>>()?;
    let vals: Vec<f64> = tunings.iter().map(|t| t.val_accuracy).collect();
    Ok(tunings.into_iter().nth(pipeline::argmax_first(&vals)).unwrap())
}

/// Runs `method` over every split and seed. Non-baseline methods are paired
/// with a baseline run on the same splits and model seeds.
pub fn run_protocol(
    graph: &Graph,
    method: Method,
    model: &ModelConfig,
    protocol: &ProtocolConfig,
    search: &SearchSpace,
) -> Result<RunReport> {
    model.validate()?;
    let splits = make_splits(graph, protocol)?;
    let rows: Vec<(Vec<f64>, SplitChoice)> = splits
        .par_iter()
        .enumerate()
        .map(|(i, s)| run_split(graph, s, method, model, protocol, search, i))
        .collect::<Result<_>>()?;
    let (accuracies, chosen): (Vec<Vec<f64>>, Vec<SplitChoice>) = rows.into_iter().unzip();

    let all = summarize(&RunReport::flat(&accuracies));
    let split_means: Vec<f64> = accuracies.iter().map(|r| summarize(r).mean).collect();
    let split_std = summarize(&split_means).std;

    let baseline = if method == Method::Baseline {
        None
    } else {
        let base: Vec<Vec<f64>> = splits
            .par_iter()
            .enumerate()
            .map(|(i, s)| baseline_row(graph, s, model, protocol, i))
            .collect::<Result<_>>()?;
        let b = summarize(&RunReport::flat(&base));
        let base_means: Vec<f64> = base.iter().map(|r| summarize(r).mean).collect();
        Some(BaselineComparison {
            error_reduction: error_reduction(b.mean, all.mean).ok(),
            paired: paired_difference(&split_means, &base_means)?,
            mean: b.mean,
            std: b.std,
            accuracies: base,
        })
    };

    Ok(RunReport {
        method,
        model: model.clone(),
        protocol: protocol.clone(),
        search: search.clone(),
        accuracies,
        mean: all.mean,
        std: all.std,
        split_means,
        split_std,
        chosen,
        baseline,
    })
}
