//! Training node augmentation: pseudo-label unlabelled nodes on which several
//! independently trained models agree with high confidence.

use std::collections::HashSet;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::Graph;
use crate::model::{predict, train, train_on, ModelConfig, PredictionMatrix};
use crate::seeds::derive_seed;
use crate::split::Split;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AugmentedEntry {
    pub node: usize,
    pub pseudo_label: usize,
    /// Smallest confidence any contributing model gave this node.
    pub min_confidence: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct AugmentedTrainSet {
    pub entries: Vec<AugmentedEntry>,
}

impl AugmentedTrainSet {
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn class_counts(&self, num_classes: usize) -> Vec<usize> {
        let mut counts = vec![0; num_classes];
        for e in &self.entries {
            counts[e.pseudo_label] += 1;
        }
        counts
    }

    /// Entries whose pseudo-label differs from the ground truth in `labels`.
    pub fn pseudo_label_errors(&self, labels: &[usize]) -> usize {
        self.entries
            .iter()
            .filter(|e| labels[e.node] != e.pseudo_label)
            .count()
    }
}

/// `num_models` independent re-partitions of the visible set, each keeping
/// the original train size. Test sets are unchanged.
pub fn swap_train_val(split: &Split, num_models: usize, seed: u64) -> Result<Vec<Split>> {
    let visible = split.visible();
    if visible.len() < split.train.len() + 1 {
        return Err(Error::config(format!(
            "visible set of {} nodes cannot be re-partitioned around a train set of {}",
            visible.len(),
            split.train.len()
        )));
    }
    Ok((0..num_models as u64)
        .map(|l| {
            let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, &[l], "tna-swap"));
            let mut order = visible.clone();
            order.shuffle(&mut rng);
            let val = order.split_off(split.train.len());
            Split::new(order, val, split.test.clone())
        })
        .collect())
}

/// Nodes outside `train ∪ val` whose predicted label is identical across all
/// models and whose confidence is at least `tau_c` in every model.
pub fn augment(preds: &[PredictionMatrix], split: &Split, tau_c: f64) -> Result<AugmentedTrainSet> {
    let first = preds
        .first()
        .ok_or_else(|| Error::config("augmentation needs at least one model"))?;
    if let Some(p) = preds
        .iter()
        .find(|p| p.num_nodes() != first.num_nodes() || p.num_classes() != first.num_classes())
    {
        return Err(Error::DimensionMismatch(format!(
            "prediction matrices differ in shape: {}x{} vs {}x{}",
            first.num_nodes(),
            first.num_classes(),
            p.num_nodes(),
            p.num_classes()
        )));
    }
    let visible: HashSet<usize> = split.visible().into_iter().collect();
    let entries = (0..first.num_nodes())
        .filter(|v| !visible.contains(v))
        .filter_map(|v| {
            let head = first.node(v);
            let mut min_confidence = head.confidence;
            for p in &preds[1..] {
                let np = p.node(v);
                if np.label != head.label {
                    return None;
                }
                min_confidence = min_confidence.min(np.confidence);
            }
            (min_confidence >= tau_c).then_some(AugmentedEntry {
                node: v,
                pseudo_label: head.label,
                min_confidence,
            })
        })
        .collect();
    Ok(AugmentedTrainSet { entries })
}

/// Truncates every class to the size of the smallest one, keeping the most
/// confident entries (ties to the lower node id). Output is sorted by node.
pub fn class_balance(aug: &AugmentedTrainSet, num_classes: usize) -> AugmentedTrainSet {
    let mut by_class: Vec<Vec<AugmentedEntry>> = vec![Vec::new(); num_classes];
    for e in &aug.entries {
        by_class[e.pseudo_label].push(*e);
    }
    let k = by_class.iter().map(Vec::len).min().unwrap_or(0);
    let mut entries: Vec<AugmentedEntry> = by_class
        .into_iter()
        .flat_map(|mut class| {
            class.sort_by(|a, b| {
                b.min_confidence
                    .total_cmp(&a.min_confidence)
                    .then(a.node.cmp(&b.node))
            });
            class.truncate(k);
            class
        })
        .collect();
    entries.sort_by_key(|e| e.node);
    AugmentedTrainSet { entries }
}

/// Predictions of `num_models` models, each trained on its own swapped split.
pub fn proposal_predictions(
    graph: &Graph,
    split: &Split,
    base_config: &ModelConfig,
    num_models: usize,
    seed: u64,
) -> Result<Vec<PredictionMatrix>> {
    let splits = swap_train_val(split, num_models, seed)?;
    splits
        .par_iter()
        .enumerate()
        .map(|(l, s)| {
            let cfg = base_config
                .clone()
                .with_seed(derive_seed(base_config.seed, &[l as u64], "tna-proposal"));
            predict(&train(graph, s, &cfg)?, graph)
        })
        .collect()
}

/// Original training labels followed by the pseudo-labelled entries.
pub fn training_examples(graph: &Graph, split: &Split, aug: &AugmentedTrainSet) -> Vec<(usize, usize)> {
    split
        .train
        .iter()
        .map(|&v| (v, graph.label(v)))
        .chain(aug.entries.iter().map(|e| (e.node, e.pseudo_label)))
        .collect()
}

pub fn default_tau_grid() -> Vec<f64> {
    vec![1.01, 0.99, 0.95, 0.9, 0.8, 0.7, 0.6]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TNAGridPoint {
    pub tau_c: f64,
    pub val_accuracy: f64,
    pub num_added: usize,
    pub class_counts: Vec<usize>,
    /// Measured against the graph's labels, which are ground truth only on synthetic data.
    pub pseudo_label_errors: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TNATuning {
    pub best_tau: f64,
    pub val_accuracy: f64,
    pub augmented: AugmentedTrainSet,
    pub grid: Vec<TNAGridPoint>,
}

/// Validation-based selection of `tau_c`. Proposal models are trained once;
/// each grid point retrains on the original train set plus the balanced
/// pseudo-labels and is scored on the original validation set.
pub fn tune_tna(
    graph: &Graph,
    split: &Split,
    base_config: &ModelConfig,
    num_models: usize,
    tau_grid: &[f64],
    seed: u64,
) -> Result<TNATuning> {
    if tau_grid.is_empty() {
        return Err(Error::config("confidence grid is empty"));
    }
    if !tau_grid.iter().any(|&t| t > 1.0) {
        return Err(Error::config("confidence grid must contain a rejection value above 1"));
    }
    if num_models == 0 {
        return Err(Error::config("at least one proposal model is needed"));
    }
    split.validate(graph.num_nodes())?;
    if split.train.is_empty() {
        return Err(Error::EmptyTrainSet);
    }

    let preds = proposal_predictions(graph, split, base_config, num_models, seed)?;
    let retrain_cfg = base_config
        .clone()
        .with_seed(derive_seed(base_config.seed, &[], "tna-retrain"));

    let scored: Vec<(TNAGridPoint, AugmentedTrainSet)> = tau_grid
        .par_iter()
        .map(|&tau_c| {
            let aug = class_balance(&augment(&preds, split, tau_c)?, graph.num_classes());
            let model = train_on(graph, &training_examples(graph, split, &aug), &retrain_cfg)?;
            let val_accuracy = predict(&model, graph)?.accuracy(graph.labels(), &split.val);
            Ok((
                TNAGridPoint {
                    tau_c,
                    val_accuracy,
                    num_added: aug.len(),
                    class_counts: aug.class_counts(graph.num_classes()),
                    pseudo_label_errors: aug.pseudo_label_errors(graph.labels()),
                },
                aug,
            ))
        })
        .collect::<Result<_>>()?;

    let mut best = 0;
    for (i, (p, _)) in scored.iter().enumerate() {
        if p.val_accuracy > scored[best].0.val_accuracy {
            best = i;
        }
    }
    let (grid, mut sets): (Vec<TNAGridPoint>, Vec<AugmentedTrainSet>) = scored.into_iter().unzip();
    Ok(TNATuning {
        best_tau: grid[best].tau_c,
        val_accuracy: grid[best].val_accuracy,
        augmented: sets.swap_remove(best),
        grid,
    })
}
