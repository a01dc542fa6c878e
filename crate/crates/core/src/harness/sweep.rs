use serde::{Deserialize, Serialize};

use super::{run_protocol, Method, ProtocolConfig, SearchSpace};
use crate::error::{Error, Result};
use crate::graph::{noise_ratio, perturb_with_ground_truth, Graph, PerturbMode};
use crate::model::ModelConfig;
use crate::seeds::derive_seed;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    /// Edit fraction for noise sweeps, training nodes per class for size sweeps.
    pub x: f64,
    pub noise_ratio: f64,
    pub num_edges: usize,
    pub mean: f64,
    pub std: f64,
    pub split_std: f64,
}

fn intra_pool(graph: &Graph) -> usize {
    let pairs: usize = graph
        .class_sizes()
        .iter()
        .map(|&s| s * s.saturating_sub(1) / 2)
        .sum();
    let existing = graph
        .edges()
        .iter()
        .filter(|&&(u, v)| u != v && !graph.is_inter_class(u, v))
        .count();
    pairs - existing
}

/// Base-model accuracy after ground-truth edge edits. For `DeleteInter` a
/// fraction `f` removes `round(f * inter)` inter-class edges; for `AddIntra`
/// it adds `round(f * m)` intra-class edges, capped by the available pairs.
pub fn noise_accuracy_sweep(
    graph: &Graph,
    model: &ModelConfig,
    mode: PerturbMode,
    fractions: &[f64],
    protocol: &ProtocolConfig,
) -> Result<Vec<SweepRow>> {
    if fractions.is_empty() {
        return Err(Error::config("no fractions to sweep"));
    }
    let before = noise_ratio(graph);
    fractions
        .iter()
        .enumerate()
        .map(|(i, &f)| {
            if !(0.0..=1.0).contains(&f) {
                return Err(Error::config(format!("fraction {f} is outside [0, 1]")));
            }
            let count = match mode {
                PerturbMode::DeleteInter => (f * before.num_inter as f64).round() as usize,
                PerturbMode::AddIntra => ((f * before.num_edges as f64).round() as usize).min(intra_pool(graph)),
            };
            let seed = derive_seed(protocol.master_seed, &[i as u64], "perturb");
            let g = perturb_with_ground_truth(graph, mode, count, seed)?;
            let report = run_protocol(&g, Method::Baseline, model, protocol, &SearchSpace::default())?;
            Ok(SweepRow {
                x: f,
                noise_ratio: noise_ratio(&g).noise_ratio,
                num_edges: g.num_edges(),
                mean: report.mean,
                std: report.std,
                split_std: report.split_std,
            })
        })
        .collect()
}

/// Base-model accuracy as the number of training nodes per class varies.
pub fn trainsize_accuracy_sweep(
    graph: &Graph,
    model: &ModelConfig,
    sizes: &[usize],
    protocol: &ProtocolConfig,
) -> Result<Vec<SweepRow>> {
    if sizes.is_empty() {
        return Err(Error::config("no training sizes to sweep"));
    }
    let noise = noise_ratio(graph);
    sizes
        .iter()
        .map(|&size| {
            let p = ProtocolConfig {
                n_train_per_class: size,
                ..protocol.clone()
            };
            let report = run_protocol(graph, Method::Baseline, model, &p, &SearchSpace::default())?;
            Ok(SweepRow {
                x: size as f64,
                noise_ratio: noise.noise_ratio,
                num_edges: noise.num_edges,
                mean: report.mean,
                std: report.std,
                split_std: report.split_std,
            })
        })
        .collect()
}
