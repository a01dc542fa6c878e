//! Model-guided topology update: delete edges whose endpoints are predicted to
//! disagree, add edges between confidently agreeing nodes, or both.
//!
//! Rejection settings are exact: `tau_d <= 0` never deletes and `tau_a >= 1`
//! never adds, whatever the predictions look like.

use std::collections::{HashMap, HashSet};

use ndarray::Array1;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{noise_ratio, Graph};
use crate::model::{predict, train, ModelConfig, PredictionMatrix};
use crate::seeds::derive_seed;
use crate::split::Split;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EdgeScore {
    pub u: usize,
    pub v: usize,
    pub correlation: f64,
}

impl EdgeScore {
    fn pair(&self) -> (usize, usize) {
        (self.u, self.v)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TUMode {
    Delete,
    Add,
    Modify,
}

impl std::str::FromStr for TUMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "delete" => Ok(TUMode::Delete),
            "add" => Ok(TUMode::Add),
            "modify" => Ok(TUMode::Modify),
            other => Err(Error::config(format!("unknown topology mode {other:?}"))),
        }
    }
}

impl std::fmt::Display for TUMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            TUMode::Delete => "delete",
            TUMode::Add => "add",
            TUMode::Modify => "modify",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TUThresholds {
    pub tau_d: f64,
    pub tau_a: f64,
    /// Cap on committed additions as a multiple of the original edge count.
    pub max_added_ratio: f64,
    /// Bound on the candidate pool as a multiple of the original edge count;
    /// used to size `topk` when it is not given.
    pub candidate_pool_ratio: f64,
    pub topk: Option<usize>,
}

impl Default for TUThresholds {
    fn default() -> Self {
        Self::rejection()
    }
}

impl TUThresholds {
    pub fn new(tau_d: f64, tau_a: f64) -> Self {
        Self {
            tau_d,
            tau_a,
            max_added_ratio: 2.0,
            candidate_pool_ratio: 4.0,
            topk: None,
        }
    }

    pub fn rejection() -> Self {
        Self::new(0.0, 1.0)
    }

    pub fn is_rejection(&self) -> bool {
        self.tau_d <= 0.0 && self.tau_a >= 1.0
    }

    pub fn validate(&self) -> Result<()> {
        for (name, x) in [("tau_d", self.tau_d), ("tau_a", self.tau_a)] {
            if !(0.0..=1.0).contains(&x) {
                return Err(Error::config(format!("{name} = {x} is outside [0, 1]")));
            }
        }
        if !(0.0..).contains(&self.max_added_ratio) || !(0.0..).contains(&self.candidate_pool_ratio) {
            return Err(Error::config("edge caps must be non-negative"));
        }
        if self.topk == Some(0) {
            return Err(Error::config("topk must be at least 1"));
        }
        Ok(())
    }

    /// Candidates per node: explicit `topk`, else `candidate_pool_ratio * m / n`, at least 1.
    pub fn effective_topk(&self, graph: &Graph) -> usize {
        self.topk.unwrap_or_else(|| {
            let n = graph.num_nodes().max(1) as f64;
            ((self.candidate_pool_ratio * graph.num_edges() as f64 / n).floor() as usize).max(1)
        })
    }

    fn addition_cap(&self, graph: &Graph) -> usize {
        (self.max_added_ratio * graph.num_edges() as f64).floor() as usize
    }
}

/// Default grids; each starts with the rejection point.
pub fn default_grid(mode: TUMode) -> Vec<TUThresholds> {
    match mode {
        TUMode::Delete => [0.0, 0.05, 0.1, 0.2, 0.3, 0.5]
            .iter()
            .map(|&d| TUThresholds::new(d, 1.0))
            .collect(),
        TUMode::Add => [1.0, 0.99, 0.95, 0.9, 0.8]
            .iter()
            .map(|&a| TUThresholds::new(0.0, a))
            .collect(),
        TUMode::Modify => std::iter::once(TUThresholds::rejection())
            .chain(
                [0.05, 0.1, 0.2, 0.3, 0.5]
                    .iter()
                    .map(|&d| TUThresholds::new(d, 0.0)),
            )
            .collect(),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TUDecision {
    pub num_nodes: usize,
    pub base_edges: usize,
    pub deletions: Vec<EdgeScore>,
    pub additions: Vec<EdgeScore>,
    /// Modify only: deletions that found no addition to pair with.
    pub addition_shortfall: usize,
}

impl TUDecision {
    pub fn empty(graph: &Graph) -> Self {
        Self {
            num_nodes: graph.num_nodes(),
            base_edges: graph.num_edges(),
            deletions: Vec::new(),
            additions: Vec::new(),
            addition_shortfall: 0,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.deletions.is_empty() && self.additions.is_empty()
    }
}

fn check_aligned(graph: &Graph, preds: &PredictionMatrix) -> Result<()> {
    if preds.num_nodes() != graph.num_nodes() || preds.num_classes() != graph.num_classes() {
        return Err(Error::DimensionMismatch(format!(
            "predictions are {}x{}, graph has {} nodes and {} classes",
            preds.num_nodes(),
            preds.num_classes(),
            graph.num_nodes(),
            graph.num_classes()
        )));
    }
    Ok(())
}

pub fn label_correlation(preds: &PredictionMatrix, u: usize, v: usize) -> f64 {
    preds.correlation(u, v)
}

fn deletion_set(graph: &Graph, preds: &PredictionMatrix, tau_d: f64) -> Vec<EdgeScore> {
    if tau_d <= 0.0 {
        return Vec::new();
    }
    let labels: Vec<usize> = (0..graph.num_nodes()).map(|v| preds.argmax(v)).collect();
    graph
        .edges()
        .iter()
        .filter(|&&(u, v)| u != v && labels[u] != labels[v])
        .map(|&(u, v)| EdgeScore {
            u,
            v,
            correlation: preds.correlation(u, v),
        })
        .filter(|e| e.correlation <= tau_d)
        .collect()
}

/// Removes edges whose endpoints have different predicted labels and label
/// correlation at most `tau_d`. Self-loops are never removed.
pub fn delete_edges(
    graph: &Graph,
    preds: &PredictionMatrix,
    thresholds: &TUThresholds,
) -> Result<(Graph, TUDecision)> {
    check_aligned(graph, preds)?;
    let decision = TUDecision {
        deletions: deletion_set(graph, preds, thresholds.tau_d),
        ..TUDecision::empty(graph)
    };
    Ok((apply_decision(graph, &decision)?, decision))
}

fn better(a: &(f64, usize), b: &(f64, usize)) -> std::cmp::Ordering {
    b.0.total_cmp(&a.0).then(a.1.cmp(&b.1))
}

/// For every node, the `topk` non-adjacent nodes of largest label correlation
/// (exact search, ties to the lower index). Unordered pairs are returned once,
/// sorted by decreasing correlation then by pair.
pub fn topk_addition_candidates(
    preds: &PredictionMatrix,
    graph: &Graph,
    topk: usize,
) -> Result<Vec<EdgeScore>> {
    check_aligned(graph, preds)?;
    if topk == 0 {
        return Err(Error::config("topk must be at least 1"));
    }
    let values = preds.values();
    let n = graph.num_nodes();
    let per_node: Vec<Vec<EdgeScore>> = (0..n)
        .into_par_iter()
        .map(|u| {
            let scores: Array1<f64> = values.dot(&values.row(u));
            let neighbors = graph.neighbors(u);
            let mut cands: Vec<(f64, usize)> = scores
                .iter()
                .enumerate()
                .filter(|&(v, _)| v != u && neighbors.binary_search(&v).is_err())
                .map(|(v, &s)| (s, v))
                .collect();
            if cands.len() > topk {
                cands.select_nth_unstable_by(topk - 1, better);
                cands.truncate(topk);
            }
            cands
                .into_iter()
                .map(|(s, v)| EdgeScore {
                    u: u.min(v),
                    v: u.max(v),
                    correlation: s,
                })
                .collect()
        })
        .collect();
    let mut out: Vec<EdgeScore> = per_node.into_iter().flatten().collect();
    out.sort_by_key(EdgeScore::pair);
    out.dedup_by(|a, b| a.pair() == b.pair());
    sort_by_correlation(&mut out);
    Ok(out)
}

fn sort_by_correlation(edges: &mut [EdgeScore]) {
    edges.sort_by(|a, b| {
        b.correlation
            .total_cmp(&a.correlation)
            .then(a.pair().cmp(&b.pair()))
    });
}

/// Candidates joining nodes with equal predicted labels, best first.
fn eligible_additions(
    graph: &Graph,
    preds: &PredictionMatrix,
    thresholds: &TUThresholds,
    tau_a: f64,
) -> Result<Vec<EdgeScore>> {
    let candidates = topk_addition_candidates(preds, graph, thresholds.effective_topk(graph))?;
    Ok(candidates
        .into_iter()
        .filter(|e| preds.argmax(e.u) == preds.argmax(e.v) && e.correlation >= tau_a)
        .collect())
}

/// Adds non-edges whose endpoints share a predicted label and have label
/// correlation at least `tau_a`, best first, up to `max_added_ratio * m`.
pub fn add_edges(
    graph: &Graph,
    preds: &PredictionMatrix,
    thresholds: &TUThresholds,
) -> Result<(Graph, TUDecision)> {
    check_aligned(graph, preds)?;
    if thresholds.tau_a >= 1.0 {
        return Ok((graph.clone(), TUDecision::empty(graph)));
    }
    let mut additions = eligible_additions(graph, preds, thresholds, thresholds.tau_a)?;
    additions.truncate(thresholds.addition_cap(graph));
    let decision = TUDecision {
        additions,
        ..TUDecision::empty(graph)
    };
    Ok((apply_decision(graph, &decision)?, decision))
}

/// Deletes with `tau_d`, then adds as many edges as were deleted, best first.
/// `tau_a` still filters the additions; a grid using `tau_a = 0` lets the
/// budget alone decide.
pub fn modify(
    graph: &Graph,
    preds: &PredictionMatrix,
    thresholds: &TUThresholds,
) -> Result<(Graph, TUDecision)> {
    check_aligned(graph, preds)?;
    let deletions = deletion_set(graph, preds, thresholds.tau_d);
    let budget = deletions.len().min(thresholds.addition_cap(graph));
    let additions = if budget == 0 || thresholds.tau_a >= 1.0 {
        Vec::new()
    } else {
        let deleted: HashSet<(usize, usize)> = deletions.iter().map(EdgeScore::pair).collect();
        eligible_additions(graph, preds, thresholds, thresholds.tau_a)?
            .into_iter()
            .filter(|e| !deleted.contains(&e.pair()))
            .take(budget)
            .collect()
    };
    let decision = TUDecision {
        addition_shortfall: deletions.len() - additions.len(),
        deletions,
        additions,
        ..TUDecision::empty(graph)
    };
    Ok((apply_decision(graph, &decision)?, decision))
}

pub fn decide(
    mode: TUMode,
    graph: &Graph,
    preds: &PredictionMatrix,
    thresholds: &TUThresholds,
) -> Result<TUDecision> {
    let (_, d) = match mode {
        TUMode::Delete => delete_edges(graph, preds, thresholds)?,
        TUMode::Add => add_edges(graph, preds, thresholds)?,
        TUMode::Modify => modify(graph, preds, thresholds)?,
    };
    Ok(d)
}

fn intersect(a: &[EdgeScore], b: &[EdgeScore]) -> Vec<EdgeScore> {
    let other: HashMap<(usize, usize), f64> = b.iter().map(|e| (e.pair(), e.correlation)).collect();
    a.iter()
        .filter_map(|e| {
            other.get(&e.pair()).map(|&c| EdgeScore {
                correlation: e.correlation.min(c),
                ..*e
            })
        })
        .collect()
}

/// Keeps only the edits both decisions agree on; correlations become the minimum.
pub fn dual_model_intersection(d1: &TUDecision, d2: &TUDecision) -> Result<TUDecision> {
    if d1.num_nodes != d2.num_nodes || d1.base_edges != d2.base_edges {
        return Err(Error::DimensionMismatch(format!(
            "decisions were made on different graphs ({} nodes / {} edges vs {} / {})",
            d1.num_nodes, d1.base_edges, d2.num_nodes, d2.base_edges
        )));
    }
    Ok(TUDecision {
        num_nodes: d1.num_nodes,
        base_edges: d1.base_edges,
        deletions: intersect(&d1.deletions, &d2.deletions),
        additions: intersect(&d1.additions, &d2.additions),
        addition_shortfall: 0,
    })
}

pub fn apply_decision(graph: &Graph, decision: &TUDecision) -> Result<Graph> {
    if decision.num_nodes != graph.num_nodes() {
        return Err(Error::DimensionMismatch(format!(
            "decision is for {} nodes, graph has {}",
            decision.num_nodes,
            graph.num_nodes()
        )));
    }
    if decision.is_empty() {
        return Ok(graph.clone());
    }
    let removed: HashSet<(usize, usize)> = decision.deletions.iter().map(EdgeScore::pair).collect();
    let kept = graph.edges().iter().copied().filter(|e| !removed.contains(e));
    graph.with_edges(kept.chain(decision.additions.iter().map(EdgeScore::pair)))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TUGridPoint {
    pub thresholds: TUThresholds,
    pub val_accuracy: f64,
    pub num_deletions: usize,
    pub num_additions: usize,
    pub noise_before: f64,
    pub noise_after: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TUTuning {
    pub mode: TUMode,
    pub best: TUThresholds,
    pub val_accuracy: f64,
    pub decision: TUDecision,
    pub grid: Vec<TUGridPoint>,
}

/// Validation-based threshold selection with a single proposal model.
pub fn tune_tu(
    graph: &Graph,
    split: &Split,
    base_config: &ModelConfig,
    mode: TUMode,
    grid: &[TUThresholds],
) -> Result<TUTuning> {
    tune_tu_ensemble(graph, split, base_config, mode, grid, 1)
}

/// As [`tune_tu`], but each grid point's decision is the intersection of the
/// decisions of `num_proposals` independently seeded proposal models.
pub fn tune_tu_ensemble(
    graph: &Graph,
    split: &Split,
    base_config: &ModelConfig,
    mode: TUMode,
    grid: &[TUThresholds],
    num_proposals: usize,
) -> Result<TUTuning> {
    if grid.is_empty() {
        return Err(Error::config("threshold grid is empty"));
    }
    if !grid.iter().any(TUThresholds::is_rejection) {
        return Err(Error::config(
            "threshold grid must contain the rejection setting (tau_d = 0, tau_a = 1)",
        ));
    }
    if num_proposals == 0 {
        return Err(Error::config("at least one proposal model is needed"));
    }
    for t in grid {
        t.validate()?;
    }
    split.validate(graph.num_nodes())?;

    let proposals: Vec<PredictionMatrix> = (0..num_proposals as u64)
        .into_par_iter()
        .map(|i| {
            let cfg = base_config
                .clone()
                .with_seed(derive_seed(base_config.seed, &[i], "tu-proposal"));
            predict(&train(graph, split, &cfg)?, graph)
        })
        .collect::<Result<_>>()?;
    let retrain_cfg = base_config
        .clone()
        .with_seed(derive_seed(base_config.seed, &[], "tu-retrain"));
    let noise_before = noise_ratio(graph).noise_ratio;

    let scored: Vec<(TUGridPoint, TUDecision)> = grid
        .par_iter()
        .map(|t| {
            let mut decision = decide(mode, graph, &proposals[0], t)?;
            for p in &proposals[1..] {
                decision = dual_model_intersection(&decision, &decide(mode, graph, p, t)?)?;
            }
            let updated = apply_decision(graph, &decision)?;
            let model = train(&updated, split, &retrain_cfg)?;
            let val_accuracy = predict(&model, &updated)?.accuracy(graph.labels(), &split.val);
            Ok((
                TUGridPoint {
                    thresholds: *t,
                    val_accuracy,
                    num_deletions: decision.deletions.len(),
                    num_additions: decision.additions.len(),
                    noise_before,
                    noise_after: noise_ratio(&updated).noise_ratio,
                },
                decision,
            ))
        })
        .collect::<Result<_>>()?;

    let mut best = 0;
    for (i, (p, _)) in scored.iter().enumerate() {
        if p.val_accuracy > scored[best].0.val_accuracy {
            best = i;
        }
    }
    let (grid, mut decisions): (Vec<TUGridPoint>, Vec<TUDecision>) = scored.into_iter().unzip();
    Ok(TUTuning {
        mode,
        best: grid[best].thresholds,
        val_accuracy: grid[best].val_accuracy,
        decision: decisions.swap_remove(best),
        grid,
    })
}
