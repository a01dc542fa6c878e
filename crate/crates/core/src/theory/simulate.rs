use std::collections::HashSet;

use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{
    addition_threshold, check_c, check_unit, expected_noise_after_deletion, gamma_from_beta,
    keep_prob_inter, keep_prob_intra, tna_accuracy_q,
};
use crate::error::{Error, Result};
use crate::graph::{balanced_labels, Graph};
use crate::seeds::derive_seed;

fn wrong_class(truth: usize, c: usize, rng: &mut ChaCha8Rng) -> usize {
    let k = rng.random_range(0..c - 1);
    if k >= truth {
        k + 1
    } else {
        k
    }
}

fn symmetric_draws(labels: &[usize], p: f64, c: usize, rng: &mut ChaCha8Rng) -> Vec<usize> {
    labels
        .iter()
        .map(|&l| {
            if rng.random::<f64>() < p {
                l
            } else {
                wrong_class(l, c, rng)
            }
        })
        .collect()
}

fn check_labels(labels: &[usize], c: usize) -> Result<()> {
    check_c(c)?;
    if let Some(&label) = labels.iter().find(|&&l| l >= c) {
        return Err(Error::LabelOutOfRange {
            context: "simulated labels".into(),
            label,
            num_classes: c,
        });
    }
    Ok(())
}

/// Independent per-node predictions: right with probability `p`, otherwise
/// uniform over the `c - 1` wrong classes.
pub fn simulate_symmetric_classifier(labels: &[usize], p: f64, c: usize, seed: u64) -> Result<Vec<usize>> {
    check_labels(labels, c)?;
    check_unit("p", p)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok(symmetric_draws(labels, p, c, &mut rng))
}

/// Two correlated symmetric classifiers. The second is right with probability
/// `beta` when the first is right and `gamma` when it is wrong; its wrong
/// answers are uniform over the wrong classes.
pub fn simulate_correlated_pair(
    labels: &[usize],
    p: f64,
    beta: f64,
    c: usize,
    seed: u64,
) -> Result<(Vec<usize>, Vec<usize>)> {
    check_labels(labels, c)?;
    check_unit("p", p)?;
    let gamma = if p == 1.0 { 0.0 } else { gamma_from_beta(p, beta)? };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let first = symmetric_draws(labels, p, c, &mut rng);
    let second = labels
        .iter()
        .zip(&first)
        .map(|(&l, &r1)| {
            let right = if r1 == l { beta } else { gamma };
            if rng.random::<f64>() < right {
                l
            } else {
                wrong_class(l, c, &mut rng)
            }
        })
        .collect();
    Ok((first, second))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TnaEstimate {
    pub q: f64,
    pub agreed: u64,
    pub correct: u64,
    /// Binomial standard error of `q` given the number of agreeing nodes.
    pub sigma: f64,
}

/// Fraction of nodes on which two correlated models agree whose shared label
/// is right, pooled over `trials` independent draws.
pub fn empirical_tna_accuracy(
    labels: &[usize],
    p: f64,
    beta: f64,
    c: usize,
    trials: usize,
    seed: u64,
) -> Result<TnaEstimate> {
    let counts: Vec<(u64, u64)> = (0..trials as u64)
        .into_par_iter()
        .map(|t| {
            let (a, b) = simulate_correlated_pair(labels, p, beta, c, derive_seed(seed, &[t], "tna-trial"))?;
            let mut agreed = 0;
            let mut correct = 0;
            for ((&x, &y), &l) in a.iter().zip(&b).zip(labels) {
                if x == y {
                    agreed += 1;
                    correct += u64::from(x == l);
                }
            }
            Ok((agreed, correct))
        })
        .collect::<Result<_>>()?;
    let agreed: u64 = counts.iter().map(|c| c.0).sum();
    let correct: u64 = counts.iter().map(|c| c.1).sum();
    if agreed == 0 {
        return Err(Error::config("the simulated models never agreed"));
    }
    let q = correct as f64 / agreed as f64;
    Ok(TnaEstimate {
        q,
        agreed,
        correct,
        sigma: (q * (1.0 - q) / agreed as f64).sqrt(),
    })
}

/// Balanced labels and exactly `round(alpha * m)` inter-class edges among `m`
/// distinct non-loop edges, sampled uniformly within each type. Features are
/// a single zero column.
pub fn exact_noise_graph(n: usize, c: usize, m: usize, alpha: f64, seed: u64) -> Result<Graph> {
    check_c(c)?;
    check_unit("alpha", alpha)?;
    if n < c {
        return Err(Error::config(format!("need n >= c (n = {n}, c = {c})")));
    }
    let labels = balanced_labels(n, c);
    let mut members: Vec<Vec<usize>> = vec![Vec::new(); c];
    for (v, &l) in labels.iter().enumerate() {
        members[l].push(v);
    }
    let intra_pool: usize = members.iter().map(|m| m.len() * (m.len() - 1) / 2).sum();
    let inter_pool = n * (n - 1) / 2 - intra_pool;
    let m_inter = (alpha * m as f64).round() as usize;
    let m_intra = m - m_inter;
    // Rejection sampling stays cheap while each pool is at most half used.
    if 2 * m_inter > inter_pool || 2 * m_intra > intra_pool {
        return Err(Error::PoolTooSmall {
            requested: m,
            pool: (inter_pool + intra_pool) / 2,
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut edges: HashSet<(usize, usize)> = HashSet::with_capacity(m);
    let mut inter = 0;
    while inter < m_inter {
        let u = rng.random_range(0..n);
        let v = rng.random_range(0..n);
        if labels[u] != labels[v] && edges.insert((u.min(v), u.max(v))) {
            inter += 1;
        }
    }
    let mut intra = 0;
    while intra < m_intra {
        let u = rng.random_range(0..n);
        let v = rng.random_range(0..n);
        if u != v && labels[u] == labels[v] && edges.insert((u.min(v), u.max(v))) {
            intra += 1;
        }
    }
    let mut edges: Vec<_> = edges.into_iter().collect();
    edges.sort_unstable();
    Graph::new(Array2::zeros((n, 1)), labels, c, edges)
}

fn edge_counts(graph: &Graph) -> (usize, usize) {
    let inter = graph
        .edges()
        .iter()
        .filter(|&&(u, v)| graph.is_inter_class(u, v))
        .count();
    (inter, graph.num_edges() - inter)
}

/// Noise ratio after keeping only edges whose endpoints share a prediction.
/// `None` when no edge survives.
pub fn simulate_deletion(graph: &Graph, predictions: &[usize]) -> Option<f64> {
    let mut kept = 0usize;
    let mut kept_inter = 0usize;
    for &(u, v) in graph.edges() {
        if predictions[u] == predictions[v] {
            kept += 1;
            kept_inter += usize::from(graph.is_inter_class(u, v));
        }
    }
    (kept > 0).then(|| kept_inter as f64 / kept as f64)
}

/// Noise ratio after joining every non-adjacent pair in `V x V` with equal
/// predictions, self-pairs included (a self-loop counts as intra-class).
/// Runs in `O(n + m)` by counting pairs per predicted class.
pub fn simulate_addition(graph: &Graph, predictions: &[usize]) -> f64 {
    let c = graph.num_classes();
    let n = graph.num_nodes();
    // cell[k][l]: nodes predicted k with true label l.
    let mut cell = vec![vec![0u64; c]; c];
    for v in 0..n {
        cell[predictions[v]][graph.label(v)] += 1;
    }
    let mut same_pairs = 0u64;
    let mut all_pairs = 0u64;
    for row in &cell {
        let total: u64 = row.iter().sum();
        all_pairs += total * total.saturating_sub(1) / 2;
        same_pairs += row.iter().map(|&x| x * x.saturating_sub(1) / 2).sum::<u64>();
    }
    let mut existing_intra = 0u64;
    let mut existing_inter = 0u64;
    let mut existing_loops = 0u64;
    for &(u, v) in graph.edges() {
        if predictions[u] != predictions[v] {
            continue;
        }
        if u == v {
            existing_loops += 1;
        } else if graph.is_inter_class(u, v) {
            existing_inter += 1;
        } else {
            existing_intra += 1;
        }
    }
    let added_intra = same_pairs - existing_intra + (n as u64 - existing_loops);
    let added_inter = (all_pairs - same_pairs) - existing_inter;
    let (inter, _) = edge_counts(graph);
    let total = graph.num_edges() as u64 + added_intra + added_inter;
    (inter as u64 + added_inter) as f64 / total as f64
}

/// Ratio of expected counts for [`simulate_addition`] under symmetric error.
pub fn expected_noise_after_addition(graph: &Graph, p: f64) -> Result<f64> {
    let c = graph.num_classes();
    let pa = keep_prob_intra(p, c)?;
    let pr = keep_prob_inter(p, c)?;
    let n = graph.num_nodes() as f64;
    let intra_pairs: f64 = graph
        .class_sizes()
        .iter()
        .map(|&s| (s * s.saturating_sub(1) / 2) as f64)
        .sum();
    let inter_pairs = n * (n - 1.0) / 2.0 - intra_pairs;
    let loops = graph.edges().iter().filter(|&&(u, v)| u == v).count() as f64;
    let (m_inter, m_intra_all) = edge_counts(graph);
    let m_intra = m_intra_all as f64 - loops;
    let added_inter = (inter_pairs - m_inter as f64) * pr;
    let added_intra = (intra_pairs - m_intra) * pa + (n - loops);
    Ok((m_inter as f64 + added_inter) / (graph.num_edges() as f64 + added_inter + added_intra))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrialSummary {
    pub mean: f64,
    pub std: f64,
    /// Standard error of the mean.
    pub sigma: f64,
    pub trials: usize,
}

impl TrialSummary {
    fn from_samples(xs: &[f64]) -> Self {
        let t = xs.len() as f64;
        let mean = xs.iter().sum::<f64>() / t;
        let var = if xs.len() > 1 {
            xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (t - 1.0)
        } else {
            0.0
        };
        Self {
            mean,
            std: var.sqrt(),
            sigma: (var / t).sqrt(),
            trials: xs.len(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MonteCarloCheck {
    pub closed_form: f64,
    pub monte_carlo: f64,
    pub sigma: f64,
    pub pass: bool,
}

impl MonteCarloCheck {
    /// Passes when the estimate lies within three standard errors of the closed form.
    pub fn new(closed_form: f64, monte_carlo: f64, sigma: f64) -> Self {
        Self {
            closed_form,
            monte_carlo,
            sigma,
            pass: (monte_carlo - closed_form).abs() <= 3.0 * sigma + 1e-12,
        }
    }
}

fn check_trials(trials: usize) -> Result<()> {
    if trials < 2 {
        return Err(Error::config("at least two trials are needed for an error estimate"));
    }
    Ok(())
}

/// Deletion under simulated symmetric error on a fresh exact-noise graph.
pub fn check_deletion(
    alpha: f64,
    p: f64,
    c: usize,
    n: usize,
    m: usize,
    trials: usize,
    seed: u64,
) -> Result<MonteCarloCheck> {
    check_trials(trials)?;
    let graph = exact_noise_graph(n, c, m, alpha, derive_seed(seed, &[], "graph"))?;
    let closed_form = expected_noise_after_deletion(graph_alpha(&graph), p, c)?;
    let ratios: Vec<f64> = (0..trials as u64)
        .into_par_iter()
        .map(|t| {
            let preds = simulate_symmetric_classifier(graph.labels(), p, c, derive_seed(seed, &[t], "deletion-trial"))?;
            simulate_deletion(&graph, &preds)
                .ok_or_else(|| Error::config("a deletion trial removed every edge"))
        })
        .collect::<Result<_>>()?;
    let s = TrialSummary::from_samples(&ratios);
    Ok(MonteCarloCheck::new(closed_form, s.mean, s.sigma))
}

fn graph_alpha(graph: &Graph) -> f64 {
    edge_counts(graph).0 as f64 / graph.num_edges() as f64
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdditionCheck {
    #[serde(flatten)]
    pub check: MonteCarloCheck,
    pub alpha: f64,
    pub lambda: f64,
    pub threshold: f64,
    pub above_threshold: bool,
    /// Mean noise after addition plus three standard errors stays below `alpha`.
    pub reduces_noise: bool,
}

/// Addition under simulated symmetric error on a fresh exact-noise graph.
/// `lambda` is `m / n²` with `m` the undirected edge count.
pub fn check_addition(
    alpha: f64,
    p: f64,
    c: usize,
    n: usize,
    m: usize,
    trials: usize,
    seed: u64,
) -> Result<AdditionCheck> {
    check_trials(trials)?;
    let graph = exact_noise_graph(n, c, m, alpha, derive_seed(seed, &[], "graph"))?;
    let alpha = graph_alpha(&graph);
    let lambda = m as f64 / (n as f64 * n as f64);
    let threshold = addition_threshold(alpha, c, lambda)?.exact;
    let closed_form = expected_noise_after_addition(&graph, p)?;
    let ratios: Vec<f64> = (0..trials as u64)
        .into_par_iter()
        .map(|t| {
            let preds = simulate_symmetric_classifier(graph.labels(), p, c, derive_seed(seed, &[t], "addition-trial"))?;
            Ok(simulate_addition(&graph, &preds))
        })
        .collect::<Result<_>>()?;
    let s = TrialSummary::from_samples(&ratios);
    Ok(AdditionCheck {
        check: MonteCarloCheck::new(closed_form, s.mean, s.sigma),
        alpha,
        lambda,
        threshold,
        above_threshold: p > threshold,
        reduces_noise: s.mean + 3.0 * s.sigma < alpha,
    })
}

/// Agreement accuracy of two correlated simulated models over `samples` nodes
/// with balanced labels.
pub fn check_tna(p: f64, beta: f64, c: usize, samples: usize, seed: u64) -> Result<MonteCarloCheck> {
    const CHUNK: usize = 100_000;
    let closed_form = tna_accuracy_q(p, beta, c)?;
    let n = samples.clamp(c, CHUNK);
    let trials = samples.div_ceil(n).max(1);
    let labels = balanced_labels(n, c);
    let est = empirical_tna_accuracy(&labels, p, beta, c, trials, seed)?;
    Ok(MonteCarloCheck::new(closed_form, est.q, est.sigma))
}
