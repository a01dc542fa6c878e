//! Immutable labelled graphs, noise-ratio analytics and synthetic generators.
//!
//! A [`Graph`] is undirected and simple: edge lists are symmetrized and
//! deduplicated on construction, and the canonical edge `(u, v)` always has
//! `u <= v`. Self-loops are kept when present in the input and are counted as
//! intra-class edges by [`noise_ratio`].
//!
//! Features and labels are reference counted so topology edits
//! ([`Graph::with_edges`]) never copy the feature matrix.

use std::collections::HashSet;
use std::sync::Arc;

use ndarray::Array2;
use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone)]
pub struct Graph {
    num_classes: usize,
    edges: Vec<(usize, usize)>,
    offsets: Vec<usize>,
    neighbors: Vec<usize>,
    features: Arc<Array2<f64>>,
    labels: Arc<[usize]>,
    has_self_loops: bool,
}

impl Graph {
    /// Builds a graph from an arbitrary (possibly directed, duplicated) edge list.
    pub fn new(
        features: Array2<f64>,
        labels: Vec<usize>,
        num_classes: usize,
        edges: impl IntoIterator<Item = (usize, usize)>,
    ) -> Result<Self> {
        let n = labels.len();
        if features.nrows() != n {
            return Err(Error::DimensionMismatch(format!(
                "feature matrix has {} rows but there are {} labels",
                features.nrows(),
                n
            )));
        }
        if num_classes == 0 {
            return Err(Error::config("num_classes must be at least 1"));
        }
        if let Some(&label) = labels.iter().find(|&&l| l >= num_classes) {
            return Err(Error::LabelOutOfRange {
                context: "graph labels".into(),
                label,
                num_classes,
            });
        }
        let edges = canonical_edges(n, edges)?;
        Ok(Self::from_canonical(
            Arc::new(features),
            labels.into(),
            num_classes,
            edges,
        ))
    }

    fn from_canonical(
        features: Arc<Array2<f64>>,
        labels: Arc<[usize]>,
        num_classes: usize,
        edges: Vec<(usize, usize)>,
    ) -> Self {
        let n = labels.len();
        let mut degree = vec![0usize; n];
        let mut has_self_loops = false;
        for &(u, v) in &edges {
            degree[u] += 1;
            if u != v {
                degree[v] += 1;
            } else {
                has_self_loops = true;
            }
        }
        let mut offsets = Vec::with_capacity(n + 1);
        offsets.push(0);
        for d in &degree {
            offsets.push(offsets.last().unwrap() + d);
        }
        let mut cursor = offsets[..n].to_vec();
        let mut neighbors = vec![0usize; offsets[n]];
        for &(u, v) in &edges {
            neighbors[cursor[u]] = v;
            cursor[u] += 1;
            if u != v {
                neighbors[cursor[v]] = u;
                cursor[v] += 1;
            }
        }
        for u in 0..n {
            neighbors[offsets[u]..offsets[u + 1]].sort_unstable();
        }
        Self {
            num_classes,
            edges,
            offsets,
            neighbors,
            features,
            labels,
            has_self_loops,
        }
    }

    /// Same nodes, features and labels with a different edge set.
    pub fn with_edges(&self, edges: impl IntoIterator<Item = (usize, usize)>) -> Result<Self> {
        let edges = canonical_edges(self.num_nodes(), edges)?;
        Ok(Self::from_canonical(
            Arc::clone(&self.features),
            Arc::clone(&self.labels),
            self.num_classes,
            edges,
        ))
    }

    /// Same structure with a replacement feature matrix.
    pub fn with_features(&self, features: Array2<f64>) -> Result<Self> {
        if features.nrows() != self.num_nodes() {
            return Err(Error::DimensionMismatch(format!(
                "feature matrix has {} rows, graph has {} nodes",
                features.nrows(),
                self.num_nodes()
            )));
        }
        let mut g = self.clone();
        g.features = Arc::new(features);
        Ok(g)
    }

    /// Copy of this graph with every feature row scaled to unit L1 norm.
    /// All-zero rows are left untouched.
    pub fn row_normalized(&self) -> Self {
        let mut features = (*self.features).clone();
        for mut row in features.rows_mut() {
            let norm: f64 = row.iter().map(|x| x.abs()).sum();
            if norm > 0.0 {
                row.mapv_inplace(|x| x / norm);
            }
        }
        let mut g = self.clone();
        g.features = Arc::new(features);
        g
    }

    pub fn num_nodes(&self) -> usize {
        self.labels.len()
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    pub fn num_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn feature_dim(&self) -> usize {
        self.features.ncols()
    }

    /// Canonical edges `(u, v)` with `u <= v`, sorted lexicographically.
    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn features(&self) -> &Array2<f64> {
        &self.features
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn label(&self, v: usize) -> usize {
        self.labels[v]
    }

    pub fn has_self_loops(&self) -> bool {
        self.has_self_loops
    }

    /// Sorted neighbour list; a self-loop appears once.
    pub fn neighbors(&self, u: usize) -> &[usize] {
        &self.neighbors[self.offsets[u]..self.offsets[u + 1]]
    }

    pub fn degree(&self, u: usize) -> usize {
        self.offsets[u + 1] - self.offsets[u]
    }

    pub fn has_edge(&self, u: usize, v: usize) -> bool {
        let (a, b) = if self.degree(u) <= self.degree(v) {
            (u, v)
        } else {
            (v, u)
        };
        self.neighbors(a).binary_search(&b).is_ok()
    }

    /// Sizes of each ground-truth class.
    pub fn class_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.num_classes];
        for &l in self.labels.iter() {
            sizes[l] += 1;
        }
        sizes
    }

    pub fn is_inter_class(&self, u: usize, v: usize) -> bool {
        self.labels[u] != self.labels[v]
    }
}

fn canonical_edges(
    n: usize,
    edges: impl IntoIterator<Item = (usize, usize)>,
) -> Result<Vec<(usize, usize)>> {
    let mut out = Vec::new();
    for (u, v) in edges {
        for index in [u, v] {
            if index >= n {
                return Err(Error::NodeOutOfRange {
                    context: "edge list".into(),
                    index,
                    num_nodes: n,
                });
            }
        }
        out.push((u.min(v), u.max(v)));
    }
    out.sort_unstable();
    out.dedup();
    Ok(out)
}

/// Inter/intra-class edge counts of a labelled graph.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseReport {
    pub num_edges: usize,
    pub num_inter: usize,
    pub num_intra: usize,
    pub noise_ratio: f64,
    /// Set when the graph has no edges; `noise_ratio` is then reported as 0.
    pub no_edges: bool,
}

pub fn noise_ratio(graph: &Graph) -> NoiseReport {
    let num_inter = graph
        .edges()
        .iter()
        .filter(|&&(u, v)| graph.is_inter_class(u, v))
        .count();
    let num_edges = graph.num_edges();
    let no_edges = num_edges == 0;
    if no_edges {
        log::warn!("noise ratio requested for a graph without edges; reporting 0");
    }
    NoiseReport {
        num_edges,
        num_inter,
        num_intra: num_edges - num_inter,
        noise_ratio: if no_edges {
            0.0
        } else {
            num_inter as f64 / num_edges as f64
        },
        no_edges,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlantedPartitionSpec {
    pub n: usize,
    pub c: usize,
    pub p_intra: f64,
    pub p_inter: f64,
    pub feature_dim: usize,
    pub feature_signal: f64,
    pub seed: u64,
}

impl PlantedPartitionSpec {
    pub fn validate(&self) -> Result<()> {
        if self.c == 0 {
            return Err(Error::config("planted partition needs at least one class"));
        }
        if self.n < self.c {
            return Err(Error::config(format!(
                "planted partition needs n >= c (n = {}, c = {})",
                self.n, self.c
            )));
        }
        for (name, p) in [("p_intra", self.p_intra), ("p_inter", self.p_inter)] {
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::config(format!("{name} = {p} is not a probability")));
            }
        }
        if self.feature_dim == 0 {
            return Err(Error::config("feature_dim must be at least 1"));
        }
        if !(self.feature_signal >= 0.0 && self.feature_signal.is_finite()) {
            return Err(Error::config("feature_signal must be finite and >= 0"));
        }
        Ok(())
    }

    /// Expected noise ratio `E[inter] / E[edges]` for this spec, using exact pair counts.
    pub fn expected_noise_ratio(&self) -> f64 {
        let sizes = balanced_sizes(self.n, self.c);
        let intra_pairs: f64 = sizes.iter().map(|&s| (s * s.saturating_sub(1) / 2) as f64).sum();
        let all_pairs = (self.n * (self.n - 1) / 2) as f64;
        let inter_pairs = all_pairs - intra_pairs;
        let inter = inter_pairs * self.p_inter;
        let intra = intra_pairs * self.p_intra;
        if inter + intra == 0.0 {
            0.0
        } else {
            inter / (inter + intra)
        }
    }
}

/// Class sizes for `n` nodes split as evenly as possible over `c` classes.
pub fn balanced_sizes(n: usize, c: usize) -> Vec<usize> {
    (0..c).map(|k| (k + 1) * n / c - k * n / c).collect()
}

/// Contiguous balanced class assignment: node `i` gets class `i * c / n`.
pub fn balanced_labels(n: usize, c: usize) -> Vec<usize> {
    (0..n).map(|i| i * c / n).collect()
}

/// Samples a planted-partition graph. Class `k` has mean feature vector
/// `feature_signal * e_(k mod feature_dim)`; every entry gets unit Gaussian noise.
pub fn generate_planted_partition(spec: &PlantedPartitionSpec) -> Result<Graph> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let n = spec.n;
    let labels = balanced_labels(n, spec.c);

    let mut edges = Vec::new();
    for u in 0..n {
        for v in (u + 1)..n {
            let p = if labels[u] == labels[v] {
                spec.p_intra
            } else {
                spec.p_inter
            };
            if rng.random::<f64>() < p {
                edges.push((u, v));
            }
        }
    }

    let mut features = Array2::<f64>::zeros((n, spec.feature_dim));
    for (i, mut row) in features.rows_mut().into_iter().enumerate() {
        for x in row.iter_mut() {
            *x = rng.sample(StandardNormal);
        }
        row[labels[i] % spec.feature_dim] += spec.feature_signal;
    }

    Graph::new(features, labels, spec.c, edges)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PerturbMode {
    DeleteInter,
    AddIntra,
}

/// Ground-truth edge editing: removes `count` random inter-class edges or adds
/// `count` random intra-class non-edges.
pub fn perturb_with_ground_truth(
    graph: &Graph,
    mode: PerturbMode,
    count: usize,
    seed: u64,
) -> Result<Graph> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    match mode {
        PerturbMode::DeleteInter => {
            let inter: Vec<usize> = graph
                .edges()
                .iter()
                .enumerate()
                .filter(|(_, &(u, v))| graph.is_inter_class(u, v))
                .map(|(i, _)| i)
                .collect();
            if count > inter.len() {
                return Err(Error::PoolTooSmall {
                    requested: count,
                    pool: inter.len(),
                });
            }
            let drop: HashSet<usize> = index::sample(&mut rng, inter.len(), count)
                .into_iter()
                .map(|i| inter[i])
                .collect();
            let kept = graph
                .edges()
                .iter()
                .enumerate()
                .filter(|(i, _)| !drop.contains(i))
                .map(|(_, &e)| e);
            graph.with_edges(kept)
        }
        PerturbMode::AddIntra => {
            let added = sample_intra_non_edges(graph, count, &mut rng)?;
            graph.with_edges(graph.edges().iter().copied().chain(added))
        }
    }
}

fn sample_intra_non_edges(
    graph: &Graph,
    count: usize,
    rng: &mut ChaCha8Rng,
) -> Result<Vec<(usize, usize)>> {
    let mut members: Vec<Vec<usize>> = vec![Vec::new(); graph.num_classes()];
    for (v, &l) in graph.labels().iter().enumerate() {
        members[l].push(v);
    }
    let class_pairs: Vec<usize> = members
        .iter()
        .map(|m| m.len() * m.len().saturating_sub(1) / 2)
        .collect();
    let existing_intra = graph
        .edges()
        .iter()
        .filter(|&&(u, v)| u != v && !graph.is_inter_class(u, v))
        .count();
    let pool = class_pairs.iter().sum::<usize>() - existing_intra;
    if count > pool {
        return Err(Error::PoolTooSmall {
            requested: count,
            pool,
        });
    }
    if count == 0 {
        return Ok(Vec::new());
    }

    if count <= pool / 2 {
        // Rejection sampling: class weighted by its pair count, then a uniform pair.
        let total_pairs: usize = class_pairs.iter().sum();
        let mut chosen = HashSet::with_capacity(count);
        let mut out = Vec::with_capacity(count);
        while out.len() < count {
            let mut ticket = rng.random_range(0..total_pairs);
            let mut class = 0;
            while ticket >= class_pairs[class] {
                ticket -= class_pairs[class];
                class += 1;
            }
            let m = &members[class];
            let a = rng.random_range(0..m.len());
            let b = rng.random_range(0..m.len());
            if a == b {
                continue;
            }
            let (u, v) = (m[a].min(m[b]), m[a].max(m[b]));
            if graph.has_edge(u, v) || !chosen.insert((u, v)) {
                continue;
            }
            out.push((u, v));
        }
        Ok(out)
    } else {
        let mut eligible = Vec::with_capacity(pool);
        for m in &members {
            for (i, &u) in m.iter().enumerate() {
                for &v in &m[i + 1..] {
                    if !graph.has_edge(u, v) {
                        eligible.push((u.min(v), u.max(v)));
                    }
                }
            }
        }
        Ok(index::sample(rng, eligible.len(), count)
            .into_iter()
            .map(|i| eligible[i])
            .collect())
    }
}
