//! Trainable SGC and two-layer GCN node classifiers.
//!
//! Both models are trained full-batch with Adam on the mean cross-entropy of
//! the labelled nodes, with an L2 penalty on weight matrices. Initialization
//! is Glorot-uniform for weights and zero for biases; the GCN applies inverted
//! dropout to the hidden layer during training only. Training is a pure
//! function of `(graph, training examples, config)`.

mod adam;
mod adjacency;
mod gradcheck;
mod network;
mod prediction;

use std::sync::Arc;

use ndarray::{Array1, Array2};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

pub use adjacency::{normalized_adjacency, SparseOperator};
pub use gradcheck::{gradient_check, initial_gradients, GradientCheck};
pub use network::Layer;
pub use prediction::{confidence_and_label, NodePrediction, PredictionMatrix};

use crate::error::{Error, Result};
use crate::graph::Graph;
use crate::seeds::{derive_seed, mix};
use crate::split::Split;
use network::{Dropout, Inputs, Targets};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    Sgc,
    Gcn,
}

impl std::fmt::Display for ModelKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            ModelKind::Sgc => "sgc",
            ModelKind::Gcn => "gcn",
        })
    }
}

impl std::str::FromStr for ModelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "sgc" => Ok(ModelKind::Sgc),
            "gcn" => Ok(ModelKind::Gcn),
            other => Err(Error::config(format!("unknown model kind {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ModelConfig {
    pub kind: ModelKind,
    /// GCN hidden width.
    pub hidden_dim: usize,
    /// SGC propagation steps.
    pub hops: usize,
    /// GCN hidden-layer dropout rate.
    pub dropout: f64,
    pub learning_rate: f64,
    pub weight_decay: f64,
    pub epochs: usize,
    pub seed: u64,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            kind: ModelKind::Gcn,
            hidden_dim: 16,
            hops: 2,
            dropout: 0.5,
            learning_rate: 0.01,
            weight_decay: 5e-4,
            epochs: 400,
            seed: 0,
        }
    }
}

impl ModelConfig {
    pub fn new(kind: ModelKind) -> Self {
        Self {
            kind,
            ..Self::default()
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_epochs(mut self, epochs: usize) -> Self {
        self.epochs = epochs;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 {
            return Err(Error::config("epochs must be at least 1"));
        }
        if self.hidden_dim == 0 {
            return Err(Error::config("hidden_dim must be at least 1"));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return Err(Error::config(format!("dropout {} is outside [0, 1)", self.dropout)));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::config("learning_rate must be positive and finite"));
        }
        if !(self.weight_decay >= 0.0 && self.weight_decay.is_finite()) {
            return Err(Error::config("weight_decay must be non-negative and finite"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
struct PropagationCache {
    fingerprint: u64,
    inputs: Arc<Inputs>,
}

#[derive(Debug, Clone)]
pub struct TrainedModel {
    config: ModelConfig,
    layers: Vec<Layer>,
    loss_history: Vec<f64>,
    cache: Option<PropagationCache>,
}

impl TrainedModel {
    pub fn config(&self) -> &ModelConfig {
        &self.config
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    /// Training loss before each optimizer step.
    pub fn loss_history(&self) -> &[f64] {
        &self.loss_history
    }

    pub fn feature_dim(&self) -> usize {
        self.layers[0].weight.nrows()
    }

    pub fn num_classes(&self) -> usize {
        self.layers.last().unwrap().weight.ncols()
    }

    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string(&ModelFile::from(self)).map_err(|e| Error::Internal(e.to_string()))
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let file: ModelFile = serde_json::from_str(text)
            .map_err(|e| Error::config(format!("invalid model file: {e}")))?;
        file.try_into()
    }
}

#[derive(Serialize, Deserialize)]
struct LayerFile {
    weight: Vec<Vec<f64>>,
    bias: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct ModelFile {
    config: ModelConfig,
    layers: Vec<LayerFile>,
    #[serde(default)]
    loss_history: Vec<f64>,
}

impl From<&TrainedModel> for ModelFile {
    fn from(m: &TrainedModel) -> Self {
        Self {
            config: m.config.clone(),
            layers: m
                .layers
                .iter()
                .map(|l| LayerFile {
                    weight: l.weight.rows().into_iter().map(|r| r.to_vec()).collect(),
                    bias: l.bias.to_vec(),
                })
                .collect(),
            loss_history: m.loss_history.clone(),
        }
    }
}

impl TryFrom<ModelFile> for TrainedModel {
    type Error = Error;

    fn try_from(file: ModelFile) -> Result<Self> {
        file.config.validate()?;
        let mut layers = Vec::with_capacity(file.layers.len());
        for l in file.layers {
            let rows = l.weight.len();
            let cols = l.weight.first().map_or(0, Vec::len);
            if l.weight.iter().any(|r| r.len() != cols) || l.bias.len() != cols {
                return Err(Error::DimensionMismatch("ragged layer in model file".into()));
            }
            let weight = Array2::from_shape_vec((rows, cols), l.weight.concat())
                .map_err(|e| Error::Internal(e.to_string()))?;
            layers.push(Layer {
                weight,
                bias: Array1::from(l.bias),
            });
        }
        let expected = match file.config.kind {
            ModelKind::Sgc => 1,
            ModelKind::Gcn => 2,
        };
        if layers.len() != expected
            || layers.windows(2).any(|w| w[0].weight.ncols() != w[1].weight.nrows())
        {
            return Err(Error::DimensionMismatch(format!(
                "{} model needs {expected} chained layers",
                file.config.kind
            )));
        }
        Ok(Self {
            config: file.config,
            layers,
            loss_history: file.loss_history,
            cache: None,
        })
    }
}

fn graph_fingerprint(graph: &Graph) -> u64 {
    let mut h = mix(graph.num_nodes() as u64);
    for &(u, v) in graph.edges() {
        h = mix(h ^ ((u as u64) << 32 | v as u64));
    }
    for x in graph.features().iter() {
        h = mix(h ^ x.to_bits());
    }
    h
}

pub(crate) fn build_inputs(graph: &Graph, config: &ModelConfig) -> Inputs {
    Inputs::build(
        config.kind,
        config.hops,
        normalized_adjacency(graph),
        graph.features(),
    )
}

pub(crate) fn init_layers(config: &ModelConfig, feature_dim: usize, num_classes: usize) -> Vec<Layer> {
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(config.seed, &[], "init"));
    match config.kind {
        ModelKind::Sgc => vec![Layer::glorot(feature_dim, num_classes, &mut rng)],
        ModelKind::Gcn => vec![
            Layer::glorot(feature_dim, config.hidden_dim, &mut rng),
            Layer::glorot(config.hidden_dim, num_classes, &mut rng),
        ],
    }
}

fn check_examples(graph: &Graph, examples: &[(usize, usize)]) -> Result<()> {
    if examples.is_empty() {
        return Err(Error::EmptyTrainSet);
    }
    for &(v, l) in examples {
        if v >= graph.num_nodes() {
            return Err(Error::NodeOutOfRange {
                context: "training examples".into(),
                index: v,
                num_nodes: graph.num_nodes(),
            });
        }
        if l >= graph.num_classes() {
            return Err(Error::LabelOutOfRange {
                context: "training examples".into(),
                label: l,
                num_classes: graph.num_classes(),
            });
        }
    }
    Ok(())
}

/// Trains on the split's training nodes with their ground-truth labels.
pub fn train(graph: &Graph, split: &Split, config: &ModelConfig) -> Result<TrainedModel> {
    let examples: Vec<(usize, usize)> = split.train.iter().map(|&v| (v, graph.label(v))).collect();
    train_on(graph, &examples, config)
}

/// Trains on explicit `(node, label)` examples, which may carry pseudo-labels.
pub fn train_on(
    graph: &Graph,
    examples: &[(usize, usize)],
    config: &ModelConfig,
) -> Result<TrainedModel> {
    config.validate()?;
    check_examples(graph, examples)?;
    let (nodes, labels): (Vec<usize>, Vec<usize>) = examples.iter().copied().unzip();
    let targets = Targets {
        nodes: &nodes,
        labels: &labels,
    };

    let inputs = Arc::new(build_inputs(graph, config));
    let mut layers = init_layers(config, graph.feature_dim(), graph.num_classes());
    let mut optimizer = adam::Adam::new(config.learning_rate, &layers);
    let mut dropout_rng = ChaCha8Rng::seed_from_u64(derive_seed(config.seed, &[], "dropout"));
    let use_dropout = config.kind == ModelKind::Gcn && config.dropout > 0.0;

    let mut loss_history = Vec::with_capacity(config.epochs);
    for epoch in 0..config.epochs {
        let dropout = use_dropout.then_some(Dropout {
            rate: config.dropout,
            rng: &mut dropout_rng,
        });
        let (loss, grads) = network::loss_and_grad(
            config.kind,
            &layers,
            &inputs,
            &targets,
            config.weight_decay,
            dropout,
        );
        if !loss.is_finite() {
            return Err(Error::NonFiniteLoss { epoch });
        }
        loss_history.push(loss);
        optimizer.step(&mut layers, &grads);
    }

    Ok(TrainedModel {
        config: config.clone(),
        layers,
        loss_history,
        cache: Some(PropagationCache {
            fingerprint: graph_fingerprint(graph),
            inputs,
        }),
    })
}

/// Class distributions for every node of `graph`, dropout disabled.
pub fn predict(model: &TrainedModel, graph: &Graph) -> Result<PredictionMatrix> {
    if graph.feature_dim() != model.feature_dim() {
        return Err(Error::DimensionMismatch(format!(
            "graph has {} features, model expects {}",
            graph.feature_dim(),
            model.feature_dim()
        )));
    }
    if graph.num_classes() != model.num_classes() {
        return Err(Error::DimensionMismatch(format!(
            "graph has {} classes, model outputs {}",
            graph.num_classes(),
            model.num_classes()
        )));
    }
    let cached = model
        .cache
        .as_ref()
        .filter(|c| c.fingerprint == graph_fingerprint(graph))
        .map(|c| Arc::clone(&c.inputs));
    let inputs = cached.unwrap_or_else(|| Arc::new(build_inputs(graph, &model.config)));
    let logits = network::logits(model.config.kind, &model.layers, &inputs);
    Ok(PredictionMatrix::from_logits(logits))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{generate_planted_partition, PlantedPartitionSpec};

    fn small_graph(seed: u64) -> Graph {
        generate_planted_partition(&PlantedPartitionSpec {
            n: 60,
            c: 3,
            p_intra: 0.15,
            p_inter: 0.01,
            feature_dim: 6,
            feature_signal: 1.5,
            seed,
        })
        .unwrap()
    }

    fn split_every_third(n: usize) -> Split {
        let train: Vec<usize> = (0..n).step_by(3).collect();
        let val: Vec<usize> = (1..n).step_by(3).collect();
        let test: Vec<usize> = (2..n).step_by(3).collect();
        Split::new(train, val, test)
    }

    #[test]
    fn zero_epochs_rejected() {
        let cfg = ModelConfig::new(ModelKind::Sgc).with_epochs(0);
        assert!(cfg.validate().is_err());
        let g = small_graph(1);
        assert!(train(&g, &split_every_third(60), &cfg).is_err());
    }

    #[test]
    fn empty_train_set_rejected() {
        let g = small_graph(1);
        let split = Split::new(vec![], vec![1], vec![2]);
        assert!(matches!(
            train(&g, &split, &ModelConfig::new(ModelKind::Gcn)),
            Err(Error::EmptyTrainSet)
        ));
    }

    #[test]
    fn training_is_deterministic() {
        let g = small_graph(2);
        let split = split_every_third(60);
        for kind in [ModelKind::Sgc, ModelKind::Gcn] {
            let cfg = ModelConfig::new(kind).with_epochs(30).with_seed(9);
            let a = train(&g, &split, &cfg).unwrap();
            let b = train(&g, &split, &cfg).unwrap();
            assert_eq!(a.layers(), b.layers());
        }
    }

    #[test]
    fn biases_start_at_zero_and_shapes_match() {
        let cfg = ModelConfig::new(ModelKind::Gcn).with_seed(3);
        let layers = init_layers(&cfg, 7, 4);
        assert_eq!(layers[0].weight.dim(), (7, 16));
        assert_eq!(layers[1].weight.dim(), (16, 4));
        assert!(layers.iter().all(|l| l.bias.iter().all(|&b| b == 0.0)));
        let limit = (6.0f64 / 23.0).sqrt();
        assert!(layers[0].weight.iter().all(|w| w.abs() <= limit));
    }

    #[test]
    fn predict_rows_are_distributions() {
        let g = small_graph(4);
        let split = split_every_third(60);
        let model = train(&g, &split, &ModelConfig::new(ModelKind::Gcn).with_epochs(20)).unwrap();
        let p = predict(&model, &g).unwrap();
        assert_eq!(p.values().dim(), (60, 3));
        for row in p.values().rows() {
            assert!((row.sum() - 1.0).abs() < 1e-9);
            assert!(row.iter().all(|&x| x >= 0.0));
        }
    }

    #[test]
    fn predict_rejects_dimension_mismatch() {
        let g = small_graph(4);
        let model = train(&g, &split_every_third(60), &ModelConfig::new(ModelKind::Sgc).with_epochs(5)).unwrap();
        let other = g.with_features(Array2::zeros((60, 2))).unwrap();
        assert!(matches!(predict(&model, &other), Err(Error::DimensionMismatch(_))));
    }

    #[test]
    fn cached_and_fresh_propagation_agree() {
        let g = small_graph(6);
        let model = train(&g, &split_every_third(60), &ModelConfig::new(ModelKind::Sgc).with_epochs(10)).unwrap();
        let cached = predict(&model, &g).unwrap();
        let reloaded = TrainedModel::from_json(&model.to_json().unwrap()).unwrap();
        let fresh = predict(&reloaded, &g).unwrap();
        assert_eq!(cached, fresh);
    }

    #[test]
    fn json_round_trip_is_exact() {
        let g = small_graph(7);
        let model = train(&g, &split_every_third(60), &ModelConfig::new(ModelKind::Gcn).with_epochs(10)).unwrap();
        let back = TrainedModel::from_json(&model.to_json().unwrap()).unwrap();
        assert_eq!(back.layers(), model.layers());
        assert_eq!(back.config(), model.config());
    }

    #[test]
    fn labels_outside_training_set_do_not_matter() {
        let g = small_graph(8);
        let split = split_every_third(60);
        let mut labels = g.labels().to_vec();
        for &v in split.val.iter().chain(&split.test) {
            labels[v] = (labels[v] + 1) % 3;
        }
        let relabelled = Graph::new(g.features().clone(), labels, 3, g.edges().iter().copied()).unwrap();
        for kind in [ModelKind::Sgc, ModelKind::Gcn] {
            let cfg = ModelConfig::new(kind).with_epochs(25).with_seed(1);
            let a = train(&g, &split, &cfg).unwrap();
            let b = train(&relabelled, &split, &cfg).unwrap();
            assert_eq!(a.layers(), b.layers());
        }
    }

    #[test]
    fn sgc_loss_decreases() {
        let g = small_graph(10);
        let model = train(&g, &split_every_third(60), &ModelConfig::new(ModelKind::Sgc).with_epochs(60)).unwrap();
        let h = model.loss_history();
        assert!(h.last().unwrap() < h.first().unwrap());
    }
}
