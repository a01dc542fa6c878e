use super::network::{self, Layer, Targets};
use super::{build_inputs, init_layers, ModelConfig};
use crate::error::{Error, Result};
use crate::graph::Graph;
use crate::split::Split;

fn prepare(graph: &Graph, split: &Split, config: &ModelConfig) -> Result<(ModelConfig, Vec<usize>)> {
    let mut config = config.clone();
    config.dropout = 0.0;
    config.validate()?;
    if split.train.is_empty() {
        return Err(Error::EmptyTrainSet);
    }
    let labels = split.train.iter().map(|&v| graph.label(v)).collect();
    Ok((config, labels))
}

/// Analytic gradients of the training loss at the initial parameters, dropout off.
pub fn initial_gradients(graph: &Graph, split: &Split, config: &ModelConfig) -> Result<Vec<Layer>> {
    let (config, labels) = prepare(graph, split, config)?;
    let inputs = build_inputs(graph, &config);
    let layers = init_layers(&config, graph.feature_dim(), graph.num_classes());
    let targets = Targets {
        nodes: &split.train,
        labels: &labels,
    };
    Ok(network::loss_and_grad(config.kind, &layers, &inputs, &targets, config.weight_decay, None).1)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GradientCheck {
    /// Largest `|g_a - g_fd| / max(1e-8, |g_a| + |g_fd|)` over compared parameters.
    pub max_rel_error: f64,
    pub compared: usize,
    /// Parameters whose ±epsilon perturbation flips a ReLU; the loss is not
    /// differentiable across the flip, so they are left out.
    pub skipped_at_kinks: usize,
}

/// Compares analytic gradients with central finite differences over every
/// parameter, at the initial parameters with dropout disabled.
pub fn gradient_check(
    graph: &Graph,
    split: &Split,
    config: &ModelConfig,
    epsilon: f64,
) -> Result<GradientCheck> {
    let (config, labels) = prepare(graph, split, config)?;
    let inputs = build_inputs(graph, &config);
    let mut layers = init_layers(&config, graph.feature_dim(), graph.num_classes());
    let targets = Targets {
        nodes: &split.train,
        labels: &labels,
    };
    let analytic = network::loss_and_grad(config.kind, &layers, &inputs, &targets, config.weight_decay, None).1;
    let mut report = GradientCheck {
        max_rel_error: 0.0,
        compared: 0,
        skipped_at_kinks: 0,
    };

    // Central difference of the loss along one parameter, or `None` at a kink.
    let probe = |layers: &mut Vec<Layer>, get: &dyn Fn(&mut Vec<Layer>) -> &mut f64| -> Option<f64> {
        let orig = *get(layers);
        *get(layers) = orig + epsilon;
        let plus = network::loss_and_grad(config.kind, layers, &inputs, &targets, config.weight_decay, None).0;
        let pattern_plus = network::relu_pattern(config.kind, layers, &inputs);
        *get(layers) = orig - epsilon;
        let minus = network::loss_and_grad(config.kind, layers, &inputs, &targets, config.weight_decay, None).0;
        let pattern_minus = network::relu_pattern(config.kind, layers, &inputs);
        *get(layers) = orig;
        (pattern_plus == pattern_minus).then(|| (plus - minus) / (2.0 * epsilon))
    };
    let mut compare = |ga: f64, fd: Option<f64>| match fd {
        Some(fd) => {
            let rel = (ga - fd).abs() / (ga.abs() + fd.abs()).max(1e-8);
            report.max_rel_error = report.max_rel_error.max(rel);
            report.compared += 1;
        }
        None => report.skipped_at_kinks += 1,
    };
    for li in 0..layers.len() {
        let (rows, cols) = layers[li].weight.dim();
        for r in 0..rows {
            for c in 0..cols {
                let fd = probe(&mut layers, &|l: &mut Vec<Layer>| &mut l[li].weight[[r, c]]);
                compare(analytic[li].weight[[r, c]], fd);
            }
        }
        for k in 0..layers[li].bias.len() {
            let fd = probe(&mut layers, &|l: &mut Vec<Layer>| &mut l[li].bias[k]);
            compare(analytic[li].bias[k], fd);
        }
    }
    Ok(report)
}
