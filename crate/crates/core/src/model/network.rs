//! Forward and backward passes for SGC and the two-layer GCN.
//!
//! Loss: mean cross-entropy over the training examples plus
//! `weight_decay / 2 * ||W||²` summed over weight matrices (biases excluded),
//! so the decay contributes `weight_decay * W` to each weight gradient.

use ndarray::{Array1, Array2, Axis};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use super::adjacency::SparseOperator;
use super::ModelKind;

/// One affine layer.
#[derive(Debug, Clone, PartialEq)]
pub struct Layer {
    pub weight: Array2<f64>,
    pub bias: Array1<f64>,
}

impl Layer {
    pub fn zeros_like(&self) -> Self {
        Self {
            weight: Array2::zeros(self.weight.raw_dim()),
            bias: Array1::zeros(self.bias.raw_dim()),
        }
    }

    /// Glorot-uniform weights, zero bias.
    pub fn glorot(fan_in: usize, fan_out: usize, rng: &mut ChaCha8Rng) -> Self {
        let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
        let weight = Array2::from_shape_simple_fn((fan_in, fan_out), || {
            rng.random_range(-limit..limit)
        });
        Self {
            weight,
            bias: Array1::zeros(fan_out),
        }
    }

    pub fn num_params(&self) -> usize {
        self.weight.len() + self.bias.len()
    }
}

/// Graph-dependent inputs that stay fixed during training.
#[derive(Debug, Clone)]
pub(crate) enum Inputs {
    /// `Â^K X`.
    Sgc { propagated: Array2<f64> },
    /// `Â` and the precomputed first propagation `Â X`.
    Gcn { adj: SparseOperator, ax: Array2<f64> },
}

impl Inputs {
    pub(crate) fn build(kind: ModelKind, hops: usize, adj: SparseOperator, x: &Array2<f64>) -> Self {
        match kind {
            ModelKind::Sgc => {
                let mut propagated = x.clone();
                for _ in 0..hops {
                    propagated = adj.apply(&propagated);
                }
                Inputs::Sgc { propagated }
            }
            ModelKind::Gcn => {
                let ax = adj.apply(x);
                Inputs::Gcn { adj, ax }
            }
        }
    }
}

/// Training examples as parallel node / target vectors.
pub(crate) struct Targets<'a> {
    pub nodes: &'a [usize],
    pub labels: &'a [usize],
}

pub(crate) struct Dropout<'a> {
    pub rate: f64,
    pub rng: &'a mut ChaCha8Rng,
}

fn add_bias(mut z: Array2<f64>, bias: &Array1<f64>) -> Array2<f64> {
    z += &bias.view().insert_axis(Axis(0));
    z
}

fn gather_rows(x: &Array2<f64>, rows: &[usize]) -> Array2<f64> {
    x.select(Axis(0), rows)
}

/// Mean cross-entropy of `logits` against `labels`; returns the loss and `dL/dlogits`.
fn softmax_cross_entropy(logits: &Array2<f64>, labels: &[usize]) -> (f64, Array2<f64>) {
    let t = labels.len() as f64;
    let mut grad = logits.clone();
    let mut loss = 0.0;
    for ((mut row, z), &y) in grad.rows_mut().into_iter().zip(logits.rows()).zip(labels) {
        let max = z.fold(f64::NEG_INFINITY, |m, &x| m.max(x));
        row.mapv_inplace(|x| (x - max).exp());
        let s = row.sum();
        loss += s.ln() - (z[y] - max);
        row.mapv_inplace(|x| x / s / t);
        row[y] -= 1.0 / t;
    }
    (loss / t, grad)
}

fn decay_penalty(layers: &[Layer], weight_decay: f64) -> f64 {
    0.5 * weight_decay * layers.iter().map(|l| l.weight.iter().map(|w| w * w).sum::<f64>()).sum::<f64>()
}

/// Logits for every node with dropout disabled.
pub(crate) fn logits(kind: ModelKind, layers: &[Layer], inputs: &Inputs) -> Array2<f64> {
    match (kind, inputs) {
        (ModelKind::Sgc, Inputs::Sgc { propagated }) => {
            add_bias(propagated.dot(&layers[0].weight), &layers[0].bias)
        }
        (ModelKind::Gcn, Inputs::Gcn { adj, ax }) => {
            let h = add_bias(ax.dot(&layers[0].weight), &layers[0].bias).mapv(|x| x.max(0.0));
            add_bias(adj.apply(&h).dot(&layers[1].weight), &layers[1].bias)
        }
        _ => unreachable!("inputs built for a different model kind"),
    }
}

/// Signs of the hidden pre-activations (GCN only); `None` for models without ReLU.
pub(crate) fn relu_pattern(kind: ModelKind, layers: &[Layer], inputs: &Inputs) -> Option<Vec<bool>> {
    match (kind, inputs) {
        (ModelKind::Gcn, Inputs::Gcn { ax, .. }) => Some(
            add_bias(ax.dot(&layers[0].weight), &layers[0].bias)
                .iter()
                .map(|&x| x > 0.0)
                .collect(),
        ),
        _ => None,
    }
}

/// Training loss and gradients for every layer.
pub(crate) fn loss_and_grad(
    kind: ModelKind,
    layers: &[Layer],
    inputs: &Inputs,
    targets: &Targets<'_>,
    weight_decay: f64,
    dropout: Option<Dropout<'_>>,
) -> (f64, Vec<Layer>) {
    let penalty = decay_penalty(layers, weight_decay);
    match (kind, inputs) {
        (ModelKind::Sgc, Inputs::Sgc { propagated }) => {
            let x_t = gather_rows(propagated, targets.nodes);
            let z = add_bias(x_t.dot(&layers[0].weight), &layers[0].bias);
            let (loss, dz) = softmax_cross_entropy(&z, targets.labels);
            let mut dw = x_t.t().dot(&dz);
            dw.scaled_add(weight_decay, &layers[0].weight);
            let db = dz.sum_axis(Axis(0));
            (loss + penalty, vec![Layer { weight: dw, bias: db }])
        }
        (ModelKind::Gcn, Inputs::Gcn { adj, ax }) => {
            let (l1, l2) = (&layers[0], &layers[1]);
            let pre = add_bias(ax.dot(&l1.weight), &l1.bias);
            let mut h = pre.mapv(|x| x.max(0.0));
            let mask = dropout.map(|d| {
                let keep = 1.0 / (1.0 - d.rate);
                let mask = Array2::from_shape_simple_fn(h.raw_dim(), || {
                    if d.rng.random::<f64>() < d.rate {
                        0.0
                    } else {
                        keep
                    }
                });
                h *= &mask;
                mask
            });
            let ah_t = adj.apply_rows(&h, targets.nodes);
            let z = add_bias(ah_t.dot(&l2.weight), &l2.bias);
            let (loss, dz) = softmax_cross_entropy(&z, targets.labels);

            let mut dw2 = ah_t.t().dot(&dz);
            dw2.scaled_add(weight_decay, &l2.weight);
            let db2 = dz.sum_axis(Axis(0));

            let dah_t = dz.dot(&l2.weight.t());
            let mut dh = adj.transpose_apply_rows(&dah_t, targets.nodes);
            if let Some(mask) = &mask {
                dh *= mask;
            }
            ndarray::Zip::from(&mut dh)
                .and(&pre)
                .for_each(|g, &p| {
                    if p <= 0.0 {
                        *g = 0.0;
                    }
                });
            let mut dw1 = ax.t().dot(&dh);
            dw1.scaled_add(weight_decay, &l1.weight);
            let db1 = dh.sum_axis(Axis(0));
            (
                loss + penalty,
                vec![
                    Layer { weight: dw1, bias: db1 },
                    Layer { weight: dw2, bias: db2 },
                ],
            )
        }
        _ => unreachable!("inputs built for a different model kind"),
    }
}
