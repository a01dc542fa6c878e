use ndarray::{Array2, ArrayView1, Axis};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Row-stochastic `n x c` matrix of per-node class distributions.
#[derive(Debug, Clone, PartialEq)]
pub struct PredictionMatrix {
    values: Array2<f64>,
}

/// Confidence (row max) and predicted label (row argmax) of one node.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NodePrediction {
    pub confidence: f64,
    pub label: usize,
}

const ROW_SUM_TOLERANCE: f64 = 1e-9;

impl PredictionMatrix {
    pub fn new(values: Array2<f64>) -> Result<Self> {
        for (i, row) in values.rows().into_iter().enumerate() {
            if row.iter().any(|&x| x < 0.0 || !x.is_finite()) {
                return Err(Error::config(format!("prediction row {i} has a negative or non-finite entry")));
            }
            let s: f64 = row.sum();
            if (s - 1.0).abs() > ROW_SUM_TOLERANCE {
                return Err(Error::config(format!("prediction row {i} sums to {s}")));
            }
        }
        Ok(Self { values })
    }

    /// Row-wise softmax of a logit matrix.
    pub fn from_logits(mut logits: Array2<f64>) -> Self {
        for mut row in logits.rows_mut() {
            let max = row.fold(f64::NEG_INFINITY, |m, &x| m.max(x));
            row.mapv_inplace(|x| (x - max).exp());
            let s = row.sum();
            row.mapv_inplace(|x| x / s);
        }
        Self { values: logits }
    }

    pub fn one_hot(labels: &[usize], num_classes: usize) -> Self {
        let mut values = Array2::zeros((labels.len(), num_classes));
        for (i, &l) in labels.iter().enumerate() {
            values[[i, l]] = 1.0;
        }
        Self { values }
    }

    pub fn uniform(num_nodes: usize, num_classes: usize) -> Self {
        Self {
            values: Array2::from_elem((num_nodes, num_classes), 1.0 / num_classes as f64),
        }
    }

    pub fn num_nodes(&self) -> usize {
        self.values.nrows()
    }

    pub fn num_classes(&self) -> usize {
        self.values.ncols()
    }

    pub fn values(&self) -> &Array2<f64> {
        &self.values
    }

    pub fn row(&self, v: usize) -> ArrayView1<'_, f64> {
        self.values.row(v)
    }

    /// Confidence and label of node `v`; ties go to the lowest class index.
    pub fn node(&self, v: usize) -> NodePrediction {
        let mut best = NodePrediction {
            confidence: f64::NEG_INFINITY,
            label: 0,
        };
        for (k, &x) in self.values.row(v).iter().enumerate() {
            if x > best.confidence {
                best = NodePrediction {
                    confidence: x,
                    label: k,
                };
            }
        }
        best
    }

    pub fn argmax(&self, v: usize) -> usize {
        self.node(v).label
    }

    /// Rows of `nodes`, in the given order.
    pub fn select(&self, nodes: &[usize]) -> Self {
        Self {
            values: self.values.select(Axis(0), nodes),
        }
    }

    /// Inner product of the class distributions of `u` and `v`.
    pub fn correlation(&self, u: usize, v: usize) -> f64 {
        self.values.row(u).dot(&self.values.row(v))
    }

    /// Fraction of `nodes` whose argmax equals `labels[node]`. Empty input gives 0.
    pub fn accuracy(&self, labels: &[usize], nodes: &[usize]) -> f64 {
        if nodes.is_empty() {
            return 0.0;
        }
        let correct = nodes
            .iter()
            .filter(|&&v| self.argmax(v) == labels[v])
            .count();
        correct as f64 / nodes.len() as f64
    }
}

pub fn confidence_and_label(preds: &PredictionMatrix) -> Vec<NodePrediction> {
    (0..preds.num_nodes()).map(|v| preds.node(v)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::arr2;

    #[test]
    fn max_and_argmax() {
        let p = PredictionMatrix::new(arr2(&[[0.1, 0.7, 0.2], [0.25, 0.25, 0.5]])).unwrap();
        let out = confidence_and_label(&p);
        assert_eq!(out[0], NodePrediction { confidence: 0.7, label: 1 });
        assert_eq!(out[1].label, 2);
    }

    #[test]
    fn ties_take_lowest_index() {
        let u = PredictionMatrix::uniform(1, 4);
        assert_eq!(u.node(0), NodePrediction { confidence: 0.25, label: 0 });
        let half = PredictionMatrix::new(arr2(&[[0.5, 0.5]])).unwrap();
        assert_eq!(half.node(0), NodePrediction { confidence: 0.5, label: 0 });
    }

    #[test]
    fn softmax_of_constant_logits_is_uniform() {
        let p = PredictionMatrix::from_logits(Array2::from_elem((2, 5), 3.7));
        for x in p.values().iter() {
            assert_eq!(*x, 0.2);
        }
    }

    #[test]
    fn softmax_rows_sum_to_one_for_extreme_logits() {
        let p = PredictionMatrix::from_logits(arr2(&[[1e3, -1e3, 0.0], [-50.0, 20.0, 19.9]]));
        for row in p.values().rows() {
            assert!((row.sum() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn invalid_rows_rejected() {
        assert!(PredictionMatrix::new(arr2(&[[0.5, 0.6]])).is_err());
        assert!(PredictionMatrix::new(arr2(&[[1.5, -0.5]])).is_err());
    }
}
