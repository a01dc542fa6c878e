use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Disjoint train / validation / test node sets.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Split {
    pub train: Vec<usize>,
    pub val: Vec<usize>,
    pub test: Vec<usize>,
}

impl Split {
    pub fn new(train: Vec<usize>, val: Vec<usize>, test: Vec<usize>) -> Self {
        Self { train, val, test }
    }

    /// Checks disjointness and that every index is below `num_nodes`.
    pub fn validate(&self, num_nodes: usize) -> Result<()> {
        let mut seen = HashSet::with_capacity(self.train.len() + self.val.len() + self.test.len());
        for (name, set) in [("train", &self.train), ("val", &self.val), ("test", &self.test)] {
            for &v in set {
                if v >= num_nodes {
                    return Err(Error::NodeOutOfRange {
                        context: format!("{name} split"),
                        index: v,
                        num_nodes,
                    });
                }
                if !seen.insert(v) {
                    return Err(Error::config(format!(
                        "node {v} appears more than once across the split"
                    )));
                }
            }
        }
        Ok(())
    }

    /// The visible set `train ∪ val`, in train-then-val order.
    pub fn visible(&self) -> Vec<usize> {
        self.train.iter().chain(&self.val).copied().collect()
    }
}
