//! Joint use of topology update and node augmentation.

use serde::{Deserialize, Serialize};

use super::evaluate;
use crate::augment::{augment, class_balance, proposal_predictions, training_examples, AugmentedTrainSet};
use crate::error::Result;
use crate::graph::Graph;
use crate::model::ModelConfig;
use crate::seeds::derive_seed;
use crate::split::Split;
use crate::topology::{apply_decision, TUDecision};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SegChoice {
    TuOnly,
    TnaOnly,
    Both,
}

impl SegChoice {
    /// Candidate order, which is also the tie-break order.
    pub const ORDER: [SegChoice; 3] = [SegChoice::TuOnly, SegChoice::TnaOnly, SegChoice::Both];
}

/// Index of the largest value; the first one wins ties.
pub(crate) fn argmax_first(xs: &[f64]) -> usize {
    let mut best = 0;
    for (i, &x) in xs.iter().enumerate() {
        if x > xs[best] {
            best = i;
        }
    }
    best
}

/// A graph with its training examples.
pub(crate) type Setup = (Graph, Vec<(usize, usize)>);

/// Graph and training examples for each entry of [`SegChoice::ORDER`].
/// The joint setup re-runs augmentation with `tau_c` on the updated graph.
#[allow(clippy::too_many_arguments)]
pub(crate) fn seg_setups(
    graph: &Graph,
    split: &Split,
    tune_config: &ModelConfig,
    tu_decision: &TUDecision,
    tna_set: &AugmentedTrainSet,
    tau_c: f64,
    num_models: usize,
    swap_seed: u64,
) -> Result<Vec<Setup>> {
    let updated = apply_decision(graph, tu_decision)?;
    let plain = training_examples(graph, split, &AugmentedTrainSet::default());
    let joint_set = if tau_c > 1.0 {
        AugmentedTrainSet::default()
    } else {
        let preds = proposal_predictions(&updated, split, tune_config, num_models, swap_seed)?;
        class_balance(&augment(&preds, split, tau_c)?, graph.num_classes())
    };
    Ok(vec![
        (updated.clone(), plain),
        (graph.clone(), training_examples(graph, split, tna_set)),
        (updated.clone(), training_examples(&updated, split, &joint_set)),
    ])
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SegOutcome {
    pub choice: SegChoice,
    /// Indexed like [`SegChoice::ORDER`].
    pub val_accuracy: [f64; 3],
    pub test_accuracy: [f64; 3],
    pub selected_test_accuracy: f64,
}

/// Trains the topology-only, augmentation-only and joint configurations with
/// one model seed and reports the test accuracy of the validation winner.
#[allow(clippy::too_many_arguments)]
pub fn seg_pipeline(
    graph: &Graph,
    split: &Split,
    config: &ModelConfig,
    tu_decision: &TUDecision,
    tna_set: &AugmentedTrainSet,
    tau_c: f64,
    num_models: usize,
    seed: u64,
) -> Result<SegOutcome> {
    let tune_config = config.clone().with_seed(derive_seed(seed, &[], "tune"));
    let final_config = config.clone().with_seed(derive_seed(seed, &[], "final"));
    let setups = seg_setups(
        graph,
        split,
        &tune_config,
        tu_decision,
        tna_set,
        tau_c,
        num_models,
        derive_seed(seed, &[], "swap"),
    )?;
    let mut val_accuracy = [0.0; 3];
    let mut test_accuracy = [0.0; 3];
    for (k, (g, examples)) in setups.iter().enumerate() {
        (val_accuracy[k], test_accuracy[k]) = evaluate(g, examples, split, &final_config)?;
    }
    let pick = argmax_first(&val_accuracy);
    Ok(SegOutcome {
        choice: SegChoice::ORDER[pick],
        val_accuracy,
        test_accuracy,
        selected_test_accuracy: test_accuracy[pick],
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn first_maximum_wins() {
        assert_eq!(argmax_first(&[0.5, 0.5, 0.5]), 0);
        assert_eq!(argmax_first(&[0.4, 0.6, 0.6]), 1);
        assert_eq!(argmax_first(&[0.4, 0.5, 0.6]), 2);
    }
}
