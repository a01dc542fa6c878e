use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::PredictionMatrix;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReliabilityBin {
    pub bin: usize,
    pub lower: f64,
    pub upper: f64,
    /// Empty bins report `None`.
    pub mean_confidence: Option<f64>,
    pub accuracy: Option<f64>,
    pub count: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CorrelationBin {
    pub bin: usize,
    pub lower: f64,
    pub upper: f64,
    pub mean_correlation: Option<f64>,
    pub same_label_fraction: Option<f64>,
    pub count: usize,
}

fn bin_of(x: f64, lo: f64, hi: f64, bins: usize) -> usize {
    let t = if hi > lo { (x - lo) / (hi - lo) } else { 1.0 };
    ((t * bins as f64).floor().max(0.0) as usize).min(bins - 1)
}

fn check(preds: &PredictionMatrix, labels: &[usize], num_bins: usize) -> Result<()> {
    if num_bins == 0 {
        return Err(Error::config("num_bins must be at least 1"));
    }
    if labels.len() != preds.num_nodes() {
        return Err(Error::DimensionMismatch(format!(
            "{} labels for {} predicted nodes",
            labels.len(),
            preds.num_nodes()
        )));
    }
    Ok(())
}

/// Argmax accuracy against confidence, in equal-width bins over `[1/c, 1]`.
pub fn reliability_curve(
    preds: &PredictionMatrix,
    labels: &[usize],
    num_bins: usize,
) -> Result<Vec<ReliabilityBin>> {
    check(preds, labels, num_bins)?;
    let lo = 1.0 / preds.num_classes() as f64;
    let mut sums = vec![(0.0, 0usize, 0usize); num_bins];
    for (v, &l) in labels.iter().enumerate() {
        let np = preds.node(v);
        let b = bin_of(np.confidence, lo, 1.0, num_bins);
        sums[b].0 += np.confidence;
        sums[b].1 += usize::from(np.label == l);
        sums[b].2 += 1;
    }
    let width = (1.0 - lo) / num_bins as f64;
    Ok(sums
        .into_iter()
        .enumerate()
        .map(|(bin, (conf, correct, count))| ReliabilityBin {
            bin,
            lower: lo + bin as f64 * width,
            upper: lo + (bin + 1) as f64 * width,
            mean_confidence: (count > 0).then(|| conf / count as f64),
            accuracy: (count > 0).then(|| correct as f64 / count as f64),
            count,
        })
        .collect())
}

/// Same-label frequency against label correlation for `pair_sample`
/// uniformly drawn pairs of distinct nodes, binned over `[0, 1]`.
pub fn correlation_samelabel_curve(
    preds: &PredictionMatrix,
    labels: &[usize],
    pair_sample: usize,
    num_bins: usize,
    seed: u64,
) -> Result<Vec<CorrelationBin>> {
    check(preds, labels, num_bins)?;
    let n = preds.num_nodes();
    if n < 2 {
        return Err(Error::config("need at least two nodes to sample pairs"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut sums = vec![(0.0, 0usize, 0usize); num_bins];
    for _ in 0..pair_sample {
        let u = rng.random_range(0..n);
        let mut v = rng.random_range(0..n - 1);
        if v >= u {
            v += 1;
        }
        let corr = preds.correlation(u, v);
        let b = bin_of(corr, 0.0, 1.0, num_bins);
        sums[b].0 += corr;
        sums[b].1 += usize::from(labels[u] == labels[v]);
        sums[b].2 += 1;
    }
    let width = 1.0 / num_bins as f64;
    Ok(sums
        .into_iter()
        .enumerate()
        .map(|(bin, (corr, same, count))| CorrelationBin {
            bin,
            lower: bin as f64 * width,
            upper: (bin + 1) as f64 * width,
            mean_correlation: (count > 0).then(|| corr / count as f64),
            same_label_fraction: (count > 0).then(|| same as f64 / count as f64),
            count,
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn one_hot_correct_lands_in_top_bin() {
        let labels = vec![0, 1, 2, 1];
        let p = PredictionMatrix::one_hot(&labels, 3);
        let curve = reliability_curve(&p, &labels, 5).unwrap();
        assert_eq!(curve[4].count, 4);
        assert_eq!(curve[4].accuracy, Some(1.0));
        assert_eq!(curve.iter().map(|b| b.count).sum::<usize>(), 4);
    }

    #[test]
    fn uniform_predictions_land_in_bottom_bin() {
        let labels: Vec<usize> = (0..40).map(|v| v % 4).collect();
        let p = PredictionMatrix::uniform(40, 4);
        let curve = reliability_curve(&p, &labels, 10).unwrap();
        assert_eq!(curve[0].count, 40);
        assert_eq!(curve[0].accuracy, Some(0.25));
        assert!(curve[1..].iter().all(|b| b.accuracy.is_none()));
    }

    #[test]
    fn ground_truth_correlation_separates_labels() {
        let labels: Vec<usize> = (0..30).map(|v| v % 3).collect();
        let p = PredictionMatrix::one_hot(&labels, 3);
        let curve = correlation_samelabel_curve(&p, &labels, 500, 4, 1).unwrap();
        assert_eq!(curve.iter().map(|b| b.count).sum::<usize>(), 500);
        assert_eq!(curve[3].same_label_fraction, Some(1.0));
        assert_eq!(curve[0].same_label_fraction, Some(0.0));
    }

    #[test]
    fn zero_bins_rejected() {
        let p = PredictionMatrix::uniform(2, 2);
        assert!(reliability_curve(&p, &[0, 1], 0).is_err());
    }
}
