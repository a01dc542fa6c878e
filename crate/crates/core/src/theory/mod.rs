//! Closed-form noise and pseudo-label accuracy quantities under the symmetric
//! error model, plus Monte Carlo simulators to check them.
//!
//! Notation: `p` classifier accuracy, `c` classes, `alpha` noise ratio,
//! `beta` probability that a second model is right given the first is right,
//! `lambda = m / n²` edge density.

mod simulate;

pub use simulate::{
    check_addition, check_deletion, check_tna, empirical_tna_accuracy, exact_noise_graph,
    expected_noise_after_addition, simulate_addition, simulate_correlated_pair,
    simulate_deletion, simulate_symmetric_classifier, AdditionCheck, MonteCarloCheck,
    TnaEstimate, TrialSummary,
};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

fn check_c(c: usize) -> Result<()> {
    if c < 2 {
        return Err(Error::config(format!("need at least 2 classes, got {c}")));
    }
    Ok(())
}

fn check_unit(name: &str, x: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&x) {
        return Err(Error::config(format!("{name} = {x} is outside [0, 1]")));
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TheoryParams {
    pub p: f64,
    pub c: usize,
    pub alpha: f64,
    pub beta: f64,
    pub lambda: f64,
}

impl TheoryParams {
    pub fn validate(&self) -> Result<()> {
        check_c(self.c)?;
        check_unit("p", self.p)?;
        check_unit("alpha", self.alpha)?;
        check_unit("beta", self.beta)?;
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) {
            return Err(Error::config("lambda must be non-negative"));
        }
        Ok(())
    }
}

/// Probability that both endpoints of an intra-class edge get the same prediction.
pub fn keep_prob_intra(p: f64, c: usize) -> Result<f64> {
    check_c(c)?;
    check_unit("p", p)?;
    let c1 = (c - 1) as f64;
    Ok(p * p + (1.0 - p).powi(2) / c1)
}

/// Probability that both endpoints of an inter-class edge get the same prediction.
pub fn keep_prob_inter(p: f64, c: usize) -> Result<f64> {
    check_c(c)?;
    check_unit("p", p)?;
    let c1 = (c - 1) as f64;
    Ok(2.0 * p * (1.0 - p) / c1 + (c as f64 - 2.0) * (1.0 - p).powi(2) / (c1 * c1))
}

/// Expected noise ratio after deleting every edge whose endpoints are predicted differently.
pub fn expected_noise_after_deletion(alpha: f64, p: f64, c: usize) -> Result<f64> {
    check_unit("alpha", alpha)?;
    let pa = keep_prob_intra(p, c)?;
    let pr = keep_prob_inter(p, c)?;
    let denom = alpha * pr + (1.0 - alpha) * pa;
    if denom <= 0.0 {
        return Err(Error::config("no edge survives deletion in expectation"));
    }
    Ok(alpha * pr / denom)
}

/// Sufficient accuracy condition for deletion to lower the noise ratio: `p > 2/(c+1)`.
pub fn deletion_improves(p: f64, c: usize) -> bool {
    p > 2.0 / (c as f64 + 1.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdditionBound {
    /// Accuracy above which addition provably lowers the noise ratio.
    pub exact: f64,
    /// `(alpha + sqrt((c-1)(c-1-c*alpha))) / (c-1)`, dropping the density term.
    pub approx_dense: f64,
    /// `sqrt(1 - alpha)`.
    pub approx_simple: f64,
}

pub fn addition_threshold(alpha: f64, c: usize, lambda: f64) -> Result<AdditionBound> {
    check_c(c)?;
    check_unit("alpha", alpha)?;
    let cf = c as f64;
    let c1 = cf - 1.0;
    let denom = cf + alpha - 1.0;
    let disc = alpha * alpha + (c1 * (1.0 + cf * alpha * lambda) - cf * alpha) * denom;
    if disc < 0.0 {
        return Err(Error::config(format!("negative discriminant {disc} in addition bound")));
    }
    let dense_disc = c1 * (c1 - cf * alpha);
    let approx_dense = if dense_disc >= 0.0 {
        (alpha + dense_disc.sqrt()) / c1
    } else {
        f64::NAN
    };
    Ok(AdditionBound {
        exact: (alpha + disc.sqrt()) / denom,
        approx_dense,
        approx_simple: (1.0 - alpha).sqrt(),
    })
}

/// Probability that the second model is right after the first was wrong,
/// chosen so both models have accuracy `p`.
pub fn gamma_from_beta(p: f64, beta: f64) -> Result<f64> {
    check_unit("beta", beta)?;
    if !(0.0..1.0).contains(&p) {
        return Err(Error::config(format!("p = {p} must lie in [0, 1)")));
    }
    let gamma = p * (1.0 - beta) / (1.0 - p);
    if !(0.0..=1.0).contains(&gamma) {
        return Err(Error::config(format!(
            "p = {p}, beta = {beta} gives gamma = {gamma} outside [0, 1]"
        )));
    }
    Ok(gamma)
}

/// Accuracy of labels on which two correlated models agree.
pub fn tna_accuracy_q(p: f64, beta: f64, c: usize) -> Result<f64> {
    check_c(c)?;
    check_unit("p", p)?;
    check_unit("beta", beta)?;
    if p <= 0.5 {
        log::warn!("agreement accuracy evaluated at p = {p} <= 1/2, outside the regime where q >= p is guaranteed");
    }
    let cf = c as f64;
    Ok((cf - 1.0) * p * beta / (cf * p * beta + 1.0 - 2.0 * p))
}
