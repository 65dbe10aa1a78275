//! Decision-threshold tuning on held-out scores.
//!
//! Scores are probabilities; a pair is predicted positive when its score is
//! at or above the threshold. [`tune_threshold`] sweeps the distinct
//! observed scores and keeps the one maximizing positive-class F1, the
//! lowest such value on ties (which favors recall at equal F1).

use serde::{Deserialize, Serialize};

use super::ModelError;

/// A validated decision threshold in `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Threshold(f64);

impl Threshold {
    /// The neutral default used when no held-out data is available to tune.
    pub const FALLBACK: Threshold = Threshold(0.5);

    pub fn new(value: f64) -> Result<Self, ModelError> {
        if !(0.0..=1.0).contains(&value) {
            return Err(ModelError::BadScore(value));
        }
        Ok(Threshold(value))
    }

    pub fn value(self) -> f64 {
        self.0
    }

    /// The decision rule: positive iff `score >= threshold`.
    pub fn is_positive(self, score: f64) -> bool {
        score >= self.0
    }
}

/// Result of a threshold sweep: the winner and its held-out metrics
/// (fractions, not percentages).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThresholdSearch {
    pub threshold: Threshold,
    pub f1: f64,
    pub precision: f64,
    pub recall: f64,
}

fn f1_at(threshold: f64, scores: &[f64], labels: &[bool]) -> (f64, f64, f64) {
    let (mut tp, mut fp, mut fn_) = (0usize, 0usize, 0usize);
    for (&s, &y) in scores.iter().zip(labels) {
        let positive = s >= threshold;
        match (positive, y) {
            (true, true) => tp += 1,
            (true, false) => fp += 1,
            (false, true) => fn_ += 1,
            (false, false) => {}
        }
    }
    let precision = if tp + fp == 0 { 0.0 } else { tp as f64 / (tp + fp) as f64 };
    let recall = if tp + fn_ == 0 { 0.0 } else { tp as f64 / (tp + fn_) as f64 };
    let f1 =
        if precision + recall == 0.0 { 0.0 } else { 2.0 * precision * recall / (precision + recall) };
    (f1, precision, recall)
}

/// Sweeps the distinct observed scores as candidate thresholds and returns
/// the one with the best positive-class F1 (ties: the lowest threshold).
///
/// Errors on empty input, mismatched lengths, or scores outside `[0, 1]`.
pub fn tune_threshold(scores: &[f64], labels: &[bool]) -> Result<ThresholdSearch, ModelError> {
    if scores.len() != labels.len() {
        return Err(ModelError::LengthMismatch { scores: scores.len(), labels: labels.len() });
    }
    if scores.is_empty() {
        return Err(ModelError::EmptyDataset);
    }
    for &s in scores {
        if !(0.0..=1.0).contains(&s) {
            return Err(ModelError::BadScore(s));
        }
    }

    let mut candidates: Vec<f64> = scores.to_vec();
    candidates.sort_by(f64::total_cmp);
    candidates.dedup();

    let mut best: Option<ThresholdSearch> = None;
    for &t in &candidates {
        let (f1, precision, recall) = f1_at(t, scores, labels);
        // Strict improvement keeps the lowest threshold on F1 ties, since
        // candidates ascend.
        if best.is_none_or(|b| f1 > b.f1) {
            best = Some(ThresholdSearch { threshold: Threshold(t), f1, precision, recall });
        }
    }
    Ok(best.expect("non-empty candidate list"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn picks_the_low_threshold_that_maximizes_f1() {
        let search = tune_threshold(&[0.9, 0.8, 0.2], &[true, false, true]).unwrap();
        assert_eq!(search.threshold.value(), 0.2);
        assert!((search.f1 - 0.8).abs() < 1e-12);
        assert!((search.precision - 2.0 / 3.0).abs() < 1e-12);
        assert_eq!(search.recall, 1.0);
    }

    #[test]
    fn equal_scores_yield_that_score() {
        let search = tune_threshold(&[0.7, 0.7, 0.7], &[true, false, true]).unwrap();
        assert_eq!(search.threshold.value(), 0.7);
        assert_eq!(search.recall, 1.0);
    }

    #[test]
    fn all_negative_labels_take_the_lowest_candidate() {
        // F1 is 0 everywhere; the tie rule picks the smallest score.
        let search = tune_threshold(&[0.4, 0.9], &[false, false]).unwrap();
        assert_eq!(search.threshold.value(), 0.4);
        assert_eq!(search.f1, 0.0);
    }

    #[test]
    fn degenerate_inputs_are_rejected() {
        assert!(matches!(tune_threshold(&[], &[]), Err(ModelError::EmptyDataset)));
        assert!(matches!(
            tune_threshold(&[0.5], &[true, false]),
            Err(ModelError::LengthMismatch { .. })
        ));
        assert!(matches!(tune_threshold(&[1.2], &[true]), Err(ModelError::BadScore(_))));
        assert!(matches!(tune_threshold(&[f64::NAN], &[true]), Err(ModelError::BadScore(_))));
    }

    #[test]
    fn threshold_type_validates_range() {
        assert!(Threshold::new(0.0).is_ok());
        assert!(Threshold::new(1.0).is_ok());
        assert!(Threshold::new(-0.1).is_err());
        assert!(Threshold::new(f64::NAN).is_err());
        assert!(Threshold::FALLBACK.is_positive(0.5));
        assert!(!Threshold::FALLBACK.is_positive(0.49));
    }

    proptest! {
        /// The tuned threshold is always one of the observed scores, no
        /// observed score beats its F1, and equal F1 resolves to the lower
        /// threshold.
        #[test]
        fn tuned_threshold_is_optimal_over_observed_scores(
            rows in proptest::collection::vec((0.0f64..=1.0, any::<bool>()), 1..40)
        ) {
            let scores: Vec<f64> = rows.iter().map(|r| r.0).collect();
            let labels: Vec<bool> = rows.iter().map(|r| r.1).collect();
            let search = tune_threshold(&scores, &labels).unwrap();
            prop_assert!(scores.contains(&search.threshold.value()));
            for &t in &scores {
                let (f1, _, _) = f1_at(t, &scores, &labels);
                prop_assert!(f1 <= search.f1);
                if f1 == search.f1 {
                    prop_assert!(search.threshold.value() <= t);
                }
            }
        }
    }
}
