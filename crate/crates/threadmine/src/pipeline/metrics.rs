//! Precision/recall/F computation for component and relation evaluation.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::candidates::PairKey;
use crate::corpus::ComponentLabel;

use super::PipelineError;

/// One evaluation row: raw counts plus percentage metrics.
///
/// Undefined ratios (empty denominator) are reported as 0.0 with the
/// corresponding `*_defined` flag cleared, keeping reports numeric and
/// machine-comparable.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PrfRow {
    pub tp: usize,
    pub fp: usize,
    pub fn_count: usize,
    /// Percent: `100·tp/(tp+fp)`.
    pub precision: f64,
    /// Percent: `100·tp/(tp+fn)`.
    pub recall: f64,
    /// Percent: `2PR/(P+R)` over the percent P and R.
    pub f1: f64,
    pub precision_defined: bool,
    pub recall_defined: bool,
}

/// Builds a row from positive-class counts.
pub fn prf_from_counts(tp: usize, fp: usize, fn_count: usize) -> PrfRow {
    let precision_defined = tp + fp > 0;
    let recall_defined = tp + fn_count > 0;
    let precision =
        if precision_defined { 100.0 * tp as f64 / ((tp + fp) as f64) } else { 0.0 };
    let recall =
        if recall_defined { 100.0 * tp as f64 / ((tp + fn_count) as f64) } else { 0.0 };
    let f1 = if precision + recall > 0.0 {
        2.0 * precision * recall / (precision + recall)
    } else {
        0.0
    };
    PrfRow { tp, fp, fn_count, precision, recall, f1, precision_defined, recall_defined }
}

/// Positive-class evaluation of relation predictions.
///
/// Every predicted pair must lie in the candidate universe. Gold pairs
/// outside the universe (unreachable after enumeration or pruning) are
/// counted as false negatives: a pruned pair is a negative prediction.
pub fn evaluate_relations(
    universe: &BTreeSet<PairKey>,
    predicted: &BTreeSet<PairKey>,
    gold: &BTreeSet<PairKey>,
) -> Result<PrfRow, PipelineError> {
    if let Some(outside) = predicted.iter().find(|p| !universe.contains(*p)) {
        return Err(PipelineError::OutsideUniverse(outside.clone()));
    }
    let tp = predicted.intersection(gold).count();
    let fp = predicted.len() - tp;
    let fn_count = gold.len() - tp;
    Ok(prf_from_counts(tp, fp, fn_count))
}

/// Per-class and aggregate results of 3-way component classification.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComponentEval {
    /// One-vs-rest rows in fixed class order: Claim, Premise, NonArgument.
    pub per_class: Vec<(ComponentLabel, PrfRow)>,
    /// Unweighted mean of the three class F scores.
    pub macro_f1: f64,
    /// Percent of propositions labeled correctly.
    pub accuracy: f64,
    pub total: usize,
}

/// The classes a component model decides between (titles are fixed upstream
/// and excluded from evaluation).
pub const COMPONENT_CLASSES: [ComponentLabel; 3] =
    [ComponentLabel::Claim, ComponentLabel::Premise, ComponentLabel::NonArgument];

/// One-vs-rest evaluation of predicted component labels against gold.
///
/// Both maps must cover exactly the same keys; anything else is a universe
/// mismatch, not a scoring question.
pub fn evaluate_components<K: Ord>(
    gold: &BTreeMap<K, ComponentLabel>,
    predicted: &BTreeMap<K, ComponentLabel>,
) -> Result<ComponentEval, PipelineError> {
    if gold.len() != predicted.len() || gold.keys().ne(predicted.keys()) {
        return Err(PipelineError::UniverseMismatch);
    }
    let mut per_class = Vec::new();
    for class in COMPONENT_CLASSES {
        let mut tp = 0;
        let mut fp = 0;
        let mut fn_count = 0;
        for (key, &g) in gold {
            let p = predicted[key];
            match (g == class, p == class) {
                (true, true) => tp += 1,
                (false, true) => fp += 1,
                (true, false) => fn_count += 1,
                (false, false) => {}
            }
        }
        per_class.push((class, prf_from_counts(tp, fp, fn_count)));
    }
    let macro_f1 =
        per_class.iter().map(|(_, row)| row.f1).sum::<f64>() / per_class.len() as f64;
    let correct = gold.iter().filter(|(key, &g)| predicted[*key] == g).count();
    let total = gold.len();
    let accuracy = if total > 0 { 100.0 * correct as f64 / total as f64 } else { 0.0 };
    Ok(ComponentEval { per_class, macro_f1, accuracy, total })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn key(t: &str, s: &str, g: &str) -> PairKey {
        PairKey { thread_id: t.into(), source_id: s.into(), target_id: g.into() }
    }

    #[test]
    fn counts_convert_to_percentages() {
        let row = prf_from_counts(2, 1, 1);
        assert!((row.precision - 200.0 / 3.0).abs() < 1e-12);
        assert!((row.recall - 200.0 / 3.0).abs() < 1e-12);
        assert!((row.f1 - 200.0 / 3.0).abs() < 1e-12);
        assert!(row.precision_defined && row.recall_defined);
    }

    #[test]
    fn undefined_ratios_are_zero_and_flagged() {
        let no_predictions = prf_from_counts(0, 0, 3);
        assert_eq!(no_predictions.precision, 0.0);
        assert!(!no_predictions.precision_defined);
        assert_eq!(no_predictions.recall, 0.0);
        assert!(no_predictions.recall_defined);
        assert_eq!(no_predictions.f1, 0.0);

        let nothing = prf_from_counts(0, 0, 0);
        assert!(!nothing.precision_defined && !nothing.recall_defined);
    }

    #[test]
    fn f_is_the_harmonic_mean_of_the_percentages() {
        for (tp, fp, fn_count) in [(5, 3, 7), (1, 0, 0), (120, 2381, 0), (174, 2090, 0)] {
            let row = prf_from_counts(tp, fp, fn_count);
            if row.precision + row.recall > 0.0 {
                let expected = 2.0 * row.precision * row.recall / (row.precision + row.recall);
                assert!((row.f1 - expected).abs() <= 1e-9);
            }
        }
    }

    #[test]
    fn all_positive_baseline_on_skewed_universe() {
        // 174 gold among 2264 candidates, everything predicted positive.
        let row = prf_from_counts(174, 2264 - 174, 0);
        assert!((row.precision - 100.0 * 174.0 / 2264.0).abs() < 1e-12);
        assert!((row.precision - 7.69).abs() < 0.005);
        assert_eq!(row.recall, 100.0);
    }

    #[test]
    fn relation_evaluation_counts_pruned_gold_as_misses() {
        let universe: BTreeSet<PairKey> =
            [key("t", "a", "b"), key("t", "a", "c")].into_iter().collect();
        let predicted: BTreeSet<PairKey> = [key("t", "a", "b")].into_iter().collect();
        // One gold pair never made it into the universe.
        let gold: BTreeSet<PairKey> =
            [key("t", "a", "b"), key("t", "x", "y")].into_iter().collect();
        let row = evaluate_relations(&universe, &predicted, &gold).unwrap();
        assert_eq!((row.tp, row.fp, row.fn_count), (1, 0, 1));
        assert_eq!(row.recall, 50.0);
    }

    #[test]
    fn predictions_outside_the_universe_are_rejected() {
        let universe: BTreeSet<PairKey> = [key("t", "a", "b")].into_iter().collect();
        let predicted: BTreeSet<PairKey> = [key("t", "z", "z")].into_iter().collect();
        let err = evaluate_relations(&universe, &predicted, &BTreeSet::new()).unwrap_err();
        assert!(matches!(err, PipelineError::OutsideUniverse(_)));
    }

    #[test]
    fn perfect_component_predictions_score_100() {
        let gold: BTreeMap<&str, ComponentLabel> = [
            ("a", ComponentLabel::Claim),
            ("b", ComponentLabel::Premise),
            ("c", ComponentLabel::NonArgument),
        ]
        .into_iter()
        .collect();
        let eval = evaluate_components(&gold, &gold.clone()).unwrap();
        for (_, row) in &eval.per_class {
            assert_eq!(row.f1, 100.0);
        }
        assert_eq!(eval.macro_f1, 100.0);
        assert_eq!(eval.accuracy, 100.0);
    }

    #[test]
    fn degenerate_all_non_argument_predictions() {
        let gold: BTreeMap<&str, ComponentLabel> =
            [("a", ComponentLabel::Claim), ("b", ComponentLabel::Premise)].into_iter().collect();
        let predicted: BTreeMap<&str, ComponentLabel> = [
            ("a", ComponentLabel::NonArgument),
            ("b", ComponentLabel::NonArgument),
        ]
        .into_iter()
        .collect();
        let eval = evaluate_components(&gold, &predicted).unwrap();
        let by_class: BTreeMap<ComponentLabel, PrfRow> = eval.per_class.into_iter().collect();
        let na = by_class[&ComponentLabel::NonArgument];
        assert_eq!(na.precision, 0.0);
        assert!(na.precision_defined, "two NA predictions exist, all wrong");
        assert_eq!(by_class[&ComponentLabel::Claim].recall, 0.0);
        assert_eq!(by_class[&ComponentLabel::Premise].recall, 0.0);
    }

    #[test]
    fn hand_built_confusion_matrix() {
        // Claim: 2 correct, 1 premise misread as claim, 1 claim misread as
        // premise -> P = R = F = 66.67.
        let gold: BTreeMap<&str, ComponentLabel> = [
            ("a", ComponentLabel::Claim),
            ("b", ComponentLabel::Claim),
            ("c", ComponentLabel::Claim),
            ("d", ComponentLabel::Premise),
        ]
        .into_iter()
        .collect();
        let predicted: BTreeMap<&str, ComponentLabel> = [
            ("a", ComponentLabel::Claim),
            ("b", ComponentLabel::Claim),
            ("c", ComponentLabel::Premise),
            ("d", ComponentLabel::Claim),
        ]
        .into_iter()
        .collect();
        let eval = evaluate_components(&gold, &predicted).unwrap();
        let claim = eval.per_class[0].1;
        assert_eq!((claim.tp, claim.fp, claim.fn_count), (2, 1, 1));
        assert!((claim.f1 - 66.67).abs() < 0.005);
    }

    #[test]
    fn differing_universes_are_rejected() {
        let gold: BTreeMap<&str, ComponentLabel> =
            [("a", ComponentLabel::Claim)].into_iter().collect();
        let predicted: BTreeMap<&str, ComponentLabel> =
            [("b", ComponentLabel::Claim)].into_iter().collect();
        assert!(matches!(
            evaluate_components(&gold, &predicted),
            Err(PipelineError::UniverseMismatch)
        ));
    }
}
