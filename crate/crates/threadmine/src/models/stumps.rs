//! Gradient-boosted decision stumps for binary scoring.
//!
//! Each round fits one depth-1 split on the current logistic-loss
//! gradients: the split maximizing the usual second-order gain, leaves set
//! by the Newton step `−G/(H+λ)`. The learning rate is folded into the
//! stored leaf values, so a model's score is just the sigmoid of the summed
//! stump outputs. Ties in gain break toward the lowest feature index, then
//! the lowest threshold, making training fully deterministic.
//!
//! Every accepted round must not increase the full-data training loss: a
//! round that would is retried with halved leaf values, and discarded (a
//! zero stump) if halving cannot rescue it. The recorded loss trajectory is
//! therefore non-increasing, starting at `ln 2` for the empty model.

use serde::{Deserialize, Serialize};

use super::{sigmoid, Dataset, ModelError, POSITIVE};
use crate::features::SparseFeatureVector;

/// Training settings for [`train_stumps`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StumpConfig {
    pub rounds: usize,
    /// Shrinkage applied to leaf values before they are stored.
    pub learning_rate: f64,
    /// L2 penalty λ in the leaf denominator `−G/(H+λ)`.
    pub l2: f64,
}

impl Default for StumpConfig {
    fn default() -> Self {
        StumpConfig { rounds: 50, learning_rate: 0.3, l2: 1.0 }
    }
}

/// One depth-1 rule: `x[feature] <= threshold` picks the left value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Stump {
    pub feature: usize,
    pub threshold: f64,
    pub left_value: f64,
    pub right_value: f64,
}

impl Stump {
    fn output(&self, x: &SparseFeatureVector) -> f64 {
        if x.get(self.feature) <= self.threshold {
            self.left_value
        } else {
            self.right_value
        }
    }
}

/// A trained boosted-stump ensemble.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoostedStumps {
    vocabulary_id: String,
    dimension: usize,
    stumps: Vec<Stump>,
    /// Full-data logistic loss after each round; position 0 is the empty
    /// model (`ln 2`). Non-increasing by construction.
    pub loss_trajectory: Vec<f64>,
}

impl BoostedStumps {
    /// An ensemble with no stumps: scores everything 0.5.
    pub fn empty(vocabulary_id: &str, dimension: usize) -> Self {
        BoostedStumps {
            vocabulary_id: vocabulary_id.to_string(),
            dimension,
            stumps: Vec::new(),
            loss_trajectory: vec![std::f64::consts::LN_2],
        }
    }

    pub fn vocabulary_id(&self) -> &str {
        &self.vocabulary_id
    }

    pub fn stumps(&self) -> &[Stump] {
        &self.stumps
    }

    fn margin(&self, x: &SparseFeatureVector) -> f64 {
        self.stumps.iter().map(|s| s.output(x)).sum()
    }

    /// Probability of the positive class.
    pub fn score_positive(&self, x: &SparseFeatureVector) -> Result<f64, ModelError> {
        if x.vocabulary_id() != self.vocabulary_id {
            return Err(ModelError::VocabularyMismatch {
                expected: self.vocabulary_id.clone(),
                found: x.vocabulary_id().to_string(),
            });
        }
        Ok(sigmoid(self.margin(x)))
    }

    /// Positive iff the score reaches 0.5 (i.e. the margin is ≥ 0).
    pub fn predict(&self, x: &SparseFeatureVector) -> Result<bool, ModelError> {
        Ok(self.score_positive(x)? >= 0.5)
    }
}

fn logistic_loss(margins: &[f64], labels: &[bool]) -> f64 {
    let n = margins.len().max(1) as f64;
    margins
        .iter()
        .zip(labels)
        .map(|(&m, &y)| {
            // -ln p(y): ln(1 + e^{-m}) for positives, ln(1 + e^{m}) otherwise,
            // computed via the stable softplus form.
            let z = if y { -m } else { m };
            if z > 0.0 {
                z + (-z).exp().ln_1p()
            } else {
                z.exp().ln_1p()
            }
        })
        .sum::<f64>()
        / n
}

struct SplitChoice {
    feature: usize,
    threshold: f64,
    gain: f64,
    left: (f64, f64),  // (G, H) of the `<= threshold` side
    total: (f64, f64), // (G, H) of everything
}

/// Best split of one feature column given per-example gradients/hessians.
/// `column` holds the non-zero values of the feature; absent examples count
/// as zeros.
fn best_split_for_feature(
    feature: usize,
    column: &[(usize, f64)],
    grad: &[f64],
    hess: &[f64],
    total: (f64, f64),
    l2: f64,
) -> Option<SplitChoice> {
    let n = grad.len();
    // Sorted distinct values the feature takes, including the implicit zero.
    let mut values: Vec<f64> = column.iter().map(|&(_, v)| v).collect();
    if column.len() < n {
        values.push(0.0);
    }
    values.sort_by(f64::total_cmp);
    values.dedup();
    if values.len() < 2 {
        return None;
    }

    // Zero-bucket stats = totals minus the non-zero entries' stats.
    let (mut g_nz, mut h_nz) = (0.0, 0.0);
    for &(i, _) in column {
        g_nz += grad[i];
        h_nz += hess[i];
    }
    let zero_bucket = (total.0 - g_nz, total.1 - h_nz);

    let half = |g: f64, h: f64| g * g / (h + l2);
    let base = half(total.0, total.1);
    let mut best: Option<SplitChoice> = None;
    for w in values.windows(2) {
        let threshold = 0.5 * (w[0] + w[1]);
        let mut left = (0.0, 0.0);
        for &(i, v) in column {
            if v <= threshold {
                left.0 += grad[i];
                left.1 += hess[i];
            }
        }
        if 0.0 <= threshold {
            left.0 += zero_bucket.0;
            left.1 += zero_bucket.1;
        }
        let right = (total.0 - left.0, total.1 - left.1);
        let gain = 0.5 * (half(left.0, left.1) + half(right.0, right.1) - base);
        let better = match &best {
            None => true,
            Some(b) => gain > b.gain,
        };
        if better {
            best = Some(SplitChoice { feature, threshold, gain, left, total });
        }
    }
    best
}

/// Trains a boosted-stump ensemble on a binary dataset.
///
/// Requires a non-empty dataset; a single-class dataset is allowed (the
/// model then drifts toward that class). Training is deterministic.
pub fn train_stumps(dataset: &Dataset, config: &StumpConfig) -> Result<BoostedStumps, ModelError> {
    if dataset.classes.len() != 2 {
        return Err(ModelError::ClassArity { expected: 2, found: dataset.classes.len() });
    }
    if dataset.examples.is_empty() {
        return Err(ModelError::EmptyDataset);
    }

    let labels: Vec<bool> = dataset.examples.iter().map(|e| e.class == POSITIVE).collect();
    let n = labels.len();

    // Column-major view of the sparse data.
    let mut columns: Vec<Vec<(usize, f64)>> = vec![Vec::new(); dataset.dimension];
    for (i, ex) in dataset.examples.iter().enumerate() {
        for (j, v) in ex.features.iter() {
            if j < dataset.dimension {
                columns[j].push((i, v));
            }
        }
    }

    let mut margins = vec![0.0; n];
    let mut model = BoostedStumps::empty(&dataset.vocabulary_id, dataset.dimension);
    let mut loss = logistic_loss(&margins, &labels);
    model.loss_trajectory[0] = loss;

    for _ in 0..config.rounds {
        let mut grad = vec![0.0; n];
        let mut hess = vec![0.0; n];
        let mut total = (0.0, 0.0);
        for i in 0..n {
            let p = sigmoid(margins[i]);
            grad[i] = p - if labels[i] { 1.0 } else { 0.0 };
            hess[i] = p * (1.0 - p);
            total.0 += grad[i];
            total.1 += hess[i];
        }

        let mut chosen: Option<SplitChoice> = None;
        for (j, column) in columns.iter().enumerate() {
            if let Some(candidate) = best_split_for_feature(j, column, &grad, &hess, total, config.l2)
            {
                // Strict improvement required, so equal gains keep the
                // lowest feature index / lowest threshold seen first.
                let better = match &chosen {
                    None => candidate.gain > 0.0,
                    Some(b) => candidate.gain > b.gain,
                };
                if better {
                    chosen = Some(candidate);
                }
            }
        }

        let Some(split) = chosen else {
            // No useful split: freeze the trajectory and stop adding stumps.
            model.loss_trajectory.push(loss);
            continue;
        };

        let right = (split.total.0 - split.left.0, split.total.1 - split.left.1);
        let mut left_value = -config.learning_rate * split.left.0 / (split.left.1 + config.l2);
        let mut right_value = -config.learning_rate * right.0 / (right.1 + config.l2);

        // Step-halving keeps the full-data loss non-increasing.
        let mut accepted = false;
        for _ in 0..30 {
            let trial: Vec<f64> = margins
                .iter()
                .zip(&dataset.examples)
                .map(|(&m, ex)| {
                    m + if ex.features.get(split.feature) <= split.threshold {
                        left_value
                    } else {
                        right_value
                    }
                })
                .collect();
            let trial_loss = logistic_loss(&trial, &labels);
            if trial_loss <= loss {
                margins = trial;
                loss = trial_loss;
                accepted = true;
                break;
            }
            left_value *= 0.5;
            right_value *= 0.5;
        }
        if !accepted {
            left_value = 0.0;
            right_value = 0.0;
        }
        model.stumps.push(Stump {
            feature: split.feature,
            threshold: split.threshold,
            left_value,
            right_value,
        });
        model.loss_trajectory.push(loss);
    }

    Ok(model)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn vector(entries: &[(usize, f64)]) -> SparseFeatureVector {
        let mut v = SparseFeatureVector::new("vocab");
        for (i, x) in entries {
            v.set(*i, *x);
        }
        v
    }

    #[test]
    fn empty_model_scores_one_half() {
        let model = BoostedStumps::empty("vocab", 8);
        assert_eq!(model.score_positive(&vector(&[(3, 1.0)])).unwrap(), 0.5);
        assert_eq!(model.loss_trajectory, vec![std::f64::consts::LN_2]);
    }

    #[test]
    fn hand_built_stump_scores_through_sigmoid() {
        let model = BoostedStumps {
            vocabulary_id: "vocab".into(),
            dimension: 4,
            stumps: vec![Stump { feature: 0, threshold: 0.5, left_value: -2.0, right_value: 2.0 }],
            loss_trajectory: vec![],
        };
        let on = model.score_positive(&vector(&[(0, 1.0)])).unwrap();
        let off = model.score_positive(&vector(&[])).unwrap();
        assert!((on - 0.8807970779778823).abs() < 1e-15);
        assert!((off - 0.11920292202211755).abs() < 1e-15);
        assert!(model.predict(&vector(&[(0, 1.0)])).unwrap());
        assert!(!model.predict(&vector(&[])).unwrap());
    }

    fn one_hot_separable() -> Dataset {
        let mut ds = Dataset::binary("vocab", 6);
        for i in 0..8 {
            // Feature 2 decides; features 4/5 carry uninformative noise.
            let positive = i % 2 == 0;
            let mut entries = vec![(4, (i % 3) as f64)];
            if positive {
                entries.push((2, 1.0));
            } else {
                entries.push((5, 1.0));
            }
            ds.push_binary(vector(&entries), positive).unwrap();
        }
        ds
    }

    #[test]
    fn first_round_picks_the_perfect_feature() {
        let ds = one_hot_separable();
        let model = train_stumps(&ds, &StumpConfig { rounds: 1, ..Default::default() }).unwrap();
        assert_eq!(model.stumps().len(), 1);
        assert_eq!(model.stumps()[0].feature, 2);
        assert!(model.stumps()[0].right_value > model.stumps()[0].left_value);
    }

    #[test]
    fn training_fits_separable_data_and_loss_decreases() {
        let ds = one_hot_separable();
        let model = train_stumps(&ds, &StumpConfig { rounds: 40, ..Default::default() }).unwrap();
        for ex in &ds.examples {
            assert_eq!(model.predict(&ex.features).unwrap(), ex.class == POSITIVE);
        }
        let t = &model.loss_trajectory;
        assert!((t[0] - std::f64::consts::LN_2).abs() < 1e-15);
        assert!(t.last().unwrap() < &0.2);
        for w in t.windows(2) {
            assert!(w[1] <= w[0] + 1e-12, "loss increased: {} -> {}", w[0], w[1]);
        }
    }

    #[test]
    fn balanced_uninformative_data_stays_near_coin_loss() {
        // One constant feature value: no split separates anything.
        let mut ds = Dataset::binary("vocab", 2);
        for i in 0..10 {
            ds.push_binary(vector(&[(0, 1.0)]), i % 2 == 0).unwrap();
        }
        let model = train_stumps(&ds, &StumpConfig { rounds: 15, ..Default::default() }).unwrap();
        let last = *model.loss_trajectory.last().unwrap();
        assert!((last - std::f64::consts::LN_2).abs() < 1e-9);
        let score = model.score_positive(&vector(&[(0, 1.0)])).unwrap();
        assert!((score - 0.5).abs() < 1e-9);
    }

    #[test]
    fn gain_ties_break_toward_lowest_feature_index() {
        // Features 1 and 3 are identical perfect predictors.
        let mut ds = Dataset::binary("vocab", 5);
        for i in 0..6 {
            let positive = i < 3;
            let entries: &[(usize, f64)] =
                if positive { &[(1, 1.0), (3, 1.0)] } else { &[] };
            ds.push_binary(vector(entries), positive).unwrap();
        }
        let model = train_stumps(&ds, &StumpConfig { rounds: 1, ..Default::default() }).unwrap();
        assert_eq!(model.stumps()[0].feature, 1);
    }

    #[test]
    fn discourse_style_onehot_shifts_the_score() {
        // Positive pairs carry feature 7 (a contrastive-label slot), negatives
        // carry feature 8, and feature 0 is shared noise.
        let mut ds = Dataset::binary("vocab", 10);
        for i in 0..12 {
            let positive = i % 3 != 0;
            let marker = if positive { 7 } else { 8 };
            ds.push_binary(vector(&[(0, 1.0), (marker, 1.0)]), positive).unwrap();
        }
        let model = train_stumps(&ds, &StumpConfig { rounds: 25, ..Default::default() }).unwrap();
        let with_marker = model.score_positive(&vector(&[(0, 1.0), (7, 1.0)])).unwrap();
        let without = model.score_positive(&vector(&[(0, 1.0), (8, 1.0)])).unwrap();
        assert!(with_marker > 0.5, "marker should push the score up, got {with_marker}");
        assert!(without < 0.5, "absence should pull it down, got {without}");
    }

    #[test]
    fn training_is_deterministic() {
        let ds = one_hot_separable();
        let config = StumpConfig::default();
        let a = train_stumps(&ds, &config).unwrap();
        let b = train_stumps(&ds, &config).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn degenerate_inputs_are_rejected() {
        let empty = Dataset::binary("vocab", 4);
        assert!(matches!(
            train_stumps(&empty, &Default::default()),
            Err(ModelError::EmptyDataset)
        ));
        let three = Dataset::new("vocab", 4, vec!["a".into(), "b".into(), "c".into()]);
        assert!(matches!(
            train_stumps(&three, &Default::default()),
            Err(ModelError::ClassArity { expected: 2, .. })
        ));
    }

    #[test]
    fn model_json_round_trip_is_exact() {
        let ds = one_hot_separable();
        let model = train_stumps(&ds, &Default::default()).unwrap();
        let json = serde_json::to_string(&model).unwrap();
        let back: BoostedStumps = serde_json::from_str(&json).unwrap();
        assert_eq!(model, back);
    }

    proptest! {
        /// The loss trajectory never increases, whatever the data.
        #[test]
        fn loss_is_monotone_nonincreasing(
            rows in proptest::collection::vec(
                (proptest::collection::vec((0usize..6, -2.0f64..2.0), 0..4), any::<bool>()),
                1..25
            ),
            rounds in 1usize..12,
        ) {
            let mut ds = Dataset::binary("vocab", 6);
            for (entries, label) in &rows {
                ds.push_binary(vector(entries), *label).unwrap();
            }
            let model = train_stumps(&ds, &StumpConfig { rounds, ..Default::default() }).unwrap();
            for w in model.loss_trajectory.windows(2) {
                prop_assert!(w[1] <= w[0] + 1e-12);
            }
            prop_assert_eq!(model.loss_trajectory.len(), rounds + 1);
        }
    }
}
