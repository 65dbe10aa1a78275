//! L2-regularized multinomial logistic regression.
//!
//! Trained by mini-batch gradient descent with a seeded shuffle, so equal
//! seeds give bit-equal models. The full-data objective lives in
//! [`LinearObjective`] as an explicit loss/gradient pair over a flat
//! parameter vector; the trainer uses it for its per-epoch loss trajectory
//! and the tests check the analytic gradient against central finite
//! differences.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{Dataset, Example, ModelError, POSITIVE};
use crate::features::SparseFeatureVector;

/// Training settings for [`train_linear`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearConfig {
    /// L2 penalty weight λ; biases are never penalized.
    pub l2: f64,
    pub learning_rate: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub seed: u64,
}

impl Default for LinearConfig {
    fn default() -> Self {
        LinearConfig { l2: 1e-3, learning_rate: 0.5, epochs: 40, batch_size: 32, seed: 0 }
    }
}

/// The full-batch objective: mean cross-entropy plus `(λ/2)·‖W‖²` over
/// non-bias weights, as a function of one flat parameter vector.
///
/// Layout: class-major rows of `dimension + 1` values, the last entry of
/// each row being that class's bias.
pub struct LinearObjective<'a> {
    examples: &'a [Example],
    n_classes: usize,
    dimension: usize,
    l2: f64,
}

impl<'a> LinearObjective<'a> {
    pub fn new(dataset: &'a Dataset, l2: f64) -> Self {
        LinearObjective {
            examples: &dataset.examples,
            n_classes: dataset.classes.len(),
            dimension: dataset.dimension,
            l2,
        }
    }

    fn row(&self) -> usize {
        self.dimension + 1
    }

    pub fn n_params(&self) -> usize {
        self.n_classes * self.row()
    }

    fn logits(&self, params: &[f64], features: &SparseFeatureVector) -> Vec<f64> {
        let row = self.row();
        (0..self.n_classes)
            .map(|c| {
                let w = &params[c * row..(c + 1) * row];
                features.dot_dense(&w[..self.dimension]) + w[self.dimension]
            })
            .collect()
    }

    pub fn loss(&self, params: &[f64]) -> f64 {
        assert_eq!(params.len(), self.n_params());
        let n = self.examples.len().max(1) as f64;
        let mut data = 0.0;
        for ex in self.examples {
            let logits = self.logits(params, &ex.features);
            data -= log_softmax(&logits)[ex.class];
        }
        let row = self.row();
        let mut reg = 0.0;
        for c in 0..self.n_classes {
            for j in 0..self.dimension {
                let w = params[c * row + j];
                reg += w * w;
            }
        }
        data / n + 0.5 * self.l2 * reg
    }

    pub fn gradient(&self, params: &[f64]) -> Vec<f64> {
        assert_eq!(params.len(), self.n_params());
        let mut grad = vec![0.0; params.len()];
        accumulate_data_gradient(
            self.examples.iter(),
            params,
            self.n_classes,
            self.dimension,
            &mut grad,
        );
        let n = self.examples.len().max(1) as f64;
        for g in &mut grad {
            *g /= n;
        }
        let row = self.row();
        for c in 0..self.n_classes {
            for j in 0..self.dimension {
                grad[c * row + j] += self.l2 * params[c * row + j];
            }
        }
        grad
    }
}

fn log_softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let log_sum = logits.iter().map(|z| (z - max).exp()).sum::<f64>().ln() + max;
    logits.iter().map(|z| z - log_sum).collect()
}

/// Adds `Σ_i (p_ic − 1[c = y_i]) · x_i` (unnormalized) into `grad`.
fn accumulate_data_gradient<'e>(
    examples: impl Iterator<Item = &'e Example>,
    params: &[f64],
    n_classes: usize,
    dimension: usize,
    grad: &mut [f64],
) {
    let row = dimension + 1;
    for ex in examples {
        let logits: Vec<f64> = (0..n_classes)
            .map(|c| {
                let w = &params[c * row..(c + 1) * row];
                ex.features.dot_dense(&w[..dimension]) + w[dimension]
            })
            .collect();
        let log_probs = log_softmax(&logits);
        for c in 0..n_classes {
            let delta = log_probs[c].exp() - if c == ex.class { 1.0 } else { 0.0 };
            if delta == 0.0 {
                continue;
            }
            for (j, v) in ex.features.iter() {
                if j < dimension {
                    grad[c * row + j] += delta * v;
                }
            }
            grad[c * row + dimension] += delta;
        }
    }
}

/// A trained multinomial logistic regression.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearModel {
    vocabulary_id: String,
    dimension: usize,
    classes: Vec<String>,
    /// Flat class-major parameters, `dimension + 1` per class (bias last).
    params: Vec<f64>,
    /// Full-data objective after each epoch, position 0 being the
    /// untrained model.
    pub loss_trajectory: Vec<f64>,
}

impl LinearModel {
    pub fn classes(&self) -> &[String] {
        &self.classes
    }

    pub fn vocabulary_id(&self) -> &str {
        &self.vocabulary_id
    }

    fn check_input(&self, x: &SparseFeatureVector) -> Result<(), ModelError> {
        if x.vocabulary_id() != self.vocabulary_id {
            return Err(ModelError::VocabularyMismatch {
                expected: self.vocabulary_id.clone(),
                found: x.vocabulary_id().to_string(),
            });
        }
        Ok(())
    }

    /// Class probabilities, in `classes()` order.
    pub fn predict_proba(&self, x: &SparseFeatureVector) -> Result<Vec<f64>, ModelError> {
        self.check_input(x)?;
        let row = self.dimension + 1;
        let logits: Vec<f64> = (0..self.classes.len())
            .map(|c| {
                let w = &self.params[c * row..(c + 1) * row];
                x.dot_dense(&w[..self.dimension]) + w[self.dimension]
            })
            .collect();
        Ok(log_softmax(&logits).iter().map(|lp| lp.exp()).collect())
    }

    /// Most probable class index; ties break toward the lower index.
    pub fn predict(&self, x: &SparseFeatureVector) -> Result<usize, ModelError> {
        let probs = self.predict_proba(x)?;
        let mut best = 0;
        for (c, p) in probs.iter().enumerate().skip(1) {
            if *p > probs[best] {
                best = c;
            }
        }
        Ok(best)
    }

    /// Probability of the positive class (binary models only).
    pub fn score_positive(&self, x: &SparseFeatureVector) -> Result<f64, ModelError> {
        if self.classes.len() != 2 {
            return Err(ModelError::ClassArity { expected: 2, found: self.classes.len() });
        }
        Ok(self.predict_proba(x)?[POSITIVE])
    }
}

/// Trains by seeded mini-batch gradient descent.
///
/// Requires a non-empty dataset in which at least two classes occur. The
/// L2 term is applied at every step (biases exempt); the recorded loss
/// trajectory is the full-data objective, evaluated before training and
/// after each epoch.
pub fn train_linear(dataset: &Dataset, config: &LinearConfig) -> Result<LinearModel, ModelError> {
    dataset.check_trainable()?;
    let n_classes = dataset.classes.len();
    let dimension = dataset.dimension;
    let row = dimension + 1;
    let mut params = vec![0.0; n_classes * row];
    let objective = LinearObjective::new(dataset, config.l2);
    let mut loss_trajectory = vec![objective.loss(&params)];

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut order: Vec<usize> = (0..dataset.examples.len()).collect();
    let batch = config.batch_size.max(1);
    for _ in 0..config.epochs {
        order.shuffle(&mut rng);
        for chunk in order.chunks(batch) {
            let mut grad = vec![0.0; params.len()];
            accumulate_data_gradient(
                chunk.iter().map(|&i| &dataset.examples[i]),
                &params,
                n_classes,
                dimension,
                &mut grad,
            );
            let m = chunk.len() as f64;
            for g in &mut grad {
                *g /= m;
            }
            for c in 0..n_classes {
                for j in 0..dimension {
                    grad[c * row + j] += config.l2 * params[c * row + j];
                }
            }
            for (w, g) in params.iter_mut().zip(&grad) {
                *w -= config.learning_rate * g;
            }
        }
        loss_trajectory.push(objective.loss(&params));
    }

    Ok(LinearModel {
        vocabulary_id: dataset.vocabulary_id.clone(),
        dimension,
        classes: dataset.classes.clone(),
        params,
        loss_trajectory,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    fn vector(vocab: &str, entries: &[(usize, f64)]) -> SparseFeatureVector {
        let mut v = SparseFeatureVector::new(vocab);
        for (i, x) in entries {
            v.set(*i, *x);
        }
        v
    }

    /// Three linearly separable classes keyed by disjoint features.
    fn separable_dataset() -> Dataset {
        let mut ds = Dataset::new(
            "vocab",
            4,
            vec!["claim".into(), "premise".into(), "other".into()],
        );
        let patterns: [(&[(usize, f64)], usize); 6] = [
            (&[(0, 2.0), (3, 1.0)], 0),
            (&[(0, 1.5)], 0),
            (&[(1, 2.0)], 1),
            (&[(1, 1.0), (3, 1.0)], 1),
            (&[(2, 2.5)], 2),
            (&[(2, 1.0), (3, 0.5)], 2),
        ];
        for (entries, class) in patterns {
            ds.push(vector("vocab", entries), class).unwrap();
        }
        ds
    }

    #[test]
    fn gradient_matches_central_finite_differences() {
        let ds = separable_dataset();
        let objective = LinearObjective::new(&ds, 0.07);
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        for _ in 0..20 {
            let params: Vec<f64> =
                (0..objective.n_params()).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let analytic = objective.gradient(&params);
            let mut numeric = vec![0.0; params.len()];
            for i in 0..params.len() {
                let h = 1e-5 * params[i].abs().max(1.0);
                let mut plus = params.clone();
                plus[i] += h;
                let mut minus = params.clone();
                minus[i] -= h;
                numeric[i] = (objective.loss(&plus) - objective.loss(&minus)) / (2.0 * h);
            }
            let diff: f64 =
                analytic.iter().zip(&numeric).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
            let scale: f64 = numeric.iter().map(|g| g * g).sum::<f64>().sqrt();
            assert!(
                diff <= 1e-5 * scale.max(1e-8),
                "gradient mismatch: ‖Δ‖ = {diff:e}, ‖g‖ = {scale:e}"
            );
        }
    }

    #[test]
    fn zero_weights_give_uniform_probabilities() {
        let model = LinearModel {
            vocabulary_id: "vocab".into(),
            dimension: 4,
            classes: vec!["a".into(), "b".into(), "c".into()],
            params: vec![0.0; 15],
            loss_trajectory: vec![],
        };
        let probs = model.predict_proba(&vector("vocab", &[(0, 3.0)])).unwrap();
        for p in &probs {
            assert!((p - 1.0 / 3.0).abs() < 1e-12);
        }
        // Argmax ties resolve to the lowest class index.
        assert_eq!(model.predict(&vector("vocab", &[])).unwrap(), 0);
    }

    #[test]
    fn training_separates_separable_classes() {
        let ds = separable_dataset();
        let config = LinearConfig { epochs: 200, learning_rate: 1.0, l2: 1e-4, ..Default::default() };
        let model = train_linear(&ds, &config).unwrap();
        for ex in &ds.examples {
            assert_eq!(model.predict(&ex.features).unwrap(), ex.class);
        }
        let first = model.loss_trajectory.first().unwrap();
        let last = model.loss_trajectory.last().unwrap();
        assert!((first - 3f64.ln()).abs() < 1e-12, "untrained loss is ln(3)");
        assert!(last < first);
    }

    #[test]
    fn training_is_deterministic_per_seed() {
        let ds = separable_dataset();
        let config = LinearConfig { seed: 9, ..Default::default() };
        let a = train_linear(&ds, &config).unwrap();
        let b = train_linear(&ds, &config).unwrap();
        assert_eq!(a, b);
        let c = train_linear(&ds, &LinearConfig { seed: 10, ..config }).unwrap();
        assert_ne!(a.params, c.params);
    }

    #[test]
    fn degenerate_datasets_are_rejected() {
        let empty = Dataset::binary("vocab", 4);
        assert!(matches!(train_linear(&empty, &Default::default()), Err(ModelError::EmptyDataset)));
        let mut single = Dataset::binary("vocab", 4);
        single.push_binary(vector("vocab", &[(0, 1.0)]), true).unwrap();
        single.push_binary(vector("vocab", &[(1, 1.0)]), true).unwrap();
        assert!(matches!(
            train_linear(&single, &Default::default()),
            Err(ModelError::SingleClass(name)) if name == "positive"
        ));
    }

    #[test]
    fn prediction_rejects_foreign_vocabulary() {
        let ds = separable_dataset();
        let model = train_linear(&ds, &Default::default()).unwrap();
        let foreign = vector("other-vocab", &[(0, 1.0)]);
        assert!(matches!(
            model.predict_proba(&foreign),
            Err(ModelError::VocabularyMismatch { .. })
        ));
    }

    #[test]
    fn score_positive_requires_binary_model() {
        let ds = separable_dataset();
        let model = train_linear(&ds, &Default::default()).unwrap();
        assert!(matches!(
            model.score_positive(&vector("vocab", &[])),
            Err(ModelError::ClassArity { expected: 2, found: 3 })
        ));

        let mut binary = Dataset::binary("vocab", 4);
        binary.push_binary(vector("vocab", &[(0, 1.0)]), true).unwrap();
        binary.push_binary(vector("vocab", &[(1, 1.0)]), false).unwrap();
        let model = train_linear(&binary, &Default::default()).unwrap();
        let score = model.score_positive(&vector("vocab", &[(0, 1.0)])).unwrap();
        assert!(score > 0.5);
    }

    #[test]
    fn model_json_round_trip_is_exact() {
        let ds = separable_dataset();
        let model = train_linear(&ds, &Default::default()).unwrap();
        let json = serde_json::to_string(&model).unwrap();
        let back: LinearModel = serde_json::from_str(&json).unwrap();
        assert_eq!(model, back);
        assert_eq!(model.params, back.params); // bit-exact parameters
    }

    #[test]
    fn regularization_shrinks_weights() {
        let ds = separable_dataset();
        let loose = train_linear(&ds, &LinearConfig { l2: 1e-6, ..Default::default() }).unwrap();
        let tight = train_linear(&ds, &LinearConfig { l2: 1.0, ..Default::default() }).unwrap();
        let norm = |m: &LinearModel| m.params.iter().map(|w| w * w).sum::<f64>();
        assert!(norm(&tight) < norm(&loose));
    }
}
