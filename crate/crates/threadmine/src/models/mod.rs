//! Learners and prediction plumbing.
//!
//! Two trainable models cover the pipeline's needs: a multinomial logistic
//! regression ([`linear::LinearModel`]) for component classification and
//! salience ranking, and gradient-boosted decision stumps
//! ([`stumps::BoostedStumps`]) for relation scoring. Both consume the same
//! [`Dataset`] of sparse vectors, train deterministically from a seed, and
//! serialize to JSON losslessly.
//!
//! Around them sit the score-space utilities: decision-threshold tuning on
//! held-out data ([`threshold::tune_threshold`]), externally produced score
//! tables ([`scores::ScoreTable`]), and the OR-combination of prediction
//! sets over a shared candidate universe ([`scores::ensemble_or`]).

pub mod linear;
pub mod scores;
pub mod stumps;
pub mod threshold;

use std::io;

use serde::{Deserialize, Serialize};

use crate::candidates::PairKey;
use crate::features::SparseFeatureVector;

/// Errors from training, scoring, and prediction-set handling.
#[derive(Debug, thiserror::Error)]
pub enum ModelError {
    #[error("cannot train on an empty dataset")]
    EmptyDataset,
    #[error("cannot train: every example has class `{0}`")]
    SingleClass(String),
    #[error("expected {expected} classes, dataset has {found}")]
    ClassArity { expected: usize, found: usize },
    #[error("class index {index} out of range for {classes} classes")]
    BadClassIndex { index: usize, classes: usize },
    #[error("feature vector built against vocabulary `{found}`, expected `{expected}`")]
    VocabularyMismatch { expected: String, found: String },
    #[error("score {0} is not a probability in [0, 1]")]
    BadScore(f64),
    #[error("got {scores} scores but {labels} labels")]
    LengthMismatch { scores: usize, labels: usize },
    #[error("score file line {line}: {message}")]
    ScoreLine { line: usize, message: String },
    #[error("score file line {line}: conflicting score for pair {key}")]
    ConflictingScore { line: usize, key: PairKey },
    #[error("no score available for pair {0}")]
    MissingScore(PairKey),
    #[error("prediction sets cover different candidate universes")]
    UniverseMismatch,
    #[error("prediction for pair {0} lies outside the candidate universe")]
    OutsideUniverse(PairKey),
    #[error(transparent)]
    Io(#[from] io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

/// One training example: features plus a class index into the dataset's
/// class list.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Example {
    pub features: SparseFeatureVector,
    pub class: usize,
}

/// A labeled dataset over one frozen vocabulary.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    pub vocabulary_id: String,
    /// Vector width (vocabulary dimension, including the reserved slot).
    pub dimension: usize,
    /// Class names; example class indices point into this list.
    pub classes: Vec<String>,
    pub examples: Vec<Example>,
}

/// Class index of the positive class in binary datasets.
pub const POSITIVE: usize = 1;

impl Dataset {
    pub fn new(vocabulary_id: &str, dimension: usize, classes: Vec<String>) -> Self {
        Dataset { vocabulary_id: vocabulary_id.to_string(), dimension, classes, examples: Vec::new() }
    }

    /// A two-class dataset with the conventional `negative`/`positive` names.
    pub fn binary(vocabulary_id: &str, dimension: usize) -> Self {
        Self::new(vocabulary_id, dimension, vec!["negative".into(), "positive".into()])
    }

    pub fn push(&mut self, features: SparseFeatureVector, class: usize) -> Result<(), ModelError> {
        if features.vocabulary_id() != self.vocabulary_id {
            return Err(ModelError::VocabularyMismatch {
                expected: self.vocabulary_id.clone(),
                found: features.vocabulary_id().to_string(),
            });
        }
        if class >= self.classes.len() {
            return Err(ModelError::BadClassIndex { index: class, classes: self.classes.len() });
        }
        self.examples.push(Example { features, class });
        Ok(())
    }

    pub fn push_binary(
        &mut self,
        features: SparseFeatureVector,
        positive: bool,
    ) -> Result<(), ModelError> {
        self.push(features, if positive { POSITIVE } else { 0 })
    }

    pub fn len(&self) -> usize {
        self.examples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.examples.is_empty()
    }

    /// Number of examples per class, indexed like `classes`.
    pub fn class_counts(&self) -> Vec<usize> {
        let mut counts = vec![0usize; self.classes.len()];
        for ex in &self.examples {
            counts[ex.class] += 1;
        }
        counts
    }

    /// Errors unless the dataset is non-empty and at least two classes occur.
    pub(crate) fn check_trainable(&self) -> Result<(), ModelError> {
        if self.examples.is_empty() {
            return Err(ModelError::EmptyDataset);
        }
        let counts = self.class_counts();
        if counts.iter().filter(|&&c| c > 0).count() < 2 {
            let only = counts.iter().position(|&c| c > 0).unwrap_or(0);
            return Err(ModelError::SingleClass(self.classes[only].clone()));
        }
        Ok(())
    }
}

/// A trained model of either family, for uniform persistence.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family")]
pub enum SavedModel {
    Linear(linear::LinearModel),
    Stumps(stumps::BoostedStumps),
}

impl SavedModel {
    pub fn to_json(&self) -> Result<String, ModelError> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(json: &str) -> Result<Self, ModelError> {
        Ok(serde_json::from_str(json)?)
    }

    pub fn save(&self, path: &std::path::Path) -> Result<(), ModelError> {
        std::fs::write(path, self.to_json()?)?;
        Ok(())
    }

    pub fn load(path: &std::path::Path) -> Result<Self, ModelError> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    /// Probability of the positive class, for binary models only.
    pub fn score_positive(&self, x: &SparseFeatureVector) -> Result<f64, ModelError> {
        match self {
            SavedModel::Linear(m) => m.score_positive(x),
            SavedModel::Stumps(m) => m.score_positive(x),
        }
    }
}

pub(crate) fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dataset_rejects_mismatched_vocabulary() {
        let mut ds = Dataset::binary("vocab-a", 4);
        let v = SparseFeatureVector::new("vocab-b");
        assert!(matches!(ds.push_binary(v, true), Err(ModelError::VocabularyMismatch { .. })));
    }

    #[test]
    fn dataset_rejects_bad_class_index() {
        let mut ds = Dataset::binary("vocab", 4);
        let v = SparseFeatureVector::new("vocab");
        assert!(matches!(ds.push(v, 2), Err(ModelError::BadClassIndex { .. })));
    }

    #[test]
    fn trainability_checks() {
        let mut ds = Dataset::binary("vocab", 4);
        assert!(matches!(ds.check_trainable(), Err(ModelError::EmptyDataset)));
        ds.push_binary(SparseFeatureVector::new("vocab"), true).unwrap();
        assert!(matches!(ds.check_trainable(), Err(ModelError::SingleClass(_))));
        ds.push_binary(SparseFeatureVector::new("vocab"), false).unwrap();
        assert!(ds.check_trainable().is_ok());
        assert_eq!(ds.class_counts(), vec![1, 1]);
    }

    #[test]
    fn sigmoid_is_stable_and_symmetric() {
        assert_eq!(sigmoid(0.0), 0.5);
        assert!((sigmoid(2.0) - 0.8807970779778823).abs() < 1e-15);
        assert!((sigmoid(-2.0) + sigmoid(2.0) - 1.0).abs() < 1e-15);
        assert!(sigmoid(-800.0) >= 0.0);
        assert!(sigmoid(800.0) <= 1.0);
    }
}
