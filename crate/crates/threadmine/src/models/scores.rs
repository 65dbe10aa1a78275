//! Externally produced scores and prediction-set combination.
//!
//! A [`ScoreTable`] holds per-pair probabilities keyed by
//! `(thread, source, target)`, typically parsed from the whitespace score
//! file format. The table remembers a digest of the bytes it was parsed
//! from, so reports can state exactly which score file an experiment used.
//!
//! [`PredictionSet`] is a set of positive pairs within a fixed candidate
//! universe; [`ensemble_or`] unions two sets over the same universe, which
//! can only grow recall.

use std::collections::{BTreeMap, BTreeSet};
use std::io::BufRead;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::ModelError;
use crate::candidates::PairKey;
use crate::features::hex_digest;

/// Per-pair probabilities from an external scorer.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct ScoreTable {
    scores: BTreeMap<PairKey, f64>,
    /// SHA-256 of the bytes the table was parsed from (empty if built
    /// programmatically).
    digest: String,
}

impl ScoreTable {
    pub fn new() -> Self {
        Self::default()
    }

    /// Inserts a score, rejecting values outside `[0, 1]` and conflicting
    /// re-insertions (the same pair may be repeated with an equal score).
    pub fn insert(&mut self, key: PairKey, score: f64) -> Result<(), ModelError> {
        if !(0.0..=1.0).contains(&score) {
            return Err(ModelError::BadScore(score));
        }
        if let Some(&existing) = self.scores.get(&key) {
            if existing != score {
                return Err(ModelError::ConflictingScore { line: 0, key });
            }
            return Ok(());
        }
        self.scores.insert(key, score);
        Ok(())
    }

    pub fn get(&self, key: &PairKey) -> Option<f64> {
        self.scores.get(key).copied()
    }

    /// The score for `key`, or a missing-score error naming the pair.
    pub fn require(&self, key: &PairKey) -> Result<f64, ModelError> {
        self.get(key).ok_or_else(|| ModelError::MissingScore(key.clone()))
    }

    pub fn len(&self) -> usize {
        self.scores.len()
    }

    pub fn is_empty(&self) -> bool {
        self.scores.is_empty()
    }

    pub fn digest(&self) -> &str {
        &self.digest
    }

    pub fn iter(&self) -> impl Iterator<Item = (&PairKey, f64)> + '_ {
        self.scores.iter().map(|(k, &v)| (k, v))
    }

    /// Parses `<thread> <source_id> <target_id> <score>` lines. Blank lines
    /// and `#` comments are skipped. Errors carry 1-based line numbers.
    pub fn parse(text: &str) -> Result<Self, ModelError> {
        let mut hasher = Sha256::new();
        hasher.update(text.as_bytes());
        let mut table = ScoreTable { scores: BTreeMap::new(), digest: hex_digest(hasher) };

        for (n, line) in text.lines().enumerate() {
            let n = n + 1;
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let fields: Vec<&str> = line.split_whitespace().collect();
            if fields.len() != 4 {
                return Err(ModelError::ScoreLine {
                    line: n,
                    message: "expected `<thread> <source> <target> <score>`".into(),
                });
            }
            let score: f64 = fields[3].parse().map_err(|_| ModelError::ScoreLine {
                line: n,
                message: format!("bad score `{}`", fields[3]),
            })?;
            if !(0.0..=1.0).contains(&score) {
                return Err(ModelError::ScoreLine {
                    line: n,
                    message: format!("score {score} is not a probability in [0, 1]"),
                });
            }
            let key = PairKey {
                thread_id: fields[0].to_string(),
                source_id: fields[1].to_string(),
                target_id: fields[2].to_string(),
            };
            if let Some(&existing) = table.scores.get(&key) {
                if existing != score {
                    return Err(ModelError::ConflictingScore { line: n, key });
                }
            } else {
                table.scores.insert(key, score);
            }
        }
        Ok(table)
    }

    pub fn read<R: BufRead>(mut reader: R) -> Result<Self, ModelError> {
        let mut text = String::new();
        reader.read_to_string(&mut text)?;
        Self::parse(&text)
    }

    pub fn from_path(path: &Path) -> Result<Self, ModelError> {
        Self::parse(&std::fs::read_to_string(path)?)
    }
}

/// Loads a score file produced by an external scorer.
pub fn load_external_scores(path: &Path) -> Result<ScoreTable, ModelError> {
    ScoreTable::from_path(path)
}

/// Positive predictions over a fixed candidate universe.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PredictionSet {
    universe: BTreeSet<PairKey>,
    positives: BTreeSet<PairKey>,
}

impl PredictionSet {
    /// An all-negative prediction set over `universe`.
    pub fn new(universe: BTreeSet<PairKey>) -> Self {
        PredictionSet { universe, positives: BTreeSet::new() }
    }

    pub fn universe(&self) -> &BTreeSet<PairKey> {
        &self.universe
    }

    pub fn positives(&self) -> &BTreeSet<PairKey> {
        &self.positives
    }

    pub fn is_positive(&self, key: &PairKey) -> bool {
        self.positives.contains(key)
    }

    /// Marks a pair positive; it must belong to the universe.
    pub fn mark_positive(&mut self, key: PairKey) -> Result<(), ModelError> {
        if !self.universe.contains(&key) {
            return Err(ModelError::OutsideUniverse(key));
        }
        self.positives.insert(key);
        Ok(())
    }
}

/// ORs two prediction sets: positive iff either is positive. Both sets must
/// cover the same universe.
pub fn ensemble_or(a: &PredictionSet, b: &PredictionSet) -> Result<PredictionSet, ModelError> {
    if a.universe != b.universe {
        return Err(ModelError::UniverseMismatch);
    }
    Ok(PredictionSet {
        universe: a.universe.clone(),
        positives: a.positives.union(&b.positives).cloned().collect(),
    })
}
