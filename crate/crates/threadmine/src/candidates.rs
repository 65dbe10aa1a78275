//! Constrained candidate-pair enumeration and pruning.
//!
//! Relation prediction never considers arbitrary proposition pairs: within a
//! post the source must be a premise; across posts the source must be a claim
//! and the target must sit in the parent post. On top of enumeration this
//! module implements the three pruning devices — sentence-distance window
//! clipping, salience-based target selection, and the rule that a selected
//! target may only act as a source against the main claim. Filters only ever
//! remove pairs; the removed pairs are returned alongside the survivors so
//! reports can account for every enumerated pair.

use std::collections::{BTreeMap, BTreeSet};
use std::io::{self, BufRead, Write};

use serde::{Deserialize, Serialize};

use crate::corpus::{ComponentLabel, Post, Proposition, RelationInstance, RelationKind, Thread};

/// Identifies one ordered pair across the whole corpus.
#[derive(
    Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize,
)]
pub struct PairKey {
    pub thread_id: String,
    pub source_id: String,
    pub target_id: String,
}

impl std::fmt::Display for PairKey {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{} {} {}", self.thread_id, self.source_id, self.target_id)
    }
}

/// An ordered proposition pair eligible for relation prediction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidatePair {
    pub thread_id: String,
    pub source_id: String,
    pub target_id: String,
    pub source_post_id: String,
    pub target_post_id: String,
    pub kind: RelationKind,
    /// Source sentence index minus target sentence index; defined only for
    /// within-post pairs.
    pub sentence_distance: Option<i64>,
    /// Names of the filters that removed this pair (empty while it survives).
    pub filters_applied: Vec<String>,
    /// Gold annotation, when attached.
    pub label: Option<bool>,
}

impl CandidatePair {
    pub fn key(&self) -> PairKey {
        PairKey {
            thread_id: self.thread_id.clone(),
            source_id: self.source_id.clone(),
            target_id: self.target_id.clone(),
        }
    }
}

/// Component labels to enumerate under: the annotated ones or a classifier's.
pub type LabelMap = BTreeMap<String, ComponentLabel>;

/// The annotated labels of every proposition in a thread.
pub fn gold_labels(thread: &Thread) -> LabelMap {
    thread.propositions().map(|p| (p.id.clone(), p.label)).collect()
}

/// How far up the reply tree cross-post pairs may reach.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum InterScope {
    /// Direct parent only (default; replies address the post they answer).
    Parent,
    /// Every ancestor up to the root.
    Ancestors,
}

/// Enumerates within-post pairs: one per (premise source, argumentative
/// target) with source ≠ target, in document order (source-major).
///
/// Propositions missing from `labels` are treated as non-argumentative.
pub fn enumerate_intra(thread_id: &str, post: &Post, labels: &LabelMap) -> Vec<CandidatePair> {
    let role = |p: &Proposition| labels.get(&p.id).copied();
    let mut out = Vec::new();
    for source in &post.propositions {
        if role(source) != Some(ComponentLabel::Premise) {
            continue;
        }
        for target in &post.propositions {
            if target.id == source.id || !role(target).is_some_and(|l| l.is_argumentative()) {
                continue;
            }
            out.push(CandidatePair {
                thread_id: thread_id.to_string(),
                source_id: source.id.clone(),
                target_id: target.id.clone(),
                source_post_id: post.id.clone(),
                target_post_id: post.id.clone(),
                kind: RelationKind::IntraTurn,
                sentence_distance: Some(
                    source.sentence_index as i64 - target.sentence_index as i64,
                ),
                filters_applied: Vec::new(),
                label: None,
            });
        }
    }
    out
}

/// Enumerates cross-post pairs: one per (claim in a reply, argumentative
/// component in an ancestor post within `scope`), in document order.
pub fn enumerate_inter(thread: &Thread, labels: &LabelMap, scope: InterScope) -> Vec<CandidatePair> {
    let role = |p: &Proposition| labels.get(&p.id).copied();
    let mut out = Vec::new();
    for post in &thread.posts {
        let mut targets: Vec<&Post> = Vec::new();
        let mut parent = post.parent_id.as_deref();
        let mut hops = 0usize;
        while let Some(pid) = parent {
            let Some(ancestor) = thread.post(pid) else { break };
            targets.push(ancestor);
            if scope == InterScope::Parent {
                break;
            }
            hops += 1;
            if hops > thread.posts.len() {
                break; // malformed cycles are a validation concern, not ours
            }
            parent = ancestor.parent_id.as_deref();
        }
        if targets.is_empty() {
            continue;
        }
        for source in &post.propositions {
            if role(source) != Some(ComponentLabel::Claim) {
                continue;
            }
            for target_post in &targets {
                for target in &target_post.propositions {
                    if !role(target).is_some_and(|l| l.is_argumentative()) {
                        continue;
                    }
                    out.push(CandidatePair {
                        thread_id: thread.id.clone(),
                        source_id: source.id.clone(),
                        target_id: target.id.clone(),
                        source_post_id: post.id.clone(),
                        target_post_id: target_post.id.clone(),
                        kind: RelationKind::InterTurn,
                        sentence_distance: None,
                        filters_applied: Vec::new(),
                        label: None,
                    });
                }
            }
        }
    }
    out
}

/// Marks every pair with whether a gold relation of the same kind links it.
pub fn attach_gold_labels(pairs: &mut [CandidatePair], relations: &[RelationInstance]) {
    let gold: BTreeSet<(&str, &str, RelationKind)> = relations
        .iter()
        .map(|r| (r.source_id.as_str(), r.target_id.as_str(), r.kind))
        .collect();
    for pair in pairs {
        pair.label =
            Some(gold.contains(&(pair.source_id.as_str(), pair.target_id.as_str(), pair.kind)));
    }
}

/// Result of a pruning filter: `kept` survive, `removed` carry the filter's
/// name in `filters_applied`. Filters never add or alter surviving pairs.
#[derive(Debug, Clone, Default)]
pub struct FilterOutcome {
    pub kept: Vec<CandidatePair>,
    pub removed: Vec<CandidatePair>,
}

/// Errors from pruning operations.
#[derive(Debug, thiserror::Error)]
pub enum CandidateError {
    #[error("distance window is undefined for cross-post pair {0}")]
    WindowOnInterTurn(PairKey),
    #[error("target selection requires k >= 1")]
    ZeroK,
    #[error("pair list line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error(transparent)]
    Io(#[from] io::Error),
}

pub const WINDOW_FILTER: &str = "window";
pub const TARGET_SELECTION_FILTER: &str = "target-selection";
pub const SOURCE_TARGET_FILTER: &str = "source-target-constraint";

/// Keeps within-post pairs whose signed sentence distance lies in `[lo, hi]`.
pub fn apply_window(
    pairs: Vec<CandidatePair>,
    lo: i64,
    hi: i64,
) -> Result<FilterOutcome, CandidateError> {
    let mut outcome = FilterOutcome::default();
    for mut pair in pairs {
        let Some(d) = pair.sentence_distance else {
            return Err(CandidateError::WindowOnInterTurn(pair.key()));
        };
        if lo <= d && d <= hi {
            outcome.kept.push(pair);
        } else {
            pair.filters_applied.push(WINDOW_FILTER.to_string());
            outcome.removed.push(pair);
        }
    }
    Ok(outcome)
}

/// Anything that can rank a post's propositions by how likely they are to be
/// addressed by replies.
pub trait SalienceScorer {
    fn score(&self, prop: &Proposition, post: &Post) -> f64;
}

/// Scores every proposition identically. With the document-order tie-break
/// this selects the first `k` propositions, the positional baseline.
#[derive(Debug, Clone, Copy)]
pub struct ConstantScorer(pub f64);

impl SalienceScorer for ConstantScorer {
    fn score(&self, _prop: &Proposition, _post: &Post) -> f64 {
        self.0
    }
}

/// The top propositions of one post by descending salience.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TargetSelection {
    pub post_id: String,
    /// Highest-scoring first; ties keep document order.
    pub selected_ids: Vec<String>,
    pub k: usize,
}

impl TargetSelection {
    pub fn contains(&self, prop_id: &str) -> bool {
        self.selected_ids.iter().any(|id| id == prop_id)
    }
}

/// Picks the `k` most salient propositions of `post`.
pub fn select_targets(
    post: &Post,
    scorer: &dyn SalienceScorer,
    k: usize,
) -> Result<TargetSelection, CandidateError> {
    if k == 0 {
        return Err(CandidateError::ZeroK);
    }
    let mut scored: Vec<(usize, f64)> = post
        .propositions
        .iter()
        .enumerate()
        .map(|(i, p)| (i, scorer.score(p, post)))
        .collect();
    // Stable sort: equal scores keep document order.
    scored.sort_by(|a, b| b.1.total_cmp(&a.1));
    let selected_ids = scored
        .into_iter()
        .take(k)
        .map(|(i, _)| post.propositions[i].id.clone())
        .collect();
    Ok(TargetSelection { post_id: post.id.clone(), selected_ids, k })
}

/// Removes pairs whose target was not selected for its post. Posts without
/// an entry in `selections` keep all their targets (selection not
/// configured for them).
pub fn apply_target_selection(
    pairs: Vec<CandidatePair>,
    selections: &BTreeMap<String, TargetSelection>,
) -> FilterOutcome {
    let mut outcome = FilterOutcome::default();
    for mut pair in pairs {
        let keep = match selections.get(&pair.target_post_id) {
            Some(selection) => selection.contains(&pair.target_id),
            None => true,
        };
        if keep {
            outcome.kept.push(pair);
        } else {
            pair.filters_applied.push(TARGET_SELECTION_FILTER.to_string());
            outcome.removed.push(pair);
        }
    }
    outcome
}

/// Applies target selection and the source≠target rule to cross-post pairs.
///
/// First, pairs whose target's post has a selection and whose target was not
/// selected are removed. Then, with `T` the set of target ids among the
/// survivors, any pair whose source is in `T` is removed unless its target is
/// the main claim.
pub fn apply_target_constraints(
    pairs: Vec<CandidatePair>,
    selections: &BTreeMap<String, TargetSelection>,
    main_claim_id: Option<&str>,
) -> FilterOutcome {
    let mut outcome = apply_target_selection(pairs, selections);
    let survivors = std::mem::take(&mut outcome.kept);

    let target_ids: BTreeSet<&str> = survivors.iter().map(|p| p.target_id.as_str()).collect();
    let target_ids: BTreeSet<String> = target_ids.into_iter().map(String::from).collect();
    for mut pair in survivors {
        let source_is_target = target_ids.contains(&pair.source_id);
        let aims_at_main_claim = main_claim_id == Some(pair.target_id.as_str());
        if source_is_target && !aims_at_main_claim {
            pair.filters_applied.push(SOURCE_TARGET_FILTER.to_string());
            outcome.removed.push(pair);
        } else {
            outcome.kept.push(pair);
        }
    }
    outcome
}

/// Writes one pair per line:
/// `<thread> <source_id> <target_id> <kind> <distance|-> <gold|->`.
pub fn write_pairs<W: Write>(mut w: W, pairs: &[CandidatePair]) -> io::Result<()> {
    for p in pairs {
        let dist = p.sentence_distance.map_or("-".to_string(), |d| d.to_string());
        let gold = match p.label {
            Some(true) => "1",
            Some(false) => "0",
            None => "-",
        };
        writeln!(w, "{} {} {} {} {} {}", p.thread_id, p.source_id, p.target_id, p.kind, dist, gold)?;
    }
    Ok(())
}

/// Reads the `write_pairs` format. Post ids are not part of the exchange
/// format, so they come back empty; the result is suitable for scoring and
/// evaluation, not for re-running structural filters.
pub fn read_pairs<R: BufRead>(r: R) -> Result<Vec<CandidatePair>, CandidateError> {
    let mut out = Vec::new();
    for (n, line) in r.lines().enumerate() {
        let n = n + 1;
        let line = line?;
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.len() != 6 {
            return Err(CandidateError::Parse {
                line: n,
                message: "expected `<thread> <source> <target> <kind> <distance|-> <gold|->`"
                    .into(),
            });
        }
        let kind: RelationKind = fields[3]
            .parse()
            .map_err(|message: String| CandidateError::Parse { line: n, message })?;
        let sentence_distance = match fields[4] {
            "-" => None,
            d => Some(d.parse().map_err(|_| CandidateError::Parse {
                line: n,
                message: format!("bad distance `{d}`"),
            })?),
        };
        let label = match fields[5] {
            "-" => None,
            "1" => Some(true),
            "0" => Some(false),
            g => {
                return Err(CandidateError::Parse {
                    line: n,
                    message: format!("bad gold flag `{g}`"),
                })
            }
        };
        out.push(CandidatePair {
            thread_id: fields[0].to_string(),
            source_id: fields[1].to_string(),
            target_id: fields[2].to_string(),
            source_post_id: String::new(),
            target_post_id: String::new(),
            kind,
            sentence_distance,
            filters_applied: Vec::new(),
            label,
        });
    }
    Ok(out)
}
