//! Data model for annotated discussion threads, plus validation, statistics,
//! and seeded train/test splitting.
//!
//! A thread is a reply tree of posts. Each post is segmented into proposition
//! spans carrying component labels; directed relations link propositions
//! either within one post or across a reply boundary.

mod format;
mod split;
mod stats;

pub use format::{parse_corpus, parse_thread, serialize_corpus, serialize_thread};
pub use split::{split_corpus, split_indices};
pub use stats::{corpus_stats, CorpusStats};

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

/// Component role of a proposition.
#[derive(
    Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize,
)]
pub enum ComponentLabel {
    MainClaim,
    Claim,
    Premise,
    NonArgument,
}

impl ComponentLabel {
    pub const ALL: [ComponentLabel; 4] = [
        ComponentLabel::MainClaim,
        ComponentLabel::Claim,
        ComponentLabel::Premise,
        ComponentLabel::NonArgument,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ComponentLabel::MainClaim => "MainClaim",
            ComponentLabel::Claim => "Claim",
            ComponentLabel::Premise => "Premise",
            ComponentLabel::NonArgument => "NonArgument",
        }
    }

    /// True for every label that can participate in relations.
    pub fn is_argumentative(self) -> bool {
        self != ComponentLabel::NonArgument
    }
}

impl fmt::Display for ComponentLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ComponentLabel {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "MainClaim" => Ok(ComponentLabel::MainClaim),
            "Claim" => Ok(ComponentLabel::Claim),
            "Premise" => Ok(ComponentLabel::Premise),
            "NonArgument" => Ok(ComponentLabel::NonArgument),
            other => Err(format!("unknown component label `{other}`")),
        }
    }
}

/// Whether a relation stays inside one post or crosses a reply boundary.
#[derive(
    Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize,
)]
pub enum RelationKind {
    IntraTurn,
    InterTurn,
}

impl RelationKind {
    pub fn as_str(self) -> &'static str {
        match self {
            RelationKind::IntraTurn => "IntraTurn",
            RelationKind::InterTurn => "InterTurn",
        }
    }
}

impl fmt::Display for RelationKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for RelationKind {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "IntraTurn" => Ok(RelationKind::IntraTurn),
            "InterTurn" => Ok(RelationKind::InterTurn),
            other => Err(format!("unknown relation kind `{other}`")),
        }
    }
}

/// Fine-grained relation type. Prediction tasks collapse these to "relation
/// present"; they are carried through as metadata only.
#[derive(
    Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize,
)]
pub enum RelationType {
    Support,
    Attack,
    Agreement,
    PartialAgreement,
    Rebuttal,
    Undercutter,
    PartialAttack,
}

impl RelationType {
    pub fn as_str(self) -> &'static str {
        match self {
            RelationType::Support => "Support",
            RelationType::Attack => "Attack",
            RelationType::Agreement => "Agreement",
            RelationType::PartialAgreement => "PartialAgreement",
            RelationType::Rebuttal => "Rebuttal",
            RelationType::Undercutter => "Undercutter",
            RelationType::PartialAttack => "PartialAttack",
        }
    }
}

impl fmt::Display for RelationType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for RelationType {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "Support" => Ok(RelationType::Support),
            "Attack" => Ok(RelationType::Attack),
            "Agreement" => Ok(RelationType::Agreement),
            "PartialAgreement" => Ok(RelationType::PartialAgreement),
            "Rebuttal" => Ok(RelationType::Rebuttal),
            "Undercutter" => Ok(RelationType::Undercutter),
            "PartialAttack" => Ok(RelationType::PartialAttack),
            other => Err(format!("unknown relation type `{other}`")),
        }
    }
}

/// A labeled proposition span inside a post.
///
/// For a `MainClaim`, `char_span` indexes the post's title; for every other
/// label it indexes the post body.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Proposition {
    pub id: String,
    pub post_id: String,
    /// 0-based sentence index within the post.
    pub sentence_index: usize,
    /// Byte offsets (start, end) into the post text (or title, see above).
    pub char_span: (usize, usize),
    pub text: String,
    pub label: ComponentLabel,
}

/// One post in a thread: raw text, optional title (root post only), and its
/// propositions in document order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Post {
    pub id: String,
    pub author: String,
    /// Absent exactly for the thread's root post.
    pub parent_id: Option<String>,
    pub text: String,
    pub title: Option<String>,
    pub propositions: Vec<Proposition>,
}

impl Post {
    pub fn is_root(&self) -> bool {
        self.parent_id.is_none()
    }
}

/// Directed source→target link between two propositions.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RelationInstance {
    pub source_id: String,
    pub target_id: String,
    pub kind: RelationKind,
    pub rel_type: RelationType,
}

/// A reply tree of posts with relation annotations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Thread {
    pub id: String,
    pub posts: Vec<Post>,
    pub relations: Vec<RelationInstance>,
}

impl Thread {
    /// All propositions in document order (post order, then span order).
    pub fn propositions(&self) -> impl Iterator<Item = &Proposition> {
        self.posts.iter().flat_map(|p| p.propositions.iter())
    }

    pub fn proposition(&self, id: &str) -> Option<&Proposition> {
        self.propositions().find(|p| p.id == id)
    }

    pub fn post(&self, id: &str) -> Option<&Post> {
        self.posts.iter().find(|p| p.id == id)
    }

    pub fn root_post(&self) -> Option<&Post> {
        self.posts.iter().find(|p| p.is_root())
    }

    /// The title proposition of the root post, when annotated.
    pub fn main_claim(&self) -> Option<&Proposition> {
        self.root_post()?
            .propositions
            .iter()
            .find(|p| p.label == ComponentLabel::MainClaim)
    }
}

/// A broken rule together with the offending identifiers.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Violation {
    /// Stable rule name, e.g. `intra-source-premise`.
    pub rule: &'static str,
    pub detail: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.rule, self.detail)
    }
}

/// Errors from corpus parsing, validation, and splitting.
#[derive(Debug, thiserror::Error)]
pub enum CorpusError {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("thread `{thread}` violates {} rule(s): {}", violations.len(),
            violations.iter().map(|v| v.to_string()).collect::<Vec<_>>().join("; "))]
    Invalid { thread: String, violations: Vec<Violation> },
    #[error("test fraction must be strictly between 0 and 1, got {0}")]
    BadFraction(f64),
    #[error("corpus must contain at least 2 threads to split, found {0}")]
    TooSmallToSplit(usize),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Checks every structural invariant and returns the violations found.
///
/// An empty result means the thread is well-formed. Violations are data, not
/// errors: callers that require validity wrap them in [`CorpusError::Invalid`].
pub fn validate_thread(thread: &Thread) -> Vec<Violation> {
    let mut out = Vec::new();

    let mut post_ids = BTreeSet::new();
    for post in &thread.posts {
        if !post_ids.insert(post.id.as_str()) {
            out.push(Violation {
                rule: "duplicate-post-id",
                detail: format!("post `{}` defined more than once", post.id),
            });
        }
    }

    let roots: Vec<&Post> = thread.posts.iter().filter(|p| p.is_root()).collect();
    if roots.len() != 1 {
        out.push(Violation {
            rule: "single-root",
            detail: format!("expected exactly one parentless post, found {}", roots.len()),
        });
    }
    let root_id = roots.first().map(|p| p.id.clone());

    // Parent references and reply-tree acyclicity.
    for post in &thread.posts {
        if let Some(parent) = &post.parent_id {
            if !post_ids.contains(parent.as_str()) {
                out.push(Violation {
                    rule: "parent-refs",
                    detail: format!("post `{}` references missing parent `{}`", post.id, parent),
                });
            }
        }
    }
    let parent_of: BTreeMap<&str, Option<&str>> = thread
        .posts
        .iter()
        .map(|p| (p.id.as_str(), p.parent_id.as_deref()))
        .collect();
    for post in &thread.posts {
        let mut seen = BTreeSet::new();
        let mut cur = post.id.as_str();
        while let Some(&Some(parent)) = parent_of.get(cur) {
            if !seen.insert(cur) {
                out.push(Violation {
                    rule: "reply-cycle",
                    detail: format!("post `{}` participates in a reply cycle", post.id),
                });
                break;
            }
            if !parent_of.contains_key(parent) {
                break;
            }
            cur = parent;
        }
    }

    let mut prop_ids: BTreeMap<&str, &Proposition> = BTreeMap::new();
    for post in &thread.posts {
        let mut last_index = 0usize;
        let mut prior_spans: Vec<(usize, usize)> = Vec::new();
        for (i, prop) in post.propositions.iter().enumerate() {
            if prop.post_id != post.id {
                out.push(Violation {
                    rule: "post-id-mismatch",
                    detail: format!(
                        "proposition `{}` claims post `{}` but lives in `{}`",
                        prop.id, prop.post_id, post.id
                    ),
                });
            }
            if prop_ids.insert(prop.id.as_str(), prop).is_some() {
                out.push(Violation {
                    rule: "duplicate-proposition-id",
                    detail: format!("proposition `{}` defined more than once", prop.id),
                });
            }

            let is_title = prop.label == ComponentLabel::MainClaim;
            if is_title {
                match (&post.title, &root_id) {
                    (Some(title), Some(root)) if post.id == *root => {
                        if prop.char_span.1 > title.len() || prop.char_span.0 > prop.char_span.1 {
                            out.push(Violation {
                                rule: "span-bounds",
                                detail: format!(
                                    "main claim `{}` span {:?} exceeds title length {}",
                                    prop.id,
                                    prop.char_span,
                                    title.len()
                                ),
                            });
                        }
                    }
                    _ => out.push(Violation {
                        rule: "main-claim-title",
                        detail: format!(
                            "main claim `{}` must annotate the root post's title",
                            prop.id
                        ),
                    }),
                }
            } else {
                if prop.char_span.1 > post.text.len() || prop.char_span.0 > prop.char_span.1 {
                    out.push(Violation {
                        rule: "span-bounds",
                        detail: format!(
                            "proposition `{}` span {:?} exceeds post length {}",
                            prop.id,
                            prop.char_span,
                            post.text.len()
                        ),
                    });
                } else {
                    for &(s, e) in &prior_spans {
                        if prop.char_span.0 < e && s < prop.char_span.1 {
                            out.push(Violation {
                                rule: "span-overlap",
                                detail: format!(
                                    "proposition `{}` span {:?} overlaps an earlier span",
                                    prop.id, prop.char_span
                                ),
                            });
                            break;
                        }
                    }
                    prior_spans.push(prop.char_span);
                }
            }

            if i > 0 && prop.sentence_index < last_index {
                out.push(Violation {
                    rule: "sentence-order",
                    detail: format!(
                        "proposition `{}` has sentence index {} after {}",
                        prop.id, prop.sentence_index, last_index
                    ),
                });
            }
            last_index = prop.sentence_index;
        }
    }

    for rel in &thread.relations {
        if rel.source_id == rel.target_id {
            out.push(Violation {
                rule: "self-relation",
                detail: format!("relation `{0}` -> `{0}` relates a proposition to itself", rel.source_id),
            });
            continue;
        }
        let (source, target) = match (prop_ids.get(rel.source_id.as_str()), prop_ids.get(rel.target_id.as_str())) {
            (Some(s), Some(t)) => (*s, *t),
            _ => {
                out.push(Violation {
                    rule: "relation-refs",
                    detail: format!(
                        "relation `{}` -> `{}` references a missing proposition",
                        rel.source_id, rel.target_id
                    ),
                });
                continue;
            }
        };
        if !source.label.is_argumentative() || !target.label.is_argumentative() {
            out.push(Violation {
                rule: "target-label",
                detail: format!(
                    "relation `{}` -> `{}` touches a non-argumentative proposition",
                    rel.source_id, rel.target_id
                ),
            });
        }
        match rel.kind {
            RelationKind::IntraTurn => {
                if source.post_id != target.post_id {
                    out.push(Violation {
                        rule: "intra-same-post",
                        detail: format!(
                            "intra-turn relation `{}` -> `{}` crosses posts",
                            rel.source_id, rel.target_id
                        ),
                    });
                }
                if source.label != ComponentLabel::Premise {
                    out.push(Violation {
                        rule: "intra-source-premise",
                        detail: format!(
                            "intra-turn source `{}` must be a premise, found {}",
                            rel.source_id, source.label
                        ),
                    });
                }
            }
            RelationKind::InterTurn => {
                if source.post_id == target.post_id {
                    out.push(Violation {
                        rule: "inter-cross-post",
                        detail: format!(
                            "inter-turn relation `{}` -> `{}` stays within one post",
                            rel.source_id, rel.target_id
                        ),
                    });
                }
                if source.label != ComponentLabel::Claim {
                    out.push(Violation {
                        rule: "inter-source-claim",
                        detail: format!(
                            "inter-turn source `{}` must be a claim, found {}",
                            rel.source_id, source.label
                        ),
                    });
                }
            }
        }
    }

    out
}

/// Validation wrapper that turns violations into an error.
pub fn ensure_valid(thread: &Thread) -> Result<(), CorpusError> {
    let violations = validate_thread(thread);
    if violations.is_empty() {
        Ok(())
    } else {
        Err(CorpusError::Invalid { thread: thread.id.clone(), violations })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn prop(
        id: &str,
        post_id: &str,
        sentence_index: usize,
        span: (usize, usize),
        text: &str,
        label: ComponentLabel,
    ) -> Proposition {
        Proposition {
            id: id.into(),
            post_id: post_id.into(),
            sentence_index,
            char_span: span,
            text: text.into(),
            label,
        }
    }

    fn two_post_thread() -> Thread {
        let a_text = "Cats purr. They are soft.";
        let b_text = "I disagree. Dogs are loyal.";
        Thread {
            id: "t1".into(),
            posts: vec![
                Post {
                    id: "a".into(),
                    author: "alice".into(),
                    parent_id: None,
                    text: a_text.into(),
                    title: Some("Cats are the best pets.".into()),
                    propositions: vec![
                        prop("a0", "a", 0, (0, 23), "Cats are the best pets.", ComponentLabel::MainClaim),
                        prop("a1", "a", 0, (0, 10), "Cats purr.", ComponentLabel::Claim),
                        prop("a2", "a", 1, (11, 25), "They are soft.", ComponentLabel::Premise),
                    ],
                },
                Post {
                    id: "b".into(),
                    author: "bob".into(),
                    parent_id: Some("a".into()),
                    text: b_text.into(),
                    title: None,
                    propositions: vec![
                        prop("b0", "b", 0, (0, 11), "I disagree.", ComponentLabel::Claim),
                        prop("b1", "b", 1, (12, 27), "Dogs are loyal.", ComponentLabel::Premise),
                    ],
                },
            ],
            relations: vec![
                RelationInstance {
                    source_id: "a2".into(),
                    target_id: "a1".into(),
                    kind: RelationKind::IntraTurn,
                    rel_type: RelationType::Support,
                },
                RelationInstance {
                    source_id: "b0".into(),
                    target_id: "a0".into(),
                    kind: RelationKind::InterTurn,
                    rel_type: RelationType::Rebuttal,
                },
            ],
        }
    }

    #[test]
    fn valid_thread_has_no_violations() {
        assert_eq!(validate_thread(&two_post_thread()), Vec::new());
    }

    #[test]
    fn intra_with_claim_source_is_flagged() {
        let mut t = two_post_thread();
        t.relations[0].source_id = "a1".into();
        t.relations[0].target_id = "a2".into();
        let v = validate_thread(&t);
        assert_eq!(v.len(), 1);
        assert_eq!(v[0].rule, "intra-source-premise");
    }

    #[test]
    fn self_relation_is_flagged() {
        let mut t = two_post_thread();
        t.relations[0].target_id = "a2".into();
        let v = validate_thread(&t);
        assert_eq!(v.len(), 1);
        assert_eq!(v[0].rule, "self-relation");
    }

    #[test]
    fn intra_crossing_posts_is_flagged() {
        let mut t = two_post_thread();
        t.relations[1].kind = RelationKind::IntraTurn;
        t.relations[1].source_id = "b1".into();
        let v = validate_thread(&t);
        assert!(v.iter().any(|v| v.rule == "intra-same-post"), "{v:?}");
    }

    #[test]
    fn missing_parent_and_two_roots_are_flagged() {
        let mut t = two_post_thread();
        t.posts[1].parent_id = Some("zz".into());
        assert!(validate_thread(&t).iter().any(|v| v.rule == "parent-refs"));
        t.posts[1].parent_id = None;
        assert!(validate_thread(&t).iter().any(|v| v.rule == "single-root"));
    }

    #[test]
    fn reply_cycle_is_flagged() {
        let mut t = two_post_thread();
        t.posts[0].parent_id = Some("b".into());
        let v = validate_thread(&t);
        assert!(v.iter().any(|v| v.rule == "reply-cycle"), "{v:?}");
    }

    #[test]
    fn overlapping_spans_are_flagged() {
        let mut t = two_post_thread();
        t.posts[0].propositions[2].char_span = (5, 14);
        t.posts[0].propositions[2].sentence_index = 0;
        let v = validate_thread(&t);
        assert!(v.iter().any(|v| v.rule == "span-overlap"), "{v:?}");
    }

    #[test]
    fn span_out_of_bounds_is_flagged() {
        let mut t = two_post_thread();
        t.posts[1].propositions[1].char_span = (12, 99);
        let v = validate_thread(&t);
        assert!(v.iter().any(|v| v.rule == "span-bounds"), "{v:?}");
    }

    #[test]
    fn main_claim_outside_root_title_is_flagged() {
        let mut t = two_post_thread();
        t.posts[1].propositions[0].label = ComponentLabel::MainClaim;
        let v = validate_thread(&t);
        assert!(v.iter().any(|v| v.rule == "main-claim-title"), "{v:?}");
    }

    #[test]
    fn decreasing_sentence_index_is_flagged() {
        let mut t = two_post_thread();
        t.posts[1].propositions[0].sentence_index = 3;
        let v = validate_thread(&t);
        assert!(v.iter().any(|v| v.rule == "sentence-order"), "{v:?}");
    }

    #[test]
    fn main_claim_lookup() {
        let t = two_post_thread();
        assert_eq!(t.main_claim().unwrap().id, "a0");
        assert_eq!(t.root_post().unwrap().id, "a");
        assert_eq!(t.proposition("b1").unwrap().text, "Dogs are loyal.");
    }
}
