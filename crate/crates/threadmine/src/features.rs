//! Feature extraction for component and relation classifiers.
//!
//! Everything here is deterministic and vocabulary-driven: a
//! [`FeatureVocabulary`] is built once from training text, frozen, and then
//! maps feature names to dense indices. Unseen names fall into a reserved
//! out-of-vocabulary slot so a frozen vocabulary never grows at prediction
//! time. Extractors produce [`SparseFeatureVector`]s tagged with the
//! vocabulary id they were built against, which lets the models refuse
//! mismatched inputs instead of silently mis-indexing.
//!
//! Lexicons (marker words, pronouns, modals, negation, claim cues) ship with
//! the crate as plain word lists and can be swapped for custom ones.

use std::collections::{BTreeMap, BTreeSet};
use std::io;
use std::path::Path;
use std::sync::LazyLock;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::candidates::CandidatePair;
use crate::corpus::{ComponentLabel, Post, Proposition, RelationKind, Thread};
use crate::textproc::tokenize;

/// Errors from feature extraction and vocabulary handling.
#[derive(Debug, thiserror::Error)]
pub enum FeatureError {
    #[error("feature vector built against vocabulary `{found}`, expected `{expected}`")]
    VocabularyMismatch { expected: String, found: String },
    #[error("unknown proposition `{0}` while extracting pair features")]
    UnknownProposition(String),
    #[error("unknown post `{0}` while extracting pair features")]
    UnknownPost(String),
    #[error(transparent)]
    Io(#[from] io::Error),
}

// ---------------------------------------------------------------------------
// Lexicons
// ---------------------------------------------------------------------------

/// A named list of lowercase words or phrases, matched at word boundaries.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Lexicon {
    name: String,
    terms: Vec<String>,
}

impl Lexicon {
    /// Parses one term per line; `#` starts a comment, blank lines are
    /// skipped, terms are lowercased and deduplicated preserving order.
    pub fn parse(name: &str, text: &str) -> Self {
        let mut seen = BTreeSet::new();
        let mut terms = Vec::new();
        for line in text.lines() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let term = line.to_lowercase();
            if seen.insert(term.clone()) {
                terms.push(term);
            }
        }
        Lexicon { name: name.to_string(), terms }
    }

    pub fn from_path(name: &str, path: &Path) -> Result<Self, FeatureError> {
        Ok(Self::parse(name, &std::fs::read_to_string(path)?))
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn terms(&self) -> &[String] {
        &self.terms
    }

    /// Counts non-overlapping occurrences of any term in `text`, longest
    /// candidate first at each position. Boundaries are non-alphanumeric.
    pub fn count_matches(&self, text: &str) -> usize {
        let lower = text.to_lowercase();
        let mut count = 0;
        let mut pos = 0;
        let bytes = lower.as_bytes();
        while pos < lower.len() {
            if !lower.is_char_boundary(pos) {
                pos += 1;
                continue;
            }
            if pos > 0 && is_word_byte(bytes[pos - 1]) {
                pos += 1;
                continue;
            }
            let mut best: Option<usize> = None;
            for term in &self.terms {
                if lower[pos..].starts_with(term.as_str()) {
                    let end = pos + term.len();
                    let boundary = end >= lower.len() || !is_word_byte(bytes[end]);
                    if boundary && best.is_none_or(|b| term.len() > b) {
                        best = Some(term.len());
                    }
                }
            }
            match best {
                Some(len) => {
                    count += 1;
                    pos += len;
                }
                None => pos += 1,
            }
        }
        count
    }

    pub fn matches(&self, text: &str) -> bool {
        self.count_matches(text) > 0
    }
}

fn is_word_byte(b: u8) -> bool {
    b.is_ascii_alphanumeric()
}

macro_rules! builtin_lexicon {
    ($fn_name:ident, $name:literal, $file:literal) => {
        pub fn $fn_name() -> &'static Lexicon {
            static LEX: LazyLock<Lexicon> = LazyLock::new(|| {
                Lexicon::parse($name, include_str!(concat!("../data/", $file)))
            });
            &LEX
        }
    };
}

/// The word lists used by the extractors, bundled so they travel together.
#[derive(Debug, Clone)]
pub struct LexiconSet {
    pub first_person: Lexicon,
    pub second_person: Lexicon,
    pub modals: Lexicon,
    pub negation: Lexicon,
    pub forward_markers: Lexicon,
    pub backward_markers: Lexicon,
    pub claim_cues: Lexicon,
}

impl LexiconSet {
    builtin_lexicon!(builtin_first_person, "first_person", "first_person.txt");
    builtin_lexicon!(builtin_second_person, "second_person", "second_person.txt");
    builtin_lexicon!(builtin_modals, "modals", "modals.txt");
    builtin_lexicon!(builtin_negation, "negation", "negation.txt");
    builtin_lexicon!(builtin_forward, "forward_markers", "forward_markers.txt");
    builtin_lexicon!(builtin_backward, "backward_markers", "backward_markers.txt");
    builtin_lexicon!(builtin_claim_cues, "claim_cues", "claim_cues.txt");

    /// The lexicons shipped with the crate.
    pub fn builtin() -> &'static LexiconSet {
        static SET: LazyLock<LexiconSet> = LazyLock::new(|| LexiconSet {
            first_person: LexiconSet::builtin_first_person().clone(),
            second_person: LexiconSet::builtin_second_person().clone(),
            modals: LexiconSet::builtin_modals().clone(),
            negation: LexiconSet::builtin_negation().clone(),
            forward_markers: LexiconSet::builtin_forward().clone(),
            backward_markers: LexiconSet::builtin_backward().clone(),
            claim_cues: LexiconSet::builtin_claim_cues().clone(),
        });
        &SET
    }

    /// True when the text negates something: a negation word, or an `n't`
    /// contraction (which tokenizes as `…n ' t`).
    pub fn has_negation(&self, text: &str) -> bool {
        if self.negation.matches(text) {
            return true;
        }
        let tokens = tokenize(text);
        tokens.windows(3).any(|w| w[0].ends_with('n') && w[1] == "'" && w[2] == "t")
    }
}

// ---------------------------------------------------------------------------
// Vocabulary
// ---------------------------------------------------------------------------

/// A frozen bijection between feature names and dense indices, with one
/// reserved out-of-vocabulary index at the end.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeatureVocabulary {
    id: String,
    names: Vec<String>,
    index: BTreeMap<String, usize>,
}

impl FeatureVocabulary {
    /// Builds a vocabulary directly from unique names (order preserved).
    /// The id is derived from a digest of the names, so equal name lists
    /// always produce interchangeable vocabularies.
    pub fn from_names(prefix: &str, names: Vec<String>) -> Self {
        let mut index = BTreeMap::new();
        for (i, name) in names.iter().enumerate() {
            let previous = index.insert(name.clone(), i);
            assert!(previous.is_none(), "duplicate feature name `{name}`");
        }
        let id = format!("{prefix}-{}", &digest_names(&names)[..12]);
        FeatureVocabulary { id, names, index }
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    /// Number of named features (excluding the out-of-vocabulary slot).
    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    /// Width of vectors over this vocabulary: every name plus the
    /// out-of-vocabulary slot.
    pub fn dimension(&self) -> usize {
        self.names.len() + 1
    }

    /// The reserved index that all unseen names map to.
    pub fn oov_index(&self) -> usize {
        self.names.len()
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.index.get(name).copied()
    }

    /// The index for `name`, falling back to the out-of-vocabulary slot.
    pub fn index_or_oov(&self, name: &str) -> usize {
        self.index_of(name).unwrap_or_else(|| self.oov_index())
    }

    pub fn name(&self, index: usize) -> Option<&str> {
        self.names.get(index).map(String::as_str)
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    /// Content digest; two vocabularies with the same digest index features
    /// identically.
    pub fn digest(&self) -> String {
        digest_names(&self.names)
    }
}

fn digest_names(names: &[String]) -> String {
    let mut hasher = Sha256::new();
    for name in names {
        hasher.update(name.as_bytes());
        hasher.update([0u8]);
    }
    hex_digest(hasher)
}

pub(crate) fn hex_digest(hasher: Sha256) -> String {
    hasher.finalize().iter().map(|b| format!("{b:02x}")).collect()
}

/// Accumulates feature-name counts and freezes them into a vocabulary.
#[derive(Debug, Clone, Default)]
pub struct VocabularyBuilder {
    counts: BTreeMap<String, usize>,
    always: Vec<String>,
    always_set: BTreeSet<String>,
}

impl VocabularyBuilder {
    pub fn new() -> Self {
        Self::default()
    }

    /// Registers a name that survives regardless of count (structural
    /// features). Insertion order is preserved and leads the vocabulary.
    pub fn include_always(&mut self, name: &str) {
        if self.always_set.insert(name.to_string()) {
            self.always.push(name.to_string());
        }
    }

    pub fn observe(&mut self, name: &str) {
        *self.counts.entry(name.to_string()).or_insert(0) += 1;
    }

    /// Freezes into a vocabulary: structural names first (insertion order),
    /// then observed names with count ≥ `min_count` in lexicographic order.
    pub fn build(&self, prefix: &str, min_count: usize) -> FeatureVocabulary {
        let mut names = self.always.clone();
        for (name, count) in &self.counts {
            if *count >= min_count && !self.always_set.contains(name) {
                names.push(name.clone());
            }
        }
        FeatureVocabulary::from_names(prefix, names)
    }
}

// ---------------------------------------------------------------------------
// Sparse vectors
// ---------------------------------------------------------------------------

/// A sparse feature vector over one vocabulary. Zero values are never
/// stored, so equality and iteration see only the informative entries.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SparseFeatureVector {
    vocabulary_id: String,
    entries: BTreeMap<usize, f64>,
}

impl SparseFeatureVector {
    pub fn new(vocabulary_id: &str) -> Self {
        SparseFeatureVector { vocabulary_id: vocabulary_id.to_string(), entries: BTreeMap::new() }
    }

    pub fn vocabulary_id(&self) -> &str {
        &self.vocabulary_id
    }

    /// Sets an entry; setting 0.0 removes it.
    pub fn set(&mut self, index: usize, value: f64) {
        if value == 0.0 {
            self.entries.remove(&index);
        } else {
            self.entries.insert(index, value);
        }
    }

    pub fn add(&mut self, index: usize, delta: f64) {
        let value = self.get(index) + delta;
        self.set(index, value);
    }

    pub fn get(&self, index: usize) -> f64 {
        self.entries.get(&index).copied().unwrap_or(0.0)
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.entries.iter().map(|(&i, &v)| (i, v))
    }

    /// Number of stored (non-zero) entries.
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn l1_norm(&self) -> f64 {
        self.entries.values().map(|v| v.abs()).sum()
    }

    /// Dot product against a dense weight slice (indices beyond the slice
    /// contribute nothing).
    pub fn dot_dense(&self, weights: &[f64]) -> f64 {
        self.iter().map(|(i, v)| v * weights.get(i).copied().unwrap_or(0.0)).sum()
    }

    /// Dot product with another sparse vector over the same vocabulary.
    pub fn dot(&self, other: &Self) -> Result<f64, FeatureError> {
        if self.vocabulary_id != other.vocabulary_id {
            return Err(FeatureError::VocabularyMismatch {
                expected: self.vocabulary_id.clone(),
                found: other.vocabulary_id.clone(),
            });
        }
        Ok(self.iter().map(|(i, v)| v * other.get(i)).sum())
    }
}

// ---------------------------------------------------------------------------
// Component features
// ---------------------------------------------------------------------------

const UNIGRAM_PREFIX: &str = "uni:";
const NUMBER_TOKEN: &str = "<num>";

/// Structural (non-lexical) component feature names, always in vocabulary.
pub const COMPONENT_STRUCTURAL: &[&str] = &[
    "len:tokens",
    "pos:rel",
    "pos:first",
    "pos:last",
    "pos:title",
    "punct:question",
    "cnt:first_person",
    "cnt:modal",
    "marker:forward",
    "marker:backward",
];

/// Fixed pair-level feature names (beyond the namespaced component copies).
pub const PAIR_STRUCTURAL: &[&str] = &[
    "pair:jaccard",
    "pair:neg_source",
    "pair:neg_target",
    "pair:dist:le-2",
    "pair:dist:-1",
    "pair:dist:0",
    "pair:dist:+1",
    "pair:dist:+2",
    "pair:dist:ge+3",
    "pair:same_author",
    "pair:source_is_reply",
];

fn unigram_name(token: &str) -> String {
    if !token.is_empty() && token.chars().all(|c| c.is_ascii_digit()) {
        format!("{UNIGRAM_PREFIX}{NUMBER_TOKEN}")
    } else {
        format!("{UNIGRAM_PREFIX}{token}")
    }
}

/// Collects the named features of one proposition (before indexing).
fn component_feature_names(
    prop: &Proposition,
    post: &Post,
    lexicons: &LexiconSet,
) -> Vec<(String, f64)> {
    let mut out: Vec<(String, f64)> = Vec::new();
    let tokens = tokenize(&prop.text);
    let mut unigram_counts: BTreeMap<String, f64> = BTreeMap::new();
    for token in &tokens {
        *unigram_counts.entry(unigram_name(token)).or_insert(0.0) += 1.0;
    }
    out.extend(unigram_counts);

    out.push(("len:tokens".into(), tokens.len() as f64));
    let n = post.propositions.len().max(1);
    let position = post
        .propositions
        .iter()
        .position(|p| p.id == prop.id)
        .unwrap_or(0);
    out.push(("pos:rel".into(), position as f64 / n as f64));
    if position == 0 {
        out.push(("pos:first".into(), 1.0));
    }
    if position == n - 1 {
        out.push(("pos:last".into(), 1.0));
    }
    if prop.label == ComponentLabel::MainClaim {
        out.push(("pos:title".into(), 1.0));
    }
    if prop.text.contains('?') {
        out.push(("punct:question".into(), 1.0));
    }
    let first_person = lexicons.first_person.count_matches(&prop.text);
    if first_person > 0 {
        out.push(("cnt:first_person".into(), first_person as f64));
    }
    let modals = lexicons.modals.count_matches(&prop.text);
    if modals > 0 {
        out.push(("cnt:modal".into(), modals as f64));
    }
    if lexicons.forward_markers.matches(&prop.text) {
        out.push(("marker:forward".into(), 1.0));
    }
    if lexicons.backward_markers.matches(&prop.text) {
        out.push(("marker:backward".into(), 1.0));
    }
    out
}

/// Extracts the component feature vector of one proposition.
///
/// Count-weighted unigrams (numbers collapsed to one token class), token
/// count, relative position, first/last/title flags, question-mark flag,
/// first-person and modal counts, and forward/backward marker flags.
/// Names absent from `vocab` accumulate on the out-of-vocabulary index.
pub fn component_features(
    prop: &Proposition,
    post: &Post,
    vocab: &FeatureVocabulary,
    lexicons: &LexiconSet,
) -> SparseFeatureVector {
    let mut v = SparseFeatureVector::new(vocab.id());
    for (name, value) in component_feature_names(prop, post, lexicons) {
        v.add(vocab.index_or_oov(&name), value);
    }
    v
}

/// Builds the component vocabulary from training threads: all structural
/// names plus unigrams observed at least `min_unigram_count` times.
pub fn build_component_vocabulary(threads: &[Thread], min_unigram_count: usize) -> FeatureVocabulary {
    let mut builder = VocabularyBuilder::new();
    for name in COMPONENT_STRUCTURAL {
        builder.include_always(name);
    }
    for thread in threads {
        for prop in thread.propositions() {
            for token in tokenize(&prop.text) {
                builder.observe(&unigram_name(&token));
            }
        }
    }
    builder.build("component", min_unigram_count)
}

// ---------------------------------------------------------------------------
// Pair features
// ---------------------------------------------------------------------------

/// Derives the pair vocabulary from a component vocabulary: every component
/// name twice (`src:`/`tgt:` namespaces) plus the fixed pair-level names.
/// No second counting pass over the corpus is needed.
pub fn pair_vocabulary(component: &FeatureVocabulary) -> FeatureVocabulary {
    let mut names: Vec<String> = Vec::with_capacity(component.len() * 2 + PAIR_STRUCTURAL.len());
    for name in PAIR_STRUCTURAL {
        names.push(name.to_string());
    }
    for name in component.names() {
        names.push(format!("src:{name}"));
    }
    for name in component.names() {
        names.push(format!("tgt:{name}"));
    }
    FeatureVocabulary::from_names("pair", names)
}

fn content_tokens(text: &str) -> BTreeSet<String> {
    tokenize(text)
        .into_iter()
        .filter(|t| t.chars().any(|c| c.is_alphanumeric()))
        .collect()
}

/// Jaccard overlap of the alphanumeric token sets of two texts.
/// Two empty sets overlap vacuously and score 0.0.
pub fn token_jaccard(a: &str, b: &str) -> f64 {
    let sa = content_tokens(a);
    let sb = content_tokens(b);
    let union = sa.union(&sb).count();
    if union == 0 {
        return 0.0;
    }
    sa.intersection(&sb).count() as f64 / union as f64
}

fn distance_bucket(d: i64) -> &'static str {
    match d {
        i64::MIN..=-2 => "pair:dist:le-2",
        -1 => "pair:dist:-1",
        0 => "pair:dist:0",
        1 => "pair:dist:+1",
        2 => "pair:dist:+2",
        _ => "pair:dist:ge+3",
    }
}

/// Extracts the feature vector of one candidate pair.
///
/// Both propositions' component features appear under `src:`/`tgt:`
/// namespaces, joined by pair-level signals: token overlap, per-side
/// negation flags, a bucketed sentence distance (within-post pairs only),
/// same-author flag, and whether the source post is a reply.
pub fn pair_features(
    pair: &CandidatePair,
    thread: &Thread,
    vocab: &FeatureVocabulary,
    lexicons: &LexiconSet,
) -> Result<SparseFeatureVector, FeatureError> {
    let source = thread
        .proposition(&pair.source_id)
        .ok_or_else(|| FeatureError::UnknownProposition(pair.source_id.clone()))?;
    let target = thread
        .proposition(&pair.target_id)
        .ok_or_else(|| FeatureError::UnknownProposition(pair.target_id.clone()))?;
    let source_post = thread
        .post(&pair.source_post_id)
        .ok_or_else(|| FeatureError::UnknownPost(pair.source_post_id.clone()))?;
    let target_post = thread
        .post(&pair.target_post_id)
        .ok_or_else(|| FeatureError::UnknownPost(pair.target_post_id.clone()))?;

    let mut v = SparseFeatureVector::new(vocab.id());
    for (name, value) in component_feature_names(source, source_post, lexicons) {
        v.add(vocab.index_or_oov(&format!("src:{name}")), value);
    }
    for (name, value) in component_feature_names(target, target_post, lexicons) {
        v.add(vocab.index_or_oov(&format!("tgt:{name}")), value);
    }

    let jaccard = token_jaccard(&source.text, &target.text);
    v.set(vocab.index_or_oov("pair:jaccard"), jaccard);
    if lexicons.has_negation(&source.text) {
        v.set(vocab.index_or_oov("pair:neg_source"), 1.0);
    }
    if lexicons.has_negation(&target.text) {
        v.set(vocab.index_or_oov("pair:neg_target"), 1.0);
    }
    if pair.kind == RelationKind::IntraTurn {
        if let Some(d) = pair.sentence_distance {
            v.set(vocab.index_or_oov(distance_bucket(d)), 1.0);
        }
    }
    if source_post.author == target_post.author {
        v.set(vocab.index_or_oov("pair:same_author"), 1.0);
    }
    if !source_post.is_root() {
        v.set(vocab.index_or_oov("pair:source_is_reply"), 1.0);
    }
    Ok(v)
}

// ---------------------------------------------------------------------------
// Discourse labels
// ---------------------------------------------------------------------------

/// A discourse relation name, as produced by an external parser or the
/// built-in marker heuristic.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct DiscourseLabel(pub String);

impl std::fmt::Display for DiscourseLabel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

/// The closed set of discourse labels the pipeline knows, as a frozen
/// vocabulary (one feature per label plus the out-of-vocabulary slot).
pub fn discourse_vocabulary() -> &'static FeatureVocabulary {
    static VOCAB: LazyLock<FeatureVocabulary> = LazyLock::new(|| {
        let names: Vec<String> = include_str!("../data/discourse_labels.txt")
            .lines()
            .map(|l| l.split('#').next().unwrap_or("").trim())
            .filter(|l| !l.is_empty())
            .map(String::from)
            .collect();
        FeatureVocabulary::from_names("discourse", names)
    });
    &VOCAB
}

/// One-hot vector for a discourse label. Labels outside the vocabulary map
/// to the out-of-vocabulary slot (with a warning), so the L1 norm is always
/// exactly 1.
pub fn discourse_onehot(label: &DiscourseLabel, vocab: &FeatureVocabulary) -> SparseFeatureVector {
    let mut v = SparseFeatureVector::new(vocab.id());
    let index = match vocab.index_of(&label.0) {
        Some(i) => i,
        None => {
            log::warn!("discourse label `{label}` outside vocabulary, using reserved slot");
            vocab.oov_index()
        }
    };
    v.set(index, 1.0);
    v
}

/// The ordered marker rules behind [`heuristic_discourse_label`]: the first
/// lexicon that matches the concatenated pair text names the label.
#[derive(Debug, Clone)]
pub struct HeuristicRules {
    rules: Vec<(Lexicon, DiscourseLabel)>,
    default: DiscourseLabel,
}

impl HeuristicRules {
    pub fn new(rules: Vec<(Lexicon, DiscourseLabel)>, default: DiscourseLabel) -> Self {
        HeuristicRules { rules, default }
    }

    /// Built-in rule order: contrast → Antithesis, causal → Cause,
    /// conditional → Condition, purpose → Purpose, evaluative → Evaluation,
    /// otherwise Elaboration.
    pub fn builtin() -> &'static HeuristicRules {
        static RULES: LazyLock<HeuristicRules> = LazyLock::new(|| {
            let rule = |name: &str, file: &str, label: &str| {
                (Lexicon::parse(name, file), DiscourseLabel(label.to_string()))
            };
            HeuristicRules {
                rules: vec![
                    rule("contrast", include_str!("../data/contrast_markers.txt"), "Antithesis"),
                    rule("causal", include_str!("../data/causal_markers.txt"), "Cause"),
                    rule(
                        "conditional",
                        include_str!("../data/conditional_markers.txt"),
                        "Condition",
                    ),
                    rule("purpose", include_str!("../data/purpose_markers.txt"), "Purpose"),
                    rule(
                        "evaluative",
                        include_str!("../data/evaluative_markers.txt"),
                        "Evaluation",
                    ),
                ],
                default: DiscourseLabel("Elaboration".to_string()),
            }
        });
        &RULES
    }

    pub fn label(&self, source_text: &str, target_text: &str) -> DiscourseLabel {
        let joined = format!("{source_text} {target_text}");
        for (lexicon, label) in &self.rules {
            if lexicon.matches(&joined) {
                return label.clone();
            }
        }
        self.default.clone()
    }
}

/// Labels a pair with the built-in marker heuristic (a stand-in for a real
/// discourse parser when one is not available).
pub fn heuristic_discourse_label(source_text: &str, target_text: &str) -> DiscourseLabel {
    HeuristicRules::builtin().label(source_text, target_text)
}
