//! Target-salience scoring: which sentences of a post do replies address?
//!
//! Quote–response records give distant labels for free: a sentence of a
//! quoted post is positive iff some reply's quote span overlaps it. On top
//! of those labels this module builds fixed-width sentence features
//! (position, length, TF-IDF centrality within the post, claim-cue and
//! second-person counts), trains a binary linear scorer, and evaluates it
//! as a ranker via recall@K on held-out posts against the first-K
//! positional baseline. The trained scorer plugs into candidate pruning as
//! a [`SalienceScorer`].

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::candidates::SalienceScorer;
use crate::corpus::{Post, Proposition};
use crate::distant::{ExtractionReport, QrRecord};
use crate::features::{FeatureVocabulary, LexiconSet, SparseFeatureVector};
use crate::models::linear::{train_linear, LinearConfig, LinearModel};
use crate::models::{Dataset, ModelError};
use crate::textproc::{segment_sentences, tokenize};

/// Skip reason for quote records whose quoted post body is unavailable.
pub const SKIP_UNRESOLVED_POST: &str = "unresolved-post";

/// One sentence of a quoted post, featurized and distantly labeled.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SalienceExample {
    pub thread_id: String,
    pub post_id: String,
    pub sentence_index: usize,
    pub features: SparseFeatureVector,
    /// True iff some quote span overlaps this sentence.
    pub label: bool,
}

/// The fixed sentence-feature vocabulary (no lexical features, so no
/// training-time vocabulary pass is needed).
pub fn salience_vocabulary() -> &'static FeatureVocabulary {
    static VOCAB: std::sync::LazyLock<FeatureVocabulary> = std::sync::LazyLock::new(|| {
        FeatureVocabulary::from_names(
            "salience",
            vec![
                "pos:abs".into(),
                "pos:rel".into(),
                "len:tokens".into(),
                "tfidf:centrality".into(),
                "cnt:claim_cue".into(),
                "cnt:second_person".into(),
            ],
        )
    });
    &VOCAB
}

fn content_tokens(text: &str) -> Vec<String> {
    tokenize(text).into_iter().filter(|t| t.chars().any(|c| c.is_alphanumeric())).collect()
}

/// Cosine similarity of each sentence's TF-IDF vector with the post's
/// centroid. IDF uses the smoothed form `ln((1 + n) / (1 + df)) + 1` so
/// ubiquitous tokens still carry weight.
fn tfidf_centralities(sentences: &[&str]) -> Vec<f64> {
    let n = sentences.len();
    let token_lists: Vec<Vec<String>> = sentences.iter().map(|s| content_tokens(s)).collect();
    let mut df: BTreeMap<&str, usize> = BTreeMap::new();
    for tokens in &token_lists {
        let mut seen: Vec<&str> = tokens.iter().map(String::as_str).collect();
        seen.sort_unstable();
        seen.dedup();
        for t in seen {
            *df.entry(t).or_insert(0) += 1;
        }
    }
    let idf: BTreeMap<&str, f64> = df
        .iter()
        .map(|(&t, &d)| (t, ((1.0 + n as f64) / (1.0 + d as f64)).ln() + 1.0))
        .collect();

    let vectors: Vec<BTreeMap<&str, f64>> = token_lists
        .iter()
        .map(|tokens| {
            let mut v: BTreeMap<&str, f64> = BTreeMap::new();
            for t in tokens {
                *v.entry(t.as_str()).or_insert(0.0) += 1.0;
            }
            for (t, w) in v.iter_mut() {
                *w *= idf[t];
            }
            v
        })
        .collect();

    let mut centroid: BTreeMap<&str, f64> = BTreeMap::new();
    for v in &vectors {
        for (&t, &w) in v {
            *centroid.entry(t).or_insert(0.0) += w / n as f64;
        }
    }
    let norm = |v: &BTreeMap<&str, f64>| v.values().map(|w| w * w).sum::<f64>().sqrt();
    let centroid_norm = norm(&centroid);
    vectors
        .iter()
        .map(|v| {
            let dot: f64 = v.iter().map(|(t, w)| w * centroid.get(t).copied().unwrap_or(0.0)).sum();
            let d = norm(v) * centroid_norm;
            if d == 0.0 {
                0.0
            } else {
                dot / d
            }
        })
        .collect()
}

/// Features of sentence `index` within the sentence sequence `texts`.
fn sentence_features(
    texts: &[&str],
    centralities: &[f64],
    index: usize,
    lexicons: &LexiconSet,
) -> SparseFeatureVector {
    let vocab = salience_vocabulary();
    let text = texts[index];
    let mut v = SparseFeatureVector::new(vocab.id());
    let set = |v: &mut SparseFeatureVector, name: &str, value: f64| {
        v.set(vocab.index_of(name).expect("fixed vocabulary"), value);
    };
    set(&mut v, "pos:abs", index as f64);
    set(&mut v, "pos:rel", index as f64 / texts.len().max(1) as f64);
    set(&mut v, "len:tokens", tokenize(text).len() as f64);
    set(&mut v, "tfidf:centrality", centralities[index]);
    set(&mut v, "cnt:claim_cue", lexicons.claim_cues.count_matches(text) as f64);
    set(&mut v, "cnt:second_person", lexicons.second_person.count_matches(text) as f64);
    v
}

/// Builds one example per sentence of every quoted post.
///
/// `post_bodies` maps `(thread_id, post_id)` to the post text; quote
/// records whose post is missing are counted under
/// [`SKIP_UNRESOLVED_POST`]. A sentence is positive iff any record's
/// span overlaps it (any character overlap).
pub fn build_salience_dataset(
    records: &[QrRecord],
    post_bodies: &BTreeMap<(String, String), String>,
    lexicons: &LexiconSet,
) -> (Vec<SalienceExample>, ExtractionReport) {
    let mut report = ExtractionReport::default();
    let mut spans_by_post: BTreeMap<(String, String), Vec<(usize, usize)>> = BTreeMap::new();
    for record in records {
        let key = (record.thread_id.clone(), record.parent_post_id.clone());
        if !post_bodies.contains_key(&key) {
            report.note_skip(SKIP_UNRESOLVED_POST);
            continue;
        }
        spans_by_post.entry(key).or_default().push(record.parent_char_span);
    }

    let mut examples = Vec::new();
    for ((thread_id, post_id), quote_spans) in &spans_by_post {
        let body = &post_bodies[&(thread_id.clone(), post_id.clone())];
        let sentence_spans = segment_sentences(body);
        let texts: Vec<&str> = sentence_spans.iter().map(|s| s.text(body)).collect();
        let centralities = tfidf_centralities(&texts);
        report.comments_seen += 1;
        for (i, span) in sentence_spans.iter().enumerate() {
            let label =
                quote_spans.iter().any(|&(qs, qe)| span.start < qe && qs < span.end);
            examples.push(SalienceExample {
                thread_id: thread_id.clone(),
                post_id: post_id.clone(),
                sentence_index: i,
                features: sentence_features(&texts, &centralities, i, lexicons),
                label,
            });
        }
    }
    report.records = examples.len();
    (examples, report)
}

/// Settings for [`train_salience`].
#[derive(Debug, Clone)]
pub struct SalienceConfig {
    pub linear: LinearConfig,
    /// Fraction of posts held out for the recall@K curve.
    pub holdout_fraction: f64,
    pub split_seed: u64,
}

impl Default for SalienceConfig {
    fn default() -> Self {
        SalienceConfig { linear: LinearConfig::default(), holdout_fraction: 0.1, split_seed: 0 }
    }
}

/// A trained salience scorer with its held-out ranking diagnostics.
#[derive(Debug, Clone)]
pub struct SalienceTraining {
    pub model: LinearModel,
    /// Held-out recall (fraction of quoted sentences) within the top K, per
    /// K from 1 to the curve length.
    pub recall_at_k: Vec<f64>,
    /// Same curve for the first-K positional baseline.
    pub baseline_recall_at_k: Vec<f64>,
    /// The knee of the model curve: smallest K furthest above the straight
    /// line from (0, 0) to the curve's end.
    pub knee_k: usize,
}

struct RankedPost {
    /// Sentence order by descending score (ties keep document order).
    order: Vec<usize>,
    labels: Vec<bool>,
}

fn recall_curve(posts: &[RankedPost], k_max: usize) -> Vec<f64> {
    let total: usize =
        posts.iter().map(|p| p.labels.iter().filter(|&&l| l).count()).sum();
    (1..=k_max)
        .map(|k| {
            if total == 0 {
                return 0.0;
            }
            let hit: usize = posts
                .iter()
                .map(|p| p.order.iter().take(k).filter(|&&i| p.labels[i]).count())
                .sum();
            hit as f64 / total as f64
        })
        .collect()
}

/// Smallest K maximizing the curve's height above the chord to its end.
fn knee_of(curve: &[f64]) -> usize {
    if curve.is_empty() {
        return 1;
    }
    let k_max = curve.len() as f64;
    let end = curve[curve.len() - 1];
    let mut best = (1, f64::NEG_INFINITY);
    for (i, &r) in curve.iter().enumerate() {
        let k = (i + 1) as f64;
        let above = r - k * end / k_max;
        if above > best.1 {
            best = (i + 1, above);
        }
    }
    best.0
}

/// Trains the binary salience scorer and computes held-out recall@K curves
/// for it and the first-K baseline.
///
/// Posts (not sentences) are split, so no post straddles the boundary; with
/// fewer than two posts everything is used for both sides. The curve runs
/// to `max(10, longest evaluated post)`.
pub fn train_salience(
    examples: &[SalienceExample],
    config: &SalienceConfig,
) -> Result<SalienceTraining, ModelError> {
    let mut by_post: BTreeMap<(&str, &str), Vec<&SalienceExample>> = BTreeMap::new();
    for ex in examples {
        by_post.entry((ex.thread_id.as_str(), ex.post_id.as_str())).or_default().push(ex);
    }
    let post_keys: Vec<(&str, &str)> = by_post.keys().copied().collect();

    let (train_posts, eval_posts): (Vec<(&str, &str)>, Vec<(&str, &str)>) =
        if post_keys.len() < 2 {
            (post_keys.clone(), post_keys.clone())
        } else {
            let mut order: Vec<usize> = (0..post_keys.len()).collect();
            let mut rng = ChaCha8Rng::seed_from_u64(config.split_seed);
            order.shuffle(&mut rng);
            let n_eval = ((config.holdout_fraction * post_keys.len() as f64).round() as usize)
                .clamp(1, post_keys.len() - 1);
            let eval: Vec<(&str, &str)> =
                order[..n_eval].iter().map(|&i| post_keys[i]).collect();
            let train: Vec<(&str, &str)> =
                order[n_eval..].iter().map(|&i| post_keys[i]).collect();
            (train, eval)
        };

    let vocab = salience_vocabulary();
    let mut dataset = Dataset::binary(vocab.id(), vocab.dimension());
    for key in &train_posts {
        for ex in &by_post[key] {
            dataset.push_binary(ex.features.clone(), ex.label)?;
        }
    }
    let model = train_linear(&dataset, &config.linear)?;

    let mut ranked = Vec::new();
    let mut baseline = Vec::new();
    let mut longest = 0usize;
    for key in &eval_posts {
        let post = &by_post[key];
        longest = longest.max(post.len());
        let mut scored: Vec<(usize, f64)> = post
            .iter()
            .enumerate()
            .map(|(i, ex)| Ok((i, model.score_positive(&ex.features)?)))
            .collect::<Result<_, ModelError>>()?;
        scored.sort_by(|a, b| b.1.total_cmp(&a.1));
        let labels: Vec<bool> = post.iter().map(|ex| ex.label).collect();
        ranked.push(RankedPost { order: scored.into_iter().map(|(i, _)| i).collect(), labels: labels.clone() });
        baseline.push(RankedPost { order: (0..post.len()).collect(), labels });
    }
    let k_max = longest.max(10);
    let recall_at_k = recall_curve(&ranked, k_max);
    let baseline_recall_at_k = recall_curve(&baseline, k_max);
    let knee_k = knee_of(&recall_at_k);

    Ok(SalienceTraining { model, recall_at_k, baseline_recall_at_k, knee_k })
}

/// A trained scorer usable in candidate pruning: scores a proposition by
/// the same sentence features, computed over the post's propositions.
#[derive(Debug, Clone)]
pub struct TrainedSalienceScorer {
    model: LinearModel,
    lexicons: &'static LexiconSet,
}

impl TrainedSalienceScorer {
    pub fn new(model: LinearModel) -> Self {
        TrainedSalienceScorer { model, lexicons: LexiconSet::builtin() }
    }

    pub fn model(&self) -> &LinearModel {
        &self.model
    }
}

impl SalienceScorer for TrainedSalienceScorer {
    fn score(&self, prop: &Proposition, post: &Post) -> f64 {
        let texts: Vec<&str> = post.propositions.iter().map(|p| p.text.as_str()).collect();
        let index =
            post.propositions.iter().position(|p| p.id == prop.id).unwrap_or(0);
        let centralities = tfidf_centralities(&texts);
        let features = sentence_features(&texts, &centralities, index, self.lexicons);
        self.model.score_positive(&features).unwrap_or_else(|e| {
            log::warn!("salience scoring failed: {e}");
            0.5
        })
    }
}
