//! Corpus-level descriptive statistics.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{ensure_valid, ComponentLabel, CorpusError, RelationKind, RelationType, Thread};
use crate::textproc::segment_sentences;

/// Aggregate counts and rates over a corpus.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusStats {
    pub threads: usize,
    pub posts: usize,
    /// Mean sentences per post; a title counts as one sentence of its post.
    pub sentences_per_post: f64,
    pub component_counts: BTreeMap<ComponentLabel, usize>,
    pub relation_counts: BTreeMap<(RelationKind, RelationType), usize>,
    /// Signed sentence distance source−target for every within-post relation.
    pub intra_distance_histogram: BTreeMap<i64, usize>,
    /// Number of candidate (premise → component) pairs within posts,
    /// `Σ_posts p·(c+p−1)` for `c` claims (incl. main claim) and `p` premises.
    pub intra_candidates: usize,
    /// Number of candidate (claim → parent component) pairs across posts.
    pub inter_candidates: usize,
    /// Labeled intra pairs / intra candidates; 0.0 when undefined.
    pub positive_rate_intra: f64,
    pub positive_rate_inter: f64,
    /// False when the corresponding candidate count is zero, making the rate
    /// meaningless rather than truly zero.
    pub intra_rate_defined: bool,
    pub inter_rate_defined: bool,
}

/// Computes corpus statistics, validating every thread first.
pub fn corpus_stats(corpus: &[Thread]) -> Result<CorpusStats, CorpusError> {
    for thread in corpus {
        ensure_valid(thread)?;
    }

    let mut posts = 0usize;
    let mut sentence_total = 0usize;
    let mut component_counts: BTreeMap<ComponentLabel, usize> = BTreeMap::new();
    let mut relation_counts: BTreeMap<(RelationKind, RelationType), usize> = BTreeMap::new();
    let mut histogram: BTreeMap<i64, usize> = BTreeMap::new();
    let mut intra_candidates = 0usize;
    let mut inter_candidates = 0usize;
    let mut intra_gold = 0usize;
    let mut inter_gold = 0usize;

    for thread in corpus {
        let by_id: BTreeMap<&str, &super::Proposition> =
            thread.propositions().map(|p| (p.id.as_str(), p)).collect();
        let count =
            |post: &super::Post, label: ComponentLabel| post.propositions.iter().filter(|p| p.label == label).count();

        for post in &thread.posts {
            posts += 1;
            sentence_total +=
                segment_sentences(&post.text).len() + usize::from(post.title.is_some());
            for prop in &post.propositions {
                *component_counts.entry(prop.label).or_default() += 1;
            }
            let premises = count(post, ComponentLabel::Premise);
            let claims = count(post, ComponentLabel::Claim) + count(post, ComponentLabel::MainClaim);
            if premises > 0 {
                intra_candidates += premises * (claims + premises - 1);
            }
            if let Some(parent_id) = &post.parent_id {
                if let Some(parent) = thread.post(parent_id) {
                    let sources = count(post, ComponentLabel::Claim);
                    let targets = parent
                        .propositions
                        .iter()
                        .filter(|p| p.label.is_argumentative())
                        .count();
                    inter_candidates += sources * targets;
                }
            }
        }

        for rel in &thread.relations {
            *relation_counts.entry((rel.kind, rel.rel_type)).or_default() += 1;
            match rel.kind {
                RelationKind::IntraTurn => {
                    intra_gold += 1;
                    if let (Some(s), Some(t)) =
                        (by_id.get(rel.source_id.as_str()), by_id.get(rel.target_id.as_str()))
                    {
                        let d = s.sentence_index as i64 - t.sentence_index as i64;
                        *histogram.entry(d).or_default() += 1;
                    }
                }
                RelationKind::InterTurn => inter_gold += 1,
            }
        }
    }

    let intra_rate_defined = intra_candidates > 0;
    let inter_rate_defined = inter_candidates > 0;
    Ok(CorpusStats {
        threads: corpus.len(),
        posts,
        sentences_per_post: if posts > 0 { sentence_total as f64 / posts as f64 } else { 0.0 },
        component_counts,
        relation_counts,
        intra_distance_histogram: histogram,
        intra_candidates,
        inter_candidates,
        positive_rate_intra: if intra_rate_defined {
            intra_gold as f64 / intra_candidates as f64
        } else {
            0.0
        },
        positive_rate_inter: if inter_rate_defined {
            inter_gold as f64 / inter_candidates as f64
        } else {
            0.0
        },
        intra_rate_defined,
        inter_rate_defined,
    })
}

impl CorpusStats {
    /// Flat machine-readable rendering, one `key = value` line each.
    pub fn render_machine(&self) -> String {
        let mut out = String::new();
        let mut kv = |k: &str, v: String| {
            out.push_str(k);
            out.push_str(" = ");
            out.push_str(&v);
            out.push('\n');
        };
        kv("corpus.threads", self.threads.to_string());
        kv("corpus.posts", self.posts.to_string());
        kv("corpus.sentences_per_post", self.sentences_per_post.to_string());
        for (label, n) in &self.component_counts {
            kv(&format!("corpus.components.{label}"), n.to_string());
        }
        for ((kind, rel_type), n) in &self.relation_counts {
            kv(&format!("corpus.relations.{kind}.{rel_type}"), n.to_string());
        }
        for (d, n) in &self.intra_distance_histogram {
            kv(&format!("corpus.intra_distance.{d:+}"), n.to_string());
        }
        kv("corpus.candidates.intra", self.intra_candidates.to_string());
        kv("corpus.candidates.inter", self.inter_candidates.to_string());
        kv("corpus.positive_rate.intra", self.positive_rate_intra.to_string());
        kv("corpus.positive_rate.inter", self.positive_rate_inter.to_string());
        kv("corpus.positive_rate.intra_defined", self.intra_rate_defined.to_string());
        kv("corpus.positive_rate.inter_defined", self.inter_rate_defined.to_string());
        out
    }
}
