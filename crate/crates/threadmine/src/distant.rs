//! Distant-supervision dataset builders over raw forum dumps.
//!
//! Two extractors turn newline-delimited comment dumps into weakly labeled
//! argument data without any manual annotation:
//!
//! * **Opinion-acronym pairs** ([`build_imho_dataset`]): a sentence
//!   containing the IMHO/IMO acronym is taken as a claim and the sentence
//!   right after it as its premise. The acronym (and one adjacent comma) is
//!   stripped by default so downstream models cannot key on the trigger.
//! * **Quote–response pairs** ([`build_qr_dataset`]): a blockquote in a
//!   reply that matches text in the parent post marks what the reply
//!   targets; the first sentence after the quote is the response. Matching
//!   is whitespace- and quote-mark-insensitive by default because Markdown
//!   rendering perturbs both; a byte-exact mode is available.
//!
//! Both builders stream the dump line by line (quote–response grouping
//! holds one thread's comments at a time), write one JSON record per line,
//! and account for every skipped input in an [`ExtractionReport`].

use std::collections::{BTreeMap, BTreeSet};
use std::io::{BufRead, Write};
use std::sync::LazyLock;

use regex::Regex;
use serde::{Deserialize, Serialize};

use crate::textproc::{extract_blockquotes, segment_sentences};

/// Errors from dataset building (malformed dump lines are skipped and
/// counted, not raised).
#[derive(Debug, thiserror::Error)]
pub enum DistantError {
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

/// One raw dump record: a comment or post in a flat newline-delimited file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DumpComment {
    pub id: String,
    pub parent_id: String,
    /// Thread the comment belongs to.
    pub link_id: String,
    #[serde(default)]
    pub author: String,
    pub body: String,
    #[serde(default)]
    pub created: i64,
}

/// A claim–premise pair mined from an opinion-acronym sentence.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImhoRecord {
    pub comment_id: String,
    pub claim_sentence: String,
    /// The sentence immediately after the trigger sentence, when one exists
    /// in the same comment.
    pub premise_sentence: Option<String>,
    /// Whether the trigger acronym was removed from `claim_sentence`.
    pub acronym_stripped: bool,
}

/// A quote–response pair mined from a reply that blockquotes its parent.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QrRecord {
    pub thread_id: String,
    pub parent_post_id: String,
    pub response_post_id: String,
    /// The quoted text as it appears in the reply (markers stripped).
    pub quote_text: String,
    /// First sentence the reply writes after the quote.
    pub response_sentence: String,
    /// Byte range in the parent body that the quote matches under the
    /// active normalization.
    pub parent_char_span: (usize, usize),
    /// True when the quote matched at more than one parent position (the
    /// first match is used).
    pub ambiguous: bool,
}

/// Counts of what a build consumed, produced, and skipped.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExtractionReport {
    pub records: usize,
    pub comments_seen: usize,
    /// Skip reason → count.
    pub skipped: BTreeMap<String, usize>,
}

impl ExtractionReport {
    pub fn note_skip(&mut self, reason: &str) {
        *self.skipped.entry(reason.to_string()).or_insert(0) += 1;
    }

    /// Stable `key = value` rendering for the sidecar summary file.
    pub fn render(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!("records = {}\n", self.records));
        out.push_str(&format!("comments_seen = {}\n", self.comments_seen));
        for (reason, count) in &self.skipped {
            out.push_str(&format!("skip.{reason} = {count}\n"));
        }
        out
    }
}

pub const SKIP_UNDECODABLE: &str = "undecodable-line";
pub const SKIP_ORPHAN_PARENT: &str = "orphan-parent";
pub const SKIP_QUOTE_TOO_SHORT: &str = "quote-too-short";
pub const SKIP_QUOTE_NOT_FOUND: &str = "quote-not-found";
pub const SKIP_NO_RESPONSE_SENTENCE: &str = "no-response-sentence";
pub const SKIP_EXCLUDED_THREAD: &str = "excluded-thread";

// ---------------------------------------------------------------------------
// Opinion-acronym extraction
// ---------------------------------------------------------------------------

/// Settings for [`build_imho_dataset`].
#[derive(Debug, Clone, Default)]
pub struct ImhoOptions {
    /// Leave the trigger acronym in the claim sentence.
    pub keep_acronym: bool,
}

static TRIGGER: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"(?i)\b(?:imho|imo)\b").expect("static pattern"));

/// Removes every trigger occurrence plus one adjacent comma each
/// (preferring a following comma), then collapses leftover whitespace.
fn strip_triggers(sentence: &str) -> String {
    let bytes = sentence.as_bytes();
    let mut remove: Vec<(usize, usize)> = Vec::new();
    for m in TRIGGER.find_iter(sentence) {
        let (mut start, mut end) = (m.start(), m.end());
        let mut forward = end;
        while forward < bytes.len() && bytes[forward] == b' ' {
            forward += 1;
        }
        if forward < bytes.len() && bytes[forward] == b',' {
            end = forward + 1;
        } else {
            let mut backward = start;
            while backward > 0 && bytes[backward - 1] == b' ' {
                backward -= 1;
            }
            if backward > 0 && bytes[backward - 1] == b',' {
                start = backward - 1;
            }
        }
        remove.push((start, end));
    }
    let mut kept = String::with_capacity(sentence.len());
    let mut cursor = 0;
    for (start, end) in remove {
        kept.push_str(&sentence[cursor..start.max(cursor)]);
        cursor = cursor.max(end);
    }
    kept.push_str(&sentence[cursor..]);
    kept.split_whitespace().collect::<Vec<_>>().join(" ")
}

/// Mines the opinion-acronym records of one comment: one record per
/// sentence containing the trigger, with the following sentence (if any)
/// as the premise.
pub fn imho_records_from_comment(
    comment: &DumpComment,
    options: &ImhoOptions,
) -> Vec<ImhoRecord> {
    let spans = segment_sentences(&comment.body);
    let mut out = Vec::new();
    for (i, span) in spans.iter().enumerate() {
        let sentence = span.text(&comment.body);
        if !TRIGGER.is_match(sentence) {
            continue;
        }
        let claim_sentence =
            if options.keep_acronym { sentence.to_string() } else { strip_triggers(sentence) };
        out.push(ImhoRecord {
            comment_id: comment.id.clone(),
            claim_sentence,
            premise_sentence: spans.get(i + 1).map(|s| s.text(&comment.body).to_string()),
            acronym_stripped: !options.keep_acronym,
        });
    }
    out
}

/// Streams a dump and writes one opinion-acronym record per line.
pub fn build_imho_dataset<R: BufRead, W: Write>(
    reader: R,
    mut writer: W,
    options: &ImhoOptions,
) -> Result<ExtractionReport, DistantError> {
    let mut report = ExtractionReport::default();
    for line in reader.lines() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let Ok(comment) = serde_json::from_str::<DumpComment>(&line) else {
            report.note_skip(SKIP_UNDECODABLE);
            continue;
        };
        report.comments_seen += 1;
        for record in imho_records_from_comment(&comment, options) {
            serde_json::to_writer(&mut writer, &record)?;
            writer.write_all(b"\n")?;
            report.records += 1;
        }
    }
    Ok(report)
}

// ---------------------------------------------------------------------------
// Quote–response extraction
// ---------------------------------------------------------------------------

/// Settings for [`build_qr_dataset`].
#[derive(Debug, Clone)]
pub struct QrOptions {
    /// Quotes shorter than this many normalized characters are dropped as
    /// too ambiguous to align.
    pub min_quote_chars: usize,
    /// Match quote bytes verbatim instead of under normalization.
    pub byte_exact: bool,
    /// Threads to exclude (e.g. ones that overlap a labeled corpus).
    pub exclude_threads: BTreeSet<String>,
}

impl Default for QrOptions {
    fn default() -> Self {
        QrOptions { min_quote_chars: 20, byte_exact: false, exclude_threads: BTreeSet::new() }
    }
}

fn unify_char(c: char) -> char {
    match c {
        '\u{201C}' | '\u{201D}' | '\u{201E}' => '"',
        '\u{2018}' | '\u{2019}' | '\u{201A}' => '\'',
        '\u{2010}' | '\u{2011}' | '\u{2012}' | '\u{2013}' | '\u{2014}' | '\u{2015}'
        | '\u{2212}' => '-',
        c => c,
    }
}

/// A normalized text with, per normalized character, the byte range of the
/// original it stands for.
struct Normalized {
    text: String,
    /// One `(start, end)` original byte range per normalized char.
    spans: Vec<(usize, usize)>,
}

/// Collapses whitespace runs to single spaces (trimming the ends) and
/// unifies quote-mark and dash variants.
fn normalize(text: &str) -> Normalized {
    let mut out = Normalized { text: String::new(), spans: Vec::new() };
    let mut pending_ws: Option<(usize, usize)> = None;
    for (offset, c) in text.char_indices() {
        let end = offset + c.len_utf8();
        if c.is_whitespace() {
            pending_ws = match pending_ws {
                None => Some((offset, end)),
                Some((s, _)) => Some((s, end)),
            };
            continue;
        }
        if let Some(run) = pending_ws.take() {
            if !out.text.is_empty() {
                out.text.push(' ');
                out.spans.push(run);
            }
        }
        out.text.push(unify_char(c));
        out.spans.push((offset, end));
    }
    out
}

/// All byte offsets (in `haystack.text`) where `needle` occurs.
fn find_all(haystack: &str, needle: &str) -> Vec<usize> {
    if needle.is_empty() {
        return Vec::new();
    }
    haystack.match_indices(needle).map(|(i, _)| i).collect()
}

/// Maps a byte range of the normalized text back to original byte offsets.
fn original_span(norm: &Normalized, byte_start: usize, byte_len: usize) -> (usize, usize) {
    let char_start = norm.text[..byte_start].chars().count();
    let char_len = norm.text[byte_start..byte_start + byte_len].chars().count();
    let first = norm.spans[char_start];
    let last = norm.spans[char_start + char_len - 1];
    (first.0, last.1)
}

/// Mines the quote–response records of one thread's comments. Skips are
/// accounted in `report`; emitted records are sorted by
/// `(response_post_id, span)` so output files are canonical.
pub fn qr_records_from_group(
    group: &[DumpComment],
    options: &QrOptions,
    report: &mut ExtractionReport,
) -> Vec<QrRecord> {
    let mut records = Vec::new();
    let by_id: BTreeMap<&str, &DumpComment> = group.iter().map(|c| (c.id.as_str(), c)).collect();
    for response in group {
        let segments = extract_blockquotes(&response.body);
        if segments.is_empty() {
            continue;
        }
        let Some(parent) = by_id.get(response.parent_id.as_str()) else {
            report.note_skip(SKIP_ORPHAN_PARENT);
            continue;
        };
        let parent_norm = normalize(&parent.body);
        for segment in &segments {
            let quote_norm = normalize(&segment.quote_text);
            if quote_norm.text.chars().count() < options.min_quote_chars {
                report.note_skip(SKIP_QUOTE_TOO_SHORT);
                continue;
            }
            let spans: Vec<(usize, usize)> = if options.byte_exact {
                find_all(&parent.body, &segment.quote_text)
                    .into_iter()
                    .map(|b| (b, b + segment.quote_text.len()))
                    .collect()
            } else {
                find_all(&parent_norm.text, &quote_norm.text)
                    .into_iter()
                    .map(|b| original_span(&parent_norm, b, quote_norm.text.len()))
                    .collect()
            };
            if spans.is_empty() {
                report.note_skip(SKIP_QUOTE_NOT_FOUND);
                continue;
            }
            let Some(first_sentence) = segment_sentences(&segment.tail_text).into_iter().next()
            else {
                report.note_skip(SKIP_NO_RESPONSE_SENTENCE);
                continue;
            };
            records.push(QrRecord {
                thread_id: response.link_id.clone(),
                parent_post_id: parent.id.clone(),
                response_post_id: response.id.clone(),
                quote_text: segment.quote_text.clone(),
                response_sentence: first_sentence.text(&segment.tail_text).to_string(),
                parent_char_span: spans[0],
                ambiguous: spans.len() > 1,
            });
        }
    }
    records.sort_by(|a, b| {
        (&a.response_post_id, a.parent_char_span).cmp(&(&b.response_post_id, b.parent_char_span))
    });
    records
}

/// Streams a dump whose lines are grouped by thread (consecutive equal
/// `link_id`s) and writes one quote–response record per line.
pub fn build_qr_dataset<R: BufRead, W: Write>(
    reader: R,
    mut writer: W,
    options: &QrOptions,
) -> Result<ExtractionReport, DistantError> {
    let mut report = ExtractionReport::default();
    let mut group: Vec<DumpComment> = Vec::new();

    let flush = |group: &mut Vec<DumpComment>,
                     report: &mut ExtractionReport,
                     writer: &mut W|
     -> Result<(), DistantError> {
        if group.is_empty() {
            return Ok(());
        }
        if options.exclude_threads.contains(&group[0].link_id) {
            report.note_skip(SKIP_EXCLUDED_THREAD);
        } else {
            for record in qr_records_from_group(group, options, report) {
                serde_json::to_writer(&mut *writer, &record)?;
                writer.write_all(b"\n")?;
                report.records += 1;
            }
        }
        group.clear();
        Ok(())
    };

    for line in reader.lines() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let Ok(comment) = serde_json::from_str::<DumpComment>(&line) else {
            report.note_skip(SKIP_UNDECODABLE);
            continue;
        };
        report.comments_seen += 1;
        if group.last().is_some_and(|g| g.link_id != comment.link_id) {
            flush(&mut group, &mut report, &mut writer)?;
        }
        group.push(comment);
    }
    flush(&mut group, &mut report, &mut writer)?;
    Ok(report)
}

/// Reads back a quote–response record file (one JSON record per line).
pub fn read_qr_records<R: BufRead>(reader: R) -> Result<Vec<QrRecord>, DistantError> {
    let mut out = Vec::new();
    for line in reader.lines() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(&line)?);
    }
    Ok(out)
}

/// Reads back an opinion-acronym record file (one JSON record per line).
pub fn read_imho_records<R: BufRead>(reader: R) -> Result<Vec<ImhoRecord>, DistantError> {
    let mut out = Vec::new();
    for line in reader.lines() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(&line)?);
    }
    Ok(out)
}
