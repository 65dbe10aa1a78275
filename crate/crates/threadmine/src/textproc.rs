//! Deterministic text processing: sentence segmentation, tokenization, and
//! Markdown blockquote extraction.
//!
//! Everything here is rule-based and dependency-free so that downstream
//! datasets and feature vectors are bit-reproducible. The abbreviation list
//! guarding the segmenter is a versioned data file, not a code constant.

use std::collections::BTreeSet;
use std::io;
use std::path::Path;
use std::sync::LazyLock;

/// Byte range of one sentence within a larger text.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct SentenceSpan {
    /// Byte offset of the first non-whitespace character of the sentence.
    pub start: usize,
    /// Byte offset one past the last non-whitespace character.
    pub end: usize,
    /// 0-based sentence index within the text.
    pub index: usize,
}

impl SentenceSpan {
    /// The sentence text this span covers.
    pub fn text<'a>(&self, source: &'a str) -> &'a str {
        &source[self.start..self.end]
    }
}

/// One blockquote together with the prose that follows it.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BlockquoteSegment {
    /// Quoted text with `>` markers stripped and lines joined by spaces.
    pub quote_text: String,
    /// Everything after the quoted run, up to the next quoted run or the end
    /// of the input, with original line breaks preserved.
    pub tail_text: String,
    /// True when the run contained a second level of quoting (`>>`); the
    /// inner markers are kept verbatim in `quote_text` rather than recursed.
    pub nested: bool,
}

/// Case-insensitive set of period-terminated tokens that never end a sentence.
#[derive(Debug, Clone, Default)]
pub struct AbbreviationList {
    entries: BTreeSet<String>,
}

impl AbbreviationList {
    /// Parses the one-entry-per-line format; `#` starts a comment line.
    pub fn parse(text: &str) -> Self {
        let entries = text
            .lines()
            .map(str::trim)
            .filter(|l| !l.is_empty() && !l.starts_with('#'))
            .map(|l| l.to_lowercase())
            .collect();
        AbbreviationList { entries }
    }

    pub fn from_path(path: &Path) -> io::Result<Self> {
        Ok(Self::parse(&std::fs::read_to_string(path)?))
    }

    /// The list bundled with the crate.
    pub fn builtin() -> &'static AbbreviationList {
        static BUILTIN: LazyLock<AbbreviationList> =
            LazyLock::new(|| AbbreviationList::parse(include_str!("../data/abbreviations.txt")));
        &BUILTIN
    }

    pub fn contains(&self, token: &str) -> bool {
        self.entries.contains(&token.to_lowercase())
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

fn is_closing_punct(ch: char) -> bool {
    matches!(ch, '"' | '\'' | ')' | ']' | '\u{201d}' | '\u{2019}' | '.' | '!' | '?')
}

fn is_sentence_opener(ch: char) -> bool {
    ch.is_uppercase()
        || ch.is_ascii_digit()
        || matches!(ch, '"' | '\'' | '(' | '\u{201c}' | '\u{2018}')
}

/// Splits `text` into sentences using the bundled abbreviation list.
pub fn segment_sentences(text: &str) -> Vec<SentenceSpan> {
    segment_sentences_with(text, AbbreviationList::builtin())
}

/// Splits `text` into sentences.
///
/// A boundary is a `.`, `!`, or `?` (plus any trailing closing quotes or
/// brackets) followed by whitespace and then a capital letter, digit, or
/// opening quote. A period is suppressed as a boundary when the token it
/// terminates is in `abbreviations`. A blank line is always a boundary.
/// Spans never start or end on whitespace, so they jointly cover every
/// non-whitespace character of the input.
pub fn segment_sentences_with(text: &str, abbreviations: &AbbreviationList) -> Vec<SentenceSpan> {
    let chars: Vec<(usize, char)> = text.char_indices().collect();
    let mut spans = Vec::new();
    let mut start: Option<usize> = None;
    let mut last_end = 0usize;

    let close = |spans: &mut Vec<SentenceSpan>, start: &mut Option<usize>, end: usize| {
        if let Some(s) = start.take() {
            let index = spans.len();
            spans.push(SentenceSpan { start: s, end, index });
        }
    };

    let mut i = 0;
    while i < chars.len() {
        let (byte, ch) = chars[i];
        if ch.is_whitespace() {
            if start.is_some() && ch == '\n' {
                // A blank line (possibly with spaces/tabs/CR between the two
                // newlines) terminates the sentence unconditionally.
                let mut j = i + 1;
                while j < chars.len() && matches!(chars[j].1, ' ' | '\t' | '\r') {
                    j += 1;
                }
                if j < chars.len() && chars[j].1 == '\n' {
                    close(&mut spans, &mut start, last_end);
                }
            }
            i += 1;
            continue;
        }

        if start.is_none() {
            start = Some(byte);
        }
        last_end = byte + ch.len_utf8();

        if matches!(ch, '.' | '!' | '?') {
            // The terminator may be followed by closing quotes/brackets that
            // still belong to this sentence.
            let mut j = i + 1;
            while j < chars.len() && is_closing_punct(chars[j].1) {
                last_end = chars[j].0 + chars[j].1.len_utf8();
                j += 1;
            }
            let mut k = j;
            while k < chars.len() && chars[k].1.is_whitespace() {
                k += 1;
            }
            let opens_next = k > j && k < chars.len() && is_sentence_opener(chars[k].1);
            let protected = ch == '.' && abbreviations.contains(&token_ending_at(text, byte));
            if opens_next && !protected {
                close(&mut spans, &mut start, last_end);
            }
            i = j;
            continue;
        }
        i += 1;
    }
    close(&mut spans, &mut start, last_end);
    spans
}

/// The whitespace-delimited token whose final character is the period at
/// `period_byte`, with leading punctuation (e.g. an opening parenthesis)
/// stripped.
fn token_ending_at(text: &str, period_byte: usize) -> String {
    let end = period_byte + 1;
    let start = text[..period_byte]
        .rfind(char::is_whitespace)
        .map(|p| p + text[p..].chars().next().map_or(1, char::len_utf8))
        .unwrap_or(0);
    text[start..end]
        .trim_start_matches(|c: char| !c.is_alphanumeric())
        .to_string()
}

/// Lowercases and splits into alphanumeric runs; every other non-whitespace
/// character becomes its own single-character token, so contractions split at
/// the apostrophe ("don't" → `don`, `'`, `t`).
pub fn tokenize(sentence: &str) -> Vec<String> {
    let mut tokens = Vec::new();
    let mut current = String::new();
    for ch in sentence.chars().flat_map(char::to_lowercase) {
        if ch.is_alphanumeric() {
            current.push(ch);
        } else {
            if !current.is_empty() {
                tokens.push(std::mem::take(&mut current));
            }
            if !ch.is_whitespace() {
                tokens.push(ch.to_string());
            }
        }
    }
    if !current.is_empty() {
        tokens.push(current);
    }
    tokens
}

/// Extracts Markdown blockquotes and the prose that follows each one.
///
/// A blockquote is a maximal run of lines starting with `>` (after optional
/// indentation); one marker and one optional space are stripped per line,
/// and the stripped lines are joined with single spaces. Lines inside fenced
/// code blocks are never treated as quote lines. Runs that strip to nothing
/// are not emitted; their trailing prose attaches to the previous segment.
pub fn extract_blockquotes(markdown: &str) -> Vec<BlockquoteSegment> {
    #[derive(PartialEq, Clone, Copy)]
    enum Mode {
        Preamble,
        Quote,
        Tail,
    }
    let mut segments: Vec<BlockquoteSegment> = Vec::new();
    let mut mode = Mode::Preamble;
    let mut quote_lines: Vec<String> = Vec::new();
    let mut nested = false;
    let mut tail_lines: Vec<String> = Vec::new();
    let mut in_fence = false;

    let flush = |quote_lines: &mut Vec<String>,
                     nested: &mut bool,
                     tail_lines: &mut Vec<String>,
                     segments: &mut Vec<BlockquoteSegment>| {
        let quote_text = quote_lines
            .iter()
            .map(String::as_str)
            .filter(|l| !l.is_empty())
            .collect::<Vec<_>>()
            .join(" ");
        let tail_text = tail_lines.join("\n");
        if quote_text.is_empty() {
            if let Some(last) = segments.last_mut() {
                if !tail_text.is_empty() {
                    if !last.tail_text.is_empty() {
                        last.tail_text.push('\n');
                    }
                    last.tail_text.push_str(&tail_text);
                }
            }
        } else {
            segments.push(BlockquoteSegment { quote_text, tail_text, nested: *nested });
        }
        quote_lines.clear();
        tail_lines.clear();
        *nested = false;
    };

    for line in markdown.lines() {
        let trimmed = line.trim_start();
        if trimmed.starts_with("```") {
            in_fence = !in_fence;
        }
        let is_quote = !in_fence && trimmed.starts_with('>');
        match (is_quote, mode) {
            (true, Mode::Preamble) => {
                mode = Mode::Quote;
            }
            (true, Mode::Tail) => {
                flush(&mut quote_lines, &mut nested, &mut tail_lines, &mut segments);
                mode = Mode::Quote;
            }
            (true, Mode::Quote) | (false, _) => {}
        }
        match mode {
            Mode::Preamble => {}
            Mode::Quote if is_quote => {
                let stripped = trimmed
                    .strip_prefix('>')
                    .map(|r| r.strip_prefix(' ').unwrap_or(r))
                    .unwrap_or(trimmed);
                if stripped.trim_start().starts_with('>') {
                    nested = true;
                }
                quote_lines.push(stripped.to_string());
            }
            Mode::Quote => {
                mode = Mode::Tail;
                tail_lines.push(line.to_string());
            }
            Mode::Tail => {
                tail_lines.push(line.to_string());
            }
        }
    }
    if mode != Mode::Preamble {
        flush(&mut quote_lines, &mut nested, &mut tail_lines, &mut segments);
    }
    segments
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn texts(source: &str) -> Vec<&str> {
        segment_sentences(source).iter().map(|s| s.text(source)).collect()
    }

    #[test]
    fn splits_on_terminator_before_capital() {
        assert_eq!(texts("I agree. But no."), vec!["I agree.", "But no."]);
    }

    #[test]
    fn abbreviation_suppresses_boundary() {
        assert_eq!(texts("This helps, e.g. students abroad."), vec![
            "This helps, e.g. students abroad."
        ]);
    }

    #[test]
    fn opinion_claim_plus_premise_is_two_sentences() {
        let body = "IMHO, Calorie-counting is a crock what you have to look at is how \
                    wholesome are the foods you are eating. Refined sugar is worse than just \
                    empty calories - I believe your body uses a lot of nutrients up just \
                    processing and digesting it.";
        let spans = segment_sentences(body);
        assert_eq!(spans.len(), 2);
        assert!(spans[0].text(body).starts_with("IMHO,"));
        assert!(spans[1].text(body).starts_with("Refined sugar"));
    }

    #[test]
    fn empty_text_yields_no_spans() {
        assert!(segment_sentences("").is_empty());
        assert!(segment_sentences("   \n\t").is_empty());
    }

    #[test]
    fn blank_line_always_splits() {
        assert_eq!(texts("first part\n\nsecond part"), vec!["first part", "second part"]);
        assert_eq!(texts("one\n  \r\n two"), vec!["one", "two"]);
    }

    #[test]
    fn lowercase_continuation_does_not_split() {
        assert_eq!(texts("He arrived at 5 p.m. and left."), vec![
            "He arrived at 5 p.m. and left."
        ]);
    }

    #[test]
    fn closing_quote_stays_with_sentence() {
        assert_eq!(texts("She said \"stop.\" Then silence."), vec![
            "She said \"stop.\"",
            "Then silence."
        ]);
    }

    #[test]
    fn abbreviation_before_capital_is_protected() {
        assert_eq!(texts("Ask Dr. Smith today. He knows."), vec![
            "Ask Dr. Smith today.",
            "He knows."
        ]);
    }

    #[test]
    fn custom_abbreviation_list_is_honored() {
        let abbrevs = AbbreviationList::parse("# custom\nfoo.\n");
        let text = "Call foo. Bar replied.";
        assert_eq!(segment_sentences_with(text, &abbrevs).len(), 1);
        assert_eq!(segment_sentences(text).len(), 2);
    }

    #[test]
    fn spans_are_indexed_and_ordered() {
        let text = "One! Two? Three.";
        let spans = segment_sentences(text);
        assert_eq!(spans.len(), 3);
        for (i, s) in spans.iter().enumerate() {
            assert_eq!(s.index, i);
        }
        assert!(spans.windows(2).all(|w| w[0].end <= w[1].start));
    }

    #[test]
    fn tokenize_splits_contractions_and_keeps_punct() {
        assert_eq!(tokenize("I don't know."), vec!["i", "don", "'", "t", "know", "."]);
    }

    #[test]
    fn tokenize_empty() {
        assert!(tokenize("").is_empty());
    }

    #[test]
    fn tokenize_short_agreement() {
        assert_eq!(tokenize("Good arguments."), vec!["good", "arguments", "."]);
    }

    #[test]
    fn single_quote_run_with_tail() {
        let segs = extract_blockquotes("> claim text\nMy rebuttal here.");
        assert_eq!(segs.len(), 1);
        assert_eq!(segs[0].quote_text, "claim text");
        assert_eq!(segs[0].tail_text, "My rebuttal here.");
        assert!(!segs[0].nested);
    }

    #[test]
    fn no_quotes_no_segments() {
        assert!(extract_blockquotes("just prose\nmore prose").is_empty());
    }

    #[test]
    fn two_runs_in_document_order() {
        let md = "intro line\n> first quote\nreply one\nreply two\n> second quote\n> continues\nreply three\n";
        let segs = extract_blockquotes(md);
        assert_eq!(segs.len(), 2);
        assert_eq!(segs[0].quote_text, "first quote");
        assert_eq!(segs[0].tail_text, "reply one\nreply two");
        assert_eq!(segs[1].quote_text, "second quote continues");
        assert_eq!(segs[1].tail_text, "reply three");
    }

    #[test]
    fn nested_quote_is_flagged_not_recursed() {
        let segs = extract_blockquotes(">> inner words\n> outer words\nanswer\n");
        assert_eq!(segs.len(), 1);
        assert!(segs[0].nested);
        assert_eq!(segs[0].quote_text, "> inner words outer words");
    }

    #[test]
    fn fenced_regions_are_not_scanned_for_quotes() {
        let md = "```\n> not a quote\n```\n> real quote\ntail prose\n";
        let segs = extract_blockquotes(md);
        assert_eq!(segs.len(), 1);
        assert_eq!(segs[0].quote_text, "real quote");
        assert_eq!(segs[0].tail_text, "tail prose");
    }

    #[test]
    fn empty_quote_run_is_dropped() {
        let segs = extract_blockquotes("> real\nmiddle\n>\nafter empty\n");
        assert_eq!(segs.len(), 1);
        assert_eq!(segs[0].quote_text, "real");
        assert_eq!(segs[0].tail_text, "middle\nafter empty");
    }

    proptest! {
        /// Spans cover exactly the non-whitespace characters, in order.
        #[test]
        fn segmentation_covers_all_non_whitespace(text in "[ a-zA-Z.!?\\n\"']{0,200}") {
            let spans = segment_sentences(&text);
            let mut covered = vec![false; text.len()];
            let mut prev_end = 0;
            for s in &spans {
                prop_assert!(s.start >= prev_end);
                prop_assert!(s.end > s.start);
                prop_assert!(!s.text(&text).starts_with(char::is_whitespace));
                prop_assert!(!s.text(&text).ends_with(char::is_whitespace));
                covered[s.start..s.end].iter_mut().for_each(|c| *c = true);
                prev_end = s.end;
            }
            for (i, ch) in text.char_indices() {
                if !ch.is_whitespace() {
                    prop_assert!(covered[i], "byte {} ({:?}) uncovered", i, ch);
                }
            }
        }

        /// Re-tokenizing space-joined tokens is a fixed point.
        #[test]
        fn tokenize_idempotent(text in "[a-zA-Z0-9 .,!?']{0,120}") {
            let once = tokenize(&text);
            let twice = tokenize(&once.join(" "));
            prop_assert_eq!(once, twice);
        }

        /// Quote markers aside, blockquote extraction preserves the
        /// non-whitespace character stream from the first quoted line on.
        #[test]
        fn blockquotes_preserve_content(
            lines in proptest::collection::vec("(> ?)?[a-z]{1,8}( [a-z]{1,8}){0,3}", 1..12)
        ) {
            let input = lines.join("\n");
            let segs = extract_blockquotes(&input);
            if let Some(first_quote) = lines.iter().position(|l| l.starts_with('>')) {
                let expected: String = lines[first_quote..]
                    .iter()
                    .map(|l| {
                        let t = l.strip_prefix('>').map(|r| r.strip_prefix(' ').unwrap_or(r)).unwrap_or(l);
                        t.chars().filter(|c| !c.is_whitespace()).collect::<String>()
                    })
                    .collect();
                let actual: String = segs
                    .iter()
                    .flat_map(|s| s.quote_text.chars().chain(s.tail_text.chars()))
                    .filter(|c| !c.is_whitespace())
                    .collect();
                prop_assert_eq!(actual, expected);
            } else {
                prop_assert!(segs.is_empty());
            }
        }
    }
}
