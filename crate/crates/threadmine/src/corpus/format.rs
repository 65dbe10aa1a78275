//! Line-oriented thread file format.
//!
//! ````text
//! thread t1
//!
//! post a parent=- author=alice
//! title: Cats are the best pets.
//! ```
//! Cats purr. They are soft.
//! ```
//! adu a0 0 0 23 MainClaim
//! adu a1 0 0 10 Claim
//! adu a2 1 11 25 Premise
//!
//! post b parent=a author=bob
//! ...
//!
//! rel a2 a1 IntraTurn Support
//! ````
//!
//! Post bodies sit between ``` fences and are stored verbatim (joined with
//! `\n`); `adu` offsets are byte offsets into the body, except that a
//! `MainClaim` span indexes the post's `title:` line. Blank lines outside
//! fences are ignored. `rel` lines may appear after any completed post block
//! and are serialized at the end of the document.

use super::{
    ensure_valid, ComponentLabel, CorpusError, Post, Proposition, RelationInstance, Thread,
};

const FENCE: &str = "```";

fn err(line: usize, message: impl Into<String>) -> CorpusError {
    CorpusError::Parse { line, message: message.into() }
}

struct PostBuilder {
    id: String,
    author: String,
    parent_id: Option<String>,
    title: Option<String>,
    body: Option<String>,
    adus: Vec<(String, usize, usize, usize, ComponentLabel)>,
}

impl PostBuilder {
    fn finish(self) -> Post {
        let body = self.body.unwrap_or_default();
        let propositions = self
            .adus
            .into_iter()
            .map(|(id, sentence_index, start, end, label)| {
                let source = if label == ComponentLabel::MainClaim {
                    self.title.as_deref().unwrap_or("")
                } else {
                    body.as_str()
                };
                let text = source.get(start..end).unwrap_or("").to_string();
                Proposition {
                    id,
                    post_id: self.id.clone(),
                    sentence_index,
                    char_span: (start, end),
                    text,
                    label,
                }
            })
            .collect();
        Post {
            id: self.id,
            author: self.author,
            parent_id: self.parent_id,
            text: body,
            title: self.title,
            propositions,
        }
    }
}

/// Parses one thread document, then validates it.
///
/// Structural problems report the offending line; a structurally sound
/// document whose content breaks a thread invariant yields
/// [`CorpusError::Invalid`] listing every violated rule.
pub fn parse_thread(document: &str) -> Result<Thread, CorpusError> {
    let mut thread_id: Option<String> = None;
    let mut posts: Vec<Post> = Vec::new();
    let mut relations: Vec<RelationInstance> = Vec::new();
    let mut current: Option<PostBuilder> = None;
    let mut fence_open_line = 0usize;
    let mut in_fence = false;
    let mut body_lines: Vec<&str> = Vec::new();

    for (n, raw) in document.lines().enumerate() {
        let n = n + 1;
        if in_fence {
            if raw.trim_end() == FENCE {
                in_fence = false;
                let post = current
                    .as_mut()
                    .expect("fence requires an open post block");
                post.body = Some(body_lines.join("\n"));
                body_lines.clear();
            } else {
                body_lines.push(raw);
            }
            continue;
        }
        let line = raw.trim_end();
        if line.is_empty() {
            continue;
        }

        if let Some(rest) = line.strip_prefix("thread ") {
            if thread_id.is_some() {
                return Err(err(n, "duplicate `thread` header"));
            }
            let id = rest.trim();
            if id.is_empty() || id.contains(char::is_whitespace) {
                return Err(err(n, "thread id must be a single non-empty token"));
            }
            thread_id = Some(id.to_string());
        } else if let Some(rest) = line.strip_prefix("post ") {
            if thread_id.is_none() {
                return Err(err(n, "`post` before `thread` header"));
            }
            if let Some(p) = current.take() {
                posts.push(p.finish());
            }
            let (id, rest) = rest
                .split_once(' ')
                .ok_or_else(|| err(n, "expected `post <id> parent=<id|-> author=<name>`"))?;
            let (parent_tok, rest) = rest
                .split_once(' ')
                .ok_or_else(|| err(n, "expected `parent=<id|->` then `author=<name>`"))?;
            let parent = parent_tok
                .strip_prefix("parent=")
                .ok_or_else(|| err(n, format!("expected `parent=...`, found `{parent_tok}`")))?;
            let author = rest
                .strip_prefix("author=")
                .ok_or_else(|| err(n, format!("expected `author=...`, found `{rest}`")))?;
            current = Some(PostBuilder {
                id: id.to_string(),
                author: author.to_string(),
                parent_id: (parent != "-").then(|| parent.to_string()),
                title: None,
                body: None,
                adus: Vec::new(),
            });
        } else if let Some(rest) = line.strip_prefix("title:") {
            let post = current
                .as_mut()
                .ok_or_else(|| err(n, "`title:` outside a post block"))?;
            if post.title.is_some() {
                return Err(err(n, format!("post `{}` has two titles", post.id)));
            }
            post.title = Some(rest.strip_prefix(' ').unwrap_or(rest).to_string());
        } else if line == FENCE {
            let post = current
                .as_ref()
                .ok_or_else(|| err(n, "body fence outside a post block"))?;
            if post.body.is_some() {
                return Err(err(n, format!("post `{}` has two body blocks", post.id)));
            }
            in_fence = true;
            fence_open_line = n;
        } else if let Some(rest) = line.strip_prefix("adu ") {
            let post = current
                .as_mut()
                .ok_or_else(|| err(n, "`adu` outside a post block"))?;
            let fields: Vec<&str> = rest.split_whitespace().collect();
            if fields.len() != 5 {
                return Err(err(n, "expected `adu <id> <sentence_index> <start> <end> <label>`"));
            }
            let sentence_index: usize =
                fields[1].parse().map_err(|_| err(n, "sentence_index must be an integer"))?;
            let start: usize =
                fields[2].parse().map_err(|_| err(n, "span start must be an integer"))?;
            let end: usize =
                fields[3].parse().map_err(|_| err(n, "span end must be an integer"))?;
            let label: ComponentLabel =
                fields[4].parse().map_err(|e: String| err(n, e))?;
            post.adus.push((fields[0].to_string(), sentence_index, start, end, label));
        } else if let Some(rest) = line.strip_prefix("rel ") {
            if thread_id.is_none() {
                return Err(err(n, "`rel` before `thread` header"));
            }
            if let Some(p) = current.take() {
                posts.push(p.finish());
            }
            let fields: Vec<&str> = rest.split_whitespace().collect();
            if fields.len() != 4 {
                return Err(err(n, "expected `rel <source_id> <target_id> <kind> <type>`"));
            }
            relations.push(RelationInstance {
                source_id: fields[0].to_string(),
                target_id: fields[1].to_string(),
                kind: fields[2].parse().map_err(|e: String| err(n, e))?,
                rel_type: fields[3].parse().map_err(|e: String| err(n, e))?,
            });
        } else {
            return Err(err(n, format!("unrecognized directive: `{line}`")));
        }
    }

    if in_fence {
        return Err(err(fence_open_line, "unterminated body fence"));
    }
    if let Some(p) = current.take() {
        posts.push(p.finish());
    }
    let id = thread_id.ok_or_else(|| err(1, "missing `thread <id>` header"))?;
    let thread = Thread { id, posts, relations };
    ensure_valid(&thread)?;
    Ok(thread)
}

/// Renders a thread in canonical form: posts in order, each with title, body
/// fence (omitted when the body is empty), and `adu` lines; all `rel` lines
/// at the end. `parse_thread` inverts this exactly.
pub fn serialize_thread(thread: &Thread) -> Result<String, CorpusError> {
    let mut out = String::new();
    out.push_str(&format!("thread {}\n", thread.id));
    for post in &thread.posts {
        out.push('\n');
        out.push_str(&format!(
            "post {} parent={} author={}\n",
            post.id,
            post.parent_id.as_deref().unwrap_or("-"),
            post.author
        ));
        if let Some(title) = &post.title {
            out.push_str(&format!("title: {title}\n"));
        }
        if !post.text.is_empty() {
            if post.text.lines().any(|l| l.trim_end() == FENCE) {
                return Err(CorpusError::Parse {
                    line: 0,
                    message: format!(
                        "post `{}` body contains a bare fence line and cannot be serialized",
                        post.id
                    ),
                });
            }
            out.push_str(FENCE);
            out.push('\n');
            out.push_str(&post.text);
            out.push('\n');
            out.push_str(FENCE);
            out.push('\n');
        }
        for p in &post.propositions {
            out.push_str(&format!(
                "adu {} {} {} {} {}\n",
                p.id, p.sentence_index, p.char_span.0, p.char_span.1, p.label
            ));
        }
    }
    if !thread.relations.is_empty() {
        out.push('\n');
        for r in &thread.relations {
            out.push_str(&format!(
                "rel {} {} {} {}\n",
                r.source_id, r.target_id, r.kind, r.rel_type
            ));
        }
    }
    Ok(out)
}

/// Parses a document holding any number of `thread` blocks, splitting at
/// each `thread` header outside a body fence. Error line numbers refer to
/// the whole document.
pub fn parse_corpus(document: &str) -> Result<Vec<Thread>, CorpusError> {
    let mut starts: Vec<usize> = Vec::new();
    let lines: Vec<&str> = document.lines().collect();
    let mut in_fence = false;
    for (i, raw) in lines.iter().enumerate() {
        let line = raw.trim_end();
        if !in_fence && line.starts_with("thread ") {
            starts.push(i);
        }
        if line == FENCE {
            in_fence = !in_fence;
        }
    }
    if let Some(&first) = starts.first() {
        if lines[..first].iter().any(|l| !l.trim().is_empty()) {
            return Err(err(1, "content before the first `thread` header"));
        }
    } else if lines.iter().any(|l| !l.trim().is_empty()) {
        return Err(err(1, "no `thread` header found"));
    }

    let mut threads = Vec::new();
    for (i, &start) in starts.iter().enumerate() {
        let end = starts.get(i + 1).copied().unwrap_or(lines.len());
        let chunk = lines[start..end].join("\n");
        let thread = parse_thread(&chunk).map_err(|e| match e {
            CorpusError::Parse { line, message } =>
                CorpusError::Parse { line: line + start, message },
            other => other,
        })?;
        threads.push(thread);
    }
    Ok(threads)
}

/// Renders threads back-to-back; `parse_corpus` inverts this exactly.
pub fn serialize_corpus(threads: &[Thread]) -> Result<String, CorpusError> {
    let mut out = String::new();
    for (i, thread) in threads.iter().enumerate() {
        if i > 0 {
            out.push('\n');
        }
        out.push_str(&serialize_thread(thread)?);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{RelationKind, RelationType};

    const DIALOGUE: &str = "\
thread stability

post a parent=- author=user_a
```
I think the biggest threat to global stability comes from the political fringes. It has been like that in the past.
```
adu p0 0 0 80 Claim
adu p1 1 81 115 Premise

post b parent=a author=user_b
```
Good arguments.
```
adu p2 0 0 15 Claim

post c parent=a author=user_c
```
The only constant is change.
```
adu p3 0 0 28 Claim

post d parent=a author=user_d
```
What happened in the past has nothing to do with the present.
```
adu p4 0 0 61 Claim

rel p2 p0 InterTurn Agreement
rel p3 p0 InterTurn Rebuttal
rel p4 p1 InterTurn Undercutter
";

    #[test]
    fn parses_minimal_single_post_document() {
        let doc = "\
thread t9
post root parent=- author=op
title: Short titles win.
```
First point here. Second point follows.
```
adu m 0 0 17 MainClaim
adu x 0 0 17 Claim
adu y 1 18 39 Premise
";
        let t = parse_thread(doc).unwrap();
        assert_eq!(t.id, "t9");
        assert_eq!(t.posts.len(), 1);
        assert_eq!(t.propositions().count(), 3);
        assert_eq!(t.main_claim().unwrap().text, "Short titles win.");
        assert_eq!(t.proposition("y").unwrap().text, "Second point follows.");
    }

    #[test]
    fn parses_four_post_dialogue() {
        let t = parse_thread(DIALOGUE).unwrap();
        assert_eq!(t.posts.len(), 4);
        assert_eq!(t.propositions().count(), 5);
        let labels: Vec<ComponentLabel> = t.propositions().map(|p| p.label).collect();
        assert_eq!(labels, vec![
            ComponentLabel::Claim,
            ComponentLabel::Premise,
            ComponentLabel::Claim,
            ComponentLabel::Claim,
            ComponentLabel::Claim,
        ]);
        assert_eq!(t.proposition("p2").unwrap().text, "Good arguments.");
        assert_eq!(t.proposition("p3").unwrap().text, "The only constant is change.");
        assert_eq!(t.relations.len(), 3);
        assert_eq!(t.relations[0].rel_type, RelationType::Agreement);
        assert_eq!(t.relations[1].rel_type, RelationType::Rebuttal);
        assert_eq!(t.relations[2], RelationInstance {
            source_id: "p4".into(),
            target_id: "p1".into(),
            kind: RelationKind::InterTurn,
            rel_type: RelationType::Undercutter,
        });
    }

    #[test]
    fn cross_post_pair_marked_intra_is_a_validation_error() {
        let doc = DIALOGUE.replace("rel p2 p0 InterTurn Agreement", "rel p2 p0 IntraTurn Agreement");
        match parse_thread(&doc) {
            Err(CorpusError::Invalid { violations, .. }) => {
                assert!(violations.iter().any(|v| v.rule == "intra-same-post"), "{violations:?}");
            }
            other => panic!("expected validation failure, got {other:?}"),
        }
    }

    #[test]
    fn malformed_adu_reports_line() {
        let doc = "thread t\npost a parent=- author=x\nadu broken 0 0 Claim\n";
        match parse_thread(doc) {
            Err(CorpusError::Parse { line, .. }) => assert_eq!(line, 3),
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn unterminated_fence_reports_opening_line() {
        let doc = "thread t\npost a parent=- author=x\n```\nno closing fence";
        match parse_thread(doc) {
            Err(CorpusError::Parse { line, .. }) => assert_eq!(line, 3),
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn round_trips_canonical_document() {
        let t = parse_thread(DIALOGUE).unwrap();
        let doc = serialize_thread(&t).unwrap();
        let t2 = parse_thread(&doc).unwrap();
        assert_eq!(t, t2);
        assert_eq!(serialize_thread(&t2).unwrap(), doc);
    }

    #[test]
    fn serializer_rejects_body_with_fence_line() {
        let mut t = parse_thread(DIALOGUE).unwrap();
        t.posts[1].text = "ok\n```\nbad".into();
        t.posts[1].propositions.clear();
        assert!(serialize_thread(&t).is_err());
    }

    #[test]
    fn author_may_contain_spaces() {
        let doc = "thread t\npost a parent=- author=Jo van der Berg\n";
        let t = parse_thread(doc).unwrap();
        assert_eq!(t.posts[0].author, "Jo van der Berg");
    }

    #[test]
    fn corpus_documents_round_trip() {
        let second = DIALOGUE.replace("thread stability", "thread followup");
        let doc = format!("{DIALOGUE}\n{second}");
        let threads = parse_corpus(&doc).unwrap();
        assert_eq!(threads.len(), 2);
        assert_eq!(threads[0].id, "stability");
        assert_eq!(threads[1].id, "followup");
        let rendered = serialize_corpus(&threads).unwrap();
        assert_eq!(parse_corpus(&rendered).unwrap(), threads);
    }

    #[test]
    fn corpus_split_ignores_headers_inside_fences() {
        let doc = "\
thread t
post a parent=- author=x
```
thread looks-like-a-header
```
adu a0 0 0 26 Claim
";
        let threads = parse_corpus(doc).unwrap();
        assert_eq!(threads.len(), 1);
        assert_eq!(threads[0].posts[0].text, "thread looks-like-a-header");
    }

    #[test]
    fn corpus_rejects_leading_garbage_and_empty_documents() {
        assert!(parse_corpus("stray line\nthread t\n").is_err());
        assert!(parse_corpus("just text\n").is_err());
        assert_eq!(parse_corpus("\n  \n").unwrap(), Vec::new());
    }

    #[test]
    fn corpus_error_lines_are_document_relative() {
        let doc = format!("{DIALOGUE}\nthread bad\npost broken\n");
        let line_count = doc.lines().count();
        match parse_corpus(&doc) {
            Err(CorpusError::Parse { line, .. }) => assert_eq!(line, line_count),
            other => panic!("expected parse error, got {other:?}"),
        }
    }
}
