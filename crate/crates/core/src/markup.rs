//! Reader for hand-labeled corpora written as plain text.
//!
//! Articles start with a `=== <source id>` line and run until the next one.
//! Positive passages are wrapped in `[[` and `]]`; each marked passage must
//! cover whole sentences and form a valid candidate window. Lines starting
//! with `#` before the first article are comments.

use thiserror::Error;

use crate::excerpt::{is_candidate, Excerpt, DEFAULT_MAX_DISTANCE};
use crate::textseg::{analyze_with, Lexicon};
use crate::training::{CorpusArticle, PositiveSpan};

const OPEN: &str = "[[";
const CLOSE: &str = "]]";

#[derive(Debug, Error, PartialEq, Eq)]
pub enum MarkupError {
    #[error("line {line}: text before the first `===` header")]
    Orphan { line: usize },
    #[error("{source_id}: unbalanced `[[`/`]]`")]
    Unbalanced { source_id: String },
    #[error("{source_id}: `{passage}` does not cover whole sentences")]
    PartialSentence { source_id: String, passage: String },
    #[error("{source_id}: `{passage}` is not a candidate window")]
    NotCandidate { source_id: String, passage: String },
}

/// Text without markers plus the byte ranges the markers enclosed.
fn strip_markers(marked: &str, source_id: &str) -> Result<(String, Vec<(usize, usize)>), MarkupError> {
    let unbalanced = || MarkupError::Unbalanced {
        source_id: source_id.to_string(),
    };
    let mut text = String::with_capacity(marked.len());
    let mut ranges = Vec::new();
    let mut open: Option<usize> = None;
    let mut rest = marked;
    loop {
        let next_open = rest.find(OPEN);
        let next_close = rest.find(CLOSE);
        let (at, is_open) = match (next_open, next_close) {
            (None, None) => break,
            (Some(o), Some(c)) if o < c => (o, true),
            (Some(o), None) => (o, true),
            (_, Some(c)) => (c, false),
        };
        text.push_str(&rest[..at]);
        rest = &rest[at + 2..];
        match (is_open, open) {
            (true, None) => open = Some(text.len()),
            (false, Some(start)) => {
                ranges.push((start, text.len()));
                open = None;
            }
            _ => return Err(unbalanced()),
        }
    }
    if open.is_some() {
        return Err(unbalanced());
    }
    text.push_str(rest);
    Ok((text, ranges))
}

/// One article from its marked text.
pub fn parse_article(source_id: &str, marked: &str, lexicon: &Lexicon) -> Result<CorpusArticle, MarkupError> {
    let (text, ranges) = strip_markers(marked, source_id)?;
    let doc = analyze_with(&text, source_id, lexicon);
    let mut positives = Vec::new();
    for (start, end) in ranges {
        let passage = text[start..end].to_string();
        let first = doc.sentences.iter().position(|s| s.span.start == start);
        let last = doc.sentences.iter().position(|s| s.span.end == end);
        let (Some(first), Some(last)) = (first, last) else {
            return Err(MarkupError::PartialSentence {
                source_id: source_id.to_string(),
                passage,
            });
        };
        let excerpt = Excerpt::from_window(&doc, first, last);
        if last < first || !is_candidate(&doc, &excerpt, DEFAULT_MAX_DISTANCE) {
            return Err(MarkupError::NotCandidate {
                source_id: source_id.to_string(),
                passage,
            });
        }
        positives.push(PositiveSpan {
            first_sentence: first,
            last_sentence: last,
        });
    }
    Ok(CorpusArticle {
        source_id: source_id.to_string(),
        text,
        positives,
    })
}

/// All articles of a marked corpus file.
pub fn parse_corpus(src: &str, lexicon: &Lexicon) -> Result<Vec<CorpusArticle>, MarkupError> {
    let mut articles = Vec::new();
    let mut current: Option<(String, Vec<&str>)> = None;
    let finish = |current: Option<(String, Vec<&str>)>, articles: &mut Vec<CorpusArticle>| {
        if let Some((id, lines)) = current {
            let body = lines.join("\n");
            articles.push(parse_article(&id, body.trim(), lexicon)?);
        }
        Ok::<_, MarkupError>(())
    };
    for (i, line) in src.lines().enumerate() {
        if let Some(id) = line.strip_prefix("===") {
            finish(current.take(), &mut articles)?;
            current = Some((id.trim().to_string(), Vec::new()));
            continue;
        }
        match current.as_mut() {
            Some((_, lines)) => lines.push(line),
            None if line.trim().is_empty() || line.starts_with('#') => {}
            None => return Err(MarkupError::Orphan { line: i + 1 }),
        }
    }
    finish(current, &mut articles)?;
    Ok(articles)
}
