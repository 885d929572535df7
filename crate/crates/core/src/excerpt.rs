//! Candidate excerpt enumeration and N/Y generalization.
//!
//! A candidate is a window of at most `max_distance + 1` consecutive
//! sentences that mentions at least two names and one year, and whose first
//! and last sentences each carry a name or a year.

use std::io::{self, BufRead, Write};

use serde::{Deserialize, Serialize};

use crate::textseg::{Document, Sentence, Token, TokenKind};

pub const DEFAULT_MAX_DISTANCE: usize = 2;

/// Token substituted for a run of name tokens.
pub const NAME_TOKEN: &str = "N";
/// Token substituted for a year.
pub const YEAR_TOKEN: &str = "Y";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Excerpt {
    pub source_id: String,
    pub first_sentence: usize,
    pub last_sentence: usize,
    pub distance: usize,
    pub name_count: usize,
    pub year_count: usize,
    /// One entry per name run, words joined by a space.
    pub names: Vec<String>,
    pub years: Vec<u32>,
    pub generalized: Vec<String>,
    pub text: String,
}

impl Excerpt {
    /// Builds the excerpt for sentences `first..=last` without checking the
    /// candidate constraints.
    ///
    /// Panics if the range is empty or out of bounds.
    pub fn from_window(doc: &Document, first: usize, last: usize) -> Excerpt {
        assert!(first <= last && last < doc.len(), "window {first}..={last} outside document");
        let window = &doc.sentences[first..=last];
        let tokens: Vec<&Token> = window.iter().flat_map(|s| s.tokens.iter()).collect();
        let names = name_runs(tokens.iter().copied());
        let years: Vec<u32> = tokens.iter().filter_map(|t| t.year()).collect();
        Excerpt {
            source_id: doc.source_id.clone(),
            first_sentence: first,
            last_sentence: last,
            distance: last - first,
            name_count: names.len(),
            year_count: years.len(),
            names,
            years,
            generalized: generalize(tokens.iter().copied()),
            text: doc.text_between(first, last).to_string(),
        }
    }

    pub fn overlaps(&self, other: &Excerpt) -> bool {
        self.source_id == other.source_id && ranges_overlap((self.first_sentence, self.last_sentence), (other.first_sentence, other.last_sentence))
    }
}

/// Inclusive sentence ranges sharing at least one index.
pub fn ranges_overlap(a: (usize, usize), b: (usize, usize)) -> bool {
    a.0 <= b.1 && b.0 <= a.1
}

/// True iff the first and last sentence of the window each hold a name or a year.
pub fn first_last_rule(window: &[Sentence]) -> bool {
    match (window.first(), window.last()) {
        (Some(first), Some(last)) => first.has_component() && last.has_component(),
        _ => false,
    }
}

fn name_runs<'a>(tokens: impl IntoIterator<Item = &'a Token>) -> Vec<String> {
    let mut runs: Vec<String> = Vec::new();
    let mut prev: Option<&Token> = None;
    for t in tokens {
        if t.kind == TokenKind::Name {
            match prev {
                Some(p) if p.kind == TokenKind::Name && p.sentence_index == t.sentence_index => {
                    let last = runs.last_mut().expect("run started by previous name");
                    last.push(' ');
                    last.push_str(&t.surface);
                }
                _ => runs.push(t.surface.clone()),
            }
        }
        prev = Some(t);
    }
    runs
}

/// Replaces each maximal run of names with `N` and each year with `Y`,
/// lowercases the remaining words and drops punctuation.
///
/// A run never crosses a sentence boundary.
pub fn generalize<'a>(tokens: impl IntoIterator<Item = &'a Token>) -> Vec<String> {
    let mut out = Vec::new();
    let mut prev: Option<&Token> = None;
    for t in tokens {
        match t.kind {
            TokenKind::Name => {
                let continues = prev.is_some_and(|p| p.kind == TokenKind::Name && p.sentence_index == t.sentence_index);
                if !continues {
                    out.push(NAME_TOKEN.to_string());
                }
            }
            TokenKind::Year => out.push(YEAR_TOKEN.to_string()),
            TokenKind::Word => out.push(t.surface.to_lowercase()),
            TokenKind::Punct => {}
        }
        prev = Some(t);
    }
    out
}

/// Whether an excerpt satisfies every candidate constraint for `max_distance`.
pub fn is_candidate(doc: &Document, excerpt: &Excerpt, max_distance: usize) -> bool {
    excerpt.distance <= max_distance
        && excerpt.name_count >= 2
        && excerpt.year_count >= 1
        && first_last_rule(&doc.sentences[excerpt.first_sentence..=excerpt.last_sentence])
}

/// All candidate windows ordered by `(first_sentence, distance)`.
pub fn extract_candidates(doc: &Document, max_distance: usize) -> Vec<Excerpt> {
    let mut out = Vec::new();
    for first in 0..doc.len() {
        // A window must open on a sentence with a component.
        if !doc.sentences[first].has_component() {
            continue;
        }
        for last in first..doc.len().min(first + max_distance + 1) {
            if !doc.sentences[last].has_component() {
                continue;
            }
            let excerpt = Excerpt::from_window(doc, first, last);
            if excerpt.name_count >= 2 && excerpt.year_count >= 1 {
                out.push(excerpt);
            }
        }
    }
    out
}

/// One excerpt per line as JSON.
pub fn write_records<W: Write>(mut writer: W, excerpts: &[Excerpt]) -> io::Result<()> {
    for e in excerpts {
        serde_json::to_writer(&mut writer, e)?;
        writer.write_all(b"\n")?;
    }
    Ok(())
}

pub fn read_records<R: BufRead>(reader: R) -> io::Result<Vec<Excerpt>> {
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
