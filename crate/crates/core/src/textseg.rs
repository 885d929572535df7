//! Sentence splitting, tokenization and name/year annotation.
//!
//! Everything here is rule based. Sentences end at `.`, `!` or `?` when the
//! terminator is followed by whitespace and an uppercase letter (or by the
//! end of the text), unless the word before a single period is a known
//! abbreviation or a lone capital initial. A blank line always ends a
//! sentence. Names are detected with a capitalization heuristic instead of
//! a part-of-speech tagger.

use std::collections::HashSet;
use std::fmt;
use std::io;
use std::ops::RangeInclusive;
use std::path::Path;
use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

/// Accepted numeric range for year tokens.
pub const YEAR_RANGE: RangeInclusive<u32> = 1000..=2199;

pub const BUNDLED_STOPWORDS: &str = include_str!("../data/stopwords.txt");
pub const BUNDLED_ABBREVIATIONS: &str = include_str!("../data/abbreviations.txt");

/// Stopword and abbreviation lists used by the splitter and the name detector.
#[derive(Debug, Clone, Default)]
pub struct Lexicon {
    stopwords: HashSet<String>,
    abbreviations: HashSet<String>,
}

impl Lexicon {
    /// The lists shipped with the crate.
    pub fn bundled() -> &'static Lexicon {
        static BUNDLED: OnceLock<Lexicon> = OnceLock::new();
        BUNDLED.get_or_init(|| Lexicon::from_lists(BUNDLED_STOPWORDS, BUNDLED_ABBREVIATIONS))
    }

    /// Builds a lexicon from two newline separated lists. Blank lines and
    /// lines starting with `#` are ignored; entries are case-insensitive.
    pub fn from_lists(stopwords: &str, abbreviations: &str) -> Self {
        Self {
            stopwords: parse_list(stopwords),
            abbreviations: parse_list(abbreviations),
        }
    }

    pub fn from_files(stopwords: &Path, abbreviations: &Path) -> io::Result<Self> {
        Ok(Self::from_lists(
            &std::fs::read_to_string(stopwords)?,
            &std::fs::read_to_string(abbreviations)?,
        ))
    }

    pub fn is_stopword(&self, word: &str) -> bool {
        self.stopwords.contains(&word.to_lowercase())
    }

    /// `word` includes its trailing period, e.g. `"St."`.
    pub fn is_abbreviation(&self, word: &str) -> bool {
        self.abbreviations.contains(&word.to_lowercase())
    }
}

fn parse_list(text: &str) -> HashSet<String> {
    text.lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .map(str::to_lowercase)
        .collect()
}

/// Half-open byte range into a source string. Both ends lie on char boundaries.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Span {
    pub start: usize,
    pub end: usize,
}

impl Span {
    pub fn new(start: usize, end: usize) -> Self {
        Self { start, end }
    }

    fn shift(self, offset: usize) -> Self {
        Self::new(self.start + offset, self.end + offset)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TokenKind {
    Word,
    Name,
    Year,
    Punct,
}

impl fmt::Display for TokenKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            TokenKind::Word => "word",
            TokenKind::Name => "name",
            TokenKind::Year => "year",
            TokenKind::Punct => "punct",
        };
        f.write_str(s)
    }
}

/// Output of [`tokenize`]: a surface string and its span, before annotation.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RawToken {
    pub surface: String,
    pub span: Span,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Token {
    pub surface: String,
    pub kind: TokenKind,
    pub sentence_index: usize,
    pub position: usize,
    pub span: Span,
}

impl Token {
    /// Integer value of a year token.
    pub fn year(&self) -> Option<u32> {
        match self.kind {
            TokenKind::Year => self.surface.parse().ok(),
            _ => None,
        }
    }

    pub fn is_component(&self) -> bool {
        matches!(self.kind, TokenKind::Name | TokenKind::Year)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Sentence {
    pub index: usize,
    pub tokens: Vec<Token>,
    pub span: Span,
}

impl Sentence {
    /// True if the sentence holds at least one name or year.
    pub fn has_component(&self) -> bool {
        self.tokens.iter().any(Token::is_component)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Document {
    pub source_id: String,
    pub sentences: Vec<Sentence>,
    pub raw_text: String,
}

impl Document {
    pub fn tokens(&self) -> impl Iterator<Item = &Token> {
        self.sentences.iter().flat_map(|s| s.tokens.iter())
    }

    pub fn len(&self) -> usize {
        self.sentences.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sentences.is_empty()
    }

    /// Source text covered by sentences `first..=last`.
    pub fn text_between(&self, first: usize, last: usize) -> &str {
        let start = self.sentences[first].span.start;
        let end = self.sentences[last].span.end;
        &self.raw_text[start..end]
    }
}

fn is_terminator(c: char) -> bool {
    matches!(c, '.' | '!' | '?')
}

fn is_closer(c: char) -> bool {
    matches!(c, '"' | '\'' | ')' | ']' | '\u{2019}' | '\u{201d}')
}

fn is_opener(c: char) -> bool {
    matches!(c, '"' | '\'' | '(' | '[' | '\u{2018}' | '\u{201c}')
}

/// Splits `text` into sentences using the bundled abbreviation list.
pub fn split_sentences(text: &str) -> Vec<(Span, &str)> {
    split_sentences_with(text, Lexicon::bundled())
}

pub fn split_sentences_with<'t>(text: &'t str, lexicon: &Lexicon) -> Vec<(Span, &'t str)> {
    let chars: Vec<(usize, char)> = text.char_indices().collect();
    let byte_at = |i: usize| chars.get(i).map_or(text.len(), |&(b, _)| b);
    let mut out = Vec::new();
    let mut start: Option<usize> = None;
    let mut emit = |start: &mut Option<usize>, end: usize| {
        if let Some(s) = start.take() {
            let trimmed_end = s + text[s..end].trim_end().len();
            if trimmed_end > s {
                out.push((Span::new(s, trimmed_end), &text[s..trimmed_end]));
            }
        }
    };

    let mut i = 0;
    while i < chars.len() {
        let (byte, c) = chars[i];
        if c.is_whitespace() {
            let mut j = i;
            let mut newlines = 0;
            while j < chars.len() && chars[j].1.is_whitespace() {
                if chars[j].1 == '\n' {
                    newlines += 1;
                }
                j += 1;
            }
            if newlines >= 2 {
                emit(&mut start, byte);
            }
            i = j;
            continue;
        }
        if start.is_none() {
            start = Some(byte);
        }
        if !is_terminator(c) {
            i += 1;
            continue;
        }

        let mut j = i;
        while j < chars.len() && is_terminator(chars[j].1) {
            j += 1;
        }
        let single_period = j == i + 1 && c == '.';
        while j < chars.len() && is_closer(chars[j].1) {
            j += 1;
        }
        let end = byte_at(j);

        let mut k = j;
        while k < chars.len() && chars[k].1.is_whitespace() {
            k += 1;
        }
        let boundary = if k == chars.len() {
            true
        } else if k == j {
            false
        } else {
            while k < chars.len() && is_opener(chars[k].1) {
                k += 1;
            }
            k < chars.len() && chars[k].1.is_uppercase()
        };

        if boundary && !(single_period && suppresses_split(text, start.unwrap_or(0), byte + 1, lexicon)) {
            emit(&mut start, end);
        }
        i = j;
    }
    emit(&mut start, text.len());
    out
}

/// Whether the word ending with the period at `period_end` is an abbreviation.
fn suppresses_split(text: &str, sentence_start: usize, period_end: usize, lexicon: &Lexicon) -> bool {
    let before = &text[sentence_start..period_end];
    let word_start = before
        .rfind(char::is_whitespace)
        .map_or(0, |p| p + before[p..].chars().next().map_or(1, char::len_utf8));
    let word = before[word_start..].trim_start_matches(is_opener);
    let stem = &word[..word.len() - 1];
    let mut stem_chars = stem.chars();
    let single_initial = matches!((stem_chars.next(), stem_chars.next()), (Some(c), None) if c.is_uppercase());
    single_initial || lexicon.is_abbreviation(word)
}

/// Splits one sentence into alphanumeric runs and single-character
/// punctuation tokens. Spans are relative to `sentence_text`.
pub fn tokenize(sentence_text: &str) -> Vec<RawToken> {
    let mut out = Vec::new();
    let mut run_start: Option<usize> = None;
    for (b, c) in sentence_text.char_indices() {
        if c.is_alphanumeric() {
            run_start.get_or_insert(b);
            continue;
        }
        if let Some(s) = run_start.take() {
            out.push(RawToken {
                surface: sentence_text[s..b].to_string(),
                span: Span::new(s, b),
            });
        }
        if !c.is_whitespace() {
            let e = b + c.len_utf8();
            out.push(RawToken {
                surface: sentence_text[b..e].to_string(),
                span: Span::new(b, e),
            });
        }
    }
    if let Some(s) = run_start {
        out.push(RawToken {
            surface: sentence_text[s..].to_string(),
            span: Span::new(s, sentence_text.len()),
        });
    }
    out
}

fn is_alnum_token(surface: &str) -> bool {
    surface.chars().next().is_some_and(char::is_alphanumeric)
}

fn is_numeric(surface: &str) -> bool {
    !surface.is_empty() && surface.chars().all(|c| c.is_ascii_digit())
}

fn abuts(left: &RawToken, right: &RawToken) -> bool {
    left.span.end == right.span.start
}

/// Four ASCII digits in [`YEAR_RANGE`], with no numeric neighbour either
/// directly or through an attached `.` or `,` (as in `3.2000` or `1,2000`).
fn is_year_at(tokens: &[RawToken], i: usize) -> bool {
    let t = &tokens[i];
    if t.surface.len() != 4 || !is_numeric(&t.surface) {
        return false;
    }
    let value: u32 = match t.surface.parse() {
        Ok(v) => v,
        Err(_) => return false,
    };
    if !YEAR_RANGE.contains(&value) {
        return false;
    }
    let numeric_neighbour = |j: usize| is_numeric(&tokens[j].surface);
    let separator = |j: usize| matches!(tokens[j].surface.as_str(), "." | ",");
    if i > 0 {
        if numeric_neighbour(i - 1) {
            return false;
        }
        if i > 1 && separator(i - 1) && abuts(&tokens[i - 2], &tokens[i - 1]) && abuts(&tokens[i - 1], t) && numeric_neighbour(i - 2) {
            return false;
        }
    }
    if i + 1 < tokens.len() {
        if numeric_neighbour(i + 1) {
            return false;
        }
        if i + 2 < tokens.len() && separator(i + 1) && abuts(t, &tokens[i + 1]) && abuts(&tokens[i + 1], &tokens[i + 2]) && numeric_neighbour(i + 2) {
            return false;
        }
    }
    true
}

/// Assigns a [`TokenKind`] to every token of one sentence.
///
/// Years are decided first. A remaining alphanumeric token is a name when it
/// starts with an uppercase letter, is not a stopword, and is either not the
/// first word of the sentence or is directly followed by another name.
pub fn annotate(tokens: &[RawToken], sentence_index: usize, lexicon: &Lexicon) -> Vec<Token> {
    let years: Vec<bool> = (0..tokens.len()).map(|i| is_year_at(tokens, i)).collect();
    let capitalized: Vec<bool> = tokens
        .iter()
        .zip(&years)
        .map(|(t, &year)| {
            !year
                && t.surface.chars().next().is_some_and(char::is_uppercase)
                && !lexicon.is_stopword(&t.surface)
        })
        .collect();
    let initial = tokens.iter().position(|t| is_alnum_token(&t.surface));

    tokens
        .iter()
        .enumerate()
        .map(|(i, t)| {
            let kind = if !is_alnum_token(&t.surface) {
                TokenKind::Punct
            } else if years[i] {
                TokenKind::Year
            } else if capitalized[i] && (Some(i) != initial || capitalized.get(i + 1).copied().unwrap_or(false)) {
                TokenKind::Name
            } else {
                TokenKind::Word
            };
            Token {
                surface: t.surface.clone(),
                kind,
                sentence_index,
                position: i,
                span: t.span,
            }
        })
        .collect()
}

/// Splits, tokenizes and annotates `text` with the bundled lexicon.
pub fn analyze(text: &str, source_id: &str) -> Document {
    analyze_with(text, source_id, Lexicon::bundled())
}

pub fn analyze_with(text: &str, source_id: &str, lexicon: &Lexicon) -> Document {
    let mut sentences = Vec::new();
    for (span, sentence_text) in split_sentences_with(text, lexicon) {
        let raw: Vec<RawToken> = tokenize(sentence_text)
            .into_iter()
            .map(|t| RawToken {
                span: t.span.shift(span.start),
                surface: t.surface,
            })
            .collect();
        // Sentences made only of punctuation do not take an index.
        if !raw.iter().any(|t| is_alnum_token(&t.surface)) {
            continue;
        }
        let index = sentences.len();
        sentences.push(Sentence {
            index,
            tokens: annotate(&raw, index, lexicon),
            span,
        });
    }
    Document {
        source_id: source_id.to_string(),
        sentences,
        raw_text: text.to_string(),
    }
}
