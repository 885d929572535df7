//! Seeded generator of labeled articles with templated renaming passages.
//!
//! Each article holds one renaming passage per distance (one, two and three
//! sentences long) separated by filler sentences that also mention places
//! and years but never a change of name.

use rand::seq::{IndexedRandom, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::training::{CorpusArticle, PositiveSpan};

const ONSETS: &[&str] = &[
    "b", "br", "d", "dr", "f", "g", "gr", "h", "k", "kl", "l", "m", "n", "p", "r", "s", "st", "t", "tr", "v", "z",
];
const VOWELS: &[&str] = &["a", "e", "i", "o", "u", "ai", "ea", "ou"];
const CODAS: &[&str] = &["", "n", "r", "s", "l", "th", "rk", "nd", "sk"];
const SUFFIXES: &[&str] = &["a", "ia", "ov", "burg", "grad", "ton", "mere", "stad", "ar", "ine"];

/// Single-sentence passages: old name, new name, year.
const D0: &[&str] = &[
    "In {Y} the city of {A} was renamed {B} by the new government.",
    "The settlement known as {A} was officially renamed {B} in {Y}.",
    "Until {Y} the town was called {A}, when it was renamed {B}.",
    "In {Y} the council changed the name from {A} to {B}.",
    "The name {A} was replaced by {B} in {Y} after a public vote.",
    "The port of {A} adopted the name {B} in {Y}.",
];

/// Two-sentence passages; `|` separates sentences.
const D1: &[&str] = &[
    "In {Y} the assembly voted to honour the founder of {A}.|The city was then renamed {B} by decree.",
    "The town kept the name {A} for two centuries.|It was renamed {B} in {Y} after independence.",
    "In {Y} the province of {A} gained its independence.|Its name was changed to {B} shortly afterwards.",
    "Residents of {A} petitioned for a new name in {Y}.|The request was granted and the town became {B}.",
];

/// Three-sentence passages.
const D2: &[&str] = &[
    "The fortress of {A} was founded in {Y}.|Its walls were rebuilt several times.|The town later took the name {B}.",
    "In {Y} the region around {A} was reorganised.|Several villages were merged into one district.|The district was renamed {B} to reflect the merger.",
    "The old name {A} fell out of favour in {Y}.|Officials debated alternatives for many months.|Eventually the name {B} was adopted.",
    "In {Y} a treaty transferred {A} to a new state.|The new authorities replaced the local officials.|The city was renamed {B} under the new rule.",
];

/// Filler sentences with two places and a year.
const FILLER: &[&str] = &[
    "The railway between {A} and {B} opened in {Y}.",
    "In {Y} traders from {A} reached the markets of {B}.",
    "A bridge connecting {A} with {B} was completed in {Y}.",
    "The population of {A} grew rapidly after {Y}, overtaking {B}.",
    "In {Y} a severe flood damaged the harbour of {A} and parts of {B}.",
    "The university of {A} signed an exchange agreement with {B} in {Y}.",
    "A festival held in {A} since {Y} attracts visitors from {B}.",
    "Troops from {B} occupied {A} briefly in {Y}.",
    "The cathedral of {A} was consecrated in {Y} by the bishop of {B}.",
    "In {Y} the first newspaper of {A} was printed with presses from {B}.",
    "Ships from {A} carried grain to {B} throughout {Y}.",
    "The climate of {A} is milder than that of {B}.",
    "Local farmers grow wheat and barley on the plains.",
    "The old market square is surrounded by merchant houses.",
];

/// Layout of one generated article.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ArticlePlan {
    pub sentence_count: usize,
    pub positives: Vec<PositiveSpan>,
}

pub const FILLER_GAP: usize = 3;

fn pseudo_name(rng: &mut ChaCha8Rng) -> String {
    let mut s = String::new();
    for _ in 0..rng.random_range(1..=2) {
        s.push_str(ONSETS.choose(rng).unwrap());
        s.push_str(VOWELS.choose(rng).unwrap());
        s.push_str(CODAS.choose(rng).unwrap());
    }
    s.push_str(SUFFIXES.choose(rng).unwrap());
    let mut chars = s.chars();
    let first = chars.next().unwrap().to_ascii_uppercase();
    std::iter::once(first).chain(chars).collect()
}

fn fill(template: &str, rng: &mut ChaCha8Rng) -> String {
    let a = pseudo_name(rng);
    let mut b = pseudo_name(rng);
    while b == a {
        b = pseudo_name(rng);
    }
    template
        .replace("{A}", &a)
        .replace("{B}", &b)
        .replace("{Y}", &rng.random_range(1100..=2020).to_string())
}

/// One article: three passages (distances 0, 1, 2) in random order with
/// `FILLER_GAP` filler sentences before, between and after them.
pub fn generate_article(rng: &mut ChaCha8Rng, source_id: &str) -> (CorpusArticle, ArticlePlan) {
    let mut passages: Vec<Vec<String>> = [D0, D1, D2]
        .iter()
        .map(|set| fill(set.choose(rng).unwrap(), rng).split('|').map(str::to_string).collect())
        .collect();
    passages.shuffle(rng);

    let mut sentences: Vec<String> = Vec::new();
    let mut positives = Vec::new();
    let push_filler = |sentences: &mut Vec<String>, rng: &mut ChaCha8Rng| {
        for _ in 0..FILLER_GAP {
            sentences.push(fill(FILLER.choose(rng).unwrap(), rng));
        }
    };
    for passage in passages {
        push_filler(&mut sentences, rng);
        let first = sentences.len();
        sentences.extend(passage);
        positives.push(PositiveSpan {
            first_sentence: first,
            last_sentence: sentences.len() - 1,
        });
    }
    push_filler(&mut sentences, rng);

    let plan = ArticlePlan {
        sentence_count: sentences.len(),
        positives: positives.clone(),
    };
    let article = CorpusArticle {
        source_id: source_id.to_string(),
        text: sentences.join(" "),
        positives,
    };
    (article, plan)
}

/// `articles` generated articles, three positives each.
pub fn generate_corpus(articles: usize, seed: u64) -> Vec<(CorpusArticle, ArticlePlan)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..articles)
        .map(|i| generate_article(&mut rng, &format!("synthetic-{i:04}")))
        .collect()
}
