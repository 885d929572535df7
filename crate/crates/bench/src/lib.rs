//! Shared inputs for the benchmarks.

use evobase_core::features::{build_index, ordered_pairs, FeatureVector};
use evobase_core::svm::{DistanceTag, Label};
use evobase_core::synth::generate_corpus;
use evobase_core::textseg::{analyze, Document};
use evobase_core::training::{build_datasets, CorpusArticle, DatasetSet};

pub const SEED: u64 = 2024;

pub fn corpus(articles: usize) -> Vec<CorpusArticle> {
    generate_corpus(articles, SEED).into_iter().map(|(a, _)| a).collect()
}

pub fn documents(corpus: &[CorpusArticle]) -> Vec<Document> {
    corpus.iter().map(|a| analyze(&a.text, &a.source_id)).collect()
}

pub fn datasets(corpus: &[CorpusArticle]) -> DatasetSet {
    build_datasets(corpus, 1.0, SEED).expect("synthetic corpus yields datasets")
}

/// Vectorized training examples for the pooled dataset.
pub fn examples(sets: &DatasetSet) -> Vec<(FeatureVector, Label)> {
    let items = &sets.get(DistanceTag::All).items;
    let streams: Vec<Vec<String>> = items.iter().map(|i| i.generalized.clone()).collect();
    let index = build_index(&streams);
    items
        .iter()
        .map(|i| (index.lookup(ordered_pairs(&i.generalized)), i.label))
        .collect()
}
