//! Ordered word-pair features.
//!
//! Every pair of positions `i < j` in a generalized stream yields the key
//! `"{t_i}-{t_j}"`. Vectors are binary: a key is either present or not.

use std::collections::HashMap;

use indexmap::IndexSet;
use serde::{Deserialize, Serialize};

/// Streams are cut to this many tokens before pairing.
pub const MAX_STREAM_TOKENS: usize = 120;

pub const PAIR_SEPARATOR: char = '-';

pub fn pair_key(first: &str, second: &str) -> String {
    let mut key = String::with_capacity(first.len() + second.len() + 1);
    key.push_str(first);
    key.push(PAIR_SEPARATOR);
    key.push_str(second);
    key
}

/// Distinct ordered pair keys of `tokens`, in first-seen order of `(i, j)`.
pub fn ordered_pairs<S: AsRef<str>>(tokens: &[S]) -> IndexSet<String> {
    let tokens = &tokens[..tokens.len().min(MAX_STREAM_TOKENS)];
    let mut pairs = IndexSet::new();
    for (i, a) in tokens.iter().enumerate() {
        for b in &tokens[i + 1..] {
            pairs.insert(pair_key(a.as_ref(), b.as_ref()));
        }
    }
    pairs
}

/// Maps pair keys to dense ids. A frozen index never grows.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct FeatureIndex {
    keys: Vec<String>,
    ids: HashMap<String, u32>,
    frozen: bool,
}

impl FeatureIndex {
    pub fn new() -> Self {
        Self::default()
    }

    /// Frozen index whose ids follow the order of `keys`. Duplicate keys
    /// keep their first id.
    pub fn from_keys<I: IntoIterator<Item = String>>(keys: I) -> Self {
        let mut index = Self::new();
        for k in keys {
            index.insert(k);
        }
        index.freeze();
        index
    }

    fn insert(&mut self, key: String) -> u32 {
        if let Some(&id) = self.ids.get(&key) {
            return id;
        }
        let id = u32::try_from(self.keys.len()).expect("feature index exceeds u32 ids");
        self.ids.insert(key.clone(), id);
        self.keys.push(key);
        id
    }

    pub fn freeze(&mut self) {
        self.frozen = true;
    }

    pub fn is_frozen(&self) -> bool {
        self.frozen
    }

    pub fn len(&self) -> usize {
        self.keys.len()
    }

    pub fn is_empty(&self) -> bool {
        self.keys.is_empty()
    }

    pub fn id(&self, key: &str) -> Option<u32> {
        self.ids.get(key).copied()
    }

    pub fn key(&self, id: u32) -> Option<&str> {
        self.keys.get(id as usize).map(String::as_str)
    }

    /// Keys in id order.
    pub fn keys(&self) -> &[String] {
        &self.keys
    }

    /// Vectorizes `pairs`, assigning fresh ids to unseen keys unless frozen.
    pub fn vectorize<S: AsRef<str>>(&mut self, pairs: impl IntoIterator<Item = S>) -> FeatureVector {
        if self.frozen {
            return self.lookup(pairs);
        }
        let ids: Vec<u32> = pairs.into_iter().map(|k| self.insert(k.as_ref().to_string())).collect();
        FeatureVector::new(ids, self.len())
    }

    /// Vectorizes against the current keys only; unseen keys are dropped.
    pub fn lookup<S: AsRef<str>>(&self, pairs: impl IntoIterator<Item = S>) -> FeatureVector {
        let ids = pairs.into_iter().filter_map(|k| self.id(k.as_ref())).collect();
        FeatureVector::new(ids, self.len())
    }
}

/// Free-function form of [`FeatureIndex::vectorize`].
pub fn vectorize<S: AsRef<str>>(pairs: impl IntoIterator<Item = S>, index: &mut FeatureIndex) -> FeatureVector {
    index.vectorize(pairs)
}

/// Frozen index over the union of pair keys of `corpus`, ids in first-seen order.
pub fn build_index<S: AsRef<str>>(corpus: &[Vec<S>]) -> FeatureIndex {
    let mut index = FeatureIndex::new();
    for stream in corpus {
        for key in ordered_pairs(stream) {
            index.insert(key);
        }
    }
    index.freeze();
    index
}

/// Sparse binary vector: sorted, deduplicated active ids.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct FeatureVector {
    ids: Vec<u32>,
    dimension: usize,
}

impl FeatureVector {
    /// Sorts and deduplicates `ids`. Panics if any id is `>= dimension`.
    pub fn new(mut ids: Vec<u32>, dimension: usize) -> Self {
        ids.sort_unstable();
        ids.dedup();
        if let Some(&max) = ids.last() {
            assert!((max as usize) < dimension, "feature id {max} >= dimension {dimension}");
        }
        Self { ids, dimension }
    }

    pub fn active_ids(&self) -> &[u32] {
        &self.ids
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn nnz(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    /// Number of shared active ids (the linear kernel on binary vectors).
    pub fn dot(&self, other: &FeatureVector) -> usize {
        let (mut i, mut j, mut n) = (0, 0, 0);
        while i < self.ids.len() && j < other.ids.len() {
            match self.ids[i].cmp(&other.ids[j]) {
                std::cmp::Ordering::Less => i += 1,
                std::cmp::Ordering::Greater => j += 1,
                std::cmp::Ordering::Equal => {
                    n += 1;
                    i += 1;
                    j += 1;
                }
            }
        }
        n
    }
}
