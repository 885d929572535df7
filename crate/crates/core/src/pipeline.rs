//! Ensemble classification of candidate excerpts and timeline assembly.

use std::collections::BTreeMap;
use std::path::Path;

use chrono::{DateTime, Utc};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::excerpt::{extract_candidates, ranges_overlap, Excerpt, DEFAULT_MAX_DISTANCE};
use crate::features::ordered_pairs;
use crate::svm::{label_for, DistanceTag, Label, Model, ModelFileError};
use crate::textseg::Document;

#[derive(Debug, Error)]
pub enum ModelSetError {
    #[error("model for {expected} carries tag {found}")]
    TagMismatch { expected: DistanceTag, found: DistanceTag },
    #[error("loading {path}")]
    Load { path: String, source: ModelFileError },
    #[error("writing {path}")]
    Save { path: String, source: ModelFileError },
}

/// The four trained models: one per sentence distance plus the all-distance model.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelSet {
    by_distance: [Model; 3],
    all: Model,
    version: String,
}

impl ModelSet {
    pub fn new(d0: Model, d1: Model, d2: Model, all: Model) -> Result<Self, ModelSetError> {
        for (model, expected) in [(&d0, DistanceTag::D0), (&d1, DistanceTag::D1), (&d2, DistanceTag::D2), (&all, DistanceTag::All)] {
            if model.tag() != expected {
                return Err(ModelSetError::TagMismatch {
                    expected,
                    found: model.tag(),
                });
            }
        }
        let mut hasher = Sha256::new();
        for m in [&d0, &d1, &d2, &all] {
            hasher.update(m.to_json().as_bytes());
        }
        let version = hex::encode(&hasher.finalize()[..6]);
        Ok(Self {
            by_distance: [d0, d1, d2],
            all,
            version,
        })
    }

    pub fn model(&self, tag: DistanceTag) -> &Model {
        match tag.distance() {
            Some(d) => &self.by_distance[d],
            None => &self.all,
        }
    }

    pub fn for_distance(&self, distance: usize) -> Option<&Model> {
        self.by_distance.get(distance)
    }

    pub fn all_model(&self) -> &Model {
        &self.all
    }

    /// Short content hash of the four model files.
    pub fn version(&self) -> &str {
        &self.version
    }

    pub fn file_name(tag: DistanceTag) -> String {
        format!("{}.json", tag.as_str())
    }

    /// Writes `d0.json`, `d1.json`, `d2.json` and `all.json` into `dir`.
    pub fn save_dir(&self, dir: &Path) -> Result<(), ModelSetError> {
        for tag in DistanceTag::ALL_TAGS {
            let path = dir.join(Self::file_name(tag));
            self.model(tag).save(&path).map_err(|source| ModelSetError::Save {
                path: path.display().to_string(),
                source,
            })?;
        }
        Ok(())
    }

    pub fn load_dir(dir: &Path) -> Result<Self, ModelSetError> {
        let load = |tag: DistanceTag| {
            let path = dir.join(Self::file_name(tag));
            Model::load(&path).map_err(|source| ModelSetError::Load {
                path: path.display().to_string(),
                source,
            })
        };
        Self::new(load(DistanceTag::D0)?, load(DistanceTag::D1)?, load(DistanceTag::D2)?, load(DistanceTag::All)?)
    }
}

/// Which models must all vote positive for each distance.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CombinationPlan {
    pub per_distance: [Vec<DistanceTag>; 3],
}

impl Default for CombinationPlan {
    /// The distance-specific model AND the all-distance model.
    fn default() -> Self {
        Self {
            per_distance: [
                vec![DistanceTag::D0, DistanceTag::All],
                vec![DistanceTag::D1, DistanceTag::All],
                vec![DistanceTag::D2, DistanceTag::All],
            ],
        }
    }
}

impl CombinationPlan {
    /// Only the distance-specific model decides.
    pub fn distance_only() -> Self {
        Self {
            per_distance: [vec![DistanceTag::D0], vec![DistanceTag::D1], vec![DistanceTag::D2]],
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Classification {
    pub accepted: bool,
    /// Raw decision values; always holds the distance model and the all model.
    pub scores: BTreeMap<DistanceTag, f64>,
}

/// Decision values of the requested models for a generalized stream.
pub fn score_stream(ms: &ModelSet, stream: &[String], tags: &[DistanceTag]) -> BTreeMap<DistanceTag, f64> {
    let pairs = ordered_pairs(stream);
    tags.iter().map(|&t| (t, ms.model(t).decision_for_pairs(&pairs))).collect()
}

fn combine(ms: &ModelSet, plan: &CombinationPlan, stream: &[String], distance: usize) -> Classification {
    let own = DistanceTag::for_distance(distance).expect("excerpt distance within 0..=2");
    let required = &plan.per_distance[distance];
    let mut tags: Vec<DistanceTag> = required.iter().copied().chain([own, DistanceTag::All]).collect();
    tags.sort_unstable();
    tags.dedup();
    let scores = score_stream(ms, stream, &tags);
    let accepted = required.iter().all(|t| label_for(scores[t]) == Label::Positive);
    Classification { accepted, scores }
}

/// Accepted iff both the distance model and the all-distance model say positive.
pub fn classify_excerpt(ms: &ModelSet, excerpt: &Excerpt) -> Classification {
    classify_with_plan(ms, &CombinationPlan::default(), excerpt)
}

pub fn classify_with_plan(ms: &ModelSet, plan: &CombinationPlan, excerpt: &Excerpt) -> Classification {
    combine(ms, plan, &excerpt.generalized, excerpt.distance)
}

/// Same as [`classify_with_plan`] on a bare stream and distance.
pub fn classify_stream(ms: &ModelSet, plan: &CombinationPlan, stream: &[String], distance: usize) -> Classification {
    combine(ms, plan, stream, distance)
}

/// Value of the first year token by position.
pub fn first_year(excerpt: &Excerpt) -> u32 {
    *excerpt.years.first().expect("candidate excerpts hold at least one year")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimelineEntry {
    pub year: u32,
    pub text: String,
    pub source_id: String,
    pub first_sentence: usize,
    pub last_sentence: usize,
    pub distance: usize,
    pub scores: BTreeMap<DistanceTag, f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Timeline {
    pub query: String,
    pub model_version: String,
    pub generated_at: DateTime<Utc>,
    pub entries: Vec<TimelineEntry>,
}

impl Timeline {
    /// Equality ignoring `generated_at`.
    pub fn same_content(&self, other: &Timeline) -> bool {
        self.query == other.query && self.model_version == other.model_version && self.entries == other.entries
    }
}

/// Candidate extraction, ensemble filtering and timeline ordering.
#[derive(Debug, Clone)]
pub struct Pipeline {
    models: ModelSet,
    plan: CombinationPlan,
    max_distance: usize,
}

impl Pipeline {
    pub fn new(models: ModelSet) -> Self {
        Self {
            models,
            plan: CombinationPlan::default(),
            max_distance: DEFAULT_MAX_DISTANCE,
        }
    }

    pub fn with_plan(mut self, plan: CombinationPlan) -> Self {
        self.plan = plan;
        self
    }

    pub fn models(&self) -> &ModelSet {
        &self.models
    }

    pub fn plan(&self) -> &CombinationPlan {
        &self.plan
    }

    /// Accepted excerpts of `doc` with their scores, before deduplication.
    pub fn accepted(&self, doc: &Document) -> Vec<(Excerpt, Classification)> {
        extract_candidates(doc, self.max_distance)
            .into_par_iter()
            .map(|e| {
                let c = classify_with_plan(&self.models, &self.plan, &e);
                (e, c)
            })
            .filter(|(_, c)| c.accepted)
            .collect()
    }

    pub fn build_timeline(&self, doc: &Document, query: &str) -> Timeline {
        let mut accepted = self.accepted(doc);
        // Shorter windows win overlaps; among equals the earlier one.
        accepted.sort_by_key(|(e, _)| (e.distance, e.first_sentence));
        let mut kept: Vec<(Excerpt, Classification)> = Vec::new();
        for (e, c) in accepted {
            let range = (e.first_sentence, e.last_sentence);
            if kept.iter().all(|(k, _)| !ranges_overlap((k.first_sentence, k.last_sentence), range)) {
                kept.push((e, c));
            }
        }
        let mut entries: Vec<TimelineEntry> = kept
            .into_iter()
            .map(|(e, c)| TimelineEntry {
                year: first_year(&e),
                text: e.text,
                source_id: e.source_id,
                first_sentence: e.first_sentence,
                last_sentence: e.last_sentence,
                distance: e.distance,
                scores: c.scores,
            })
            .collect();
        entries.sort_by_key(|t| (t.year, t.first_sentence, t.last_sentence));
        Timeline {
            query: query.to_string(),
            model_version: self.models.version().to_string(),
            generated_at: Utc::now(),
            entries,
        }
    }
}

/// Timeline with the default two-model combination.
pub fn build_timeline(doc: &Document, ms: &ModelSet, query: &str) -> Timeline {
    Pipeline::new(ms.clone()).build_timeline(doc, query)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::features::FeatureIndex;
    use crate::svm::{ModelMetadata, SmoSolution, TrainConfig};
    use crate::textseg::analyze;

    /// Model whose decision is `sum of listed key weights - bias`.
    fn hand_model(tag: DistanceTag, weights: &[(&str, f64)], bias: f64) -> Model {
        let index = FeatureIndex::from_keys(weights.iter().map(|(k, _)| k.to_string()));
        let solution = SmoSolution {
            alphas: vec![],
            weights: weights.iter().map(|(_, w)| *w).collect(),
            bias,
            sweeps: 0,
            converged: true,
        };
        let meta = ModelMetadata {
            positives: 0,
            negatives: 0,
            trained_on: String::new(),
        };
        Model::new(&solution, index, tag, TrainConfig::default(), meta).unwrap()
    }

    fn set(distance_bias: f64, all_bias: f64) -> ModelSet {
        let w = [("renamed-N", 1.0)];
        ModelSet::new(
            hand_model(DistanceTag::D0, &w, distance_bias),
            hand_model(DistanceTag::D1, &w, distance_bias),
            hand_model(DistanceTag::D2, &w, distance_bias),
            hand_model(DistanceTag::All, &w, all_bias),
        )
        .unwrap()
    }

    fn excerpt(text: &str) -> Excerpt {
        extract_candidates(&analyze(text, "t"), 2).remove(0)
    }

    #[test]
    fn and_truth_table() {
        let e = excerpt("Saint Petersburg was renamed Petrograd in 1914.");
        let both = classify_excerpt(&set(0.5, 0.5), &e);
        assert!(both.accepted);
        assert_eq!(both.scores.len(), 2);
        assert!(!classify_excerpt(&set(0.5, 1.5), &e).accepted);
        assert!(!classify_excerpt(&set(1.5, 1.5), &e).accepted);
        let distance_only = classify_with_plan(&set(0.5, 1.5), &CombinationPlan::distance_only(), &e);
        assert!(distance_only.accepted);
        assert!(distance_only.scores.contains_key(&DistanceTag::All));
    }

    #[test]
    fn zero_decision_rejects() {
        let e = excerpt("Saint Petersburg was renamed Petrograd in 1914.");
        assert!(!classify_excerpt(&set(1.0, 1.0), &e).accepted);
    }

    #[test]
    fn first_year_is_positional() {
        let mut e = excerpt("Saint Petersburg was renamed Petrograd in 1914.");
        e.years = vec![1914, 1924];
        assert_eq!(first_year(&e), 1914);
        e.years = vec![1991, 1703];
        assert_eq!(first_year(&e), 1991);
    }

    #[test]
    fn tag_mismatch_rejected() {
        let m = hand_model(DistanceTag::D1, &[], 0.0);
        let err = ModelSet::new(m.clone(), m.clone(), m.clone(), m).unwrap_err();
        assert!(matches!(err, ModelSetError::TagMismatch { expected: DistanceTag::D0, .. }));
    }

    #[test]
    fn empty_document_gives_empty_timeline() {
        let t = build_timeline(&analyze("", "x"), &set(0.0, 0.0), "x");
        assert!(t.entries.is_empty());
    }

    #[test]
    fn overlap_keeps_shortest_window() {
        // Sentence 0 alone and sentences 0..=2 are both candidates; every
        // candidate is accepted by a model with negative bias.
        let text = "Alder was renamed Birch in 1901 by Cedar. The harbour grew. Traders came from Dover and Essex in 1920.";
        let ms = set(-1.0, -1.0);
        let doc = analyze(text, "t");
        let t = build_timeline(&doc, &ms, "q");
        assert_eq!(t.entries.len(), 2);
        assert_eq!((t.entries[0].first_sentence, t.entries[0].distance), (0, 0));
        assert_eq!(t.entries[0].year, 1901);
        assert_eq!((t.entries[1].first_sentence, t.entries[1].distance), (2, 0));
        for w in t.entries.windows(2) {
            assert!(w[0].year <= w[1].year);
            assert!(!ranges_overlap((w[0].first_sentence, w[0].last_sentence), (w[1].first_sentence, w[1].last_sentence)));
        }
    }

    #[test]
    fn model_set_directory_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let ms = set(0.25, 0.75);
        ms.save_dir(dir.path()).unwrap();
        let loaded = ModelSet::load_dir(dir.path()).unwrap();
        assert_eq!(loaded.version(), ms.version());
        std::fs::remove_file(dir.path().join("d2.json")).unwrap();
        assert!(matches!(ModelSet::load_dir(dir.path()), Err(ModelSetError::Load { .. })));
    }
}

