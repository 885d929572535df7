//! Finds excerpts that describe how a named entity's name changed over time
//! and orders them into a timeline.

pub mod config;
pub mod excerpt;
pub mod features;
pub mod markup;
pub mod ingest;
pub mod pipeline;
pub mod svm;
pub mod synth;
pub mod textseg;
pub mod training;

pub use config::Settings;
pub use excerpt::{extract_candidates, Excerpt};
pub use features::{ordered_pairs, FeatureIndex, FeatureVector};
pub use ingest::{ArticleFetcher, FetchError, FetchResult, Origin, TimelineCache};
pub use pipeline::{CombinationPlan, ModelSet, Pipeline, Timeline, TimelineEntry};
pub use svm::{DistanceTag, Label, Model, TrainConfig};
pub use textseg::{analyze, Document, Lexicon, Sentence, Token, TokenKind};
pub use training::{build_datasets, cross_validate, CorpusArticle, CvReport, Dataset, DatasetSet};
