//! Fetch, analyze and classify: the work behind one timeline request.

use std::path::PathBuf;

use evobase_core::config::Settings;
use evobase_core::ingest::{ArticleFetcher, FetchError, FetchResult};
use evobase_core::pipeline::{ModelSet, Pipeline, Timeline};
use evobase_core::textseg::{analyze_with, Lexicon};

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Source {
    Query(String),
    Url(String),
    File(PathBuf),
}

impl Source {
    /// The text recorded as the timeline's query.
    pub fn label(&self) -> String {
        match self {
            Source::Query(q) => q.trim().to_string(),
            Source::Url(u) => u.trim().to_string(),
            Source::File(p) => p.display().to_string(),
        }
    }
}

/// Anything that can turn a source into a timeline. The service depends on
/// this rather than on [`Engine`] so tests can substitute slow or failing
/// implementations.
pub trait TimelineSource: Send + Sync {
    fn model_version(&self) -> &str;
    fn timeline(&self, source: &Source) -> Result<Timeline, FetchError>;
}

pub struct Engine {
    pipeline: Pipeline,
    fetcher: ArticleFetcher,
    lexicon: Lexicon,
}

impl Engine {
    pub fn new(models: ModelSet, settings: &Settings) -> std::io::Result<Self> {
        Ok(Self {
            pipeline: Pipeline::new(models),
            fetcher: ArticleFetcher::new(settings),
            lexicon: settings.lexicon()?,
        })
    }

    pub fn pipeline(&self) -> &Pipeline {
        &self.pipeline
    }

    pub fn fetch(&self, source: &Source) -> Result<FetchResult, FetchError> {
        match source {
            Source::Query(q) => self.fetcher.fetch_article(q.trim()),
            Source::Url(u) => self.fetcher.fetch_url(u.trim()),
            Source::File(p) => self.fetcher.fetch_file(p),
        }
    }
}

impl TimelineSource for Engine {
    fn model_version(&self) -> &str {
        self.pipeline.models().version()
    }

    fn timeline(&self, source: &Source) -> Result<Timeline, FetchError> {
        let fetched = self.fetch(source)?;
        let doc = analyze_with(&fetched.text, &fetched.source_id, &self.lexicon);
        Ok(self.pipeline.build_timeline(&doc, &source.label()))
    }
}
