use std::path::{Path, PathBuf};
use std::time::Duration;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

use super::html::extract_main_text_with;
use crate::config::Settings;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Origin {
    EncyclopediaApi,
    RawUrl,
    LocalFile,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FetchResult {
    pub source_id: String,
    pub text: String,
    pub fetched_at: DateTime<Utc>,
    pub origin: Origin,
}

#[derive(Debug, Error)]
pub enum FetchError {
    #[error("network error: {0}")]
    Network(String),
    #[error("no article found for `{0}`")]
    NotFound(String),
    #[error("rate limited by upstream")]
    RateLimited,
    #[error("upstream returned HTTP {0}")]
    Upstream(u16),
    #[error("unexpected upstream response: {0}")]
    Malformed(String),
    #[error("reading {path}")]
    Io { path: PathBuf, source: std::io::Error },
}

impl FetchError {
    /// Errors caused by the remote side rather than the request.
    pub fn is_upstream(&self) -> bool {
        matches!(self, FetchError::Network(_) | FetchError::RateLimited | FetchError::Upstream(_) | FetchError::Malformed(_))
    }
}

fn transport(err: ureq::Error) -> FetchError {
    match err {
        ureq::Error::StatusCode(429) => FetchError::RateLimited,
        ureq::Error::StatusCode(code) => FetchError::Upstream(code),
        other => FetchError::Network(other.to_string()),
    }
}

/// Fetches article text from the encyclopedia API, arbitrary URLs or local files.
#[derive(Debug, Clone)]
pub struct ArticleFetcher {
    endpoint: String,
    offline: bool,
    offline_dir: Option<PathBuf>,
    min_paragraph_chars: usize,
    agent: ureq::Agent,
}

impl ArticleFetcher {
    pub fn new(settings: &Settings) -> Self {
        let agent: ureq::Agent = ureq::Agent::config_builder()
            .timeout_global(Some(Duration::from_secs(settings.fetch_timeout_secs)))
            .http_status_as_error(false)
            .user_agent(concat!("evobase/", env!("CARGO_PKG_VERSION")))
            .build()
            .into();
        Self {
            endpoint: settings.endpoint.clone(),
            offline: settings.offline,
            offline_dir: settings.offline_dir.clone(),
            min_paragraph_chars: settings.min_paragraph_chars,
            agent,
        }
    }

    pub fn endpoint(&self) -> &str {
        &self.endpoint
    }

    fn get(&self, url: &str, query: &[(&str, &str)]) -> Result<(String, Option<String>), FetchError> {
        let mut request = self.agent.get(url);
        for (k, v) in query {
            request = request.query(*k, *v);
        }
        let mut response = request.call().map_err(transport)?;
        let status = response.status().as_u16();
        match status {
            200..=299 => {}
            404 => return Err(FetchError::NotFound(url.to_string())),
            429 => return Err(FetchError::RateLimited),
            other => return Err(FetchError::Upstream(other)),
        }
        let content_type = response
            .headers()
            .get("content-type")
            .and_then(|v| v.to_str().ok())
            .map(str::to_string);
        let body = response.body_mut().read_to_string().map_err(transport)?;
        Ok((body, content_type))
    }

    /// Plain-text article for `query`. In offline mode the text is read from
    /// `<offline_dir>/<slug>.txt`.
    pub fn fetch_article(&self, query: &str) -> Result<FetchResult, FetchError> {
        if self.offline {
            let dir = self.offline_dir.as_deref().unwrap_or(Path::new("."));
            let path = dir.join(format!("{}.txt", slug(query)));
            if !path.exists() {
                return Err(FetchError::NotFound(query.to_string()));
            }
            let mut result = self.fetch_file(&path)?;
            result.source_id = query.trim().to_string();
            return Ok(result);
        }
        match self.extract_for_title(query)? {
            Some(result) => Ok(result),
            None => match self.search_title(query)? {
                Some(title) if title != query => self.extract_for_title(&title)?.ok_or_else(|| FetchError::NotFound(query.to_string())),
                _ => Err(FetchError::NotFound(query.to_string())),
            },
        }
    }

    fn extract_for_title(&self, title: &str) -> Result<Option<FetchResult>, FetchError> {
        let (body, _) = self.get(
            &self.endpoint,
            &[
                ("action", "query"),
                ("format", "json"),
                ("formatversion", "2"),
                ("prop", "extracts"),
                ("explaintext", "1"),
                ("redirects", "1"),
                ("titles", title),
            ],
        )?;
        let json: Value = serde_json::from_str(&body).map_err(|e| FetchError::Malformed(e.to_string()))?;
        let page = json
            .pointer("/query/pages/0")
            .ok_or_else(|| FetchError::Malformed("response has no query.pages".into()))?;
        if page.get("missing").is_some() || page.get("invalid").is_some() {
            return Ok(None);
        }
        let extract = page.get("extract").and_then(Value::as_str).unwrap_or_default();
        if extract.trim().is_empty() {
            return Ok(None);
        }
        let resolved = page.get("title").and_then(Value::as_str).unwrap_or(title);
        Ok(Some(FetchResult {
            source_id: resolved.to_string(),
            text: strip_section_headings(extract),
            fetched_at: Utc::now(),
            origin: Origin::EncyclopediaApi,
        }))
    }

    fn search_title(&self, query: &str) -> Result<Option<String>, FetchError> {
        let (body, _) = self.get(
            &self.endpoint,
            &[("action", "opensearch"), ("format", "json"), ("namespace", "0"), ("limit", "1"), ("search", query)],
        )?;
        let json: Value = serde_json::from_str(&body).map_err(|e| FetchError::Malformed(e.to_string()))?;
        Ok(json.pointer("/1/0").and_then(Value::as_str).map(str::to_string))
    }

    /// Main text of an arbitrary page.
    pub fn fetch_url(&self, url: &str) -> Result<FetchResult, FetchError> {
        let (body, content_type) = self.get(url, &[])?;
        let is_html = content_type.as_deref().is_some_and(|c| c.contains("html")) || body.trim_start().starts_with('<');
        let text = if is_html {
            extract_main_text_with(&body, self.min_paragraph_chars)
        } else {
            body
        };
        Ok(FetchResult {
            source_id: url.to_string(),
            text,
            fetched_at: Utc::now(),
            origin: Origin::RawUrl,
        })
    }

    /// File contents verbatim.
    pub fn fetch_file(&self, path: &Path) -> Result<FetchResult, FetchError> {
        let text = std::fs::read_to_string(path).map_err(|source| FetchError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Ok(FetchResult {
            source_id: path.display().to_string(),
            text,
            fetched_at: Utc::now(),
            origin: Origin::LocalFile,
        })
    }
}

/// Lowercase, words joined by `_`; other characters dropped.
pub fn slug(query: &str) -> String {
    query
        .split(|c: char| !c.is_alphanumeric())
        .filter(|w| !w.is_empty())
        .map(str::to_lowercase)
        .collect::<Vec<_>>()
        .join("_")
}

/// Replaces `== Heading ==` lines of plain-text extracts with paragraph breaks.
pub fn strip_section_headings(text: &str) -> String {
    let lines: Vec<&str> = text
        .lines()
        .map(|l| {
            let t = l.trim();
            if t.len() >= 4 && t.starts_with("==") && t.ends_with("==") {
                ""
            } else {
                l
            }
        })
        .collect();
    lines.join("\n")
}
