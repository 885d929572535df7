//! Getting article text in, and computed timelines cached.

pub mod cache;
pub mod fetch;
pub mod html;

pub use cache::{cache_key, normalize_query, CacheEntry, TimelineCache};
pub use fetch::{ArticleFetcher, FetchError, FetchResult, Origin};
pub use html::{extract_main_text, extract_main_text_with};
