//! Timeline cache keyed by normalized query and model version.
//!
//! Entries live in memory and, when a directory is configured, as one JSON
//! file per key. Concurrent requests for the same key are coalesced: one
//! caller computes, the others wait for its result. If the computing caller
//! fails, a waiter takes over.

use std::collections::HashMap;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Condvar, Mutex};

use chrono::{DateTime, Duration, Utc};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use tracing::warn;

use crate::pipeline::Timeline;

pub type Clock = Arc<dyn Fn() -> DateTime<Utc> + Send + Sync>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CacheEntry {
    pub key: String,
    pub created_at: DateTime<Utc>,
    pub ttl_secs: u64,
    pub value: Timeline,
}

impl CacheEntry {
    pub fn is_fresh(&self, now: DateTime<Utc>) -> bool {
        let ttl = Duration::seconds(i64::try_from(self.ttl_secs).unwrap_or(i64::MAX / 1000));
        now < self.created_at + ttl
    }
}

/// Trimmed, lowercased, inner whitespace collapsed.
pub fn normalize_query(query: &str) -> String {
    query.split_whitespace().map(str::to_lowercase).collect::<Vec<_>>().join(" ")
}

pub fn cache_key(query: &str, model_version: &str) -> String {
    format!("{}|{}", normalize_query(query), model_version)
}

#[derive(Default)]
struct Flight {
    // None while running; Some(None) if the leader failed.
    result: Mutex<Option<Option<Timeline>>>,
    done: Condvar,
}

#[derive(Debug, Default, Clone, Copy, PartialEq, Eq)]
pub struct CacheStats {
    pub hits: u64,
    pub computes: u64,
}

pub struct TimelineCache {
    dir: Option<PathBuf>,
    ttl_secs: u64,
    clock: Clock,
    memory: Mutex<HashMap<String, CacheEntry>>,
    flights: Mutex<HashMap<String, Arc<Flight>>>,
    hits: AtomicU64,
    computes: AtomicU64,
}

impl std::fmt::Debug for TimelineCache {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("TimelineCache")
            .field("dir", &self.dir)
            .field("ttl_secs", &self.ttl_secs)
            .field("stats", &self.stats())
            .finish()
    }
}

/// Removes the flight and wakes waiters even if the computation panics.
struct FlightGuard<'a> {
    cache: &'a TimelineCache,
    key: &'a str,
    flight: Arc<Flight>,
    result: Option<Timeline>,
}

impl Drop for FlightGuard<'_> {
    fn drop(&mut self) {
        self.cache.flights.lock().unwrap_or_else(|e| e.into_inner()).remove(self.key);
        *self.flight.result.lock().unwrap_or_else(|e| e.into_inner()) = Some(self.result.take());
        self.flight.done.notify_all();
    }
}

impl TimelineCache {
    pub fn new(dir: Option<PathBuf>, ttl_secs: u64) -> Self {
        Self::with_clock(dir, ttl_secs, Arc::new(Utc::now))
    }

    pub fn with_clock(dir: Option<PathBuf>, ttl_secs: u64, clock: Clock) -> Self {
        Self {
            dir,
            ttl_secs,
            clock,
            memory: Mutex::new(HashMap::new()),
            flights: Mutex::new(HashMap::new()),
            hits: AtomicU64::new(0),
            computes: AtomicU64::new(0),
        }
    }

    pub fn dir(&self) -> Option<&Path> {
        self.dir.as_deref()
    }

    pub fn stats(&self) -> CacheStats {
        CacheStats {
            hits: self.hits.load(Ordering::SeqCst),
            computes: self.computes.load(Ordering::SeqCst),
        }
    }

    fn path_for(&self, key: &str) -> Option<PathBuf> {
        let digest = Sha256::digest(key.as_bytes());
        self.dir.as_ref().map(|d| d.join(format!("{}.json", hex::encode(digest))))
    }

    /// A fresh cached timeline, if any.
    pub fn get(&self, key: &str) -> Option<Timeline> {
        let now = (self.clock)();
        if let Some(entry) = self.memory.lock().unwrap_or_else(|e| e.into_inner()).get(key) {
            if entry.is_fresh(now) {
                return Some(entry.value.clone());
            }
        }
        let path = self.path_for(key)?;
        let bytes = match std::fs::read(&path) {
            Ok(b) => b,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => return None,
            Err(e) => {
                warn!(path = %path.display(), error = %e, "cache read failed");
                return None;
            }
        };
        let entry: CacheEntry = match serde_json::from_slice(&bytes) {
            Ok(e) => e,
            Err(e) => {
                warn!(path = %path.display(), error = %e, "ignoring corrupt cache entry");
                return None;
            }
        };
        if entry.key != key || !entry.is_fresh(now) {
            return None;
        }
        let value = entry.value.clone();
        self.memory.lock().unwrap_or_else(|e| e.into_inner()).insert(key.to_string(), entry);
        Some(value)
    }

    pub fn put(&self, key: &str, value: Timeline) {
        let entry = CacheEntry {
            key: key.to_string(),
            created_at: (self.clock)(),
            ttl_secs: self.ttl_secs,
            value,
        };
        if let Some(path) = self.path_for(key) {
            if let Err(e) = write_atomic(&path, &entry) {
                warn!(path = %path.display(), error = %e, "cache write failed; keeping entry in memory only");
            }
        }
        self.memory.lock().unwrap_or_else(|e| e.into_inner()).insert(key.to_string(), entry);
    }

    /// Cached value for `key`, or the result of `compute`. At most one
    /// `compute` runs per key at a time.
    pub fn get_or_compute<E>(&self, key: &str, compute: impl FnOnce() -> Result<Timeline, E>) -> Result<Timeline, E> {
        let mut compute = Some(compute);
        loop {
            if let Some(hit) = self.get(key) {
                self.hits.fetch_add(1, Ordering::SeqCst);
                return Ok(hit);
            }
            let (flight, leader) = {
                let mut flights = self.flights.lock().unwrap_or_else(|e| e.into_inner());
                match flights.get(key) {
                    Some(f) => (Arc::clone(f), false),
                    None => {
                        let f = Arc::new(Flight::default());
                        flights.insert(key.to_string(), Arc::clone(&f));
                        (f, true)
                    }
                }
            };
            if leader {
                // Another leader may have finished between our lookup and
                // registering this flight.
                let mut guard = FlightGuard {
                    cache: self,
                    key,
                    flight,
                    result: None,
                };
                if let Some(hit) = self.get(key) {
                    self.hits.fetch_add(1, Ordering::SeqCst);
                    guard.result = Some(hit.clone());
                    return Ok(hit);
                }
                let compute = compute.take().expect("compute runs at most once");
                self.computes.fetch_add(1, Ordering::SeqCst);
                let value = compute()?;
                self.put(key, value.clone());
                guard.result = Some(value.clone());
                return Ok(value);
            }
            let mut result = flight.result.lock().unwrap_or_else(|e| e.into_inner());
            while result.is_none() {
                result = flight.done.wait(result).unwrap_or_else(|e| e.into_inner());
            }
            if let Some(Some(value)) = result.as_ref() {
                self.hits.fetch_add(1, Ordering::SeqCst);
                return Ok(value.clone());
            }
            // The leader failed; try again, possibly as the new leader.
        }
    }
}

fn write_atomic(path: &Path, entry: &CacheEntry) -> std::io::Result<()> {
    let dir = path.parent().unwrap_or(Path::new("."));
    std::fs::create_dir_all(dir)?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    serde_json::to_writer(&mut tmp, entry)?;
    tmp.as_file().sync_all()?;
    tmp.persist(path).map_err(|e| e.error)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::sync::atomic::AtomicI64;
    use std::sync::Barrier;

    fn timeline(query: &str) -> Timeline {
        Timeline {
            query: query.to_string(),
            model_version: "v1".into(),
            generated_at: DateTime::from_timestamp(0, 0).unwrap(),
            entries: Vec::new(),
        }
    }

    #[test]
    fn normalization() {
        assert_eq!(normalize_query("  Saint   PETERSBURG "), "saint petersburg");
        assert_eq!(cache_key("Saint Petersburg", "ab12"), cache_key("saint  petersburg", "ab12"));
        assert_ne!(cache_key("Saint Petersburg", "ab12"), cache_key("Saint Petersburg", "cd34"));
    }

    #[test]
    fn second_call_hits() {
        let cache = TimelineCache::new(None, 60);
        let key = cache_key("x", "v1");
        let a: Result<_, ()> = cache.get_or_compute(&key, || Ok(timeline("x")));
        let b: Result<_, ()> = cache.get_or_compute(&key, || panic!("should be cached"));
        assert_eq!(a.unwrap(), b.unwrap());
        assert_eq!(cache.stats(), CacheStats { hits: 1, computes: 1 });
    }

    #[test]
    fn entries_expire() {
        let now = Arc::new(AtomicI64::new(1_000_000));
        let clock_now = Arc::clone(&now);
        let clock: Clock = Arc::new(move || DateTime::from_timestamp(clock_now.load(Ordering::SeqCst), 0).unwrap());
        let cache = TimelineCache::with_clock(None, 10, clock);
        cache.put("k", timeline("x"));
        now.fetch_add(9, Ordering::SeqCst);
        assert!(cache.get("k").is_some());
        now.fetch_add(1, Ordering::SeqCst);
        assert!(cache.get("k").is_none());
    }

    #[test]
    fn survives_restart_on_disk() {
        let dir = tempfile::tempdir().unwrap();
        let key = cache_key("Saint Petersburg", "v1");
        TimelineCache::new(Some(dir.path().to_path_buf()), 60).put(&key, timeline("Saint Petersburg"));
        let files: Vec<_> = std::fs::read_dir(dir.path()).unwrap().collect();
        assert_eq!(files.len(), 1);
        let reopened = TimelineCache::new(Some(dir.path().to_path_buf()), 60);
        assert_eq!(reopened.get(&key), Some(timeline("Saint Petersburg")));
        assert_eq!(reopened.get(&cache_key("Other", "v1")), None);
    }

    #[test]
    fn corrupt_file_is_a_miss() {
        let dir = tempfile::tempdir().unwrap();
        let cache = TimelineCache::new(Some(dir.path().to_path_buf()), 60);
        let path = cache.path_for("k").unwrap();
        std::fs::write(&path, b"{not json").unwrap();
        assert_eq!(cache.get("k"), None);
        let v: Result<_, ()> = cache.get_or_compute("k", || Ok(timeline("k")));
        assert!(v.is_ok());
        assert_eq!(TimelineCache::new(Some(dir.path().to_path_buf()), 60).get("k"), Some(timeline("k")));
    }

    #[test]
    fn unwritable_dir_falls_back_to_memory() {
        let dir = tempfile::tempdir().unwrap();
        let blocker = dir.path().join("file");
        std::fs::write(&blocker, b"").unwrap();
        let cache = TimelineCache::new(Some(blocker.join("sub")), 60);
        let v: Result<_, ()> = cache.get_or_compute("k", || Ok(timeline("k")));
        assert!(v.is_ok());
        assert!(cache.get("k").is_some());
    }

    #[test]
    fn concurrent_identical_requests_compute_once() {
        let cache = Arc::new(TimelineCache::new(None, 60));
        let barrier = Arc::new(Barrier::new(8));
        let handles: Vec<_> = (0..8)
            .map(|_| {
                let cache = Arc::clone(&cache);
                let barrier = Arc::clone(&barrier);
                std::thread::spawn(move || {
                    barrier.wait();
                    let r: Result<_, ()> = cache.get_or_compute("k", || {
                        std::thread::sleep(std::time::Duration::from_millis(100));
                        Ok(timeline("k"))
                    });
                    r.unwrap()
                })
            })
            .collect();
        for h in handles {
            assert_eq!(h.join().unwrap(), timeline("k"));
        }
        assert_eq!(cache.stats().computes, 1);
    }

    #[test]
    fn failed_leader_hands_over() {
        let cache = TimelineCache::new(None, 60);
        let r: Result<Timeline, &str> = cache.get_or_compute("k", || Err("boom"));
        assert_eq!(r, Err("boom"));
        let r: Result<Timeline, &str> = cache.get_or_compute("k", || Ok(timeline("k")));
        assert!(r.is_ok());
        assert_eq!(cache.stats().computes, 2);
    }

    #[test]
    fn waiters_retry_after_leader_error() {
        let cache = Arc::new(TimelineCache::new(None, 60));
        let started = Arc::new(Barrier::new(2));
        let leader = {
            let cache = Arc::clone(&cache);
            let started = Arc::clone(&started);
            std::thread::spawn(move || {
                let r: Result<Timeline, &str> = cache.get_or_compute("k", || {
                    started.wait();
                    std::thread::sleep(std::time::Duration::from_millis(100));
                    Err("boom")
                });
                r
            })
        };
        started.wait();
        let r: Result<Timeline, &str> = cache.get_or_compute("k", || Ok(timeline("k")));
        assert_eq!(leader.join().unwrap(), Err("boom"));
        assert_eq!(r, Ok(timeline("k")));
        assert_eq!(cache.stats().computes, 2);
    }
}
