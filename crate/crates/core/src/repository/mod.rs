//! Repository access: index refresh, provider lookup, descriptor and package
//! retrieval through a content-addressed local cache.
//!
//! Every retrieval is hash-verified. Descriptors and indexes are cheap
//! metadata fetched during the check phase; packages are only pulled by
//! [`RepositoryClient::fetch_package`] once a plan is about to execute.

mod cache;
mod transport;

use std::fmt;
use std::io;
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex};

use chrono::{DateTime, SecondsFormat, Utc};
use url::Url;

pub use cache::MetadataCache;
pub use transport::{DefaultTransport, Transport, TransportError};

use crate::codec::{parse_descriptor, parse_repository_index, CodecError, IndexEntry};
use crate::hash::Sha256Digest;
use crate::model::{Descriptor, VersionRange};

pub const INDEX_FILE: &str = "index.xml";
/// Environment variable overriding the cache directory.
pub const CACHE_ENV: &str = "RESOLVIT_CACHE";

#[derive(Debug, thiserror::Error)]
pub enum RepoError {
    #[error("repository {url} unavailable: {reason}")]
    RepositoryUnavailable { url: String, reason: String },
    #[error("{0} not found")]
    NotFound(String),
    #[error("integrity check failed for {url}: {reason}")]
    Integrity { url: String, reason: String },
    #[error("{url}: {source}")]
    Malformed { url: String, source: CodecError },
    #[error("invalid repository URL `{0}`")]
    InvalidSource(String),
    #[error("cache I/O: {0}")]
    Io(#[from] io::Error),
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct RepositorySource {
    base: String,
    url: Url,
    pub trust_label: String,
}

impl RepositorySource {
    /// Accepts `http://` and `file://` URLs; trailing slashes are dropped.
    pub fn new(base_url: &str, trust_label: impl Into<String>) -> Result<Self, RepoError> {
        let invalid = || RepoError::InvalidSource(base_url.to_string());
        let parsed = Url::parse(base_url).map_err(|_| invalid())?;
        if !matches!(parsed.scheme(), "http" | "file") || parsed.cannot_be_a_base() {
            return Err(invalid());
        }
        let base = parsed.as_str().trim_end_matches('/').to_string();
        let url = Url::parse(&base).map_err(|_| invalid())?;
        Ok(RepositorySource {
            base,
            url,
            trust_label: trust_label.into(),
        })
    }

    pub fn from_directory(path: &Path, trust_label: impl Into<String>) -> Result<Self, RepoError> {
        let abs = std::path::absolute(path)?;
        let url = Url::from_file_path(&abs)
            .map_err(|_| RepoError::InvalidSource(abs.display().to_string()))?;
        RepositorySource::new(url.as_str(), trust_label)
    }

    pub fn base_url(&self) -> &Url {
        &self.url
    }

    pub fn as_str(&self) -> &str {
        &self.base
    }

    pub fn join(&self, relative: &str) -> String {
        format!("{}/{}", self.base, relative)
    }

    /// `true` if `url` names this repository (after normalization).
    pub fn is(&self, url: &Url) -> bool {
        url.as_str().trim_end_matches('/') == self.base
    }
}

impl fmt::Display for RepositorySource {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.base)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IndexSnapshot {
    pub source: RepositorySource,
    pub entries: Vec<IndexEntry>,
    pub fetched_at: DateTime<Utc>,
    /// Served from cache after a failed refresh.
    pub stale: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FetchKind {
    Index,
    Descriptor,
    Package,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FetchOutcome {
    Network,
    CacheHit,
    Error,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FetchRecord {
    pub url: String,
    pub kind: FetchKind,
    pub outcome: FetchOutcome,
}

/// Append-only record of every retrieval made during one engine run.
#[derive(Debug, Default)]
pub struct FetchLog {
    records: Mutex<Vec<FetchRecord>>,
}

impl FetchLog {
    pub fn record(&self, url: impl Into<String>, kind: FetchKind, outcome: FetchOutcome) {
        self.records.lock().unwrap().push(FetchRecord {
            url: url.into(),
            kind,
            outcome,
        });
    }

    pub fn records(&self) -> Vec<FetchRecord> {
        self.records.lock().unwrap().clone()
    }

    pub fn count(&self, kind: FetchKind, outcome: FetchOutcome) -> usize {
        self.records
            .lock()
            .unwrap()
            .iter()
            .filter(|r| r.kind == kind && r.outcome == outcome)
            .count()
    }

    /// Package retrievals of any outcome.
    pub fn package_fetches(&self) -> usize {
        self.records
            .lock()
            .unwrap()
            .iter()
            .filter(|r| r.kind == FetchKind::Package)
            .count()
    }
}

/// A provider found by [`find_providers`], with the snapshot it came from.
#[derive(Debug, Clone, Copy)]
pub struct Provider<'a> {
    pub entry: &'a IndexEntry,
    pub source: &'a RepositorySource,
}

/// Entries providing `service` within `range`, ordered by unit name
/// ascending, version descending, then snapshot order. A unit listed by
/// several repositories is kept once, from the first snapshot listing it.
pub fn find_providers<'a, I>(service: &str, range: &VersionRange, snapshots: I) -> Vec<Provider<'a>>
where
    I: IntoIterator<Item = &'a IndexSnapshot>,
{
    let mut hits: Vec<(usize, Provider<'a>)> = Vec::new();
    for (order, snap) in snapshots.into_iter().enumerate() {
        for entry in snap
            .entries
            .iter()
            .filter(|e| e.provides_within(service, range))
        {
            if hits.iter().all(|(_, p)| p.entry.id != entry.id) {
                hits.push((
                    order,
                    Provider {
                        entry,
                        source: &snap.source,
                    },
                ));
            }
        }
    }
    hits.sort_by(|(oa, a), (ob, b)| {
        a.entry
            .id
            .name
            .cmp(&b.entry.id.name)
            .then_with(|| b.entry.id.version.cmp(&a.entry.id.version))
            .then_with(|| oa.cmp(ob))
            .then_with(|| a.entry.id.kind.cmp(&b.entry.id.kind))
    });
    hits.into_iter().map(|(_, p)| p).collect()
}

/// Repository access bound to one cache directory and one fetch log.
#[derive(Clone)]
pub struct RepositoryClient {
    cache: MetadataCache,
    transport: Arc<dyn Transport>,
    log: Arc<FetchLog>,
}

impl RepositoryClient {
    pub fn new(cache_dir: impl Into<PathBuf>) -> Self {
        RepositoryClient::with_transport(cache_dir, Arc::new(DefaultTransport::default()))
    }

    pub fn with_transport(cache_dir: impl Into<PathBuf>, transport: Arc<dyn Transport>) -> Self {
        RepositoryClient {
            cache: MetadataCache::new(cache_dir),
            transport,
            log: Arc::new(FetchLog::default()),
        }
    }

    pub fn cache(&self) -> &MetadataCache {
        &self.cache
    }

    pub fn log(&self) -> &Arc<FetchLog> {
        &self.log
    }

    /// Fetches `index.xml`, replacing the cached copy on success. When the
    /// repository cannot be reached, the last cached index is returned with
    /// `stale` set.
    pub fn refresh_index(&self, source: &RepositorySource) -> Result<IndexSnapshot, RepoError> {
        let url = source.join(INDEX_FILE);
        match self.transport.get(source, INDEX_FILE) {
            Ok(bytes) => {
                let entries = parse_repository_index(&bytes).map_err(|e| {
                    self.log.record(&url, FetchKind::Index, FetchOutcome::Error);
                    RepoError::Malformed {
                        url: url.clone(),
                        source: e,
                    }
                })?;
                self.log
                    .record(&url, FetchKind::Index, FetchOutcome::Network);
                let fetched_at =
                    DateTime::from_timestamp(Utc::now().timestamp(), 0).unwrap_or_else(Utc::now);
                let digest = Sha256Digest::of(&bytes);
                let _guard = self.cache.lock_writers()?;
                self.cache.write(&self.cache.meta_path(&digest), &bytes)?;
                self.cache.write_ref(
                    source.as_str(),
                    &cache::IndexRef {
                        digest,
                        fetched_at: fetched_at.to_rfc3339_opts(SecondsFormat::Secs, true),
                    },
                )?;
                Ok(IndexSnapshot {
                    source: source.clone(),
                    entries,
                    fetched_at,
                    stale: false,
                })
            }
            Err(err) => {
                self.log.record(&url, FetchKind::Index, FetchOutcome::Error);
                let unavailable = || RepoError::RepositoryUnavailable {
                    url: source.to_string(),
                    reason: err.to_string(),
                };
                let Some(r) = self.cache.read_ref(source.as_str())? else {
                    return Err(unavailable());
                };
                let Some(bytes) = self
                    .cache
                    .read_verified(&self.cache.meta_path(&r.digest), &r.digest)?
                else {
                    return Err(unavailable());
                };
                let entries = parse_repository_index(&bytes).map_err(|e| RepoError::Malformed {
                    url: url.clone(),
                    source: e,
                })?;
                self.log
                    .record(&url, FetchKind::Index, FetchOutcome::CacheHit);
                let fetched_at = DateTime::parse_from_rfc3339(&r.fetched_at)
                    .map(|t| t.to_utc())
                    .unwrap_or(DateTime::UNIX_EPOCH);
                Ok(IndexSnapshot {
                    source: source.clone(),
                    entries,
                    fetched_at,
                    stale: true,
                })
            }
        }
    }

    /// Returns the descriptor for `entry`, from cache when its hash is known
    /// there, otherwise from the repository.
    pub fn fetch_descriptor(
        &self,
        entry: &IndexEntry,
        source: &RepositorySource,
    ) -> Result<Descriptor, RepoError> {
        let url = source.join(&entry.descriptor_location);
        let path = self.cache.meta_path(&entry.descriptor_sha256);
        let bytes = match self.cache.read_verified(&path, &entry.descriptor_sha256)? {
            Some(bytes) => {
                self.log
                    .record(&url, FetchKind::Descriptor, FetchOutcome::CacheHit);
                bytes
            }
            None => {
                let bytes = self.download(
                    source,
                    &entry.descriptor_location,
                    &entry.descriptor_sha256,
                    FetchKind::Descriptor,
                )?;
                self.cache.write(&path, &bytes)?;
                bytes
            }
        };
        let descriptor = parse_descriptor(&bytes).map_err(|e| RepoError::Malformed {
            url: url.clone(),
            source: e,
        })?;
        if descriptor.id != entry.id {
            return Err(RepoError::Integrity {
                url,
                reason: format!(
                    "descriptor is for {}, index lists {}",
                    descriptor.id, entry.id
                ),
            });
        }
        if descriptor.package_sha256 != entry.package_sha256 {
            return Err(RepoError::Integrity {
                url,
                reason: "descriptor and index disagree on the package hash".into(),
            });
        }
        Ok(descriptor)
    }

    /// Ensures the package for `entry` is in the cache and returns its path.
    ///
    /// A cached file that fails verification is discarded and downloaded
    /// again once; a second mismatch is an integrity error.
    pub fn fetch_package(
        &self,
        entry: &IndexEntry,
        source: &RepositorySource,
    ) -> Result<PathBuf, RepoError> {
        let url = source.join(&entry.package_location);
        let path = self.cache.package_path(&entry.package_sha256);
        if self
            .cache
            .read_verified(&path, &entry.package_sha256)?
            .is_some()
        {
            self.log
                .record(&url, FetchKind::Package, FetchOutcome::CacheHit);
            return Ok(path);
        }
        let bytes = self.download(
            source,
            &entry.package_location,
            &entry.package_sha256,
            FetchKind::Package,
        )?;
        self.cache.write(&path, &bytes)?;
        Ok(path)
    }

    fn download(
        &self,
        source: &RepositorySource,
        relative: &str,
        digest: &Sha256Digest,
        kind: FetchKind,
    ) -> Result<Vec<u8>, RepoError> {
        let url = source.join(relative);
        let bytes = match self.transport.get(source, relative) {
            Ok(b) => b,
            Err(e) => {
                self.log.record(&url, kind, FetchOutcome::Error);
                return Err(match e {
                    TransportError::NotFound => RepoError::NotFound(url),
                    TransportError::Unavailable(reason) => RepoError::RepositoryUnavailable {
                        url: source.to_string(),
                        reason,
                    },
                });
            }
        };
        if !digest.matches(&bytes) {
            self.log.record(&url, kind, FetchOutcome::Error);
            return Err(RepoError::Integrity {
                url,
                reason: format!("expected sha256 {digest}, got {}", Sha256Digest::of(&bytes)),
            });
        }
        self.log.record(&url, kind, FetchOutcome::Network);
        Ok(bytes)
    }
}
