//! Key document sources and a TTL cache in front of them.

use std::collections::{BTreeSet, HashMap};
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicBool, AtomicUsize, Ordering};
use std::sync::Arc;

use chrono::{DateTime, TimeDelta, Utc};
use parking_lot::RwLock;
use thiserror::Error;

use super::{parse_key_document, AttestationError, KeyDocument};
use crate::trust_root::TrustRoot;

pub const DEFAULT_CACHE_TTL_SECS: i64 = 300;

/// File name suffix for key documents stored in a directory.
pub const KEY_FILE_SUFFIX: &str = ".agent-keys.json";

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SourceError {
    #[error("no key document published for `{0}`")]
    NotFound(String),
    #[error("key source unavailable: {0}")]
    Unavailable(String),
    #[error(transparent)]
    Document(#[from] AttestationError),
}

/// Somewhere key documents can be fetched from.
pub trait KeySource: Send + Sync {
    fn fetch(&self, trust_root: &TrustRoot) -> Result<KeyDocument, SourceError>;
}

/// Reads `<trust-root>.agent-keys.json` files from a directory.
#[derive(Debug, Clone)]
pub struct DirectoryKeySource {
    dir: PathBuf,
}

impl DirectoryKeySource {
    pub fn new(dir: impl Into<PathBuf>) -> Self {
        DirectoryKeySource { dir: dir.into() }
    }

    pub fn path_for(&self, trust_root: &TrustRoot) -> PathBuf {
        document_path(&self.dir, trust_root)
    }

    /// Trust roots with a document in the directory, in sorted order.
    pub fn trust_roots(&self) -> std::io::Result<BTreeSet<TrustRoot>> {
        let mut roots = BTreeSet::new();
        for entry in fs::read_dir(&self.dir)? {
            let name = entry?.file_name();
            let Some(name) = name.to_str() else { continue };
            if let Some(root) = name.strip_suffix(KEY_FILE_SUFFIX).and_then(|r| TrustRoot::parse(r).ok()) {
                roots.insert(root);
            }
        }
        Ok(roots)
    }
}

pub fn document_path(dir: &Path, trust_root: &TrustRoot) -> PathBuf {
    dir.join(format!("{trust_root}{KEY_FILE_SUFFIX}"))
}

impl KeySource for DirectoryKeySource {
    fn fetch(&self, trust_root: &TrustRoot) -> Result<KeyDocument, SourceError> {
        let path = self.path_for(trust_root);
        let text = match fs::read_to_string(&path) {
            Ok(t) => t,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Err(SourceError::NotFound(trust_root.to_string())),
            Err(e) => return Err(SourceError::Unavailable(format!("{}: {e}", path.display()))),
        };
        let doc = parse_key_document(&text)?;
        if doc.trust_root() != trust_root {
            return Err(AttestationError::MalformedDocument(format!(
                "{} publishes keys for `{}`",
                path.display(),
                doc.trust_root()
            ))
            .into());
        }
        Ok(doc)
    }
}

/// In-memory documents with a switch to simulate an outage. Counts fetches
/// so callers can observe cache hits.
#[derive(Debug, Default)]
pub struct MemoryKeySource {
    docs: RwLock<HashMap<TrustRoot, KeyDocument>>,
    down: AtomicBool,
    fetches: AtomicUsize,
}

impl MemoryKeySource {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn publish(&self, doc: KeyDocument) {
        self.docs.write().insert(doc.trust_root().clone(), doc);
    }

    pub fn set_available(&self, available: bool) {
        self.down.store(!available, Ordering::SeqCst);
    }

    pub fn fetch_count(&self) -> usize {
        self.fetches.load(Ordering::SeqCst)
    }
}

impl KeySource for MemoryKeySource {
    fn fetch(&self, trust_root: &TrustRoot) -> Result<KeyDocument, SourceError> {
        self.fetches.fetch_add(1, Ordering::SeqCst);
        if self.down.load(Ordering::SeqCst) {
            return Err(SourceError::Unavailable(format!("{trust_root} is down")));
        }
        self.docs
            .read()
            .get(trust_root)
            .cloned()
            .ok_or_else(|| SourceError::NotFound(trust_root.to_string()))
    }
}

impl<T: KeySource + ?Sized> KeySource for Arc<T> {
    fn fetch(&self, trust_root: &TrustRoot) -> Result<KeyDocument, SourceError> {
        (**self).fetch(trust_root)
    }
}

#[derive(Debug)]
struct Entry {
    doc: Arc<KeyDocument>,
    fetched_at: DateTime<Utc>,
}

/// Result of a cache read.
#[derive(Debug, Clone)]
pub struct KeyFetch {
    pub doc: Arc<KeyDocument>,
    /// Served from a fresh cache entry without touching the source.
    pub from_cache: bool,
}

/// TTL cache of key documents, restricted to an explicit set of trusted
/// roots when one is configured.
///
/// Entries are replaced whole under a write lock, so readers never observe
/// a partially updated document.
#[derive(Debug)]
pub struct KeyCache<S> {
    source: S,
    ttl: TimeDelta,
    trusted: Option<BTreeSet<TrustRoot>>,
    entries: RwLock<HashMap<TrustRoot, Arc<Entry>>>,
}

impl<S: KeySource> KeyCache<S> {
    pub fn new(source: S) -> Self {
        KeyCache { source, ttl: TimeDelta::seconds(DEFAULT_CACHE_TTL_SECS), trusted: None, entries: RwLock::new(HashMap::new()) }
    }

    pub fn with_ttl(mut self, ttl: TimeDelta) -> Self {
        self.ttl = ttl;
        self
    }

    /// Only these roots will be fetched; any other yields `UntrustedRoot`.
    pub fn with_trusted_roots(mut self, roots: impl IntoIterator<Item = TrustRoot>) -> Self {
        self.trusted = Some(roots.into_iter().collect());
        self
    }

    pub fn source(&self) -> &S {
        &self.source
    }

    fn check_trusted(&self, root: &TrustRoot) -> Result<(), AttestationError> {
        match &self.trusted {
            Some(set) if !set.contains(root) => Err(AttestationError::UntrustedRoot { root: root.to_string() }),
            _ => Ok(()),
        }
    }

    /// Returns the cached document while it is younger than the TTL,
    /// otherwise fetches from the source.
    pub fn get(&self, root: &TrustRoot, now: DateTime<Utc>) -> Result<KeyFetch, AttestationError> {
        self.check_trusted(root)?;
        if let Some(entry) = self.entries.read().get(root) {
            if now < entry.fetched_at + self.ttl {
                return Ok(KeyFetch { doc: entry.doc.clone(), from_cache: true });
            }
        }
        self.refresh(root, now).map(|doc| KeyFetch { doc, from_cache: false })
    }

    /// Fetches unconditionally. On failure the previous entry is kept.
    pub fn refresh(&self, root: &TrustRoot, now: DateTime<Utc>) -> Result<Arc<KeyDocument>, AttestationError> {
        self.check_trusted(root)?;
        match self.source.fetch(root) {
            Ok(doc) => {
                let doc = Arc::new(doc);
                self.entries.write().insert(root.clone(), Arc::new(Entry { doc: doc.clone(), fetched_at: now }));
                Ok(doc)
            }
            Err(SourceError::Document(e)) => Err(e),
            Err(_) => Err(AttestationError::TrustRootUnavailable {
                root: root.to_string(),
                stale_cache: self.entries.read().contains_key(root),
            }),
        }
    }

    pub fn invalidate(&self, root: &TrustRoot) {
        self.entries.write().remove(root);
    }
}
