use std::fs::{self, File, OpenOptions};
use std::io;
use std::path::{Path, PathBuf};

use crate::hash::Sha256Digest;
use crate::state::write_atomic;

/// Content-addressed store: `meta/<sha256>` for descriptors and indexes,
/// `pkgs/<sha256>` for packages, `refs/<sha256 of base url>` pointing at the
/// latest index of each repository.
#[derive(Debug, Clone)]
pub struct MetadataCache {
    dir: PathBuf,
}

pub(super) struct IndexRef {
    pub digest: Sha256Digest,
    pub fetched_at: String,
}

impl MetadataCache {
    pub fn new(dir: impl Into<PathBuf>) -> Self {
        MetadataCache { dir: dir.into() }
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn meta_path(&self, digest: &Sha256Digest) -> PathBuf {
        self.dir.join("meta").join(digest.as_str())
    }

    pub fn package_path(&self, digest: &Sha256Digest) -> PathBuf {
        self.dir.join("pkgs").join(digest.as_str())
    }

    /// Path of the cached package with this digest, if present and intact.
    pub fn verified_package(&self, digest: &Sha256Digest) -> io::Result<Option<PathBuf>> {
        let path = self.package_path(digest);
        Ok(self.read_verified(&path, digest)?.map(|_| path))
    }

    /// Copies `file` into the package cache unless an intact copy exists.
    /// Fails with `InvalidData` when the file does not match `digest`.
    pub fn retain_package(&self, digest: &Sha256Digest, file: &Path) -> io::Result<PathBuf> {
        if let Some(path) = self.verified_package(digest)? {
            return Ok(path);
        }
        let bytes = fs::read(file)?;
        if !digest.matches(&bytes) {
            return Err(io::Error::new(
                io::ErrorKind::InvalidData,
                format!("{} does not match {digest}", file.display()),
            ));
        }
        let path = self.package_path(digest);
        write_atomic(&path, &bytes)?;
        Ok(path)
    }

    fn ref_path(&self, base_url: &str) -> PathBuf {
        self.dir
            .join("refs")
            .join(Sha256Digest::of(base_url.as_bytes()).as_str())
    }

    /// Reads a cached blob, returning `None` when it is absent. A blob that
    /// no longer matches its digest is deleted and reported as absent.
    pub(super) fn read_verified(
        &self,
        path: &Path,
        digest: &Sha256Digest,
    ) -> io::Result<Option<Vec<u8>>> {
        match fs::read(path) {
            Ok(bytes) if digest.matches(&bytes) => Ok(Some(bytes)),
            Ok(_) => {
                fs::remove_file(path)?;
                Ok(None)
            }
            Err(e) if e.kind() == io::ErrorKind::NotFound => Ok(None),
            Err(e) => Err(e),
        }
    }

    pub(super) fn write(&self, path: &Path, bytes: &[u8]) -> io::Result<()> {
        write_atomic(path, bytes)
    }

    pub(super) fn read_ref(&self, base_url: &str) -> io::Result<Option<IndexRef>> {
        let text = match fs::read_to_string(self.ref_path(base_url)) {
            Ok(t) => t,
            Err(e) if e.kind() == io::ErrorKind::NotFound => return Ok(None),
            Err(e) => return Err(e),
        };
        let parsed = text
            .trim_end_matches('\n')
            .split_once('\t')
            .and_then(|(d, t)| {
                Some(IndexRef {
                    digest: d.parse().ok()?,
                    fetched_at: t.to_string(),
                })
            });
        Ok(parsed)
    }

    pub(super) fn write_ref(&self, base_url: &str, r: &IndexRef) -> io::Result<()> {
        write_atomic(
            &self.ref_path(base_url),
            format!("{}\t{}\n", r.digest, r.fetched_at).as_bytes(),
        )
    }

    /// Exclusive advisory lock serializing index writers on this cache.
    pub(super) fn lock_writers(&self) -> io::Result<File> {
        fs::create_dir_all(&self.dir)?;
        let file = OpenOptions::new()
            .create(true)
            .truncate(false)
            .write(true)
            .open(self.dir.join(".lock"))?;
        file.lock()?;
        Ok(file)
    }
}
