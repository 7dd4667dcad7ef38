//! Engine configuration and the platform profile file.

use std::collections::BTreeSet;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use resolvit_core::executor::Executor;
use resolvit_core::model::{PlatformProfile, UnitKind};
use resolvit_core::repository::{RepoError, RepositoryClient, RepositorySource};
use resolvit_core::resolver::{ConflictPolicy, DEFAULT_POLICY};
use resolvit_core::state::stanza;

/// Name of the optional profile file under the platform root.
pub const PROFILE_FILE: &str = "profile";

#[derive(Debug, Clone)]
pub struct EngineConfig {
    pub repositories: Vec<RepositorySource>,
    pub platform_root: PathBuf,
    pub cache_dir: PathBuf,
    pub default_policy: String,
    pub default_conflict_policy: ConflictPolicy,
}

impl EngineConfig {
    pub fn new(platform_root: impl Into<PathBuf>, cache_dir: impl Into<PathBuf>) -> Self {
        EngineConfig {
            repositories: Vec::new(),
            platform_root: platform_root.into(),
            cache_dir: cache_dir.into(),
            default_policy: DEFAULT_POLICY.to_string(),
            default_conflict_policy: ConflictPolicy::Abort,
        }
    }

    pub fn client(&self) -> RepositoryClient {
        RepositoryClient::new(&self.cache_dir)
    }

    pub fn executor(&self, profile: &PlatformProfile) -> Executor {
        Executor::new(&self.platform_root, self.client().cache().clone())
            .with_multi_version_kinds(profile.multi_version_kinds.clone())
    }

    /// Profile from `<root>/profile` if present, else the host's.
    pub fn profile(&self) -> Result<PlatformProfile, String> {
        let path = self.platform_root.join(PROFILE_FILE);
        match fs::read_to_string(&path) {
            Ok(text) => {
                let stanzas = stanza::parse(&text)
                    .map_err(|e| format!("{}: {}", path.display(), e.reason))?;
                match stanzas.as_slice() {
                    [one] => profile_from_fields(&one.fields)
                        .map_err(|e| format!("{}: {e}", path.display())),
                    _ => Err(format!("{}: expected exactly one stanza", path.display())),
                }
            }
            Err(e) if e.kind() == io::ErrorKind::NotFound => Ok(PlatformProfile::host()),
            Err(e) => Err(format!("{}: {e}", path.display())),
        }
    }
}

/// `http://` and `file://` URLs are taken as they are; anything else is a
/// local directory.
pub fn parse_repository(text: &str) -> Result<RepositorySource, RepoError> {
    if text.contains("://") {
        RepositorySource::new(text, "configured")
    } else {
        RepositorySource::from_directory(Path::new(text), "configured")
    }
}

pub fn default_cache_dir() -> PathBuf {
    if let Some(dir) = std::env::var_os("XDG_CACHE_HOME") {
        return PathBuf::from(dir).join("resolvit");
    }
    match std::env::var_os("HOME") {
        Some(home) => PathBuf::from(home).join(".cache").join("resolvit"),
        None => std::env::temp_dir().join("resolvit-cache"),
    }
}

pub const PROFILE_KEYS: [&str; 4] = ["Architecture", "Os", "Disk-KiB", "Multi-Version"];

pub fn profile_fields(p: &PlatformProfile) -> Vec<(&'static str, String)> {
    let multi: Vec<&str> = p.multi_version_kinds.iter().map(|k| k.as_str()).collect();
    vec![
        ("Architecture", p.architecture.clone()),
        ("Os", p.os.clone()),
        ("Disk-KiB", p.disk_available_kib.to_string()),
        ("Multi-Version", multi.join(", ")),
    ]
}

/// Reads the profile keys out of `fields`, ignoring any others.
/// `Multi-Version` is optional and defaults to bundles only.
pub fn profile_from_fields(fields: &[(String, String)]) -> Result<PlatformProfile, String> {
    let get = |key: &str| {
        fields
            .iter()
            .find(|(k, _)| k == key)
            .map(|(_, v)| v.as_str())
    };
    let need = |key: &str| get(key).ok_or_else(|| format!("missing {key}"));
    let disk = need("Disk-KiB")?
        .parse()
        .map_err(|_| format!("bad Disk-KiB {:?}", get("Disk-KiB").unwrap_or_default()))?;
    let mut profile = PlatformProfile::new(need("Architecture")?, need("Os")?, disk);
    if let Some(list) = get("Multi-Version") {
        profile.multi_version_kinds = list
            .split(',')
            .map(str::trim)
            .filter(|s| !s.is_empty())
            .map(|s| s.parse::<UnitKind>().map_err(|e| e.to_string()))
            .collect::<Result<BTreeSet<_>, _>>()?;
    }
    Ok(profile)
}
