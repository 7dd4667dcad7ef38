//! Persistent platform status: which units are installed, at which versions,
//! together with the descriptor each was installed from.
//!
//! The file is a sequence of stanzas. An optional leading `Format:` stanza
//! carries the format version; every other stanza is one install record with
//! keys in the fixed order `Name, Version, Kind, Provider, Provides,
//! Package-SHA256, Installed-At, Descriptor`. Records are written sorted by
//! unit id so equal statuses serialize to identical bytes.

pub mod stanza;

use std::collections::{BTreeSet, HashSet};
use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use base64::Engine as _;
use chrono::{DateTime, SecondsFormat, Utc};

use crate::codec::{parse_descriptor, serialize_descriptor};
use crate::hash::Sha256Digest;
use crate::model::{Descriptor, ServiceRef, UnitId, UnitKind, Version, VersionRange};

pub const STATUS_FORMAT_VERSION: u32 = 1;
pub const STATUS_FILE: &str = "status";

const RECORD_KEYS: [&str; 8] = [
    "Name",
    "Version",
    "Kind",
    "Provider",
    "Provides",
    "Package-SHA256",
    "Installed-At",
    "Descriptor",
];

#[derive(Debug, thiserror::Error)]
pub enum StateError {
    #[error("corrupt status (stanza {stanza}): {reason}")]
    CorruptState { stanza: usize, reason: String },
    #[error("{0} is already installed or its slot is taken")]
    DuplicateInstall(UnitId),
    #[error("{0} is not installed")]
    NotInstalled(UnitId),
    #[error("status file I/O: {0}")]
    Io(#[from] io::Error),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct InstallRecord {
    pub id: UnitId,
    pub provides: Vec<ServiceRef>,
    pub package_sha256: Sha256Digest,
    pub descriptor: Descriptor,
    pub installed_at: DateTime<Utc>,
}

impl InstallRecord {
    /// Record for `descriptor` stamped with `installed_at` truncated to seconds.
    pub fn new(descriptor: Descriptor, installed_at: DateTime<Utc>) -> Self {
        let installed_at =
            DateTime::from_timestamp(installed_at.timestamp(), 0).unwrap_or(installed_at);
        InstallRecord {
            id: descriptor.id.clone(),
            provides: descriptor.provides.clone(),
            package_sha256: descriptor.package_sha256.clone(),
            descriptor,
            installed_at,
        }
    }

    pub fn provides_within(&self, service: &str, range: &VersionRange) -> bool {
        self.provides
            .iter()
            .any(|s| s.name == service && range.contains(&s.version))
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PlatformStatus {
    records: Vec<InstallRecord>,
    pub format_version: u32,
}

impl Default for PlatformStatus {
    fn default() -> Self {
        PlatformStatus {
            records: Vec::new(),
            format_version: STATUS_FORMAT_VERSION,
        }
    }
}

pub enum StatusChange {
    Install(InstallRecord),
    Remove(UnitId),
}

impl PlatformStatus {
    /// Builds a status from records; fails if two records share a unit id.
    pub fn from_records(mut records: Vec<InstallRecord>) -> Result<Self, StateError> {
        records.sort_by(|a, b| a.id.cmp(&b.id));
        if let Some(w) = records.windows(2).find(|w| w[0].id == w[1].id) {
            return Err(StateError::DuplicateInstall(w[0].id.clone()));
        }
        Ok(PlatformStatus {
            records,
            format_version: STATUS_FORMAT_VERSION,
        })
    }

    /// Records in canonical (unit id) order.
    pub fn records(&self) -> &[InstallRecord] {
        &self.records
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn get(&self, id: &UnitId) -> Option<&InstallRecord> {
        self.records
            .binary_search_by(|r| r.id.cmp(id))
            .ok()
            .map(|i| &self.records[i])
    }

    pub fn contains(&self, id: &UnitId) -> bool {
        self.get(id).is_some()
    }
}

/// Installed records providing `service` within `range`, newest first.
pub fn query_installed<'a>(
    status: &'a PlatformStatus,
    service: &str,
    range: &VersionRange,
) -> Vec<&'a InstallRecord> {
    let mut hits: Vec<(&Version, &InstallRecord)> = status
        .records
        .iter()
        .filter_map(|r| {
            r.provides
                .iter()
                .filter(|s| s.name == service && range.contains(&s.version))
                .map(|s| &s.version)
                .max()
                .map(|v| (v, r))
        })
        .collect();
    hits.sort_by(|(va, ra), (vb, rb)| {
        vb.cmp(va)
            .then_with(|| rb.id.version.cmp(&ra.id.version))
            .then_with(|| ra.id.cmp(&rb.id))
    });
    hits.into_iter().map(|(_, r)| r).collect()
}

/// Returns `status` with `change` applied. The input is left untouched.
///
/// Installing fails when the unit id is already present, or when another
/// version occupies the same name and kind and `multi_version_kinds` does
/// not include that kind.
pub fn apply_change(
    status: &PlatformStatus,
    change: StatusChange,
    multi_version_kinds: &BTreeSet<UnitKind>,
) -> Result<PlatformStatus, StateError> {
    let mut next = status.clone();
    match change {
        StatusChange::Install(record) => {
            let clash = next.records.iter().any(|r| {
                r.id == record.id
                    || (r.id.same_slot(&record.id)
                        && !multi_version_kinds.contains(&record.id.kind))
            });
            if clash {
                return Err(StateError::DuplicateInstall(record.id));
            }
            let at = next
                .records
                .binary_search_by(|r| r.id.cmp(&record.id))
                .unwrap_err();
            next.records.insert(at, record);
        }
        StatusChange::Remove(id) => {
            let at = next
                .records
                .binary_search_by(|r| r.id.cmp(&id))
                .map_err(|_| StateError::NotInstalled(id))?;
            next.records.remove(at);
        }
    }
    Ok(next)
}

pub fn serialize_status(status: &PlatformStatus) -> String {
    let mut out = String::new();
    stanza::write(&mut out, &[("Format", &status.format_version.to_string())]);
    for r in &status.records {
        out.push('\n');
        let provides = r
            .provides
            .iter()
            .map(ToString::to_string)
            .collect::<Vec<_>>()
            .join(", ");
        let descriptor =
            base64::engine::general_purpose::STANDARD.encode(serialize_descriptor(&r.descriptor));
        let version = r.id.version.to_string();
        let installed_at = r.installed_at.to_rfc3339_opts(SecondsFormat::Secs, true);
        let values = [
            r.id.name.as_str(),
            version.as_str(),
            r.id.kind.as_str(),
            r.descriptor.provider.as_str(),
            provides.as_str(),
            r.package_sha256.as_str(),
            installed_at.as_str(),
            descriptor.as_str(),
        ];
        let fields: Vec<(&str, &str)> = RECORD_KEYS.iter().copied().zip(values).collect();
        stanza::write(&mut out, &fields);
    }
    out
}

/// Parses a status document (file contents or an inline payload).
///
/// Stanza numbers in errors count install records from 1 and skip the
/// optional `Format:` header.
pub fn parse_status(text: &str) -> Result<PlatformStatus, StateError> {
    let offset = usize::from(text.starts_with("Format:"));
    let stanzas = stanza::parse(text).map_err(|e| StateError::CorruptState {
        stanza: e.ordinal.saturating_sub(offset),
        reason: e.reason,
    })?;
    let mut format_version = STATUS_FORMAT_VERSION;
    let mut records = Vec::new();
    let mut seen = HashSet::new();
    for st in &stanzas {
        if st.ordinal == 1 && offset == 1 {
            let corrupt = |reason: String| StateError::CorruptState { stanza: 0, reason };
            if st.fields.len() != 1 {
                return Err(corrupt("header stanza must hold only `Format`".into()));
            }
            format_version = st
                .get("Format")
                .unwrap_or_default()
                .parse()
                .map_err(|_| corrupt("bad Format value".into()))?;
            if format_version != STATUS_FORMAT_VERSION {
                return Err(corrupt(format!(
                    "unsupported status format {format_version}"
                )));
            }
            continue;
        }
        let ordinal = st.ordinal - offset;
        let record = parse_record(st).map_err(|reason| StateError::CorruptState {
            stanza: ordinal,
            reason,
        })?;
        if !seen.insert(record.id.clone()) {
            return Err(StateError::CorruptState {
                stanza: ordinal,
                reason: format!("{} recorded twice", record.id),
            });
        }
        records.push(record);
    }
    let mut status = PlatformStatus::from_records(records)?;
    status.format_version = format_version;
    Ok(status)
}

fn parse_record(st: &stanza::Stanza) -> Result<InstallRecord, String> {
    if let Some((k, _)) = st
        .fields
        .iter()
        .find(|(k, _)| !RECORD_KEYS.contains(&k.as_str()))
    {
        return Err(format!("unknown field {k}"));
    }
    let field = |key: &str| st.get(key).ok_or_else(|| format!("missing {key} field"));
    let name = field("Name")?;
    let version = field("Version")?.parse().map_err(|e| format!("{e}"))?;
    let kind = field("Kind")?.parse().map_err(|e| format!("{e}"))?;
    let id = UnitId::new(name, version, kind).map_err(|e| e.to_string())?;
    let provider = field("Provider")?;
    let provides = field("Provides")?;
    let provides: Vec<ServiceRef> = if provides.is_empty() {
        Vec::new()
    } else {
        provides
            .split(", ")
            .map(|item| {
                let (n, v) = item
                    .split_once('@')
                    .ok_or_else(|| format!("bad Provides item {item:?}"))?;
                ServiceRef::new(n, v.parse().map_err(|e| format!("{e}"))?)
                    .map_err(|e| e.to_string())
            })
            .collect::<Result<_, _>>()?
    };
    let package_sha256: Sha256Digest = field("Package-SHA256")?
        .parse()
        .map_err(|e| format!("{e}"))?;
    let at_text = field("Installed-At")?;
    let installed_at = DateTime::parse_from_rfc3339(at_text)
        .map_err(|e| format!("bad Installed-At: {e}"))?
        .to_utc();
    if installed_at.to_rfc3339_opts(SecondsFormat::Secs, true) != at_text {
        return Err(format!("non-canonical Installed-At {at_text:?}"));
    }
    let bytes = base64::engine::general_purpose::STANDARD
        .decode(field("Descriptor")?)
        .map_err(|e| format!("bad Descriptor encoding: {e}"))?;
    let descriptor = parse_descriptor(&bytes).map_err(|e| format!("embedded descriptor: {e}"))?;
    if descriptor.id != id
        || descriptor.provider != provider
        || descriptor.provides != provides
        || descriptor.package_sha256 != package_sha256
    {
        return Err("fields disagree with embedded descriptor".into());
    }
    Ok(InstallRecord {
        id,
        provides,
        package_sha256,
        descriptor,
        installed_at,
    })
}

/// Status file under a platform root.
#[derive(Debug, Clone)]
pub struct StateStore {
    path: PathBuf,
}

impl StateStore {
    pub fn new(path: impl Into<PathBuf>) -> Self {
        StateStore { path: path.into() }
    }

    pub fn in_root(platform_root: &Path) -> Self {
        StateStore::new(platform_root.join(STATUS_FILE))
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    pub fn load(&self) -> Result<PlatformStatus, StateError> {
        load_status(&self.path)
    }

    /// Atomically replaces the file. An empty status is stored as no file,
    /// which loads back as the empty status.
    pub fn save(&self, status: &PlatformStatus) -> Result<(), StateError> {
        if status.is_empty() {
            return match fs::remove_file(&self.path) {
                Err(e) if e.kind() != io::ErrorKind::NotFound => Err(e.into()),
                _ => Ok(()),
            };
        }
        write_atomic(&self.path, serialize_status(status).as_bytes())?;
        Ok(())
    }
}

/// Missing file loads as the empty status.
pub fn load_status(path: &Path) -> Result<PlatformStatus, StateError> {
    match fs::read(path) {
        Ok(bytes) => {
            let text = String::from_utf8(bytes).map_err(|_| StateError::CorruptState {
                stanza: 0,
                reason: "status file is not UTF-8".into(),
            })?;
            parse_status(&text)
        }
        Err(e) if e.kind() == io::ErrorKind::NotFound => Ok(PlatformStatus::default()),
        Err(e) => Err(e.into()),
    }
}

/// Write-temp-fsync-rename within the target's directory.
pub(crate) fn write_atomic(path: &Path, bytes: &[u8]) -> io::Result<()> {
    let dir = path
        .parent()
        .filter(|p| !p.as_os_str().is_empty())
        .unwrap_or(Path::new("."));
    fs::create_dir_all(dir)?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(bytes)?;
    tmp.as_file().sync_all()?;
    tmp.persist(path).map_err(|e| e.error)?;
    Ok(())
}
