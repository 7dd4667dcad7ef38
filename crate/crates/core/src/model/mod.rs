//! Value types shared by every stage of the engine: versions, ranges, unit
//! identities, descriptors and the platform profile.

mod range;
mod version;

use std::collections::{BTreeSet, HashSet};
use std::fmt;
use std::str::FromStr;

pub use range::{range_contains, Bound, VersionRange};
pub use version::{compare_versions, Version};

use crate::hash::Sha256Digest;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ModelError {
    #[error("malformed version `{0}`")]
    MalformedVersion(String),
    #[error("malformed version range `{0}`")]
    MalformedRange(String),
    #[error("invalid {what}: `{value}`")]
    InvalidField { what: &'static str, value: String },
}

impl ModelError {
    pub(crate) fn invalid(what: &'static str, value: impl fmt::Display) -> Self {
        ModelError::InvalidField {
            what,
            value: value.to_string(),
        }
    }
}

/// Identifier token: ASCII letters, digits, `.`, `_` and `-`.
pub fn is_token(s: &str) -> bool {
    !s.is_empty()
        && s.bytes()
            .all(|b| b.is_ascii_alphanumeric() || matches!(b, b'.' | b'_' | b'-'))
}

/// Relative `/`-separated path that stays inside its base directory.
pub fn is_relative_location(s: &str) -> bool {
    !s.is_empty()
        && !s.starts_with('/')
        && !s.contains('\\')
        && s.split('/').all(|seg| {
            !seg.is_empty() && seg != "." && seg != ".." && !seg.contains(char::is_control)
        })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum UnitKind {
    Bundle,
    Native,
    Driver,
}

impl UnitKind {
    pub const ALL: [UnitKind; 3] = [UnitKind::Bundle, UnitKind::Native, UnitKind::Driver];

    pub fn as_str(self) -> &'static str {
        match self {
            UnitKind::Bundle => "bundle",
            UnitKind::Native => "native",
            UnitKind::Driver => "driver",
        }
    }
}

impl fmt::Display for UnitKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for UnitKind {
    type Err = ModelError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "bundle" => Ok(UnitKind::Bundle),
            "native" => Ok(UnitKind::Native),
            "driver" => Ok(UnitKind::Driver),
            other => Err(ModelError::invalid("unit kind", other)),
        }
    }
}

/// Identity of a deployment unit. Ordered by name, then version, then kind.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct UnitId {
    pub name: String,
    pub version: Version,
    pub kind: UnitKind,
}

impl UnitId {
    pub fn new(
        name: impl Into<String>,
        version: Version,
        kind: UnitKind,
    ) -> Result<Self, ModelError> {
        let name = name.into();
        if !is_token(&name) {
            return Err(ModelError::invalid("unit name", name));
        }
        Ok(UnitId {
            name,
            version,
            kind,
        })
    }

    /// `true` when both ids name the same unit slot (name and kind).
    pub fn same_slot(&self, other: &UnitId) -> bool {
        self.name == other.name && self.kind == other.kind
    }
}

impl fmt::Display for UnitId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}@{}:{}", self.name, self.version, self.kind)
    }
}

impl FromStr for UnitId {
    type Err = ModelError;

    /// Parses `name@version:kind`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let (name, rest) = s
            .split_once('@')
            .ok_or_else(|| ModelError::invalid("unit id", s))?;
        let (version, kind) = rest
            .rsplit_once(':')
            .ok_or_else(|| ModelError::invalid("unit id", s))?;
        UnitId::new(name, version.parse()?, kind.parse()?)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ServiceRef {
    pub name: String,
    pub version: Version,
}

impl ServiceRef {
    pub fn new(name: impl Into<String>, version: Version) -> Result<Self, ModelError> {
        let name = name.into();
        if !is_token(&name) {
            return Err(ModelError::invalid("service name", name));
        }
        Ok(ServiceRef { name, version })
    }
}

impl fmt::Display for ServiceRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}@{}", self.name, self.version)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct DependencyEndpoint {
    pub service: String,
    pub range: VersionRange,
    pub repository: Option<url::Url>,
}

impl DependencyEndpoint {
    pub fn new(service: impl Into<String>, range: VersionRange) -> Result<Self, ModelError> {
        let service = service.into();
        if !is_token(&service) {
            return Err(ModelError::invalid("service name", service));
        }
        Ok(DependencyEndpoint {
            service,
            range,
            repository: None,
        })
    }

    /// `true` when a unit providing `provides` satisfies this endpoint.
    pub fn matched_by(&self, provides: &[ServiceRef]) -> bool {
        provides
            .iter()
            .any(|s| s.name == self.service && self.range.contains(&s.version))
    }
}

impl fmt::Display for DependencyEndpoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} {}", self.service, self.range)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum GroupOp {
    And,
    Or,
    Xor,
    Not,
}

impl GroupOp {
    pub fn as_str(self) -> &'static str {
        match self {
            GroupOp::And => "AND",
            GroupOp::Or => "OR",
            GroupOp::Xor => "XOR",
            GroupOp::Not => "NOT",
        }
    }
}

impl fmt::Display for GroupOp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for GroupOp {
    type Err = ModelError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "AND" => Ok(GroupOp::And),
            "OR" => Ok(GroupOp::Or),
            "XOR" => Ok(GroupOp::Xor),
            "NOT" => Ok(GroupOp::Not),
            other => Err(ModelError::invalid("dependency type", other)),
        }
    }
}

/// One Boolean relation from the declaring unit to a list of endpoints.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct DependencyGroup {
    pub op: GroupOp,
    /// Minimum number of satisfied endpoints for `OR`; always 1 otherwise.
    pub cardinality: u32,
    pub endpoints: Vec<DependencyEndpoint>,
}

impl DependencyGroup {
    pub fn new(
        op: GroupOp,
        cardinality: u32,
        endpoints: Vec<DependencyEndpoint>,
    ) -> Result<Self, ModelError> {
        let group = DependencyGroup {
            op,
            cardinality,
            endpoints,
        };
        group.validate()?;
        Ok(group)
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        if self.endpoints.is_empty() {
            return Err(ModelError::invalid("dependency group", "no endpoints"));
        }
        let ok = match self.op {
            GroupOp::Or => {
                self.cardinality >= 1 && self.cardinality as usize <= self.endpoints.len()
            }
            _ => self.cardinality == 1,
        };
        if !ok {
            return Err(ModelError::invalid("cardinality", self.cardinality));
        }
        Ok(())
    }

    /// Evaluates the group predicate given which endpoints are satisfied.
    pub fn holds(&self, satisfied: impl IntoIterator<Item = bool>) -> bool {
        let count = satisfied.into_iter().filter(|s| *s).count();
        match self.op {
            GroupOp::And => count == self.endpoints.len(),
            GroupOp::Or => count >= self.cardinality as usize,
            GroupOp::Xor => count == 1,
            GroupOp::Not => count == 0,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Hash)]
pub struct ResourceRequirements {
    pub disk_space_kib: u64,
    pub architecture: Option<String>,
    pub os: Option<String>,
}

pub const DEFAULT_PRIORITY: u8 = 50;

/// A deployment unit's published metadata.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Descriptor {
    pub id: UnitId,
    pub provider: String,
    pub priority: u8,
    pub provides: Vec<ServiceRef>,
    pub groups: Vec<DependencyGroup>,
    pub requirements: ResourceRequirements,
    pub package_sha256: Sha256Digest,
    pub package_location: String,
}

impl Descriptor {
    pub fn validate(&self) -> Result<(), ModelError> {
        if !is_token(&self.id.name) {
            return Err(ModelError::invalid("unit name", &self.id.name));
        }
        if !is_token(&self.provider) {
            return Err(ModelError::invalid("provider", &self.provider));
        }
        if self.priority > 100 {
            return Err(ModelError::invalid("priority", self.priority));
        }
        let mut seen = HashSet::new();
        for s in &self.provides {
            if !is_token(&s.name) {
                return Err(ModelError::invalid("service name", &s.name));
            }
            if !seen.insert((&s.name, &s.version)) {
                return Err(ModelError::invalid("duplicate provided service", s));
            }
        }
        for g in &self.groups {
            g.validate()?;
            for e in &g.endpoints {
                if !is_token(&e.service) {
                    return Err(ModelError::invalid("service name", &e.service));
                }
            }
        }
        for (what, token) in [
            ("architecture", &self.requirements.architecture),
            ("os", &self.requirements.os),
        ] {
            if let Some(t) = token {
                if !is_token(t) {
                    return Err(ModelError::invalid(what, t));
                }
            }
        }
        if !is_relative_location(&self.package_location) {
            return Err(ModelError::invalid(
                "package location",
                &self.package_location,
            ));
        }
        Ok(())
    }

    pub fn provides_within(&self, service: &str, range: &VersionRange) -> bool {
        self.provides
            .iter()
            .any(|s| s.name == service && range.contains(&s.version))
    }
}

/// Facts about the target platform used for context filtering.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PlatformProfile {
    pub architecture: String,
    pub os: String,
    pub disk_available_kib: u64,
    /// Kinds whose layer allows several versions of one unit side by side.
    pub multi_version_kinds: BTreeSet<UnitKind>,
}

impl PlatformProfile {
    pub fn new(
        architecture: impl Into<String>,
        os: impl Into<String>,
        disk_available_kib: u64,
    ) -> Self {
        PlatformProfile {
            architecture: architecture.into(),
            os: os.into(),
            disk_available_kib,
            multi_version_kinds: BTreeSet::from([UnitKind::Bundle]),
        }
    }

    /// Profile of the machine running the engine, with unlimited disk.
    pub fn host() -> Self {
        PlatformProfile::new(std::env::consts::ARCH, std::env::consts::OS, u64::MAX)
    }

    pub fn allows_multi_version(&self, kind: UnitKind) -> bool {
        self.multi_version_kinds.contains(&kind)
    }
}
