//! Shared test fixtures: descriptor builders, in-memory and on-disk
//! repositories, random universes and a brute-force resolution oracle.

pub mod arb;
pub mod oracle;
pub mod platform;
pub mod universe;

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;
use std::sync::atomic::{AtomicUsize, Ordering};

use chrono::{DateTime, Utc};
use resolvit_core::codec::{serialize_descriptor, serialize_repository_index, IndexEntry};
use resolvit_core::model::{
    DependencyEndpoint, DependencyGroup, Descriptor, GroupOp, ResourceRequirements, ServiceRef,
    UnitId, DEFAULT_PRIORITY,
};
use resolvit_core::repository::{IndexSnapshot, RepoError, RepositorySource};
use resolvit_core::resolver::DescriptorFetcher;
use resolvit_core::state::InstallRecord;
use resolvit_core::Sha256Digest;

pub use oracle::{oracle_solutions, OracleSolution};
pub use platform::{tree_snapshot, Platform};
pub use universe::{random_universe, Universe};

/// Parses `name@version:kind`, panicking on bad input.
pub fn id(text: &str) -> UnitId {
    text.parse()
        .unwrap_or_else(|e| panic!("bad unit id {text:?}: {e}"))
}

/// Deterministic package contents for a unit.
pub fn package_bytes(id: &UnitId) -> Vec<u8> {
    format!("package {id}\n").into_bytes()
}

/// Fixed timestamp so statuses are reproducible.
pub fn epoch() -> DateTime<Utc> {
    DateTime::from_timestamp(1_700_000_000, 0).expect("valid timestamp")
}

pub fn record(d: &Descriptor) -> InstallRecord {
    InstallRecord::new(d.clone(), epoch())
}

pub struct DescriptorBuilder {
    d: Descriptor,
}

/// Starts a descriptor for `name@version:kind` with no services or groups.
pub fn unit(spec: &str) -> DescriptorBuilder {
    let id = id(spec);
    let package_location = format!("pkgs/{}-{}.{}", id.name, id.version, id.kind.as_str());
    DescriptorBuilder {
        d: Descriptor {
            package_sha256: Sha256Digest::of(&package_bytes(&id)),
            id,
            provider: "acme".into(),
            priority: DEFAULT_PRIORITY,
            provides: Vec::new(),
            groups: Vec::new(),
            requirements: ResourceRequirements::default(),
            package_location,
        },
    }
}

impl DescriptorBuilder {
    pub fn provides(mut self, service: &str, version: &str) -> Self {
        self.d
            .provides
            .push(ServiceRef::new(service, version.parse().expect("version")).expect("service"));
        self
    }

    /// Adds a group; each endpoint is `(service, range)`.
    pub fn group(mut self, op: GroupOp, cardinality: u32, endpoints: &[(&str, &str)]) -> Self {
        let endpoints = endpoints
            .iter()
            .map(|(s, r)| DependencyEndpoint::new(*s, r.parse().expect("range")).expect("endpoint"))
            .collect();
        self.d
            .groups
            .push(DependencyGroup::new(op, cardinality, endpoints).expect("group"));
        self
    }

    pub fn and(self, endpoints: &[(&str, &str)]) -> Self {
        self.group(GroupOp::And, 1, endpoints)
    }

    pub fn or(self, cardinality: u32, endpoints: &[(&str, &str)]) -> Self {
        self.group(GroupOp::Or, cardinality, endpoints)
    }

    pub fn xor(self, endpoints: &[(&str, &str)]) -> Self {
        self.group(GroupOp::Xor, 1, endpoints)
    }

    pub fn not(self, endpoints: &[(&str, &str)]) -> Self {
        self.group(GroupOp::Not, 1, endpoints)
    }

    /// Sets the repository hint on the last endpoint of the last group.
    pub fn hint(mut self, url: &str) -> Self {
        let g = self.d.groups.last_mut().expect("a group to hint");
        g.endpoints.last_mut().expect("an endpoint").repository = Some(url.parse().expect("url"));
        self
    }

    pub fn disk(mut self, kib: u64) -> Self {
        self.d.requirements.disk_space_kib = kib;
        self
    }

    pub fn arch(mut self, arch: &str) -> Self {
        self.d.requirements.architecture = Some(arch.into());
        self
    }

    pub fn os(mut self, os: &str) -> Self {
        self.d.requirements.os = Some(os.into());
        self
    }

    pub fn priority(mut self, p: u8) -> Self {
        self.d.priority = p;
        self
    }

    pub fn build(self) -> Descriptor {
        self.d.validate().expect("valid descriptor");
        self.d
    }
}

pub fn descriptor_location(id: &UnitId) -> String {
    format!("units/{}-{}-{}.xml", id.name, id.version, id.kind.as_str())
}

pub fn index_entry(d: &Descriptor, cost: u64) -> IndexEntry {
    IndexEntry {
        id: d.id.clone(),
        provides: d.provides.clone(),
        descriptor_location: descriptor_location(&d.id),
        package_location: d.package_location.clone(),
        descriptor_sha256: Sha256Digest::of(&serialize_descriptor(d)),
        package_sha256: d.package_sha256.clone(),
        cost,
    }
}

/// Writes a complete repository (index, descriptors, packages) under `dir`.
pub fn write_repository(dir: &Path, units: &[(Descriptor, u64)]) -> RepositorySource {
    fs::create_dir_all(dir).expect("repo dir");
    let entries: Vec<IndexEntry> = units.iter().map(|(d, c)| index_entry(d, *c)).collect();
    for (d, _) in units {
        let loc = dir.join(descriptor_location(&d.id));
        fs::create_dir_all(loc.parent().unwrap()).unwrap();
        fs::write(loc, serialize_descriptor(d)).unwrap();
        let pkg = dir.join(&d.package_location);
        fs::create_dir_all(pkg.parent().unwrap()).unwrap();
        fs::write(pkg, package_bytes(&d.id)).unwrap();
    }
    fs::write(dir.join("index.xml"), serialize_repository_index(&entries)).unwrap();
    RepositorySource::from_directory(dir, "fixture").expect("file source")
}

/// Repository held in memory; serves descriptors without any I/O.
pub struct MemoryRepo {
    pub source: RepositorySource,
    pub entries: Vec<IndexEntry>,
    descriptors: BTreeMap<UnitId, Descriptor>,
    fetches: AtomicUsize,
}

impl MemoryRepo {
    pub fn new(units: &[(Descriptor, u64)]) -> Self {
        MemoryRepo {
            source: RepositorySource::new("http://repo.invalid/main", "memory").expect("source"),
            entries: units.iter().map(|(d, c)| index_entry(d, *c)).collect(),
            descriptors: units
                .iter()
                .map(|(d, _)| (d.id.clone(), d.clone()))
                .collect(),
            fetches: AtomicUsize::new(0),
        }
    }

    pub fn snapshot(&self) -> IndexSnapshot {
        IndexSnapshot {
            source: self.source.clone(),
            entries: self.entries.clone(),
            fetched_at: epoch(),
            stale: false,
        }
    }

    pub fn fetches(&self) -> usize {
        self.fetches.load(Ordering::SeqCst)
    }
}

impl DescriptorFetcher for MemoryRepo {
    fn fetch_descriptor(
        &self,
        entry: &IndexEntry,
        _source: &RepositorySource,
    ) -> Result<Descriptor, RepoError> {
        self.fetches.fetch_add(1, Ordering::SeqCst);
        self.descriptors
            .get(&entry.id)
            .cloned()
            .ok_or_else(|| RepoError::NotFound(entry.descriptor_location.clone()))
    }
}

/// Sends one HTTP/1.1 request and returns the status code and body.
pub fn http_request(
    addr: std::net::SocketAddr,
    method: &str,
    path: &str,
    body: &[u8],
) -> (u16, String) {
    use std::io::{Read, Write};
    let mut stream = std::net::TcpStream::connect(addr).expect("connect");
    let head = format!(
        "{method} {path} HTTP/1.1\r\nHost: {addr}\r\nContent-Type: text/plain; charset=utf-8\r\nContent-Length: {}\r\nConnection: close\r\n\r\n",
        body.len()
    );
    stream.write_all(head.as_bytes()).expect("send");
    stream.write_all(body).expect("send");
    let mut raw = Vec::new();
    stream.read_to_end(&mut raw).expect("receive");
    let text = String::from_utf8(raw).expect("utf-8 response");
    let (head, body) = text.split_once("\r\n\r\n").expect("response head");
    let code = head
        .split_whitespace()
        .nth(1)
        .and_then(|c| c.parse().ok())
        .expect("status code");
    (code, body.to_string())
}
