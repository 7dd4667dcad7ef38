use std::collections::HashSet;

use roxmltree::Node;

use super::descriptor::{parse_service, write_service};
use super::xml::{self, Writer};
use super::CodecError;
use crate::hash::Sha256Digest;
use crate::model::{is_relative_location, ServiceRef, UnitId, VersionRange};

/// One unit as advertised by a repository index.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct IndexEntry {
    pub id: UnitId,
    pub provides: Vec<ServiceRef>,
    pub descriptor_location: String,
    pub package_location: String,
    pub descriptor_sha256: Sha256Digest,
    pub package_sha256: Sha256Digest,
    /// Repository-assigned cost; zero when the index does not say.
    pub cost: u64,
}

impl IndexEntry {
    pub fn provides_within(&self, service: &str, range: &VersionRange) -> bool {
        self.provides
            .iter()
            .any(|s| s.name == service && range.contains(&s.version))
    }
}

const UNIT_ATTRS: &[&str] = &[
    "name",
    "version",
    "kind",
    "descriptor-location",
    "descriptor-sha256",
    "package-location",
    "package-sha256",
    "cost",
];

pub fn parse_repository_index(bytes: &[u8]) -> Result<Vec<IndexEntry>, CodecError> {
    let doc = xml::parse_document(bytes)?;
    let root = doc.root_element();
    xml::expect_element(root, "repository-index", &[])?;
    let mut seen = HashSet::new();
    let mut entries = Vec::new();
    for node in xml::child_elements(root)? {
        let entry = parse_unit(node)?;
        if !seen.insert(entry.id.clone()) {
            return Err(CodecError::DuplicateUnit(entry.id));
        }
        entries.push(entry);
    }
    Ok(entries)
}

fn parse_unit(node: Node<'_, '_>) -> Result<IndexEntry, CodecError> {
    xml::expect_element(node, "unit", UNIT_ATTRS)?;
    let id = UnitId::new(
        xml::required(node, "name")?,
        xml::required_parsed(node, "version")?,
        xml::required_parsed(node, "kind")?,
    )?;
    let location = |attr: &str| -> Result<String, CodecError> {
        let value = xml::required(node, attr)?;
        if !is_relative_location(value) {
            return Err(CodecError::SchemaViolation(format!(
                "`{attr}` must be a relative path, got `{value}`"
            )));
        }
        Ok(value.to_string())
    };
    let provides = xml::child_elements(node)?
        .into_iter()
        .map(parse_service)
        .collect::<Result<Vec<_>, _>>()?;
    let mut seen = HashSet::new();
    if let Some(dup) = provides
        .iter()
        .find(|s| !seen.insert((&s.name, &s.version)))
    {
        return Err(CodecError::SchemaViolation(format!(
            "unit {id} lists service {dup} twice"
        )));
    }
    Ok(IndexEntry {
        descriptor_location: location("descriptor-location")?,
        package_location: location("package-location")?,
        descriptor_sha256: xml::required_parsed(node, "descriptor-sha256")?,
        package_sha256: xml::required_parsed(node, "package-sha256")?,
        cost: match node.attribute("cost") {
            Some(c) => xml::parse_uint(node, "cost", c)?,
            None => 0,
        },
        provides,
        id,
    })
}

/// Canonical index document; `cost` is written only when non-zero.
pub fn serialize_repository_index(entries: &[IndexEntry]) -> Vec<u8> {
    let mut w = Writer::new();
    w.start(0, "repository-index", &[]);
    if entries.is_empty() {
        w.empty_end();
        return w.finish();
    }
    w.open_end();
    for e in entries {
        let version = e.id.version.to_string();
        let cost = e.cost.to_string();
        let mut attrs = vec![
            ("name", e.id.name.as_str()),
            ("version", version.as_str()),
            ("kind", e.id.kind.as_str()),
            ("descriptor-location", e.descriptor_location.as_str()),
            ("descriptor-sha256", e.descriptor_sha256.as_str()),
            ("package-location", e.package_location.as_str()),
            ("package-sha256", e.package_sha256.as_str()),
        ];
        if e.cost != 0 {
            attrs.push(("cost", cost.as_str()));
        }
        w.start(1, "unit", &attrs);
        if e.provides.is_empty() {
            w.empty_end();
        } else {
            w.open_end();
            for s in &e.provides {
                write_service(&mut w, 2, s);
            }
            w.close(1, "unit");
        }
    }
    w.close(0, "repository-index");
    w.finish()
}
