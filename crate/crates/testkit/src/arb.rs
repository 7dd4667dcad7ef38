//! Proptest strategies for valid model values, and schema-breaking
//! mutations of their serialized forms.

use chrono::DateTime;
use proptest::collection::vec;
use proptest::prelude::*;
use resolvit_core::hash::Sha256Digest;
use resolvit_core::model::{
    Bound, DependencyEndpoint, DependencyGroup, Descriptor, GroupOp, ResourceRequirements,
    ServiceRef, UnitId, UnitKind, Version, VersionRange,
};
use resolvit_core::state::{InstallRecord, PlatformStatus};

pub fn token() -> impl Strategy<Value = String> {
    "[a-zA-Z0-9][a-zA-Z0-9._-]{0,11}"
}

pub fn version() -> impl Strategy<Value = Version> {
    (
        0u64..4,
        0u64..12,
        0u64..12,
        proptest::option::weighted(0.2, "[a-zA-Z0-9]{1,6}"),
    )
        .prop_map(|(a, b, c, q)| match q {
            Some(q) => Version::new(a, b, c)
                .with_qualifier(q)
                .expect("alphanumeric qualifier"),
            None => Version::new(a, b, c),
        })
}

pub fn range() -> impl Strategy<Value = VersionRange> {
    let bound =
        || (version(), any::<bool>()).prop_map(|(version, inclusive)| Bound { version, inclusive });
    prop_oneof![
        Just(VersionRange::Any),
        version().prop_map(VersionRange::Exact),
        (proptest::option::of(bound()), proptest::option::of(bound())).prop_filter_map(
            "valid interval",
            |(lower, upper)| VersionRange::interval(lower, upper).ok()
        ),
    ]
}

pub fn kind() -> impl Strategy<Value = UnitKind> {
    prop_oneof![
        Just(UnitKind::Bundle),
        Just(UnitKind::Native),
        Just(UnitKind::Driver)
    ]
}

fn endpoint() -> impl Strategy<Value = DependencyEndpoint> {
    (
        token(),
        range(),
        proptest::option::weighted(0.2, "[a-z]{1,8}"),
    )
        .prop_map(|(s, r, repo)| {
            let mut e = DependencyEndpoint::new(s, r).expect("token");
            e.repository = repo.map(|h| format!("http://{h}.example/repo").parse().expect("url"));
            e
        })
}

fn group() -> impl Strategy<Value = DependencyGroup> {
    (
        prop_oneof![
            Just(GroupOp::And),
            Just(GroupOp::Or),
            Just(GroupOp::Xor),
            Just(GroupOp::Not)
        ],
        vec(endpoint(), 1..4),
        any::<u32>(),
    )
        .prop_map(|(op, endpoints, c)| {
            let card = if op == GroupOp::Or {
                1 + c % endpoints.len() as u32
            } else {
                1
            };
            DependencyGroup::new(op, card, endpoints).expect("valid group")
        })
}

fn location() -> impl Strategy<Value = String> {
    vec("[a-z0-9&<>'\" _-][a-z0-9&<>'\"._-]{0,6}", 1..4).prop_map(|segs| segs.join("/"))
}

pub fn descriptor() -> impl Strategy<Value = Descriptor> {
    (
        (token(), version(), kind(), token(), 0u8..=100),
        vec((token(), version()), 0..4),
        vec(group(), 0..4),
        (
            any::<u32>(),
            proptest::option::of(token()),
            proptest::option::of(token()),
        ),
        (any::<[u8; 8]>(), location()),
    )
        .prop_map(
            |(
                (name, v, k, provider, priority),
                provides,
                groups,
                (disk, arch, os),
                (seed, loc),
            )| {
                let mut seen = std::collections::HashSet::new();
                let provides = provides
                    .into_iter()
                    .filter(|(n, v)| seen.insert((n.clone(), v.clone())))
                    .map(|(n, v)| ServiceRef::new(n, v).expect("token"))
                    .collect();
                Descriptor {
                    id: UnitId::new(name, v, k).expect("token"),
                    provider,
                    priority,
                    provides,
                    groups,
                    requirements: ResourceRequirements {
                        disk_space_kib: u64::from(disk),
                        architecture: arch,
                        os,
                    },
                    package_sha256: Sha256Digest::of(&seed),
                    package_location: loc,
                }
            },
        )
}

pub fn status() -> impl Strategy<Value = PlatformStatus> {
    vec((descriptor(), 0i64..4_000_000_000), 0..5).prop_map(|items| {
        let mut records: Vec<InstallRecord> = Vec::new();
        for (d, ts) in items {
            if records.iter().all(|r| r.id != d.id) {
                records.push(InstallRecord::new(
                    d,
                    DateTime::from_timestamp(ts, 0).expect("in range"),
                ));
            }
        }
        PlatformStatus::from_records(records).expect("distinct ids")
    })
}

/// Replaces the value of the first `attr="..."` in `doc`.
fn set_attr(doc: &str, attr: &str, value: &str) -> Option<String> {
    let key = format!(" {attr}=\"");
    let start = doc.find(&key)? + key.len();
    let end = start + doc[start..].find('"')?;
    Some(format!("{}{}{}", &doc[..start], value, &doc[end..]))
}

fn drop_attr(doc: &str, attr: &str) -> Option<String> {
    let key = format!(" {attr}=\"");
    let start = doc.find(&key)?;
    let end = start + key.len() + doc[start + key.len()..].find('"')? + 1;
    Some(format!("{}{}", &doc[..start], &doc[end..]))
}

/// One schema-breaking edit of a canonical descriptor document, chosen by
/// `pick` among those applicable to it. Returns the name of the edit too.
pub fn corrupt_descriptor(doc: &str, pick: usize) -> (&'static str, String) {
    let edits: [(&'static str, Option<String>); 17] = [
        ("bad version", set_attr(doc, "version", "1.x.0")),
        ("unknown kind", set_attr(doc, "kind", "gizmo")),
        ("empty name", set_attr(doc, "name", "")),
        ("name with space", set_attr(doc, "name", "a b")),
        ("short digest", set_attr(doc, "package-sha256", "abc123")),
        (
            "absolute location",
            set_attr(doc, "package-location", "/etc/passwd"),
        ),
        (
            "escaping location",
            set_attr(doc, "package-location", "../x"),
        ),
        ("priority out of range", set_attr(doc, "priority", "101")),
        ("missing provider", drop_attr(doc, "provider")),
        ("missing digest", drop_attr(doc, "package-sha256")),
        (
            "unknown attribute",
            doc.find(" name=\"")
                .map(|i| format!("{} colour=\"red\"{}", &doc[..i], &doc[i..])),
        ),
        (
            "unknown element",
            doc.rfind("</deployment-unit>")
                .map(|i| format!("{}  <extra/>\n{}", &doc[..i], &doc[i..])),
        ),
        ("truncated", Some(doc[..doc.len() / 2].to_string())),
        ("unknown dependency type", set_attr(doc, "type", "NAND")),
        ("inverted range", set_attr(doc, "range", "[2.0.0,1.0.0]")),
        ("negative disk", set_attr(doc, "disk-space-kib", "-1")),
        (
            "bad service version",
            doc.find("<service ").and_then(|i| {
                set_attr(&doc[i..], "version", "v1").map(|t| format!("{}{}", &doc[..i], t))
            }),
        ),
    ];
    let applicable: Vec<(&'static str, String)> = edits
        .into_iter()
        .filter_map(|(name, d)| d.map(|d| (name, d)))
        .collect();
    applicable[pick % applicable.len()].clone()
}

/// One schema-breaking edit of a status document with at least one record.
pub fn corrupt_status(doc: &str, pick: usize) -> (&'static str, String) {
    let replace = |key: &str, value: &str| -> String {
        doc.lines()
            .map(|l| {
                if l.starts_with(&format!("{key}:")) {
                    format!("{key}: {value}")
                } else {
                    l.to_string()
                }
            })
            .collect::<Vec<_>>()
            .join("\n")
            + "\n"
    };
    let drop_line = |key: &str| -> String {
        doc.lines()
            .filter(|l| !l.starts_with(&format!("{key}:")))
            .map(|l| format!("{l}\n"))
            .collect()
    };
    let edits: [(&'static str, String); 14] = [
        ("missing version", drop_line("Version")),
        ("missing descriptor", drop_line("Descriptor")),
        ("missing installed-at", drop_line("Installed-At")),
        ("bad version", replace("Version", "one")),
        ("unknown kind", replace("Kind", "gizmo")),
        ("other name", replace("Name", "someone-else")),
        ("other provider", replace("Provider", "someone-else")),
        ("bad digest", replace("Package-SHA256", "00")),
        ("bad timestamp", replace("Installed-At", "yesterday")),
        ("bad base64", replace("Descriptor", "!!!")),
        ("bad provides", replace("Provides", "no-version-here")),
        (
            "unknown field",
            doc.replacen("Name:", "Colour: red\nName:", 1),
        ),
        ("bad format", replace("Format", "99")),
        (
            "line without key",
            doc.replacen("Name:", "garbage\nName:", 1),
        ),
    ];
    edits[pick % edits.len()].clone()
}
