//! Brute-force reference resolver.
//!
//! Written from the definitions alone with plain sets and loops so that it
//! shares nothing with the bitmask enumerator it checks: it finds the units a
//! dependency walk would reach, tries every subset of them, and evaluates
//! each group predicate literally.

use std::collections::{BTreeMap, BTreeSet};

use resolvit_core::model::{
    DependencyEndpoint, Descriptor, GroupOp, PlatformProfile, UnitId, Version, VersionRange,
};
use resolvit_core::resolver::Target;
use resolvit_core::state::InstallRecord;

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct OracleSolution {
    pub selected: BTreeSet<UnitId>,
    pub displaced: BTreeSet<UnitId>,
    pub disk: u64,
    pub cost: u64,
}

fn in_range(range: &VersionRange, v: &Version) -> bool {
    match range {
        VersionRange::Any => true,
        VersionRange::Exact(x) => x == v,
        VersionRange::Interval { lower, upper } => {
            let above = match lower {
                None => true,
                Some(b) => v > &b.version || (b.inclusive && v == &b.version),
            };
            let below = match upper {
                None => true,
                Some(b) => v < &b.version || (b.inclusive && v == &b.version),
            };
            above && below
        }
    }
}

fn provides(d: &Descriptor, service: &str, range: &VersionRange) -> bool {
    d.provides
        .iter()
        .any(|s| s.name == service && in_range(range, &s.version))
}

fn satisfies(d: &Descriptor, e: &DependencyEndpoint) -> bool {
    provides(d, &e.service, &e.range)
}

fn context_ok(d: &Descriptor, p: &PlatformProfile) -> bool {
    d.requirements
        .architecture
        .as_ref()
        .is_none_or(|a| *a == p.architecture)
        && d.requirements.os.as_ref().is_none_or(|o| *o == p.os)
}

fn provides_target(d: &Descriptor, target: &Target) -> bool {
    match target {
        Target::Service { name, range } => provides(d, name, range),
        Target::Unit(id) => d.id == *id,
    }
}

/// Every valid `(selected, displaced)` pair, sorted.
///
/// `repo` is one repository in index order; units it lists more than once
/// are taken from their first listing.
pub fn oracle_solutions(
    repo: &[(Descriptor, u64)],
    installed: &[InstallRecord],
    profile: &PlatformProfile,
    target: &Target,
) -> Vec<OracleSolution> {
    let installed: Vec<&Descriptor> = installed.iter().map(|r| &r.descriptor).collect();
    let installed_ids: BTreeSet<&UnitId> = installed.iter().map(|d| &d.id).collect();
    if installed.iter().any(|d| provides_target(d, target)) {
        return vec![OracleSolution {
            selected: BTreeSet::new(),
            displaced: BTreeSet::new(),
            disk: 0,
            cost: 0,
        }];
    }

    let mut available: BTreeMap<&UnitId, (&Descriptor, u64)> = BTreeMap::new();
    for (d, c) in repo {
        if !installed_ids.contains(&d.id) {
            available.entry(&d.id).or_insert((d, *c));
        }
    }
    let installed_satisfies = |e: &DependencyEndpoint| installed.iter().any(|d| satisfies(d, e));

    // Units a dependency walk from the target would expand: providers of
    // the target, then providers of every AND/OR/XOR endpoint of an expanded
    // unit that no installed unit already satisfies. Units failing the
    // context check are never expanded.
    let mut expanded: BTreeSet<&UnitId> = BTreeSet::new();
    let mut frontier: Vec<&UnitId> = available
        .values()
        .filter(|(d, _)| provides_target(d, target))
        .map(|(d, _)| &d.id)
        .collect();
    while let Some(u) = frontier.pop() {
        let (d, _) = available[u];
        if !context_ok(d, profile) || !expanded.insert(u) {
            continue;
        }
        for g in d.groups.iter().filter(|g| g.op != GroupOp::Not) {
            for e in g.endpoints.iter().filter(|e| !installed_satisfies(e)) {
                frontier.extend(
                    available
                        .values()
                        .filter(|(w, _)| satisfies(w, e))
                        .map(|(w, _)| &w.id),
                );
            }
        }
    }

    let domain: Vec<&Descriptor> = expanded.iter().map(|id| available[id].0).collect();
    assert!(
        domain.len() <= 20,
        "oracle universe too large: {}",
        domain.len()
    );
    let mut out = Vec::new();
    for mask in 1u32..(1u32 << domain.len()) {
        let s: Vec<&Descriptor> = (0..domain.len())
            .filter(|i| mask & (1 << i) != 0)
            .map(|i| domain[i])
            .collect();
        if let Some(displaced) = valid(&s, &installed, profile, target) {
            out.push(OracleSolution {
                selected: s.iter().map(|d| d.id.clone()).collect(),
                displaced,
                disk: s.iter().map(|d| d.requirements.disk_space_kib).sum(),
                cost: s.iter().map(|d| available[&d.id].1).sum(),
            });
        }
    }
    out.sort();
    out
}

fn valid(
    s: &[&Descriptor],
    installed: &[&Descriptor],
    profile: &PlatformProfile,
    target: &Target,
) -> Option<BTreeSet<UnitId>> {
    if !s.iter().any(|d| provides_target(d, target)) {
        return None;
    }

    let single_slot = |a: &UnitId, b: &UnitId| {
        a != b
            && a.name == b.name
            && a.kind == b.kind
            && !profile.multi_version_kinds.contains(&a.kind)
    };

    // Installed units the selection displaces: excluded by a NOT group of a
    // selected unit, or superseded in a single-version slot.
    let mut displaced = BTreeSet::new();
    for i in installed {
        let excluded = s.iter().any(|u| {
            u.groups
                .iter()
                .filter(|g| g.op == GroupOp::Not)
                .any(|g| g.endpoints.iter().any(|e| satisfies(i, e)))
        });
        let superseded = s.iter().any(|u| single_slot(&u.id, &i.id));
        if excluded || superseded {
            displaced.insert(i.id.clone());
        }
    }
    let remaining: Vec<&Descriptor> = installed
        .iter()
        .copied()
        .filter(|d| !displaced.contains(&d.id))
        .collect();
    let world: Vec<&Descriptor> = s.iter().copied().chain(remaining.iter().copied()).collect();

    for u in s {
        for g in &u.groups {
            let count = g
                .endpoints
                .iter()
                .filter(|e| world.iter().any(|w| satisfies(w, e)))
                .count();
            let ok = match g.op {
                GroupOp::And => count == g.endpoints.len(),
                GroupOp::Or => count >= g.cardinality as usize,
                GroupOp::Xor => count == 1,
                GroupOp::Not => count == 0,
            };
            if !ok {
                return None;
            }
        }
    }
    for i in &remaining {
        for g in i.groups.iter().filter(|g| g.op == GroupOp::Not) {
            if g.endpoints
                .iter()
                .any(|e| s.iter().any(|u| satisfies(u, e)))
            {
                return None;
            }
        }
    }
    let disk: u64 = s.iter().map(|d| d.requirements.disk_space_kib).sum();
    if disk > profile.disk_available_kib {
        return None;
    }
    for (x, a) in s.iter().enumerate() {
        if s[x + 1..].iter().any(|b| single_slot(&a.id, &b.id)) {
            return None;
        }
    }

    // Every selected unit must be needed: reachable from a target provider
    // through endpoints no installed unit satisfied beforehand.
    let mut reached: BTreeSet<&UnitId> = s
        .iter()
        .filter(|d| provides_target(d, target))
        .map(|d| &d.id)
        .collect();
    loop {
        let before = reached.len();
        for u in s
            .iter()
            .filter(|d| reached.contains(&d.id))
            .copied()
            .collect::<Vec<_>>()
        {
            for g in u.groups.iter().filter(|g| g.op != GroupOp::Not) {
                for e in g
                    .endpoints
                    .iter()
                    .filter(|e| !installed.iter().any(|i| satisfies(i, e)))
                {
                    reached.extend(s.iter().filter(|w| satisfies(w, e)).map(|w| &w.id));
                }
            }
        }
        if reached.len() == before {
            break;
        }
    }
    (reached.len() == s.len()).then_some(displaced)
}
