use std::collections::BTreeSet;
use std::fmt;

use super::enumerate::CandidateSolution;
use super::tree::DependencyTree;
use super::{ConflictPolicy, ResolveError};
use crate::model::{DependencyEndpoint, Descriptor, GroupOp, PlatformProfile, UnitId};
use crate::state::PlatformStatus;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ConflictCause {
    /// A NOT endpoint of `source` matches `offending`.
    Excludes(DependencyEndpoint),
    /// `source` is another version of `offending` in a single-version slot.
    Supersedes,
    /// `source` is installed and the change to `offending` would break its
    /// group containing this endpoint.
    Requires(DependencyEndpoint),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ConflictResolution {
    Abort,
    Remove,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Conflict {
    pub source: UnitId,
    pub cause: ConflictCause,
    pub offending: UnitId,
    pub resolution: ConflictResolution,
}

impl fmt::Display for Conflict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.cause {
            ConflictCause::Excludes(e) => {
                write!(f, "{} excludes {} (NOT {e})", self.source, self.offending)?
            }
            ConflictCause::Supersedes => {
                write!(f, "{} supersedes {}", self.source, self.offending)?
            }
            ConflictCause::Requires(e) => {
                write!(f, "{} depends on {} for {e}", self.source, self.offending)?
            }
        }
        match self.resolution {
            ConflictResolution::Abort => f.write_str(" [abort]"),
            ConflictResolution::Remove => write!(f, " [remove {}]", self.offending),
        }
    }
}

/// An installed unit whose group would stop holding.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BrokenDependency {
    pub dependent: UnitId,
    pub group: usize,
    /// Endpoints whose satisfaction the change flips.
    pub endpoints: Vec<DependencyEndpoint>,
    /// Removed units that had been satisfying those endpoints, then added
    /// units that newly satisfy them.
    pub providers: Vec<UnitId>,
}

/// Installed units outside `removed` with an AND/OR/XOR group that holds
/// now but would fail once `removed` are gone and `added` are present.
pub fn broken_dependents(
    status: &PlatformStatus,
    removed: &BTreeSet<UnitId>,
    added: &[&Descriptor],
) -> Vec<BrokenDependency> {
    let mut out = Vec::new();
    for rec in status.records().iter().filter(|r| !removed.contains(&r.id)) {
        for (gi, group) in rec.descriptor.groups.iter().enumerate() {
            if group.op == GroupOp::Not {
                continue;
            }
            let before: Vec<bool> = group
                .endpoints
                .iter()
                .map(|e| {
                    status
                        .records()
                        .iter()
                        .any(|r| r.provides_within(&e.service, &e.range))
                })
                .collect();
            let after: Vec<bool> = group
                .endpoints
                .iter()
                .map(|e| {
                    status.records().iter().any(|r| {
                        !removed.contains(&r.id) && r.provides_within(&e.service, &e.range)
                    }) || added
                        .iter()
                        .any(|d| d.provides_within(&e.service, &e.range))
                })
                .collect();
            if !group.holds(before.iter().copied()) || group.holds(after.iter().copied()) {
                continue;
            }
            let changed: Vec<(&DependencyEndpoint, bool)> = group
                .endpoints
                .iter()
                .zip(before.iter().zip(&after))
                .filter(|(_, (b, a))| b != a)
                .map(|(e, (b, _))| (e, *b))
                .collect();
            let mut providers: Vec<UnitId> = status
                .records()
                .iter()
                .filter(|r| {
                    removed.contains(&r.id)
                        && changed
                            .iter()
                            .any(|(e, lost)| *lost && r.provides_within(&e.service, &e.range))
                })
                .map(|r| r.id.clone())
                .collect();
            // An XOR group also breaks when the change adds a second match.
            providers.extend(
                added
                    .iter()
                    .filter(|d| {
                        changed
                            .iter()
                            .any(|(e, lost)| !*lost && d.provides_within(&e.service, &e.range))
                    })
                    .map(|d| d.id.clone()),
            );
            out.push(BrokenDependency {
                dependent: rec.id.clone(),
                group: gi,
                endpoints: changed.into_iter().map(|(e, _)| e.clone()).collect(),
                providers,
            });
        }
    }
    out
}

/// Conflicts between a solution and the installed units it displaces.
///
/// Under `abort` any conflict fails the check. Under `replace` the displaced
/// units are removed unless an installed unit outside the displaced set
/// depends on them and the solution does not provide a substitute; removals
/// never cascade.
pub fn plan_conflict_resolution(
    solution: &CandidateSolution,
    tree: &DependencyTree,
    status: &PlatformStatus,
    profile: &PlatformProfile,
    policy: ConflictPolicy,
) -> Result<Vec<Conflict>, ResolveError> {
    let selected: Vec<&Descriptor> = solution
        .selected
        .iter()
        .filter_map(|id| tree.descriptor(id))
        .collect();
    let mut conflicts = Vec::new();
    for d in &solution.displaced {
        let Some(installed) = status.get(d) else {
            continue;
        };
        let mut found = false;
        for s in &selected {
            let nots = s
                .groups
                .iter()
                .filter(|g| g.op == GroupOp::Not)
                .flat_map(|g| &g.endpoints);
            for e in nots.filter(|e| installed.provides_within(&e.service, &e.range)) {
                conflicts.push((s.id.clone(), ConflictCause::Excludes(e.clone()), d.clone()));
                found = true;
            }
            if s.id.same_slot(d) && !profile.allows_multi_version(d.kind) {
                conflicts.push((s.id.clone(), ConflictCause::Supersedes, d.clone()));
                found = true;
            }
            let nots = installed
                .descriptor
                .groups
                .iter()
                .filter(|g| g.op == GroupOp::Not);
            for e in nots
                .flat_map(|g| &g.endpoints)
                .filter(|e| s.provides_within(&e.service, &e.range))
            {
                conflicts.push((d.clone(), ConflictCause::Excludes(e.clone()), s.id.clone()));
                found = true;
            }
        }
        debug_assert!(found, "displaced unit {d} without a recorded cause");
    }

    let abort = |mut extra: Vec<Conflict>, list: Vec<(UnitId, ConflictCause, UnitId)>| {
        let mut all: Vec<Conflict> = list
            .into_iter()
            .map(|(source, cause, offending)| Conflict {
                source,
                cause,
                offending,
                resolution: ConflictResolution::Abort,
            })
            .collect();
        all.append(&mut extra);
        Err(ResolveError::Conflict(all))
    };
    if conflicts.is_empty() {
        return Ok(Vec::new());
    }
    match policy {
        ConflictPolicy::Abort => abort(Vec::new(), conflicts),
        ConflictPolicy::Replace => {
            let broken = broken_dependents(status, &solution.displaced, &selected);
            if broken.is_empty() {
                return Ok(conflicts
                    .into_iter()
                    .map(|(source, cause, offending)| Conflict {
                        source,
                        cause,
                        offending,
                        resolution: ConflictResolution::Remove,
                    })
                    .collect());
            }
            let refusals = broken
                .into_iter()
                .flat_map(|b| {
                    let endpoint = b.endpoints[0].clone();
                    b.providers.into_iter().map(move |p| Conflict {
                        source: b.dependent.clone(),
                        cause: ConflictCause::Requires(endpoint.clone()),
                        offending: p,
                        resolution: ConflictResolution::Abort,
                    })
                })
                .collect();
            abort(refusals, conflicts)
        }
    }
}
