//! Exhaustive enumeration of candidate solutions over the dependency tree.
//!
//! Every group predicate is compiled once into bit masks over the candidate
//! units (`u64`, one bit per selectable tree node) and over the installed
//! units that matter to the tree (`u128`). Each subset is then checked with a
//! handful of mask operations, which makes the subset sweep embarrassingly
//! parallel.

use std::collections::BTreeSet;

use super::tree::DependencyTree;
use super::{ResolveError, Target};
use crate::model::{DependencyEndpoint, GroupOp, PlatformProfile, UnitId};
use crate::state::PlatformStatus;

/// Upper bound on selectable units; the sweep visits `2^n` subsets.
pub const MAX_CANDIDATES: usize = 24;
/// Upper bound on installed units that interact with the tree.
pub const MAX_RELEVANT_INSTALLED: usize = 128;

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct CandidateSolution {
    /// Units to install; never contains an installed unit.
    pub selected: BTreeSet<UnitId>,
    /// Installed units that the selection conflicts with and that would have
    /// to be removed for it to be deployed.
    pub displaced: BTreeSet<UnitId>,
    pub total_disk_kib: u64,
    pub total_cost: u64,
}

impl CandidateSolution {
    pub fn empty() -> Self {
        CandidateSolution {
            selected: BTreeSet::new(),
            displaced: BTreeSet::new(),
            total_disk_kib: 0,
            total_cost: 0,
        }
    }

    /// Canonical text of the selected set: ids in order, comma separated.
    pub fn canonical_encoding(&self) -> String {
        self.selected
            .iter()
            .map(ToString::to_string)
            .collect::<Vec<_>>()
            .join(",")
    }
}

/// How the subset sweep is executed. `Parallel` falls back to sequential
/// when the crate is built without the `parallel` feature.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Parallelism {
    Sequential,
    #[default]
    Parallel,
}

/// All valid selections, sorted by canonical encoding.
///
/// A subset `S` of the selectable tree nodes (repository units that were
/// expanded and passed context checks) is valid, with `I` the installed units
/// and `D` the installed units `S` conflicts with (matched by a NOT endpoint
/// of `S`, or an older version in a single-version slot), iff:
/// * the target is provided by `S` or by `I \ D`;
/// * every AND/OR/XOR group of every member holds over `S ∪ (I \ D)`;
/// * no NOT endpoint of a member is matched by `S`;
/// * no NOT endpoint of an installed unit outside `D` is matched by `S`;
/// * no two members share a single-version slot;
/// * the members' disk requirements fit the profile;
/// * every member is reachable from a target provider in `S` through
///   AND/OR/XOR endpoints that installed units did not already satisfy.
pub fn enumerate_solutions(
    tree: &DependencyTree,
    status: &PlatformStatus,
    profile: &PlatformProfile,
) -> Result<Vec<CandidateSolution>, ResolveError> {
    enumerate_solutions_with(tree, status, profile, Parallelism::default())
}

pub fn enumerate_solutions_with(
    tree: &DependencyTree,
    status: &PlatformStatus,
    profile: &PlatformProfile,
    mode: Parallelism,
) -> Result<Vec<CandidateSolution>, ResolveError> {
    if tree.satisfied {
        return Ok(vec![CandidateSolution::empty()]);
    }
    let universe = Universe::compile(tree, status, profile)?;
    let full: u64 = if universe.len() == 64 {
        u64::MAX
    } else {
        (1u64 << universe.len()) - 1
    };
    let masks = sweep(&universe, full, mode);
    let mut out: Vec<(String, CandidateSolution)> = masks
        .into_iter()
        .map(|(mask, displaced)| {
            let s = universe.solution(mask, displaced);
            (s.canonical_encoding(), s)
        })
        .collect();
    out.sort_by(|a, b| a.0.cmp(&b.0));
    Ok(out.into_iter().map(|(_, s)| s).collect())
}

#[cfg(feature = "parallel")]
fn sweep(u: &Universe, full: u64, mode: Parallelism) -> Vec<(u64, u128)> {
    use rayon::prelude::*;
    match mode {
        Parallelism::Parallel => (1..=full)
            .into_par_iter()
            .filter_map(|m| u.evaluate(m).map(|d| (m, d)))
            .collect(),
        Parallelism::Sequential => (1..=full)
            .filter_map(|m| u.evaluate(m).map(|d| (m, d)))
            .collect(),
    }
}

#[cfg(not(feature = "parallel"))]
fn sweep(u: &Universe, full: u64, _mode: Parallelism) -> Vec<(u64, u128)> {
    (1..=full)
        .filter_map(|m| u.evaluate(m).map(|d| (m, d)))
        .collect()
}

struct CompiledEndpoint {
    /// Selectable units providing the endpoint.
    new: u64,
    /// Relevant installed units providing the endpoint.
    installed: u128,
}

struct CompiledGroup {
    op: GroupOp,
    cardinality: u32,
    endpoints: Vec<CompiledEndpoint>,
}

struct Candidate {
    id: UnitId,
    disk: u64,
    cost: u64,
    groups: Vec<CompiledGroup>,
    /// Installed units this candidate conflicts with.
    conflicts: u128,
    /// Other candidates sharing a single-version slot.
    slot_clash: u64,
    /// Candidates reachable through endpoints not satisfied by installed units.
    grounds: u64,
}

struct Universe {
    candidates: Vec<Candidate>,
    installed_ids: Vec<UnitId>,
    /// For each relevant installed unit, the candidates matching one of its
    /// NOT endpoints.
    installed_excludes: Vec<u64>,
    target_providers: u64,
    disk_available: u64,
}

impl Universe {
    fn len(&self) -> usize {
        self.candidates.len()
    }

    fn compile(
        tree: &DependencyTree,
        status: &PlatformStatus,
        profile: &PlatformProfile,
    ) -> Result<Self, ResolveError> {
        let selectable: Vec<&super::tree::TreeNode> = tree
            .nodes
            .values()
            .filter(|n| !n.is_installed() && n.expanded && n.context_violations.is_empty())
            .collect();
        if selectable.len() > MAX_CANDIDATES {
            return Err(ResolveError::UniverseTooLarge {
                candidates: selectable.len(),
                limit: MAX_CANDIDATES,
            });
        }

        let satisfying_new = |e: &DependencyEndpoint| -> u64 {
            selectable
                .iter()
                .enumerate()
                .filter(|(_, n)| n.descriptor.provides_within(&e.service, &e.range))
                .fold(0, |m, (i, _)| m | (1 << i))
        };

        // Installed units are relevant when they satisfy an endpoint of a
        // candidate, conflict with one, or exclude one.
        let mut relevant: Vec<usize> = Vec::new();
        let records = status.records();
        for (ri, r) in records.iter().enumerate() {
            let touches_endpoint = selectable.iter().any(|n| {
                n.descriptor
                    .groups
                    .iter()
                    .flat_map(|g| &g.endpoints)
                    .any(|e| r.provides_within(&e.service, &e.range))
            });
            let same_slot = selectable
                .iter()
                .any(|n| n.id.same_slot(&r.id) && !profile.allows_multi_version(r.id.kind));
            let excludes = r
                .descriptor
                .groups
                .iter()
                .filter(|g| g.op == GroupOp::Not)
                .flat_map(|g| &g.endpoints)
                .any(|e| satisfying_new(e) != 0);
            if touches_endpoint || same_slot || excludes {
                relevant.push(ri);
            }
        }
        if relevant.len() > MAX_RELEVANT_INSTALLED {
            return Err(ResolveError::UniverseTooLarge {
                candidates: relevant.len(),
                limit: MAX_RELEVANT_INSTALLED,
            });
        }
        let satisfying_installed = |e: &DependencyEndpoint| -> u128 {
            relevant
                .iter()
                .enumerate()
                .filter(|(_, ri)| records[**ri].provides_within(&e.service, &e.range))
                .fold(0, |m, (i, _)| m | (1 << i))
        };
        let any_installed = |e: &DependencyEndpoint| {
            records
                .iter()
                .any(|r| r.provides_within(&e.service, &e.range))
        };

        let mut candidates = Vec::with_capacity(selectable.len());
        for (i, n) in selectable.iter().enumerate() {
            let mut groups = Vec::new();
            let mut conflicts = 0u128;
            let mut grounds = 0u64;
            for g in &n.descriptor.groups {
                let mut endpoints = Vec::new();
                for e in &g.endpoints {
                    let ce = CompiledEndpoint {
                        new: satisfying_new(e),
                        installed: satisfying_installed(e),
                    };
                    if g.op == GroupOp::Not {
                        conflicts |= ce.installed;
                    } else if !any_installed(e) {
                        grounds |= ce.new;
                    }
                    endpoints.push(ce);
                }
                groups.push(CompiledGroup {
                    op: g.op,
                    cardinality: g.cardinality,
                    endpoints,
                });
            }
            if !profile.allows_multi_version(n.id.kind) {
                for (bit, ri) in relevant.iter().enumerate() {
                    let r = &records[*ri];
                    if r.id.same_slot(&n.id) && r.id != n.id {
                        conflicts |= 1 << bit;
                    }
                }
            }
            let slot_clash = if profile.allows_multi_version(n.id.kind) {
                0
            } else {
                selectable
                    .iter()
                    .enumerate()
                    .filter(|(j, m)| *j != i && m.id.same_slot(&n.id))
                    .fold(0, |mask, (j, _)| mask | (1 << j))
            };
            candidates.push(Candidate {
                id: n.id.clone(),
                disk: n.descriptor.requirements.disk_space_kib,
                cost: n.cost(),
                groups,
                conflicts,
                slot_clash,
                grounds,
            });
        }

        let installed_excludes = relevant
            .iter()
            .map(|ri| {
                records[*ri]
                    .descriptor
                    .groups
                    .iter()
                    .filter(|g| g.op == GroupOp::Not)
                    .flat_map(|g| &g.endpoints)
                    .fold(0u64, |m, e| m | satisfying_new(e))
            })
            .collect();

        let target_providers = selectable
            .iter()
            .enumerate()
            .filter(|(_, n)| match &tree.target {
                Target::Service { name, range } => n.descriptor.provides_within(name, range),
                Target::Unit(id) => n.id == *id,
            })
            .fold(0, |m, (i, _)| m | (1 << i));

        Ok(Universe {
            candidates,
            installed_ids: relevant.iter().map(|ri| records[*ri].id.clone()).collect(),
            installed_excludes,
            target_providers,
            disk_available: profile.disk_available_kib,
        })
    }

    /// Returns the displaced-installed mask if `selected` is a valid solution.
    fn evaluate(&self, selected: u64) -> Option<u128> {
        if selected & self.target_providers == 0 {
            return None;
        }
        let mut disk: u64 = 0;
        let mut displaced: u128 = 0;
        for (_, c) in self.members(selected) {
            if c.slot_clash & selected != 0 {
                return None;
            }
            disk = disk.checked_add(c.disk)?;
            displaced |= c.conflicts;
        }
        if disk > self.disk_available {
            return None;
        }
        for (bit, excludes) in self.installed_excludes.iter().enumerate() {
            if displaced & (1 << bit) == 0 && excludes & selected != 0 {
                return None;
            }
        }
        let available = !displaced;
        for (_, c) in self.members(selected) {
            for g in &c.groups {
                let satisfied = g
                    .endpoints
                    .iter()
                    .filter(|e| {
                        if g.op == GroupOp::Not {
                            e.new & selected != 0
                        } else {
                            e.new & selected != 0 || e.installed & available != 0
                        }
                    })
                    .count();
                let holds = match g.op {
                    GroupOp::And => satisfied == g.endpoints.len(),
                    GroupOp::Or => satisfied >= g.cardinality as usize,
                    GroupOp::Xor => satisfied == 1,
                    GroupOp::Not => satisfied == 0,
                };
                if !holds {
                    return None;
                }
            }
        }
        // Every member must hang off a target provider.
        let mut reached = selected & self.target_providers;
        loop {
            let next = self
                .members(reached)
                .fold(reached, |m, (_, c)| m | (c.grounds & selected));
            if next == reached {
                break;
            }
            reached = next;
        }
        (reached == selected).then_some(displaced)
    }

    fn members(&self, mask: u64) -> impl Iterator<Item = (usize, &Candidate)> {
        self.candidates
            .iter()
            .enumerate()
            .filter(move |(i, _)| mask & (1 << i) != 0)
    }

    fn solution(&self, mask: u64, displaced: u128) -> CandidateSolution {
        let members: Vec<&Candidate> = self.members(mask).map(|(_, c)| c).collect();
        CandidateSolution {
            selected: members.iter().map(|c| c.id.clone()).collect(),
            displaced: self
                .installed_ids
                .iter()
                .enumerate()
                .filter(|(i, _)| displaced & (1 << i) != 0)
                .map(|(_, id)| id.clone())
                .collect(),
            total_disk_kib: members.iter().map(|c| c.disk).sum(),
            total_cost: members.iter().map(|c| c.cost).sum(),
        }
    }
}
