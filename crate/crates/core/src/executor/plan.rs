use std::cmp::Ordering;
use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use crate::hash::Sha256Digest;
use crate::model::{Descriptor, GroupOp, ModelError, UnitId};
use crate::resolver::{CandidateSolution, DependencyTree};
use crate::state::PlatformStatus;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Verb {
    Install,
    Remove,
}

impl Verb {
    pub fn as_str(self) -> &'static str {
        match self {
            Verb::Install => "install",
            Verb::Remove => "remove",
        }
    }
}

impl fmt::Display for Verb {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Verb {
    type Err = ModelError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "install" => Ok(Verb::Install),
            "remove" => Ok(Verb::Remove),
            _ => Err(ModelError::invalid("verb", s)),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Action {
    pub verb: Verb,
    pub unit: UnitId,
    /// The unit's descriptor: from the repository for installs, from the
    /// status record for removals.
    pub descriptor: Descriptor,
    /// Verified package in the cache. Set for installs before execution.
    pub package: Option<PathBuf>,
}

impl fmt::Display for Action {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} {}", self.verb, self.unit)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ActionPlan {
    pub actions: Vec<Action>,
}

impl ActionPlan {
    pub fn is_empty(&self) -> bool {
        self.actions.is_empty()
    }

    pub fn len(&self) -> usize {
        self.actions.len()
    }

    /// One line per action: `VERB<TAB>NAME<TAB>VERSION<TAB>KIND<LF>`.
    pub fn encode(&self) -> String {
        self.actions
            .iter()
            .map(|a| {
                format!(
                    "{}\t{}\t{}\t{}\n",
                    a.verb,
                    a.unit.name,
                    a.unit.version,
                    a.unit.kind.as_str()
                )
            })
            .collect()
    }

    pub fn plan_hash(&self) -> Sha256Digest {
        Sha256Digest::of(self.encode().as_bytes())
    }
}

/// Orders a solution into a plan.
///
/// Displaced units are removed first, dependents before the units they
/// depend on. New units are then installed leaves first: a unit comes after
/// every selected unit that satisfies one of its AND/OR/XOR endpoints. Among
/// ready units the smallest name wins, then the highest version. Members of
/// a dependency cycle are installed in that same order once nothing outside
/// the cycle is ready.
pub fn order_actions(
    solution: &CandidateSolution,
    tree: &DependencyTree,
    status: &PlatformStatus,
) -> ActionPlan {
    let removed: Vec<&Descriptor> = solution
        .displaced
        .iter()
        .filter_map(|id| status.get(id).map(|r| &r.descriptor))
        .collect();
    let installed: Vec<&Descriptor> = solution
        .selected
        .iter()
        .filter_map(|id| tree.descriptor(id))
        .collect();

    let mut actions = Vec::new();
    // Removing in reverse dependency order is installing order, reversed.
    let mut removals = topological(&removed);
    removals.reverse();
    for d in removals {
        actions.push(Action {
            verb: Verb::Remove,
            unit: d.id.clone(),
            descriptor: d.clone(),
            package: None,
        });
    }
    for d in topological(&installed) {
        actions.push(Action {
            verb: Verb::Install,
            unit: d.id.clone(),
            descriptor: d.clone(),
            package: None,
        });
    }
    ActionPlan { actions }
}

/// Install order: name ascending, version descending.
fn install_rank(a: &UnitId, b: &UnitId) -> Ordering {
    a.name
        .cmp(&b.name)
        .then_with(|| b.version.cmp(&a.version))
        .then_with(|| a.kind.cmp(&b.kind))
}

/// `u` depends on `w` when `w` satisfies an AND/OR/XOR endpoint of `u`.
pub fn depends_on(u: &Descriptor, w: &Descriptor) -> bool {
    u.id != w.id
        && u.groups
            .iter()
            .filter(|g| g.op != GroupOp::Not)
            .flat_map(|g| &g.endpoints)
            .any(|e| w.provides_within(&e.service, &e.range))
}

/// Kahn's algorithm, leaves first, breaking ties by `install_rank`. When
/// only cycles remain, the best-ranked unit of a cycle with no dependencies
/// outside itself goes next.
fn topological<'a>(units: &[&'a Descriptor]) -> Vec<&'a Descriptor> {
    let mut pending: BTreeMap<usize, BTreeSet<usize>> = (0..units.len())
        .map(|i| {
            let deps = (0..units.len())
                .filter(|&j| depends_on(units[i], units[j]))
                .collect();
            (i, deps)
        })
        .collect();
    let mut out = Vec::with_capacity(units.len());
    while !pending.is_empty() {
        let best = |candidates: &mut dyn Iterator<Item = usize>| {
            candidates.min_by(|a, b| install_rank(&units[*a].id, &units[*b].id))
        };
        let next = best(
            &mut pending
                .iter()
                .filter(|(_, d)| d.is_empty())
                .map(|(i, _)| *i),
        )
        .or_else(|| {
            let closed = |i: usize| pending[&i].iter().all(|&d| reaches(&pending, d, i));
            best(&mut pending.keys().copied().filter(|&i| closed(i)))
        })
        .expect("some cycle has no outside dependencies");
        pending.remove(&next);
        for deps in pending.values_mut() {
            deps.remove(&next);
        }
        out.push(units[next]);
    }
    out
}

fn reaches(graph: &BTreeMap<usize, BTreeSet<usize>>, from: usize, to: usize) -> bool {
    let mut seen = BTreeSet::new();
    let mut stack = vec![from];
    while let Some(n) = stack.pop() {
        if n == to {
            return true;
        }
        if seen.insert(n) {
            stack.extend(graph[&n].iter().copied());
        }
    }
    false
}
