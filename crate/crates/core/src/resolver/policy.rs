//! Selection policies: total preference orders over candidate solutions.

use std::cmp::Ordering;
use std::collections::BTreeMap;
use std::sync::Arc;

use super::enumerate::CandidateSolution;
use super::tree::DependencyTree;
use super::ResolveError;
use crate::model::Version;

pub const DEFAULT_POLICY: &str = "minimal-units";

/// A named preference order. `compare` returns `Less` when `a` is preferred.
/// Implementations must be total so that selection is independent of the
/// order solutions are presented in.
pub trait SelectionPolicy: Send + Sync {
    fn name(&self) -> &str;
    fn compare(
        &self,
        a: &CandidateSolution,
        b: &CandidateSolution,
        tree: &DependencyTree,
    ) -> Ordering;
}

/// Versions of the selected units in unit-id order.
fn version_vector(s: &CandidateSolution) -> Vec<&Version> {
    s.selected.iter().map(|id| &id.version).collect()
}

fn priority_sum(s: &CandidateSolution, tree: &DependencyTree) -> u64 {
    s.selected
        .iter()
        .filter_map(|id| tree.descriptor(id))
        .map(|d| u64::from(d.priority))
        .sum()
}

fn canonical(a: &CandidateSolution, b: &CandidateSolution) -> Ordering {
    a.canonical_encoding().cmp(&b.canonical_encoding())
}

/// Fewest units, then least disk, newest versions, highest priority.
pub struct MinimalUnits;

impl SelectionPolicy for MinimalUnits {
    fn name(&self) -> &str {
        "minimal-units"
    }

    fn compare(
        &self,
        a: &CandidateSolution,
        b: &CandidateSolution,
        tree: &DependencyTree,
    ) -> Ordering {
        a.selected
            .len()
            .cmp(&b.selected.len())
            .then_with(|| a.total_disk_kib.cmp(&b.total_disk_kib))
            .then_with(|| version_vector(b).cmp(&version_vector(a)))
            .then_with(|| priority_sum(b, tree).cmp(&priority_sum(a, tree)))
            .then_with(|| canonical(a, b))
    }
}

pub struct NewestVersions;

impl SelectionPolicy for NewestVersions {
    fn name(&self) -> &str {
        "newest-versions"
    }

    fn compare(
        &self,
        a: &CandidateSolution,
        b: &CandidateSolution,
        _tree: &DependencyTree,
    ) -> Ordering {
        version_vector(b)
            .cmp(&version_vector(a))
            .then_with(|| a.selected.len().cmp(&b.selected.len()))
            .then_with(|| canonical(a, b))
    }
}

pub struct MinCost;

impl SelectionPolicy for MinCost {
    fn name(&self) -> &str {
        "min-cost"
    }

    fn compare(
        &self,
        a: &CandidateSolution,
        b: &CandidateSolution,
        tree: &DependencyTree,
    ) -> Ordering {
        a.total_cost
            .cmp(&b.total_cost)
            .then_with(|| MinimalUnits.compare(a, b, tree))
    }
}

/// Policies by name. Registering a new policy never changes what the
/// existing ones choose.
#[derive(Clone)]
pub struct PolicyRegistry {
    policies: BTreeMap<String, Arc<dyn SelectionPolicy>>,
}

impl Default for PolicyRegistry {
    fn default() -> Self {
        let mut r = PolicyRegistry {
            policies: BTreeMap::new(),
        };
        r.register(Arc::new(MinimalUnits));
        r.register(Arc::new(NewestVersions));
        r.register(Arc::new(MinCost));
        r
    }
}

impl PolicyRegistry {
    /// Adds or replaces the policy under its own name.
    pub fn register(&mut self, policy: Arc<dyn SelectionPolicy>) {
        self.policies.insert(policy.name().to_string(), policy);
    }

    pub fn get(&self, name: &str) -> Option<&Arc<dyn SelectionPolicy>> {
        self.policies.get(name)
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.policies.keys().map(String::as_str)
    }

    pub fn select(
        &self,
        solutions: &[CandidateSolution],
        policy: &str,
        tree: &DependencyTree,
    ) -> Result<CandidateSolution, ResolveError> {
        let p = self
            .get(policy)
            .ok_or_else(|| ResolveError::UnknownPolicy(policy.to_string()))?;
        solutions
            .iter()
            .min_by(|a, b| p.compare(a, b, tree))
            .cloned()
            .ok_or_else(|| ResolveError::NoSolution {
                diagnostics: vec!["no candidate solutions to select from".into()],
            })
    }
}

/// Picks one solution with one of the built-in policies.
pub fn select_solution(
    solutions: &[CandidateSolution],
    policy: &str,
    tree: &DependencyTree,
) -> Result<CandidateSolution, ResolveError> {
    PolicyRegistry::default().select(solutions, policy, tree)
}
