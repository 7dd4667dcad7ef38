//! The check phase: dependency tree, solution enumeration, policy selection
//! and conflict planning. Nothing here touches the platform.

mod conflict;
mod context;
mod enumerate;
mod policy;
mod tree;

use std::fmt;
use std::str::FromStr;

pub use conflict::{
    broken_dependents, plan_conflict_resolution, BrokenDependency, Conflict, ConflictCause,
    ConflictResolution,
};
pub use context::{check_context, ContextViolation};
pub use enumerate::{
    enumerate_solutions, enumerate_solutions_with, CandidateSolution, Parallelism, MAX_CANDIDATES,
    MAX_RELEVANT_INSTALLED,
};
pub use policy::{
    select_solution, MinCost, MinimalUnits, NewestVersions, PolicyRegistry, SelectionPolicy,
    DEFAULT_POLICY,
};
pub use tree::{build_dependency_tree, DependencyTree, NodeOrigin, TreeEdge, TreeNode};

use crate::codec::IndexEntry;
use crate::model::{Descriptor, GroupOp, ModelError, PlatformProfile, UnitId, VersionRange};
use crate::repository::{IndexSnapshot, RepoError, RepositoryClient, RepositorySource};
use crate::state::PlatformStatus;

/// What to deploy: any provider of a service, or one exact unit.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Target {
    Service { name: String, range: VersionRange },
    Unit(UnitId),
}

impl FromStr for Target {
    type Err = ModelError;

    /// `svc:<service>[@<range>]` or `unit:<name>@<version>:<kind>`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if let Some(rest) = s.strip_prefix("svc:") {
            let (name, range) = match rest.split_once('@') {
                Some((name, range)) => (name, range.parse()?),
                None => (rest, VersionRange::Any),
            };
            if !crate::model::is_token(name) {
                return Err(ModelError::invalid("target", s));
            }
            Ok(Target::Service {
                name: name.to_string(),
                range,
            })
        } else if let Some(rest) = s.strip_prefix("unit:") {
            Ok(Target::Unit(rest.parse()?))
        } else {
            Err(ModelError::invalid("target", s))
        }
    }
}

impl fmt::Display for Target {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Target::Service {
                name,
                range: VersionRange::Any,
            } => write!(f, "svc:{name}"),
            Target::Service { name, range } => write!(f, "svc:{name}@{range}"),
            Target::Unit(id) => write!(f, "unit:{id}"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ConflictPolicy {
    #[default]
    Abort,
    Replace,
}

impl ConflictPolicy {
    pub fn as_str(self) -> &'static str {
        match self {
            ConflictPolicy::Abort => "abort",
            ConflictPolicy::Replace => "replace",
        }
    }
}

impl FromStr for ConflictPolicy {
    type Err = ModelError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "abort" => Ok(ConflictPolicy::Abort),
            "replace" => Ok(ConflictPolicy::Replace),
            _ => Err(ModelError::invalid("conflict policy", s)),
        }
    }
}

impl fmt::Display for ConflictPolicy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone)]
pub struct ResolutionRequest {
    pub target: Target,
    pub profile: PlatformProfile,
    pub status: PlatformStatus,
    pub policy: String,
    pub conflict_policy: ConflictPolicy,
}

impl ResolutionRequest {
    pub fn new(target: Target, profile: PlatformProfile, status: PlatformStatus) -> Self {
        ResolutionRequest {
            target,
            profile,
            status,
            policy: DEFAULT_POLICY.to_string(),
            conflict_policy: ConflictPolicy::Abort,
        }
    }
}

/// Outcome of a successful check.
#[derive(Debug, Clone)]
pub struct Resolution {
    pub tree: DependencyTree,
    pub solution: CandidateSolution,
    /// Conflicts settled by removing installed units (replace policy only).
    pub conflicts: Vec<Conflict>,
    /// Number of valid solutions the policy chose from.
    pub considered: usize,
}

/// Source of descriptors for index entries during tree building.
pub trait DescriptorFetcher: Sync {
    fn fetch_descriptor(
        &self,
        entry: &IndexEntry,
        source: &RepositorySource,
    ) -> Result<Descriptor, RepoError>;
}

impl DescriptorFetcher for RepositoryClient {
    fn fetch_descriptor(
        &self,
        entry: &IndexEntry,
        source: &RepositorySource,
    ) -> Result<Descriptor, RepoError> {
        RepositoryClient::fetch_descriptor(self, entry, source)
    }
}

#[derive(Debug, thiserror::Error)]
pub enum ResolveError {
    #[error("no provider found for {endpoint}{}", required_by.as_ref().map(|s| format!(" (required by {s})")).unwrap_or_default())]
    NoProviderFound {
        required_by: Option<UnitId>,
        endpoint: String,
    },
    #[error("no solution: {}", diagnostics.join("; "))]
    NoSolution { diagnostics: Vec<String> },
    #[error("unknown selection policy `{0}`")]
    UnknownPolicy(String),
    #[error("conflict: {}", .0.iter().map(ToString::to_string).collect::<Vec<_>>().join("; "))]
    Conflict(Vec<Conflict>),
    #[error(transparent)]
    Repository(#[from] RepoError),
    #[error("{candidates} candidate units exceed the enumeration limit of {limit}")]
    UniverseTooLarge { candidates: usize, limit: usize },
}

impl ResolveError {
    /// Human-readable lines explaining why resolution failed.
    pub fn diagnostics(&self) -> Vec<String> {
        match self {
            ResolveError::NoSolution { diagnostics } => diagnostics.clone(),
            ResolveError::Conflict(cs) => cs.iter().map(ToString::to_string).collect(),
            other => vec![other.to_string()],
        }
    }
}

/// Runs the whole check phase: tree, solutions, selection, conflicts.
///
/// Solutions whose conflicts the conflict policy can settle are preferred.
/// If there are none, the policy's favourite among all solutions is
/// reported through its conflicts.
pub fn check(
    req: &ResolutionRequest,
    snapshots: &[IndexSnapshot],
    fetcher: &dyn DescriptorFetcher,
    policies: &PolicyRegistry,
) -> Result<Resolution, ResolveError> {
    check_with(req, snapshots, fetcher, policies, Parallelism::default())
}

pub fn check_with(
    req: &ResolutionRequest,
    snapshots: &[IndexSnapshot],
    fetcher: &dyn DescriptorFetcher,
    policies: &PolicyRegistry,
    mode: Parallelism,
) -> Result<Resolution, ResolveError> {
    if policies.get(&req.policy).is_none() {
        return Err(ResolveError::UnknownPolicy(req.policy.clone()));
    }
    let tree = build_dependency_tree(req, snapshots, fetcher)?;
    let solutions = enumerate_solutions_with(&tree, &req.status, &req.profile, mode)?;
    if solutions.is_empty() {
        return Err(ResolveError::NoSolution {
            diagnostics: diagnose(&tree, &req.status),
        });
    }
    let mut viable = Vec::new();
    for s in &solutions {
        if let Ok(conflicts) =
            plan_conflict_resolution(s, &tree, &req.status, &req.profile, req.conflict_policy)
        {
            viable.push((s.clone(), conflicts));
        }
    }
    if viable.is_empty() {
        let chosen = policies.select(&solutions, &req.policy, &tree)?;
        return match plan_conflict_resolution(
            &chosen,
            &tree,
            &req.status,
            &req.profile,
            req.conflict_policy,
        ) {
            Err(e) => Err(e),
            Ok(_) => unreachable!("solution was judged unviable"),
        };
    }
    let candidates: Vec<CandidateSolution> = viable.iter().map(|(s, _)| s.clone()).collect();
    let chosen = policies.select(&candidates, &req.policy, &tree)?;
    let conflicts = viable
        .into_iter()
        .find(|(s, _)| *s == chosen)
        .map(|(_, c)| c)
        .unwrap_or_default();
    Ok(Resolution {
        tree,
        solution: chosen,
        conflicts,
        considered: solutions.len(),
    })
}

/// Explains an empty solution set: groups no combination of candidates can
/// satisfy, units excluded by context, and aggregate limits.
fn diagnose(tree: &DependencyTree, status: &PlatformStatus) -> Vec<String> {
    let usable = |id: &UnitId| {
        tree.node(id)
            .is_some_and(|n| n.is_installed() || (n.expanded && n.context_violations.is_empty()))
    };
    let mut out = Vec::new();
    for node in tree.nodes.values() {
        for v in &node.context_violations {
            out.push(format!("{} excluded: {v}", node.id));
        }
    }
    for node in tree
        .nodes
        .values()
        .filter(|n| n.expanded && n.context_violations.is_empty())
    {
        for (gi, group) in node.descriptor.groups.iter().enumerate() {
            if group.op == GroupOp::Not {
                continue;
            }
            let available: Vec<bool> = (0..group.endpoints.len())
                .map(|ei| {
                    tree.edges
                        .iter()
                        .find(|e| e.source == node.id && e.group == gi && e.endpoint == ei)
                        .is_some_and(|e| e.candidates.iter().any(usable))
                })
                .collect();
            let feasible = match group.op {
                GroupOp::And => available.iter().all(|a| *a),
                GroupOp::Or => {
                    available.iter().filter(|a| **a).count() >= group.cardinality as usize
                }
                GroupOp::Xor => available.iter().any(|a| *a),
                GroupOp::Not => true,
            };
            if !feasible {
                let missing: Vec<String> = group
                    .endpoints
                    .iter()
                    .zip(&available)
                    .filter(|(_, a)| !**a)
                    .map(|(e, _)| e.to_string())
                    .collect();
                out.push(format!(
                    "{} group {} ({}) unsatisfiable: no usable provider for {}",
                    node.id,
                    gi + 1,
                    group.op.as_str(),
                    missing.join(", ")
                ));
            }
        }
    }
    if out.is_empty() {
        out.push(format!(
            "no combination of {} candidate units satisfies every group, exclusion, slot and disk constraint{}",
            tree.nodes.values().filter(|n| !n.is_installed()).count(),
            if status.is_empty() { "" } else { " against the installed units" }
        ));
    }
    out
}
