use std::collections::{BTreeMap, BTreeSet, VecDeque};

use super::context::{check_context, ContextViolation};
use super::{DescriptorFetcher, ResolutionRequest, ResolveError, Target};
use crate::codec::IndexEntry;
use crate::model::{Descriptor, GroupOp, UnitId};
use crate::repository::{find_providers, IndexSnapshot, Provider, RepositorySource};
use crate::state::{query_installed, PlatformStatus};

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum NodeOrigin {
    Repository {
        source: RepositorySource,
        entry: IndexEntry,
    },
    Installed,
}

#[derive(Debug, Clone)]
pub struct TreeNode {
    pub id: UnitId,
    pub descriptor: Descriptor,
    pub origin: NodeOrigin,
    pub context_violations: Vec<ContextViolation>,
    /// Dependencies were read and followed. False for installed units, units
    /// reached only through NOT endpoints and context-violating units.
    pub expanded: bool,
}

impl TreeNode {
    pub fn is_installed(&self) -> bool {
        self.origin == NodeOrigin::Installed
    }

    /// Repository-assigned cost; installed units cost nothing.
    pub fn cost(&self) -> u64 {
        match &self.origin {
            NodeOrigin::Repository { entry, .. } => entry.cost,
            NodeOrigin::Installed => 0,
        }
    }
}

/// Endpoint `endpoint` of group `group` on `source`, with the units found for it.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TreeEdge {
    pub source: UnitId,
    pub group: usize,
    pub endpoint: usize,
    pub op: GroupOp,
    /// Endpoint already satisfied by installed units; repositories were not searched.
    pub satisfied_by_installed: bool,
    pub candidates: Vec<UnitId>,
}

#[derive(Debug, Clone)]
pub struct DependencyTree {
    pub target: Target,
    pub nodes: BTreeMap<UnitId, TreeNode>,
    pub roots: Vec<UnitId>,
    pub edges: Vec<TreeEdge>,
    /// The target is already provided by an installed unit; nothing to do.
    pub satisfied: bool,
}

impl DependencyTree {
    pub fn node(&self, id: &UnitId) -> Option<&TreeNode> {
        self.nodes.get(id)
    }

    pub fn descriptor(&self, id: &UnitId) -> Option<&Descriptor> {
        self.nodes.get(id).map(|n| &n.descriptor)
    }

    pub fn edges_from<'a>(&'a self, id: &'a UnitId) -> impl Iterator<Item = &'a TreeEdge> + 'a {
        self.edges.iter().filter(move |e| e.source == *id)
    }
}

/// Check phase, steps one to five: starting from the request target, read
/// each candidate's descriptor, skip what is already installed and current,
/// and follow AND/OR/XOR endpoints to their providers. NOT endpoints are
/// recorded with their candidates but never followed. Each unit is expanded
/// at most once, so cyclic dependencies terminate.
pub fn build_dependency_tree(
    req: &ResolutionRequest,
    snapshots: &[IndexSnapshot],
    fetcher: &dyn DescriptorFetcher,
) -> Result<DependencyTree, ResolveError> {
    let status = &req.status;
    let mut builder = Builder {
        status,
        fetcher,
        nodes: BTreeMap::new(),
        edges: Vec::new(),
    };

    let root_entries: Vec<Provider<'_>> = match &req.target {
        Target::Service { name, range } => {
            if let Some(record) = query_installed(status, name, range).first() {
                return Ok(builder.satisfied(req, &record.id));
            }
            find_providers(name, range, snapshots)
        }
        Target::Unit(id) => {
            if status.contains(id) {
                return Ok(builder.satisfied(req, id));
            }
            snapshots
                .iter()
                .find_map(|s| {
                    s.entries
                        .iter()
                        .find(|e| e.id == *id)
                        .map(|entry| Provider {
                            entry,
                            source: &s.source,
                        })
                })
                .into_iter()
                .collect()
        }
    };
    if root_entries.is_empty() {
        return Err(ResolveError::NoProviderFound {
            required_by: None,
            endpoint: req.target.to_string(),
        });
    }

    let mut roots = Vec::new();
    let mut queue = VecDeque::new();
    for p in root_entries {
        let id = builder.add_repository_node(p, &req.profile)?;
        roots.push(id.clone());
        queue.push_back(id);
    }

    let mut expanded = BTreeSet::new();
    while let Some(id) = queue.pop_front() {
        let node = &builder.nodes[&id];
        if node.is_installed()
            || !node.context_violations.is_empty()
            || !expanded.insert(id.clone())
        {
            continue;
        }
        let groups = node.descriptor.groups.clone();
        builder.nodes.get_mut(&id).expect("node present").expanded = true;
        for (gi, group) in groups.iter().enumerate() {
            for (ei, endpoint) in group.endpoints.iter().enumerate() {
                let installed: Vec<UnitId> =
                    query_installed(status, &endpoint.service, &endpoint.range)
                        .into_iter()
                        .map(|r| r.id.clone())
                        .collect();
                for iid in &installed {
                    builder.add_installed_node(iid);
                }
                let pruned = group.op != GroupOp::Not && !installed.is_empty();
                let mut candidates = installed;
                if !pruned {
                    let ordered = hint_first(snapshots, endpoint.repository.as_ref());
                    for p in find_providers(&endpoint.service, &endpoint.range, ordered) {
                        let cid = if status.contains(&p.entry.id) {
                            builder.add_installed_node(&p.entry.id);
                            p.entry.id.clone()
                        } else {
                            let cid = builder.add_repository_node(p, &req.profile)?;
                            if group.op != GroupOp::Not {
                                queue.push_back(cid.clone());
                            }
                            cid
                        };
                        if !candidates.contains(&cid) {
                            candidates.push(cid);
                        }
                    }
                }
                builder.edges.push(TreeEdge {
                    source: id.clone(),
                    group: gi,
                    endpoint: ei,
                    op: group.op,
                    satisfied_by_installed: pruned,
                    candidates,
                });
            }
        }
    }

    let tree = DependencyTree {
        target: req.target.clone(),
        nodes: builder.nodes,
        roots,
        edges: builder.edges,
        satisfied: false,
    };
    check_mandatory_chain(&tree)?;
    Ok(tree)
}

/// Snapshots reordered so a repository named by an endpoint hint is searched
/// first. Hints naming unknown repositories are ignored.
fn hint_first<'a>(
    snapshots: &'a [IndexSnapshot],
    hint: Option<&url::Url>,
) -> Vec<&'a IndexSnapshot> {
    let mut ordered: Vec<&IndexSnapshot> = snapshots.iter().collect();
    if let Some(url) = hint {
        if let Some(pos) = ordered.iter().position(|s| s.source.is(url)) {
            let hinted = ordered.remove(pos);
            ordered.insert(0, hinted);
        }
    }
    ordered
}

/// Fails with `NoProviderFound` when a unit that every solution must contain
/// has an AND endpoint nobody provides. A unit is mandatory when it is the
/// only root candidate, or the only candidate of an AND endpoint of a
/// mandatory unit.
fn check_mandatory_chain(tree: &DependencyTree) -> Result<(), ResolveError> {
    if tree.roots.len() != 1 {
        return Ok(());
    }
    let mut mandatory = vec![tree.roots[0].clone()];
    let mut seen: BTreeSet<UnitId> = mandatory.iter().cloned().collect();
    while let Some(id) = mandatory.pop() {
        for edge in tree.edges_from(&id).filter(|e| e.op == GroupOp::And) {
            match edge.candidates.as_slice() {
                [] => {
                    let endpoint =
                        &tree.nodes[&id].descriptor.groups[edge.group].endpoints[edge.endpoint];
                    return Err(ResolveError::NoProviderFound {
                        required_by: Some(id.clone()),
                        endpoint: endpoint.to_string(),
                    });
                }
                [only] if !tree.nodes[only].is_installed() && seen.insert(only.clone()) => {
                    mandatory.push(only.clone());
                }
                _ => {}
            }
        }
    }
    Ok(())
}

struct Builder<'a> {
    status: &'a PlatformStatus,
    fetcher: &'a dyn DescriptorFetcher,
    nodes: BTreeMap<UnitId, TreeNode>,
    edges: Vec<TreeEdge>,
}

impl Builder<'_> {
    fn satisfied(&mut self, req: &ResolutionRequest, id: &UnitId) -> DependencyTree {
        self.add_installed_node(id);
        DependencyTree {
            target: req.target.clone(),
            nodes: std::mem::take(&mut self.nodes),
            roots: vec![id.clone()],
            edges: Vec::new(),
            satisfied: true,
        }
    }

    fn add_installed_node(&mut self, id: &UnitId) {
        if self.nodes.contains_key(id) {
            return;
        }
        let record = self.status.get(id).expect("installed unit has a record");
        self.nodes.insert(
            id.clone(),
            TreeNode {
                id: id.clone(),
                descriptor: record.descriptor.clone(),
                origin: NodeOrigin::Installed,
                context_violations: Vec::new(),
                expanded: false,
            },
        );
    }

    fn add_repository_node(
        &mut self,
        p: Provider<'_>,
        profile: &crate::model::PlatformProfile,
    ) -> Result<UnitId, ResolveError> {
        let id = p.entry.id.clone();
        if !self.nodes.contains_key(&id) {
            let descriptor = self.fetcher.fetch_descriptor(p.entry, p.source)?;
            let context_violations = check_context(&descriptor, profile);
            self.nodes.insert(
                id.clone(),
                TreeNode {
                    id: id.clone(),
                    descriptor,
                    origin: NodeOrigin::Repository {
                        source: p.source.clone(),
                        entry: p.entry.clone(),
                    },
                    context_violations,
                    expanded: false,
                },
            );
        }
        Ok(id)
    }
}
