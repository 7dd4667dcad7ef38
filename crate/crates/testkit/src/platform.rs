//! On-disk platform fixtures: a file repository, a cache and a platform root
//! inside one temporary directory.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use resolvit_core::executor::{
    attach_packages, order_actions, Action, ActionPlan, Executor, Managers, Verb,
};
use resolvit_core::model::{Descriptor, PlatformProfile};
use resolvit_core::repository::{IndexSnapshot, RepositoryClient, RepositorySource};
use resolvit_core::resolver::{
    check, ConflictPolicy, PolicyRegistry, Resolution, ResolutionRequest, ResolveError, Target,
};
use resolvit_core::state::{PlatformStatus, StateStore};
use tempfile::TempDir;

use crate::{write_repository, Universe};

pub struct Platform {
    pub dir: TempDir,
    pub source: RepositorySource,
    pub profile: PlatformProfile,
}

impl Platform {
    pub fn new(units: &[(Descriptor, u64)]) -> Self {
        let dir = tempfile::tempdir().expect("tempdir");
        let source = write_repository(&dir.path().join("repo"), units);
        fs::create_dir_all(dir.path().join("root")).expect("root");
        Platform {
            dir,
            source,
            profile: PlatformProfile::new("x86_64", "linux", 1 << 20),
        }
    }

    /// A platform holding `u`'s installed units (really installed through
    /// the executor) and serving `u`'s repository.
    pub fn from_universe(u: &Universe) -> Self {
        let mut all: Vec<(Descriptor, u64)> = u.repo.clone();
        for r in &u.installed {
            if all.iter().all(|(d, _)| d.id != r.id) {
                all.push((r.descriptor.clone(), 0));
            }
        }
        let mut p = Platform::new(&all);
        p.profile = u.profile.clone();
        if !u.installed.is_empty() {
            let client = p.client();
            let snap = p.snapshot();
            let actions = u
                .installed
                .iter()
                .map(|r| {
                    let entry = snap.entries.iter().find(|e| e.id == r.id).expect("indexed");
                    Action {
                        verb: Verb::Install,
                        unit: r.id.clone(),
                        descriptor: r.descriptor.clone(),
                        package: Some(client.fetch_package(entry, &p.source).expect("package")),
                    }
                })
                .collect();
            p.executor()
                .execute(&ActionPlan { actions })
                .expect("install universe status");
        }
        // Only the universe's repository remains visible.
        write_repository(&p.repo_dir(), &u.repo);
        p
    }

    pub fn root(&self) -> PathBuf {
        self.dir.path().join("root")
    }

    pub fn repo_dir(&self) -> PathBuf {
        self.dir.path().join("repo")
    }

    pub fn client(&self) -> RepositoryClient {
        RepositoryClient::new(self.dir.path().join("cache"))
    }

    pub fn snapshot(&self) -> IndexSnapshot {
        self.client()
            .refresh_index(&self.source)
            .expect("fixture index")
    }

    pub fn status(&self) -> PlatformStatus {
        StateStore::in_root(&self.root()).load().expect("status")
    }

    pub fn executor(&self) -> Executor {
        Executor::new(self.root(), self.client().cache().clone())
            .with_multi_version_kinds(self.profile.multi_version_kinds.clone())
    }

    pub fn executor_with(&self, managers: Managers) -> Executor {
        self.executor().with_managers(managers)
    }

    pub fn resolve(
        &self,
        target: &str,
        conflict: ConflictPolicy,
    ) -> Result<Resolution, ResolveError> {
        self.resolve_target(&target.parse().expect("target"), conflict)
    }

    pub fn resolve_target(
        &self,
        target: &Target,
        conflict: ConflictPolicy,
    ) -> Result<Resolution, ResolveError> {
        let client = self.client();
        let target = target.clone();
        let mut req = ResolutionRequest::new(target, self.profile.clone(), self.status());
        req.conflict_policy = conflict;
        check(
            &req,
            &[self.snapshot()],
            &client,
            &PolicyRegistry::default(),
        )
    }

    /// Resolves `target` and returns the ordered plan with packages fetched.
    pub fn plan(&self, target: &str, conflict: ConflictPolicy) -> Result<ActionPlan, ResolveError> {
        self.plan_target(&target.parse().expect("target"), conflict)
    }

    pub fn plan_target(
        &self,
        target: &Target,
        conflict: ConflictPolicy,
    ) -> Result<ActionPlan, ResolveError> {
        let res = self.resolve_target(target, conflict)?;
        let mut plan = order_actions(&res.solution, &res.tree, &self.status());
        attach_packages(&mut plan, &res.tree, &self.client())?;
        Ok(plan)
    }

    /// Resolves and executes, panicking on any failure.
    pub fn install(&self, target: &str) {
        let plan = self
            .plan(target, ConflictPolicy::Abort)
            .expect("resolvable");
        self.executor().execute(&plan).expect("execution");
    }

    pub fn tree_snapshot(&self) -> BTreeMap<PathBuf, Option<Vec<u8>>> {
        tree_snapshot(&self.root())
    }
}

/// Every path under `root` with file contents (`None` for directories).
pub fn tree_snapshot(root: &Path) -> BTreeMap<PathBuf, Option<Vec<u8>>> {
    let mut out = BTreeMap::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(dir) = stack.pop() {
        let Ok(rd) = fs::read_dir(&dir) else { continue };
        for entry in rd {
            let path = entry.expect("dir entry").path();
            let rel = path.strip_prefix(root).expect("under root").to_path_buf();
            if path.is_dir() {
                out.insert(rel, None);
                stack.push(path);
            } else {
                out.insert(rel, Some(fs::read(&path).expect("readable")));
            }
        }
    }
    out
}
