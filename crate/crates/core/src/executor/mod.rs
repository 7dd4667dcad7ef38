//! The execution phase: apply an ordered plan through layer managers under
//! a journal, undoing everything if any action fails.

mod journal;
mod manager;
mod plan;

use std::collections::BTreeSet;
use std::fs::{self, File, OpenOptions, TryLockError};
use std::io;
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use chrono::Utc;

pub use journal::{EntryState, Journal, JournalEntry, JOURNAL_FILE, UNDO_DIR};
pub use manager::{Fault, FaultInjector, LayerManager, ManagerError, Managers, SandboxManager};
pub use plan::{depends_on, order_actions, Action, ActionPlan, Verb};

use crate::hash::Sha256Digest;
use crate::model::{UnitId, UnitKind};
use crate::repository::{MetadataCache, RepoError, RepositoryClient};
use crate::resolver::{DependencyTree, NodeOrigin};
use crate::state::{
    apply_change, parse_status, serialize_status, InstallRecord, PlatformStatus, StateError,
    StateStore, StatusChange,
};

pub const LOCK_FILE: &str = ".resolvit.lock";
/// Present after a rollback failed; cleared by a successful recovery.
pub const DIRTY_FILE: &str = ".resolvit.dirty";

#[derive(Debug, thiserror::Error)]
pub enum ExecError {
    #[error("{action} failed: {cause}{}", if *rolled_back { " (rolled back)" } else { "" })]
    ExecutionFailed {
        action: String,
        cause: String,
        rolled_back: bool,
    },
    #[error("platform is locked by another execution ({0})")]
    LockHeld(PathBuf),
    #[error("rollback failed: {reason}; platform flagged dirty, journal kept at {journal}")]
    RollbackFailed { reason: String, journal: PathBuf },
    #[error("an interrupted execution must be recovered first ({0})")]
    RecoveryNeeded(PathBuf),
    #[error("cannot start: {0}")]
    Precondition(String),
    #[error(transparent)]
    State(#[from] StateError),
    #[error("platform I/O: {0}")]
    Io(#[from] io::Error),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ActionReport {
    pub verb: Verb,
    pub unit: UnitId,
    pub duration: Duration,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ExecutionReport {
    pub plan_hash: Sha256Digest,
    pub actions: Vec<ActionReport>,
}

/// Exclusive lock on a platform root, released (and its file removed) on drop.
#[derive(Debug)]
pub struct PlatformLock {
    path: PathBuf,
    _file: File,
}

impl PlatformLock {
    pub fn acquire(root: &Path) -> Result<Self, ExecError> {
        let path = root.join(LOCK_FILE);
        let file = OpenOptions::new()
            .create(true)
            .truncate(false)
            .write(true)
            .open(&path)?;
        match file.try_lock() {
            Ok(()) => Ok(PlatformLock { path, _file: file }),
            Err(TryLockError::WouldBlock) => Err(ExecError::LockHeld(path)),
            Err(TryLockError::Error(e)) => Err(e.into()),
        }
    }
}

impl Drop for PlatformLock {
    fn drop(&mut self) {
        let _ = fs::remove_file(&self.path);
    }
}

/// Applies plans to one platform root.
#[derive(Clone)]
pub struct Executor {
    root: PathBuf,
    managers: Managers,
    store: StateStore,
    cache: MetadataCache,
    multi_version_kinds: BTreeSet<UnitKind>,
}

impl Executor {
    pub fn new(root: impl Into<PathBuf>, cache: MetadataCache) -> Self {
        let root = root.into();
        Executor {
            store: StateStore::in_root(&root),
            root,
            managers: Managers::sandbox(),
            cache,
            multi_version_kinds: BTreeSet::from([UnitKind::Bundle]),
        }
    }

    pub fn with_managers(mut self, managers: Managers) -> Self {
        self.managers = managers;
        self
    }

    pub fn with_multi_version_kinds(mut self, kinds: BTreeSet<UnitKind>) -> Self {
        self.multi_version_kinds = kinds;
        self
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn store(&self) -> &StateStore {
        &self.store
    }

    pub fn is_dirty(&self) -> bool {
        self.root.join(DIRTY_FILE).exists()
    }

    /// Runs every action in order. If one fails, the completed ones are
    /// undone newest first and the platform tree and status file are left as
    /// they were before the call.
    pub fn execute(&self, plan: &ActionPlan) -> Result<ExecutionReport, ExecError> {
        fs::create_dir_all(&self.root)?;
        let _lock = PlatformLock::acquire(&self.root)?;
        if Journal::exists(&self.root) || self.is_dirty() {
            return Err(ExecError::RecoveryNeeded(Journal::path(&self.root)));
        }
        let mut status = self.store.load()?;
        self.check_preconditions(plan, &status)?;

        let mut journal = Journal::open(&self.root)?;
        let mut reports = Vec::with_capacity(plan.len());
        for (i, action) in plan.actions.iter().enumerate() {
            let started = Instant::now();
            if let Err(cause) = self.apply(i + 1, action, &mut status, &mut journal) {
                drop(journal);
                return match self.rollback_locked() {
                    Ok(_) => Err(ExecError::ExecutionFailed {
                        action: action.to_string(),
                        cause,
                        rolled_back: true,
                    }),
                    Err(e) => Err(e),
                };
            }
            reports.push(ActionReport {
                verb: action.verb,
                unit: action.unit.clone(),
                duration: started.elapsed(),
            });
        }
        journal.clear()?;
        Ok(ExecutionReport {
            plan_hash: plan.plan_hash(),
            actions: reports,
        })
    }

    fn check_preconditions(
        &self,
        plan: &ActionPlan,
        status: &PlatformStatus,
    ) -> Result<(), ExecError> {
        for a in &plan.actions {
            if self.managers.get(a.unit.kind).is_none() {
                return Err(ExecError::Precondition(format!(
                    "no layer manager for {}",
                    a.unit.kind.as_str()
                )));
            }
            match a.verb {
                Verb::Install => {
                    let pkg = a.package.as_ref().ok_or_else(|| {
                        ExecError::Precondition(format!("{a}: package not fetched"))
                    })?;
                    let bytes = fs::read(pkg)?;
                    if !a.descriptor.package_sha256.matches(&bytes) {
                        return Err(ExecError::Precondition(format!(
                            "{a}: package does not match its digest"
                        )));
                    }
                }
                Verb::Remove => {
                    if !status.contains(&a.unit) {
                        return Err(StateError::NotInstalled(a.unit.clone()).into());
                    }
                }
            }
        }
        Ok(())
    }

    fn apply(
        &self,
        seq: usize,
        action: &Action,
        status: &mut PlatformStatus,
        journal: &mut Journal,
    ) -> Result<(), String> {
        let manager = self
            .managers
            .get(action.unit.kind)
            .expect("checked before starting");
        let mut entry = JournalEntry {
            seq,
            verb: action.verb,
            unit: action.unit.clone(),
            undo_hash: None,
            state: EntryState::Pending,
        };
        let next = match action.verb {
            Verb::Install => {
                journal.append(&entry).map_err(|e| e.to_string())?;
                let pkg = action.package.as_deref().expect("checked before starting");
                manager
                    .install(&action.unit, pkg, &self.root)
                    .map_err(|e| e.to_string())?;
                let record = InstallRecord::new(action.descriptor.clone(), Utc::now());
                apply_change(
                    status,
                    StatusChange::Install(record),
                    &self.multi_version_kinds,
                )
            }
            Verb::Remove => {
                let record = status
                    .get(&action.unit)
                    .expect("checked before starting")
                    .clone();
                self.retain_for_undo(seq, &record, manager.as_ref())?;
                entry.undo_hash = Some(record.package_sha256.clone());
                journal.append(&entry).map_err(|e| e.to_string())?;
                manager
                    .remove(&action.unit, &self.root)
                    .map_err(|e| e.to_string())?;
                apply_change(
                    status,
                    StatusChange::Remove(action.unit.clone()),
                    &self.multi_version_kinds,
                )
            }
        }
        .map_err(|e| e.to_string())?;
        self.store.save(&next).map_err(|e| e.to_string())?;
        *status = next;
        entry.state = EntryState::Done;
        journal.append(&entry).map_err(|e| e.to_string())
    }

    /// Keeps what is needed to reinstall `record`: its package in the cache
    /// and its status record under the undo directory.
    fn retain_for_undo(
        &self,
        seq: usize,
        record: &InstallRecord,
        manager: &dyn LayerManager,
    ) -> Result<(), String> {
        if self
            .cache
            .verified_package(&record.package_sha256)
            .map_err(|e| e.to_string())?
            .is_none()
        {
            let installed = manager
                .installed_package(&record.id, &self.root)
                .ok_or_else(|| {
                    format!("package of {} is neither cached nor installed", record.id)
                })?;
            self.cache
                .retain_package(&record.package_sha256, &installed)
                .map_err(|e| e.to_string())?;
        }
        let undo = Journal::undo_path(&self.root, seq);
        fs::create_dir_all(undo.parent().expect("undo path has a parent"))
            .map_err(|e| e.to_string())?;
        let one = PlatformStatus::from_records(vec![record.clone()]).map_err(|e| e.to_string())?;
        crate::state::write_atomic(&undo, serialize_status(&one).as_bytes())
            .map_err(|e| e.to_string())
    }

    /// Undoes whatever an interrupted execution left in the journal. A
    /// platform without a journal is left alone. Returns the number of
    /// actions undone.
    pub fn recover(&self) -> Result<usize, ExecError> {
        let _lock = PlatformLock::acquire(&self.root)?;
        let undone = self.rollback_locked()?;
        let _ = fs::remove_file(self.root.join(DIRTY_FILE));
        Ok(undone)
    }

    fn rollback_locked(&self) -> Result<usize, ExecError> {
        let journal_path = Journal::path(&self.root);
        let failed = |reason: String| {
            let _ = fs::write(self.root.join(DIRTY_FILE), format!("{reason}\n"));
            ExecError::RollbackFailed {
                reason,
                journal: journal_path.clone(),
            }
        };
        let entries = Journal::load(&self.root).map_err(|e| failed(e.to_string()))?;
        if entries.is_empty() {
            Journal::discard(&self.root)?;
            return Ok(0);
        }
        let mut journal = Journal::open(&self.root).map_err(|e| failed(e.to_string()))?;
        let mut status = self.store.load().map_err(|e| failed(e.to_string()))?;
        let mut undone = 0;
        for entry in entries
            .iter()
            .rev()
            .filter(|e| e.state != EntryState::Undone)
        {
            self.undo(entry, &mut status)
                .map_err(|e| failed(format!("undoing {} {}: {e}", entry.verb, entry.unit)))?;
            journal
                .append(&JournalEntry {
                    state: EntryState::Undone,
                    ..entry.clone()
                })
                .map_err(|e| failed(e.to_string()))?;
            undone += 1;
        }
        journal.clear().map_err(|e| failed(e.to_string()))?;
        Ok(undone)
    }

    /// Inverse of one journaled action. Safe to repeat, and safe when the
    /// action only got partway.
    fn undo(&self, entry: &JournalEntry, status: &mut PlatformStatus) -> Result<(), String> {
        let manager = self
            .managers
            .get(entry.unit.kind)
            .ok_or_else(|| format!("no layer manager for {}", entry.unit.kind.as_str()))?;
        let next = match entry.verb {
            Verb::Install => {
                manager
                    .remove(&entry.unit, &self.root)
                    .map_err(|e| e.to_string())?;
                if !status.contains(&entry.unit) {
                    return Ok(());
                }
                apply_change(
                    status,
                    StatusChange::Remove(entry.unit.clone()),
                    &self.multi_version_kinds,
                )
            }
            Verb::Remove => {
                let hash = entry
                    .undo_hash
                    .as_ref()
                    .ok_or("removal without undo data")?;
                let pkg = self
                    .cache
                    .verified_package(hash)
                    .map_err(|e| e.to_string())?
                    .ok_or_else(|| format!("package {hash} no longer cached"))?;
                manager
                    .install(&entry.unit, &pkg, &self.root)
                    .map_err(|e| e.to_string())?;
                if status.contains(&entry.unit) {
                    return Ok(());
                }
                let text = fs::read_to_string(Journal::undo_path(&self.root, entry.seq))
                    .map_err(|e| e.to_string())?;
                let saved = parse_status(&text).map_err(|e| e.to_string())?;
                let record = saved
                    .get(&entry.unit)
                    .ok_or("undo data names another unit")?
                    .clone();
                apply_change(
                    status,
                    StatusChange::Install(record),
                    &self.multi_version_kinds,
                )
            }
        }
        .map_err(|e| e.to_string())?;
        self.store.save(&next).map_err(|e| e.to_string())?;
        *status = next;
        Ok(())
    }
}

/// Downloads (or finds in cache) the package of every install action,
/// using the repository each unit was resolved from.
pub fn attach_packages(
    plan: &mut ActionPlan,
    tree: &DependencyTree,
    client: &RepositoryClient,
) -> Result<(), RepoError> {
    for action in plan.actions.iter_mut().filter(|a| a.verb == Verb::Install) {
        let Some(NodeOrigin::Repository { source, entry }) =
            tree.node(&action.unit).map(|n| &n.origin)
        else {
            return Err(RepoError::NotFound(action.unit.to_string()));
        };
        action.package = Some(client.fetch_package(entry, source)?);
    }
    Ok(())
}

/// Runs `plan` on the executor's platform root.
pub fn execute_plan(plan: &ActionPlan, executor: &Executor) -> Result<ExecutionReport, ExecError> {
    executor.execute(plan)
}

/// Rolls back an interrupted execution from its persisted journal.
pub fn rollback(executor: &Executor) -> Result<usize, ExecError> {
    executor.recover()
}
