use std::collections::BTreeMap;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;

use crate::hash::Sha256Digest;
use crate::model::{UnitId, UnitKind};

pub type ManagerError = Box<dyn std::error::Error + Send + Sync>;

/// Performs the physical install and removal for one kind of unit.
/// `install` followed by `remove` must leave the platform tree unchanged.
pub trait LayerManager: Send + Sync {
    fn kind(&self) -> UnitKind;
    fn install(&self, unit: &UnitId, package: &Path, root: &Path) -> Result<(), ManagerError>;
    /// Removing a unit that is not present succeeds.
    fn remove(&self, unit: &UnitId, root: &Path) -> Result<(), ManagerError>;
    /// The installed package file, if the layer keeps one.
    fn installed_package(&self, _unit: &UnitId, _root: &Path) -> Option<PathBuf> {
        None
    }
}

/// Directory-tree stand-in for a real layer: a unit lives in
/// `<root>/<kind>/<name>-<version>/` as a copy of its package and a receipt.
#[derive(Debug, Clone, Copy)]
pub struct SandboxManager {
    kind: UnitKind,
}

impl SandboxManager {
    pub fn new(kind: UnitKind) -> Self {
        SandboxManager { kind }
    }

    pub fn unit_dir(root: &Path, unit: &UnitId) -> PathBuf {
        root.join(unit.kind.as_str())
            .join(format!("{}-{}", unit.name, unit.version))
    }
}

impl LayerManager for SandboxManager {
    fn kind(&self) -> UnitKind {
        self.kind
    }

    fn install(&self, unit: &UnitId, package: &Path, root: &Path) -> Result<(), ManagerError> {
        let dir = Self::unit_dir(root, unit);
        if dir.exists() {
            fs::remove_dir_all(&dir)?;
        }
        fs::create_dir_all(&dir)?;
        let bytes = fs::read(package)?;
        fs::write(dir.join("package"), &bytes)?;
        let receipt = format!(
            "Name: {}\nVersion: {}\nKind: {}\nPackage-SHA256: {}\n",
            unit.name,
            unit.version,
            unit.kind.as_str(),
            Sha256Digest::of(&bytes)
        );
        fs::write(dir.join("receipt"), receipt)?;
        Ok(())
    }

    fn remove(&self, unit: &UnitId, root: &Path) -> Result<(), ManagerError> {
        let dir = Self::unit_dir(root, unit);
        match fs::remove_dir_all(&dir) {
            Err(e)
                if !matches!(
                    e.kind(),
                    io::ErrorKind::NotFound | io::ErrorKind::NotADirectory
                ) =>
            {
                return Err(e.into())
            }
            _ => {}
        }
        // The kind directory only exists while it holds units.
        let kind_dir = root.join(unit.kind.as_str());
        if fs::read_dir(&kind_dir).is_ok_and(|mut d| d.next().is_none()) {
            fs::remove_dir(&kind_dir)?;
        }
        Ok(())
    }

    fn installed_package(&self, unit: &UnitId, root: &Path) -> Option<PathBuf> {
        let p = Self::unit_dir(root, unit).join("package");
        p.exists().then_some(p)
    }
}

/// Layer managers by kind.
#[derive(Clone, Default)]
pub struct Managers {
    by_kind: BTreeMap<UnitKind, Arc<dyn LayerManager>>,
}

impl Managers {
    /// A sandbox manager for every kind.
    pub fn sandbox() -> Self {
        let mut m = Managers::default();
        for kind in UnitKind::ALL {
            m.register(Arc::new(SandboxManager::new(kind)));
        }
        m
    }

    pub fn register(&mut self, manager: Arc<dyn LayerManager>) {
        self.by_kind.insert(manager.kind(), manager);
    }

    pub fn get(&self, kind: UnitKind) -> Option<&Arc<dyn LayerManager>> {
        self.by_kind.get(&kind)
    }

    /// Wraps every manager in a [`FaultInjector`] sharing one call counter.
    pub fn with_fault(&self, fault: Fault) -> (Self, Arc<AtomicUsize>) {
        let counter = Arc::new(AtomicUsize::new(0));
        let mut out = Managers::default();
        for m in self.by_kind.values() {
            out.register(Arc::new(FaultInjector {
                inner: m.clone(),
                calls: counter.clone(),
                fault,
            }));
        }
        (out, counter)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Fault {
    /// The `n`th call (1-based) fails without touching the platform.
    FailAt(usize),
    /// The `n`th call does its work and then panics before returning,
    /// standing in for the process dying mid-action.
    CrashAt(usize),
    /// The `n`th call fails, and so does every later call.
    FailFrom(usize),
}

/// Test double counting install and remove calls across all kinds.
pub struct FaultInjector {
    inner: Arc<dyn LayerManager>,
    calls: Arc<AtomicUsize>,
    fault: Fault,
}

impl FaultInjector {
    fn tick(&self) -> Result<bool, ManagerError> {
        let n = self.calls.fetch_add(1, Ordering::SeqCst) + 1;
        match self.fault {
            Fault::FailAt(k) if n == k => Err(format!("injected failure at call {n}").into()),
            Fault::FailFrom(k) if n >= k => Err(format!("injected failure at call {n}").into()),
            Fault::CrashAt(k) => Ok(n == k),
            _ => Ok(false),
        }
    }
}

impl LayerManager for FaultInjector {
    fn kind(&self) -> UnitKind {
        self.inner.kind()
    }

    fn install(&self, unit: &UnitId, package: &Path, root: &Path) -> Result<(), ManagerError> {
        let crash = self.tick()?;
        self.inner.install(unit, package, root)?;
        if crash {
            panic!("simulated crash while installing {unit}");
        }
        Ok(())
    }

    fn remove(&self, unit: &UnitId, root: &Path) -> Result<(), ManagerError> {
        let crash = self.tick()?;
        self.inner.remove(unit, root)?;
        if crash {
            panic!("simulated crash while removing {unit}");
        }
        Ok(())
    }

    fn installed_package(&self, unit: &UnitId, root: &Path) -> Option<PathBuf> {
        self.inner.installed_package(unit, root)
    }
}
