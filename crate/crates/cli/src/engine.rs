//! Check and execution paths shared by the commands and the service.

use std::fmt;

use resolvit_core::executor::{order_actions, ActionPlan, ExecError};
use resolvit_core::model::PlatformProfile;
use resolvit_core::repository::{IndexSnapshot, RepoError, RepositoryClient, RepositorySource};
use resolvit_core::resolver::{
    check, ConflictPolicy, PolicyRegistry, Resolution, ResolutionRequest, ResolveError, Target,
};
use resolvit_core::state::{PlatformStatus, StateError};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_NO_SOLUTION: i32 = 3;
pub const EXIT_CONFLICT: i32 = 4;
pub const EXIT_EXECUTION: i32 = 5;
pub const EXIT_REPOSITORY: i32 = 6;

/// An error path of the engine with its exit code.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Failure {
    pub code: i32,
    pub message: String,
    /// One line per unsatisfiable group, conflict or dependent.
    pub details: Vec<String>,
}

impl Failure {
    pub fn new(code: i32, message: impl Into<String>) -> Self {
        Failure {
            code,
            message: message.into(),
            details: Vec::new(),
        }
    }

    pub fn usage(message: impl Into<String>) -> Self {
        Failure::new(EXIT_USAGE, message)
    }

    pub fn with_details(mut self, details: Vec<String>) -> Self {
        self.details = details;
        self
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)?;
        for d in &self.details {
            write!(f, "\n  {d}")?;
        }
        Ok(())
    }
}

impl From<ResolveError> for Failure {
    fn from(e: ResolveError) -> Self {
        let code = match &e {
            ResolveError::UnknownPolicy(_) => EXIT_USAGE,
            ResolveError::NoProviderFound { .. }
            | ResolveError::NoSolution { .. }
            | ResolveError::UniverseTooLarge { .. } => EXIT_NO_SOLUTION,
            ResolveError::Conflict(_) => EXIT_CONFLICT,
            ResolveError::Repository(_) => EXIT_REPOSITORY,
        };
        let message = match &e {
            ResolveError::NoSolution { .. } => "no solution".to_string(),
            ResolveError::Conflict(_) => "conflict with installed units".to_string(),
            other => other.to_string(),
        };
        let details = match &e {
            ResolveError::NoSolution { .. }
            | ResolveError::Conflict(_)
            | ResolveError::NoProviderFound { .. } => e.diagnostics(),
            _ => Vec::new(),
        };
        Failure {
            code,
            message,
            details,
        }
    }
}

impl From<RepoError> for Failure {
    fn from(e: RepoError) -> Self {
        Failure::new(EXIT_REPOSITORY, e.to_string())
    }
}

impl From<StateError> for Failure {
    fn from(e: StateError) -> Self {
        match e {
            StateError::NotInstalled(_) => Failure::usage(e.to_string()),
            other => Failure::new(EXIT_REPOSITORY, other.to_string()),
        }
    }
}

impl From<ExecError> for Failure {
    fn from(e: ExecError) -> Self {
        match e {
            ExecError::State(s) => s.into(),
            other => Failure::new(EXIT_EXECUTION, other.to_string()),
        }
    }
}

/// Refreshes every repository. Warnings name snapshots served stale from
/// the cache; any repository failing with a cold cache is an error.
pub fn refresh_all(
    client: &RepositoryClient,
    repositories: &[RepositorySource],
) -> Result<(Vec<IndexSnapshot>, Vec<String>), Failure> {
    if repositories.is_empty() {
        return Err(Failure::usage(
            "no repositories configured (use --repo or RESOLVIT_REPOS)",
        ));
    }
    let mut snapshots = Vec::new();
    let mut warnings = Vec::new();
    for source in repositories {
        let snap = client.refresh_index(source)?;
        if snap.stale {
            warnings.push(format!(
                "{source} unreachable; using cached index from {}",
                snap.fetched_at.to_rfc3339()
            ));
        }
        snapshots.push(snap);
    }
    Ok((snapshots, warnings))
}

#[derive(Debug, Clone)]
pub struct CheckRequest {
    pub target: Target,
    pub profile: PlatformProfile,
    pub status: PlatformStatus,
    pub policy: String,
    pub conflict_policy: ConflictPolicy,
}

impl CheckRequest {
    fn resolution_request(&self) -> ResolutionRequest {
        let mut r = ResolutionRequest::new(
            self.target.clone(),
            self.profile.clone(),
            self.status.clone(),
        );
        r.policy = self.policy.clone();
        r.conflict_policy = self.conflict_policy;
        r
    }
}

#[derive(Debug)]
pub struct CheckOutcome {
    pub resolution: Resolution,
    pub plan: ActionPlan,
}

/// The check phase: resolve against `snapshots` and order the result.
/// Never fetches packages.
pub fn check_request(
    req: &CheckRequest,
    snapshots: &[IndexSnapshot],
    client: &RepositoryClient,
) -> Result<CheckOutcome, Failure> {
    let rreq = req.resolution_request();
    let resolution = check(&rreq, snapshots, client, &PolicyRegistry::default())?;
    let plan = order_actions(&resolution.solution, &resolution.tree, &req.status);
    Ok(CheckOutcome { resolution, plan })
}
