//! Operator commands.

use std::collections::BTreeSet;
use std::io::Write;
use std::net::SocketAddr;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use resolvit_core::executor::{attach_packages, Action, ActionPlan, Executor, Journal, Verb};
use resolvit_core::model::{PlatformProfile, UnitId};
use resolvit_core::resolver::{broken_dependents, Target};
use resolvit_core::state::{PlatformStatus, StateError};

use crate::config::{default_cache_dir, parse_repository, EngineConfig};
use crate::engine::{
    check_request, refresh_all, CheckOutcome, CheckRequest, Failure, EXIT_NO_SOLUTION, EXIT_OK,
    EXIT_REPOSITORY,
};
use crate::service::{self, ResolveService};

#[derive(Debug, Parser)]
#[command(
    name = "resolvit",
    version,
    about = "Resolve and deploy units onto a service platform"
)]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Human,
    Plan,
}

#[derive(Debug, Args)]
pub struct GlobalArgs {
    /// Platform root holding the status file and installed units.
    #[arg(
        long,
        global = true,
        env = "RESOLVIT_ROOT",
        default_value = "/var/lib/resolvit"
    )]
    pub root: PathBuf,
    /// Repository base URL or directory; repeat for several.
    #[arg(
        long = "repo",
        global = true,
        env = "RESOLVIT_REPOS",
        value_delimiter = ','
    )]
    pub repos: Vec<String>,
    /// Metadata and package cache directory.
    #[arg(long, global = true, env = "RESOLVIT_CACHE")]
    pub cache: Option<PathBuf>,
    /// Selection policy.
    #[arg(long, global = true)]
    pub policy: Option<String>,
    /// What to do about installed units that conflict with the solution.
    #[arg(long, global = true)]
    pub conflict: Option<String>,
    #[arg(long, global = true, value_enum, default_value = "human")]
    pub format: Format,
    /// Override the profile's architecture.
    #[arg(long, global = true)]
    pub arch: Option<String>,
    /// Override the profile's operating system.
    #[arg(long, global = true)]
    pub os: Option<String>,
    /// Override the profile's available disk space.
    #[arg(long = "disk-kib", global = true)]
    pub disk_kib: Option<u64>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Resolve a target and apply the plan.
    Install {
        target: String,
        /// Print the plan without changing anything.
        #[arg(long)]
        dry_run: bool,
    },
    /// Resolve a target and print the plan.
    Check { target: String },
    /// Remove one installed unit (`name@version:kind`).
    Remove { unit: String },
    /// List installed units.
    List,
    /// Refresh every repository index.
    Refresh,
    /// Run the HTTP resolve service.
    Serve {
        #[arg(long, default_value = "127.0.0.1:7878")]
        listen: SocketAddr,
    },
}

struct Context<'a> {
    config: EngineConfig,
    global: &'a GlobalArgs,
    out: &'a mut dyn Write,
    err: &'a mut dyn Write,
}

/// Parses `args` and runs the command. Returns the exit code.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() {
                crate::engine::EXIT_USAGE
            } else {
                EXIT_OK
            };
            let text = e.render().to_string();
            let _ = if e.use_stderr() {
                err.write_all(text.as_bytes())
            } else {
                out.write_all(text.as_bytes())
            };
            return code;
        }
    };
    match dispatch(&cli, out, err) {
        Ok(()) => EXIT_OK,
        Err(f) => {
            let _ = writeln!(err, "error: {f}");
            f.code
        }
    }
}

fn dispatch(cli: &Cli, out: &mut dyn Write, err: &mut dyn Write) -> Result<(), Failure> {
    let g = &cli.global;
    let mut config = EngineConfig::new(&g.root, g.cache.clone().unwrap_or_else(default_cache_dir));
    config.repositories = g
        .repos
        .iter()
        .filter(|r| !r.is_empty())
        .map(|r| parse_repository(r).map_err(|e| Failure::usage(e.to_string())))
        .collect::<Result<_, _>>()?;
    if let Some(p) = &g.policy {
        config.default_policy = p.clone();
    }
    if let Some(c) = &g.conflict {
        config.default_conflict_policy = c
            .parse()
            .map_err(|e| Failure::usage(format!("--conflict: {e}")))?;
    }
    let mut ctx = Context {
        config,
        global: g,
        out,
        err,
    };
    match &cli.command {
        Command::Install { target, dry_run } => ctx.install(target, *dry_run),
        Command::Check { target } => ctx.install(target, true),
        Command::Remove { unit } => ctx.remove(unit),
        Command::List => ctx.list(),
        Command::Refresh => ctx.refresh(),
        Command::Serve { listen } => ctx.serve(*listen),
    }
}

fn io_failure(e: std::io::Error) -> Failure {
    Failure::new(crate::engine::EXIT_EXECUTION, format!("output: {e}"))
}

impl Context<'_> {
    fn profile(&self) -> Result<PlatformProfile, Failure> {
        let mut p = self.config.profile().map_err(Failure::usage)?;
        if let Some(a) = &self.global.arch {
            p.architecture = a.clone();
        }
        if let Some(o) = &self.global.os {
            p.os = o.clone();
        }
        if let Some(d) = self.global.disk_kib {
            p.disk_available_kib = d;
        }
        Ok(p)
    }

    fn warn(&mut self, msg: &str) {
        let _ = writeln!(self.err, "warning: {msg}");
    }

    /// Undoes an interrupted execution before changing anything; a check
    /// only warns about it.
    fn settle_journal(&mut self, executor: &Executor, mutate: bool) -> Result<(), Failure> {
        if !Journal::exists(executor.root()) && !executor.is_dirty() {
            return Ok(());
        }
        if !mutate {
            self.warn("an interrupted execution is pending recovery; status may be partial");
            return Ok(());
        }
        let undone = executor.recover()?;
        self.warn(&format!(
            "recovered an interrupted execution ({undone} actions undone)"
        ));
        Ok(())
    }

    fn load_status(&self, executor: &Executor) -> Result<PlatformStatus, Failure> {
        Ok(executor.store().load()?)
    }

    fn install(&mut self, target: &str, dry_run: bool) -> Result<(), Failure> {
        let target: Target = target
            .parse()
            .map_err(|e| Failure::usage(format!("target: {e}")))?;
        let profile = self.profile()?;
        let executor = self.config.executor(&profile);
        self.settle_journal(&executor, !dry_run)?;
        let req = CheckRequest {
            target: target.clone(),
            profile,
            status: self.load_status(&executor)?,
            policy: self.config.default_policy.clone(),
            conflict_policy: self.config.default_conflict_policy,
        };
        let client = self.config.client();
        let (snapshots, warnings) = refresh_all(&client, &self.config.repositories)?;
        for w in warnings {
            self.warn(&w);
        }
        let CheckOutcome {
            resolution,
            mut plan,
        } = check_request(&req, &snapshots, &client)?;
        self.print_plan(&target, &plan, &resolution)?;
        if dry_run || plan.is_empty() {
            return Ok(());
        }
        attach_packages(&mut plan, &resolution.tree, &client)?;
        let report = executor.execute(&plan)?;
        if self.global.format == Format::Human {
            for a in &report.actions {
                writeln!(
                    self.out,
                    "{} {} ({} ms)",
                    past(a.verb),
                    a.unit,
                    a.duration.as_millis()
                )
                .map_err(io_failure)?;
            }
        }
        Ok(())
    }

    fn print_plan(
        &mut self,
        target: &Target,
        plan: &ActionPlan,
        resolution: &resolvit_core::resolver::Resolution,
    ) -> Result<(), Failure> {
        if self.global.format == Format::Plan {
            return self
                .out
                .write_all(plan.encode().as_bytes())
                .map_err(io_failure);
        }
        if plan.is_empty() {
            return writeln!(self.out, "nothing to do: {target} is satisfied").map_err(io_failure);
        }
        let s = &resolution.solution;
        writeln!(
            self.out,
            "plan {} for {target}: {} actions, {} KiB, cost {}, chosen from {} solutions",
            &plan.plan_hash().as_str()[..12],
            plan.len(),
            s.total_disk_kib,
            s.total_cost,
            resolution.considered
        )
        .map_err(io_failure)?;
        for c in &resolution.conflicts {
            writeln!(self.out, "  replacing: {c}").map_err(io_failure)?;
        }
        for a in &plan.actions {
            writeln!(self.out, "  {:<7} {}", a.verb, a.unit).map_err(io_failure)?;
        }
        Ok(())
    }

    fn remove(&mut self, unit: &str) -> Result<(), Failure> {
        let id: UnitId = unit
            .strip_prefix("unit:")
            .unwrap_or(unit)
            .parse()
            .map_err(|e| Failure::usage(format!("unit: {e}")))?;
        let profile = self.profile()?;
        let executor = self.config.executor(&profile);
        self.settle_journal(&executor, true)?;
        let status = self.load_status(&executor)?;
        let record = status
            .get(&id)
            .ok_or_else(|| Failure::from(StateError::NotInstalled(id.clone())))?;
        let broken = broken_dependents(&status, &BTreeSet::from([id.clone()]), &[]);
        if !broken.is_empty() {
            let details = broken
                .iter()
                .map(|b| {
                    let eps: Vec<String> = b.endpoints.iter().map(ToString::to_string).collect();
                    format!("{} needs it for {}", b.dependent, eps.join(", "))
                })
                .collect();
            return Err(
                Failure::new(EXIT_NO_SOLUTION, format!("{id} has installed dependents"))
                    .with_details(details),
            );
        }
        let plan = ActionPlan {
            actions: vec![Action {
                verb: Verb::Remove,
                unit: id.clone(),
                descriptor: record.descriptor.clone(),
                package: None,
            }],
        };
        if self.global.format == Format::Plan {
            self.out
                .write_all(plan.encode().as_bytes())
                .map_err(io_failure)?;
        }
        executor.execute(&plan)?;
        if self.global.format == Format::Human {
            writeln!(self.out, "removed {id}").map_err(io_failure)?;
        }
        Ok(())
    }

    fn list(&mut self) -> Result<(), Failure> {
        let profile = self.profile()?;
        let status = self.load_status(&self.config.executor(&profile))?;
        for r in status.records() {
            writeln!(
                self.out,
                "{}\t{}\t{}\t{}",
                r.id.name,
                r.id.version,
                r.id.kind.as_str(),
                r.installed_at.format("%Y-%m-%dT%H:%M:%SZ")
            )
            .map_err(io_failure)?;
        }
        Ok(())
    }

    fn refresh(&mut self) -> Result<(), Failure> {
        if self.config.repositories.is_empty() {
            return Err(Failure::usage(
                "no repositories configured (use --repo or RESOLVIT_REPOS)",
            ));
        }
        let client = self.config.client();
        let mut failed = 0;
        for source in &self.config.repositories {
            match client.refresh_index(source) {
                Ok(snap) => {
                    let note = if snap.stale {
                        " (stale: served from cache)"
                    } else {
                        ""
                    };
                    writeln!(self.out, "{source}: {} entries{note}", snap.entries.len())
                        .map_err(io_failure)?;
                }
                Err(e) => {
                    failed += 1;
                    writeln!(self.out, "{source}: failed: {e}").map_err(io_failure)?;
                }
            }
        }
        if failed == self.config.repositories.len() {
            return Err(Failure::new(EXIT_REPOSITORY, "every repository failed"));
        }
        Ok(())
    }

    fn serve(&mut self, listen: SocketAddr) -> Result<(), Failure> {
        if self.config.repositories.is_empty() {
            return Err(Failure::usage(
                "no repositories configured (use --repo or RESOLVIT_REPOS)",
            ));
        }
        let svc = ResolveService::new(self.config.repositories.clone(), self.config.client());
        let runtime = tokio::runtime::Builder::new_multi_thread()
            .enable_all()
            .build()
            .map_err(|e| Failure::usage(e.to_string()))?;
        runtime.block_on(async {
            let listener = tokio::net::TcpListener::bind(listen)
                .await
                .map_err(|e| Failure::usage(format!("cannot listen on {listen}: {e}")))?;
            let addr = listener.local_addr().map_err(io_failure)?;
            writeln!(self.out, "listening on {addr}").map_err(io_failure)?;
            self.out.flush().map_err(io_failure)?;
            service::serve(listener, std::sync::Arc::new(svc))
                .await
                .map_err(io_failure)
        })
    }
}

fn past(verb: Verb) -> &'static str {
    match verb {
        Verb::Install => "installed",
        Verb::Remove => "removed",
    }
}
