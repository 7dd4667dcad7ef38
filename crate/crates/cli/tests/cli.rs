use std::fs;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::process::Command;

use resolvit_core::executor::{Fault, Managers, PlatformLock};
use resolvit_core::model::Descriptor;
use resolvit_core::resolver::ConflictPolicy;
use resolvit_testkit::{unit, Platform};

struct Run {
    code: i32,
    out: String,
    err: String,
}

fn setup(units: &[(Descriptor, u64)]) -> Platform {
    let p = Platform::new(units);
    fs::write(
        p.root().join("profile"),
        "Architecture: x86_64\nOs: linux\nDisk-KiB: 1048576\nMulti-Version: bundle\n",
    )
    .unwrap();
    p
}

fn cli(p: &Platform, args: &[&str]) -> Run {
    let root = p.root();
    let repo = p.repo_dir();
    let cache = p.dir.path().join("cache");
    let mut full = vec![
        "resolvit".to_string(),
        "--root".into(),
        root.display().to_string(),
        "--repo".into(),
        repo.display().to_string(),
        "--cache".into(),
        cache.display().to_string(),
    ];
    full.extend(args.iter().map(|s| s.to_string()));
    let (mut out, mut err) = (Vec::new(), Vec::new());
    let code = resolvit::run(full, &mut out, &mut err);
    Run {
        code,
        out: String::from_utf8(out).unwrap(),
        err: String::from_utf8(err).unwrap(),
    }
}

fn chain() -> Vec<(Descriptor, u64)> {
    vec![
        (
            unit("org.root@1.0.0:native")
                .provides("org.x.S", "1.5.0")
                .and(&[("SB", "*")])
                .build(),
            1,
        ),
        (
            unit("org.b@1.0.0:bundle")
                .provides("SB", "1.0.0")
                .and(&[("SC", "*")])
                .build(),
            1,
        ),
        (
            unit("org.c@1.0.0:driver").provides("SC", "1.0.0").build(),
            1,
        ),
        (
            unit("org.lonely@1.0.0:native")
                .provides("L", "1.0.0")
                .and(&[("NOBODY", "*")])
                .build(),
            0,
        ),
        (
            unit("org.big@1.0.0:native")
                .provides("BIG", "1.0.0")
                .disk(10)
                .arch("armv7")
                .build(),
            0,
        ),
    ]
}

#[test]
fn dry_run_prints_plan_and_changes_nothing() {
    let p = setup(&chain());
    let before = p.tree_snapshot();
    let r = cli(
        &p,
        &[
            "install",
            "svc:org.x.S@[1.0.0,2.0.0)",
            "--dry-run",
            "--format",
            "plan",
        ],
    );
    assert_eq!(r.code, 0, "{}", r.err);
    assert_eq!(
        r.out,
        "install\torg.c\t1.0.0\tdriver\ninstall\torg.b\t1.0.0\tbundle\ninstall\torg.root\t1.0.0\tnative\n"
    );
    assert_eq!(p.tree_snapshot(), before);
    let human = cli(&p, &["install", "svc:org.x.S@[1.0.0,2.0.0)", "--dry-run"]);
    assert!(human.out.contains("3 actions"), "{}", human.out);
    assert_eq!(p.tree_snapshot(), before);
}

#[test]
fn check_matches_dry_run() {
    let p = setup(&chain());
    for format in ["human", "plan"] {
        let a = cli(&p, &["check", "svc:org.x.S", "--format", format]);
        let b = cli(
            &p,
            &["install", "svc:org.x.S", "--dry-run", "--format", format],
        );
        assert_eq!((a.code, &a.out), (b.code, &b.out));
    }
}

#[test]
fn install_then_check_is_empty() {
    let p = setup(&chain());
    let r = cli(&p, &["install", "svc:org.x.S"]);
    assert_eq!(r.code, 0, "{}", r.err);
    assert!(
        r.out.contains("installed org.root@1.0.0:native"),
        "{}",
        r.out
    );
    assert_eq!(p.status().records().len(), 3);
    let again = cli(&p, &["check", "svc:org.x.S", "--format", "plan"]);
    assert_eq!((again.code, again.out.as_str()), (0, ""));
    let human = cli(&p, &["check", "svc:org.x.S"]);
    assert!(human.out.starts_with("nothing to do"), "{}", human.out);
    let list = cli(&p, &["list"]);
    let names: Vec<&str> = list
        .out
        .lines()
        .map(|l| l.split('\t').next().unwrap())
        .collect();
    assert_eq!(names, ["org.b", "org.c", "org.root"]);
}

#[test]
fn unprovided_endpoint_exits_3() {
    let p = setup(&chain());
    let r = cli(&p, &["check", "svc:L"]);
    assert_eq!(r.code, 3);
    assert!(r.err.contains("NOBODY"), "{}", r.err);
}

#[test]
fn context_comes_from_the_profile() {
    let p = setup(&chain());
    let r = cli(&p, &["check", "svc:BIG"]);
    assert_eq!(r.code, 3);
    assert!(r.err.contains("architecture"), "{}", r.err);
    assert_eq!(cli(&p, &["check", "svc:BIG", "--arch", "armv7"]).code, 0);
    assert_eq!(
        cli(
            &p,
            &["check", "svc:BIG", "--arch", "armv7", "--disk-kib", "9"]
        )
        .code,
        3
    );
}

#[test]
fn usage_errors_exit_2() {
    let p = setup(&chain());
    assert_eq!(cli(&p, &["check", "org.x.S"]).code, 2);
    assert_eq!(
        cli(&p, &["check", "svc:org.x.S", "--policy", "cheapest"]).code,
        2
    );
    assert_eq!(
        cli(&p, &["check", "svc:org.x.S", "--conflict", "maybe"]).code,
        2
    );
    assert_eq!(cli(&p, &["frobnicate"]).code, 2);
    assert_eq!(cli(&p, &[]).code, 2);
    assert_eq!(cli(&p, &["--help"]).code, 0);
}

fn conflicting() -> Vec<(Descriptor, u64)> {
    let mut units = chain();
    units.push((unit("org.d@1.0.0:native").provides("X", "1.0.0").build(), 0));
    units.push((
        unit("org.e@1.0.0:native")
            .provides("E", "1.0.0")
            .and(&[("X", "*")])
            .build(),
        0,
    ));
    units.push((
        unit("org.a@1.0.0:native")
            .provides("T", "1.0.0")
            .not(&[("X", "*")])
            .build(),
        0,
    ));
    units
}

#[test]
fn conflict_policies() {
    let p = setup(&conflicting());
    assert_eq!(cli(&p, &["install", "svc:X"]).code, 0);
    let abort = cli(&p, &["install", "svc:T"]);
    assert_eq!(abort.code, 4);
    assert!(
        abort
            .err
            .contains("org.a@1.0.0:native excludes org.d@1.0.0:native"),
        "{}",
        abort.err
    );
    let replace = cli(&p, &["install", "svc:T", "--conflict", "replace"]);
    assert_eq!(replace.code, 0, "{}", replace.err);
    assert!(replace.out.contains("replacing:"), "{}", replace.out);
    let ids: Vec<String> = p
        .status()
        .records()
        .iter()
        .map(|r| r.id.name.clone())
        .collect();
    assert_eq!(ids, ["org.a"]);
}

#[test]
fn replace_refuses_to_break_dependents() {
    let p = setup(&conflicting());
    assert_eq!(cli(&p, &["install", "svc:E"]).code, 0);
    let before = p.tree_snapshot();
    let r = cli(&p, &["install", "svc:T", "--conflict", "replace"]);
    assert_eq!(r.code, 4, "{}", r.out);
    assert!(
        r.err
            .contains("org.e@1.0.0:native depends on org.d@1.0.0:native"),
        "{}",
        r.err
    );
    assert_eq!(p.tree_snapshot(), before);
}

#[test]
fn remove_rules() {
    let p = setup(&chain());
    assert_eq!(cli(&p, &["install", "svc:org.x.S"]).code, 0);
    let sole = cli(&p, &["remove", "org.c@1.0.0:driver"]);
    assert_eq!(sole.code, 3);
    assert!(sole.err.contains("org.b@1.0.0:bundle"), "{}", sole.err);
    assert_eq!(cli(&p, &["remove", "org.zzz@1.0.0:driver"]).code, 2);
    assert_eq!(cli(&p, &["remove", "not-a-unit"]).code, 2);
    let leaf = cli(&p, &["remove", "unit:org.root@1.0.0:native"]);
    assert_eq!(leaf.code, 0, "{}", leaf.err);
    assert!(p
        .status()
        .get(&resolvit_testkit::id("org.root@1.0.0:native"))
        .is_none());
    assert!(!p.root().join("native").exists());
}

#[test]
fn refresh_reports_and_falls_back() {
    let p = setup(&chain()[..3]);
    assert_eq!(cli(&p, &["list"]).out, "");
    let r = cli(&p, &["refresh"]);
    assert_eq!(r.code, 0);
    assert!(r.out.contains(": 3 entries"), "{}", r.out);
    // A check warms the descriptor cache too.
    let cold = cli(&p, &["check", "svc:org.x.S", "--format", "plan"]);

    fs::rename(p.repo_dir(), p.dir.path().join("moved")).unwrap();
    let stale = cli(&p, &["refresh"]);
    assert_eq!(stale.code, 0, "{} {}", stale.out, stale.err);
    assert!(stale.out.contains("stale"), "{}", stale.out);
    let warm = cli(&p, &["check", "svc:org.x.S", "--format", "plan"]);
    assert_eq!(warm.code, 0, "{}", warm.err);
    assert_eq!(warm.out, cold.out);
    assert!(warm.err.contains("warning"), "{}", warm.err);

    fs::remove_dir_all(p.dir.path().join("cache")).unwrap();
    assert_eq!(cli(&p, &["refresh"]).code, 6);
    assert_eq!(cli(&p, &["check", "svc:org.x.S"]).code, 6);
}

#[test]
fn failed_execution_exits_5_and_rolls_back() {
    let p = setup(&chain());
    fs::write(p.root().join("native"), b"in the way").unwrap();
    let before = p.tree_snapshot();
    let r = cli(&p, &["install", "svc:org.x.S"]);
    assert_eq!(r.code, 5, "{}", r.err);
    assert!(r.err.contains("rolled back"), "{}", r.err);
    assert_eq!(p.tree_snapshot(), before);
}

#[test]
fn held_lock_exits_5() {
    let p = setup(&chain());
    let _lock = PlatformLock::acquire(&p.root()).unwrap();
    let r = cli(&p, &["install", "svc:org.x.S"]);
    assert_eq!(r.code, 5);
    assert!(r.err.contains("locked"), "{}", r.err);
}

#[test]
fn interrupted_execution_is_recovered_first() {
    let p = setup(&chain());
    let plan = p.plan("svc:org.x.S", ConflictPolicy::Abort).unwrap();
    let (managers, _) = Managers::sandbox().with_fault(Fault::CrashAt(2));
    let exec = p.executor_with(managers);
    assert!(catch_unwind(AssertUnwindSafe(|| exec.execute(&plan))).is_err());
    let check = cli(&p, &["check", "svc:org.x.S"]);
    assert!(check.err.contains("pending recovery"), "{}", check.err);
    let r = cli(&p, &["install", "svc:org.x.S"]);
    assert_eq!(r.code, 0, "{}", r.err);
    assert!(
        r.err
            .contains("recovered an interrupted execution (2 actions undone)"),
        "{}",
        r.err
    );
    assert_eq!(p.status().records().len(), 3);
}

#[test]
fn binary_reads_environment() {
    let p = setup(&chain());
    let run = |args: &[&str]| {
        Command::new(env!("CARGO_BIN_EXE_resolvit"))
            .args(args)
            .env("RESOLVIT_ROOT", p.root())
            .env("RESOLVIT_REPOS", p.repo_dir())
            .env("RESOLVIT_CACHE", p.dir.path().join("cache"))
            .output()
            .unwrap()
    };
    let out = run(&["check", "svc:org.x.S", "--format", "plan"]);
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(String::from_utf8(out.stdout).unwrap().lines().count(), 3);
    assert_eq!(run(&["install", "svc:L"]).status.code(), Some(3));
}
