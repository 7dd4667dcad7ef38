use std::collections::BTreeSet;

use proptest::prelude::*;
use resolvit_core::model::{Descriptor, PlatformProfile, VersionRange};
use resolvit_core::resolver::{
    build_dependency_tree, check, enumerate_solutions, select_solution, CandidateSolution,
    ConflictCause, ConflictPolicy, ConflictResolution, PolicyRegistry, ResolutionRequest,
    ResolveError, Target,
};
use resolvit_core::state::{InstallRecord, PlatformStatus};
use resolvit_testkit::{id, oracle_solutions, random_universe, record, unit, MemoryRepo};

fn svc(name: &str, range: &str) -> Target {
    Target::Service {
        name: name.into(),
        range: range.parse().unwrap(),
    }
}

fn profile() -> PlatformProfile {
    PlatformProfile::new("armv7", "linux", 10_000)
}

fn request(target: Target, installed: &[Descriptor]) -> ResolutionRequest {
    let status = PlatformStatus::from_records(installed.iter().map(record).collect()).unwrap();
    ResolutionRequest::new(target, profile(), status)
}

fn ids(list: &[&str]) -> BTreeSet<resolvit_core::model::UnitId> {
    list.iter().map(|s| id(s)).collect()
}

fn selections(
    repo: &[Descriptor],
    installed: &[Descriptor],
    target: Target,
) -> Vec<BTreeSet<resolvit_core::model::UnitId>> {
    let units: Vec<_> = repo.iter().map(|d| (d.clone(), 0)).collect();
    let mem = MemoryRepo::new(&units);
    let req = request(target, installed);
    let tree = build_dependency_tree(&req, &[mem.snapshot()], &mem).unwrap();
    enumerate_solutions(&tree, &req.status, &req.profile)
        .unwrap()
        .into_iter()
        .map(|s| s.selected)
        .collect()
}

#[test]
fn installed_target_yields_single_satisfied_node() {
    let b = unit("b@1.5.0:bundle").provides("S", "1.5.0").build();
    let repo = MemoryRepo::new(&[(unit("c@1.0.0:bundle").provides("S", "1.0.0").build(), 0)]);
    let req = request(svc("S", "[1.0.0,2.0.0)"), std::slice::from_ref(&b));
    let tree = build_dependency_tree(&req, &[repo.snapshot()], &repo).unwrap();
    assert!(tree.satisfied);
    assert_eq!(tree.nodes.len(), 1);
    assert!(tree.edges.is_empty());
    assert!(tree.node(&b.id).unwrap().is_installed());
    assert_eq!(repo.fetches(), 0);
    let sols = enumerate_solutions(&tree, &req.status, &req.profile).unwrap();
    assert_eq!(sols, vec![CandidateSolution::empty()]);
}

#[test]
fn single_and_chain() {
    let a = unit("a@1.0.0:bundle")
        .provides("A", "1.0.0")
        .and(&[("S", "*")])
        .build();
    let b = unit("b@1.0.0:bundle").provides("S", "1.0.0").build();
    let mem = MemoryRepo::new(&[(a.clone(), 0), (b.clone(), 0)]);
    let req = request(svc("A", "*"), &[]);
    let tree = build_dependency_tree(&req, &[mem.snapshot()], &mem).unwrap();
    assert_eq!(tree.roots, vec![a.id.clone()]);
    assert_eq!(tree.nodes.len(), 2);
    assert!(tree.node(&b.id).unwrap().expanded);
    assert_eq!(tree.edges.len(), 1);
    assert_eq!(tree.edges[0].candidates, vec![b.id.clone()]);
    assert!(tree.edges_from(&b.id).next().is_none());
    let sols = enumerate_solutions(&tree, &req.status, &req.profile).unwrap();
    assert_eq!(sols.len(), 1);
    assert_eq!(sols[0].selected, ids(&["a@1.0.0:bundle", "b@1.0.0:bundle"]));
}

#[test]
fn not_endpoints_are_recorded_but_not_expanded() {
    let a = unit("a@1.0.0:bundle")
        .provides("A", "1.0.0")
        .not(&[("X", "*")])
        .build();
    let d = unit("d@1.0.0:native")
        .provides("X", "1.0.0")
        .and(&[("Y", "*")])
        .build();
    let y = unit("y@1.0.0:native").provides("Y", "1.0.0").build();
    let mem = MemoryRepo::new(&[(a.clone(), 0), (y.clone(), 0)]);
    let req = request(svc("A", "*"), std::slice::from_ref(&d));
    let tree = build_dependency_tree(&req, &[mem.snapshot()], &mem).unwrap();
    let edge = tree.edges_from(&a.id).next().unwrap();
    assert_eq!(edge.candidates, vec![d.id.clone()]);
    assert!(!tree.node(&d.id).unwrap().expanded);
    assert!(tree.node(&y.id).is_none());
}

#[test]
fn mutual_dependencies_terminate() {
    let a = unit("a@1.0.0:bundle")
        .provides("A", "1.0.0")
        .and(&[("B", "*")])
        .build();
    let b = unit("b@1.0.0:bundle")
        .provides("B", "1.0.0")
        .and(&[("A", "*")])
        .build();
    let mem = MemoryRepo::new(&[(a, 0), (b, 0)]);
    let req = request(svc("A", "*"), &[]);
    let tree = build_dependency_tree(&req, &[mem.snapshot()], &mem).unwrap();
    assert_eq!(tree.nodes.len(), 2);
    assert_eq!(tree.edges.len(), 2);
    assert_eq!(mem.fetches(), 2);
    let sols = enumerate_solutions(&tree, &req.status, &req.profile).unwrap();
    assert_eq!(sols.len(), 1);
    assert_eq!(sols[0].selected.len(), 2);
}

fn or_xor_universe(op: &str) -> (Vec<Descriptor>, Target) {
    let root = unit("root@1.0.0:bundle").provides("R", "1.0.0");
    let root = match op {
        "or" => root.or(1, &[("S1", "*"), ("S2", "*")]),
        _ => root.xor(&[("S1", "*"), ("S2", "*")]),
    };
    let b = unit("b@1.0.0:bundle").provides("S1", "1.0.0").build();
    let c = unit("c@1.0.0:bundle").provides("S2", "1.0.0").build();
    (vec![root.build(), b, c], svc("R", "*"))
}

fn oracle_sets(
    repo: &[Descriptor],
    target: &Target,
) -> Vec<BTreeSet<resolvit_core::model::UnitId>> {
    let units: Vec<_> = repo.iter().map(|d| (d.clone(), 0)).collect();
    oracle_solutions(&units, &[], &profile(), target)
        .into_iter()
        .map(|s| s.selected)
        .collect()
}

#[test]
fn or_group_admits_every_non_empty_choice() {
    let (repo, target) = or_xor_universe("or");
    let got = selections(&repo, &[], target.clone());
    assert_eq!(got, oracle_sets(&repo, &target));
    assert_eq!(
        got,
        vec![
            ids(&["b@1.0.0:bundle", "c@1.0.0:bundle", "root@1.0.0:bundle"]),
            ids(&["b@1.0.0:bundle", "root@1.0.0:bundle"]),
            ids(&["c@1.0.0:bundle", "root@1.0.0:bundle"]),
        ]
    );
}

#[test]
fn xor_group_admits_exactly_one() {
    let (repo, target) = or_xor_universe("xor");
    let got = selections(&repo, &[], target.clone());
    assert_eq!(got, oracle_sets(&repo, &target));
    assert_eq!(
        got,
        vec![
            ids(&["b@1.0.0:bundle", "root@1.0.0:bundle"]),
            ids(&["c@1.0.0:bundle", "root@1.0.0:bundle"]),
        ]
    );
}

#[test]
fn or_cardinality_counts_endpoints() {
    let root = unit("root@1.0.0:bundle")
        .provides("R", "1.0.0")
        .or(2, &[("S1", "*"), ("S2", "*"), ("S3", "*")])
        .build();
    let b = unit("b@1.0.0:bundle").provides("S1", "1.0.0").build();
    let c = unit("c@1.0.0:bundle")
        .provides("S2", "1.0.0")
        .provides("S3", "1.0.0")
        .build();
    let got = selections(&[root, b, c], &[], svc("R", "*"));
    assert_eq!(
        got,
        vec![
            ids(&["b@1.0.0:bundle", "c@1.0.0:bundle", "root@1.0.0:bundle"]),
            ids(&["c@1.0.0:bundle", "root@1.0.0:bundle"]),
        ]
    );
}

#[test]
fn missing_mandatory_provider() {
    let a = unit("a@1.0.0:bundle")
        .provides("A", "1.0.0")
        .and(&[("Nope", "*")])
        .build();
    let mem = MemoryRepo::new(&[(a, 0)]);
    let err =
        build_dependency_tree(&request(svc("A", "*"), &[]), &[mem.snapshot()], &mem).unwrap_err();
    match err {
        ResolveError::NoProviderFound {
            required_by,
            endpoint,
        } => {
            assert_eq!(required_by, Some(id("a@1.0.0:bundle")));
            assert_eq!(endpoint, "Nope *");
        }
        other => panic!("{other}"),
    }
    let mem = MemoryRepo::new(&[]);
    assert!(matches!(
        build_dependency_tree(&request(svc("A", "*"), &[]), &[mem.snapshot()], &mem),
        Err(ResolveError::NoProviderFound {
            required_by: None,
            ..
        })
    ));
}

#[test]
fn context_violations_are_excluded() {
    let a = unit("a@1.0.0:driver")
        .provides("S", "1.0.0")
        .arch("x86_64")
        .build();
    let b = unit("b@1.0.0:driver")
        .provides("S", "1.0.0")
        .disk(20_000)
        .build();
    let c = unit("c@1.0.0:driver").provides("S", "1.0.0").build();
    let mem = MemoryRepo::new(&[(a.clone(), 0), (b, 0), (c, 0)]);
    let req = request(svc("S", "*"), &[]);
    let tree = build_dependency_tree(&req, &[mem.snapshot()], &mem).unwrap();
    assert_eq!(tree.node(&a.id).unwrap().context_violations.len(), 1);
    let sols = enumerate_solutions(&tree, &req.status, &req.profile).unwrap();
    assert_eq!(
        sols.iter().map(|s| s.selected.clone()).collect::<Vec<_>>(),
        vec![ids(&["c@1.0.0:driver"])]
    );
}

#[test]
fn repository_hint_picks_source() {
    let a = unit("a@1.0.0:bundle")
        .provides("A", "1.0.0")
        .and(&[("S", "*")])
        .hint("http://second.invalid/repo/")
        .build();
    let b = unit("b@1.0.0:bundle").provides("S", "1.0.0").build();
    let first = MemoryRepo::new(&[(a, 0), (b.clone(), 1)]);
    let mut second = MemoryRepo::new(&[(b.clone(), 7)]);
    second.source =
        resolvit_core::repository::RepositorySource::new("http://second.invalid/repo", "s")
            .unwrap();
    let req = request(svc("A", "*"), &[]);
    let tree = build_dependency_tree(&req, &[first.snapshot(), second.snapshot()], &first).unwrap();
    assert_eq!(tree.node(&b.id).unwrap().cost(), 7);
}

#[test]
fn selection_policies() {
    let (repo, target) = or_xor_universe("or");
    let units: Vec<_> = repo.iter().map(|d| (d.clone(), 0)).collect();
    let mem = MemoryRepo::new(&units);
    let req = request(target, &[]);
    let tree = build_dependency_tree(&req, &[mem.snapshot()], &mem).unwrap();
    let sols = enumerate_solutions(&tree, &req.status, &req.profile).unwrap();
    let chosen = select_solution(&sols, "minimal-units", &tree).unwrap();
    assert_eq!(
        chosen.selected,
        ids(&["b@1.0.0:bundle", "root@1.0.0:bundle"])
    );
    assert!(matches!(
        select_solution(&[], "minimal-units", &tree),
        Err(ResolveError::NoSolution { .. })
    ));
    assert!(matches!(
        select_solution(&sols, "cheapest-ever", &tree),
        Err(ResolveError::UnknownPolicy(_))
    ));

    let b1 = unit("b@1.0.0:native").provides("S", "1.0.0").build();
    let b2 = unit("b@2.0.0:native")
        .provides("S", "2.0.0")
        .disk(5)
        .build();
    let mem = MemoryRepo::new(&[(b1, 3), (b2, 1)]);
    let req = request(svc("S", "*"), &[]);
    let tree = build_dependency_tree(&req, &[mem.snapshot()], &mem).unwrap();
    let sols = enumerate_solutions(&tree, &req.status, &req.profile).unwrap();
    assert_eq!(sols.len(), 2);
    let pick = |p: &str| select_solution(&sols, p, &tree).unwrap().selected;
    assert_eq!(pick("newest-versions"), ids(&["b@2.0.0:native"]));
    assert_eq!(pick("minimal-units"), ids(&["b@1.0.0:native"]));
    assert_eq!(pick("min-cost"), ids(&["b@2.0.0:native"]));
}

#[test]
fn priority_breaks_remaining_ties() {
    let b = unit("b@1.0.0:native")
        .provides("S", "1.0.0")
        .priority(10)
        .build();
    let c = unit("c@1.0.0:native")
        .provides("S", "1.0.0")
        .priority(90)
        .build();
    let got = {
        let mem = MemoryRepo::new(&[(b, 0), (c, 0)]);
        let req = request(svc("S", "*"), &[]);
        let tree = build_dependency_tree(&req, &[mem.snapshot()], &mem).unwrap();
        let sols = enumerate_solutions(&tree, &req.status, &req.profile).unwrap();
        select_solution(&sols, "minimal-units", &tree)
            .unwrap()
            .selected
    };
    assert_eq!(got, ids(&["c@1.0.0:native"]));
}

fn conflict_fixture(e_depends_on_d: bool) -> (MemoryRepo, Vec<Descriptor>) {
    let a = unit("a@1.0.0:bundle")
        .provides("A", "1.0.0")
        .not(&[("X", "*")])
        .build();
    let d = unit("d@1.0.0:native").provides("X", "1.0.0").build();
    let mut installed = vec![d];
    if e_depends_on_d {
        installed.push(
            unit("e@1.0.0:native")
                .provides("E", "1.0.0")
                .and(&[("X", "*")])
                .build(),
        );
    }
    (MemoryRepo::new(&[(a, 0)]), installed)
}

fn run_check(
    mem: &MemoryRepo,
    installed: &[Descriptor],
    target: Target,
    policy: ConflictPolicy,
) -> Result<resolvit_core::resolver::Resolution, ResolveError> {
    let mut req = request(target, installed);
    req.conflict_policy = policy;
    check(&req, &[mem.snapshot()], mem, &PolicyRegistry::default())
}

#[test]
fn abort_policy_reports_offending_pair() {
    let (mem, installed) = conflict_fixture(false);
    let err = run_check(&mem, &installed, svc("A", "*"), ConflictPolicy::Abort).unwrap_err();
    let ResolveError::Conflict(cs) = err else {
        panic!("{err}")
    };
    assert_eq!(cs.len(), 1);
    assert_eq!(cs[0].source, id("a@1.0.0:bundle"));
    assert_eq!(cs[0].offending, id("d@1.0.0:native"));
    assert!(matches!(cs[0].cause, ConflictCause::Excludes(_)));
    assert_eq!(cs[0].resolution, ConflictResolution::Abort);
}

#[test]
fn replace_policy_removes_dependent_free_unit() {
    let (mem, installed) = conflict_fixture(false);
    let r = run_check(&mem, &installed, svc("A", "*"), ConflictPolicy::Replace).unwrap();
    assert_eq!(r.solution.displaced, ids(&["d@1.0.0:native"]));
    assert_eq!(r.conflicts.len(), 1);
    assert_eq!(r.conflicts[0].resolution, ConflictResolution::Remove);
}

#[test]
fn replace_policy_refuses_to_cascade() {
    let (mem, installed) = conflict_fixture(true);
    let err = run_check(&mem, &installed, svc("A", "*"), ConflictPolicy::Replace).unwrap_err();
    let ResolveError::Conflict(cs) = err else {
        panic!("{err}")
    };
    assert!(cs.iter().any(|c| c.source == id("e@1.0.0:native")
        && c.offending == id("d@1.0.0:native")
        && matches!(c.cause, ConflictCause::Requires(_))));
}

#[test]
fn conflict_free_alternative_is_preferred() {
    let a = unit("a@1.0.0:bundle")
        .provides("A", "1.0.0")
        .not(&[("X", "*")])
        .build();
    let a2 = unit("a2@1.0.0:bundle")
        .provides("A", "1.0.0")
        .disk(100)
        .build();
    let d = unit("d@1.0.0:native").provides("X", "1.0.0").build();
    let mem = MemoryRepo::new(&[(a, 0), (a2, 0)]);
    let r = run_check(&mem, &[d], svc("A", "*"), ConflictPolicy::Abort).unwrap();
    assert_eq!(r.solution.selected, ids(&["a2@1.0.0:bundle"]));
    assert!(r.conflicts.is_empty());
}

#[test]
fn out_of_range_installed_version_is_upgraded_through_conflict_policy() {
    let old = unit("b@1.0.0:native").provides("S", "1.0.0").build();
    let new = unit("b@2.0.0:native").provides("S", "2.0.0").build();
    let mem = MemoryRepo::new(&[(new, 0)]);
    let target = svc("S", "[2.0.0,)");
    let err = run_check(&mem, std::slice::from_ref(&old), target.clone(), ConflictPolicy::Abort).unwrap_err();
    let ResolveError::Conflict(cs) = err else {
        panic!("{err}")
    };
    assert_eq!(cs[0].cause, ConflictCause::Supersedes);
    let r = run_check(&mem, &[old], target, ConflictPolicy::Replace).unwrap();
    assert_eq!(r.solution.displaced, ids(&["b@1.0.0:native"]));
    assert_eq!(r.solution.selected, ids(&["b@2.0.0:native"]));
}

#[test]
fn bundles_coexist_by_default() {
    let old = unit("b@1.0.0:bundle").provides("S", "1.0.0").build();
    let new = unit("b@2.0.0:bundle").provides("S", "2.0.0").build();
    let mem = MemoryRepo::new(&[(new, 0)]);
    let r = run_check(&mem, &[old], svc("S", "[2.0.0,)"), ConflictPolicy::Abort).unwrap();
    assert!(r.solution.displaced.is_empty());
}

#[test]
fn unsolvable_check_names_the_group() {
    let a = unit("a@1.0.0:bundle")
        .provides("A", "1.0.0")
        .or(2, &[("S1", "*"), ("S2", "*")])
        .build();
    let b = unit("b@1.0.0:bundle").provides("S1", "1.0.0").build();
    let mem = MemoryRepo::new(&[(a, 0), (b, 0)]);
    let err = run_check(&mem, &[], svc("A", "*"), ConflictPolicy::Abort).unwrap_err();
    let ResolveError::NoSolution { diagnostics } = err else {
        panic!("{err}")
    };
    assert!(
        diagnostics
            .iter()
            .any(|d| d.contains("a@1.0.0:bundle") && d.contains("S2 *")),
        "{diagnostics:?}"
    );
}

#[test]
fn unknown_policy_is_rejected_before_any_fetch() {
    let (repo, target) = or_xor_universe("or");
    let mem = MemoryRepo::new(&repo.into_iter().map(|d| (d, 0)).collect::<Vec<_>>());
    let mut req = request(target, &[]);
    req.policy = "fastest".into();
    assert!(matches!(
        check(&req, &[mem.snapshot()], &mem, &PolicyRegistry::default()),
        Err(ResolveError::UnknownPolicy(_))
    ));
    assert_eq!(mem.fetches(), 0);
}

fn unrelated_installed() -> InstallRecord {
    record(
        &unit("zz.unrelated@1.0.0:native")
            .provides("unrelated.service", "1.0.0")
            .and(&[("unrelated.need", "*")])
            .not(&[("unrelated.enemy", "*")])
            .build(),
    )
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn unrelated_installed_unit_keeps_every_solution(seed in 0u64..100_000) {
        let u = random_universe(seed, 10);
        let before = oracle_check(&u.repo, &u.installed, &u);
        let mut installed = u.installed.clone();
        installed.push(unrelated_installed());
        let after = oracle_check(&u.repo, &installed, &u);
        for s in &before {
            prop_assert!(after.contains(s), "seed {seed}: lost {s:?}");
        }
    }

    #[test]
    fn selection_ignores_input_order(seed in 0u64..100_000, policy in prop::sample::select(vec!["minimal-units", "newest-versions", "min-cost"])) {
        let u = random_universe(seed, 10);
        let mem = u.memory_repo();
        let req = u.request(policy, ConflictPolicy::Abort);
        let Ok(tree) = build_dependency_tree(&req, &[mem.snapshot()], &mem) else { return Ok(()) };
        let sols = enumerate_solutions(&tree, &req.status, &req.profile).unwrap();
        prop_assume!(!sols.is_empty());
        let expected = select_solution(&sols, policy, &tree).unwrap();
        let mut reversed = sols.clone();
        reversed.reverse();
        prop_assert_eq!(&select_solution(&reversed, policy, &tree).unwrap(), &expected);
        let n = sols.len();
        let mut rotated = sols.clone();
        rotated.rotate_left((seed as usize) % n);
        prop_assert_eq!(&select_solution(&rotated, policy, &tree).unwrap(), &expected);
    }
}

/// Solutions as the resolver computes them for `installed` instead of the
/// universe's own installed set.
fn oracle_check(
    repo: &[(Descriptor, u64)],
    installed: &[InstallRecord],
    u: &resolvit_testkit::Universe,
) -> Vec<CandidateSolution> {
    let mem = MemoryRepo::new(repo);
    let status = PlatformStatus::from_records(installed.to_vec()).unwrap();
    let req = ResolutionRequest::new(u.target.clone(), u.profile.clone(), status);
    match build_dependency_tree(&req, &[mem.snapshot()], &mem) {
        Ok(tree) => enumerate_solutions(&tree, &req.status, &req.profile).unwrap(),
        Err(ResolveError::NoProviderFound { .. }) => Vec::new(),
        Err(e) => panic!("{e}"),
    }
}

#[test]
fn range_target_rejects_out_of_range_providers() {
    let b = unit("b@2.0.0:bundle").provides("S", "2.0.0").build();
    let mem = MemoryRepo::new(&[(b, 0)]);
    let req = request(
        Target::Service {
            name: "S".into(),
            range: VersionRange::parse("[1.0.0,2.0.0)").unwrap(),
        },
        &[],
    );
    assert!(matches!(
        build_dependency_tree(&req, &[mem.snapshot()], &mem),
        Err(ResolveError::NoProviderFound { .. })
    ));
}
