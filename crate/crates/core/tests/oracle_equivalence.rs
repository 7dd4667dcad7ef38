use std::collections::BTreeSet;

use resolvit_core::resolver::{
    build_dependency_tree, check_context, enumerate_solutions_with, ConflictPolicy, Parallelism,
    ResolveError,
};
use resolvit_testkit::{oracle_solutions, random_universe, OracleSolution, Universe};

fn resolver_solutions(u: &Universe, mode: Parallelism) -> Vec<OracleSolution> {
    let repo = u.memory_repo();
    let req = u.request("minimal-units", ConflictPolicy::Abort);
    let tree = match build_dependency_tree(&req, &[repo.snapshot()], &repo) {
        Ok(t) => t,
        Err(ResolveError::NoProviderFound { .. }) => return Vec::new(),
        Err(e) => panic!("seed {}: {e}", u.seed),
    };
    let mut out: Vec<OracleSolution> =
        enumerate_solutions_with(&tree, &req.status, &req.profile, mode)
            .unwrap()
            .into_iter()
            .map(|s| OracleSolution {
                selected: s.selected,
                displaced: s.displaced,
                disk: s.total_disk_kib,
                cost: s.total_cost,
            })
            .collect();
    out.sort();
    out
}

#[test]
fn enumeration_matches_brute_force() {
    let mut nonempty = 0;
    let mut multiple = 0;
    for seed in 0..400 {
        let u = random_universe(seed, 12);
        assert!(u.unit_count() <= 12);
        let expected = oracle_solutions(&u.repo, &u.installed, &u.profile, &u.target);
        let got = resolver_solutions(&u, Parallelism::Parallel);
        assert_eq!(got, expected, "seed {seed}: {u:#?}");
        assert_eq!(
            resolver_solutions(&u, Parallelism::Sequential),
            got,
            "seed {seed}"
        );
        nonempty += usize::from(!expected.is_empty());
        multiple += usize::from(expected.len() > 1);
    }
    eprintln!("solvable {nonempty}, with alternatives {multiple}");
    // The generator must exercise both solvable and unsolvable universes.
    assert!(nonempty > 150, "only {nonempty} solvable universes");
    assert!(multiple > 50, "only {multiple} universes with alternatives");
    assert!(nonempty < 400);
}

#[test]
fn selected_units_pass_context_checks() {
    for seed in 0..200 {
        let u = random_universe(seed, 12);
        let repo = u.memory_repo();
        let req = u.request("minimal-units", ConflictPolicy::Abort);
        let Ok(tree) = build_dependency_tree(&req, &[repo.snapshot()], &repo) else {
            continue;
        };
        for s in enumerate_solutions_with(&tree, &req.status, &req.profile, Parallelism::Parallel)
            .unwrap()
        {
            let ids: BTreeSet<_> = s.selected.iter().collect();
            for id in ids {
                let d = tree.descriptor(id).unwrap();
                assert!(
                    check_context(d, &req.profile).is_empty(),
                    "seed {seed}: {id}"
                );
            }
            assert!(s.total_disk_kib <= req.profile.disk_available_kib);
        }
    }
}
