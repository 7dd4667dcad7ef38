use std::collections::BTreeSet;

use proptest::prelude::*;
use resolvit_core::state::{
    apply_change, parse_status, query_installed, serialize_status, PlatformStatus, StateError,
    StateStore, StatusChange,
};
use resolvit_testkit::arb::{corrupt_status, status};
use resolvit_testkit::{epoch, id, record, unit};

fn sample() -> PlatformStatus {
    PlatformStatus::from_records(vec![
        record(&unit("org.b@1.0.0:bundle").provides("S", "1.0.0").build()),
        record(
            &unit("org.a@2.0.0:native")
                .provides("S", "2.0.0")
                .provides("T", "1.0.0")
                .build(),
        ),
    ])
    .unwrap()
}

#[test]
fn save_then_load() {
    let tmp = tempfile::tempdir().unwrap();
    let store = StateStore::in_root(tmp.path());
    assert!(store.load().unwrap().is_empty());
    let s = sample();
    store.save(&s).unwrap();
    assert_eq!(store.load().unwrap(), s);
    store.save(&PlatformStatus::default()).unwrap();
    assert!(!store.path().exists());
}

#[test]
fn records_are_kept_in_canonical_order() {
    let names: Vec<String> = sample()
        .records()
        .iter()
        .map(|r| r.id.to_string())
        .collect();
    assert_eq!(names, ["org.a@2.0.0:native", "org.b@1.0.0:bundle"]);
}

#[test]
fn missing_version_names_the_stanza() {
    let text = serialize_status(&sample());
    let broken: String = text
        .lines()
        .filter(|l| !l.starts_with("Version:"))
        .map(|l| format!("{l}\n"))
        .collect();
    match parse_status(&broken) {
        Err(StateError::CorruptState { stanza, .. }) => assert_eq!(stanza, 1),
        other => panic!("{other:?}"),
    }
}

#[test]
fn query_by_service_range() {
    let s = sample();
    let hits = |r: &str| -> Vec<String> {
        query_installed(&s, "S", &r.parse().unwrap())
            .iter()
            .map(|r| r.id.name.clone())
            .collect()
    };
    assert_eq!(hits("*"), ["org.a", "org.b"]);
    assert_eq!(hits("[2.0.0,)"), ["org.a"]);
    assert!(query_installed(&s, "U", &"*".parse().unwrap()).is_empty());
}

#[test]
fn install_and_remove_changes() {
    let single = BTreeSet::new();
    let s = sample();
    let newer = record(&unit("org.b@1.1.0:bundle").build());
    let added = apply_change(
        &s,
        StatusChange::Install(newer.clone()),
        &BTreeSet::from([resolvit_core::model::UnitKind::Bundle]),
    )
    .unwrap();
    assert_eq!(added.records().len(), 3);
    assert!(apply_change(&s, StatusChange::Install(newer), &single).is_err());
    assert!(apply_change(&s, StatusChange::Install(s.records()[0].clone()), &single).is_err());
    let removed =
        apply_change(&s, StatusChange::Remove(id("org.b@1.0.0:bundle")), &single).unwrap();
    assert_eq!(removed.records().len(), 1);
    assert!(matches!(
        apply_change(&s, StatusChange::Remove(id("org.z@1.0.0:bundle")), &single),
        Err(StateError::NotInstalled(_))
    ));
    assert_eq!(s.records()[0].installed_at, epoch());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn status_round_trips(s in status()) {
        let text = serialize_status(&s);
        let back = parse_status(&text).unwrap();
        prop_assert_eq!(serialize_status(&back), text);
        prop_assert_eq!(back, s);
    }

    #[test]
    fn status_corruption_is_rejected(s in status().prop_filter("records", |s| !s.is_empty()), pick in any::<usize>()) {
        let (edit, bad) = corrupt_status(&serialize_status(&s), pick);
        prop_assert!(parse_status(&bad).is_err(), "{} accepted:\n{}", edit, bad);
    }
}
