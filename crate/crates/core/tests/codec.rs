use std::cmp::Ordering;

use proptest::prelude::*;
use resolvit_core::codec::{
    parse_descriptor, parse_repository_index, serialize_descriptor, serialize_repository_index,
};
use resolvit_core::model::{Version, VersionRange};
use resolvit_testkit::arb::{corrupt_descriptor, descriptor, range, version};
use resolvit_testkit::{index_entry, unit};

/// Ordering written out independently of the model's `Ord`.
fn expected_order(a: &Version, b: &Version) -> Ordering {
    let key = |v: &Version| (v.major, v.minor, v.micro);
    key(a)
        .cmp(&key(b))
        .then_with(|| match (&a.qualifier, &b.qualifier) {
            (None, None) => Ordering::Equal,
            (None, Some(_)) => Ordering::Greater,
            (Some(_), None) => Ordering::Less,
            (Some(x), Some(y)) => x.as_bytes().cmp(y.as_bytes()),
        })
}

#[test]
fn version_text_examples() {
    for ok in ["0.0.0", "1.2.3", "10.20.30-rc1", "1.0.0-SNAPSHOT"] {
        assert_eq!(Version::parse(ok).unwrap().to_string(), ok);
    }
    for bad in [
        "",
        "1",
        "1.2",
        "1.2.3.4",
        "1.2.x",
        "1.2.3-",
        "1.2.3-a.b",
        "-1.0.0",
        "1..3",
        " 1.2.3",
    ] {
        assert!(Version::parse(bad).is_err(), "{bad:?}");
    }
    assert!(Version::parse("1.0.0-rc1").unwrap() < Version::parse("1.0.0").unwrap());
    assert!(Version::parse("1.10.0").unwrap() > Version::parse("1.9.0").unwrap());
}

#[test]
fn range_examples() {
    let v = |t: &str| Version::parse(t).unwrap();
    let r = |t: &str| VersionRange::parse(t).unwrap();
    assert!(r("1.2.0").contains(&v("1.2.0")));
    assert!(!r("1.2.0").contains(&v("1.2.1")));
    assert!(r("[1.0.0,2.0.0)").contains(&v("1.0.0")));
    assert!(!r("[1.0.0,2.0.0)").contains(&v("2.0.0")));
    assert!(!r("(1.0.0,2.0.0]").contains(&v("1.0.0")));
    assert!(r("(1.0.0,2.0.0]").contains(&v("2.0.0")));
    assert!(r("[1.0.0,)").contains(&v("99.0.0")));
    assert!(r("(,1.0.0)").contains(&v("0.9.9")));
    assert!(r("*").contains(&v("0.0.0-a")));
    for bad in [
        "",
        "[",
        "[,]",
        "[2.0.0,1.0.0]",
        "[1.0.0,1.0.0)",
        "[1.0.0;2.0.0]",
        "1.0",
        "[1.0.0,2.0.0",
    ] {
        assert!(VersionRange::parse(bad).is_err(), "{bad:?}");
    }
}

#[test]
fn descriptor_without_groups_has_empty_dependencies() {
    let d = unit("org.a@1.0.0:bundle").provides("S", "1.0.0").build();
    let text = String::from_utf8(serialize_descriptor(&d)).unwrap();
    assert!(text.contains("<dependencies/>"), "{text}");
    assert!(text.ends_with('\n') && !text.contains('\r'));
    assert_eq!(parse_descriptor(text.as_bytes()).unwrap(), d);
}

#[test]
fn index_round_trip() {
    let entries: Vec<_> = [
        unit("org.a@1.0.0:bundle").provides("S", "1.0.0").build(),
        unit("org.b@2.0.0-rc1:driver").build(),
    ]
    .iter()
    .map(|d| index_entry(d, 3))
    .collect();
    let bytes = serialize_repository_index(&entries);
    assert_eq!(parse_repository_index(&bytes).unwrap(), entries);
    assert!(parse_repository_index(&bytes[..bytes.len() - 10]).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn version_order_is_total_and_matches_reference(a in version(), b in version(), c in version()) {
        prop_assert_eq!(a.cmp(&b), expected_order(&a, &b));
        prop_assert_eq!(a.cmp(&b), b.cmp(&a).reverse());
        prop_assert_eq!(a == b, a.cmp(&b) == Ordering::Equal);
        if a <= b && b <= c {
            prop_assert!(a <= c);
        }
        prop_assert_eq!(Version::parse(&a.to_string()).unwrap(), a);
    }

    #[test]
    fn exact_range_matches_only_itself(a in version(), b in version()) {
        let r = VersionRange::Exact(a.clone());
        prop_assert!(r.contains(&a));
        prop_assert_eq!(r.contains(&b), a == b);
    }

    #[test]
    fn range_text_round_trips(r in range()) {
        prop_assert_eq!(VersionRange::parse(&r.to_string()).unwrap(), r);
    }

    #[test]
    fn descriptor_round_trips(d in descriptor()) {
        let bytes = serialize_descriptor(&d);
        let back = parse_descriptor(&bytes).unwrap();
        prop_assert_eq!(serialize_descriptor(&back), bytes);
        prop_assert_eq!(back, d);
    }

    #[test]
    fn descriptor_corruption_is_rejected(d in descriptor(), pick in any::<usize>()) {
        let doc = String::from_utf8(serialize_descriptor(&d)).unwrap();
        let (edit, bad) = corrupt_descriptor(&doc, pick);
        prop_assert!(parse_descriptor(bad.as_bytes()).is_err(), "{} accepted:\n{}", edit, bad);
    }
}
