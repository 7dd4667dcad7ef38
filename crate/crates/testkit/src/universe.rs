//! Seeded random universes for oracle comparisons.

use std::collections::BTreeSet;

use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use resolvit_core::model::{Descriptor, GroupOp, PlatformProfile, UnitKind, VersionRange};
use resolvit_core::resolver::{ConflictPolicy, ResolutionRequest, Target};
use resolvit_core::state::{InstallRecord, PlatformStatus};

use crate::{record, unit, MemoryRepo};

#[derive(Debug, Clone)]
pub struct Universe {
    pub seed: u64,
    /// Repository contents in index order, with costs.
    pub repo: Vec<(Descriptor, u64)>,
    pub installed: Vec<InstallRecord>,
    pub profile: PlatformProfile,
    pub target: Target,
}

impl Universe {
    pub fn status(&self) -> PlatformStatus {
        PlatformStatus::from_records(self.installed.clone())
            .expect("generated status is consistent")
    }

    pub fn memory_repo(&self) -> MemoryRepo {
        MemoryRepo::new(&self.repo)
    }

    pub fn request(&self, policy: &str, conflict: ConflictPolicy) -> ResolutionRequest {
        let mut r =
            ResolutionRequest::new(self.target.clone(), self.profile.clone(), self.status());
        r.policy = policy.to_string();
        r.conflict_policy = conflict;
        r
    }

    /// Number of distinct units, installed or not.
    pub fn unit_count(&self) -> usize {
        let ids: BTreeSet<_> = self
            .repo
            .iter()
            .map(|(d, _)| &d.id)
            .chain(self.installed.iter().map(|r| &r.id))
            .collect();
        ids.len()
    }
}

const NAMES: [&str; 6] = ["alpha", "beta", "gamma", "delta", "eps", "zeta"];
const SERVICES: [&str; 4] = ["s0", "s1", "s2", "s3"];
const VERSIONS: [&str; 3] = ["1.0.0", "1.1.0", "2.0.0"];
const RANGES: [&str; 4] = ["*", "*", "[1.0.0,2.0.0)", "[2.0.0,)"];

/// A universe of at most `max_units` distinct units (at most three versions
/// per name), groups drawn from all four operators, and a random installed
/// subset. The same seed always yields the same universe.
pub fn random_universe(seed: u64, max_units: usize) -> Universe {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let names = &NAMES[..rng.random_range(2..=NAMES.len())];
    let kinds: Vec<UnitKind> = names
        .iter()
        .map(|_| *UnitKind::ALL.choose(&mut rng).unwrap())
        .collect();
    let n = rng
        .random_range(2..=max_units.max(2))
        .max(rng.random_range(2..=max_units.max(2)));

    let mut multi = BTreeSet::new();
    for kind in UnitKind::ALL {
        let p = if kind == UnitKind::Bundle { 0.6 } else { 0.25 };
        if rng.random_bool(p) {
            multi.insert(kind);
        }
    }
    let arch = if rng.random_bool(0.5) {
        "armv7"
    } else {
        "x86_64"
    };
    let mut profile = PlatformProfile::new(arch, "linux", rng.random_range(20..=160));
    profile.multi_version_kinds = multi;

    let mut units: Vec<Descriptor> = Vec::new();
    let mut attempts = 0;
    while units.len() < n && attempts < 200 {
        attempts += 1;
        let ni = rng.random_range(0..names.len());
        let version = *VERSIONS.choose(&mut rng).unwrap();
        let spec = format!("{}@{}:{}", names[ni], version, kinds[ni].as_str());
        if units.iter().any(|d| d.id.to_string() == spec) {
            continue;
        }
        let mut b = unit(&spec)
            .disk(rng.random_range(0..=40))
            .priority(rng.random_range(0..=100));
        let mut offered = BTreeSet::new();
        for _ in 0..rng.random_range(1..=2) {
            let s = *SERVICES.choose(&mut rng).unwrap();
            let v = if rng.random_bool(0.7) {
                "1.0.0"
            } else {
                "2.0.0"
            };
            if offered.insert((s, v)) {
                b = b.provides(s, v);
            }
        }
        for _ in 0..rng.random_range(0..=2) {
            let op = match rng.random_range(0..100) {
                0..40 => GroupOp::And,
                40..65 => GroupOp::Or,
                65..85 => GroupOp::Xor,
                _ => GroupOp::Not,
            };
            let len = if matches!(op, GroupOp::Or | GroupOp::Xor) {
                rng.random_range(1..=3)
            } else {
                rng.random_range(1..=2)
            };
            let endpoints: Vec<(&str, &str)> = SERVICES
                .choose_multiple(&mut rng, len)
                .map(|s| (*s, *RANGES.choose(&mut rng).unwrap()))
                .collect();
            let card = if op == GroupOp::Or {
                rng.random_range(1..=len as u32)
            } else {
                1
            };
            b = b.group(op, card, &endpoints);
        }
        match rng.random_range(0..10) {
            0 => b = b.arch("x86_64"),
            1 => b = b.arch("armv7"),
            2 => b = b.os("qnx"),
            _ => {}
        }
        units.push(b.build());
    }

    let mut installed: Vec<InstallRecord> = Vec::new();
    let mut repo = Vec::new();
    for d in units {
        let slot_free = installed
            .iter()
            .all(|r| !r.id.same_slot(&d.id) || profile.allows_multi_version(d.id.kind));
        if slot_free && rng.random_bool(0.25) {
            let also_in_repo = rng.random_bool(0.5);
            installed.push(record(&d));
            if also_in_repo {
                repo.push((d, rng.random_range(0..10)));
            }
        } else {
            repo.push((d, rng.random_range(0..10)));
        }
    }

    let target = if !repo.is_empty() && rng.random_bool(0.2) {
        Target::Unit(repo.choose(&mut rng).unwrap().0.id.clone())
    } else {
        // Mostly ask for something the repository offers and nothing
        // installed provides yet, so that most universes need work.
        let wanted: Vec<&str> = SERVICES
            .iter()
            .copied()
            .filter(|s| {
                repo.iter()
                    .any(|(d, _)| d.provides.iter().any(|p| p.name == *s))
            })
            .filter(|s| {
                installed
                    .iter()
                    .all(|r| r.provides.iter().all(|p| p.name != *s))
            })
            .collect();
        let name = match wanted.choose(&mut rng) {
            Some(s) if rng.random_bool(0.8) => s.to_string(),
            _ => SERVICES.choose(&mut rng).unwrap().to_string(),
        };
        let range: VersionRange = RANGES.choose(&mut rng).unwrap().parse().unwrap();
        Target::Service { name, range }
    };

    Universe {
        seed,
        repo,
        installed,
        profile,
        target,
    }
}
