use std::fmt;

use crate::model::{Descriptor, PlatformProfile};

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ContextViolation {
    ArchitectureMismatch { required: String, actual: String },
    OsMismatch { required: String, actual: String },
}

impl fmt::Display for ContextViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ContextViolation::ArchitectureMismatch { required, actual } => {
                write!(f, "requires architecture {required}, platform is {actual}")
            }
            ContextViolation::OsMismatch { required, actual } => {
                write!(f, "requires OS {required}, platform runs {actual}")
            }
        }
    }
}

/// Per-unit context checks. Disk space is judged on whole solutions, not here.
pub fn check_context(d: &Descriptor, p: &PlatformProfile) -> Vec<ContextViolation> {
    let mut out = Vec::new();
    if let Some(arch) = &d.requirements.architecture {
        if *arch != p.architecture {
            out.push(ContextViolation::ArchitectureMismatch {
                required: arch.clone(),
                actual: p.architecture.clone(),
            });
        }
    }
    if let Some(os) = &d.requirements.os {
        if *os != p.os {
            out.push(ContextViolation::OsMismatch {
                required: os.clone(),
                actual: p.os.clone(),
            });
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hash::Sha256Digest;
    use crate::model::{ResourceRequirements, UnitId, UnitKind, Version};

    fn descriptor(arch: Option<&str>, os: Option<&str>, disk: u64) -> Descriptor {
        Descriptor {
            id: UnitId::new("A", Version::new(1, 0, 0), UnitKind::Native).unwrap(),
            provider: "acme".into(),
            priority: 50,
            provides: vec![],
            groups: vec![],
            requirements: ResourceRequirements {
                disk_space_kib: disk,
                architecture: arch.map(Into::into),
                os: os.map(Into::into),
            },
            package_sha256: Sha256Digest::of(b"a"),
            package_location: "a".into(),
        }
    }

    #[test]
    fn architecture_mismatch() {
        let p = PlatformProfile::new("armv7", "linux", 1000);
        assert_eq!(
            check_context(&descriptor(Some("x86_64"), None, 0), &p),
            vec![ContextViolation::ArchitectureMismatch {
                required: "x86_64".into(),
                actual: "armv7".into()
            }]
        );
        assert_eq!(
            check_context(&descriptor(Some("x86_64"), Some("qnx"), 0), &p).len(),
            2
        );
    }

    #[test]
    fn absent_requirements_match_anything() {
        let p = PlatformProfile::new("armv7", "linux", 0);
        assert!(check_context(&descriptor(None, None, 0), &p).is_empty());
    }

    #[test]
    fn disk_is_not_a_unit_level_violation() {
        let p = PlatformProfile::new("armv7", "linux", 10);
        assert!(check_context(&descriptor(None, None, 1_000_000_000), &p).is_empty());
    }
}
