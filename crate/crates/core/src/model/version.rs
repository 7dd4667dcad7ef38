use std::cmp::Ordering;
use std::fmt;
use std::str::FromStr;

use super::ModelError;

/// A three-component version with an optional alphanumeric qualifier.
///
/// Ordering is numeric on `(major, minor, micro)`. On equal triples an
/// unqualified release sorts above any qualified one, and two qualifiers
/// compare byte-wise.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Version {
    pub major: u64,
    pub minor: u64,
    pub micro: u64,
    pub qualifier: Option<String>,
}

impl Version {
    pub const fn new(major: u64, minor: u64, micro: u64) -> Self {
        Version {
            major,
            minor,
            micro,
            qualifier: None,
        }
    }

    pub fn with_qualifier(mut self, qualifier: impl Into<String>) -> Result<Self, ModelError> {
        let q = qualifier.into();
        if !is_qualifier(&q) {
            return Err(ModelError::MalformedVersion(format!("{self}-{q}")));
        }
        self.qualifier = Some(q);
        Ok(self)
    }

    pub fn parse(text: &str) -> Result<Self, ModelError> {
        let malformed = || ModelError::MalformedVersion(text.to_string());
        let (triple, qualifier) = match text.split_once('-') {
            Some((t, q)) => (t, Some(q)),
            None => (text, None),
        };
        let mut parts = triple.split('.');
        let mut next = || -> Result<u64, ModelError> {
            let part = parts.next().ok_or_else(malformed)?;
            if part.is_empty() || !part.bytes().all(|b| b.is_ascii_digit()) {
                return Err(malformed());
            }
            part.parse().map_err(|_| malformed())
        };
        let major = next()?;
        let minor = next()?;
        let micro = next()?;
        if parts.next().is_some() {
            return Err(malformed());
        }
        let qualifier = match qualifier {
            Some(q) if is_qualifier(q) => Some(q.to_string()),
            Some(_) => return Err(malformed()),
            None => None,
        };
        Ok(Version {
            major,
            minor,
            micro,
            qualifier,
        })
    }
}

fn is_qualifier(q: &str) -> bool {
    !q.is_empty() && q.bytes().all(|b| b.is_ascii_alphanumeric())
}

impl Ord for Version {
    fn cmp(&self, other: &Self) -> Ordering {
        (self.major, self.minor, self.micro)
            .cmp(&(other.major, other.minor, other.micro))
            .then_with(|| match (&self.qualifier, &other.qualifier) {
                (None, None) => Ordering::Equal,
                (None, Some(_)) => Ordering::Greater,
                (Some(_), None) => Ordering::Less,
                (Some(a), Some(b)) => a.as_bytes().cmp(b.as_bytes()),
            })
    }
}

impl PartialOrd for Version {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Total order over versions; see [`Version`] for the rules.
pub fn compare_versions(a: &Version, b: &Version) -> Ordering {
    a.cmp(b)
}

impl fmt::Display for Version {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}.{}.{}", self.major, self.minor, self.micro)?;
        if let Some(q) = &self.qualifier {
            write!(f, "-{q}")?;
        }
        Ok(())
    }
}

impl FromStr for Version {
    type Err = ModelError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Version::parse(s)
    }
}
