use std::cmp::Ordering;
use std::fmt;
use std::str::FromStr;

use super::{ModelError, Version};

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Bound {
    pub version: Version,
    pub inclusive: bool,
}

/// Constraint on acceptable versions.
///
/// Textual forms: `*`, a bare version (exact match), or an interval such as
/// `[1.0.0,2.0.0)`. Either side of an interval may be left empty to leave it
/// unbounded (`[1.0.0,)`); at least one side must be present.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum VersionRange {
    Any,
    Exact(Version),
    Interval {
        lower: Option<Bound>,
        upper: Option<Bound>,
    },
}

impl VersionRange {
    pub fn interval(lower: Option<Bound>, upper: Option<Bound>) -> Result<Self, ModelError> {
        let range = VersionRange::Interval { lower, upper };
        range.validate()?;
        Ok(range)
    }

    fn validate(&self) -> Result<(), ModelError> {
        if let VersionRange::Interval { lower, upper } = self {
            match (lower, upper) {
                (None, None) => return Err(ModelError::MalformedRange(self.to_string())),
                (Some(lo), Some(hi)) => match lo.version.cmp(&hi.version) {
                    Ordering::Greater => return Err(ModelError::MalformedRange(self.to_string())),
                    Ordering::Equal if !(lo.inclusive && hi.inclusive) => {
                        return Err(ModelError::MalformedRange(self.to_string()))
                    }
                    _ => {}
                },
                _ => {}
            }
        }
        Ok(())
    }

    pub fn contains(&self, v: &Version) -> bool {
        match self {
            VersionRange::Any => true,
            VersionRange::Exact(e) => e == v,
            VersionRange::Interval { lower, upper } => {
                let lower_ok = lower.as_ref().is_none_or(|b| match v.cmp(&b.version) {
                    Ordering::Greater => true,
                    Ordering::Equal => b.inclusive,
                    Ordering::Less => false,
                });
                let upper_ok = upper.as_ref().is_none_or(|b| match v.cmp(&b.version) {
                    Ordering::Less => true,
                    Ordering::Equal => b.inclusive,
                    Ordering::Greater => false,
                });
                lower_ok && upper_ok
            }
        }
    }

    pub fn parse(text: &str) -> Result<Self, ModelError> {
        let malformed = || ModelError::MalformedRange(text.to_string());
        if text == "*" {
            return Ok(VersionRange::Any);
        }
        let first = text.chars().next().ok_or_else(malformed)?;
        if first != '[' && first != '(' {
            return Version::parse(text)
                .map(VersionRange::Exact)
                .map_err(|_| malformed());
        }
        let last = text.chars().last().ok_or_else(malformed)?;
        if text.len() < 3 || (last != ']' && last != ')') {
            return Err(malformed());
        }
        let inner = &text[1..text.len() - 1];
        let (lo, hi) = inner.split_once(',').ok_or_else(malformed)?;
        let side = |s: &str, inclusive: bool| -> Result<Option<Bound>, ModelError> {
            if s.is_empty() {
                Ok(None)
            } else {
                let version = Version::parse(s).map_err(|_| malformed())?;
                Ok(Some(Bound { version, inclusive }))
            }
        };
        let lower = side(lo, first == '[')?;
        let upper = side(hi, last == ']')?;
        VersionRange::interval(lower, upper).map_err(|_| malformed())
    }
}

/// `true` iff `v` satisfies `r`.
pub fn range_contains(r: &VersionRange, v: &Version) -> bool {
    r.contains(v)
}

impl fmt::Display for VersionRange {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            VersionRange::Any => f.write_str("*"),
            VersionRange::Exact(v) => write!(f, "{v}"),
            VersionRange::Interval { lower, upper } => {
                match lower {
                    Some(b) => write!(f, "{}{}", if b.inclusive { '[' } else { '(' }, b.version)?,
                    None => f.write_str("(")?,
                }
                f.write_str(",")?;
                match upper {
                    Some(b) => write!(f, "{}{}", b.version, if b.inclusive { ']' } else { ')' }),
                    None => f.write_str(")"),
                }
            }
        }
    }
}

impl FromStr for VersionRange {
    type Err = ModelError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        VersionRange::parse(s)
    }
}
