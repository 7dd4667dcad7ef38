//! Minimal control-file style reader/writer: `Key: value` lines grouped into
//! stanzas separated by blank lines.

use std::fmt::Write as _;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Stanza {
    /// 1-based position in the document.
    pub ordinal: usize,
    pub fields: Vec<(String, String)>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StanzaSyntaxError {
    pub ordinal: usize,
    pub reason: String,
}

impl Stanza {
    pub fn get(&self, key: &str) -> Option<&str> {
        self.fields
            .iter()
            .find(|(k, _)| k == key)
            .map(|(_, v)| v.as_str())
    }
}

pub fn parse(text: &str) -> Result<Vec<Stanza>, StanzaSyntaxError> {
    let mut stanzas = Vec::new();
    let mut current: Vec<(String, String)> = Vec::new();
    let flush = |current: &mut Vec<(String, String)>, stanzas: &mut Vec<Stanza>| {
        if !current.is_empty() {
            stanzas.push(Stanza {
                ordinal: stanzas.len() + 1,
                fields: std::mem::take(current),
            });
        }
    };
    for line in text.split('\n') {
        if line.is_empty() {
            flush(&mut current, &mut stanzas);
            continue;
        }
        let ordinal = stanzas.len() + 1;
        let err = |reason: String| StanzaSyntaxError { ordinal, reason };
        let (key, value) = line
            .split_once(':')
            .ok_or_else(|| err(format!("line without `Key:` prefix: {line:?}")))?;
        if key.is_empty() || !key.bytes().all(|b| b.is_ascii_alphanumeric() || b == b'-') {
            return Err(err(format!("invalid field name {key:?}")));
        }
        let value = value.strip_prefix(' ').unwrap_or(value);
        if value.starts_with(' ') || value.ends_with(' ') || value.contains('\r') {
            return Err(err(format!("stray whitespace in field {key}")));
        }
        if current.iter().any(|(k, _)| k == key) {
            return Err(err(format!("repeated field {key}")));
        }
        current.push((key.to_string(), value.to_string()));
    }
    flush(&mut current, &mut stanzas);
    Ok(stanzas)
}

/// Writes one stanza. Empty values are written as `Key:`.
pub fn write(out: &mut String, fields: &[(&str, &str)]) {
    for (k, v) in fields {
        if v.is_empty() {
            let _ = writeln!(out, "{k}:");
        } else {
            let _ = writeln!(out, "{k}: {v}");
        }
    }
}
