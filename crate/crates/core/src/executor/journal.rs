//! Append-only execution journal.
//!
//! One line per state change: `SEQ VERB NAME VERSION KIND UNDO-HASH STATE`,
//! tab separated. An action is written as `pending` before its layer manager
//! is called, then `done` once the manager and the status file agree, and
//! `undone` after rollback. The last line for a sequence number wins.

use std::collections::BTreeMap;
use std::fs::{self, File, OpenOptions};
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use crate::hash::Sha256Digest;
use crate::model::{UnitId, Version};

use super::Verb;

pub const JOURNAL_FILE: &str = ".resolvit.journal";
pub const UNDO_DIR: &str = ".resolvit.undo";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EntryState {
    Pending,
    Done,
    Undone,
}

impl EntryState {
    fn as_str(self) -> &'static str {
        match self {
            EntryState::Pending => "pending",
            EntryState::Done => "done",
            EntryState::Undone => "undone",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct JournalEntry {
    pub seq: usize,
    pub verb: Verb,
    pub unit: UnitId,
    /// Package digest needed to reinstall a removed unit.
    pub undo_hash: Option<Sha256Digest>,
    pub state: EntryState,
}

impl JournalEntry {
    fn line(&self) -> String {
        format!(
            "{}\t{}\t{}\t{}\t{}\t{}\t{}\n",
            self.seq,
            self.verb,
            self.unit.name,
            self.unit.version,
            self.unit.kind.as_str(),
            self.undo_hash.as_ref().map_or("-", |h| h.as_str()),
            self.state.as_str()
        )
    }

    fn parse(line: &str) -> Option<Self> {
        let f: Vec<&str> = line.split('\t').collect();
        let [seq, verb, name, version, kind, hash, state] = f.as_slice() else {
            return None;
        };
        let unit = UnitId::new(*name, version.parse::<Version>().ok()?, kind.parse().ok()?).ok()?;
        Some(JournalEntry {
            seq: seq.parse().ok()?,
            verb: verb.parse().ok()?,
            unit,
            undo_hash: match *hash {
                "-" => None,
                h => Some(h.parse().ok()?),
            },
            state: match *state {
                "pending" => EntryState::Pending,
                "done" => EntryState::Done,
                "undone" => EntryState::Undone,
                _ => return None,
            },
        })
    }
}

#[derive(Debug)]
pub struct Journal {
    root: PathBuf,
    file: File,
}

impl Journal {
    pub fn path(root: &Path) -> PathBuf {
        root.join(JOURNAL_FILE)
    }

    pub fn undo_path(root: &Path, seq: usize) -> PathBuf {
        root.join(UNDO_DIR).join(seq.to_string())
    }

    pub fn exists(root: &Path) -> bool {
        Self::path(root).exists()
    }

    /// Opens the journal for appending, creating it if needed.
    pub fn open(root: &Path) -> io::Result<Self> {
        let file = OpenOptions::new()
            .create(true)
            .append(true)
            .open(Self::path(root))?;
        Ok(Journal {
            root: root.to_path_buf(),
            file,
        })
    }

    pub fn append(&mut self, entry: &JournalEntry) -> io::Result<()> {
        self.file.write_all(entry.line().as_bytes())?;
        self.file.sync_data()
    }

    /// Latest state of every action, ordered by sequence number. A torn
    /// final line from an interrupted append is ignored.
    pub fn load(root: &Path) -> io::Result<Vec<JournalEntry>> {
        let text = match fs::read_to_string(Self::path(root)) {
            Ok(t) => t,
            Err(e) if e.kind() == io::ErrorKind::NotFound => return Ok(Vec::new()),
            Err(e) => return Err(e),
        };
        let mut latest: BTreeMap<usize, JournalEntry> = BTreeMap::new();
        let complete = match text.rfind('\n') {
            Some(i) => &text[..i],
            None => "",
        };
        for (n, line) in complete.lines().enumerate() {
            let entry = JournalEntry::parse(line).ok_or_else(|| {
                io::Error::new(
                    io::ErrorKind::InvalidData,
                    format!("journal line {}: {line:?}", n + 1),
                )
            })?;
            latest.insert(entry.seq, entry);
        }
        Ok(latest.into_values().collect())
    }

    /// Deletes the journal and any undo data.
    pub fn clear(self) -> io::Result<()> {
        Self::discard(&self.root)
    }

    pub fn discard(root: &Path) -> io::Result<()> {
        match fs::remove_dir_all(root.join(UNDO_DIR)) {
            Err(e) if e.kind() != io::ErrorKind::NotFound => return Err(e),
            _ => {}
        }
        match fs::remove_file(Self::path(root)) {
            Err(e) if e.kind() != io::ErrorKind::NotFound => Err(e),
            _ => Ok(()),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::UnitKind;

    fn entry(seq: usize, state: EntryState) -> JournalEntry {
        JournalEntry {
            seq,
            verb: Verb::Remove,
            unit: UnitId::new("a.b", Version::new(1, 0, 0), UnitKind::Native).unwrap(),
            undo_hash: Some(Sha256Digest::of(b"pkg")),
            state,
        }
    }

    #[test]
    fn last_state_wins_and_torn_tail_is_ignored() {
        let dir = tempfile::tempdir().unwrap();
        let mut j = Journal::open(dir.path()).unwrap();
        j.append(&entry(1, EntryState::Pending)).unwrap();
        j.append(&entry(1, EntryState::Done)).unwrap();
        j.append(&entry(2, EntryState::Pending)).unwrap();
        drop(j);
        let mut f = OpenOptions::new()
            .append(true)
            .open(Journal::path(dir.path()))
            .unwrap();
        f.write_all(b"3\tinstall\tx").unwrap();
        let got = Journal::load(dir.path()).unwrap();
        assert_eq!(
            got,
            vec![entry(1, EntryState::Done), entry(2, EntryState::Pending)]
        );
    }

    #[test]
    fn line_format() {
        let line = entry(7, EntryState::Undone).line();
        let fields: Vec<&str> = line.trim_end().split('\t').collect();
        assert_eq!(fields.len(), 7);
        assert_eq!(&fields[..5], &["7", "remove", "a.b", "1.0.0", "native"]);
        assert_eq!(fields[6], "undone");
    }
}
