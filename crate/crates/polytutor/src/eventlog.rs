//! Append-only event log on disk.
//!
//! Newline-delimited JSON, one [`LearnerEvent`] per line, UTF-8, fields in
//! declaration order (`sequence_no`, `learner_id`, `timestamp`, `payload`).
//! Events for many learners interleave in one file; each learner's events
//! appear in sequence order.
//!
//! A batch of events is written with a single `write_all` on a file opened
//! in append mode, so a crash can only leave a torn final line. Opening a
//! log drops such a line.

use std::collections::BTreeMap;
use std::fs::{File, OpenOptions};
use std::io::{self, Read, Seek, SeekFrom, Write};
use std::path::{Path, PathBuf};
use std::sync::Mutex;

use polytutor_core::learner::LearnerEvent;

#[derive(Debug, thiserror::Error)]
pub enum LogError {
    #[error("event log {path}: {source}")]
    Io { path: String, source: io::Error },
    #[error("event log line {line}: {message}")]
    Parse { line: usize, message: String },
}

/// What [`EventLog::open`] found in an existing file.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Recovery {
    /// Bytes of an incomplete final line that were discarded.
    pub truncated_bytes: u64,
}

#[derive(Debug)]
pub struct EventLog {
    path: PathBuf,
    file: Mutex<File>,
    fsync: bool,
}

impl EventLog {
    /// Opens or creates the log for appending, repairing a torn tail.
    pub fn open(path: &Path) -> Result<(Self, Recovery), LogError> {
        let io_err = |source| LogError::Io {
            path: path.display().to_string(),
            source,
        };
        let mut file = OpenOptions::new()
            .read(true)
            .append(true)
            .create(true)
            .open(path)
            .map_err(io_err)?;
        let recovery = repair_tail(&mut file).map_err(io_err)?;
        Ok((
            Self {
                path: path.to_path_buf(),
                file: Mutex::new(file),
                fsync: true,
            },
            recovery,
        ))
    }

    /// Skip `fsync` after each batch. For simulations and tests.
    pub fn without_fsync(mut self) -> Self {
        self.fsync = false;
        self
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    /// Appends `events` atomically with respect to other appenders.
    pub fn append(&self, events: &[LearnerEvent]) -> Result<(), LogError> {
        if events.is_empty() {
            return Ok(());
        }
        let bytes = encode(events);
        let mut file = self.file.lock().unwrap_or_else(|p| p.into_inner());
        let io_err = |source| LogError::Io {
            path: self.path.display().to_string(),
            source,
        };
        file.write_all(&bytes).map_err(io_err)?;
        if self.fsync {
            file.sync_data().map_err(io_err)?;
        }
        Ok(())
    }

    /// Every event currently in the file.
    pub fn read_all(&self) -> Result<Vec<LearnerEvent>, LogError> {
        let _guard = self.file.lock().unwrap_or_else(|p| p.into_inner());
        read_log(&self.path)
    }
}

/// Serializes events as NDJSON lines.
pub fn encode(events: &[LearnerEvent]) -> Vec<u8> {
    let mut out = Vec::new();
    for event in events {
        serde_json::to_writer(&mut out, event).expect("events always serialize");
        out.push(b'\n');
    }
    out
}

pub fn parse_log(text: &str) -> Result<Vec<LearnerEvent>, LogError> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            serde_json::from_str(l).map_err(|e| LogError::Parse {
                line: i + 1,
                message: e.to_string(),
            })
        })
        .collect()
}

pub fn read_log(path: &Path) -> Result<Vec<LearnerEvent>, LogError> {
    let text = std::fs::read_to_string(path).map_err(|source| LogError::Io {
        path: path.display().to_string(),
        source,
    })?;
    parse_log(&text)
}

pub fn write_log(path: &Path, events: &[LearnerEvent]) -> Result<(), LogError> {
    std::fs::write(path, encode(events)).map_err(|source| LogError::Io {
        path: path.display().to_string(),
        source,
    })
}

/// Splits an interleaved log per learner, keeping file order.
pub fn group_by_learner(events: Vec<LearnerEvent>) -> BTreeMap<String, Vec<LearnerEvent>> {
    let mut groups: BTreeMap<String, Vec<LearnerEvent>> = BTreeMap::new();
    for event in events {
        groups.entry(event.learner_id.clone()).or_default().push(event);
    }
    groups
}

fn repair_tail(file: &mut File) -> io::Result<Recovery> {
    let mut contents = Vec::new();
    file.seek(SeekFrom::Start(0))?;
    file.read_to_end(&mut contents)?;
    let complete = contents.iter().rposition(|&b| b == b'\n').map_or(0, |i| i + 1);
    let tail = &contents[complete..];
    if tail.is_empty() {
        return Ok(Recovery::default());
    }
    let whole = std::str::from_utf8(tail)
        .ok()
        .is_some_and(|t| serde_json::from_str::<LearnerEvent>(t).is_ok());
    if whole {
        // a complete record that only lacks its newline
        file.write_all(b"\n")?;
        return Ok(Recovery::default());
    }
    file.set_len(complete as u64)?;
    Ok(Recovery {
        truncated_bytes: tail.len() as u64,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use polytutor_core::learner::EventPayload;
    use polytutor_core::translation::LanguageCode;

    fn registered(id: &str) -> LearnerEvent {
        LearnerEvent {
            sequence_no: 1,
            learner_id: id.into(),
            timestamp: 7,
            payload: EventPayload::Registered {
                language: LanguageCode::new("fa").unwrap(),
            },
        }
    }

    #[test]
    fn line_format_is_stable() {
        let line = String::from_utf8(encode(&[registered("a")])).unwrap();
        assert_eq!(
            line,
            "{\"sequence_no\":1,\"learner_id\":\"a\",\"timestamp\":7,\"payload\":{\"type\":\"Registered\",\"language\":\"fa\"}}\n"
        );
    }

    #[test]
    fn appends_and_reads_back() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("events.ndjson");
        let (log, recovery) = EventLog::open(&path).unwrap();
        assert_eq!(recovery, Recovery::default());
        log.append(&[registered("a"), registered("b")]).unwrap();
        drop(log);
        let (log, _) = EventLog::open(&path).unwrap();
        log.append(&[registered("c")]).unwrap();
        let events = log.read_all().unwrap();
        assert_eq!(events.len(), 3);
        let groups = group_by_learner(events);
        assert_eq!(groups.keys().collect::<Vec<_>>(), ["a", "b", "c"]);
    }

    #[test]
    fn torn_tail_is_dropped_on_open() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("events.ndjson");
        let mut bytes = encode(&[registered("a")]);
        bytes.extend_from_slice(b"{\"sequence_no\":1,\"learner_");
        std::fs::write(&path, &bytes).unwrap();
        let (log, recovery) = EventLog::open(&path).unwrap();
        assert_eq!(recovery.truncated_bytes, 26);
        log.append(&[registered("b")]).unwrap();
        assert_eq!(log.read_all().unwrap().len(), 2);
    }

    #[test]
    fn missing_final_newline_is_kept() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("events.ndjson");
        let mut bytes = encode(&[registered("a")]);
        bytes.pop();
        std::fs::write(&path, &bytes).unwrap();
        let (log, recovery) = EventLog::open(&path).unwrap();
        assert_eq!(recovery.truncated_bytes, 0);
        log.append(&[registered("b")]).unwrap();
        assert_eq!(log.read_all().unwrap().len(), 2);
    }

    #[test]
    fn parse_errors_name_the_line() {
        let text = format!(
            "{}\nnot json\n",
            String::from_utf8(encode(&[registered("a")])).unwrap().trim_end()
        );
        match parse_log(&text) {
            Err(LogError::Parse { line: 2, .. }) => {}
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn concurrent_batches_do_not_interleave() {
        let dir = tempfile::tempdir().unwrap();
        let (log, _) = EventLog::open(&dir.path().join("events.ndjson")).unwrap();
        let log = log.without_fsync();
        std::thread::scope(|s| {
            for t in 0..8 {
                let log = &log;
                s.spawn(move || {
                    for i in 0..50 {
                        let id = format!("t{t}");
                        let batch: Vec<_> = (1..=3)
                            .map(|n| LearnerEvent {
                                sequence_no: i * 3 + n,
                                ..registered(&id)
                            })
                            .collect();
                        log.append(&batch).unwrap();
                    }
                });
            }
        });
        let groups = group_by_learner(log.read_all().unwrap());
        assert_eq!(groups.len(), 8);
        for events in groups.values() {
            let seqs: Vec<u64> = events.iter().map(|e| e.sequence_no).collect();
            assert_eq!(seqs, (1..=150).collect::<Vec<_>>());
        }
    }
}
