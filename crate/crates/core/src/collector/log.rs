use std::fs::{File, OpenOptions};
use std::io::{self, BufRead, BufWriter, Write};
use std::path::Path;
use std::sync::Mutex;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use crate::net::Ip4;
use crate::time::Timestamp;

/// One query as seen by the server, before any decoding.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LogEntry {
    pub src: Ip4,
    pub name: String,
    pub ts: Timestamp,
}

/// Append-only destination for served queries. Implementations serialize
/// concurrent appends.
pub trait ObservationSink: Send + Sync {
    fn append(&self, entry: &LogEntry) -> io::Result<()>;
}

#[derive(Debug, Default)]
pub struct MemoryLog {
    entries: Mutex<Vec<LogEntry>>,
}

impl MemoryLog {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn snapshot(&self) -> Vec<LogEntry> {
        self.entries.lock().expect("log lock").clone()
    }

    pub fn len(&self) -> usize {
        self.entries.lock().expect("log lock").len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

impl ObservationSink for MemoryLog {
    fn append(&self, entry: &LogEntry) -> io::Result<()> {
        self.entries.lock().expect("log lock").push(entry.clone());
        Ok(())
    }
}

const FLUSH_EVERY: Duration = Duration::from_secs(1);

struct Inner {
    out: BufWriter<File>,
    last_flush: Instant,
}

/// JSONL file log, flushed at most a second after each append.
pub struct JsonlLog {
    inner: Mutex<Inner>,
}

impl JsonlLog {
    /// Opens `path` for appending, creating it if needed.
    pub fn open(path: &Path) -> io::Result<Self> {
        let f = OpenOptions::new().create(true).append(true).open(path)?;
        Ok(JsonlLog {
            inner: Mutex::new(Inner {
                out: BufWriter::new(f),
                last_flush: Instant::now(),
            }),
        })
    }

    pub fn flush(&self) -> io::Result<()> {
        let mut g = self.inner.lock().expect("log lock");
        g.last_flush = Instant::now();
        g.out.flush()
    }
}

impl ObservationSink for JsonlLog {
    fn append(&self, entry: &LogEntry) -> io::Result<()> {
        let mut line = serde_json::to_vec(entry)?;
        line.push(b'\n');
        let mut g = self.inner.lock().expect("log lock");
        // one write per record keeps lines whole
        g.out.write_all(&line)?;
        if g.last_flush.elapsed() >= FLUSH_EVERY {
            g.last_flush = Instant::now();
            g.out.flush()?;
        }
        Ok(())
    }
}

impl Drop for JsonlLog {
    fn drop(&mut self) {
        if let Ok(g) = self.inner.get_mut() {
            let _ = g.out.flush();
        }
    }
}

/// Reads a JSONL log, returning entries and the number of unreadable lines.
pub fn read_log<R: BufRead>(input: R) -> io::Result<(Vec<LogEntry>, usize)> {
    let mut out = Vec::new();
    let mut bad = 0;
    for line in input.lines() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        match serde_json::from_str(&line) {
            Ok(e) => out.push(e),
            Err(_) => bad += 1,
        }
    }
    Ok((out, bad))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn jsonl_file_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("auth.jsonl");
        let e = LogEntry {
            src: "9.9.9.9".parse().unwrap(),
            name: "abcdef.01020304.s1.zone.test".into(),
            ts: Timestamp(1_500_000),
        };
        {
            let log = JsonlLog::open(&path).unwrap();
            log.append(&e).unwrap();
            log.append(&e).unwrap();
        }
        let text = std::fs::read_to_string(&path).unwrap();
        assert_eq!(
            text.lines().next().unwrap(),
            r#"{"src":"9.9.9.9","name":"abcdef.01020304.s1.zone.test","ts":1.5}"#
        );
        let (back, bad) = read_log(text.as_bytes()).unwrap();
        assert_eq!(back, vec![e.clone(), e]);
        assert_eq!(bad, 0);
    }
}
