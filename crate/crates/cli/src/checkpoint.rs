//! Append-only JSONL progress files for resumable backend loops.
//!
//! Line one holds a fingerprint of everything that determines the results;
//! each further line is one finished work unit. A torn final line from a
//! crash is dropped when the file is reopened.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::sync::Mutex;

use log::{info, warn};
use sentiprobe_core::report::ReportError;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

#[derive(Serialize, Deserialize)]
struct Header {
    fingerprint: String,
}

#[derive(Serialize, Deserialize)]
struct Entry<T> {
    index: usize,
    value: T,
}

pub struct Checkpoint<T> {
    path: PathBuf,
    file: Mutex<File>,
    done: BTreeMap<usize, T>,
}

impl<T: Serialize + DeserializeOwned> Checkpoint<T> {
    pub fn open(path: &Path, fingerprint: &str) -> Result<Self, ReportError> {
        let done = match File::open(path) {
            Ok(f) => read_entries(BufReader::new(f), fingerprint),
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => BTreeMap::new(),
            Err(e) => return Err(ReportError::io(path, e)),
        };
        if !done.is_empty() {
            info!("resuming from {} ({} units done)", path.display(), done.len());
        }

        // rewrite compacted so a torn tail never sits before new lines
        let mut file = File::create(path).map_err(|e| ReportError::io(path, e))?;
        let mut text = line(&Header { fingerprint: fingerprint.to_string() });
        for (&index, value) in &done {
            text.push_str(&line(&Entry { index, value }));
        }
        file.write_all(text.as_bytes()).map_err(|e| ReportError::io(path, e))?;
        file.flush().map_err(|e| ReportError::io(path, e))?;
        Ok(Self { path: path.to_path_buf(), file: Mutex::new(file), done })
    }

    pub fn get(&self, index: usize) -> Option<&T> {
        self.done.get(&index)
    }

    pub fn len(&self) -> usize {
        self.done.len()
    }

    pub fn is_empty(&self) -> bool {
        self.done.is_empty()
    }

    pub fn record(&self, index: usize, value: &T) -> Result<(), ReportError> {
        let text = line(&Entry { index, value });
        let mut file = self.file.lock().unwrap_or_else(|p| p.into_inner());
        file.write_all(text.as_bytes())
            .and_then(|_| file.flush())
            .map_err(|e| ReportError::io(&self.path, e))
    }

    /// Removes the file once the loop has completed.
    pub fn finish(self) -> Result<(), ReportError> {
        drop(self.file);
        std::fs::remove_file(&self.path).map_err(|e| ReportError::io(&self.path, e))
    }
}

fn line<S: Serialize>(value: &S) -> String {
    let mut s = serde_json::to_string(value).expect("checkpoint entry serializes");
    s.push('\n');
    s
}

fn read_entries<T: DeserializeOwned>(reader: impl BufRead, fingerprint: &str) -> BTreeMap<usize, T> {
    let mut lines = reader.lines();
    let header: Option<Header> = lines
        .next()
        .and_then(|l| l.ok())
        .and_then(|l| serde_json::from_str(&l).ok());
    match header {
        Some(h) if h.fingerprint == fingerprint => {}
        Some(_) => {
            warn!("checkpoint belongs to different inputs; starting over");
            return BTreeMap::new();
        }
        None => return BTreeMap::new(),
    }
    let mut done = BTreeMap::new();
    for l in lines {
        let Ok(l) = l else { break };
        match serde_json::from_str::<Entry<T>>(&l) {
            Ok(e) => {
                done.insert(e.index, e.value);
            }
            Err(_) => {
                warn!("ignoring unreadable checkpoint line");
                break;
            }
        }
    }
    done
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn resume_and_torn_tail() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("ck.jsonl");
        {
            let ck: Checkpoint<Vec<f64>> = Checkpoint::open(&path, "a").unwrap();
            ck.record(0, &vec![0.1, 0.2]).unwrap();
            ck.record(2, &vec![1.0 / 3.0]).unwrap();
        }
        // simulate a crash mid-write
        let mut f = std::fs::OpenOptions::new().append(true).open(&path).unwrap();
        f.write_all(b"{\"index\":3,\"val").unwrap();
        drop(f);

        let ck: Checkpoint<Vec<f64>> = Checkpoint::open(&path, "a").unwrap();
        assert_eq!(ck.len(), 2);
        assert_eq!(ck.get(2), Some(&vec![1.0 / 3.0]));
        ck.record(3, &vec![0.5]).unwrap();
        drop(ck);
        let ck: Checkpoint<Vec<f64>> = Checkpoint::open(&path, "a").unwrap();
        assert_eq!(ck.len(), 3);
        drop(ck);

        let fresh: Checkpoint<Vec<f64>> = Checkpoint::open(&path, "b").unwrap();
        assert!(fresh.is_empty());
        fresh.finish().unwrap();
        assert!(!path.exists());
    }
}
