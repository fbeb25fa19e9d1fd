//! JSON Lines helpers shared by every file-backed record type.
//!
//! Writes go through a temporary file in the destination directory and are
//! renamed into place once complete, so a failed write never leaves a partial
//! file behind.

use std::fs::File;
use std::io::{self, BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::Serialize;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum JsonlError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error("{path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },
    #[error("serialization failed: {0}")]
    Serialize(#[from] serde_json::Error),
}

impl JsonlError {
    pub(crate) fn io(path: &Path, source: io::Error) -> Self {
        JsonlError::Io { path: path.to_path_buf(), source }
    }
}

/// Reads one JSON value per non-blank line, returning each with its 1-based line number.
pub fn read_jsonl<T: DeserializeOwned>(path: &Path) -> Result<Vec<(usize, T)>, JsonlError> {
    let file = File::open(path).map_err(|e| JsonlError::io(path, e))?;
    let mut out = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| JsonlError::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let value = serde_json::from_str(&line).map_err(|e| JsonlError::Parse {
            path: path.to_path_buf(),
            line: i + 1,
            message: e.to_string(),
        })?;
        out.push((i + 1, value));
    }
    Ok(out)
}

/// Reads a JSON Lines file, discarding line numbers.
pub fn read_values<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>, JsonlError> {
    Ok(read_jsonl(path)?.into_iter().map(|(_, v)| v).collect())
}

/// Serializes `records` one per line and atomically replaces `path`.
pub fn write_jsonl<'a, T, I>(path: &Path, records: I) -> Result<usize, JsonlError>
where
    T: Serialize + 'a,
    I: IntoIterator<Item = &'a T>,
{
    atomic_write(path, |w| {
        let mut n = 0;
        for r in records {
            serde_json::to_writer(&mut *w, r).map_err(io::Error::other)?;
            w.write_all(b"\n")?;
            n += 1;
        }
        Ok(n)
    })
}

/// Writes a single pretty-printed JSON document atomically.
pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), JsonlError> {
    atomic_write(path, |w| {
        serde_json::to_writer_pretty(&mut *w, value).map_err(io::Error::other)?;
        w.write_all(b"\n")
    })
}

/// Reads a single JSON document.
pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T, JsonlError> {
    let file = File::open(path).map_err(|e| JsonlError::io(path, e))?;
    serde_json::from_reader(BufReader::new(file)).map_err(|e| JsonlError::Parse {
        path: path.to_path_buf(),
        line: e.line(),
        message: e.to_string(),
    })
}

/// Runs `body` against a buffered temp file next to `path`, then renames it over `path`.
pub fn atomic_write<R>(
    path: &Path,
    body: impl FnOnce(&mut BufWriter<&mut File>) -> io::Result<R>,
) -> Result<R, JsonlError> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| JsonlError::io(path, e))?;
    let out = {
        let mut w = BufWriter::new(tmp.as_file_mut());
        let out = body(&mut w).map_err(|e| JsonlError::io(path, e))?;
        w.flush().map_err(|e| JsonlError::io(path, e))?;
        out
    };
    tmp.persist(path).map_err(|e| JsonlError::io(path, e.error))?;
    Ok(out)
}
