//! Exit-code classification: validation problems exit 1, IO and runtime failures exit 2.

use std::fmt;

use mtcurate::corpus::CorpusError;
use mtcurate::jsonl::JsonlError;

/// Marks an error as a validation failure (bad flag, config, or input schema).
#[derive(Debug)]
pub struct Invalid(pub String);

impl fmt::Display for Invalid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for Invalid {}

pub fn invalid(e: impl fmt::Display) -> anyhow::Error {
    anyhow::Error::new(Invalid(e.to_string()))
}

pub fn runtime(e: impl fmt::Display) -> anyhow::Error {
    anyhow::anyhow!("{e}")
}

pub fn jsonl_err(e: JsonlError) -> anyhow::Error {
    match e {
        JsonlError::Parse { .. } => invalid(e),
        other => runtime(other),
    }
}

pub fn corpus_err(e: CorpusError) -> anyhow::Error {
    match e {
        CorpusError::Io(j) => jsonl_err(j),
        other => invalid(other),
    }
}

pub fn exit_code(e: &anyhow::Error) -> i32 {
    if e.chain().any(|c| c.is::<Invalid>()) {
        1
    } else {
        2
    }
}
