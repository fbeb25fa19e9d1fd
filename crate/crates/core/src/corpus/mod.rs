//! Canonical corpus records and their JSON Lines representation.

mod lang;

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::jsonl::{self, JsonlError};

pub use lang::{classify_direction, DirectionGroup, LanguageTag, Segmentation};

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("unknown language tag `{0}`")]
    UnknownLanguage(String),
    #[error("source and target language are both `{0}`")]
    SameLanguage(String),
    #[error("line {line}: {message}")]
    Schema { line: usize, message: String },
    #[error(transparent)]
    Io(#[from] JsonlError),
}

/// Where a monolingual document came from. Drives quality weighting.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Provenance {
    Academic,
    Book,
    ProfessionalWeb,
    GeneralWeb,
    #[default]
    Other,
}

pub type Scores = BTreeMap<String, f64>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Document {
    pub id: String,
    pub lang: LanguageTag,
    pub text: String,
    #[serde(default)]
    pub provenance: Provenance,
    #[serde(default)]
    pub scores: Scores,
    /// Opaque discipline / industry / theme labels.
    #[serde(default)]
    pub tags: BTreeSet<String>,
}

impl Document {
    pub fn new(id: impl Into<String>, lang: LanguageTag, text: impl Into<String>) -> Self {
        Document {
            id: id.into(),
            lang,
            text: text.into(),
            provenance: Provenance::Other,
            scores: Scores::new(),
            tags: BTreeSet::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParallelPair {
    pub id: String,
    pub src_lang: LanguageTag,
    pub tgt_lang: LanguageTag,
    pub src_text: String,
    pub tgt_text: String,
    #[serde(default)]
    pub scores: Scores,
}

impl ParallelPair {
    pub fn new(
        id: impl Into<String>,
        src_lang: LanguageTag,
        tgt_lang: LanguageTag,
        src_text: impl Into<String>,
        tgt_text: impl Into<String>,
    ) -> Self {
        ParallelPair {
            id: id.into(),
            src_lang,
            tgt_lang,
            src_text: src_text.into(),
            tgt_text: tgt_text.into(),
            scores: Scores::new(),
        }
    }
}

/// Shared behaviour of monolingual and bilingual records.
pub trait Record: Serialize + serde::de::DeserializeOwned + Clone + Send + Sync {
    const KIND: CorpusKind;
    fn id(&self) -> &str;
    fn scores_mut(&mut self) -> &mut Scores;
    /// Checks per-record invariants, returning a human-readable violation.
    fn validate(&self) -> Result<(), String>;
}

impl Record for Document {
    const KIND: CorpusKind = CorpusKind::Mono;

    fn id(&self) -> &str {
        &self.id
    }

    fn scores_mut(&mut self) -> &mut Scores {
        &mut self.scores
    }

    fn validate(&self) -> Result<(), String> {
        if self.id.is_empty() {
            return Err("empty id".into());
        }
        if self.text.trim().is_empty() {
            return Err(format!("document `{}` has empty text", self.id));
        }
        Ok(())
    }
}

impl Record for ParallelPair {
    const KIND: CorpusKind = CorpusKind::Parallel;

    fn id(&self) -> &str {
        &self.id
    }

    fn scores_mut(&mut self) -> &mut Scores {
        &mut self.scores
    }

    fn validate(&self) -> Result<(), String> {
        if self.id.is_empty() {
            return Err("empty id".into());
        }
        if self.src_lang == self.tgt_lang {
            return Err(format!(
                "pair `{}` has src_lang == tgt_lang ({})",
                self.id, self.src_lang
            ));
        }
        if self.src_text.trim().is_empty() || self.tgt_text.trim().is_empty() {
            return Err(format!("pair `{}` has an empty side", self.id));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CorpusKind {
    Mono,
    Parallel,
}

/// A whole corpus of either kind.
#[derive(Debug, Clone, PartialEq)]
pub enum Corpus {
    Mono(Vec<Document>),
    Parallel(Vec<ParallelPair>),
}

impl Corpus {
    pub fn kind(&self) -> CorpusKind {
        match self {
            Corpus::Mono(_) => CorpusKind::Mono,
            Corpus::Parallel(_) => CorpusKind::Parallel,
        }
    }

    pub fn len(&self) -> usize {
        match self {
            Corpus::Mono(d) => d.len(),
            Corpus::Parallel(p) => p.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Reads and validates a corpus of `kind` from a JSON Lines file.
pub fn read_corpus(path: &Path, kind: CorpusKind) -> Result<Corpus, CorpusError> {
    Ok(match kind {
        CorpusKind::Mono => Corpus::Mono(read_records(path)?),
        CorpusKind::Parallel => Corpus::Parallel(read_records(path)?),
    })
}

/// Typed variant of [`read_corpus`].
pub fn read_records<R: Record>(path: &Path) -> Result<Vec<R>, CorpusError> {
    let rows = jsonl::read_jsonl::<serde_json::Value>(path)?;
    let mut seen = HashSet::new();
    let mut out = Vec::with_capacity(rows.len());
    for (line, value) in rows {
        let rec: R = serde_json::from_value(value)
            .map_err(|e| CorpusError::Schema { line, message: e.to_string() })?;
        rec.validate().map_err(|message| CorpusError::Schema { line, message })?;
        if !seen.insert(rec.id().to_string()) {
            return Err(CorpusError::Schema {
                line,
                message: format!("duplicate id `{}`", rec.id()),
            });
        }
        out.push(rec);
    }
    Ok(out)
}

/// Writes records as JSON Lines, replacing `path` atomically. Returns the count written.
pub fn write_corpus<R: Record>(records: &[R], path: &Path) -> Result<usize, CorpusError> {
    Ok(jsonl::write_jsonl(path, records)?)
}

pub fn write_any_corpus(corpus: &Corpus, path: &Path) -> Result<usize, CorpusError> {
    match corpus {
        Corpus::Mono(d) => write_corpus(d, path),
        Corpus::Parallel(p) => write_corpus(p, path),
    }
}
