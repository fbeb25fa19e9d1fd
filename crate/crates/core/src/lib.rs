//! Corpus curation, data-mixture search, reward shaping, and multi-candidate
//! translation fusion for machine-translation training pipelines.

pub mod chimera;
pub mod corpus;
pub mod dedup;
pub mod evalkit;
pub mod filters;
pub mod http;
pub mod jsonl;
pub mod langid;
pub mod mixopt;
pub mod ngram_lm;
pub mod rewards;
pub mod text;
