//! Character n-gram multinomial Naive Bayes language identifier.
//!
//! Each class `c` gets an add-alpha smoothed distribution over the training
//! vocabulary plus one shared "unseen" bucket:
//!
//! ```text
//! P(g | c) = (count(c, g) + alpha) / (total(c) + alpha * (|V| + 1))
//! ```
//!
//! so the likelihoods of every class sum to one over `V ∪ {unseen}`.

use std::collections::{BTreeMap, HashMap};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{Document, LanguageTag};
use crate::text::fold_case;

#[derive(Debug, Error, PartialEq)]
pub enum LangIdError {
    #[error("no training documents")]
    NoDocuments,
    #[error("class {0} has no training documents")]
    EmptyClass(LanguageTag),
    #[error("document language {0} is not one of the configured classes")]
    UnexpectedClass(LanguageTag),
    #[error("smoothing alpha must be > 0, got {0}")]
    InvalidAlpha(f64),
    #[error("invalid n-gram range {0}..={1}")]
    InvalidRange(usize, usize),
    #[error("cannot identify the language of empty text")]
    EmptyText,
    #[error("min_confidence must lie in [0, 1], got {0}")]
    InvalidConfidence(f64),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LangIdConfig {
    pub min_n: usize,
    pub max_n: usize,
    pub alpha: f64,
    /// Restrict training to these classes; every one must have documents.
    #[serde(default)]
    pub classes: Option<Vec<LanguageTag>>,
}

impl Default for LangIdConfig {
    fn default() -> Self {
        LangIdConfig { min_n: 1, max_n: 3, alpha: 0.5, classes: None }
    }
}

/// Lowercased, whitespace-collapsed character n-grams of `text`.
pub fn char_ngrams(text: &str, min_n: usize, max_n: usize) -> Vec<String> {
    let folded = fold_case(text);
    let chars: Vec<char> = folded.split_whitespace().collect::<Vec<_>>().join(" ").chars().collect();
    let mut out = Vec::new();
    for n in min_n..=max_n {
        out.extend(chars.windows(n).map(|w| w.iter().collect::<String>()));
    }
    out
}

/// Mergeable per-class n-gram counts.
#[derive(Debug, Default, Clone)]
pub struct NgramCounts {
    docs: BTreeMap<LanguageTag, usize>,
    counts: BTreeMap<LanguageTag, HashMap<String, u64>>,
}

impl NgramCounts {
    pub fn add(&mut self, lang: LanguageTag, grams: impl IntoIterator<Item = String>) {
        *self.docs.entry(lang).or_default() += 1;
        let table = self.counts.entry(lang).or_default();
        for g in grams {
            *table.entry(g).or_default() += 1;
        }
    }

    pub fn merge(mut self, other: NgramCounts) -> NgramCounts {
        for (lang, n) in other.docs {
            *self.docs.entry(lang).or_default() += n;
        }
        for (lang, table) in other.counts {
            let mine = self.counts.entry(lang).or_default();
            for (g, c) in table {
                *mine.entry(g).or_default() += c;
            }
        }
        self
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LangIdModel {
    /// Classes in registry order.
    pub classes: Vec<LanguageTag>,
    pub log_priors: Vec<f64>,
    pub ngram_range: (usize, usize),
    pub smoothing_alpha: f64,
    /// Per-class log likelihood of any n-gram outside the vocabulary.
    pub unseen_log_likelihoods: Vec<f64>,
    /// n-gram -> per-class log likelihood. The keys are the vocabulary.
    pub log_likelihoods: BTreeMap<String, Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Prediction {
    pub lang: LanguageTag,
    pub confidence: f64,
    /// Normalized posterior for every class, in `classes` order.
    pub posteriors: Vec<f64>,
}

pub fn train_langid(docs: &[Document], config: &LangIdConfig) -> Result<LangIdModel, LangIdError> {
    if !(config.alpha > 0.0) || !config.alpha.is_finite() {
        return Err(LangIdError::InvalidAlpha(config.alpha));
    }
    if config.min_n == 0 || config.min_n > config.max_n {
        return Err(LangIdError::InvalidRange(config.min_n, config.max_n));
    }
    if docs.is_empty() {
        return Err(LangIdError::NoDocuments);
    }
    if let Some(classes) = &config.classes {
        if let Some(d) = docs.iter().find(|d| !classes.contains(&d.lang)) {
            return Err(LangIdError::UnexpectedClass(d.lang));
        }
    }

    let counts = docs
        .par_iter()
        .fold(NgramCounts::default, |mut acc, d| {
            acc.add(d.lang, char_ngrams(&d.text, config.min_n, config.max_n));
            acc
        })
        .reduce(NgramCounts::default, NgramCounts::merge);

    let mut classes: Vec<LanguageTag> = match &config.classes {
        Some(c) => c.clone(),
        None => counts.docs.keys().copied().collect(),
    };
    classes.sort();
    classes.dedup();
    for c in &classes {
        if !counts.docs.contains_key(c) {
            return Err(LangIdError::EmptyClass(*c));
        }
    }
    Ok(LangIdModel::from_counts(&counts, classes, config))
}

impl LangIdModel {
    fn from_counts(counts: &NgramCounts, classes: Vec<LanguageTag>, config: &LangIdConfig) -> Self {
        let total_docs: usize = classes.iter().map(|c| counts.docs[c]).sum();
        let log_priors = classes
            .iter()
            .map(|c| (counts.docs[c] as f64 / total_docs as f64).ln())
            .collect();

        let mut vocab: BTreeMap<String, Vec<u64>> = BTreeMap::new();
        for (k, c) in classes.iter().enumerate() {
            if let Some(table) = counts.counts.get(c) {
                for (g, &n) in table {
                    vocab.entry(g.clone()).or_insert_with(|| vec![0; classes.len()])[k] = n;
                }
            }
        }
        let alpha = config.alpha;
        let buckets = vocab.len() as f64 + 1.0;
        let denoms: Vec<f64> = (0..classes.len())
            .map(|k| {
                let total: u64 = vocab.values().map(|v| v[k]).sum();
                total as f64 + alpha * buckets
            })
            .collect();
        let unseen_log_likelihoods = denoms.iter().map(|d| (alpha / d).ln()).collect();
        let log_likelihoods = vocab
            .into_iter()
            .map(|(g, cs)| {
                let ll = cs
                    .iter()
                    .zip(&denoms)
                    .map(|(&n, d)| ((n as f64 + alpha) / d).ln())
                    .collect();
                (g, ll)
            })
            .collect();

        LangIdModel {
            classes,
            log_priors,
            ngram_range: (config.min_n, config.max_n),
            smoothing_alpha: alpha,
            unseen_log_likelihoods,
            log_likelihoods,
        }
    }

    /// Unnormalized log joint `log P(c) + Σ log P(g|c)` per class.
    pub fn log_joint(&self, text: &str) -> Vec<f64> {
        let mut scores = self.log_priors.clone();
        for g in char_ngrams(text, self.ngram_range.0, self.ngram_range.1) {
            let ll = self.log_likelihoods.get(&g).unwrap_or(&self.unseen_log_likelihoods);
            for (s, l) in scores.iter_mut().zip(ll) {
                *s += l;
            }
        }
        scores
    }

    pub fn predict(&self, text: &str) -> Result<Prediction, LangIdError> {
        if text.trim().is_empty() {
            return Err(LangIdError::EmptyText);
        }
        let joint = self.log_joint(text);
        let max = joint.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let exp: Vec<f64> = joint.iter().map(|j| (j - max).exp()).collect();
        let z: f64 = exp.iter().sum();
        let posteriors: Vec<f64> = exp.iter().map(|e| e / z).collect();
        // classes are in registry order, so the first maximum wins ties
        let mut best = 0;
        for (k, p) in posteriors.iter().enumerate() {
            if *p > posteriors[best] {
                best = k;
            }
        }
        Ok(Prediction { lang: self.classes[best], confidence: posteriors[best], posteriors })
    }
}

pub fn predict_lang(model: &LangIdModel, text: &str) -> Result<(LanguageTag, f64), LangIdError> {
    let p = model.predict(text)?;
    Ok((p.lang, p.confidence))
}

/// Why a document failed the language check.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LangDrop {
    pub predicted: LanguageTag,
    pub confidence: f64,
}

#[derive(Debug, Clone, Default)]
pub struct LangFilterOutcome {
    pub kept: Vec<Document>,
    pub dropped: Vec<(Document, LangDrop)>,
}

/// Keeps documents predicted as the expected language with confidence `>= min_confidence`.
///
/// With `expected = None` each document is checked against its own declared `lang`.
pub fn filter_by_language(
    model: &LangIdModel,
    docs: Vec<Document>,
    expected: Option<LanguageTag>,
    min_confidence: f64,
) -> Result<LangFilterOutcome, LangIdError> {
    if !(0.0..=1.0).contains(&min_confidence) {
        return Err(LangIdError::InvalidConfidence(min_confidence));
    }
    let preds = docs
        .par_iter()
        .map(|d| model.predict(&d.text))
        .collect::<Result<Vec<_>, _>>()?;
    let mut out = LangFilterOutcome::default();
    for (doc, p) in docs.into_iter().zip(preds) {
        let want = expected.unwrap_or(doc.lang);
        if p.lang == want && p.confidence >= min_confidence {
            out.kept.push(doc);
        } else {
            out.dropped.push((doc, LangDrop { predicted: p.lang, confidence: p.confidence }));
        }
    }
    Ok(out)
}
