//! Reward components for translation RL: terminology overlap, a binary
//! repetition detector, their clamped weighted total, and group-relative
//! advantage normalization.

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{LanguageTag, Segmentation};
use crate::filters::{ScoreInput, Scorer};
use crate::jsonl::{read_json, JsonlError};
use crate::text::{fold_case, tokenize};

pub const DEFAULT_EPSILON: f64 = 1e-8;

#[derive(Debug, Error)]
pub enum RewardError {
    #[error("term table: {0}")]
    InvalidTable(String),
    #[error("{name} = {value} is outside [0, 1]")]
    ComponentOutOfRange { name: &'static str, value: f64 },
    #[error("invalid reward weights: {0}")]
    InvalidWeights(String),
    #[error("invalid repetition config: {0}")]
    InvalidRepetitionConfig(String),
    #[error("text is empty")]
    EmptyText,
    #[error("a group needs at least two rewards, got {0}")]
    GroupTooSmall(usize),
    #[error("group contains a non-finite reward")]
    NonFiniteReward,
    #[error("epsilon must be finite and > 0, got {0}")]
    InvalidEpsilon(f64),
    #[error("record `{id}`: {message}")]
    Record { id: String, message: String },
    #[error(transparent)]
    Io(#[from] JsonlError),
}

/// Source term → acceptable target renderings.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct TermTable {
    pub entries: BTreeMap<String, BTreeSet<String>>,
}

impl TermTable {
    pub fn new(entries: BTreeMap<String, BTreeSet<String>>) -> Result<Self, RewardError> {
        let t = TermTable { entries };
        t.validate()?;
        Ok(t)
    }

    pub fn validate(&self) -> Result<(), RewardError> {
        for (term, renderings) in &self.entries {
            if term.is_empty() {
                return Err(RewardError::InvalidTable("empty source term".into()));
            }
            if renderings.is_empty() || renderings.iter().any(String::is_empty) {
                return Err(RewardError::InvalidTable(format!("term `{term}` has no usable renderings")));
            }
        }
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self, RewardError> {
        let t: TermTable = read_json(path)?;
        t.validate()?;
        Ok(t)
    }
}

/// Share of table terms found in `source` that have at least one acceptable
/// rendering in `hypothesis`; 1.0 when no term occurs in the source.
pub fn terminology_reward(source: &str, hypothesis: &str, table: &TermTable) -> f64 {
    let src = fold_case(source);
    let hyp = fold_case(hypothesis);
    let mut present = 0usize;
    let mut matched = 0usize;
    for (term, renderings) in &table.entries {
        if !src.contains(&fold_case(term)) {
            continue;
        }
        present += 1;
        if renderings.iter().any(|r| hyp.contains(&fold_case(r))) {
            matched += 1;
        }
    }
    if present == 0 {
        1.0
    } else {
        matched as f64 / present as f64
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RepetitionConfig {
    pub n_min: usize,
    pub n_max: usize,
    pub max_consecutive: usize,
    pub min_distinct_ratio: f64,
}

impl Default for RepetitionConfig {
    fn default() -> Self {
        RepetitionConfig { n_min: 2, n_max: 4, max_consecutive: 3, min_distinct_ratio: 0.3 }
    }
}

impl RepetitionConfig {
    pub fn validate(&self) -> Result<(), RewardError> {
        let bad = |s: String| Err(RewardError::InvalidRepetitionConfig(s));
        if self.n_min == 0 || self.n_min > self.n_max {
            return bad(format!("n range {}..={} is empty or starts at 0", self.n_min, self.n_max));
        }
        if self.max_consecutive < 2 {
            return bad(format!("max_consecutive {} must be >= 2", self.max_consecutive));
        }
        if !(0.0..=1.0).contains(&self.min_distinct_ratio) {
            return bad(format!("min_distinct_ratio {} outside [0, 1]", self.min_distinct_ratio));
        }
        Ok(())
    }
}

/// Binary repetition detector over tokens of `text`: 1.0 when some n-gram
/// occurs `max_consecutive` times back to back, or when the share of distinct
/// n-grams for some n falls below `min_distinct_ratio`; 0.0 otherwise.
pub fn repetition_score(text: &str, seg: Segmentation, cfg: &RepetitionConfig) -> Result<f64, RewardError> {
    cfg.validate()?;
    let toks = tokenize(text, seg);
    if toks.is_empty() {
        return Err(RewardError::EmptyText);
    }
    for n in cfg.n_min..=cfg.n_max {
        if toks.len() < n {
            break;
        }
        if has_consecutive_run(&toks, n, cfg.max_consecutive) {
            return Ok(1.0);
        }
        let total = toks.len() - n + 1;
        let distinct: HashSet<&[&str]> = toks.windows(n).collect();
        if (distinct.len() as f64) / (total as f64) < cfg.min_distinct_ratio {
            return Ok(1.0);
        }
    }
    Ok(0.0)
}

fn has_consecutive_run(toks: &[&str], n: usize, copies: usize) -> bool {
    let span = n * copies;
    if toks.len() < span {
        return false;
    }
    (0..=toks.len() - span).any(|i| {
        let first = &toks[i..i + n];
        (1..copies).all(|c| &toks[i + c * n..i + (c + 1) * n] == first)
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RewardWeights {
    pub w_quality: f64,
    pub w_terminology: f64,
    pub w_repetition_penalty: f64,
}

impl Default for RewardWeights {
    fn default() -> Self {
        RewardWeights { w_quality: 0.5, w_terminology: 0.5, w_repetition_penalty: 1.0 }
    }
}

impl RewardWeights {
    pub fn validate(&self) -> Result<(), RewardError> {
        let ws = [self.w_quality, self.w_terminology, self.w_repetition_penalty];
        if ws.iter().any(|w| !w.is_finite() || *w < 0.0) {
            return Err(RewardError::InvalidWeights("weights must be finite and >= 0".into()));
        }
        if self.w_quality + self.w_terminology <= 0.0 {
            return Err(RewardError::InvalidWeights("w_quality + w_terminology must be > 0".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RewardBreakdown {
    pub quality: f64,
    pub terminology: f64,
    pub repetition_penalty: f64,
    pub total: f64,
}

/// `clamp(w_q·quality + w_t·terminology − w_r·repetition_penalty, 0, 1)`.
pub fn composite_reward(
    quality: f64,
    terminology: f64,
    repetition_penalty: f64,
    weights: &RewardWeights,
) -> Result<RewardBreakdown, RewardError> {
    weights.validate()?;
    for (name, value) in [("quality", quality), ("terminology", terminology), ("repetition_penalty", repetition_penalty)] {
        if !(0.0..=1.0).contains(&value) {
            return Err(RewardError::ComponentOutOfRange { name, value });
        }
    }
    let raw = weights.w_quality * quality + weights.w_terminology * terminology
        - weights.w_repetition_penalty * repetition_penalty;
    Ok(RewardBreakdown { quality, terminology, repetition_penalty, total: raw.clamp(0.0, 1.0) })
}

/// `(r_i − mean) / (popstd + epsilon)` for one rollout group.
pub fn grpo_advantages(rewards: &[f64], epsilon: f64) -> Result<Vec<f64>, RewardError> {
    if rewards.len() < 2 {
        return Err(RewardError::GroupTooSmall(rewards.len()));
    }
    if !(epsilon.is_finite() && epsilon > 0.0) {
        return Err(RewardError::InvalidEpsilon(epsilon));
    }
    if rewards.iter().any(|r| !r.is_finite()) {
        return Err(RewardError::NonFiniteReward);
    }
    let g = rewards.len() as f64;
    let mean = rewards.iter().sum::<f64>() / g;
    let var = rewards.iter().map(|r| (r - mean) * (r - mean)).sum::<f64>() / g;
    let denom = var.sqrt() + epsilon;
    Ok(rewards.iter().map(|r| (r - mean) / denom).collect())
}

/// One hypothesis to score. `quality` may be supplied inline or by a scorer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RewardInput {
    pub id: String,
    pub src_lang: LanguageTag,
    pub tgt_lang: LanguageTag,
    pub source: String,
    pub hypothesis: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub quality: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub group: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RewardRecord {
    pub id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub group: Option<String>,
    #[serde(flatten)]
    pub breakdown: RewardBreakdown,
}

#[derive(Debug, Clone, Default)]
pub struct RewardSettings {
    pub table: TermTable,
    pub weights: RewardWeights,
    pub repetition: RepetitionConfig,
}

/// Scores a batch in parallel. A scorer, when given, overrides inline quality.
pub fn score_rewards(
    inputs: &[RewardInput],
    settings: &RewardSettings,
    scorer: Option<&dyn Scorer>,
) -> Result<Vec<RewardRecord>, RewardError> {
    settings.weights.validate()?;
    settings.repetition.validate()?;
    settings.table.validate()?;
    inputs
        .par_iter()
        .map(|inp| {
            let rec_err = |message: String| RewardError::Record { id: inp.id.clone(), message };
            let quality = match scorer {
                Some(s) => {
                    let empty = BTreeMap::new();
                    let view = ScoreInput {
                        id: &inp.id,
                        src_lang: inp.src_lang,
                        tgt_lang: Some(inp.tgt_lang),
                        source: &inp.source,
                        target: Some(&inp.hypothesis),
                        scores: &empty,
                    };
                    s.score(&view).map_err(|e| rec_err(e.to_string()))?
                }
                None => inp.quality.ok_or_else(|| rec_err("no quality score and no scorer".into()))?,
            };
            let term = terminology_reward(&inp.source, &inp.hypothesis, &settings.table);
            let rep = repetition_score(&inp.hypothesis, inp.tgt_lang.segmentation(), &settings.repetition)
                .map_err(|e| rec_err(e.to_string()))?;
            let breakdown =
                composite_reward(quality, term, rep, &settings.weights).map_err(|e| rec_err(e.to_string()))?;
            Ok(RewardRecord { id: inp.id.clone(), group: inp.group.clone(), breakdown })
        })
        .collect()
}
