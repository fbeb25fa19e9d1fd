//! Multi-candidate generation and fusion: sample several translations of one
//! segment under a parameter grid, then ask a fusion model to merge them,
//! falling back to the best-scored (or first) candidate.

pub mod backend;
pub mod prompt;

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::LanguageTag;
use crate::filters::{ScoreInput, Scorer};
pub use backend::{default_grid, Backend, BackendError, BackendSpec, GenerationParams, WireProtocol};
pub use prompt::{clean_response, fence, render_fusion_prompt, render_translation_prompt, PromptError};

pub const DEFAULT_CONCURRENCY: usize = 4;

#[derive(Debug, Error)]
pub enum ChimeraError {
    #[error("grid must have at least {min} entries, got {got}")]
    GridTooSmall { min: usize, got: usize },
    #[error("{slots} slot backends for a grid of {grid}")]
    SlotMismatch { slots: usize, grid: usize },
    #[error("all {0} candidate requests failed")]
    AllCandidatesFailed(usize),
    #[error("candidate set is empty")]
    NoCandidates,
    #[error("scorer failed on every candidate")]
    ScorerFailed,
    #[error("concurrency must be >= 1")]
    ZeroConcurrency,
    #[error(transparent)]
    Prompt(#[from] PromptError),
    #[error(transparent)]
    Backend(#[from] BackendError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SlotFailure {
    /// 0-based position in the grid.
    pub slot: usize,
    pub error: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidateSet {
    pub source_text: String,
    pub src_lang: LanguageTag,
    pub tgt_lang: LanguageTag,
    pub candidates: Vec<String>,
    pub params_used: Vec<GenerationParams>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub failures: Vec<SlotFailure>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FusionResult {
    pub fused_text: String,
    pub fallback_used: bool,
    /// Per-candidate fallback scores; `None` where the scorer failed.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub candidate_scores: Option<Vec<Option<f64>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fusion_error: Option<String>,
}

fn pool(concurrency: usize) -> Result<rayon::ThreadPool, ChimeraError> {
    if concurrency == 0 {
        return Err(ChimeraError::ZeroConcurrency);
    }
    Ok(rayon::ThreadPoolBuilder::new().num_threads(concurrency).build().expect("thread pool"))
}

/// Requests one translation per grid entry from `backend`.
pub fn generate_candidates(
    backend: &dyn Backend,
    src: LanguageTag,
    tgt: LanguageTag,
    text: &str,
    grid: &[GenerationParams],
    concurrency: usize,
) -> Result<CandidateSet, ChimeraError> {
    let slots: Vec<&dyn Backend> = vec![backend; grid.len()];
    generate_candidates_per_slot(&slots, src, tgt, text, grid, concurrency)
}

/// Like [`generate_candidates`] with a separate backend for every grid slot.
/// Failed or empty responses drop their slot; survivors keep grid order.
pub fn generate_candidates_per_slot(
    backends: &[&dyn Backend],
    src: LanguageTag,
    tgt: LanguageTag,
    text: &str,
    grid: &[GenerationParams],
    concurrency: usize,
) -> Result<CandidateSet, ChimeraError> {
    if grid.len() < 2 {
        return Err(ChimeraError::GridTooSmall { min: 2, got: grid.len() });
    }
    if backends.len() != grid.len() {
        return Err(ChimeraError::SlotMismatch { slots: backends.len(), grid: grid.len() });
    }
    for p in grid {
        p.validate()?;
    }
    let prompt = render_translation_prompt(src, tgt, text)?;
    let responses: Vec<Result<String, String>> = pool(concurrency)?.install(|| {
        grid.par_iter()
            .zip(backends.par_iter())
            .map(|(params, b)| match b.complete(&prompt, params) {
                Ok(raw) => {
                    let cleaned = clean_response(&raw);
                    if cleaned.is_empty() {
                        Err("empty response".to_string())
                    } else {
                        Ok(cleaned)
                    }
                }
                Err(e) => Err(e.to_string()),
            })
            .collect()
    });
    let mut set = CandidateSet {
        source_text: text.to_string(),
        src_lang: src,
        tgt_lang: tgt,
        candidates: Vec::new(),
        params_used: Vec::new(),
        failures: Vec::new(),
    };
    for (slot, (resp, params)) in responses.into_iter().zip(grid).enumerate() {
        match resp {
            Ok(c) => {
                set.candidates.push(c);
                set.params_used.push(params.clone());
            }
            Err(error) => set.failures.push(SlotFailure { slot, error }),
        }
    }
    if set.candidates.is_empty() {
        return Err(ChimeraError::AllCandidatesFailed(grid.len()));
    }
    Ok(set)
}

/// Scores every candidate; returns the 1-based index of the best (ties →
/// lowest index), its score, and all per-candidate scores.
pub fn select_best(
    set: &CandidateSet,
    scorer: &dyn Scorer,
) -> Result<(usize, f64, Vec<Option<f64>>), ChimeraError> {
    if set.candidates.is_empty() {
        return Err(ChimeraError::NoCandidates);
    }
    let scores: Vec<Option<f64>> = set
        .candidates
        .par_iter()
        .enumerate()
        .map(|(i, c)| {
            let empty = BTreeMap::new();
            let id = format!("candidate-{}", i + 1);
            let input = ScoreInput {
                id: &id,
                src_lang: set.src_lang,
                tgt_lang: Some(set.tgt_lang),
                source: &set.source_text,
                target: Some(c),
                scores: &empty,
            };
            scorer.score(&input).ok()
        })
        .collect();
    let mut best: Option<(usize, f64)> = None;
    for (i, s) in scores.iter().enumerate() {
        if let Some(s) = *s {
            if best.is_none_or(|(_, b)| s > b) {
                best = Some((i + 1, s));
            }
        }
    }
    let (idx, score) = best.ok_or(ChimeraError::ScorerFailed)?;
    Ok((idx, score, scores))
}

/// Sends the fusion prompt to `backend`. On failure or an empty answer,
/// returns the scorer's best candidate when a scorer is given and can score
/// something, else candidate 1.
pub fn fuse(
    backend: &dyn Backend,
    set: &CandidateSet,
    params: &GenerationParams,
    fallback_scorer: Option<&dyn Scorer>,
) -> Result<FusionResult, ChimeraError> {
    if set.candidates.is_empty() {
        return Err(ChimeraError::NoCandidates);
    }
    let attempt = if set.candidates.len() < 2 {
        Err(PromptError::TooFewCandidates(set.candidates.len()).to_string())
    } else {
        render_fusion_prompt(set.src_lang, set.tgt_lang, &set.source_text, &set.candidates)
            .map_err(|e| e.to_string())
            .and_then(|p| backend.complete(&p, params).map_err(|e| e.to_string()))
            .map(|raw| clean_response(&raw))
            .and_then(|t| if t.is_empty() { Err("empty fusion output".to_string()) } else { Ok(t) })
    };
    let fusion_error = match attempt {
        Ok(fused_text) => {
            return Ok(FusionResult { fused_text, fallback_used: false, candidate_scores: None, fusion_error: None })
        }
        Err(e) => Some(e),
    };
    let (index, candidate_scores) = match fallback_scorer.map(|s| select_best(set, s)) {
        Some(Ok((i, _, scores))) => (i, Some(scores)),
        Some(Err(_)) => (1, Some(vec![None; set.candidates.len()])),
        None => (1, None),
    };
    Ok(FusionResult {
        fused_text: set.candidates[index - 1].clone(),
        fallback_used: true,
        candidate_scores,
        fusion_error,
    })
}

/// One segment to translate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TranslationJob {
    pub id: String,
    pub src_lang: LanguageTag,
    pub tgt_lang: LanguageTag,
    pub text: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JobResult {
    pub id: String,
    pub src_lang: LanguageTag,
    pub tgt_lang: LanguageTag,
    pub source: String,
    pub candidates: Vec<String>,
    pub params_used: Vec<GenerationParams>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub failures: Vec<SlotFailure>,
    pub fused: String,
    pub fallback_used: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scores: Option<Vec<Option<f64>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fusion_error: Option<String>,
}

impl JobResult {
    pub fn new(id: impl Into<String>, set: CandidateSet, fusion: FusionResult) -> Self {
        JobResult {
            id: id.into(),
            src_lang: set.src_lang,
            tgt_lang: set.tgt_lang,
            source: set.source_text,
            candidates: set.candidates,
            params_used: set.params_used,
            failures: set.failures,
            fused: fusion.fused_text,
            fallback_used: fusion.fallback_used,
            scores: fusion.candidate_scores,
            fusion_error: fusion.fusion_error,
        }
    }

    pub fn candidate_set(&self) -> CandidateSet {
        CandidateSet {
            source_text: self.source.clone(),
            src_lang: self.src_lang,
            tgt_lang: self.tgt_lang,
            candidates: self.candidates.clone(),
            params_used: self.params_used.clone(),
            failures: self.failures.clone(),
        }
    }
}
