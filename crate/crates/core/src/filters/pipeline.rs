//! Ordered composition of filter stages with per-stage accounting.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{
    composite_quality, threshold_filter, FilterError, QualityDimensions, Scorable, Scorer, ScorerEndpoint,
    ThresholdOutcome, WeightProfiles, COMPOSITE_QUALITY,
};
use crate::corpus::{Corpus, CorpusKind, Document, LanguageTag};
use crate::dedup::{dedup, DedupConfig, DedupError};
use crate::jsonl::{read_json, JsonlError};
use crate::langid::{filter_by_language, LangIdError, LangIdModel};
use crate::ngram_lm::{filter_high_perplexity, LmError, NGramLm, PerplexityMode};

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("stage {index} ({stage}): {message}")]
    Config { index: usize, stage: &'static str, message: String },
    #[error("stage {index} ({stage}) only accepts {expected:?} corpora, got {got:?}")]
    Incompatible { index: usize, stage: &'static str, expected: CorpusKind, got: CorpusKind },
    #[error("stage {index} ({stage}) failed: {message}")]
    Runtime { index: usize, stage: &'static str, message: String },
    #[error(transparent)]
    Io(#[from] JsonlError),
}

fn default_min_confidence() -> f64 {
    0.5
}

/// A stage as written in a pipeline config file. Model paths are resolved
/// relative to the config file's directory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum StageConfig {
    Langid {
        model: PathBuf,
        #[serde(default)]
        expected: Option<LanguageTag>,
        #[serde(default = "default_min_confidence")]
        min_confidence: f64,
    },
    Dedup {
        #[serde(default)]
        params: DedupConfig,
    },
    Perplexity {
        model: PathBuf,
        #[serde(default)]
        mode: PerplexityMode,
    },
    Quality {
        min_quality: f64,
        #[serde(default)]
        profiles: WeightProfiles,
    },
    QeThreshold {
        scorer: ScorerEndpoint,
        tau: f64,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipelineConfig {
    /// Input corpus; relative to the config file. A command-line path wins.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub input: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<PathBuf>,
    #[serde(default = "default_kind")]
    pub corpus_kind: CorpusKind,
    /// Seed for stochastic stages (dedup) that do not set their own.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    pub stages: Vec<StageConfig>,
}

fn default_kind() -> CorpusKind {
    CorpusKind::Mono
}

/// A ready-to-run stage with its models loaded.
pub enum Stage {
    Langid { model: Arc<LangIdModel>, expected: Option<LanguageTag>, min_confidence: f64 },
    Dedup(DedupConfig),
    Perplexity { lm: Arc<NGramLm>, mode: PerplexityMode },
    Quality { min_quality: f64, profiles: WeightProfiles },
    QeThreshold { scorer: Arc<dyn Scorer>, tau: f64 },
}

impl Stage {
    pub fn name(&self) -> &'static str {
        match self {
            Stage::Langid { .. } => "langid",
            Stage::Dedup(_) => "dedup",
            Stage::Perplexity { .. } => "perplexity",
            Stage::Quality { .. } => "quality",
            Stage::QeThreshold { .. } => "qe_threshold",
        }
    }

    fn accepts(&self) -> &'static [CorpusKind] {
        match self {
            Stage::QeThreshold { .. } => &[CorpusKind::Mono, CorpusKind::Parallel],
            _ => &[CorpusKind::Mono],
        }
    }

    fn validate(&self) -> Result<(), String> {
        match self {
            Stage::Langid { min_confidence, .. } if !(0.0..=1.0).contains(min_confidence) => {
                Err(format!("min_confidence {min_confidence} outside [0, 1]"))
            }
            Stage::Dedup(cfg) => cfg.validate().map_err(|e| e.to_string()),
            Stage::Perplexity { mode, .. } => mode.validate().map_err(|e| e.to_string()),
            Stage::Quality { min_quality, profiles } => {
                if !min_quality.is_finite() {
                    return Err(format!("min_quality {min_quality} is not finite"));
                }
                profiles.validate().map_err(|e| e.to_string())
            }
            Stage::QeThreshold { tau, .. } if !tau.is_finite() => Err(format!("tau {tau} is not finite")),
            _ => Ok(()),
        }
    }
}

impl StageConfig {
    /// Loads models and builds scorers. `base` resolves relative model paths.
    pub fn prepare(&self, index: usize, base: &Path) -> Result<Stage, PipelineError> {
        let resolve = |p: &Path| if p.is_absolute() { p.to_path_buf() } else { base.join(p) };
        let config_err = |stage: &'static str, message: String| PipelineError::Config { index, stage, message };
        Ok(match self {
            StageConfig::Langid { model, expected, min_confidence } => {
                let m: LangIdModel =
                    read_json(&resolve(model)).map_err(|e| config_err("langid", e.to_string()))?;
                Stage::Langid { model: Arc::new(m), expected: *expected, min_confidence: *min_confidence }
            }
            StageConfig::Dedup { params } => Stage::Dedup(params.clone()),
            StageConfig::Perplexity { model, mode } => {
                let lm = NGramLm::load(&resolve(model)).map_err(|e| config_err("perplexity", e.to_string()))?;
                Stage::Perplexity { lm: Arc::new(lm), mode: *mode }
            }
            StageConfig::Quality { min_quality, profiles } => {
                Stage::Quality { min_quality: *min_quality, profiles: profiles.clone() }
            }
            StageConfig::QeThreshold { scorer, tau } => {
                let s = scorer.build().map_err(|e| config_err("qe_threshold", e.to_string()))?;
                Stage::QeThreshold { scorer: Arc::from(s), tau: *tau }
            }
        })
    }
}

impl PipelineConfig {
    /// Overrides the minhash seed of every dedup stage.
    pub fn apply_seed(&mut self, seed: u64) {
        for s in &mut self.stages {
            if let StageConfig::Dedup { params } = s {
                params.seed = seed;
            }
        }
    }

    pub fn prepare(&self, base: &Path) -> Result<Vec<Stage>, PipelineError> {
        self.stages.iter().enumerate().map(|(i, s)| s.prepare(i, base)).collect()
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct StageReport {
    pub stage: String,
    pub input_count: usize,
    pub kept: usize,
    pub dropped: usize,
    pub unscored: usize,
    /// Reason → count, over dropped and unscored records.
    pub reasons: BTreeMap<String, usize>,
}

impl StageReport {
    pub fn reconciles(&self) -> bool {
        self.input_count == self.kept + self.dropped + self.unscored
            && self.reasons.values().sum::<usize>() == self.dropped + self.unscored
    }

    fn reason(&mut self, key: &str, n: usize) {
        if n > 0 {
            *self.reasons.entry(key.to_string()).or_default() += n;
        }
    }
}

/// Checks every stage against the corpus kind and its own parameters.
pub fn validate_stages(stages: &[Stage], kind: CorpusKind) -> Result<(), PipelineError> {
    for (index, s) in stages.iter().enumerate() {
        if !s.accepts().contains(&kind) {
            return Err(PipelineError::Incompatible { index, stage: s.name(), expected: s.accepts()[0], got: kind });
        }
        s.validate().map_err(|message| PipelineError::Config { index, stage: s.name(), message })?;
    }
    Ok(())
}

/// Runs `stages` in order; stage `i` consumes exactly the records stage `i-1` kept.
/// All stages are validated before any record is processed.
pub fn run_pipeline(corpus: Corpus, stages: &[Stage]) -> Result<(Corpus, Vec<StageReport>), PipelineError> {
    validate_stages(stages, corpus.kind())?;
    let mut reports = Vec::with_capacity(stages.len());
    let mut current = corpus;
    for (index, stage) in stages.iter().enumerate() {
        let runtime = |message: String| PipelineError::Runtime { index, stage: stage.name(), message };
        let (next, report) = match current {
            Corpus::Mono(docs) => {
                let (kept, r) = run_mono(stage, docs).map_err(runtime)?;
                (Corpus::Mono(kept), r)
            }
            Corpus::Parallel(pairs) => {
                let (kept, r) = run_scored(stage, pairs).map_err(runtime)?;
                (Corpus::Parallel(kept), r)
            }
        };
        debug_assert!(report.reconciles());
        reports.push(report);
        current = next;
    }
    Ok((current, reports))
}

fn base_report(stage: &Stage, input: usize) -> StageReport {
    StageReport { stage: stage.name().to_string(), input_count: input, ..Default::default() }
}

fn run_mono(stage: &Stage, docs: Vec<Document>) -> Result<(Vec<Document>, StageReport), String> {
    let mut report = base_report(stage, docs.len());
    let kept = match stage {
        Stage::Langid { model, expected, min_confidence } => {
            let out = filter_by_language(model, docs, *expected, *min_confidence)
                .map_err(|e: LangIdError| e.to_string())?;
            let mismatched = out
                .dropped
                .iter()
                .filter(|(d, drop)| drop.predicted != expected.unwrap_or(d.lang))
                .count();
            report.dropped = out.dropped.len();
            report.reason("language_mismatch", mismatched);
            report.reason("low_confidence", out.dropped.len() - mismatched);
            out.kept
        }
        Stage::Dedup(cfg) => {
            let out = dedup(docs, cfg).map_err(|e: DedupError| e.to_string())?;
            report.dropped = out.dropped.len();
            report.reason("near_duplicate", out.dropped.len());
            out.kept
        }
        Stage::Perplexity { lm, mode } => {
            let out = filter_high_perplexity(docs, lm, *mode).map_err(|e: LmError| e.to_string())?;
            report.dropped = out.dropped.len();
            report.reason("high_perplexity", out.dropped.len());
            out.kept
        }
        Stage::Quality { min_quality, profiles } => {
            let mut kept = Vec::new();
            for mut d in docs {
                match QualityDimensions::from_document(&d) {
                    Ok(Some(dims)) => {
                        let q = composite_quality(&dims, &profiles.get(d.provenance))
                            .map_err(|e: FilterError| e.to_string())?;
                        d.scores.insert(COMPOSITE_QUALITY.to_string(), q);
                        if q >= *min_quality {
                            kept.push(d);
                        } else {
                            report.dropped += 1;
                            report.reason("below_quality", 1);
                        }
                    }
                    Ok(None) => {
                        report.unscored += 1;
                        report.reason("missing_dimensions", 1);
                    }
                    Err(_) => {
                        report.unscored += 1;
                        report.reason("invalid_dimensions", 1);
                    }
                }
            }
            kept
        }
        Stage::QeThreshold { .. } => return run_scored(stage, docs),
    };
    report.kept = kept.len();
    Ok((kept, report))
}

fn run_scored<R: Scorable>(stage: &Stage, records: Vec<R>) -> Result<(Vec<R>, StageReport), String> {
    let Stage::QeThreshold { scorer, tau } = stage else {
        return Err(format!("{} does not accept {:?} corpora", stage.name(), R::KIND));
    };
    let mut report = base_report(stage, records.len());
    let out: ThresholdOutcome<R> = threshold_filter(records, scorer.as_ref(), *tau).map_err(|e| e.to_string())?;
    report.kept = out.kept.len();
    report.dropped = out.dropped.len();
    report.unscored = out.unscored.len();
    report.reason("below_threshold", out.dropped.len());
    report.reason("scorer_error", out.unscored.len());
    Ok((out.kept, report))
}
