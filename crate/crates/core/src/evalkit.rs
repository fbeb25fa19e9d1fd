//! chrF, corpus scoring against built-in or external metrics, and
//! per-direction-group reports.

use std::collections::{BTreeMap, HashMap};
use std::fmt::Write as _;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{classify_direction, DirectionGroup, LanguageTag, ParallelPair, Scores};
use crate::filters::{ScoreInput, Scorer, ScorerEndpoint};

pub const CHRF_ORDER: usize = 6;
pub const CHRF_BETA: f64 = 2.0;

#[derive(Debug, Error, PartialEq)]
pub enum EvalError {
    #[error("reference is empty")]
    EmptyReference,
    #[error("chrF needs max_n >= 1 and beta > 0")]
    InvalidChrfParams,
    #[error("pair `{0}` has no hypothesis")]
    MissingHypothesis(String),
    #[error("report mixes metrics `{0}` and `{1}`")]
    MixedMetrics(String, String),
    #[error("pair `{id}`: {message}")]
    BadPair { id: String, message: String },
    #[error("invalid metric: {0}")]
    InvalidMetric(String),
}

fn char_ngrams(chars: &[char], n: usize) -> HashMap<&[char], usize> {
    let mut m = HashMap::new();
    for w in chars.windows(n) {
        *m.entry(w).or_default() += 1;
    }
    m
}

/// chrF in `[0, 100]`: character n-gram F_beta for `n = 1..=max_n` over text
/// with whitespace removed, averaged over the orders where both sides have
/// at least one n-gram. An empty hypothesis scores 0.
pub fn chrf_with(hypothesis: &str, reference: &str, max_n: usize, beta: f64) -> Result<f64, EvalError> {
    if max_n == 0 || !(beta > 0.0 && beta.is_finite()) {
        return Err(EvalError::InvalidChrfParams);
    }
    let r: Vec<char> = reference.chars().filter(|c| !c.is_whitespace()).collect();
    if r.is_empty() {
        return Err(EvalError::EmptyReference);
    }
    let h: Vec<char> = hypothesis.chars().filter(|c| !c.is_whitespace()).collect();
    let b2 = beta * beta;
    let mut total = 0.0;
    let mut orders = 0usize;
    for n in 1..=max_n {
        if h.len() < n || r.len() < n {
            continue;
        }
        let hg = char_ngrams(&h, n);
        let rg = char_ngrams(&r, n);
        let matched: usize = hg.iter().map(|(g, c)| (*c).min(rg.get(g).copied().unwrap_or(0))).sum();
        let prec = matched as f64 / (h.len() - n + 1) as f64;
        let rec = matched as f64 / (r.len() - n + 1) as f64;
        let denom = b2 * prec + rec;
        if denom > 0.0 {
            total += (1.0 + b2) * prec * rec / denom;
        }
        orders += 1;
    }
    Ok(if orders == 0 { 0.0 } else { 100.0 * total / orders as f64 })
}

pub fn chrf(hypothesis: &str, reference: &str) -> Result<f64, EvalError> {
    chrf_with(hypothesis, reference, CHRF_ORDER, CHRF_BETA)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricScore {
    pub metric_name: String,
    pub value: f64,
    pub scale: (f64, f64),
}

/// `"chrf"` or a scorer endpoint description.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum MetricSpec {
    Builtin(String),
    Scorer(ScorerEndpoint),
}

pub enum Metric {
    Chrf,
    Scorer(Box<dyn Scorer>),
}

impl MetricSpec {
    pub fn build(&self) -> Result<Metric, EvalError> {
        match self {
            MetricSpec::Builtin(name) if name == "chrf" => Ok(Metric::Chrf),
            MetricSpec::Builtin(name) => Err(EvalError::InvalidMetric(format!("unknown built-in metric `{name}`"))),
            MetricSpec::Scorer(ep) => ep.build().map(Metric::Scorer).map_err(|e| EvalError::InvalidMetric(e.to_string())),
        }
    }
}

impl Metric {
    pub fn name(&self) -> &str {
        match self {
            Metric::Chrf => "chrf",
            Metric::Scorer(s) => s.name(),
        }
    }

    pub fn scale(&self) -> (f64, f64) {
        match self {
            Metric::Chrf => (0.0, 100.0),
            Metric::Scorer(s) => s.range(),
        }
    }
}

/// A system output keyed by pair id.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Hypothesis {
    pub id: String,
    pub hypothesis: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoredPair {
    pub id: String,
    pub src_lang: LanguageTag,
    pub tgt_lang: LanguageTag,
    pub score: MetricScore,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreFailure {
    pub id: String,
    pub error: String,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ScoredCorpus {
    pub scored: Vec<ScoredPair>,
    pub failures: Vec<ScoreFailure>,
}

/// Scores each pair's hypothesis against its target side (chrF) or hands
/// source and hypothesis to a scorer. Per-pair failures are collected, not fatal.
pub fn score_corpus(
    pairs: &[ParallelPair],
    hypotheses: &BTreeMap<String, String>,
    metric: &Metric,
) -> Result<ScoredCorpus, EvalError> {
    if let Some(p) = pairs.iter().find(|p| !hypotheses.contains_key(&p.id)) {
        return Err(EvalError::MissingHypothesis(p.id.clone()));
    }
    let results: Vec<Result<f64, String>> = pairs
        .par_iter()
        .map(|p| {
            let hyp = &hypotheses[&p.id];
            match metric {
                Metric::Chrf => chrf(hyp, &p.tgt_text).map_err(|e| e.to_string()),
                Metric::Scorer(s) => {
                    let empty = Scores::new();
                    let input = ScoreInput {
                        id: &p.id,
                        src_lang: p.src_lang,
                        tgt_lang: Some(p.tgt_lang),
                        source: &p.src_text,
                        target: Some(hyp),
                        scores: &empty,
                    };
                    s.score(&input).map_err(|e| e.to_string())
                }
            }
        })
        .collect();
    let mut out = ScoredCorpus::default();
    for (p, r) in pairs.iter().zip(results) {
        match r {
            Ok(value) => out.scored.push(ScoredPair {
                id: p.id.clone(),
                src_lang: p.src_lang,
                tgt_lang: p.tgt_lang,
                score: MetricScore { metric_name: metric.name().to_string(), value, scale: metric.scale() },
            }),
            Err(error) => out.failures.push(ScoreFailure { id: p.id.clone(), error }),
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Aggregation {
    /// Mean over segments.
    #[default]
    Micro,
    /// Mean over language pairs of per-pair segment means.
    Macro,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupStat {
    pub group: DirectionGroup,
    pub mean: f64,
    pub count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OverallStat {
    pub mean: f64,
    pub count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub metric: String,
    pub aggregation: Aggregation,
    pub groups: Vec<GroupStat>,
    pub overall: OverallStat,
}

fn mean(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        0.0
    } else {
        xs.iter().sum::<f64>() / xs.len() as f64
    }
}

fn aggregate(by_pair: &BTreeMap<(LanguageTag, LanguageTag), Vec<f64>>, agg: Aggregation) -> f64 {
    match agg {
        Aggregation::Micro => mean(&by_pair.values().flatten().copied().collect::<Vec<_>>()),
        Aggregation::Macro => mean(&by_pair.values().map(|v| mean(v)).collect::<Vec<_>>()),
    }
}

pub fn group_report(scored: &[ScoredPair], aggregation: Aggregation) -> Result<EvalReport, EvalError> {
    let metric = scored.first().map(|s| s.score.metric_name.clone()).unwrap_or_default();
    let mut groups: BTreeMap<usize, BTreeMap<(LanguageTag, LanguageTag), Vec<f64>>> = BTreeMap::new();
    let mut all: BTreeMap<(LanguageTag, LanguageTag), Vec<f64>> = BTreeMap::new();
    for s in scored {
        if s.score.metric_name != metric {
            return Err(EvalError::MixedMetrics(metric, s.score.metric_name.clone()));
        }
        let g = classify_direction(s.src_lang, s.tgt_lang)
            .map_err(|e| EvalError::BadPair { id: s.id.clone(), message: e.to_string() })?;
        let gi = DirectionGroup::ALL.iter().position(|x| *x == g).expect("group listed");
        let key = (s.src_lang, s.tgt_lang);
        groups.entry(gi).or_default().entry(key).or_default().push(s.score.value);
        all.entry(key).or_default().push(s.score.value);
    }
    let groups = groups
        .into_iter()
        .map(|(gi, by_pair)| GroupStat {
            group: DirectionGroup::ALL[gi],
            mean: aggregate(&by_pair, aggregation),
            count: by_pair.values().map(Vec::len).sum(),
        })
        .collect();
    Ok(EvalReport {
        metric,
        aggregation,
        groups,
        overall: OverallStat { mean: aggregate(&all, aggregation), count: scored.len() },
    })
}

impl EvalReport {
    pub fn render_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "metric: {} ({:?} average)", self.metric, self.aggregation);
        let _ = writeln!(out, "{:<10} {:>10} {:>8}", "group", "mean", "count");
        for g in &self.groups {
            let _ = writeln!(out, "{:<10} {:>10.4} {:>8}", g.group.label(), g.mean, g.count);
        }
        let _ = writeln!(out, "{:<10} {:>10.4} {:>8}", "overall", self.overall.mean, self.overall.count);
        out
    }
}
