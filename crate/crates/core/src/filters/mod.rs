//! Quality scoring, score thresholds, judge-consistency flagging, and stage composition.

pub mod pipeline;
pub mod scorer;

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{Document, Provenance};
pub use scorer::{Scorable, ScoreInput, Scorer, ScorerEndpoint, ScorerError, ScorerKind};

pub const KNOWLEDGE_VALUE: &str = "knowledge_value";
pub const AUTHENTICITY: &str = "authenticity";
pub const WRITING_STYLE: &str = "writing_style";
pub const COMPOSITE_QUALITY: &str = "composite_quality";

#[derive(Debug, Error, PartialEq)]
pub enum FilterError {
    #[error("dimension score {0} is not one of 0, 1, 2")]
    InvalidDimension(f64),
    #[error("weight profile for {0:?} has a negative, non-finite, or all-zero weight")]
    InvalidWeights(Provenance),
    #[error("threshold must be finite, got {0}")]
    InvalidThreshold(f64),
    #[error("judge record `{0}` has fewer than two rounds")]
    TooFewRounds(String),
    #[error("judge record `{0}` has a non-finite score")]
    NonFiniteRound(String),
    #[error("max_spread must be finite and >= 0, got {0}")]
    InvalidSpread(f64),
}

/// The three quality dimensions, each scored 0, 1, or 2.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QualityDimensions {
    pub knowledge_value: u8,
    pub authenticity: u8,
    pub writing_style: u8,
}

impl QualityDimensions {
    pub fn new(knowledge_value: u8, authenticity: u8, writing_style: u8) -> Result<Self, FilterError> {
        let d = QualityDimensions { knowledge_value, authenticity, writing_style };
        d.validate()?;
        Ok(d)
    }

    pub fn validate(&self) -> Result<(), FilterError> {
        for v in [self.knowledge_value, self.authenticity, self.writing_style] {
            if v > 2 {
                return Err(FilterError::InvalidDimension(v as f64));
            }
        }
        Ok(())
    }

    /// Reads the dimensions from a document's score map.
    pub fn from_document(doc: &Document) -> Result<Option<Self>, FilterError> {
        let get = |k: &str| doc.scores.get(k).copied();
        let (Some(k), Some(a), Some(w)) = (get(KNOWLEDGE_VALUE), get(AUTHENTICITY), get(WRITING_STYLE)) else {
            return Ok(None);
        };
        let as_level = |v: f64| {
            if v == 0.0 || v == 1.0 || v == 2.0 {
                Ok(v as u8)
            } else {
                Err(FilterError::InvalidDimension(v))
            }
        };
        Ok(Some(QualityDimensions {
            knowledge_value: as_level(k)?,
            authenticity: as_level(a)?,
            writing_style: as_level(w)?,
        }))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WeightProfile {
    pub provenance: Provenance,
    pub w_knowledge: f64,
    pub w_authenticity: f64,
    pub w_writing: f64,
}

impl WeightProfile {
    /// Knowledge value counts double for curated sources; web and other text weigh all three equally.
    pub fn default_for(provenance: Provenance) -> Self {
        let (k, a, w) = match provenance {
            Provenance::Academic | Provenance::Book | Provenance::ProfessionalWeb => (0.5, 0.25, 0.25),
            Provenance::GeneralWeb | Provenance::Other => (1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0),
        };
        WeightProfile { provenance, w_knowledge: k, w_authenticity: a, w_writing: w }
    }

    pub fn validate(&self) -> Result<(), FilterError> {
        let ws = [self.w_knowledge, self.w_authenticity, self.w_writing];
        if ws.iter().any(|w| !w.is_finite() || *w < 0.0) || ws.iter().sum::<f64>() <= 0.0 {
            return Err(FilterError::InvalidWeights(self.provenance));
        }
        Ok(())
    }
}

/// `Σ w·s / (2·Σ w)`, in `[0, 1]` with the all-2 case exactly 1.
pub fn composite_quality(dims: &QualityDimensions, profile: &WeightProfile) -> Result<f64, FilterError> {
    dims.validate()?;
    profile.validate()?;
    let num = profile.w_knowledge * dims.knowledge_value as f64
        + profile.w_authenticity * dims.authenticity as f64
        + profile.w_writing * dims.writing_style as f64;
    let den = 2.0 * (profile.w_knowledge + profile.w_authenticity + profile.w_writing);
    Ok((num / den).clamp(0.0, 1.0))
}

/// Weight profiles keyed by provenance, falling back to the defaults.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct WeightProfiles(pub BTreeMap<Provenance, WeightProfile>);

impl WeightProfiles {
    pub fn get(&self, p: Provenance) -> WeightProfile {
        self.0.get(&p).copied().unwrap_or_else(|| WeightProfile::default_for(p))
    }

    pub fn validate(&self) -> Result<(), FilterError> {
        for (p, prof) in &self.0 {
            if prof.provenance != *p {
                return Err(FilterError::InvalidWeights(*p));
            }
            prof.validate()?;
        }
        Ok(())
    }
}

/// Records partitioned by a scorer. Every input lands in exactly one bucket.
#[derive(Debug, Clone)]
pub struct ThresholdOutcome<R> {
    pub kept: Vec<R>,
    pub dropped: Vec<(R, f64)>,
    pub unscored: Vec<(R, String)>,
}

impl<R> Default for ThresholdOutcome<R> {
    fn default() -> Self {
        ThresholdOutcome { kept: Vec::new(), dropped: Vec::new(), unscored: Vec::new() }
    }
}

/// Keeps records whose score is `>= tau`, writing each score into the record
/// under the scorer's name. Records the scorer fails on go to `unscored`.
pub fn threshold_filter<R: Scorable>(
    records: Vec<R>,
    scorer: &dyn Scorer,
    tau: f64,
) -> Result<ThresholdOutcome<R>, FilterError> {
    if !tau.is_finite() {
        return Err(FilterError::InvalidThreshold(tau));
    }
    let results: Vec<Result<f64, ScorerError>> =
        records.par_iter().map(|r| scorer.score(&r.score_input())).collect();
    let mut out = ThresholdOutcome::default();
    for (mut rec, res) in records.into_iter().zip(results) {
        match res {
            Ok(s) => {
                rec.scores_mut().insert(scorer.name().to_string(), s);
                if s >= tau {
                    out.kept.push(rec);
                } else {
                    out.dropped.push((rec, s));
                }
            }
            Err(e) => out.unscored.push((rec, e.to_string())),
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct JudgeRecord {
    pub sample_id: String,
    pub round_scores: Vec<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ConsistencyReport {
    pub consistent: Vec<String>,
    pub flagged: Vec<String>,
}

/// Flags samples whose judge scores spread by more than `max_spread` across rounds.
pub fn flag_inconsistent(records: &[JudgeRecord], max_spread: f64) -> Result<ConsistencyReport, FilterError> {
    if !(max_spread.is_finite() && max_spread >= 0.0) {
        return Err(FilterError::InvalidSpread(max_spread));
    }
    let mut out = ConsistencyReport::default();
    for r in records {
        if r.round_scores.len() < 2 {
            return Err(FilterError::TooFewRounds(r.sample_id.clone()));
        }
        if r.round_scores.iter().any(|s| !s.is_finite()) {
            return Err(FilterError::NonFiniteRound(r.sample_id.clone()));
        }
        let max = r.round_scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let min = r.round_scores.iter().copied().fold(f64::INFINITY, f64::min);
        if max - min > max_spread {
            out.flagged.push(r.sample_id.clone());
        } else {
            out.consistent.push(r.sample_id.clone());
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{LanguageTag, ParallelPair};
    use proptest::prelude::*;

    fn profile(k: f64, a: f64, w: f64) -> WeightProfile {
        WeightProfile { provenance: Provenance::Other, w_knowledge: k, w_authenticity: a, w_writing: w }
    }

    #[test]
    fn composite_examples() {
        let p = WeightProfile::default_for(Provenance::Book);
        assert_eq!(composite_quality(&QualityDimensions::new(2, 2, 2).unwrap(), &p).unwrap(), 1.0);
        assert_eq!(composite_quality(&QualityDimensions::new(0, 0, 0).unwrap(), &p).unwrap(), 0.0);
        let d = QualityDimensions::new(2, 1, 0).unwrap();
        assert!((composite_quality(&d, &profile(0.5, 0.25, 0.25)).unwrap() - 0.625).abs() < 1e-12);
        assert_eq!(composite_quality(&d, &profile(0.0, 0.0, 0.0)), Err(FilterError::InvalidWeights(Provenance::Other)));
        assert!(QualityDimensions::new(3, 0, 0).is_err());
    }

    #[test]
    fn default_profiles() {
        for p in [Provenance::Academic, Provenance::Book, Provenance::ProfessionalWeb] {
            let w = WeightProfile::default_for(p);
            assert_eq!((w.w_knowledge, w.w_authenticity, w.w_writing), (0.5, 0.25, 0.25));
        }
        let w = WeightProfile::default_for(Provenance::GeneralWeb);
        assert_eq!(w.w_knowledge, w.w_writing);
    }

    #[test]
    fn dimensions_from_scores() {
        let mut d = Document::new("a", LanguageTag::EN, "x");
        assert_eq!(QualityDimensions::from_document(&d).unwrap(), None);
        d.scores.insert(KNOWLEDGE_VALUE.into(), 2.0);
        d.scores.insert(AUTHENTICITY.into(), 1.0);
        d.scores.insert(WRITING_STYLE.into(), 0.0);
        assert_eq!(QualityDimensions::from_document(&d).unwrap(), Some(QualityDimensions::new(2, 1, 0).unwrap()));
        d.scores.insert(WRITING_STYLE.into(), 1.5);
        assert!(QualityDimensions::from_document(&d).is_err());
    }

    fn pairs(n: usize) -> Vec<ParallelPair> {
        (0..n)
            .map(|i| ParallelPair::new(format!("p{i}"), LanguageTag::EN, LanguageTag::ZH, "hello", "你好"))
            .collect()
    }

    #[test]
    fn threshold_boundaries() {
        let s = ScorerEndpoint::local("qe", "constant:0.7", (0.0, 1.0)).build().unwrap();
        let out = threshold_filter(pairs(5), s.as_ref(), 0.7).unwrap();
        assert_eq!(out.kept.len(), 5);
        assert!(out.kept.iter().all(|p| p.scores["qe"] == 0.7));
        assert_eq!(threshold_filter(pairs(5), s.as_ref(), 0.0).unwrap().kept.len(), 5);
        let out = threshold_filter(pairs(5), s.as_ref(), 1.5).unwrap();
        assert_eq!(out.dropped.len(), 5);
        assert!(threshold_filter(pairs(1), s.as_ref(), f64::NAN).is_err());
    }

    #[test]
    fn failures_are_unscored_not_dropped() {
        let s = ScorerEndpoint::local("qe", "field:qe", (0.0, 1.0)).build().unwrap();
        let mut ps = pairs(4);
        ps[1].scores.insert("qe".into(), 0.9);
        ps[3].scores.insert("qe".into(), 0.1);
        let out = threshold_filter(ps, s.as_ref(), 0.5).unwrap();
        assert_eq!(out.kept.iter().map(|p| p.id.as_str()).collect::<Vec<_>>(), ["p1"]);
        assert_eq!(out.dropped.len(), 1);
        assert_eq!(out.unscored.iter().map(|(p, _)| p.id.as_str()).collect::<Vec<_>>(), ["p0", "p2"]);
    }

    fn judge(id: &str, rounds: &[f64]) -> JudgeRecord {
        JudgeRecord { sample_id: id.into(), round_scores: rounds.to_vec() }
    }

    #[test]
    fn judge_spread() {
        let out = flag_inconsistent(
            &[judge("a", &[80.0, 80.0]), judge("b", &[60.0, 90.0]), judge("c", &[70.0, 75.0])],
            5.0,
        )
        .unwrap();
        assert_eq!(out.consistent, ["a", "c"]);
        assert_eq!(out.flagged, ["b"]);
        assert_eq!(flag_inconsistent(&[judge("x", &[1.0])], 5.0), Err(FilterError::TooFewRounds("x".into())));
        assert!(flag_inconsistent(&[], -1.0).is_err());
    }

    proptest! {
        #[test]
        fn rescaling_weights_is_invisible(
            k in 0u8..3, a in 0u8..3, w in 0u8..3,
            wk in 0.0f64..5.0, wa in 0.0f64..5.0, ww in 0.01f64..5.0, c in 0.01f64..100.0,
        ) {
            let d = QualityDimensions::new(k, a, w).unwrap();
            let s1 = composite_quality(&d, &profile(wk, wa, ww)).unwrap();
            let s2 = composite_quality(&d, &profile(c * wk, c * wa, c * ww)).unwrap();
            prop_assert!((s1 - s2).abs() <= 1e-12);
            prop_assert!((0.0..=1.0).contains(&s1));
        }

        #[test]
        fn composite_is_monotone(
            k in 0u8..2, a in 0u8..3, w in 0u8..3,
            wk in 0.0f64..5.0, wa in 0.0f64..5.0, ww in 0.01f64..5.0, dim in 0usize..3,
        ) {
            let p = profile(wk, wa, ww);
            let mut lo = [k, a, w];
            lo[dim] = lo[dim].min(1);
            let mut hi = lo;
            hi[dim] += 1;
            let s_lo = composite_quality(&QualityDimensions::new(lo[0], lo[1], lo[2]).unwrap(), &p).unwrap();
            let s_hi = composite_quality(&QualityDimensions::new(hi[0], hi[1], hi[2]).unwrap(), &p).unwrap();
            prop_assert!(s_hi >= s_lo);
        }
    }
}
