use std::collections::BTreeMap;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use clap::{Args, ValueEnum};
use mtcurate::chimera::{
    fuse, generate_candidates, generate_candidates_per_slot, Backend, CandidateSet, JobResult, TranslationJob,
};
use mtcurate::corpus::{read_corpus, read_records, write_any_corpus, write_corpus, CorpusKind, Document, LanguageTag, ParallelPair};
use mtcurate::dedup::{dedup, DedupConfig};
use mtcurate::evalkit::{group_report, score_corpus, Aggregation, Hypothesis, Metric, MetricSpec};
use mtcurate::filters::pipeline::{run_pipeline, PipelineConfig, Stage, StageReport};
use mtcurate::filters::{
    composite_quality, flag_inconsistent, JudgeRecord, QualityDimensions, Scorer, ScorerEndpoint, WeightProfiles,
    COMPOSITE_QUALITY,
};
use mtcurate::jsonl::{read_values, write_json, write_jsonl};
use mtcurate::langid::{filter_by_language, train_langid, LangIdConfig, LangIdModel};
use mtcurate::mixopt::{
    blend_replay, fit_regression, optimize_mixture, sample_mixtures, synthesize_runs, LrSchedule, MixtureSpec,
    ProxyRun, RegressionModel,
};
use mtcurate::ngram_lm::{filter_high_perplexity, train_lm, LmConfig, NGramLm, PerplexityMode};
use mtcurate::rewards::{
    grpo_advantages, score_rewards, RepetitionConfig, RewardRecord, RewardSettings, RewardWeights, TermTable,
    DEFAULT_EPSILON,
};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::config::{load_config, write_report, ChimeraConfig};
use crate::errors::{corpus_err, invalid, jsonl_err, runtime};
use crate::{Cli, Command, Global};

pub fn run(cli: Cli) -> Result<()> {
    if let Some(j) = cli.global.jobs {
        if j == 0 {
            return Err(invalid("--jobs must be >= 1"));
        }
        rayon::ThreadPoolBuilder::new().num_threads(j).build_global().map_err(runtime)?;
    }
    let g = &cli.global;
    match cli.command {
        Command::LangidTrain(c) => c.run(g),
        Command::LangidFilter(c) => c.run(g),
        Command::Dedup(c) => c.run(g),
        Command::LmTrain(c) => c.run(g),
        Command::LmFilter(c) => c.run(g),
        Command::QualityScore(c) => c.run(g),
        Command::QualityFilter(c) => c.run(g),
        Command::JudgeFlag(c) => c.run(g),
        Command::MixSample(c) => c.run(g),
        Command::MixFit(c) => c.run(g),
        Command::MixOptimize(c) => c.run(g),
        Command::LrCurve(c) => c.run(g),
        Command::RewardScore(c) => c.run(g),
        Command::GrpoAdvantages(c) => c.run(g),
        Command::Translate(c) => c.run(g),
        Command::Fuse(c) => c.run(g),
        Command::Eval(c) => c.run(g),
        Command::PipelineRun(c) => c.run(g),
    }
}

impl Global {
    fn seed(&self) -> u64 {
        self.seed.unwrap_or(0)
    }

    fn report(&self, command: &str, body: Value) -> Result<()> {
        write_report(self.report.as_deref(), command, self.seed(), body)
    }
}

fn read_docs(path: &Path) -> Result<Vec<Document>> {
    read_records(path).map_err(corpus_err).with_context(|| format!("reading {}", path.display()))
}

fn write_docs(docs: &[Document], path: &Path) -> Result<()> {
    write_corpus(docs, path).map_err(runtime).map(|_| ())
}

fn read_rows<T: serde::de::DeserializeOwned>(path: &Path) -> Result<Vec<T>> {
    read_values(path).map_err(jsonl_err).with_context(|| format!("reading {}", path.display()))
}

fn write_rows<T: Serialize>(path: &Path, rows: &[T]) -> Result<()> {
    write_jsonl(path, rows).map_err(runtime).map(|_| ())
}

fn parse_lang(s: &str) -> Result<LanguageTag, String> {
    LanguageTag::parse(s).map_err(|e| e.to_string())
}

fn stage_report(stage: &str, input: usize, kept: usize, reasons: BTreeMap<String, usize>) -> StageReport {
    let dropped = reasons.values().sum();
    StageReport { stage: stage.into(), input_count: input, kept, dropped, unscored: 0, reasons }
}

#[derive(Debug, Args)]
pub struct LangidTrain {
    #[arg(long = "in")]
    input: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// n-gram range and smoothing (JSON).
    #[arg(long)]
    config: Option<PathBuf>,
}

impl LangidTrain {
    fn run(self, g: &Global) -> Result<()> {
        let cfg: LangIdConfig = match &self.config {
            Some(p) => load_config(p)?,
            None => LangIdConfig::default(),
        };
        let docs = read_docs(&self.input)?;
        let model = train_langid(&docs, &cfg).map_err(invalid)?;
        write_json(&self.out, &model).map_err(runtime)?;
        let mut per_lang: BTreeMap<&str, usize> = BTreeMap::new();
        for d in &docs {
            *per_lang.entry(d.lang.code()).or_default() += 1;
        }
        g.report(
            "langid-train",
            json!({ "documents": docs.len(), "classes": model.classes, "documents_per_language": per_lang,
                    "vocabulary": model.log_likelihoods.len() }),
        )
    }
}

#[derive(Debug, Serialize)]
struct LangDropRow {
    id: String,
    lang: LanguageTag,
    predicted: LanguageTag,
    confidence: f64,
}

#[derive(Debug, Args)]
pub struct LangidFilter {
    #[arg(long)]
    model: PathBuf,
    #[arg(long = "in")]
    input: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// Language every document must be; default is each document's own tag.
    #[arg(long, value_parser = parse_lang)]
    expected: Option<LanguageTag>,
    #[arg(long, default_value_t = 0.5)]
    min_confidence: f64,
    /// Write dropped documents with their predictions here.
    #[arg(long)]
    dropped: Option<PathBuf>,
}

impl LangidFilter {
    fn run(self, g: &Global) -> Result<()> {
        if !(0.0..=1.0).contains(&self.min_confidence) {
            return Err(invalid(format!("--min-confidence {} outside [0, 1]", self.min_confidence)));
        }
        let model: LangIdModel = load_config(&self.model)?;
        let docs = read_docs(&self.input)?;
        let n = docs.len();
        let out = filter_by_language(&model, docs, self.expected, self.min_confidence).map_err(runtime)?;
        let mut reasons = BTreeMap::new();
        let rows: Vec<LangDropRow> = out
            .dropped
            .iter()
            .map(|(d, why)| {
                let key = if why.predicted == self.expected.unwrap_or(d.lang) { "low_confidence" } else { "language_mismatch" };
                *reasons.entry(key.to_string()).or_default() += 1;
                LangDropRow { id: d.id.clone(), lang: d.lang, predicted: why.predicted, confidence: why.confidence }
            })
            .collect();
        if let Some(p) = &self.dropped {
            write_rows(p, &rows)?;
        }
        write_docs(&out.kept, &self.out)?;
        g.report("langid-filter", json!({ "stages": [stage_report("langid", n, out.kept.len(), reasons)] }))
    }
}

#[derive(Debug, Args)]
pub struct Dedup {
    #[arg(long = "in")]
    input: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// Shingling, signature and LSH parameters (JSON).
    #[arg(long)]
    config: Option<PathBuf>,
    /// Write (dropped_id, kept_id, estimated_jaccard) rows here.
    #[arg(long)]
    dropped: Option<PathBuf>,
}

impl Dedup {
    fn run(self, g: &Global) -> Result<()> {
        let mut cfg: DedupConfig = match &self.config {
            Some(p) => load_config(p)?,
            None => DedupConfig::default(),
        };
        if let Some(s) = g.seed {
            cfg.seed = s;
        }
        cfg.validate().map_err(invalid)?;
        let docs = read_docs(&self.input)?;
        let n = docs.len();
        let out = dedup(docs, &cfg).map_err(runtime)?;
        if let Some(p) = &self.dropped {
            write_rows(p, &out.report())?;
        }
        write_docs(&out.kept, &self.out)?;
        let reasons = if out.dropped.is_empty() { BTreeMap::new() } else { [("near_duplicate".to_string(), out.dropped.len())].into() };
        let body = json!({ "stages": [stage_report("dedup", n, out.kept.len(), reasons)], "params": cfg });
        write_report(g.report.as_deref(), "dedup", cfg.seed, body)
    }
}

#[derive(Debug, Args)]
pub struct LmTrain {
    #[arg(long = "in")]
    input: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 3)]
    order: usize,
    #[arg(long, default_value_t = 0.75)]
    discount: f64,
    #[arg(long, default_value_t = 1)]
    min_count: u64,
    /// Reserve no probability for unknown tokens.
    #[arg(long)]
    closed_vocab: bool,
}

impl LmTrain {
    fn run(self, g: &Global) -> Result<()> {
        let cfg = LmConfig {
            order: self.order,
            discount: self.discount,
            min_count: self.min_count,
            closed_vocab: self.closed_vocab,
        };
        if cfg.order == 0 || !(cfg.discount > 0.0 && cfg.discount < 1.0) {
            return Err(invalid("need --order >= 1 and --discount in (0, 1)"));
        }
        let docs = read_docs(&self.input)?;
        let lm = train_lm(&docs, &cfg).map_err(invalid)?;
        lm.save(&self.out).map_err(runtime)?;
        g.report(
            "lm-train",
            json!({ "documents": docs.len(), "order": lm.order(), "discount": lm.discount(),
                    "vocab_size": lm.vocab_size(), "segmentation": lm.segmentation() }),
        )
    }
}

#[derive(Debug, Args)]
pub struct LmFilter {
    #[arg(long)]
    model: PathBuf,
    #[arg(long = "in")]
    input: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// Keep this lowest-perplexity fraction (default 0.95).
    #[arg(long, conflicts_with = "max_ppl")]
    percentile: Option<f64>,
    /// Keep documents with perplexity at most this.
    #[arg(long)]
    max_ppl: Option<f64>,
    /// Write dropped ids with their perplexity here.
    #[arg(long)]
    dropped: Option<PathBuf>,
}

impl LmFilter {
    fn run(self, g: &Global) -> Result<()> {
        let mode = match (self.percentile, self.max_ppl) {
            (_, Some(max_ppl)) => PerplexityMode::Absolute { max_ppl },
            (Some(q), None) => PerplexityMode::Percentile { q },
            (None, None) => PerplexityMode::default(),
        };
        mode.validate().map_err(invalid)?;
        let lm = NGramLm::load(&self.model).map_err(runtime)?;
        let docs = read_docs(&self.input)?;
        let n = docs.len();
        let out = filter_high_perplexity(docs, &lm, mode).map_err(runtime)?;
        if let Some(p) = &self.dropped {
            let rows: Vec<Value> = out.dropped.iter().map(|(d, ppl)| json!({ "id": d.id, "perplexity": ppl })).collect();
            write_rows(p, &rows)?;
        }
        write_docs(&out.kept, &self.out)?;
        let reasons = if out.dropped.is_empty() { BTreeMap::new() } else { [("high_perplexity".to_string(), out.dropped.len())].into() };
        g.report("lm-filter", json!({ "mode": mode, "stages": [stage_report("perplexity", n, out.kept.len(), reasons)] }))
    }
}

fn load_profiles(path: Option<&Path>) -> Result<WeightProfiles> {
    let profiles = match path {
        Some(p) => load_config(p)?,
        None => WeightProfiles::default(),
    };
    profiles.validate().map_err(invalid)?;
    Ok(profiles)
}

#[derive(Debug, Args)]
pub struct QualityScore {
    #[arg(long = "in")]
    input: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// Per-provenance dimension weights (JSON).
    #[arg(long)]
    profiles: Option<PathBuf>,
}

impl QualityScore {
    fn run(self, g: &Global) -> Result<()> {
        let profiles = load_profiles(self.profiles.as_deref())?;
        let mut docs = read_docs(&self.input)?;
        let (mut scored, mut missing, mut bad) = (0usize, 0usize, 0usize);
        for d in &mut docs {
            match QualityDimensions::from_document(d) {
                Ok(Some(dims)) => {
                    let q = composite_quality(&dims, &profiles.get(d.provenance)).map_err(runtime)?;
                    d.scores.insert(COMPOSITE_QUALITY.to_string(), q);
                    scored += 1;
                }
                Ok(None) => missing += 1,
                Err(_) => bad += 1,
            }
        }
        write_docs(&docs, &self.out)?;
        g.report(
            "quality-score",
            json!({ "input_count": docs.len(), "scored": scored, "missing_dimensions": missing, "invalid_dimensions": bad }),
        )
    }
}

#[derive(Debug, Args)]
pub struct QualityFilter {
    #[arg(long = "in")]
    input: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// Minimum composite quality in [0, 1].
    #[arg(long)]
    min_quality: f64,
    #[arg(long)]
    profiles: Option<PathBuf>,
}

impl QualityFilter {
    fn run(self, g: &Global) -> Result<()> {
        let profiles = load_profiles(self.profiles.as_deref())?;
        if !self.min_quality.is_finite() {
            return Err(invalid("--min-quality must be finite"));
        }
        let stages = [Stage::Quality { min_quality: self.min_quality, profiles }];
        let docs = read_docs(&self.input)?;
        let (kept, reports) = run_pipeline(mtcurate::corpus::Corpus::Mono(docs), &stages).map_err(runtime)?;
        write_any_corpus(&kept, &self.out).map_err(runtime)?;
        g.report("quality-filter", json!({ "stages": reports }))
    }
}

#[derive(Debug, Args)]
pub struct JudgeFlag {
    /// JSON Lines of `{sample_id, round_scores}`.
    #[arg(long = "in")]
    input: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 1.0)]
    max_spread: f64,
}

impl JudgeFlag {
    fn run(self, g: &Global) -> Result<()> {
        let records: Vec<JudgeRecord> = read_rows(&self.input)?;
        let report = flag_inconsistent(&records, self.max_spread).map_err(invalid)?;
        write_json(&self.out, &report).map_err(runtime)?;
        g.report(
            "judge-flag",
            json!({ "samples": records.len(), "consistent": report.consistent.len(), "flagged": report.flagged.len(),
                    "max_spread": self.max_spread }),
        )
    }
}

#[derive(Debug, Args)]
pub struct MixSample {
    /// Comma-separated domain names.
    #[arg(long, value_delimiter = ',', required = true)]
    domains: Vec<String>,
    #[arg(long, default_value_t = 512)]
    n: usize,
    #[arg(long, default_value_t = 1.0)]
    alpha: f64,
    #[arg(long)]
    out: PathBuf,
    /// Emit proxy runs with loss ‖w − target‖² instead of bare mixtures.
    #[arg(long, value_delimiter = ',')]
    synthetic_target: Option<Vec<f64>>,
    /// Gaussian noise added to synthetic losses.
    #[arg(long, default_value_t = 0.0)]
    noise: f64,
}

impl MixSample {
    fn run(self, g: &Global) -> Result<()> {
        let seed = g.seed();
        let mixtures = sample_mixtures(&self.domains, self.n, self.alpha, seed).map_err(invalid)?;
        match &self.synthetic_target {
            Some(t) => {
                if t.len() != self.domains.len() {
                    return Err(invalid("--synthetic-target needs one weight per domain"));
                }
                if !(self.noise >= 0.0 && self.noise.is_finite()) {
                    return Err(invalid("--noise must be >= 0"));
                }
                let target = t.clone();
                let loss = move |w: &[f64]| w.iter().zip(&target).map(|(a, b)| (a - b) * (a - b)).sum::<f64>();
                let runs = synthesize_runs(mixtures, loss, self.noise, seed.wrapping_add(1));
                write_rows(&self.out, &runs)?;
            }
            None => write_rows(&self.out, &mixtures)?,
        }
        g.report("mix-sample", json!({ "domains": self.domains, "n": self.n, "alpha": self.alpha }))
    }
}

#[derive(Debug, Args)]
pub struct MixFit {
    /// JSON Lines of `{mixture: {domains, weights}, observed_loss}`.
    #[arg(long)]
    runs: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 1e-6)]
    lambda: f64,
}

impl MixFit {
    fn run(self, g: &Global) -> Result<()> {
        let runs: Vec<ProxyRun> = read_rows(&self.runs)?;
        let model = fit_regression(&runs, self.lambda).map_err(invalid)?;
        write_json(&self.out, &model).map_err(runtime)?;
        g.report("mix-fit", json!({ "runs": runs.len(), "ridge_lambda": self.lambda, "train_rmse": model.train_rmse }))
    }
}

#[derive(Debug, Args)]
pub struct MixOptimize {
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 65536)]
    candidates: usize,
    /// Blend this replay domain into the chosen mixture.
    #[arg(long, requires = "replay_fraction")]
    replay_domain: Option<String>,
    #[arg(long, requires = "replay_domain")]
    replay_fraction: Option<f64>,
}

#[derive(Debug, Serialize)]
struct OptimizeOutput {
    #[serde(flatten)]
    choice: mtcurate::mixopt::MixtureChoice,
    #[serde(skip_serializing_if = "Option::is_none")]
    blended: Option<MixtureSpec>,
}

impl MixOptimize {
    fn run(self, g: &Global) -> Result<()> {
        let model: RegressionModel = load_config(&self.model)?;
        let choice = optimize_mixture(&model, self.candidates, g.seed()).map_err(invalid)?;
        let blended = match (&self.replay_domain, self.replay_fraction) {
            (Some(d), Some(f)) => Some(blend_replay(&choice.mixture, f, d).map_err(invalid)?),
            _ => None,
        };
        let out = OptimizeOutput { choice, blended };
        write_json(&self.out, &out).map_err(runtime)?;
        g.report("mix-optimize", json!({ "candidates": self.candidates, "result": out }))
    }
}

#[derive(Debug, Args)]
pub struct LrCurve {
    /// `{warmup_steps, total_steps, peak_lr, min_lr, decay_shape}`.
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// Emit every n-th step (the last step is always included).
    #[arg(long, default_value_t = 1)]
    every: u64,
}

impl LrCurve {
    fn run(self, g: &Global) -> Result<()> {
        let sched: LrSchedule = load_config(&self.config)?;
        sched.validate().map_err(invalid)?;
        if self.every == 0 {
            return Err(invalid("--every must be >= 1"));
        }
        sched.write_csv(&self.out, self.every).map_err(runtime)?;
        g.report("lr-curve", json!({ "schedule": sched, "every": self.every }))
    }
}

#[derive(Debug, Args)]
pub struct RewardScore {
    /// JSON Lines of `{id, src_lang, tgt_lang, source, hypothesis, quality?, group?}`.
    #[arg(long = "in")]
    input: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// Terminology table: source term → accepted target renderings.
    #[arg(long)]
    terms: Option<PathBuf>,
    /// `{w_quality, w_terminology, w_repetition_penalty}`.
    #[arg(long)]
    weights: Option<PathBuf>,
    /// Repetition detector settings.
    #[arg(long)]
    repetition: Option<PathBuf>,
    /// Scorer endpoint supplying the quality component.
    #[arg(long)]
    scorer: Option<PathBuf>,
}

impl RewardScore {
    fn run(self, g: &Global) -> Result<()> {
        let settings = RewardSettings {
            table: match &self.terms {
                Some(p) => load_config::<TermTable>(p)?,
                None => TermTable::default(),
            },
            weights: match &self.weights {
                Some(p) => load_config::<RewardWeights>(p)?,
                None => RewardWeights::default(),
            },
            repetition: match &self.repetition {
                Some(p) => load_config::<RepetitionConfig>(p)?,
                None => RepetitionConfig::default(),
            },
        };
        settings.table.validate().map_err(invalid)?;
        settings.weights.validate().map_err(invalid)?;
        settings.repetition.validate().map_err(invalid)?;
        let scorer = self.scorer.as_deref().map(build_scorer).transpose()?;
        let inputs = read_rows(&self.input)?;
        let records = score_rewards(&inputs, &settings, scorer.as_deref()).map_err(runtime)?;
        write_rows(&self.out, &records)?;
        let mean = records.iter().map(|r| r.breakdown.total).sum::<f64>() / records.len().max(1) as f64;
        g.report("reward-score", json!({ "records": records.len(), "mean_total": mean, "weights": settings.weights }))
    }
}

fn build_scorer(path: &Path) -> Result<Box<dyn Scorer>> {
    let ep: ScorerEndpoint = load_config(path)?;
    ep.build().map_err(invalid)
}

#[derive(Debug, Args)]
pub struct GrpoAdvantages {
    /// Reward records (`reward-score` output) carrying `group` and `total`.
    #[arg(long = "in")]
    input: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = DEFAULT_EPSILON)]
    epsilon: f64,
}

#[derive(Debug, Serialize)]
struct AdvantageRow<'a> {
    id: &'a str,
    group: &'a str,
    reward: f64,
    advantage: f64,
}

impl GrpoAdvantages {
    fn run(self, g: &Global) -> Result<()> {
        let records: Vec<RewardRecord> = read_rows(&self.input)?;
        let mut groups: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
        for (i, r) in records.iter().enumerate() {
            let key = r.group.as_deref().ok_or_else(|| invalid(format!("record `{}` has no group", r.id)))?;
            groups.entry(key).or_default().push(i);
        }
        let mut adv = vec![0.0; records.len()];
        for (name, idx) in &groups {
            let rewards: Vec<f64> = idx.iter().map(|&i| records[i].breakdown.total).collect();
            let a = grpo_advantages(&rewards, self.epsilon).map_err(|e| invalid(format!("group `{name}`: {e}")))?;
            for (&i, v) in idx.iter().zip(a) {
                adv[i] = v;
            }
        }
        let rows: Vec<AdvantageRow> = records
            .iter()
            .zip(&adv)
            .map(|(r, &advantage)| AdvantageRow {
                id: &r.id,
                group: r.group.as_deref().unwrap_or_default(),
                reward: r.breakdown.total,
                advantage,
            })
            .collect();
        write_rows(&self.out, &rows)?;
        g.report("grpo-advantages", json!({ "records": records.len(), "groups": groups.len(), "epsilon": self.epsilon }))
    }
}

struct Chimera {
    cfg: ChimeraConfig,
    seed: u64,
    backends: Vec<Box<dyn Backend>>,
}

impl Chimera {
    fn load(path: &Path, g: &Global, need_fusion: bool) -> Result<Self> {
        let cfg: ChimeraConfig = load_config(path)?;
        let seed = g.seed.or(cfg.seed).unwrap_or(0);
        cfg.validate(seed)?;
        if need_fusion && cfg.fusion_backend.is_none() {
            return Err(invalid("`fusion_backend` is required for fuse"));
        }
        let backends = cfg.backends.iter().map(|b| b.build().map_err(invalid)).collect::<Result<Vec<_>>>()?;
        Ok(Chimera { cfg, seed, backends })
    }

    fn candidates(&self, job: &TranslationJob) -> Result<CandidateSet> {
        let grid = self.cfg.grid(self.seed);
        let r = if self.backends.len() == 1 {
            generate_candidates(self.backends[0].as_ref(), job.src_lang, job.tgt_lang, &job.text, &grid, self.cfg.concurrency)
        } else {
            let slots: Vec<&dyn Backend> = self.backends.iter().map(|b| b.as_ref()).collect();
            generate_candidates_per_slot(&slots, job.src_lang, job.tgt_lang, &job.text, &grid, self.cfg.concurrency)
        };
        r.map_err(|e| runtime(format!("job `{}`: {e}", job.id)))
    }
}

fn read_jobs(path: &Path) -> Result<Vec<TranslationJob>> {
    let jobs: Vec<TranslationJob> = read_rows(path)?;
    let mut seen = std::collections::HashSet::new();
    for j in &jobs {
        if !seen.insert(j.id.as_str()) {
            return Err(invalid(format!("duplicate job id `{}`", j.id)));
        }
        if j.src_lang == j.tgt_lang {
            return Err(invalid(format!("job `{}` translates {} into itself", j.id, j.src_lang.code())));
        }
    }
    Ok(jobs)
}

/// JSON Lines to `out`, or stdout when no path is given.
fn emit<T: Serialize>(out: Option<&Path>, rows: &[T]) -> Result<()> {
    match out {
        Some(p) => write_rows(p, rows),
        None => {
            let mut stdout = std::io::stdout().lock();
            for r in rows {
                serde_json::to_writer(&mut stdout, r)?;
                stdout.write_all(b"\n")?;
            }
            Ok(())
        }
    }
}

#[derive(Debug, Args)]
pub struct Translate {
    /// Backends, sampling grid and concurrency (JSON).
    #[arg(long)]
    config: PathBuf,
    /// JSON Lines of `{id, src_lang, tgt_lang, text}`.
    #[arg(long = "in")]
    input: PathBuf,
    /// Output path; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Skip jobs whose every candidate request fails instead of aborting.
    #[arg(long)]
    keep_going: bool,
}

#[derive(Debug, Serialize)]
struct CandidateRow {
    id: String,
    #[serde(flatten)]
    set: CandidateSet,
}

impl Translate {
    fn run(self, g: &Global) -> Result<()> {
        let chimera = Chimera::load(&self.config, g, false)?;
        let jobs = read_jobs(&self.input)?;
        let mut rows = Vec::new();
        let mut failed = Vec::new();
        for job in &jobs {
            match chimera.candidates(job) {
                Ok(set) => rows.push(CandidateRow { id: job.id.clone(), set }),
                Err(e) if self.keep_going => failed.push(json!({ "id": job.id, "error": e.to_string() })),
                Err(e) => return Err(e),
            }
        }
        emit(self.out.as_deref(), &rows)?;
        let slot_failures: usize = rows.iter().map(|r| r.set.failures.len()).sum();
        write_report(
            g.report.as_deref(),
            "translate",
            chimera.seed,
            json!({ "jobs": jobs.len(), "completed": rows.len(), "failed_jobs": failed, "slot_failures": slot_failures }),
        )
    }
}

#[derive(Debug, Args)]
pub struct Fuse {
    #[arg(long)]
    config: PathBuf,
    /// JSON Lines of `{id, src_lang, tgt_lang, text}`.
    #[arg(long = "in")]
    input: PathBuf,
    /// Output path; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    keep_going: bool,
}

impl Fuse {
    fn run(self, g: &Global) -> Result<()> {
        let chimera = Chimera::load(&self.config, g, true)?;
        let fusion_backend = chimera.cfg.fusion_backend.as_ref().expect("validated").build().map_err(invalid)?;
        let scorer = chimera.cfg.fallback_scorer.as_ref().map(|s| s.build().map_err(invalid)).transpose()?;
        let mut params = chimera.cfg.fusion_params.clone();
        params.seed = params.seed.or(Some(chimera.seed));
        let jobs = read_jobs(&self.input)?;
        let mut rows = Vec::new();
        let mut failed = Vec::new();
        for job in &jobs {
            let result = chimera.candidates(job).and_then(|set| {
                let f = fuse(fusion_backend.as_ref(), &set, &params, scorer.as_deref())
                    .map_err(|e| runtime(format!("job `{}`: {e}", job.id)))?;
                Ok(JobResult::new(job.id.clone(), set, f))
            });
            match result {
                Ok(r) => rows.push(r),
                Err(e) if self.keep_going => failed.push(json!({ "id": job.id, "error": e.to_string() })),
                Err(e) => return Err(e),
            }
        }
        emit(self.out.as_deref(), &rows)?;
        let fallbacks = rows.iter().filter(|r| r.fallback_used).count();
        write_report(
            g.report.as_deref(),
            "fuse",
            chimera.seed,
            json!({ "jobs": jobs.len(), "completed": rows.len(), "fallbacks": fallbacks, "failed_jobs": failed }),
        )
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum AggregationArg {
    Micro,
    Macro,
}

#[derive(Debug, Args)]
pub struct Eval {
    /// Parallel pairs whose target side is the reference.
    #[arg(long)]
    refs: PathBuf,
    /// JSON Lines of `{id, hypothesis}`.
    #[arg(long)]
    hyps: PathBuf,
    /// Scorer endpoint (JSON) instead of built-in chrF.
    #[arg(long)]
    scorer: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "micro")]
    aggregation: AggregationArg,
    /// Write the grouped report as JSON here.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Write per-segment scores here.
    #[arg(long)]
    segments: Option<PathBuf>,
}

impl Eval {
    fn run(self, g: &Global) -> Result<()> {
        let metric = match &self.scorer {
            Some(p) => MetricSpec::Scorer(load_config(p)?).build().map_err(invalid)?,
            None => Metric::Chrf,
        };
        let aggregation = match self.aggregation {
            AggregationArg::Micro => Aggregation::Micro,
            AggregationArg::Macro => Aggregation::Macro,
        };
        let pairs: Vec<ParallelPair> = read_records(&self.refs).map_err(corpus_err)?;
        let hyp_rows: Vec<Hypothesis> = read_rows(&self.hyps)?;
        let mut hyps = BTreeMap::new();
        for h in hyp_rows {
            if hyps.insert(h.id.clone(), h.hypothesis).is_some() {
                return Err(invalid(format!("duplicate hypothesis id `{}`", h.id)));
            }
        }
        let scored = score_corpus(&pairs, &hyps, &metric).map_err(invalid)?;
        let report = group_report(&scored.scored, aggregation).map_err(invalid)?;
        if let Some(p) = &self.segments {
            write_rows(p, &scored.scored)?;
        }
        if let Some(p) = &self.out {
            write_json(p, &report).map_err(runtime)?;
        }
        print!("{}", report.render_text());
        g.report("eval", json!({ "report": report, "failures": scored.failures }))
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum KindArg {
    Mono,
    Parallel,
}

#[derive(Debug, Args)]
pub struct PipelineRun {
    /// Stage list and parameters (JSON).
    #[arg(long)]
    config: PathBuf,
    /// Input corpus; overrides the config's `input`.
    #[arg(long = "in")]
    input: Option<PathBuf>,
    /// Output corpus; overrides the config's `output`.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Corpus kind; overrides the config's `corpus_kind`.
    #[arg(long, value_enum)]
    kind: Option<KindArg>,
}

#[derive(Debug, Serialize, Deserialize)]
struct PipelineSummary {
    input_count: usize,
    output_count: usize,
    stages: Vec<StageReport>,
    reconciled: bool,
}

impl PipelineRun {
    fn run(self, g: &Global) -> Result<()> {
        let mut cfg: PipelineConfig = load_config(&self.config)?;
        let base = self.config.parent().map(Path::to_path_buf).unwrap_or_default();
        let seed = g.seed.or(cfg.seed);
        if let Some(s) = seed {
            cfg.apply_seed(s);
        }
        let kind = match self.kind {
            Some(KindArg::Mono) => CorpusKind::Mono,
            Some(KindArg::Parallel) => CorpusKind::Parallel,
            None => cfg.corpus_kind,
        };
        let input = self.input.clone().or_else(|| cfg.input.as_ref().map(|p| base.join(p)));
        let output = self.out.clone().or_else(|| cfg.output.as_ref().map(|p| base.join(p)));
        let (Some(input), Some(output)) = (input, output) else {
            return Err(invalid("input and output paths are required (flags or config)"));
        };
        let stages = cfg.prepare(&base).map_err(invalid)?;
        mtcurate::filters::pipeline::validate_stages(&stages, kind).map_err(invalid)?;
        let corpus = read_corpus(&input, kind).map_err(corpus_err)?;
        let n = corpus.len();
        let (kept, reports) = run_pipeline(corpus, &stages).map_err(runtime)?;
        let reconciled = reports.iter().all(StageReport::reconciles)
            && reports.windows(2).all(|w| w[0].kept == w[1].input_count);
        let summary = PipelineSummary { input_count: n, output_count: kept.len(), stages: reports, reconciled };
        write_any_corpus(&kept, &output).map_err(runtime)?;
        write_report(g.report.as_deref(), "pipeline-run", seed.unwrap_or(0), serde_json::to_value(&summary)?)
    }
}
