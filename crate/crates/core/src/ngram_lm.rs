//! Interpolated Kneser-Ney n-gram language model and perplexity filter.
//!
//! Every sentence is padded with `order - 1` BOS tokens and one EOS. With a
//! single absolute discount `D`, the conditional at level `k` is
//!
//! ```text
//! P_k(w | h) = (max(c_k(h w) - D, 0) + D * N1+(h •) * P_{k-1}(w | h')) / c_k(h •)
//! ```
//!
//! where `c_k` is the raw count at the top order and the continuation count
//! `N1+(• h w)` below it, and `h'` drops the oldest history token. Contexts
//! never seen fall straight through to `P_{k-1}`. The unigram level
//! interpolates with the uniform distribution over the predictive vocabulary,
//! so no token ever receives zero probability.

use std::collections::{BTreeMap, HashMap};
use std::fmt::Write as _;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{Document, Segmentation};
use crate::jsonl::{atomic_write, JsonlError};
use crate::text::tokenize;

pub const BOS: &str = "<s>";
pub const EOS: &str = "</s>";
pub const UNK: &str = "<unk>";

const BOS_ID: u32 = 0;
const EOS_ID: u32 = 1;
const UNK_ID: u32 = 2;

#[derive(Debug, Error)]
pub enum LmError {
    #[error("training corpus contains no tokens")]
    EmptyCorpus,
    #[error("order must be >= 1")]
    InvalidOrder,
    #[error("discount must lie strictly inside (0, 1), got {0}")]
    InvalidDiscount(f64),
    #[error("training documents mix segmentation modes")]
    MixedSegmentation,
    #[error("text has no tokens")]
    EmptyText,
    #[error("token `{0}` is outside the closed vocabulary")]
    OutOfVocabulary(String),
    #[error("invalid perplexity threshold: {0}")]
    InvalidThreshold(String),
    #[error("malformed model file at line {line}: {message}")]
    Format { line: usize, message: String },
    #[error(transparent)]
    Io(#[from] JsonlError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LmConfig {
    pub order: usize,
    pub discount: f64,
    pub min_count: u64,
    /// Reserve no probability mass for unknown tokens.
    pub closed_vocab: bool,
}

impl Default for LmConfig {
    fn default() -> Self {
        LmConfig { order: 3, discount: 0.75, min_count: 1, closed_vocab: false }
    }
}

/// Mergeable counts of top-order n-grams over raw tokens.
#[derive(Debug, Clone, Default)]
pub struct CountTable {
    order: usize,
    counts: HashMap<Vec<String>, u64>,
}

impl CountTable {
    pub fn new(order: usize) -> Self {
        CountTable { order, counts: HashMap::new() }
    }

    pub fn add_sentence(&mut self, tokens: &[&str]) {
        let mut padded: Vec<String> = vec![BOS.to_string(); self.order - 1];
        padded.extend(tokens.iter().map(|t| normalize_token(t).to_string()));
        padded.push(EOS.to_string());
        for window in padded.windows(self.order) {
            *self.counts.entry(window.to_vec()).or_default() += 1;
        }
    }

    pub fn merge(mut self, other: CountTable) -> CountTable {
        if self.order == 0 {
            return other;
        }
        for (k, v) in other.counts {
            *self.counts.entry(k).or_default() += v;
        }
        self
    }
}

/// Literal reserved symbols inside input text are treated as unknown words.
fn normalize_token(t: &str) -> &str {
    match t {
        BOS | EOS | UNK => UNK,
        other => other,
    }
}

#[derive(Debug, Clone, Default)]
struct ContextStats {
    total: f64,
    followers: HashMap<u32, f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
struct Header {
    format: String,
    version: u32,
    order: usize,
    discount: f64,
    min_count: u64,
    closed_vocab: bool,
    segmentation: Segmentation,
    vocab_size: usize,
    ngrams: usize,
}

const FORMAT: &str = "mtcurate-kn-counts";

#[derive(Debug, Clone)]
pub struct NGramLm {
    config: LmConfig,
    segmentation: Segmentation,
    tokens: Vec<String>,
    ids: HashMap<String, u32>,
    /// Top-order counts after rare-word mapping; the serialized form.
    top_counts: HashMap<Vec<u32>, u64>,
    /// `levels[k - 1]` maps a `(k-1)`-token context to its follower counts.
    levels: Vec<HashMap<Vec<u32>, ContextStats>>,
    /// Size of the predictive vocabulary (everything but BOS; UNK only if reachable).
    vocab_size: usize,
    has_unk: bool,
}

pub fn train_lm(docs: &[Document], config: &LmConfig) -> Result<NGramLm, LmError> {
    validate_config(config)?;
    let seg = match docs.first() {
        Some(d) => d.lang.segmentation(),
        None => return Err(LmError::EmptyCorpus),
    };
    if docs.iter().any(|d| d.lang.segmentation() != seg) {
        return Err(LmError::MixedSegmentation);
    }
    let table = docs
        .par_iter()
        .fold(
            || CountTable::new(config.order),
            |mut t, d| {
                let toks = tokenize(&d.text, seg);
                if !toks.is_empty() {
                    t.add_sentence(&toks);
                }
                t
            },
        )
        .reduce(|| CountTable::new(0), CountTable::merge);
    NGramLm::from_counts(table, seg, config)
}

fn validate_config(config: &LmConfig) -> Result<(), LmError> {
    if config.order == 0 {
        return Err(LmError::InvalidOrder);
    }
    if !(config.discount > 0.0 && config.discount < 1.0) {
        return Err(LmError::InvalidDiscount(config.discount));
    }
    Ok(())
}

impl NGramLm {
    /// Builds a model from raw top-order counts, applying `min_count`.
    pub fn from_counts(
        table: CountTable,
        segmentation: Segmentation,
        config: &LmConfig,
    ) -> Result<Self, LmError> {
        validate_config(config)?;
        if table.counts.is_empty() {
            return Err(LmError::EmptyCorpus);
        }
        if table.order != config.order {
            return Err(LmError::InvalidOrder);
        }
        // Every token occurrence ends exactly one padded top-order n-gram.
        let mut unigram: HashMap<&str, u64> = HashMap::new();
        for (g, c) in &table.counts {
            *unigram.entry(g.last().expect("order >= 1").as_str()).or_default() += c;
        }
        let mut kept: Vec<&str> = unigram
            .iter()
            .filter(|(t, &c)| c >= config.min_count && !matches!(**t, BOS | EOS | UNK))
            .map(|(t, _)| *t)
            .collect();
        kept.sort_unstable();

        let mut tokens = vec![BOS.to_string(), EOS.to_string(), UNK.to_string()];
        tokens.extend(kept.iter().map(|s| s.to_string()));
        let ids: HashMap<String, u32> =
            tokens.iter().enumerate().map(|(i, t)| (t.clone(), i as u32)).collect();

        let mut top_counts: HashMap<Vec<u32>, u64> = HashMap::new();
        for (g, c) in &table.counts {
            let key: Vec<u32> = g.iter().map(|t| ids.get(t).copied().unwrap_or(UNK_ID)).collect();
            *top_counts.entry(key).or_default() += c;
        }
        Ok(Self::assemble(config.clone(), segmentation, tokens, ids, top_counts))
    }

    fn assemble(
        config: LmConfig,
        segmentation: Segmentation,
        tokens: Vec<String>,
        ids: HashMap<String, u32>,
        top_counts: HashMap<Vec<u32>, u64>,
    ) -> Self {
        let n = config.order;
        let mut levels: Vec<HashMap<Vec<u32>, ContextStats>> = vec![HashMap::new(); n];
        for (g, &c) in &top_counts {
            let (ctx, w) = g.split_at(n - 1);
            *levels[n - 1].entry(ctx.to_vec()).or_default().followers.entry(w[0]).or_default() +=
                c as f64;
        }
        // Continuation counts: one per distinct left extension at the level above.
        for k in (1..n).rev() {
            let mut lower: HashMap<Vec<u32>, ContextStats> = HashMap::new();
            for (ctx, stats) in &levels[k] {
                for &w in stats.followers.keys() {
                    *lower.entry(ctx[1..].to_vec()).or_default().followers.entry(w).or_default() += 1.0;
                }
            }
            levels[k - 1] = lower;
        }
        for level in &mut levels {
            for stats in level.values_mut() {
                stats.total = stats.followers.values().sum();
            }
        }
        let has_unk = !config.closed_vocab
            || levels[0].get(&[][..]).is_some_and(|s| s.followers.contains_key(&UNK_ID));
        let vocab_size = tokens.len() - 1 - usize::from(!has_unk);
        NGramLm { config, segmentation, tokens, ids, top_counts, levels, vocab_size, has_unk }
    }

    pub fn order(&self) -> usize {
        self.config.order
    }

    pub fn discount(&self) -> f64 {
        self.config.discount
    }

    pub fn segmentation(&self) -> Segmentation {
        self.segmentation
    }

    /// Tokens that can be predicted: the vocabulary minus BOS (and minus UNK
    /// in a closed vocabulary that never saw it).
    pub fn predictive_vocab(&self) -> Vec<&str> {
        self.tokens
            .iter()
            .enumerate()
            .filter(|&(i, _)| i as u32 != BOS_ID && (self.has_unk || i as u32 != UNK_ID))
            .map(|(_, t)| t.as_str())
            .collect()
    }

    pub fn vocab_size(&self) -> usize {
        self.vocab_size
    }

    fn id_of(&self, token: &str) -> Result<u32, LmError> {
        match self.ids.get(normalize_token(token)) {
            Some(&id) if id != UNK_ID || self.has_unk => Ok(id),
            _ if self.has_unk => Ok(UNK_ID),
            _ => Err(LmError::OutOfVocabulary(token.to_string())),
        }
    }

    fn prob_ids(&self, ctx: &[u32], w: u32) -> f64 {
        let d = self.config.discount;
        if ctx.is_empty() {
            let uniform = 1.0 / self.vocab_size as f64;
            return match self.levels[0].get(ctx) {
                Some(s) => {
                    let c = s.followers.get(&w).copied().unwrap_or(0.0);
                    ((c - d).max(0.0) + d * s.followers.len() as f64 * uniform) / s.total
                }
                None => uniform,
            };
        }
        let lower = self.prob_ids(&ctx[1..], w);
        match self.levels[ctx.len()].get(ctx) {
            Some(s) => {
                let c = s.followers.get(&w).copied().unwrap_or(0.0);
                ((c - d).max(0.0) + d * s.followers.len() as f64 * lower) / s.total
            }
            None => lower,
        }
    }

    /// `P(word | history)`, using the last `order - 1` history tokens and
    /// left-padding with BOS when the history is shorter. `"<s>"` in the
    /// history denotes BOS.
    pub fn conditional_prob(&self, history: &[&str], word: &str) -> Result<f64, LmError> {
        let n = self.config.order - 1;
        let mut ctx = vec![BOS_ID; n.saturating_sub(history.len())];
        for t in &history[history.len().saturating_sub(n)..] {
            ctx.push(if *t == BOS { BOS_ID } else { self.id_of(t)? });
        }
        let w = if word == EOS { EOS_ID } else { self.id_of(word)? };
        Ok(self.prob_ids(&ctx, w))
    }

    /// Natural-log probability of each token of `text`, followed by EOS.
    pub fn token_log_probs(&self, text: &str) -> Result<Vec<f64>, LmError> {
        let toks = tokenize(text, self.segmentation);
        let n = self.config.order - 1;
        let mut seq = vec![BOS_ID; n];
        for t in &toks {
            seq.push(self.id_of(t)?);
        }
        seq.push(EOS_ID);
        Ok((n..seq.len()).map(|i| self.prob_ids(&seq[i - n..i], seq[i]).ln()).collect())
    }

    /// Sum of token log probabilities including EOS.
    pub fn log_prob(&self, text: &str) -> Result<f64, LmError> {
        Ok(self.token_log_probs(text)?.iter().sum())
    }

    /// `exp(-log_prob / (tokens + 1))`.
    pub fn perplexity(&self, text: &str) -> Result<f64, LmError> {
        let lps = self.token_log_probs(text)?;
        if lps.len() < 2 {
            return Err(LmError::EmptyText);
        }
        let total: f64 = lps.iter().sum();
        Ok((-total / lps.len() as f64).exp().max(1.0))
    }

    /// Writes the JSON header line followed by sorted `count<TAB>n-gram` lines.
    pub fn save(&self, path: &Path) -> Result<(), LmError> {
        let mut lines: Vec<(Vec<&str>, u64)> = self
            .top_counts
            .iter()
            .map(|(g, &c)| (g.iter().map(|&i| self.tokens[i as usize].as_str()).collect(), c))
            .collect();
        lines.sort();
        let header = Header {
            format: FORMAT.to_string(),
            version: 1,
            order: self.config.order,
            discount: self.config.discount,
            min_count: self.config.min_count,
            closed_vocab: self.config.closed_vocab,
            segmentation: self.segmentation,
            vocab_size: self.vocab_size,
            ngrams: lines.len(),
        };
        let mut body = serde_json::to_string(&header).map_err(JsonlError::from)?;
        body.push('\n');
        for (g, c) in lines {
            let _ = writeln!(body, "{c}\t{}", g.join(" "));
        }
        atomic_write(path, |w| w.write_all(body.as_bytes()))?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self, LmError> {
        let file = std::fs::File::open(path).map_err(|e| JsonlError::io(path, e))?;
        let mut lines = BufReader::new(file).lines();
        let fmt_err = |line: usize, message: String| LmError::Format { line, message };
        let first = lines
            .next()
            .ok_or_else(|| fmt_err(1, "missing header".into()))?
            .map_err(|e| JsonlError::io(path, e))?;
        let header: Header = serde_json::from_str(&first).map_err(|e| fmt_err(1, e.to_string()))?;
        if header.format != FORMAT || header.version != 1 {
            return Err(fmt_err(1, format!("unsupported format {} v{}", header.format, header.version)));
        }
        let config = LmConfig {
            order: header.order,
            discount: header.discount,
            min_count: header.min_count,
            closed_vocab: header.closed_vocab,
        };
        validate_config(&config)?;

        let mut raw: BTreeMap<Vec<String>, u64> = BTreeMap::new();
        for (i, line) in lines.enumerate() {
            let line = line.map_err(|e| JsonlError::io(path, e))?;
            let lineno = i + 2;
            let (count, gram) = line
                .split_once('\t')
                .ok_or_else(|| fmt_err(lineno, "expected count<TAB>n-gram".into()))?;
            let count: u64 = count.parse().map_err(|_| fmt_err(lineno, format!("bad count `{count}`")))?;
            let toks: Vec<String> = gram.split(' ').map(str::to_string).collect();
            if toks.len() != config.order {
                return Err(fmt_err(lineno, format!("expected {} tokens", config.order)));
            }
            raw.insert(toks, count);
        }
        if raw.len() != header.ngrams {
            return Err(fmt_err(1, format!("header says {} n-grams, found {}", header.ngrams, raw.len())));
        }
        let mut words: Vec<&str> = raw
            .keys()
            .flatten()
            .map(String::as_str)
            .filter(|t| !matches!(*t, BOS | EOS | UNK))
            .collect();
        words.sort_unstable();
        words.dedup();
        let mut tokens = vec![BOS.to_string(), EOS.to_string(), UNK.to_string()];
        tokens.extend(words.iter().map(|s| s.to_string()));
        let ids: HashMap<String, u32> =
            tokens.iter().enumerate().map(|(i, t)| (t.clone(), i as u32)).collect();
        let top_counts = raw
            .iter()
            .map(|(g, &c)| (g.iter().map(|t| ids[t]).collect(), c))
            .collect();
        let lm = Self::assemble(config, header.segmentation, tokens, ids, top_counts);
        if lm.vocab_size != header.vocab_size {
            return Err(fmt_err(1, format!("header vocab_size {} != {}", header.vocab_size, lm.vocab_size)));
        }
        Ok(lm)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PerplexityMode {
    /// Keep documents with perplexity `<= max_ppl`.
    Absolute { max_ppl: f64 },
    /// Keep the lowest-perplexity fraction `q`; ties at the cutoff are kept.
    Percentile { q: f64 },
}

impl Default for PerplexityMode {
    fn default() -> Self {
        PerplexityMode::Percentile { q: 0.95 }
    }
}

impl PerplexityMode {
    pub fn validate(&self) -> Result<(), LmError> {
        match *self {
            PerplexityMode::Absolute { max_ppl } if !(max_ppl > 1.0) => {
                Err(LmError::InvalidThreshold(format!("max_ppl must be > 1, got {max_ppl}")))
            }
            PerplexityMode::Percentile { q } if !(q > 0.0 && q <= 1.0) => {
                Err(LmError::InvalidThreshold(format!("q must lie in (0, 1], got {q}")))
            }
            _ => Ok(()),
        }
    }
}

#[derive(Debug, Clone, Default)]
pub struct PerplexityOutcome {
    pub kept: Vec<Document>,
    pub dropped: Vec<(Document, f64)>,
}

pub fn filter_high_perplexity(
    docs: Vec<Document>,
    lm: &NGramLm,
    mode: PerplexityMode,
) -> Result<PerplexityOutcome, LmError> {
    mode.validate()?;
    let ppls = docs.par_iter().map(|d| lm.perplexity(&d.text)).collect::<Result<Vec<_>, _>>()?;
    let cutoff = match mode {
        PerplexityMode::Absolute { max_ppl } => max_ppl,
        PerplexityMode::Percentile { q } => {
            if ppls.is_empty() {
                f64::INFINITY
            } else {
                let mut sorted = ppls.clone();
                sorted.sort_by(f64::total_cmp);
                let rank = ((q * sorted.len() as f64).ceil() as usize).clamp(1, sorted.len());
                sorted[rank - 1]
            }
        }
    };
    let mut out = PerplexityOutcome::default();
    for (d, p) in docs.into_iter().zip(ppls) {
        if p <= cutoff {
            out.kept.push(d);
        } else {
            out.dropped.push((d, p));
        }
    }
    Ok(out)
}
