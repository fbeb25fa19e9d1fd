//! Pluggable reference-free scorers: built-in local functions and JSON-over-HTTP endpoints.

use std::time::Duration;

use serde::{Deserialize, Serialize};
use serde_json::json;
use thiserror::Error;

use crate::corpus::{Document, LanguageTag, ParallelPair, Record, Scores};
use crate::http::{HttpError, JsonClient};

#[derive(Debug, Error)]
pub enum ScorerError {
    #[error("invalid scorer `{name}`: {message}")]
    Config { name: String, message: String },
    #[error("scorer `{name}` failed on `{id}`: {message}")]
    Failed { name: String, id: String, message: String },
    #[error(transparent)]
    Http(#[from] HttpError),
}

/// What a scorer sees of a record.
#[derive(Debug, Clone, Copy)]
pub struct ScoreInput<'a> {
    pub id: &'a str,
    pub src_lang: LanguageTag,
    pub tgt_lang: Option<LanguageTag>,
    pub source: &'a str,
    pub target: Option<&'a str>,
    pub scores: &'a Scores,
}

pub trait Scorable: Record {
    fn score_input(&self) -> ScoreInput<'_>;
}

impl Scorable for Document {
    fn score_input(&self) -> ScoreInput<'_> {
        ScoreInput {
            id: &self.id,
            src_lang: self.lang,
            tgt_lang: None,
            source: &self.text,
            target: None,
            scores: &self.scores,
        }
    }
}

impl Scorable for ParallelPair {
    fn score_input(&self) -> ScoreInput<'_> {
        ScoreInput {
            id: &self.id,
            src_lang: self.src_lang,
            tgt_lang: Some(self.tgt_lang),
            source: &self.src_text,
            target: Some(&self.tgt_text),
            scores: &self.scores,
        }
    }
}

pub trait Scorer: Send + Sync {
    fn name(&self) -> &str;
    fn range(&self) -> (f64, f64);
    /// Unclamped score.
    fn score_raw(&self, input: &ScoreInput<'_>) -> Result<f64, ScorerError>;

    /// Score clamped into `range()`. Non-finite raw scores are failures.
    fn score(&self, input: &ScoreInput<'_>) -> Result<f64, ScorerError> {
        let raw = self.score_raw(input)?;
        if !raw.is_finite() {
            return Err(ScorerError::Failed {
                name: self.name().to_string(),
                id: input.id.to_string(),
                message: format!("non-finite score {raw}"),
            });
        }
        let (lo, hi) = self.range();
        Ok(raw.clamp(lo, hi))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScorerKind {
    LocalFunction,
    RemoteHttp,
}

fn default_timeout_ms() -> u64 {
    30_000
}

fn default_retries() -> u32 {
    2
}

/// Serializable description of a scorer.
///
/// For `local_function`, `config` is a function id:
/// `constant:<v>`, `field:<score key>`, `length_ratio`, or `fail`.
/// For `remote_http`, `config` is a URL receiving
/// `{id, src_lang, tgt_lang, source, target, prompt}` and answering `{"score": x}`.
/// `prompt` may contain `{source}`, `{target}`, `{src_lang}`, `{tgt_lang}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScorerEndpoint {
    pub name: String,
    pub kind: ScorerKind,
    pub config: String,
    pub score_range: (f64, f64),
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub prompt: Option<String>,
    #[serde(default = "default_timeout_ms")]
    pub timeout_ms: u64,
    #[serde(default = "default_retries")]
    pub retries: u32,
    /// Name of an environment variable holding a bearer token.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub api_key_env: Option<String>,
}

impl ScorerEndpoint {
    pub fn local(name: impl Into<String>, function: impl Into<String>, range: (f64, f64)) -> Self {
        ScorerEndpoint {
            name: name.into(),
            kind: ScorerKind::LocalFunction,
            config: function.into(),
            score_range: range,
            prompt: None,
            timeout_ms: default_timeout_ms(),
            retries: default_retries(),
            api_key_env: None,
        }
    }

    pub fn build(&self) -> Result<Box<dyn Scorer>, ScorerError> {
        let bad = |message: String| ScorerError::Config { name: self.name.clone(), message };
        let (lo, hi) = self.score_range;
        if !(lo.is_finite() && hi.is_finite() && lo < hi) {
            return Err(bad(format!("score_range ({lo}, {hi}) must be finite with lo < hi")));
        }
        if self.name.is_empty() {
            return Err(bad("empty name".into()));
        }
        match self.kind {
            ScorerKind::LocalFunction => {
                let function = LocalFunction::parse(&self.config).map_err(bad)?;
                Ok(Box::new(LocalScorer { name: self.name.clone(), range: self.score_range, function }))
            }
            ScorerKind::RemoteHttp => {
                if !(self.config.starts_with("http://") || self.config.starts_with("https://")) {
                    return Err(bad(format!("`{}` is not an http(s) URL", self.config)));
                }
                Ok(Box::new(HttpScorer {
                    name: self.name.clone(),
                    range: self.score_range,
                    url: self.config.clone(),
                    prompt: self.prompt.clone(),
                    client: JsonClient::new(Duration::from_millis(self.timeout_ms), self.retries)
                        .with_bearer(JsonClient::bearer_from_env(self.api_key_env.as_deref())?),
                }))
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
enum LocalFunction {
    Constant(f64),
    Field(String),
    LengthRatio,
    Fail,
}

impl LocalFunction {
    fn parse(spec: &str) -> Result<Self, String> {
        if let Some(v) = spec.strip_prefix("constant:") {
            return v.trim().parse().map(LocalFunction::Constant).map_err(|_| format!("bad constant `{v}`"));
        }
        if let Some(key) = spec.strip_prefix("field:") {
            if key.is_empty() {
                return Err("empty field name".into());
            }
            return Ok(LocalFunction::Field(key.to_string()));
        }
        match spec {
            "length_ratio" => Ok(LocalFunction::LengthRatio),
            "fail" => Ok(LocalFunction::Fail),
            other => Err(format!("unknown local function `{other}`")),
        }
    }
}

struct LocalScorer {
    name: String,
    range: (f64, f64),
    function: LocalFunction,
}

impl Scorer for LocalScorer {
    fn name(&self) -> &str {
        &self.name
    }

    fn range(&self) -> (f64, f64) {
        self.range
    }

    fn score_raw(&self, input: &ScoreInput<'_>) -> Result<f64, ScorerError> {
        let fail = |message: String| ScorerError::Failed {
            name: self.name.clone(),
            id: input.id.to_string(),
            message,
        };
        match &self.function {
            LocalFunction::Constant(v) => Ok(*v),
            LocalFunction::Field(key) => {
                input.scores.get(key).copied().ok_or_else(|| fail(format!("missing score `{key}`")))
            }
            LocalFunction::LengthRatio => {
                let target = input.target.ok_or_else(|| fail("length_ratio needs a target side".into()))?;
                let a = input.source.chars().count() as f64;
                let b = target.chars().count() as f64;
                Ok(if a.max(b) == 0.0 { 1.0 } else { a.min(b) / a.max(b) })
            }
            LocalFunction::Fail => Err(fail("configured to fail".into())),
        }
    }
}

struct HttpScorer {
    name: String,
    range: (f64, f64),
    url: String,
    prompt: Option<String>,
    client: JsonClient,
}

fn render_prompt(template: &str, input: &ScoreInput<'_>) -> String {
    template
        .replace("{src_lang}", input.src_lang.english_name())
        .replace("{tgt_lang}", input.tgt_lang.map_or("", |t| t.english_name()))
        .replace("{target}", input.target.unwrap_or(""))
        .replace("{source}", input.source)
}

impl Scorer for HttpScorer {
    fn name(&self) -> &str {
        &self.name
    }

    fn range(&self) -> (f64, f64) {
        self.range
    }

    fn score_raw(&self, input: &ScoreInput<'_>) -> Result<f64, ScorerError> {
        let body = json!({
            "id": input.id,
            "src_lang": input.src_lang,
            "tgt_lang": input.tgt_lang,
            "source": input.source,
            "target": input.target,
            "prompt": self.prompt.as_deref().map(|p| render_prompt(p, input)),
        });
        let resp = self.client.post(&self.url, &body)?;
        resp.get("score").and_then(|v| v.as_f64()).or_else(|| resp.as_f64()).ok_or_else(|| {
            ScorerError::Failed {
                name: self.name.clone(),
                id: input.id.to_string(),
                message: format!("response has no numeric `score`: {resp}"),
            }
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pair() -> ParallelPair {
        ParallelPair::new("p", LanguageTag::EN, LanguageTag::ZH, "hello there", "你好")
    }

    #[test]
    fn clamping_into_range() {
        let s = ScorerEndpoint::local("c", "constant:7", (0.0, 1.0)).build().unwrap();
        assert_eq!(s.score(&pair().score_input()).unwrap(), 1.0);
        let s = ScorerEndpoint::local("c", "constant:-3", (0.0, 100.0)).build().unwrap();
        assert_eq!(s.score(&pair().score_input()).unwrap(), 0.0);
    }

    #[test]
    fn local_functions() {
        let mut p = pair();
        p.scores.insert("qe".into(), 0.42);
        let field = ScorerEndpoint::local("f", "field:qe", (0.0, 1.0)).build().unwrap();
        assert_eq!(field.score(&p.score_input()).unwrap(), 0.42);
        let missing = ScorerEndpoint::local("f", "field:other", (0.0, 1.0)).build().unwrap();
        assert!(missing.score(&p.score_input()).is_err());
        let ratio = ScorerEndpoint::local("r", "length_ratio", (0.0, 1.0)).build().unwrap();
        assert!((ratio.score(&p.score_input()).unwrap() - 2.0 / 11.0).abs() < 1e-12);
        let doc = Document::new("d", LanguageTag::EN, "x");
        assert!(ratio.score(&doc.score_input()).is_err());
    }

    #[test]
    fn config_validation() {
        assert!(ScorerEndpoint::local("x", "nope", (0.0, 1.0)).build().is_err());
        assert!(ScorerEndpoint::local("x", "constant:abc", (0.0, 1.0)).build().is_err());
        assert!(ScorerEndpoint::local("x", "constant:1", (1.0, 1.0)).build().is_err());
        let mut remote = ScorerEndpoint::local("x", "ftp://host", (0.0, 1.0));
        remote.kind = ScorerKind::RemoteHttp;
        assert!(remote.build().is_err());
        let parsed: Result<ScorerEndpoint, _> = serde_json::from_str(
            r#"{"name":"a","kind":"local_function","config":"fail","score_range":[0,1],"extra":1}"#,
        );
        assert!(parsed.is_err());
    }

    #[test]
    fn prompt_rendering() {
        let p = pair();
        assert_eq!(
            render_prompt("Rate {src_lang}->{tgt_lang}: {source} => {target}", &p.score_input()),
            "Rate English->Chinese: hello there => 你好"
        );
    }
}
