//! Prompted LFs and embedding providers.
//!
//! A provider turns each LF's prompt template into one vector. Two sources
//! exist: a JSON file of precomputed vectors, and an HTTP service speaking
//!
//! ```text
//! POST {"texts": ["...", ...]}  ->  {"embeddings": [[f64; d], ...]}
//! ```
//!
//! where each embedding may instead be a list of per-token vectors, which
//! are then pooled. The template is embedded as-is, placeholders included.

use std::path::{Path, PathBuf};
use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::data::EmbeddingSet;
use crate::error::{Error, Result};
use crate::io;

pub const TEXT_PLACEHOLDER: &str = "[TEXT]";
pub const PERSON1_PLACEHOLDER: &str = "[PERSON1]";
pub const PERSON2_PLACEHOLDER: &str = "[PERSON2]";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PromptedLf {
    pub name: String,
    pub template: String,
    /// `-1` or `+1`.
    pub target_label: i8,
    /// Answers that map to `target_label`; anything else abstains.
    pub positive_answers: Vec<String>,
}

impl PromptedLf {
    pub fn validate(&self) -> Result<()> {
        let has_placeholder = [TEXT_PLACEHOLDER, PERSON1_PLACEHOLDER, PERSON2_PLACEHOLDER]
            .iter()
            .any(|p| self.template.contains(p));
        if !has_placeholder {
            return Err(Error::InvalidParameter(format!(
                "LF `{}`: template has no placeholder",
                self.name
            )));
        }
        if self.target_label != 1 && self.target_label != -1 {
            return Err(Error::InvalidParameter(format!(
                "LF `{}`: target_label must be -1 or 1, got {}",
                self.name, self.target_label
            )));
        }
        if self.positive_answers.is_empty() {
            return Err(Error::InvalidParameter(format!(
                "LF `{}`: positive_answers is empty",
                self.name
            )));
        }
        Ok(())
    }

    /// Maps a model answer to a vote: `target_label` if the trimmed answer
    /// matches one of `positive_answers` ignoring ASCII case, else abstain.
    pub fn label_map(&self, answer: &str) -> i8 {
        let answer = answer.trim();
        if self
            .positive_answers
            .iter()
            .any(|a| a.trim().eq_ignore_ascii_case(answer))
        {
            self.target_label
        } else {
            0
        }
    }
}

pub fn read_prompted_lfs(path: &Path) -> Result<Vec<PromptedLf>> {
    let lfs: Vec<PromptedLf> = io::read_json(path, "prompted LF json")?;
    for lf in &lfs {
        lf.validate()?;
    }
    Ok(lfs)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RenderedPrompt {
    pub prompt: String,
    /// Set when the template had none of the placeholders being filled.
    pub missing_placeholder: bool,
}

/// Fills `[TEXT]`.
pub fn render_prompt(lf: &PromptedLf, text: &str) -> RenderedPrompt {
    render_prompt_with(lf, &[(TEXT_PLACEHOLDER, text)])
}

/// Fills `[TEXT]`, `[PERSON1]` and `[PERSON2]`.
pub fn render_relation_prompt(lf: &PromptedLf, text: &str, person1: &str, person2: &str) -> RenderedPrompt {
    render_prompt_with(
        lf,
        &[
            (TEXT_PLACEHOLDER, text),
            (PERSON1_PLACEHOLDER, person1),
            (PERSON2_PLACEHOLDER, person2),
        ],
    )
}

/// Substitutes every occurrence of each placeholder in one left-to-right
/// pass, so inserted values are never re-scanned.
pub fn render_prompt_with(lf: &PromptedLf, fills: &[(&str, &str)]) -> RenderedPrompt {
    let template = lf.template.as_str();
    let mut prompt = String::with_capacity(template.len());
    let mut rest = template;
    let mut replaced = false;
    'outer: while !rest.is_empty() {
        for (placeholder, value) in fills {
            if let Some(tail) = rest.strip_prefix(placeholder) {
                prompt.push_str(value);
                rest = tail;
                replaced = true;
                continue 'outer;
            }
        }
        let ch = rest.chars().next().expect("non-empty");
        prompt.push(ch);
        rest = &rest[ch.len_utf8()..];
    }
    RenderedPrompt {
        prompt,
        missing_placeholder: !replaced,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Pooling {
    #[default]
    Mean,
    First,
    Last,
}

#[derive(Debug, Clone, PartialEq)]
pub enum ProviderKind {
    File(PathBuf),
    Http(String),
}

impl std::str::FromStr for ProviderKind {
    type Err = Error;

    /// `file:<path>` or `http:<url>`; in the latter the URL keeps its scheme,
    /// e.g. `http:http://localhost:8080/embed`. A bare `http://...` is also
    /// accepted.
    fn from_str(s: &str) -> Result<Self> {
        if let Some(path) = s.strip_prefix("file:") {
            return Ok(ProviderKind::File(PathBuf::from(path)));
        }
        if s.starts_with("http://") || s.starts_with("https://") {
            return Ok(ProviderKind::Http(s.to_string()));
        }
        if let Some(url) = s.strip_prefix("http:") {
            if url.starts_with("http://") || url.starts_with("https://") {
                return Ok(ProviderKind::Http(url.to_string()));
            }
            return Ok(ProviderKind::Http(format!("http:{url}")));
        }
        Err(Error::InvalidParameter(format!(
            "provider must be file:<path> or http:<url>, got `{s}`"
        )))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProviderConfig {
    pub kind: ProviderKind,
    /// Name of the environment variable holding a bearer token.
    pub auth_header_env_var: Option<String>,
    pub pooling: Pooling,
    pub timeout_seconds: f64,
    pub batch_size: usize,
}

impl ProviderConfig {
    pub fn new(kind: ProviderKind) -> Self {
        ProviderConfig {
            kind,
            auth_header_env_var: None,
            pooling: Pooling::Mean,
            timeout_seconds: 30.0,
            batch_size: 32,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 {
            return Err(Error::InvalidParameter("batch_size must be >= 1".into()));
        }
        if !(self.timeout_seconds > 0.0 && self.timeout_seconds.is_finite()) {
            return Err(Error::InvalidParameter("timeout_seconds must be > 0".into()));
        }
        Ok(())
    }
}

pub fn embed_prompts(lfs: &[PromptedLf], cfg: &ProviderConfig) -> Result<EmbeddingSet> {
    if lfs.is_empty() {
        return Err(Error::InvalidParameter("no LFs to embed".into()));
    }
    cfg.validate()?;
    match &cfg.kind {
        ProviderKind::File(path) => from_file(lfs, path),
        ProviderKind::Http(url) => from_http(lfs, url, cfg),
    }
}

/// Looks up each LF's vector by name, returning vectors untouched.
fn from_file(lfs: &[PromptedLf], path: &Path) -> Result<EmbeddingSet> {
    let set = io::read_embeddings(path)?;
    let mut vectors = Vec::with_capacity(lfs.len());
    for lf in lfs {
        let pos = set.lf_names.iter().position(|n| *n == lf.name).ok_or_else(|| {
            Error::malformed(
                "embeddings file",
                format!("{} has no vector for LF `{}`", path.display(), lf.name),
            )
        })?;
        vectors.push(set.vectors[pos].clone());
    }
    EmbeddingSet::new(lfs.iter().map(|l| l.name.clone()).collect(), vectors)
}

#[derive(Serialize)]
struct EmbedRequest<'a> {
    texts: &'a [String],
}

#[derive(Deserialize)]
#[serde(untagged)]
enum EmbeddingPayload {
    Pooled(Vec<f64>),
    Tokens(Vec<Vec<f64>>),
}

#[derive(Deserialize)]
struct EmbedResponse {
    embeddings: Vec<EmbeddingPayload>,
}

fn pool(tokens: Vec<Vec<f64>>, pooling: Pooling) -> Result<Vec<f64>> {
    let dim = tokens
        .first()
        .map(Vec::len)
        .ok_or_else(|| Error::malformed("embedding response", "empty token list"))?;
    if let Some(bad) = tokens.iter().find(|t| t.len() != dim) {
        return Err(Error::malformed(
            "embedding response",
            format!("token vectors of dimension {} and {dim} in one text", bad.len()),
        ));
    }
    Ok(match pooling {
        Pooling::First => tokens.into_iter().next().expect("non-empty"),
        Pooling::Last => tokens.into_iter().next_back().expect("non-empty"),
        Pooling::Mean => {
            let count = tokens.len() as f64;
            let mut sum = vec![0.0; dim];
            for t in &tokens {
                sum.iter_mut().zip(t).for_each(|(s, v)| *s += v);
            }
            sum.into_iter().map(|s| s / count).collect()
        }
    })
}

fn request_batch(
    client: &reqwest::blocking::Client,
    url: &str,
    token: Option<&str>,
    texts: &[String],
    cfg: &ProviderConfig,
) -> Result<Vec<Vec<f64>>> {
    let mut req = client.post(url).json(&EmbedRequest { texts });
    if let Some(token) = token {
        req = req.bearer_auth(token);
    }
    let resp = req.send().map_err(|e| {
        if e.is_timeout() {
            Error::Timeout(cfg.timeout_seconds)
        } else {
            Error::Provider(e.to_string())
        }
    })?;
    let status = resp.status().as_u16();
    if status >= 400 {
        let body = resp.text().unwrap_or_default();
        return Err(Error::HttpStatus { status, body });
    }
    let body = resp.text().map_err(|e| {
        if e.is_timeout() {
            Error::Timeout(cfg.timeout_seconds)
        } else {
            Error::Provider(e.to_string())
        }
    })?;
    let parsed: EmbedResponse = serde_json::from_str(&body).map_err(|e| Error::malformed("embedding response", e))?;
    if parsed.embeddings.len() != texts.len() {
        return Err(Error::malformed(
            "embedding response",
            format!("{} embeddings for {} texts", parsed.embeddings.len(), texts.len()),
        ));
    }
    parsed
        .embeddings
        .into_iter()
        .map(|e| match e {
            EmbeddingPayload::Pooled(v) => Ok(v),
            EmbeddingPayload::Tokens(t) => pool(t, cfg.pooling),
        })
        .collect()
}

/// Batches run concurrently on scoped threads; results are reassembled in
/// input order.
fn from_http(lfs: &[PromptedLf], url: &str, cfg: &ProviderConfig) -> Result<EmbeddingSet> {
    let token = match &cfg.auth_header_env_var {
        Some(var) => Some(
            std::env::var(var).map_err(|_| Error::Provider(format!("auth environment variable `{var}` is not set")))?,
        ),
        None => None,
    };
    let client = reqwest::blocking::Client::builder()
        .timeout(Duration::from_secs_f64(cfg.timeout_seconds))
        .build()
        .map_err(|e| Error::Provider(e.to_string()))?;
    let texts: Vec<String> = lfs.iter().map(|l| l.template.clone()).collect();
    let batches: Vec<Result<Vec<Vec<f64>>>> = std::thread::scope(|scope| {
        let handles: Vec<_> = texts
            .chunks(cfg.batch_size)
            .map(|chunk| {
                let (client, token) = (&client, token.as_deref());
                scope.spawn(move || request_batch(client, url, token, chunk, cfg))
            })
            .collect();
        handles
            .into_iter()
            .map(|h| {
                h.join()
                    .unwrap_or_else(|_| Err(Error::Provider("request thread panicked".into())))
            })
            .collect()
    });
    let mut vectors = Vec::with_capacity(lfs.len());
    for batch in batches {
        vectors.extend(batch?);
    }
    let dim = vectors[0].len();
    if let Some((index, v)) = vectors.iter().enumerate().find(|(_, v)| v.len() != dim) {
        return Err(Error::DimensionDisagreement {
            index,
            expected: dim,
            found: v.len(),
        });
    }
    EmbeddingSet::new(lfs.iter().map(|l| l.name.clone()).collect(), vectors)
}
