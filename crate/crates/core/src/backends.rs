//! Completion backends: the "CPU" that turns a prompt into a completion.

use std::collections::HashMap;
use std::fs::{File, OpenOptions};
use std::io::{BufWriter, Write};
use std::path::Path;
use std::time::Duration;

use serde::{Deserialize, Serialize};

#[derive(Debug, thiserror::Error)]
pub enum BackendError {
    #[error("prompt does not end in a `result = ...` / `$result` block: {0}")]
    MalformedTail(String),
    #[error("condition `{0}` is neither 0 nor 1")]
    UnresolvedCondition(String),
    #[error("transport error: {0}")]
    Transport(String),
    #[error("protocol error: {0}")]
    Protocol(String),
    #[error("backend configuration: {0}")]
    Config(String),
    #[error("no recorded completion for prompt ({len} bytes, ends with {tail:?})")]
    CassetteMiss { len: usize, tail: String },
    #[error("cassette line {line}: {message}")]
    CassetteFormat { line: usize, message: String },
    #[error("cassette storage: {0}")]
    Storage(#[from] std::io::Error),
}

/// Maps a prompt to a completion. Conforming backends are deterministic for
/// the duration of a run.
pub trait CompletionBackend {
    fn complete(&mut self, prompt: &str) -> Result<String, BackendError>;
}

impl<B: CompletionBackend + ?Sized> CompletionBackend for Box<B> {
    fn complete(&mut self, prompt: &str) -> Result<String, BackendError> {
        (**self).complete(prompt)
    }
}

impl<B: CompletionBackend + ?Sized> CompletionBackend for &mut B {
    fn complete(&mut self, prompt: &str) -> Result<String, BackendError> {
        (**self).complete(prompt)
    }
}

/// Adapts a closure into a backend.
pub struct FnBackend<F>(pub F);

impl<F> CompletionBackend for FnBackend<F>
where
    F: FnMut(&str) -> Result<String, BackendError>,
{
    fn complete(&mut self, prompt: &str) -> Result<String, BackendError> {
        (self.0)(prompt)
    }
}

/// Evaluates the trailing conditional-assignment block of a prompt exactly.
#[derive(Debug, Clone, Copy, Default)]
pub struct RuleBackend;

impl CompletionBackend for RuleBackend {
    fn complete(&mut self, prompt: &str) -> Result<String, BackendError> {
        rule_complete(prompt)
    }
}

/// Reads the block
///
/// ```text
/// result = R_def
/// if C==1 then result = R_alt     (optional)
/// $result
/// ```
///
/// at the end of `prompt` and returns a line break followed by `R_alt` when
/// `C` is `1`, otherwise by `R_def`. Everything above the block is ignored.
pub fn rule_complete(prompt: &str) -> Result<String, BackendError> {
    let mut lines = prompt.lines().rev().skip_while(|l| l.is_empty());
    match lines.next() {
        Some("$result") => {}
        other => {
            return Err(BackendError::MalformedTail(format!(
                "last line is {other:?}, expected \"$result\""
            )))
        }
    }
    let prev = lines
        .next()
        .ok_or_else(|| BackendError::MalformedTail("nothing before `$result`".into()))?;
    let (conditional, default_line) = match prev.strip_prefix("if ") {
        Some(rest) => {
            let (cond, alt) = rest.split_once("==1 then result = ").ok_or_else(|| {
                BackendError::MalformedTail(format!("unrecognized conditional line {prev:?}"))
            })?;
            let default_line = lines.next().ok_or_else(|| {
                BackendError::MalformedTail("conditional line without a default".into())
            })?;
            (Some((cond, alt)), default_line)
        }
        None => (None, prev),
    };
    let default = default_line.strip_prefix("result = ").ok_or_else(|| {
        BackendError::MalformedTail(format!("expected `result = ...`, found {default_line:?}"))
    })?;
    let chosen = match conditional {
        None => default,
        Some(("1", alt)) => alt,
        Some(("0", _)) => default,
        Some((cond, _)) => return Err(BackendError::UnresolvedCondition(cond.to_owned())),
    };
    Ok(format!("\n{chosen}"))
}

fn default_max_tokens() -> u32 {
    256
}

fn default_timeout_ms() -> u64 {
    60_000
}

/// JSON backend configuration file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HttpBackendConfig {
    pub endpoint: String,
    #[serde(default)]
    pub model: String,
    #[serde(default)]
    pub temperature: f64,
    #[serde(default = "default_max_tokens")]
    pub max_tokens: u32,
    #[serde(default = "default_timeout_ms")]
    pub timeout_ms: u64,
    #[serde(default)]
    pub api_key_env: Option<String>,
}

impl HttpBackendConfig {
    pub fn new(endpoint: impl Into<String>) -> Self {
        HttpBackendConfig {
            endpoint: endpoint.into(),
            model: String::new(),
            temperature: 0.0,
            max_tokens: default_max_tokens(),
            timeout_ms: default_timeout_ms(),
            api_key_env: None,
        }
    }

    pub fn from_json(text: &str) -> Result<Self, BackendError> {
        serde_json::from_str(text).map_err(|e| BackendError::Config(e.to_string()))
    }
}

#[derive(Serialize)]
struct CompletionRequest<'a> {
    prompt: &'a str,
    #[serde(skip_serializing_if = "str::is_empty")]
    model: &'a str,
    temperature: u8,
    max_tokens: u32,
}

/// The exact JSON request body sent for `prompt`.
pub fn request_body(config: &HttpBackendConfig, prompt: &str) -> String {
    serde_json::to_string(&CompletionRequest {
        prompt,
        model: &config.model,
        temperature: 0,
        max_tokens: config.max_tokens,
    })
    .expect("request serializes")
}

/// Extracts the `completion` field from a response body.
pub fn parse_response(body: &str) -> Result<String, BackendError> {
    let value: serde_json::Value = serde_json::from_str(body)
        .map_err(|e| BackendError::Protocol(format!("response is not JSON: {e}")))?;
    value
        .get("completion")
        .and_then(serde_json::Value::as_str)
        .map(str::to_owned)
        .ok_or_else(|| BackendError::Protocol("response has no string `completion` field".into()))
}

/// Generic JSON completion endpoint, greedy decoding only. Never retries.
pub struct HttpBackend {
    config: HttpBackendConfig,
    api_key: Option<String>,
    client: reqwest::blocking::Client,
}

impl HttpBackend {
    pub fn new(config: HttpBackendConfig) -> Result<Self, BackendError> {
        if config.temperature != 0.0 {
            return Err(BackendError::Config(format!(
                "temperature must be 0, got {}",
                config.temperature
            )));
        }
        let api_key = match &config.api_key_env {
            Some(var) if !var.is_empty() => Some(std::env::var(var).map_err(|_| {
                BackendError::Config(format!("environment variable `{var}` is not set"))
            })?),
            _ => None,
        };
        let client = reqwest::blocking::Client::builder()
            .timeout(Duration::from_millis(config.timeout_ms))
            .build()
            .map_err(|e| BackendError::Transport(e.to_string()))?;
        Ok(HttpBackend {
            config,
            api_key,
            client,
        })
    }

    pub fn config(&self) -> &HttpBackendConfig {
        &self.config
    }
}

impl CompletionBackend for HttpBackend {
    fn complete(&mut self, prompt: &str) -> Result<String, BackendError> {
        let mut request = self
            .client
            .post(&self.config.endpoint)
            .header(reqwest::header::CONTENT_TYPE, "application/json")
            .body(request_body(&self.config, prompt));
        if let Some(key) = &self.api_key {
            request = request.bearer_auth(key);
        }
        let response = request
            .send()
            .map_err(|e| BackendError::Transport(e.to_string()))?;
        let status = response.status();
        let body = response
            .text()
            .map_err(|e| BackendError::Transport(e.to_string()))?;
        if !status.is_success() {
            return Err(BackendError::Protocol(format!("status {status}")));
        }
        parse_response(&body)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CassetteRecord {
    pub prompt: String,
    pub completion: String,
}

/// Exact-match prompt → completion log.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Cassette {
    records: Vec<CassetteRecord>,
    index: HashMap<String, usize>,
}

impl Cassette {
    /// Parses JSON Lines. A prompt recorded twice must carry the same
    /// completion both times.
    pub fn parse(text: &str) -> Result<Self, BackendError> {
        let mut cassette = Cassette::default();
        for (idx, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let record: CassetteRecord =
                serde_json::from_str(line).map_err(|e| BackendError::CassetteFormat {
                    line: idx + 1,
                    message: e.to_string(),
                })?;
            cassette
                .push(record)
                .map_err(|message| BackendError::CassetteFormat {
                    line: idx + 1,
                    message,
                })?;
        }
        Ok(cassette)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, BackendError> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    fn push(&mut self, record: CassetteRecord) -> Result<(), String> {
        if let Some(&at) = self.index.get(&record.prompt) {
            if self.records[at].completion != record.completion {
                return Err("conflicting completions for a repeated prompt".into());
            }
        } else {
            self.index.insert(record.prompt.clone(), self.records.len());
        }
        self.records.push(record);
        Ok(())
    }

    /// Every record in call order, duplicates included.
    pub fn records(&self) -> &[CassetteRecord] {
        &self.records
    }

    /// Number of distinct prompts.
    pub fn distinct(&self) -> usize {
        self.index.len()
    }

    pub fn lookup(&self, prompt: &str) -> Option<&str> {
        self.index
            .get(prompt)
            .map(|&at| self.records[at].completion.as_str())
    }
}

pub fn replay_complete(cassette: &Cassette, prompt: &str) -> Result<String, BackendError> {
    cassette
        .lookup(prompt)
        .map(str::to_owned)
        .ok_or_else(|| BackendError::CassetteMiss {
            len: prompt.len(),
            tail: prompt
                .chars()
                .rev()
                .take(60)
                .collect::<Vec<_>>()
                .into_iter()
                .rev()
                .collect(),
        })
}

pub struct ReplayBackend {
    cassette: Cassette,
}

impl ReplayBackend {
    pub fn new(cassette: Cassette) -> Self {
        ReplayBackend { cassette }
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, BackendError> {
        Ok(Self::new(Cassette::load(path)?))
    }
}

impl CompletionBackend for ReplayBackend {
    fn complete(&mut self, prompt: &str) -> Result<String, BackendError> {
        replay_complete(&self.cassette, prompt)
    }
}

/// Delegates to `inner` and appends every successful call to a cassette file.
pub struct Recorder<B> {
    inner: B,
    out: BufWriter<File>,
}

impl<B: CompletionBackend> Recorder<B> {
    /// Starts a fresh cassette at `path`, truncating any existing file.
    pub fn create(inner: B, path: impl AsRef<Path>) -> Result<Self, BackendError> {
        Ok(Recorder {
            inner,
            out: BufWriter::new(File::create(path)?),
        })
    }

    /// Appends to the cassette at `path`, creating it if needed.
    pub fn append(inner: B, path: impl AsRef<Path>) -> Result<Self, BackendError> {
        let file = OpenOptions::new().create(true).append(true).open(path)?;
        Ok(Recorder {
            inner,
            out: BufWriter::new(file),
        })
    }

    pub fn into_inner(mut self) -> Result<B, BackendError> {
        self.out.flush()?;
        Ok(self.inner)
    }
}

impl<B: CompletionBackend> CompletionBackend for Recorder<B> {
    fn complete(&mut self, prompt: &str) -> Result<String, BackendError> {
        let completion = self.inner.complete(prompt)?;
        let record = CassetteRecord {
            prompt: prompt.to_owned(),
            completion,
        };
        serde_json::to_writer(&mut self.out, &record).map_err(std::io::Error::from)?;
        self.out.write_all(b"\n")?;
        self.out.flush()?;
        Ok(record.completion)
    }
}
