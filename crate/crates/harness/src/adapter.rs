//! Prover adapters: something that turns a prompt into a completion.

use std::io::{Read, Write};
use std::path::PathBuf;
use std::process::{Command, Stdio};
use std::thread;
use std::time::Duration;

use ineqcomp_core::Template;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use thiserror::Error;
use wait_timeout::ChildExt;

pub const DEFAULT_TEMPERATURE: f64 = 1.0;
pub const DEFAULT_MAX_TOKENS: u32 = 16384;

#[derive(Debug, Error)]
pub enum AdapterError {
    #[error("adapter config: {0}")]
    Config(String),
    #[error("adapter command: {0}")]
    Io(#[from] std::io::Error),
    #[error("adapter exited with {status}: {stderr}")]
    Exit { status: String, stderr: String },
    #[error("adapter timed out after {0:?}")]
    Timeout(Duration),
    #[error("http: {0}")]
    Http(String),
    #[error("response has no completion text")]
    EmptyResponse,
}

pub trait Adapter: Sync {
    fn complete(&self, prompt: &str) -> Result<String, AdapterError>;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AdapterKind {
    #[default]
    Command,
    HttpCompletions,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum HttpStyle {
    /// `/v1/completions` with a raw `prompt`.
    Completions,
    /// `/v1/chat/completions` with one user message.
    #[default]
    Chat,
}

/// Everything needed to build an adapter, as read from config or flags.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AdapterSpec {
    pub kind: AdapterKind,
    /// Shell-free argv for the command adapter.
    pub command: Vec<String>,
    pub endpoint: String,
    pub model: String,
    pub api_key_env: Option<String>,
    pub style: HttpStyle,
    pub template: Template,
    pub temperature: f64,
    pub max_tokens: u32,
    pub attempts: usize,
    pub timeout_secs: u64,
}

impl Default for AdapterSpec {
    fn default() -> Self {
        AdapterSpec {
            kind: AdapterKind::Command,
            command: Vec::new(),
            endpoint: String::new(),
            model: String::new(),
            api_key_env: None,
            style: HttpStyle::Chat,
            template: Template::ChatThinking,
            temperature: DEFAULT_TEMPERATURE,
            max_tokens: DEFAULT_MAX_TOKENS,
            attempts: 1,
            timeout_secs: 600,
        }
    }
}

impl AdapterSpec {
    pub fn validate(&self) -> Result<(), AdapterError> {
        if self.attempts == 0 {
            return Err(AdapterError::Config("attempts must be at least 1".into()));
        }
        if self.timeout_secs == 0 {
            return Err(AdapterError::Config("timeout must be positive".into()));
        }
        match self.kind {
            AdapterKind::Command if self.command.is_empty() => Err(AdapterError::Config("command adapter needs a command".into())),
            AdapterKind::HttpCompletions if self.endpoint.is_empty() => {
                Err(AdapterError::Config("http adapter needs an endpoint".into()))
            }
            _ => Ok(()),
        }
    }

    pub fn build(&self) -> Result<Box<dyn Adapter>, AdapterError> {
        self.validate()?;
        let timeout = Duration::from_secs(self.timeout_secs);
        Ok(match self.kind {
            AdapterKind::Command => Box::new(CommandAdapter {
                program: PathBuf::from(&self.command[0]),
                args: self.command[1..].to_vec(),
                timeout,
            }),
            AdapterKind::HttpCompletions => Box::new(HttpAdapter {
                endpoint: self.endpoint.clone(),
                model: self.model.clone(),
                api_key: self.api_key_env.as_ref().and_then(|k| std::env::var(k).ok()),
                style: self.style,
                temperature: self.temperature,
                max_tokens: self.max_tokens,
                timeout,
            }),
        })
    }

    /// Label stored with each attempt.
    pub fn model_label(&self) -> String {
        match self.kind {
            AdapterKind::Command if self.model.is_empty() => self.command.join(" "),
            _ => self.model.clone(),
        }
    }
}

/// Prompt on stdin, one completion on stdout.
#[derive(Debug, Clone)]
pub struct CommandAdapter {
    pub program: PathBuf,
    pub args: Vec<String>,
    pub timeout: Duration,
}

impl Adapter for CommandAdapter {
    fn complete(&self, prompt: &str) -> Result<String, AdapterError> {
        let mut child = Command::new(&self.program)
            .args(&self.args)
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .stderr(Stdio::piped())
            .spawn()?;
        let mut stdin = child.stdin.take().expect("piped stdin");
        let input = prompt.as_bytes().to_vec();
        let writer = thread::spawn(move || {
            let _ = stdin.write_all(&input);
        });
        let mut stdout = child.stdout.take().expect("piped stdout");
        let mut stderr = child.stderr.take().expect("piped stderr");
        let out = thread::spawn(move || {
            let mut b = Vec::new();
            let _ = stdout.read_to_end(&mut b);
            b
        });
        let err = thread::spawn(move || {
            let mut b = Vec::new();
            let _ = stderr.read_to_end(&mut b);
            b
        });
        let status = match child.wait_timeout(self.timeout)? {
            Some(s) => s,
            None => {
                let _ = child.kill();
                let _ = child.wait();
                return Err(AdapterError::Timeout(self.timeout));
            }
        };
        let _ = writer.join();
        let out = out.join().unwrap_or_default();
        let err = err.join().unwrap_or_default();
        if !status.success() {
            return Err(AdapterError::Exit {
                status: status.to_string(),
                stderr: String::from_utf8_lossy(&err).lines().take(5).collect::<Vec<_>>().join("\n"),
            });
        }
        String::from_utf8(out).map_err(|e| AdapterError::Http(format!("completion is not UTF-8: {e}")))
    }
}

/// OpenAI-compatible endpoint.
#[derive(Debug, Clone)]
pub struct HttpAdapter {
    pub endpoint: String,
    pub model: String,
    pub api_key: Option<String>,
    pub style: HttpStyle,
    pub temperature: f64,
    pub max_tokens: u32,
    pub timeout: Duration,
}

impl HttpAdapter {
    pub fn body(&self, prompt: &str) -> Value {
        match self.style {
            HttpStyle::Completions => json!({
                "model": self.model,
                "prompt": prompt,
                "temperature": self.temperature,
                "max_tokens": self.max_tokens,
            }),
            HttpStyle::Chat => json!({
                "model": self.model,
                "messages": [{"role": "user", "content": prompt}],
                "temperature": self.temperature,
                "max_tokens": self.max_tokens,
            }),
        }
    }
}

fn completion_text(v: &Value) -> Option<String> {
    let choice = v.get("choices")?.get(0)?;
    choice
        .pointer("/message/content")
        .or_else(|| choice.get("text"))
        .and_then(Value::as_str)
        .map(str::to_string)
}

impl Adapter for HttpAdapter {
    fn complete(&self, prompt: &str) -> Result<String, AdapterError> {
        let agent: ureq::Agent = ureq::Agent::config_builder().timeout_global(Some(self.timeout)).build().into();
        let mut req = agent.post(&self.endpoint).header("Content-Type", "application/json");
        if let Some(k) = &self.api_key {
            req = req.header("Authorization", &format!("Bearer {k}"));
        }
        let mut resp = req.send_json(self.body(prompt)).map_err(|e| AdapterError::Http(e.to_string()))?;
        let v: Value = resp.body_mut().read_json().map_err(|e| AdapterError::Http(e.to_string()))?;
        completion_text(&v).ok_or(AdapterError::EmptyResponse)
    }
}
