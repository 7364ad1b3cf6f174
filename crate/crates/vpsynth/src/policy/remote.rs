//! HTTP completion-endpoint policy client.
//!
//! Speaks a completion-style protocol: POST a JSON body
//! `{prompt, temperature, top_p, top_k, max_tokens}` and read
//! `{"choices": [{"text": ...}]}` back. Bearer authentication comes from an
//! environment variable so tokens never live in config files. The completion
//! is truncated at the first complete `execute_command` definition; callers
//! record failures as reward-0 trajectories.

use std::time::Duration;

use serde::{Deserialize, Serialize};

use super::PromptBundle;

pub const DEFAULT_TOKEN_ENV: &str = "REMOTE_POLICY_TOKEN";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EndpointConfig {
    pub url: String,
    /// Environment variable holding the bearer token; unset means no auth.
    pub token_env: String,
    pub timeout_ms: u64,
    /// Additional attempts after the first failure.
    pub max_retries: u32,
    /// Cap on concurrent in-flight requests during Grow.
    pub max_in_flight: usize,
}

impl Default for EndpointConfig {
    fn default() -> Self {
        EndpointConfig {
            url: String::new(),
            token_env: DEFAULT_TOKEN_ENV.to_string(),
            timeout_ms: 30_000,
            max_retries: 0,
            max_in_flight: 4,
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum RemoteError {
    #[error("request timed out after {0} ms")]
    Timeout(u64),
    #[error("endpoint returned HTTP {status}")]
    Http { status: u16 },
    #[error("completion contained no execute_command definition")]
    MalformedCompletion,
    #[error("transport error: {0}")]
    Transport(String),
}

#[derive(Serialize)]
struct CompletionRequest<'a> {
    prompt: &'a str,
    temperature: f64,
    top_p: f64,
    top_k: u32,
    max_tokens: u32,
}

#[derive(Deserialize)]
struct CompletionResponse {
    choices: Vec<Choice>,
}

#[derive(Deserialize)]
struct Choice {
    text: String,
}

/// Extract the first complete `def execute_command` block from completion
/// text: the `def` line plus every following line that is blank or indented
/// deeper than it, re-anchored to column zero.
pub fn extract_function(completion: &str) -> Option<String> {
    let text = crate::util::normalize_newlines(completion);
    let lines: Vec<&str> = text.lines().collect();
    let start = lines
        .iter()
        .position(|line| line.trim_start().starts_with("def execute_command"))?;
    let def_indent = lines[start].len() - lines[start].trim_start().len();
    let mut out = vec![lines[start][def_indent..].to_string()];
    for line in &lines[start + 1..] {
        if line.trim().is_empty() {
            // Interior blank lines are kept only while the block continues.
            out.push(String::new());
            continue;
        }
        let indent = line.len() - line.trim_start().len();
        if indent <= def_indent {
            break;
        }
        out.push(line.get(def_indent..).unwrap_or(line.trim_start()).to_string());
    }
    while out.last().is_some_and(|l| l.trim().is_empty()) {
        out.pop();
    }
    if out.len() < 2 {
        return None;
    }
    Some(out.join("\n") + "\n")
}

/// Request one completion and return the extracted program text.
pub fn remote_complete(config: &EndpointConfig, prompt: &PromptBundle) -> Result<String, RemoteError> {
    let client = reqwest::blocking::Client::builder()
        .timeout(Duration::from_millis(config.timeout_ms))
        .build()
        .map_err(|e| RemoteError::Transport(e.to_string()))?;
    let token = std::env::var(&config.token_env).ok();
    let body = CompletionRequest {
        prompt: &prompt.render(),
        temperature: prompt.params.temperature,
        top_p: prompt.params.top_p,
        top_k: prompt.params.top_k,
        max_tokens: prompt.params.max_new_tokens,
    };

    let mut last_err = RemoteError::Transport("no attempt made".into());
    for _attempt in 0..=config.max_retries {
        let mut request = client.post(&config.url).json(&body);
        if let Some(token) = &token {
            request = request.bearer_auth(token);
        }
        match request.send() {
            Ok(response) => {
                let status = response.status();
                if !status.is_success() {
                    last_err = RemoteError::Http { status: status.as_u16() };
                    continue;
                }
                let parsed: CompletionResponse = match response.json() {
                    Ok(p) => p,
                    Err(_) => {
                        last_err = RemoteError::MalformedCompletion;
                        continue;
                    }
                };
                let Some(choice) = parsed.choices.first() else {
                    last_err = RemoteError::MalformedCompletion;
                    continue;
                };
                return extract_function(&choice.text).ok_or(RemoteError::MalformedCompletion);
            }
            Err(e) => {
                last_err = if e.is_timeout() {
                    RemoteError::Timeout(config.timeout_ms)
                } else {
                    RemoteError::Transport(e.to_string())
                };
            }
        }
    }
    Err(last_err)
}
