//! Client for a remote scoring server.
//!
//! Protocol (JSON over HTTP/1.1):
//!
//! * `GET  /v1/info`  → `{"identity", "model_style", "mask_token"}`
//! * `POST /v1/score` `{"model_style", "label_words", "texts"}` →
//!   `{"logits": [[f64; label_words]; texts]}`
//! * `422 {"error": "multi_token_label_word", "word"}` when a label word is
//!   not a single token.

use std::time::Duration;

use serde::{Deserialize, Serialize};
use ureq::Agent;

use super::backend::ScoringBackend;
use crate::error::{Error, Result};
use crate::task::ModelStyle;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ServerInfo {
    pub identity: String,
    pub model_style: ModelStyle,
    pub mask_token: String,
}

#[derive(Serialize)]
struct ScoreRequest<'a> {
    model_style: ModelStyle,
    label_words: &'a [String],
    texts: &'a [String],
}

#[derive(Deserialize)]
struct ScoreResponse {
    logits: Vec<Vec<f64>>,
}

#[derive(Deserialize)]
struct ErrorBody {
    error: String,
    #[serde(default)]
    word: Option<String>,
}

pub struct HttpBackend {
    agent: Agent,
    base: String,
    info: ServerInfo,
    max_batch: usize,
}

impl HttpBackend {
    /// Connects to `base_url` and fetches the server description.
    pub fn connect(base_url: &str) -> Result<Self> {
        Self::connect_with(base_url, Duration::from_secs(120), 32)
    }

    pub fn connect_with(base_url: &str, timeout: Duration, max_batch: usize) -> Result<Self> {
        let agent: Agent = Agent::config_builder()
            .http_status_as_error(false)
            .timeout_global(Some(timeout))
            .build()
            .into();
        let base = base_url.trim_end_matches('/').to_owned();
        let mut resp = agent
            .get(format!("{base}/v1/info"))
            .call()
            .map_err(|e| Error::BackendUnavailable(format!("{base}/v1/info: {e}")))?;
        let status = resp.status().as_u16();
        if status != 200 {
            let message = resp.body_mut().read_to_string().unwrap_or_default();
            return Err(Error::BackendRejected { status, message });
        }
        let info: ServerInfo = resp
            .body_mut()
            .read_json()
            .map_err(|e| Error::MalformedResponse(format!("/v1/info: {e}")))?;
        Ok(Self {
            agent,
            base,
            info,
            max_batch: max_batch.max(1),
        })
    }

    pub fn info(&self) -> &ServerInfo {
        &self.info
    }
}

impl ScoringBackend for HttpBackend {
    fn identity(&self) -> &str {
        &self.info.identity
    }

    fn supports(&self, style: ModelStyle) -> bool {
        self.info.model_style == style
    }

    fn max_batch(&self) -> usize {
        self.max_batch
    }

    fn score(&self, style: ModelStyle, label_words: &[String], texts: &[String]) -> Result<Vec<Vec<f64>>> {
        let url = format!("{}/v1/score", self.base);
        let mut resp = self
            .agent
            .post(&url)
            .send_json(ScoreRequest {
                model_style: style,
                label_words,
                texts,
            })
            .map_err(|e| Error::BackendUnavailable(format!("{url}: {e}")))?;
        let status = resp.status().as_u16();
        if status != 200 {
            let body = resp.body_mut().read_to_string().unwrap_or_default();
            if status == 422 {
                if let Ok(ErrorBody { error, word: Some(word) }) = serde_json::from_str(&body) {
                    if error == "multi_token_label_word" {
                        return Err(Error::MultiTokenLabelWord(word));
                    }
                }
            }
            return Err(Error::BackendRejected { status, message: body });
        }
        let parsed: ScoreResponse = resp
            .body_mut()
            .read_json()
            .map_err(|e| Error::MalformedResponse(format!("/v1/score: {e}")))?;
        if parsed.logits.len() != texts.len() {
            return Err(Error::MalformedResponse(format!(
                "{} logit rows for {} texts",
                parsed.logits.len(),
                texts.len()
            )));
        }
        if let Some(row) = parsed.logits.iter().find(|r| r.len() != label_words.len()) {
            return Err(Error::MalformedResponse(format!(
                "logit row of length {} for {} label words",
                row.len(),
                label_words.len()
            )));
        }
        Ok(parsed.logits)
    }
}
