//! HTTP client for the scoring wire protocol.
//!
//! ```text
//! GET  /v1/info     -> {name, max_context_tokens}
//! POST /v1/score    {context, continuation} -> {token_count, per_token_logprobs, logprob_sum}
//! POST /v1/generate {prompt, max_new_tokens, stop} -> {text}
//! ```
//!
//! A 400 response carries `{error}`; that message is surfaced unchanged.

use std::time::Duration;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use super::{GenerateRequest, LmBackend, LmInfo, LmScoreRequest, LmScoreResult};
use crate::error::{RalmError, Result};

pub const HTTP_TIMEOUT_ENV: &str = "RALM_HTTP_TIMEOUT_MS";
pub const DEFAULT_HTTP_TIMEOUT_MS: u64 = 30_000;

#[derive(Debug, Serialize, Deserialize)]
pub(crate) struct ErrorBody {
    pub error: String,
}

#[derive(Debug, Serialize, Deserialize)]
pub(crate) struct GenerateResponse {
    pub text: String,
}

/// Client for a remote scoring server. `ureq::Agent` is shareable, so
/// several requests may be in flight from different threads.
#[derive(Clone)]
pub struct RemoteLm {
    base_url: String,
    agent: ureq::Agent,
}

impl RemoteLm {
    /// Uses `RALM_HTTP_TIMEOUT_MS` when set.
    pub fn new(base_url: &str) -> Result<Self> {
        let timeout_ms = match std::env::var(HTTP_TIMEOUT_ENV) {
            Ok(v) => v.trim().parse::<u64>().map_err(|_| {
                RalmError::InvalidArgument(format!(
                    "{HTTP_TIMEOUT_ENV} must be an integer, got {v:?}"
                ))
            })?,
            Err(_) => DEFAULT_HTTP_TIMEOUT_MS,
        };
        Ok(RemoteLm::with_timeout(
            base_url,
            Duration::from_millis(timeout_ms),
        ))
    }

    pub fn with_timeout(base_url: &str, timeout: Duration) -> Self {
        let agent = ureq::AgentBuilder::new().timeout(timeout).build();
        RemoteLm {
            base_url: base_url.trim_end_matches('/').to_string(),
            agent,
        }
    }

    pub fn base_url(&self) -> &str {
        &self.base_url
    }

    fn url(&self, path: &str) -> String {
        format!("{}{}", self.base_url, path)
    }

    fn decode<T: DeserializeOwned>(
        result: std::result::Result<ureq::Response, ureq::Error>,
    ) -> Result<T> {
        match result {
            Ok(resp) => resp
                .into_json::<T>()
                .map_err(|e| RalmError::Backend(format!("malformed response body: {e}"))),
            Err(ureq::Error::Status(code, resp)) => {
                let body = resp.into_string().unwrap_or_default();
                match serde_json::from_str::<ErrorBody>(&body) {
                    Ok(err) => Err(RalmError::Backend(err.error)),
                    Err(_) => Err(RalmError::Backend(format!("HTTP {code}: {body}"))),
                }
            }
            Err(e) => Err(RalmError::Backend(format!("transport: {e}"))),
        }
    }

    /// GET returning raw status and body, for protocol checks.
    pub fn get_raw(&self, path: &str) -> Result<(u16, String)> {
        Self::raw(self.agent.get(&self.url(path)).call())
    }

    /// POST of a raw body, for protocol checks.
    pub fn post_raw(&self, path: &str, body: &str) -> Result<(u16, String)> {
        Self::raw(
            self.agent
                .post(&self.url(path))
                .set("Content-Type", "application/json")
                .send_string(body),
        )
    }

    fn raw(result: std::result::Result<ureq::Response, ureq::Error>) -> Result<(u16, String)> {
        let resp = match result {
            Ok(r) => r,
            Err(ureq::Error::Status(_, r)) => r,
            Err(e) => return Err(RalmError::Backend(format!("transport: {e}"))),
        };
        let status = resp.status();
        let body = resp
            .into_string()
            .map_err(|e| RalmError::Backend(format!("reading body: {e}")))?;
        Ok((status, body))
    }
}

impl LmBackend for RemoteLm {
    fn info(&self) -> Result<LmInfo> {
        let info: LmInfo = Self::decode(self.agent.get(&self.url("/v1/info")).call())?;
        info.validate()
    }

    fn score(&self, req: &LmScoreRequest) -> Result<LmScoreResult> {
        let result: LmScoreResult =
            Self::decode(self.agent.post(&self.url("/v1/score")).send_json(req))?;
        result.validate()?;
        Ok(result)
    }

    fn generate(&self, req: &GenerateRequest) -> Result<String> {
        let resp: GenerateResponse =
            Self::decode(self.agent.post(&self.url("/v1/generate")).send_json(req))?;
        Ok(resp.text)
    }
}
