//! HTTP clients for the external text-generation and scoring services.
//!
//! Wire contracts:
//!
//! - `POST {base}/generate` `{prompt, max_tokens, temperature}` → `{text}`
//! - `POST {base}/score` `{query, passages: [...]}` → `{scores: [...]}`
//!
//! An optional bearer token is sent as `Authorization: Bearer <token>`.

use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const ENV_URL: &str = "GEN_SERVICE_URL";
pub const ENV_TOKEN: &str = "GEN_SERVICE_TOKEN";

/// Anything that turns a prompt into text.
pub trait GenerationClient: Send + Sync {
    fn generate(&self, prompt: &str, max_tokens: u32, temperature: f32) -> Result<String>;
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerateRequest {
    pub prompt: String,
    pub max_tokens: u32,
    pub temperature: f32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerateResponse {
    pub text: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreRequest {
    pub query: String,
    pub passages: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreResponse {
    pub scores: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct ServiceConfig {
    pub base_url: String,
    pub token: Option<String>,
    pub timeout: Duration,
}

impl ServiceConfig {
    pub fn new(base_url: impl Into<String>) -> Self {
        Self {
            base_url: base_url.into(),
            token: None,
            timeout: Duration::from_secs(60),
        }
    }

    /// Reads `GEN_SERVICE_URL` and `GEN_SERVICE_TOKEN`.
    pub fn from_env() -> Result<Self> {
        let url = std::env::var(ENV_URL)
            .map_err(|_| Error::Config(format!("{ENV_URL} is not set")))?;
        Ok(Self {
            token: std::env::var(ENV_TOKEN).ok().filter(|t| !t.is_empty()),
            ..Self::new(url)
        })
    }
}

/// Blocking JSON-over-HTTP client.
#[derive(Clone)]
pub struct HttpService {
    config: ServiceConfig,
    agent: ureq::Agent,
}

impl HttpService {
    pub fn new(config: ServiceConfig) -> Self {
        let agent = ureq::Agent::config_builder()
            .timeout_global(Some(config.timeout))
            .build()
            .new_agent();
        Self { config, agent }
    }

    fn url(&self, path: &str) -> String {
        format!("{}/{}", self.config.base_url.trim_end_matches('/'), path)
    }

    fn post<Req: Serialize, Resp: serde::de::DeserializeOwned>(
        &self,
        path: &str,
        body: &Req,
    ) -> Result<Resp> {
        let url = self.url(path);
        let mut req = self.agent.post(&url);
        if let Some(token) = &self.config.token {
            req = req.header("Authorization", &format!("Bearer {token}"));
        }
        let mut resp = req
            .send_json(body)
            .map_err(|e| Error::Service(format!("POST {url}: {e}")))?;
        resp.body_mut()
            .read_json()
            .map_err(|e| Error::Service(format!("POST {url}: bad response: {e}")))
    }

    /// `POST /score`; the response must carry one score per passage.
    pub fn score(&self, query: &str, passages: &[String]) -> Result<Vec<f64>> {
        let resp: ScoreResponse = self.post(
            "score",
            &ScoreRequest {
                query: query.to_string(),
                passages: passages.to_vec(),
            },
        )?;
        if resp.scores.len() != passages.len() {
            return Err(Error::Service(format!(
                "score service returned {} scores for {} passages",
                resp.scores.len(),
                passages.len()
            )));
        }
        Ok(resp.scores)
    }
}

impl GenerationClient for HttpService {
    fn generate(&self, prompt: &str, max_tokens: u32, temperature: f32) -> Result<String> {
        let resp: GenerateResponse = self.post(
            "generate",
            &GenerateRequest {
                prompt: prompt.to_string(),
                max_tokens,
                temperature,
            },
        )?;
        Ok(resp.text)
    }
}
