use std::time::Duration;

use serde::{Deserialize, Serialize};

use super::{l2_normalize, EmbeddingProvider};
use crate::error::{Error, Result};

pub const EMBED_URL_ENV: &str = "TOKSHAP_EMBED_URL";

const BATCH: usize = 64;

#[derive(Serialize)]
struct EmbedRequest<'a> {
    texts: &'a [&'a str],
}

#[derive(Deserialize)]
struct EmbedResponse {
    dim: usize,
    embeddings: Vec<Vec<f32>>,
}

#[derive(Deserialize)]
struct ErrorResponse {
    error: String,
}

#[derive(Deserialize)]
struct Health {
    status: String,
    dim: usize,
    model: String,
}

/// Client for a remote `/embed` service.
#[derive(Debug, Clone)]
pub struct HttpProvider {
    base: String,
    id: String,
    dim: usize,
    normalize: bool,
    client: reqwest::blocking::Client,
}

impl HttpProvider {
    /// Queries `/health` for the model name and dimension.
    pub fn connect(url: &str) -> Result<Self> {
        let base = url.trim_end_matches('/').to_owned();
        let client = reqwest::blocking::Client::builder()
            .timeout(Duration::from_secs(120))
            .build()
            .map_err(|e| Error::Transport(e.to_string()))?;
        let resp = client.get(format!("{base}/health")).send().map_err(|e| Error::Transport(e.to_string()))?;
        if !resp.status().is_success() {
            return Err(Error::Transport(format!("GET /health returned {}", resp.status())));
        }
        let body = resp.bytes().map_err(|e| Error::Transport(e.to_string()))?;
        let health: Health =
            serde_json::from_slice(&body).map_err(|e| Error::Protocol(format!("bad /health body: {e}")))?;
        if health.status != "ok" {
            return Err(Error::Protocol(format!("service status {:?}", health.status)));
        }
        if health.dim == 0 {
            return Err(Error::Protocol("service advertises zero dimension".into()));
        }
        Ok(Self { id: format!("http:{}", health.model), dim: health.dim, base, normalize: true, client })
    }

    pub fn with_normalization(mut self, normalize: bool) -> Self {
        self.normalize = normalize;
        self
    }

    fn post_chunk(&self, texts: &[&str]) -> Result<Vec<Vec<f32>>> {
        let resp = self
            .client
            .post(format!("{}/embed", self.base))
            .json(&EmbedRequest { texts })
            .send()
            .map_err(|e| Error::Transport(e.to_string()))?;
        let status = resp.status();
        let body = resp.bytes().map_err(|e| Error::Transport(e.to_string()))?;
        if status == reqwest::StatusCode::BAD_REQUEST {
            let msg = serde_json::from_slice::<ErrorResponse>(&body)
                .map(|e| e.error)
                .unwrap_or_else(|_| String::from_utf8_lossy(&body).into_owned());
            return Err(Error::Protocol(format!("server rejected request: {msg}")));
        }
        if !status.is_success() {
            return Err(Error::Transport(format!("POST /embed returned {status}")));
        }
        let parsed: EmbedResponse =
            serde_json::from_slice(&body).map_err(|e| Error::Protocol(format!("bad /embed body: {e}")))?;
        if parsed.dim != self.dim {
            return Err(Error::DimensionMismatch { expected: self.dim, got: parsed.dim });
        }
        if parsed.embeddings.len() != texts.len() {
            return Err(Error::Protocol(format!(
                "asked for {} embeddings, got {}",
                texts.len(),
                parsed.embeddings.len()
            )));
        }
        if let Some(bad) = parsed.embeddings.iter().find(|v| v.len() != self.dim) {
            return Err(Error::DimensionMismatch { expected: self.dim, got: bad.len() });
        }
        Ok(parsed.embeddings)
    }
}

impl EmbeddingProvider for HttpProvider {
    fn provider_id(&self) -> &str {
        &self.id
    }

    fn dim(&self) -> usize {
        self.dim
    }

    fn normalized(&self) -> bool {
        self.normalize
    }

    fn embed_batch(&self, texts: &[&str]) -> Result<Vec<Vec<f32>>> {
        let mut out = Vec::with_capacity(texts.len());
        for chunk in texts.chunks(BATCH) {
            out.extend(self.post_chunk(chunk)?);
        }
        if self.normalize {
            out.iter_mut().for_each(|v| l2_normalize(v));
        }
        Ok(out)
    }
}
