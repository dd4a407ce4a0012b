use std::time::Duration;

use log::{debug, warn};

use super::wire::{HealthResponse, MaskRequest, MaskResponse, HEALTH_PATH, MASK_PROBS_PATH};
use super::{MaskResult, ScorerBackend, ScorerError};

#[derive(Debug, Clone)]
pub struct RemoteConfig {
    /// Base URL, e.g. `http://127.0.0.1:8080`.
    pub endpoint: String,
    pub timeout: Duration,
    pub batch_size: usize,
    /// Extra attempts after the first failure of a request.
    pub retries: u32,
    pub retry_delay: Duration,
}

impl RemoteConfig {
    pub fn new(endpoint: impl Into<String>) -> Self {
        Self {
            endpoint: endpoint.into(),
            timeout: Duration::from_secs(60),
            batch_size: 16,
            retries: 2,
            retry_delay: Duration::from_millis(500),
        }
    }
}

/// Client for a scoring service speaking the JSON protocol in [`super::wire`].
///
/// Requests are split into batches of at most `batch_size` texts and sent
/// sequentially; transport failures and 5xx answers are retried. Results are
/// returned in request order.
pub struct RemoteBackend {
    agent: ureq::Agent,
    config: RemoteConfig,
    model_id: String,
}

enum Failure {
    Transient(String),
    Fatal(ScorerError),
}

impl RemoteBackend {
    /// Queries `/v1/health` to learn the model id.
    pub fn connect(config: RemoteConfig) -> Result<Self, ScorerError> {
        if config.batch_size == 0 {
            return Err(ScorerError::InvalidConfig("batch_size must be at least 1".into()));
        }
        let agent: ureq::Agent = ureq::Agent::config_builder()
            .timeout_global(Some(config.timeout))
            .http_status_as_error(false)
            .build()
            .into();
        let mut backend = Self {
            agent,
            config,
            model_id: String::new(),
        };
        let health: HealthResponse = backend.with_retries(|b| b.get_json(HEALTH_PATH))?;
        backend.model_id = health.model_id;
        Ok(backend)
    }

    fn url(&self, path: &str) -> String {
        format!("{}{}", self.config.endpoint.trim_end_matches('/'), path)
    }

    fn with_retries<T>(&self, mut op: impl FnMut(&Self) -> Result<T, Failure>) -> Result<T, ScorerError> {
        let mut last = String::new();
        for attempt in 0..=self.config.retries {
            if attempt > 0 {
                std::thread::sleep(self.config.retry_delay);
            }
            match op(self) {
                Ok(v) => return Ok(v),
                Err(Failure::Fatal(e)) => return Err(e),
                Err(Failure::Transient(msg)) => {
                    warn!("attempt {} of {} failed: {msg}", attempt + 1, self.config.retries + 1);
                    last = msg;
                }
            }
        }
        Err(ScorerError::BackendUnavailable(format!(
            "{} after {} attempts: {last}",
            self.config.endpoint,
            self.config.retries + 1
        )))
    }

    fn get_json<T: serde::de::DeserializeOwned>(&self, path: &str) -> Result<T, Failure> {
        let url = self.url(path);
        let resp = self
            .agent
            .get(&url)
            .call()
            .map_err(|e| Failure::Transient(format!("GET {url}: {e}")))?;
        read_body(resp, &url)
    }

    fn post_batch(&self, request: &MaskRequest) -> Result<MaskResponse, Failure> {
        let url = self.url(MASK_PROBS_PATH);
        debug!("POST {url} with {} texts", request.texts.len());
        let resp = self
            .agent
            .post(&url)
            .send_json(request)
            .map_err(|e| Failure::Transient(format!("POST {url}: {e}")))?;
        read_body(resp, &url)
    }
}

fn read_body<T: serde::de::DeserializeOwned>(
    mut resp: ureq::http::Response<ureq::Body>,
    url: &str,
) -> Result<T, Failure> {
    let status = resp.status().as_u16();
    if status >= 500 {
        return Err(Failure::Transient(format!("{url}: HTTP {status}")));
    }
    if status != 200 {
        let body = resp.body_mut().read_to_string().unwrap_or_default();
        let what = match status {
            400 => "malformed request",
            422 => "no text contains the placeholder",
            _ => "unexpected status",
        };
        return Err(Failure::Fatal(ScorerError::ProtocolViolation(format!(
            "{url}: HTTP {status} ({what}): {body}"
        ))));
    }
    let text = resp
        .body_mut()
        .read_to_string()
        .map_err(|e| Failure::Transient(format!("{url}: reading body: {e}")))?;
    serde_json::from_str(&text)
        .map_err(|e| Failure::Fatal(ScorerError::ProtocolViolation(format!("{url}: {e}"))))
}

impl ScorerBackend for RemoteBackend {
    fn model_id(&self) -> &str {
        &self.model_id
    }

    fn score(&self, texts: &[String], candidates: &[String]) -> Result<Vec<MaskResult>, ScorerError> {
        let mut out = Vec::with_capacity(texts.len());
        for chunk in texts.chunks(self.config.batch_size) {
            let request = MaskRequest {
                texts: chunk.to_vec(),
                candidates: candidates.to_vec(),
            };
            let response = self.with_retries(|b| b.post_batch(&request))?;
            if response.model_id != self.model_id {
                return Err(ScorerError::ProtocolViolation(format!(
                    "model id changed from {:?} to {:?}",
                    self.model_id, response.model_id
                )));
            }
            if response.results.len() != chunk.len() {
                return Err(ScorerError::ProtocolViolation(format!(
                    "expected {} results, got {}",
                    chunk.len(),
                    response.results.len()
                )));
            }
            out.extend(response.results);
        }
        Ok(out)
    }
}
