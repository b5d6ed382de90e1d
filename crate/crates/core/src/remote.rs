//! Blocking JSON-over-HTTP client shared by the remote inference providers.

use std::time::Duration;

use serde::de::DeserializeOwned;
use serde::Serialize;

use crate::error::{Error, Result};

#[derive(Debug, Clone)]
pub struct RemoteClient {
    endpoint: String,
    agent: ureq::Agent,
    max_retries: u32,
    base_backoff: Duration,
}

impl RemoteClient {
    pub fn new(endpoint: impl Into<String>) -> Result<Self> {
        let endpoint = endpoint.into();
        if !(endpoint.starts_with("http://") || endpoint.starts_with("https://")) {
            return Err(Error::ProviderConfig(format!(
                "endpoint {endpoint:?} is not an http(s) URL"
            )));
        }
        let config = ureq::Agent::config_builder()
            .timeout_global(Some(Duration::from_secs(120)))
            .build();
        Ok(Self {
            endpoint,
            agent: config.into(),
            max_retries: 3,
            base_backoff: Duration::from_millis(200),
        })
    }

    pub fn with_retries(mut self, max_retries: u32, base_backoff: Duration) -> Self {
        self.max_retries = max_retries;
        self.base_backoff = base_backoff;
        self
    }

    pub fn endpoint(&self) -> &str {
        &self.endpoint
    }

    /// POSTs `body` and decodes the reply, retrying transport and 5xx
    /// failures with exponential backoff.
    pub fn post_json<B: Serialize, R: DeserializeOwned>(&self, body: &B) -> Result<R> {
        let mut attempt = 0;
        loop {
            let outcome = self
                .agent
                .post(&self.endpoint)
                .send_json(body)
                .and_then(|mut resp| resp.body_mut().read_json::<R>());
            match outcome {
                Ok(r) => return Ok(r),
                Err(e) if attempt < self.max_retries && retriable(&e) => {
                    let wait = self.base_backoff * 2u32.pow(attempt);
                    tracing::warn!(endpoint = %self.endpoint, attempt, error = %e, "retrying");
                    std::thread::sleep(wait);
                    attempt += 1;
                }
                Err(e) => {
                    return Err(Error::Provider(format!(
                        "{} after {} attempt(s): {e}",
                        self.endpoint,
                        attempt + 1
                    )))
                }
            }
        }
    }
}

fn retriable(e: &ureq::Error) -> bool {
    match e {
        ureq::Error::StatusCode(code) => *code >= 500 || *code == 429,
        ureq::Error::Io(_) | ureq::Error::Timeout(_) | ureq::Error::ConnectionFailed => true,
        ureq::Error::HostNotFound => true,
        _ => false,
    }
}
