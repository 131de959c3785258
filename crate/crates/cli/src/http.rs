use std::time::Duration;

use rankrefine_core::rankers::ChatTransport;
use rankrefine_core::{Error, Result};
use serde_json::Value;

/// Chat-completion transport over HTTPS with a bearer token.
pub struct HttpTransport {
    client: reqwest::blocking::Client,
    url: String,
    api_key: String,
}

impl HttpTransport {
    /// Reads the API key from the environment variable `key_var`.
    pub fn from_env(url: &str, key_var: &str) -> Result<Self> {
        let api_key = std::env::var(key_var)
            .ok()
            .filter(|k| !k.is_empty())
            .ok_or_else(|| Error::Auth(format!("environment variable {key_var} is not set")))?;
        let client = reqwest::blocking::Client::builder()
            .timeout(Duration::from_secs(120))
            .build()
            .map_err(|e| Error::Transport(e.to_string()))?;
        Ok(HttpTransport {
            client,
            url: url.to_string(),
            api_key,
        })
    }
}

impl ChatTransport for HttpTransport {
    fn send(&self, request: &Value) -> Result<Value> {
        let resp = self
            .client
            .post(&self.url)
            .bearer_auth(&self.api_key)
            .json(request)
            .send()
            .map_err(|e| Error::Transport(e.to_string()))?;
        let status = resp.status();
        if status == reqwest::StatusCode::UNAUTHORIZED || status == reqwest::StatusCode::FORBIDDEN {
            return Err(Error::Auth(format!("endpoint returned {status}")));
        }
        if !status.is_success() {
            return Err(Error::Transport(format!("endpoint returned {status}")));
        }
        resp.json().map_err(|e| Error::MalformedResponse(e.to_string()))
    }
}
