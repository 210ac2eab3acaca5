use std::time::Duration;

use base64::Engine;
use serde_json::{json, Value};

use super::{BackendError, BackendRequest, Transport};

#[derive(Debug, Clone, PartialEq)]
pub struct HttpConfig {
    /// Chat-completions endpoint URL.
    pub endpoint: String,
    /// Name of the environment variable holding the bearer token.
    pub auth_env: Option<String>,
    pub timeout: Duration,
}

/// JSON-over-HTTP chat-completion transport.
pub struct HttpTransport {
    config: HttpConfig,
    token: Option<String>,
    client: reqwest::blocking::Client,
}

impl HttpTransport {
    /// Reads the auth token from the configured environment variable.
    pub fn new(config: HttpConfig) -> Result<Self, BackendError> {
        let token = match &config.auth_env {
            Some(var) => Some(std::env::var(var).map_err(|_| {
                BackendError::Auth(format!("environment variable {var} is not set"))
            })?),
            None => None,
        };
        let client = reqwest::blocking::Client::builder()
            .timeout(config.timeout)
            .build()
            .map_err(|e| BackendError::Transient(e.to_string()))?;
        Ok(HttpTransport { config, token, client })
    }

    fn image_url(reference: &str) -> Result<String, BackendError> {
        if reference.contains("://") || reference.starts_with("data:") {
            return Ok(reference.to_string());
        }
        let bytes = std::fs::read(reference)
            .map_err(|e| BackendError::Parse(format!("cannot read image {reference}: {e}")))?;
        let mime = match reference.rsplit('.').next().map(str::to_ascii_lowercase).as_deref() {
            Some("png") => "image/png",
            Some("webp") => "image/webp",
            _ => "image/jpeg",
        };
        let data = base64::engine::general_purpose::STANDARD.encode(bytes);
        Ok(format!("data:{mime};base64,{data}"))
    }

    /// Request body in the common chat-completions shape.
    pub fn body(request: &BackendRequest) -> Result<Value, BackendError> {
        let content = match &request.image {
            None => json!(request.prompt),
            Some(image) => json!([
                { "type": "text", "text": request.prompt },
                { "type": "image_url", "image_url": { "url": Self::image_url(image)? } },
            ]),
        };
        Ok(json!({
            "model": request.params.model_name,
            "messages": [{ "role": "user", "content": content }],
            "max_tokens": request.params.max_output_tokens,
            "temperature": request.params.temperature,
        }))
    }

    /// Extracts `choices[0].message.content` (or `choices[0].text`).
    pub fn parse_completion(body: &Value) -> Result<String, BackendError> {
        let choice = body
            .get("choices")
            .and_then(|c| c.get(0))
            .ok_or_else(|| BackendError::Parse("response has no choices".into()))?;
        choice
            .pointer("/message/content")
            .or_else(|| choice.get("text"))
            .and_then(Value::as_str)
            .map(str::to_string)
            .ok_or_else(|| BackendError::Parse("choice has no text content".into()))
    }

    fn classify(status: u16, body: String) -> BackendError {
        match status {
            401 | 403 => BackendError::Auth(body),
            429 if body.contains("quota") => BackendError::QuotaExceeded(body),
            402 => BackendError::QuotaExceeded(body),
            408 | 429 | 500..=599 => BackendError::Transient(format!("status {status}: {body}")),
            _ => BackendError::Rejected { status, body },
        }
    }
}

impl Transport for HttpTransport {
    fn send(&self, request: &BackendRequest) -> Result<String, BackendError> {
        let mut call = self.client.post(&self.config.endpoint).json(&Self::body(request)?);
        if let Some(token) = &self.token {
            call = call.bearer_auth(token);
        }
        let response = call.send().map_err(|e| BackendError::Transient(e.to_string()))?;
        let status = response.status().as_u16();
        let text = response.text().map_err(|e| BackendError::Transient(e.to_string()))?;
        if !(200..300).contains(&status) {
            return Err(Self::classify(status, text));
        }
        let body: Value = serde_json::from_str(&text).map_err(|e| BackendError::Parse(e.to_string()))?;
        Self::parse_completion(&body)
    }
}
