//! Clients for remote text-generation services and their offline mocks.
//!
//! Every request goes through a [`BackendClient`], which layers a
//! content-addressed response cache, a rate limiter, a concurrency bound and
//! retry with exponential backoff over a [`Transport`].

mod cache;
mod client;
mod http;
mod mock;
mod ops;
mod prompts;

pub use cache::{CacheKey, ResponseCache};
pub use client::{BackendClient, RateLimiter, RetryPolicy};
pub use http::{HttpConfig, HttpTransport};
pub use mock::{DefaultVerdict, EchoTransport, FixtureExtraction, FixtureJudgeTransport, MockKey, PrefsFixture, TableTransport};
pub use ops::{caption_scene, summarize_scene, CaptionInput, RoleBackend};
pub use prompts::{PromptTemplate, PromptTemplates, TemplateError};

use serde::{Deserialize, Serialize};

/// Which model a request is for.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Role {
    DialogueSummarizer,
    FusionSummarizer,
    FactExtractor,
    FactJudge,
    VisionCaptioner,
}

impl Role {
    pub const ALL: [Role; 5] = [
        Role::DialogueSummarizer,
        Role::FusionSummarizer,
        Role::FactExtractor,
        Role::FactJudge,
        Role::VisionCaptioner,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Role::DialogueSummarizer => "dialogue_summarizer",
            Role::FusionSummarizer => "fusion_summarizer",
            Role::FactExtractor => "fact_extractor",
            Role::FactJudge => "fact_judge",
            Role::VisionCaptioner => "vision_captioner",
        }
    }
}

impl std::fmt::Display for Role {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerationParams {
    pub max_output_tokens: u32,
    pub temperature: f64,
    pub model_name: String,
}

impl Default for GenerationParams {
    fn default() -> Self {
        GenerationParams { max_output_tokens: 512, temperature: 0.0, model_name: String::new() }
    }
}

/// One prompt/completion exchange.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BackendRequest {
    pub role: Role,
    pub prompt: String,
    pub params: GenerationParams,
    /// Image reference (path or URL) for vision requests.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub image: Option<String>,
}

impl BackendRequest {
    pub fn new(role: Role, prompt: impl Into<String>, params: GenerationParams) -> Self {
        BackendRequest { role, prompt: prompt.into(), params, image: None }
    }

    pub fn with_image(mut self, image: impl Into<String>) -> Self {
        self.image = Some(image.into());
        self
    }
}

#[derive(Debug, thiserror::Error)]
pub enum BackendError {
    #[error("{role} backend unavailable after {attempts} attempts: {message}")]
    Unavailable { role: Role, attempts: u32, message: String },
    /// Retryable transport failure (timeouts, 5xx, rate limiting).
    #[error("transient backend failure: {0}")]
    Transient(String),
    #[error("authentication failed: {0}")]
    Auth(String),
    #[error("quota exceeded: {0}")]
    QuotaExceeded(String),
    #[error("request rejected with status {status}: {body}")]
    Rejected { status: u16, body: String },
    #[error("malformed backend response: {0}")]
    Parse(String),
    #[error("{role} backend returned an empty completion")]
    EmptyCompletion { role: Role },
    #[error("empty prompt for {0} request")]
    EmptyPrompt(Role),
    #[error("no {0} backend configured")]
    NotConfigured(Role),
    #[error("mock backend has no entry for {0}")]
    MockMiss(String),
    #[error("response cache error: {0}")]
    Cache(#[from] std::io::Error),
}

impl BackendError {
    pub fn is_transient(&self) -> bool {
        matches!(self, BackendError::Transient(_))
    }
}

/// Sends a request upstream. Implementations do no caching or retrying.
pub trait Transport: Send + Sync {
    fn send(&self, request: &BackendRequest) -> Result<String, BackendError>;
}
