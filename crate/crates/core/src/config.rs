//! Pipeline configuration, read from a TOML file.
//!
//! ```toml
//! context_budget = 2048        # whitespace tokens in the fusion input
//! concurrency = 4              # in-flight scene and judge requests
//! uniform_chunk_tokens = 1024  # window size when uniform_chunks is set
//! evaluate = true              # score against gold summaries if present
//!
//! [flags]
//! skip_reorder = false
//! skip_vision = false
//! skip_transcript = false
//! uniform_chunks = false
//!
//! [paths]
//! episode = "episodes/e01"
//! output = "out"
//! cache = ".cache"
//!
//! [backends.dialogue_summarizer]
//! kind = "http"                # http | echo | table | prefs_fixture
//! endpoint = "https://example.invalid/v1/chat/completions"
//! auth_env = "SUMMARIZER_TOKEN"
//! model_name = "summarizer"
//! prompt_template = "prompts/dialogue.txt"
//! rate_limit = 2.0             # requests per second
//! concurrency = 4
//! cache_dir = ".cache"
//! max_output_tokens = 512
//! temperature = 0.0
//! ```
//!
//! Relative paths are resolved against the config file's directory.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::backend::{
    BackendClient, BackendError, EchoTransport, FixtureJudgeTransport, GenerationParams, HttpConfig, HttpTransport,
    MockKey, PrefsFixture, PromptTemplate, PromptTemplates, ResponseCache, RetryPolicy, Role, RoleBackend,
    TableTransport, TemplateError,
};

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("invalid config {path}: {source}")]
    Parse {
        path: PathBuf,
        #[source]
        source: toml::de::Error,
    },
    #[error("invalid config: {0}")]
    Invalid(String),
    #[error(transparent)]
    Template(#[from] TemplateError),
    #[error("backend {role}: {source}")]
    Backend {
        role: Role,
        #[source]
        source: BackendError,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Flags {
    pub skip_reorder: bool,
    pub skip_vision: bool,
    pub skip_transcript: bool,
    pub uniform_chunks: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Paths {
    pub episode: Option<PathBuf>,
    pub output: PathBuf,
    pub cache: Option<PathBuf>,
}

impl Default for Paths {
    fn default() -> Self {
        Paths { episode: None, output: PathBuf::from("out"), cache: None }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BackendKind {
    #[default]
    Http,
    Echo,
    Table,
    PrefsFixture,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TableKey {
    #[default]
    Prompt,
    Image,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BackendConfig {
    pub kind: BackendKind,
    pub endpoint: Option<String>,
    /// Environment variable holding the bearer token.
    pub auth_env: Option<String>,
    pub model_name: String,
    pub prompt_template: Option<PathBuf>,
    /// Requests per second.
    pub rate_limit: Option<f64>,
    pub concurrency: Option<usize>,
    pub cache_dir: Option<PathBuf>,
    /// Lookup table (JSON object) for `kind = "table"`.
    pub table: Option<PathBuf>,
    pub table_key: TableKey,
    /// Fixture file for `kind = "prefs_fixture"`; self-supporting when absent.
    pub fixture: Option<PathBuf>,
    pub max_output_tokens: u32,
    pub temperature: f64,
    pub timeout_secs: u64,
    pub retry_attempts: u32,
    pub retry_base_ms: u64,
}

impl Default for BackendConfig {
    fn default() -> Self {
        let params = GenerationParams::default();
        let retry = RetryPolicy::default();
        BackendConfig {
            kind: BackendKind::Http,
            endpoint: None,
            auth_env: None,
            model_name: params.model_name,
            prompt_template: None,
            rate_limit: None,
            concurrency: None,
            cache_dir: None,
            table: None,
            table_key: TableKey::Prompt,
            fixture: None,
            max_output_tokens: params.max_output_tokens,
            temperature: params.temperature,
            timeout_secs: 60,
            retry_attempts: retry.attempts,
            retry_base_ms: retry.base_delay.as_millis() as u64,
        }
    }
}

impl BackendConfig {
    pub fn mock_for(role: Role) -> Self {
        let kind = match role {
            Role::FactExtractor | Role::FactJudge => BackendKind::PrefsFixture,
            _ => BackendKind::Echo,
        };
        BackendConfig { kind, ..Default::default() }
    }

    fn params(&self) -> GenerationParams {
        GenerationParams {
            max_output_tokens: self.max_output_tokens,
            temperature: self.temperature,
            model_name: self.model_name.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub context_budget: usize,
    pub concurrency: usize,
    pub uniform_chunk_tokens: usize,
    pub evaluate: bool,
    pub flags: Flags,
    pub paths: Paths,
    pub backends: BTreeMap<Role, BackendConfig>,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            context_budget: 2048,
            concurrency: 4,
            uniform_chunk_tokens: 1024,
            evaluate: true,
            flags: Flags::default(),
            paths: Paths::default(),
            backends: BTreeMap::new(),
        }
    }
}

fn rebase(base: &Path, path: &mut PathBuf) {
    if path.is_relative() {
        *path = base.join(&*path);
    }
}

fn rebase_opt(base: &Path, path: &mut Option<PathBuf>) {
    if let Some(p) = path {
        rebase(base, p);
    }
}

impl PipelineConfig {
    pub fn from_toml(text: &str, origin: &Path) -> Result<Self, ConfigError> {
        let config: PipelineConfig =
            toml::from_str(text).map_err(|source| ConfigError::Parse { path: origin.to_path_buf(), source })?;
        config.validate()?;
        Ok(config)
    }

    /// Loads and validates a config file.
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text =
            std::fs::read_to_string(path).map_err(|source| ConfigError::Io { path: path.to_path_buf(), source })?;
        let mut config = Self::from_toml(&text, path)?;
        let base = path.parent().unwrap_or(Path::new("."));
        rebase_opt(base, &mut config.paths.episode);
        rebase(base, &mut config.paths.output);
        rebase_opt(base, &mut config.paths.cache);
        for b in config.backends.values_mut() {
            rebase_opt(base, &mut b.prompt_template);
            rebase_opt(base, &mut b.cache_dir);
            rebase_opt(base, &mut b.table);
            rebase_opt(base, &mut b.fixture);
        }
        Ok(config)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let positive = [
            ("context_budget", self.context_budget),
            ("concurrency", self.concurrency),
            ("uniform_chunk_tokens", self.uniform_chunk_tokens),
        ];
        for (name, value) in positive {
            if value == 0 {
                return Err(ConfigError::Invalid(format!("{name} must be positive")));
            }
        }
        if self.flags.skip_vision && self.flags.skip_transcript {
            return Err(ConfigError::Invalid("skip_vision and skip_transcript leave nothing to summarize".into()));
        }
        for (role, b) in &self.backends {
            let bad = |msg: &str| Err(ConfigError::Invalid(format!("backends.{role}: {msg}")));
            match b.kind {
                BackendKind::Http if b.endpoint.is_none() => return bad("http backends need an endpoint"),
                BackendKind::Table if b.table.is_none() => return bad("table backends need a table path"),
                BackendKind::PrefsFixture if !matches!(role, Role::FactExtractor | Role::FactJudge) => {
                    return bad("prefs_fixture only serves fact_extractor and fact_judge")
                }
                _ => {}
            }
            if b.rate_limit.is_some_and(|r| !(r > 0.0)) {
                return bad("rate_limit must be positive");
            }
            if b.concurrency == Some(0) {
                return bad("concurrency must be positive");
            }
            if b.retry_attempts == 0 {
                return bad("retry_attempts must be positive");
            }
        }
        Ok(())
    }

    /// Replaces every remote backend with an offline mock and fills in
    /// missing roles. Configured mocks are kept.
    pub fn with_mocks(mut self) -> Self {
        for role in Role::ALL {
            let entry = self.backends.entry(role).or_insert_with(|| BackendConfig::mock_for(role));
            if entry.kind == BackendKind::Http {
                let mock = BackendConfig::mock_for(role);
                entry.kind = mock.kind;
                entry.endpoint = None;
                entry.auth_env = None;
            }
        }
        self
    }

    /// Hex digest of the settings that affect artifacts.
    pub fn fingerprint(&self) -> String {
        let mut stable = self.clone();
        stable.paths = Paths::default();
        stable.concurrency = 1;
        for b in stable.backends.values_mut() {
            b.cache_dir = None;
            b.concurrency = None;
            b.rate_limit = None;
        }
        let json = serde_json::to_vec(&stable).expect("config serializes");
        hex::encode(Sha256::digest(json))
    }

    /// Prompt templates: shipped defaults with configured overrides.
    pub fn templates(&self) -> Result<PromptTemplates, ConfigError> {
        let mut templates = PromptTemplates::default();
        for (&role, b) in &self.backends {
            if let Some(path) = &b.prompt_template {
                templates.set(role, PromptTemplate::load(path)?);
            }
        }
        Ok(templates)
    }

    /// Builds a client for every configured role. Roles sharing a cache
    /// directory share one cache handle.
    pub fn build_backends(&self) -> Result<Backends, ConfigError> {
        let templates = self.templates()?;
        let mut caches: BTreeMap<PathBuf, ResponseCache> = BTreeMap::new();
        let mut map = BTreeMap::new();
        for (&role, b) in &self.backends {
            let backend_err = |source| ConfigError::Backend { role, source };
            let mut client = match b.kind {
                BackendKind::Http => {
                    let transport = HttpTransport::new(HttpConfig {
                        endpoint: b.endpoint.clone().unwrap_or_default(),
                        auth_env: b.auth_env.clone(),
                        timeout: Duration::from_secs(b.timeout_secs),
                    })
                    .map_err(backend_err)?;
                    BackendClient::new(role, transport)
                }
                BackendKind::Echo => BackendClient::new(role, EchoTransport),
                BackendKind::Table => {
                    let key = match b.table_key {
                        TableKey::Prompt => MockKey::Prompt,
                        TableKey::Image => MockKey::Image,
                    };
                    let path = b.table.as_deref().unwrap_or(Path::new(""));
                    BackendClient::new(role, TableTransport::from_file(path, key).map_err(backend_err)?)
                }
                BackendKind::PrefsFixture => {
                    let fixture = match &b.fixture {
                        Some(path) => PrefsFixture::from_file(path).map_err(backend_err)?,
                        None => PrefsFixture::self_supporting(),
                    };
                    BackendClient::new(role, FixtureJudgeTransport::new(fixture, templates.clone()))
                }
            };
            client = client.with_retry(RetryPolicy {
                attempts: b.retry_attempts,
                base_delay: Duration::from_millis(b.retry_base_ms),
            });
            if let Some(rate) = b.rate_limit {
                client = client.with_rate_limit(rate);
            }
            client = client.with_concurrency(b.concurrency.unwrap_or(self.concurrency));
            if let Some(dir) = b.cache_dir.as_ref().or(self.paths.cache.as_ref()) {
                let cache = match caches.get(dir) {
                    Some(c) => c.clone(),
                    None => {
                        let c = ResponseCache::open(dir)
                            .map_err(|e| backend_err(BackendError::Cache(e)))?;
                        caches.insert(dir.clone(), c.clone());
                        c
                    }
                };
                client = client.with_cache(cache);
            }
            let backend = RoleBackend::new(Arc::new(client), templates.get(role).clone(), b.params());
            map.insert(role, backend);
        }
        Ok(Backends { map })
    }
}

/// Role-bound backends built from a config.
#[derive(Debug, Clone, Default)]
pub struct Backends {
    map: BTreeMap<Role, RoleBackend>,
}

impl Backends {
    pub fn get(&self, role: Role) -> Result<&RoleBackend, BackendError> {
        self.map.get(&role).ok_or(BackendError::NotConfigured(role))
    }

    pub fn insert(&mut self, backend: RoleBackend) {
        self.map.insert(backend.role(), backend);
    }

    /// Upstream calls across all roles.
    pub fn upstream_calls(&self) -> u64 {
        self.map.values().map(|b| b.client.upstream_calls()).sum()
    }
}
