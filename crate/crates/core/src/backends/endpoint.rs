use std::str::FromStr;
use std::time::Duration;

use reqwest::Url;

use super::BackendError;

/// Environment variable that overrides any configured API key.
pub const API_KEY_ENV: &str = "GENZIP_API_KEY";

/// Request shape used for captioning.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub enum CaptionAdapter {
    /// `POST {base}/v1/caption` with `{image, prompt, max_words}`.
    #[default]
    Native,
    /// `POST {base}/v1/chat/completions` with a text part and an image part.
    ChatCompletions { model: String },
}

impl FromStr for CaptionAdapter {
    type Err = BackendError;

    /// `native`, `chat` or `chat:<model>`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.split_once(':') {
            None if s == "native" => Ok(Self::Native),
            None if s == "chat" => Ok(Self::ChatCompletions {
                model: "gpt-4o".to_string(),
            }),
            Some(("chat", model)) if !model.is_empty() => Ok(Self::ChatCompletions {
                model: model.to_string(),
            }),
            _ => Err(BackendError::InvalidEndpoint(format!(
                "unknown caption adapter `{s}`"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BackendEndpoint {
    base_url: Url,
    api_key: Option<String>,
    timeout: Duration,
    max_retries: u32,
    parallelism_limit: usize,
    backoff_base: Duration,
}

impl BackendEndpoint {
    pub const DEFAULT_TIMEOUT: Duration = Duration::from_secs(120);
    pub const DEFAULT_MAX_RETRIES: u32 = 2;
    pub const DEFAULT_PARALLELISM: usize = 4;
    /// First retry waits this long; each further retry doubles it.
    pub const DEFAULT_BACKOFF: Duration = Duration::from_secs(1);

    pub fn new(base_url: &str) -> Result<Self, BackendError> {
        let base_url = Url::parse(base_url)
            .map_err(|e| BackendError::InvalidEndpoint(format!("{base_url}: {e}")))?;
        if !matches!(base_url.scheme(), "http" | "https") {
            return Err(BackendError::InvalidEndpoint(format!(
                "unsupported scheme `{}`",
                base_url.scheme()
            )));
        }
        Ok(Self {
            base_url,
            api_key: None,
            timeout: Self::DEFAULT_TIMEOUT,
            max_retries: Self::DEFAULT_MAX_RETRIES,
            parallelism_limit: Self::DEFAULT_PARALLELISM,
            backoff_base: Self::DEFAULT_BACKOFF,
        })
    }

    pub fn with_api_key(mut self, key: Option<String>) -> Self {
        self.api_key = key.filter(|k| !k.is_empty());
        self
    }

    /// Replaces the key with `GENZIP_API_KEY` when that variable is set.
    pub fn with_env_api_key(self) -> Self {
        match std::env::var(API_KEY_ENV) {
            Ok(key) if !key.is_empty() => self.with_api_key(Some(key)),
            _ => self,
        }
    }

    pub fn with_timeout(mut self, timeout: Duration) -> Result<Self, BackendError> {
        if timeout.is_zero() {
            return Err(BackendError::InvalidEndpoint("timeout must be positive".into()));
        }
        self.timeout = timeout;
        Ok(self)
    }

    pub fn with_max_retries(mut self, retries: u32) -> Self {
        self.max_retries = retries;
        self
    }

    pub fn with_parallelism_limit(mut self, limit: usize) -> Result<Self, BackendError> {
        if limit == 0 {
            return Err(BackendError::InvalidEndpoint(
                "parallelism limit must be at least 1".into(),
            ));
        }
        self.parallelism_limit = limit;
        Ok(self)
    }

    pub fn with_backoff_base(mut self, base: Duration) -> Self {
        self.backoff_base = base;
        self
    }

    pub fn base_url(&self) -> &Url {
        &self.base_url
    }

    pub fn api_key(&self) -> Option<&str> {
        self.api_key.as_deref()
    }

    pub fn timeout(&self) -> Duration {
        self.timeout
    }

    pub fn max_retries(&self) -> u32 {
        self.max_retries
    }

    pub fn parallelism_limit(&self) -> usize {
        self.parallelism_limit
    }

    pub fn backoff_base(&self) -> Duration {
        self.backoff_base
    }

    /// Delay before retry number `retry` (0-based): base, 2 x base, 4 x base...
    pub fn backoff(&self, retry: u32) -> Duration {
        self.backoff_base.saturating_mul(1u32 << retry.min(16))
    }

    /// Joins `path` (e.g. `v1/caption`) onto the base URL, keeping any
    /// path prefix the base already has.
    pub fn url(&self, path: &str) -> String {
        let base = self.base_url.as_str().trim_end_matches('/');
        format!("{base}/{}", path.trim_start_matches('/'))
    }
}
