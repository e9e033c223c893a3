//! Run configuration files.
//!
//! The grammar is a TOML subset: top-level `key = "value"` lines followed by
//! one optional `[section]` per backend role. Bare integers are accepted
//! where a number is expected.
//!
//! ```text
//! dataset_dir = "data/prepared"
//! output_dir  = "out"
//! modes       = "text15,text30,text120,visual,multi15,multi60"
//! repeats     = "3"
//! quality     = "35"
//! seed_base   = "0"
//! workers     = "4"
//!
//! [caption]
//! kind        = "http"            # mock | http
//! base_url    = "https://caption.example"
//! api_key     = "..."             # GENZIP_API_KEY overrides
//! timeout     = "120"             # seconds
//! max_retries = "2"
//! parallelism = "4"
//! adapter     = "chat:gpt-4o"     # native | chat | chat:<model>
//!
//! [generate]  # same keys
//! [embed]     # kind may also be none
//! [codec]     # external visual codec; kind may also be none
//! [metrics]   # external IQA service; kind defaults to none
//! ```
//!
//! Relative paths resolve against the directory holding the file.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Duration;

use super::{HarnessError, Mode, DEFAULT_QUALITY, MATRIX_PRESETS};
use crate::backends::{BackendEndpoint, Backends, CaptionAdapter, HttpBackend, MockBackend};
use crate::visualcodec::CodecRegistry;

const TOP_KEYS: [&str; 7] = [
    "dataset_dir",
    "output_dir",
    "modes",
    "repeats",
    "quality",
    "seed_base",
    "workers",
];
const ROLE_KEYS: [&str; 7] = [
    "kind",
    "base_url",
    "api_key",
    "timeout",
    "max_retries",
    "parallelism",
    "adapter",
];
const ROLES: [&str; 5] = ["caption", "generate", "embed", "codec", "metrics"];

/// How one backend role is served.
#[derive(Debug, Clone, PartialEq, Default)]
pub enum RoleConfig {
    #[default]
    Mock,
    Http {
        endpoint: BackendEndpoint,
        adapter: CaptionAdapter,
    },
    /// Role disabled; only valid for the optional roles.
    None,
}

impl RoleConfig {
    fn parallelism(&self) -> Option<usize> {
        match self {
            RoleConfig::Http { endpoint, .. } => Some(endpoint.parallelism_limit()),
            _ => None,
        }
    }

    fn http(&self) -> Result<Option<HttpBackend>, HarnessError> {
        match self {
            RoleConfig::Http { endpoint, adapter } => Ok(Some(
                HttpBackend::new(endpoint.clone())?.with_adapter(adapter.clone()),
            )),
            _ => Ok(None),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BackendsConfig {
    pub caption: RoleConfig,
    pub generate: RoleConfig,
    pub embed: RoleConfig,
    pub codec: RoleConfig,
    pub metrics: RoleConfig,
}

impl Default for BackendsConfig {
    fn default() -> Self {
        Self::mock()
    }
}

impl BackendsConfig {
    /// Mocks for every role; no external metric service.
    pub fn mock() -> Self {
        Self {
            caption: RoleConfig::Mock,
            generate: RoleConfig::Mock,
            embed: RoleConfig::Mock,
            codec: RoleConfig::Mock,
            metrics: RoleConfig::None,
        }
    }

    /// Smallest per-endpoint parallelism limit among the HTTP roles.
    pub fn parallelism_limit(&self) -> Option<usize> {
        [&self.caption, &self.generate, &self.embed, &self.codec, &self.metrics]
            .into_iter()
            .filter_map(RoleConfig::parallelism)
            .min()
    }

    /// Backend sections of a config file; top-level run keys are allowed
    /// and ignored, so one file can serve `run` and `encode`/`decode`.
    pub fn from_file(path: &Path) -> Result<Self, HarnessError> {
        let text = std::fs::read_to_string(path).map_err(|e| HarnessError::io(path, e))?;
        split_table(&text)
            .and_then(|(_, sections)| Self::from_sections(&sections))
            .map_err(|e| e.context(format!("config {}", path.display())))
    }

    fn from_sections(sections: &Sections) -> Result<Self, HarnessError> {
        let role = |name: &str, default: RoleConfig| match sections.get(name) {
            Some(keys) => parse_role(name, keys),
            None => Ok(default),
        };
        for required in ["caption", "generate"] {
            if sections.get(required).and_then(|s| s.get("kind")).map(String::as_str) == Some("none") {
                return Err(HarnessError::Config(format!("[{required}] cannot be disabled")));
            }
        }
        Ok(Self {
            caption: role("caption", RoleConfig::Mock)?,
            generate: role("generate", RoleConfig::Mock)?,
            embed: role("embed", RoleConfig::Mock)?,
            codec: role("codec", RoleConfig::Mock)?,
            metrics: role("metrics", RoleConfig::None)?,
        })
    }

    pub fn build(&self) -> Result<Backends, HarnessError> {
        let mock = Arc::new(MockBackend);
        let caption: Arc<dyn crate::backends::CaptionBackend> = match self.caption.http()? {
            Some(h) => Arc::new(h),
            None => mock.clone(),
        };
        let generation: Arc<dyn crate::backends::GenerationBackend> = match self.generate.http()? {
            Some(h) => Arc::new(h),
            None => mock.clone(),
        };
        let embedding: Option<Arc<dyn crate::backends::EmbeddingBackend>> = match &self.embed {
            RoleConfig::None => None,
            RoleConfig::Mock => Some(mock.clone()),
            http => http.http()?.map(|h| Arc::new(h) as _),
        };
        let codecs = match &self.codec {
            RoleConfig::None => CodecRegistry::new(),
            RoleConfig::Mock => CodecRegistry::new().with_external(mock.clone()),
            http => match http.http()? {
                Some(h) => CodecRegistry::new().with_external(Arc::new(h)),
                None => CodecRegistry::new(),
            },
        };
        let metrics: Option<Arc<dyn crate::backends::MetricBackend>> = match &self.metrics {
            RoleConfig::Mock => {
                return Err(HarnessError::Config(
                    "[metrics] has no mock; use kind = \"http\" or \"none\"".into(),
                ))
            }
            other => other.http()?.map(|h| Arc::new(h) as _),
        };
        Ok(Backends {
            caption,
            generation,
            embedding,
            metrics,
            codecs,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub dataset_dir: PathBuf,
    pub output_dir: PathBuf,
    pub backends: BackendsConfig,
    pub modes: Vec<Mode>,
    pub repeats: u32,
    /// Built-in codec quality for the preset modes.
    pub quality: u8,
    pub seed_base: u64,
    /// Matrix worker count; defaults to the backend parallelism limit.
    pub workers: Option<usize>,
}

impl RunConfig {
    /// All-mock configuration running the main preset matrix.
    pub fn new(dataset_dir: impl Into<PathBuf>, output_dir: impl Into<PathBuf>) -> Self {
        Self {
            dataset_dir: dataset_dir.into(),
            output_dir: output_dir.into(),
            backends: BackendsConfig::mock(),
            modes: MATRIX_PRESETS
                .iter()
                .map(|p| Mode::preset(p, DEFAULT_QUALITY).expect("presets are valid"))
                .collect(),
            repeats: 3,
            quality: DEFAULT_QUALITY,
            seed_base: 0,
            workers: None,
        }
    }

    pub fn from_file(path: &Path) -> Result<Self, HarnessError> {
        let text = std::fs::read_to_string(path).map_err(|e| HarnessError::io(path, e))?;
        let base = path.parent().unwrap_or(Path::new("."));
        Self::parse(&text, base)
            .map_err(|e| e.context(format!("config {}", path.display())))
    }

    /// Parses config text; relative paths are joined onto `base_dir`.
    pub fn parse(text: &str, base_dir: &Path) -> Result<Self, HarnessError> {
        let (top, sections) = split_table(text)?;

        let path = |key: &str| -> Result<PathBuf, HarnessError> {
            let raw = top
                .get(key)
                .ok_or_else(|| HarnessError::Config(format!("missing `{key}`")))?;
            Ok(base_dir.join(raw))
        };
        let mut config = Self::new(path("dataset_dir")?, path("output_dir")?);
        if let Some(v) = top.get("repeats") {
            config.repeats = number("repeats", v)?;
        }
        if let Some(v) = top.get("quality") {
            config.quality = number("quality", v)?;
        }
        if let Some(v) = top.get("seed_base") {
            config.seed_base = number("seed_base", v)?;
        }
        if let Some(v) = top.get("workers") {
            config.workers = Some(number("workers", v)?);
        }
        let mode_list = top
            .get("modes")
            .cloned()
            .unwrap_or_else(|| MATRIX_PRESETS.join(","));
        config.modes = mode_list
            .split(',')
            .map(str::trim)
            .filter(|m| !m.is_empty())
            .map(|m| Mode::parse(m, config.quality))
            .collect::<Result<_, _>>()?;

        config.backends = BackendsConfig::from_sections(&sections)?;
        config.validate_fields()?;
        Ok(config)
    }

    /// Replaces every backend with its mock.
    pub fn with_mock_backends(mut self) -> Self {
        self.backends = BackendsConfig::mock();
        self
    }

    fn validate_fields(&self) -> Result<(), HarnessError> {
        if self.repeats == 0 {
            return Err(HarnessError::Config("repeats must be at least 1".into()));
        }
        if !(1..=100).contains(&self.quality) {
            return Err(HarnessError::Config(format!(
                "quality {} outside 1..=100",
                self.quality
            )));
        }
        if self.workers == Some(0) {
            return Err(HarnessError::Config("workers must be at least 1".into()));
        }
        if self.modes.is_empty() {
            return Err(HarnessError::Config("no modes selected".into()));
        }
        let mut names: Vec<&str> = self.modes.iter().map(|m| m.name.as_str()).collect();
        names.sort_unstable();
        if let Some(w) = names.windows(2).find(|w| w[0] == w[1]) {
            return Err(HarnessError::Config(format!("mode `{}` listed twice", w[0])));
        }
        self.modes.iter().try_for_each(Mode::validate)
    }

    /// Field checks plus the dataset directory existing.
    pub fn validate(&self) -> Result<(), HarnessError> {
        self.validate_fields()?;
        if !self.dataset_dir.is_dir() {
            return Err(HarnessError::Config(format!(
                "dataset_dir {} is not a directory",
                self.dataset_dir.display()
            )));
        }
        Ok(())
    }

    /// Configured worker count, else the backend limit, else the core count.
    pub fn worker_count(&self) -> usize {
        self.workers
            .or_else(|| self.backends.parallelism_limit())
            .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()))
    }
}

type Sections = BTreeMap<String, BTreeMap<String, String>>;

/// Splits config text into top-level scalars and per-role sections, rejecting
/// unknown keys and sections.
fn split_table(text: &str) -> Result<(BTreeMap<String, String>, Sections), HarnessError> {
    let table: toml::Table = text
        .parse()
        .map_err(|e: toml::de::Error| HarnessError::Config(e.message().trim().to_string()))?;
    let mut top = BTreeMap::new();
    let mut sections = BTreeMap::new();
    for (key, value) in table {
        match value {
            toml::Value::Table(section) => {
                if !ROLES.contains(&key.as_str()) {
                    return Err(HarnessError::Config(format!("unknown section [{key}]")));
                }
                sections.insert(key.clone(), flatten(&key, section, &ROLE_KEYS)?);
            }
            scalar => {
                if !TOP_KEYS.contains(&key.as_str()) {
                    return Err(HarnessError::Config(format!("unknown key `{key}`")));
                }
                top.insert(key.clone(), scalar_string(&key, scalar)?);
            }
        }
    }
    Ok((top, sections))
}

fn scalar_string(key: &str, value: toml::Value) -> Result<String, HarnessError> {
    match value {
        toml::Value::String(s) => Ok(s),
        toml::Value::Integer(i) => Ok(i.to_string()),
        toml::Value::Float(f) => Ok(f.to_string()),
        _ => Err(HarnessError::Config(format!(
            "`{key}` must be a string or number"
        ))),
    }
}

fn flatten(
    section: &str,
    table: toml::Table,
    allowed: &[&str],
) -> Result<BTreeMap<String, String>, HarnessError> {
    table
        .into_iter()
        .map(|(key, value)| {
            if !allowed.contains(&key.as_str()) {
                return Err(HarnessError::Config(format!("unknown key `{key}` in [{section}]")));
            }
            let full = format!("{section}.{key}");
            Ok((key, scalar_string(&full, value)?))
        })
        .collect()
}

fn number<T: std::str::FromStr>(key: &str, raw: &str) -> Result<T, HarnessError> {
    raw.trim()
        .parse()
        .map_err(|_| HarnessError::Config(format!("`{key}`: `{raw}` is not a valid number")))
}

fn parse_role(name: &str, keys: &BTreeMap<String, String>) -> Result<RoleConfig, HarnessError> {
    let kind = keys.get("kind").map(String::as_str).unwrap_or(
        if keys.contains_key("base_url") { "http" } else { "mock" },
    );
    let key = |k: &str| format!("{name}.{k}");
    match kind {
        "mock" => Ok(RoleConfig::Mock),
        "none" => Ok(RoleConfig::None),
        "http" => {
            let url = keys
                .get("base_url")
                .ok_or_else(|| HarnessError::Config(format!("[{name}] needs base_url")))?;
            let bad = |e: crate::backends::BackendError| HarnessError::Config(format!("[{name}] {e}"));
            let mut endpoint = BackendEndpoint::new(url)
                .map_err(bad)?
                .with_api_key(keys.get("api_key").cloned());
            if let Some(t) = keys.get("timeout") {
                let secs: f64 = number(&key("timeout"), t)?;
                if !(secs > 0.0 && secs.is_finite()) {
                    return Err(HarnessError::Config(format!("{} must be positive", key("timeout"))));
                }
                endpoint = endpoint
                    .with_timeout(Duration::from_secs_f64(secs))
                    .map_err(bad)?;
            }
            if let Some(r) = keys.get("max_retries") {
                endpoint = endpoint.with_max_retries(number(&key("max_retries"), r)?);
            }
            if let Some(p) = keys.get("parallelism") {
                endpoint = endpoint
                    .with_parallelism_limit(number(&key("parallelism"), p)?)
                    .map_err(bad)?;
            }
            let adapter = match keys.get("adapter") {
                Some(a) => a.parse().map_err(bad)?,
                None => CaptionAdapter::Native,
            };
            Ok(RoleConfig::Http {
                endpoint: endpoint.with_env_api_key(),
                adapter,
            })
        }
        other => Err(HarnessError::Config(format!(
            "[{name}] unknown kind `{other}` (mock, http or none)"
        ))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_and_relative_paths() {
        let c = RunConfig::parse("dataset_dir = \"d\"\noutput_dir = \"o\"\n", Path::new("/base")).unwrap();
        assert_eq!(c.dataset_dir, PathBuf::from("/base/d"));
        assert_eq!(c.output_dir, PathBuf::from("/base/o"));
        assert_eq!(c.repeats, 3);
        assert_eq!(c.quality, 35);
        assert_eq!(c.modes.len(), 6);
        assert_eq!(c.backends, BackendsConfig::mock());
    }

    #[test]
    fn http_sections() {
        let text = r#"
dataset_dir = "/d"
output_dir = "/o"
modes = "text30, multi15"
repeats = "2"
quality = 50

[caption]
kind = "http"
base_url = "http://127.0.0.1:9"
parallelism = "2"
timeout = "5"
adapter = "chat:some-model"

[metrics]
base_url = "http://127.0.0.1:9"
parallelism = "3"
"#;
        let c = RunConfig::parse(text, Path::new(".")).unwrap();
        assert_eq!(c.repeats, 2);
        assert_eq!(c.modes[1].visual, crate::harness::VisualMode::Builtin { quality: 50 });
        match &c.backends.caption {
            RoleConfig::Http { endpoint, adapter } => {
                assert_eq!(endpoint.parallelism_limit(), 2);
                assert_eq!(endpoint.timeout(), Duration::from_secs(5));
                assert_eq!(
                    adapter,
                    &CaptionAdapter::ChatCompletions {
                        model: "some-model".into()
                    }
                );
            }
            other => panic!("{other:?}"),
        }
        assert_eq!(c.backends.parallelism_limit(), Some(2));
        assert_eq!(c.worker_count(), 2);
        assert!(c.backends.build().unwrap().metrics.is_some());
    }

    #[test]
    fn malformed_configs_are_rejected() {
        let base = Path::new(".");
        for text in [
            "dataset_dir = \"d\"",
            "dataset_dir = \"d\"\noutput_dir = \"o\"\nrepeats = \"0\"",
            "dataset_dir = \"d\"\noutput_dir = \"o\"\ncolour = \"blue\"",
            "dataset_dir = \"d\"\noutput_dir = \"o\"\nmodes = \"text30,text30\"",
            "dataset_dir = \"d\"\noutput_dir = \"o\"\n[caption]\nkind = \"http\"",
            "dataset_dir = \"d\"\noutput_dir = \"o\"\n[caption]\nkind = \"none\"",
            "dataset_dir = \"d\"\noutput_dir = \"o\"\n[render]\nkind = \"mock\"",
            "dataset_dir = d",
        ] {
            assert!(RunConfig::parse(text, base).is_err(), "{text}");
        }
    }
}
