//! Pipeline configuration, loaded from a sectioned TOML file.
//!
//! Relative paths are resolved against the directory of the config file.
//! Secrets never live here: the API key is read from the environment
//! variable named by `client.api_key_env`.

use std::path::{Path, PathBuf};
use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::assembly::{AssemblyOptions, DEFAULT_CONTEXT_BUDGET, DEFAULT_IMAGE_TOKEN_COST};
use crate::client::{ChatClient, MockBackend, OpenAiBackend};
use crate::divider::DividerParams;
use crate::embedding::{Embedder, HttpEmbedder, StubEmbedder};
use crate::error::ConfigError;
use crate::prompt::PromptVariant;
use crate::render::{validate_template, CommandRenderer, Renderer, StubRenderer, DEFAULT_COMMAND_TEMPLATE};
use crate::synthesis::SynthesisOptions;
use crate::text_regions::DEFAULT_MERGE_GAP;

pub const DEFAULT_SEED: u64 = 2026;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    /// Recorded in the report; no stage draws random numbers.
    pub seed: u64,
    pub output_dir: PathBuf,
    pub divider: DividerParams,
    pub ocr: OcrConfig,
    pub client: ClientConfig,
    pub prompt: PromptConfig,
    pub renderer: RendererConfig,
    pub embedder: EmbedderConfig,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            seed: DEFAULT_SEED,
            output_dir: PathBuf::from("runs"),
            divider: DividerParams::default(),
            ocr: OcrConfig::default(),
            client: ClientConfig::default(),
            prompt: PromptConfig::default(),
            renderer: RendererConfig::default(),
            embedder: EmbedderConfig::default(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OcrConfig {
    pub regions_path: Option<PathBuf>,
    pub merge_gap: u32,
}

impl Default for OcrConfig {
    fn default() -> Self {
        Self { regions_path: None, merge_gap: DEFAULT_MERGE_GAP }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ChatBackendKind {
    #[default]
    Mock,
    Openai,
}

impl std::str::FromStr for ChatBackendKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "mock" => Ok(Self::Mock),
            "openai" => Ok(Self::Openai),
            other => Err(format!("unknown backend {other:?} (expected mock or openai)")),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ClientConfig {
    pub backend: ChatBackendKind,
    pub base_url: String,
    pub model: String,
    pub api_key_env: String,
    pub max_concurrency: usize,
    pub cache_dir: Option<PathBuf>,
    pub mock_dir: Option<PathBuf>,
    pub context_budget: u64,
    pub image_token_cost: u64,
    pub retries: u32,
    pub retry_backoff_ms: u64,
    pub timeout: f64,
    pub max_output_tokens: u32,
    pub max_image_pixels: u64,
}

impl Default for ClientConfig {
    fn default() -> Self {
        Self {
            backend: ChatBackendKind::Mock,
            base_url: "https://api.openai.com/v1".into(),
            model: "gpt-4o".into(),
            api_key_env: "OPENAI_API_KEY".into(),
            max_concurrency: 4,
            cache_dir: None,
            mock_dir: None,
            context_budget: DEFAULT_CONTEXT_BUDGET,
            image_token_cost: DEFAULT_IMAGE_TOKEN_COST,
            retries: 3,
            retry_backoff_ms: 500,
            timeout: 120.0,
            max_output_tokens: 4096,
            max_image_pixels: 0,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PromptConfig {
    pub variant: PromptVariant,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RendererKind {
    #[default]
    Command,
    Stub,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RendererConfig {
    pub backend: RendererKind,
    pub command_template: String,
    /// Seconds.
    pub timeout: f64,
    pub stub_dir: Option<PathBuf>,
    pub max_concurrency: usize,
}

impl Default for RendererConfig {
    fn default() -> Self {
        Self {
            backend: RendererKind::Command,
            command_template: DEFAULT_COMMAND_TEMPLATE.into(),
            timeout: 30.0,
            stub_dir: None,
            max_concurrency: 2,
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EmbedderKind {
    HttpEndpoint,
    #[default]
    Stub,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EmbedderConfig {
    pub backend: EmbedderKind,
    pub url: Option<String>,
    pub stub_dir: Option<PathBuf>,
    /// Seconds.
    pub timeout: f64,
}

impl Default for EmbedderConfig {
    fn default() -> Self {
        Self { backend: EmbedderKind::Stub, url: None, stub_dir: None, timeout: 60.0 }
    }
}

fn positive_secs(name: &str, v: f64) -> Result<Duration, ConfigError> {
    if v.is_finite() && v > 0.0 {
        Ok(Duration::from_secs_f64(v))
    } else {
        Err(ConfigError::Invalid(format!("{name} must be a positive number of seconds, got {v}")))
    }
}

impl PipelineConfig {
    pub fn from_toml_str(text: &str) -> Result<Self, ConfigError> {
        let cfg: Self = toml::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, ConfigError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|source| ConfigError::Io { path: path.to_path_buf(), source })?;
        let mut cfg = Self::from_toml_str(&text)?;
        if let Some(base) = path.parent() {
            cfg.resolve_paths(base);
        }
        Ok(cfg)
    }

    /// Makes every relative path absolute against `base`.
    pub fn resolve_paths(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        fix(&mut self.output_dir);
        for p in [
            &mut self.ocr.regions_path,
            &mut self.client.cache_dir,
            &mut self.client.mock_dir,
            &mut self.renderer.stub_dir,
            &mut self.embedder.stub_dir,
        ]
        .into_iter()
        .flatten()
        {
            fix(p);
        }
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        self.divider.validate()?;
        if self.client.max_concurrency == 0 || self.renderer.max_concurrency == 0 {
            return Err(ConfigError::Invalid("max_concurrency must be at least 1".into()));
        }
        positive_secs("client.timeout", self.client.timeout)?;
        positive_secs("renderer.timeout", self.renderer.timeout)?;
        positive_secs("embedder.timeout", self.embedder.timeout)?;
        match self.renderer.backend {
            RendererKind::Command => {
                validate_template(&self.renderer.command_template).map_err(|e| ConfigError::Invalid(e.to_string()))?
            }
            RendererKind::Stub if self.renderer.stub_dir.is_none() => {
                return Err(ConfigError::Invalid("renderer.backend = \"stub\" needs renderer.stub_dir".into()));
            }
            RendererKind::Stub => {}
        }
        if self.embedder.backend == EmbedderKind::HttpEndpoint && self.embedder.url.is_none() {
            return Err(ConfigError::Invalid("embedder.backend = \"http-endpoint\" needs embedder.url".into()));
        }
        Ok(())
    }

    pub fn synthesis_options(&self) -> SynthesisOptions {
        SynthesisOptions {
            model: self.client.model.clone(),
            max_output_tokens: self.client.max_output_tokens,
            variant: self.prompt.variant,
            max_image_pixels: self.client.max_image_pixels,
        }
    }

    pub fn assembly_options(&self) -> AssemblyOptions {
        AssemblyOptions {
            model: self.client.model.clone(),
            max_output_tokens: self.client.max_output_tokens,
            max_image_pixels: self.client.max_image_pixels,
            context_budget: self.client.context_budget,
            image_token_cost: self.client.image_token_cost,
        }
    }

    pub fn build_client(&self) -> Result<ChatClient, ConfigError> {
        let c = &self.client;
        let backend: Box<dyn crate::client::ChatBackend> = match c.backend {
            ChatBackendKind::Mock => Box::new(MockBackend::new(c.mock_dir.clone())),
            ChatBackendKind::Openai => {
                let key = std::env::var(&c.api_key_env).ok().filter(|k| !k.is_empty());
                if key.is_none() {
                    log::warn!("{} is not set; sending requests without an API key", c.api_key_env);
                }
                Box::new(OpenAiBackend::new(&c.base_url, key, positive_secs("client.timeout", c.timeout)?))
            }
        };
        let mut client = ChatClient::new(backend)
            .with_retries(c.retries, Duration::from_millis(c.retry_backoff_ms))
            .with_max_concurrency(c.max_concurrency);
        if let Some(dir) = &c.cache_dir {
            client = client.with_cache_dir(dir);
        }
        Ok(client)
    }

    pub fn build_renderer(&self) -> Result<Box<dyn Renderer>, ConfigError> {
        let r = &self.renderer;
        Ok(match r.backend {
            RendererKind::Command => Box::new(
                CommandRenderer::new(r.command_template.clone(), positive_secs("renderer.timeout", r.timeout)?)
                    .map_err(|e| ConfigError::Invalid(e.to_string()))?
                    .with_max_concurrency(r.max_concurrency),
            ),
            RendererKind::Stub => Box::new(StubRenderer::new(
                r.stub_dir.clone().ok_or_else(|| ConfigError::Invalid("renderer.stub_dir is required".into()))?,
            )),
        })
    }

    pub fn build_embedder(&self) -> Result<Box<dyn Embedder>, ConfigError> {
        let e = &self.embedder;
        Ok(match e.backend {
            EmbedderKind::HttpEndpoint => Box::new(HttpEmbedder::new(
                e.url.as_deref().ok_or_else(|| ConfigError::Invalid("embedder.url is required".into()))?,
                positive_secs("embedder.timeout", e.timeout)?,
            )),
            EmbedderKind::Stub => Box::new(StubEmbedder::new(e.stub_dir.clone())),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_file_gives_defaults() {
        let cfg = PipelineConfig::from_toml_str("").unwrap();
        assert_eq!(cfg, PipelineConfig::default());
        assert_eq!(cfg.seed, 2026);
        assert_eq!(cfg.divider.grid_interval, 5);
        assert_eq!(cfg.client.max_concurrency, 4);
        assert_eq!(cfg.renderer.max_concurrency, 2);
        assert_eq!(cfg.client.image_token_cost, 1100);
    }

    #[test]
    fn sections_parse() {
        let cfg = PipelineConfig::from_toml_str(
            r#"
            seed = 7
            output_dir = "out"
            [divider]
            min_line_distance = 40
            [client]
            backend = "openai"
            context_budget = 0
            [prompt]
            variant = "simplified"
            [renderer]
            backend = "stub"
            stub_dir = "shots"
            [embedder]
            backend = "http-endpoint"
            url = "http://localhost:8000"
            "#,
        )
        .unwrap();
        assert_eq!(cfg.seed, 7);
        assert_eq!(cfg.divider.min_line_distance, 40);
        assert_eq!(cfg.client.backend, ChatBackendKind::Openai);
        assert_eq!(cfg.prompt.variant, PromptVariant::Simplified);
        assert_eq!(cfg.renderer.backend, RendererKind::Stub);
        assert_eq!(cfg.embedder.backend, EmbedderKind::HttpEndpoint);
    }

    #[test]
    fn unknown_keys_rejected() {
        assert!(matches!(PipelineConfig::from_toml_str("[client]\nmodle = \"x\""), Err(ConfigError::Parse(_))));
        assert!(PipelineConfig::from_toml_str("colour = 1").is_err());
        assert!(PipelineConfig::from_toml_str("[gpu]\nn = 1").is_err());
    }

    #[test]
    fn invalid_values_rejected() {
        let bad = [
            "[renderer]\ncommand_template = \"chromium {html} {width} {height}\"",
            "[renderer]\nbackend = \"stub\"",
            "[embedder]\nbackend = \"http-endpoint\"",
            "[client]\nmax_concurrency = 0",
            "[renderer]\ntimeout = 0",
            "[divider]\ngrid_interval = 0",
        ];
        for text in bad {
            assert!(matches!(PipelineConfig::from_toml_str(text), Err(ConfigError::Invalid(_))), "{text}");
        }
    }

    #[test]
    fn relative_paths_follow_the_config_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("pipeline.toml");
        std::fs::write(&path, "output_dir = \"runs\"\n[client]\ncache_dir = \"/abs/cache\"\nmock_dir = \"mock\"").unwrap();
        let cfg = PipelineConfig::load(&path).unwrap();
        assert_eq!(cfg.output_dir, dir.path().join("runs"));
        assert_eq!(cfg.client.cache_dir, Some(PathBuf::from("/abs/cache")));
        assert_eq!(cfg.client.mock_dir, Some(dir.path().join("mock")));
        assert!(matches!(PipelineConfig::load(dir.path().join("absent.toml")), Err(ConfigError::Io { .. })));
    }

    #[test]
    fn builders_respect_backends() {
        let mut cfg = PipelineConfig::default();
        assert_eq!(cfg.build_client().unwrap().backend_name(), "mock");
        assert_eq!(cfg.build_renderer().unwrap().name(), "command");
        cfg.renderer.backend = RendererKind::Stub;
        cfg.renderer.stub_dir = Some("x".into());
        assert_eq!(cfg.build_renderer().unwrap().name(), "stub");
        assert!(cfg.build_embedder().is_ok());
    }
}
