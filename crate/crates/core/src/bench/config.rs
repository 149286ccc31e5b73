//! TOML configuration of a benchmark run.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::evaluate::ScoreOptions;
use super::extract::{Extractor, DEFAULT_PREAMBLES};
use super::items::TaskItem;
use super::mock::mock_model;
use super::run::{ResponseCache, RunOptions};
use super::BenchError;
use crate::client::{ChatClient, ChatClientConfig, HttpChatClient, HttpEmbeddingProvider, RetryPolicy};
use crate::formats::EntityKeyAliases;
use crate::metrics::{EmbeddingProvider, MockEmbeddingProvider};
use crate::prompt::TemplateSet;
use crate::textnorm::PunctInventory;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum EmbeddingConfig {
    Mock {
        #[serde(default = "default_dims")]
        dims: usize,
        /// Optional `token<TAB>floats` table; other tokens get hashed vectors.
        #[serde(default)]
        table: Option<PathBuf>,
    },
    Http {
        endpoint: String,
        model: String,
        #[serde(default)]
        api_key_env: Option<String>,
        #[serde(default = "default_timeout")]
        timeout_secs: u64,
    },
}

fn default_dims() -> usize {
    MockEmbeddingProvider::DEFAULT_DIMS
}

fn default_timeout() -> u64 {
    120
}

fn default_noise() -> f64 {
    0.2
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ModelKind {
    /// Answers with the gold, corrupted at rate `noise`.
    Mock {
        #[serde(default = "default_noise")]
        noise: f64,
    },
    Http {
        endpoint: String,
        /// Name sent to the endpoint; defaults to the model's `name`.
        #[serde(default)]
        model: Option<String>,
        #[serde(default)]
        api_key_env: Option<String>,
        #[serde(default = "default_timeout")]
        timeout_secs: u64,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub name: String,
    #[serde(flatten)]
    pub kind: ModelKind,
}

impl ModelConfig {
    /// Parses `mock`, `mock:<noise>` or `<name>=mock[:<noise>]` shorthands.
    pub fn parse_mock(spec: &str) -> Result<Self, String> {
        let (name, rest) = match spec.split_once('=') {
            Some((n, r)) => (n.to_owned(), r),
            None => (spec.to_owned(), spec),
        };
        let noise = match rest.split_once(':') {
            Some(("mock", n)) => n.parse::<f64>().map_err(|e| format!("bad noise in {spec:?}: {e}"))?,
            None if rest == "mock" => default_noise(),
            _ => return Err(format!("not a mock model spec: {spec:?}")),
        };
        if !(0.0..=1.0).contains(&noise) {
            return Err(format!("noise must be within [0, 1], got {noise}"));
        }
        Ok(Self {
            name,
            kind: ModelKind::Mock { noise },
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BenchConfig {
    pub seed: u64,
    pub parallelism: usize,
    pub cache_dir: Option<PathBuf>,
    pub punct_inventory: Option<PathBuf>,
    pub entity_aliases: Option<PathBuf>,
    pub templates_dir: Option<PathBuf>,
    pub temperature: f64,
    pub max_tokens: u32,
    pub retry: RetryPolicy,
    pub scoring: ScoreOptions,
    pub embedding: Option<EmbeddingConfig>,
    pub models: Vec<ModelConfig>,
}

impl Default for BenchConfig {
    fn default() -> Self {
        let c = ChatClientConfig::default();
        Self {
            seed: 0,
            parallelism: c.parallelism,
            cache_dir: None,
            punct_inventory: None,
            entity_aliases: None,
            templates_dir: None,
            temperature: c.temperature,
            max_tokens: c.max_tokens,
            retry: c.retry,
            scoring: ScoreOptions::default(),
            embedding: Some(EmbeddingConfig::Mock {
                dims: default_dims(),
                table: None,
            }),
            models: Vec::new(),
        }
    }
}

/// Tables and providers a run needs, loaded once.
pub struct Resources {
    pub extractor: Extractor,
    pub templates: TemplateSet,
    pub embedder: Option<Box<dyn EmbeddingProvider>>,
}

impl BenchConfig {
    pub fn from_toml(text: &str) -> Result<Self, BenchError> {
        let c: Self = toml::from_str(text).map_err(|e| BenchError::Config(e.to_string()))?;
        c.validate()?;
        Ok(c)
    }

    pub fn load(path: &Path) -> Result<Self, BenchError> {
        let text = std::fs::read_to_string(path).map_err(|e| BenchError::io(path, e))?;
        Self::from_toml(&text).map_err(|e| match e {
            BenchError::Config(m) => BenchError::Config(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    pub fn validate(&self) -> Result<(), BenchError> {
        let client = ChatClientConfig {
            parallelism: self.parallelism,
            retry: self.retry.clone(),
            ..Default::default()
        };
        client.validate().map_err(|e| BenchError::Config(e.to_string()))?;
        let mut names = std::collections::HashSet::new();
        for m in &self.models {
            if m.name.trim().is_empty() {
                return Err(BenchError::Config("model with an empty name".into()));
            }
            if !names.insert(&m.name) {
                return Err(BenchError::Config(format!("model {:?} listed twice", m.name)));
            }
            if let ModelKind::Mock { noise } = m.kind {
                if !(0.0..=1.0).contains(&noise) {
                    return Err(BenchError::Config(format!(
                        "model {:?}: noise must be within [0, 1]",
                        m.name
                    )));
                }
            }
        }
        Ok(())
    }

    /// The settings that affect scores, recorded in every result file.
    /// Operational fields (parallelism, cache location, the model list)
    /// are left out so reruns under different conditions compare equal.
    pub fn snapshot(&self) -> serde_json::Value {
        let mut v = serde_json::to_value(self).expect("configs serialize");
        if let Some(obj) = v.as_object_mut() {
            for k in ["parallelism", "cache_dir", "models"] {
                obj.remove(k);
            }
        }
        v
    }

    pub fn resources(&self) -> Result<Resources, BenchError> {
        let inventory = match &self.punct_inventory {
            Some(p) => PunctInventory::load(p).map_err(|e| BenchError::Config(format!("{}: {e}", p.display())))?,
            None => PunctInventory::builtin().clone(),
        };
        let aliases = match &self.entity_aliases {
            Some(p) => {
                let text = std::fs::read_to_string(p).map_err(|e| BenchError::io(p, e))?;
                EntityKeyAliases::parse(&text)
                    .map_err(|e| BenchError::Config(format!("{}: {e}", p.display())))?
            }
            None => EntityKeyAliases::default(),
        };
        let extractor = Extractor::new(DEFAULT_PREAMBLES, aliases, inventory)
            .map_err(|e| BenchError::Config(e.to_string()))?;
        let templates = match &self.templates_dir {
            Some(d) => TemplateSet::with_overrides(d).map_err(|e| BenchError::Config(e.to_string()))?,
            None => TemplateSet::builtin(),
        };
        let embedder: Option<Box<dyn EmbeddingProvider>> = match &self.embedding {
            None => None,
            Some(EmbeddingConfig::Mock { dims, table: None }) => {
                Some(Box::new(MockEmbeddingProvider::new(*dims)))
            }
            Some(EmbeddingConfig::Mock { table: Some(p), .. }) => Some(Box::new(
                MockEmbeddingProvider::load(p).map_err(|e| BenchError::Config(e.to_string()))?,
            )),
            Some(EmbeddingConfig::Http {
                endpoint,
                model,
                api_key_env,
                timeout_secs,
            }) => Some(Box::new(
                HttpEmbeddingProvider::new(
                    endpoint.clone(),
                    model.clone(),
                    api_key_env.as_deref(),
                    self.retry.clone(),
                    *timeout_secs,
                )
                .map_err(|e| BenchError::Config(e.to_string()))?,
            )),
        };
        Ok(Resources {
            extractor,
            templates,
            embedder,
        })
    }

    pub fn run_options(&self, templates: TemplateSet) -> Result<RunOptions, BenchError> {
        Ok(RunOptions {
            parallelism: self.parallelism,
            retry: self.retry.clone(),
            temperature: self.temperature,
            max_tokens: self.max_tokens,
            cache: self.cache_dir.as_ref().map(ResponseCache::open).transpose()?,
            templates,
        })
    }

    /// Mock models need the items to know their answers.
    pub fn client(
        &self,
        model: &ModelConfig,
        items: &[TaskItem],
        templates: &TemplateSet,
    ) -> Result<Box<dyn ChatClient>, BenchError> {
        Ok(match &model.kind {
            ModelKind::Mock { noise } => {
                Box::new(mock_model(&model.name, items, templates, *noise, self.seed))
            }
            ModelKind::Http {
                endpoint,
                model: remote,
                api_key_env,
                timeout_secs,
            } => Box::new(
                HttpChatClient::new(ChatClientConfig {
                    endpoint: endpoint.clone(),
                    model: remote.clone().unwrap_or_else(|| model.name.clone()),
                    api_key_env: api_key_env.clone(),
                    temperature: self.temperature,
                    max_tokens: self.max_tokens,
                    parallelism: self.parallelism,
                    timeout_secs: *timeout_secs,
                    retry: self.retry.clone(),
                })
                .map_err(|e| BenchError::Config(format!("model {:?}: {e}", model.name)))?,
            ),
        })
    }
}
