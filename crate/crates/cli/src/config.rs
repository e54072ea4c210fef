//! TOML configuration with defaults matching the reference setup.
//!
//! Every knob has a default, so a minimal config only names the corpus:
//!
//! ```toml
//! corpus = "corpus.jsonl"
//! store_dir = "store"
//! ```

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};

fn default_max_tokens() -> usize {
    gistrag_core::corpus::DEFAULT_MAX_TOKENS
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    /// JSONL corpus of documents to index.
    pub corpus: PathBuf,
    /// Directory holding the graph, embedding indexes, and checkpoints.
    pub store_dir: PathBuf,
    /// Passage budget for segmentation.
    #[serde(default = "default_max_tokens")]
    pub max_tokens: usize,
    #[serde(default)]
    pub provider: ProviderConfig,
    #[serde(default)]
    pub embedder: EmbedderConfig,
    #[serde(default)]
    pub diffusion: DiffusionConfig,
    #[serde(default)]
    pub rerank: RerankConfig,
    #[serde(default)]
    pub retrieval: RetrievalConfig,
    #[serde(default)]
    pub eval: EvalConfig,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProviderMode {
    /// Deterministic offline provider; no network.
    Mock,
    /// OpenAI-compatible chat endpoint.
    Http,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProviderConfig {
    pub mode: ProviderMode,
    /// Chat completions URL; required in http mode.
    #[serde(default)]
    pub endpoint: String,
    #[serde(default)]
    pub model: String,
    /// Environment variable the API key is read from (never the key itself).
    #[serde(default = "default_api_key_env")]
    pub api_key_env: String,
    /// Parallel in-flight extraction calls.
    #[serde(default = "default_concurrency")]
    pub concurrency: usize,
    #[serde(default = "default_timeout")]
    pub timeout_secs: u64,
}

fn default_api_key_env() -> String {
    "GISTRAG_API_KEY".into()
}

fn default_concurrency() -> usize {
    4
}

fn default_timeout() -> u64 {
    60
}

impl Default for ProviderConfig {
    fn default() -> Self {
        Self {
            mode: ProviderMode::Mock,
            endpoint: String::new(),
            model: String::new(),
            api_key_env: default_api_key_env(),
            concurrency: default_concurrency(),
            timeout_secs: default_timeout(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EmbedderMode {
    /// Deterministic feature-hashing embedder; no network.
    Hash,
    /// OpenAI-compatible embeddings endpoint.
    Http,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EmbedderConfig {
    pub mode: EmbedderMode,
    /// Vector width for the hash embedder (http mode discovers its own).
    #[serde(default = "default_dimension")]
    pub dimension: usize,
    /// Mix token bigrams into the hash features.
    #[serde(default = "default_true")]
    pub bigrams: bool,
    #[serde(default)]
    pub endpoint: String,
    #[serde(default)]
    pub model: String,
    #[serde(default = "default_api_key_env")]
    pub api_key_env: String,
    #[serde(default = "default_timeout")]
    pub timeout_secs: u64,
}

fn default_dimension() -> usize {
    gistrag_core::embed::DEFAULT_HASH_DIM
}

fn default_true() -> bool {
    true
}

impl Default for EmbedderConfig {
    fn default() -> Self {
        Self {
            mode: EmbedderMode::Hash,
            dimension: default_dimension(),
            bigrams: true,
            endpoint: String::new(),
            model: String::new(),
            api_key_env: default_api_key_env(),
            timeout_secs: default_timeout(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DiffusionConfig {
    pub k_facts: usize,
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
    pub tol: f64,
    pub max_iters: usize,
}

impl Default for DiffusionConfig {
    fn default() -> Self {
        let p = gistrag_core::DiffusionParams64::default();
        Self {
            k_facts: p.k_facts,
            alpha: p.alpha,
            beta: p.beta,
            gamma: p.gamma,
            tol: p.tol,
            max_iters: p.max_iters,
        }
    }
}

impl DiffusionConfig {
    pub fn to_params(&self) -> gistrag_core::DiffusionParams64 {
        gistrag_core::DiffusionParams64 {
            k_facts: self.k_facts,
            alpha: self.alpha,
            beta: self.beta,
            gamma: self.gamma,
            tol: self.tol,
            max_iters: self.max_iters,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RerankConfig {
    /// Blend weight on the structural channel.
    pub epsilon: f64,
    /// Min-max denominator guard.
    pub delta: f64,
    /// Dense pool size feeding the candidate set.
    pub n_dense: usize,
}

impl Default for RerankConfig {
    fn default() -> Self {
        Self {
            epsilon: gistrag_core::rerank::DEFAULT_EPSILON,
            delta: gistrag_core::rerank::DEFAULT_DELTA,
            n_dense: gistrag_core::rerank::DEFAULT_N_DENSE,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RetrievalConfig {
    /// Evidence pairs handed to the answerer.
    pub k_final: usize,
    /// Decomposition cap (also the merge fan-in).
    pub m_split: usize,
}

impl Default for RetrievalConfig {
    fn default() -> Self {
        Self { k_final: 5, m_split: 2 }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvalConfig {
    /// Recall cutoffs to report.
    pub recall_ks: Vec<usize>,
    /// fraction (default) or any_hit.
    pub recall_mode: gistrag_core::eval::RecallMode,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self {
            recall_ks: vec![5, 10, 50, 100, 200],
            recall_mode: gistrag_core::eval::RecallMode::Fraction,
        }
    }
}

impl Config {
    /// Reads and validates a config file; relative paths inside it resolve
    /// against the file's own directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("cannot read config `{}`", path.display()))?;
        let mut config: Config = toml::from_str(&text)
            .with_context(|| format!("cannot parse config `{}`", path.display()))?;
        if let Some(base) = path.parent() {
            if config.corpus.is_relative() {
                config.corpus = base.join(&config.corpus);
            }
            if config.store_dir.is_relative() {
                config.store_dir = base.join(&config.store_dir);
            }
        }
        config.validate()?;
        Ok(config)
    }

    /// Rejects out-of-range knobs with messages naming the field.
    pub fn validate(&self) -> Result<()> {
        if self.max_tokens < gistrag_core::corpus::MIN_MAX_TOKENS {
            bail!(
                "max_tokens = {} is below the minimum of {}",
                self.max_tokens,
                gistrag_core::corpus::MIN_MAX_TOKENS
            );
        }
        if self.provider.mode == ProviderMode::Http && self.provider.endpoint.is_empty() {
            bail!("provider.mode = \"http\" requires provider.endpoint");
        }
        if self.embedder.mode == EmbedderMode::Http && self.embedder.endpoint.is_empty() {
            bail!("embedder.mode = \"http\" requires embedder.endpoint");
        }
        if self.embedder.mode == EmbedderMode::Hash && self.embedder.dimension == 0 {
            bail!("embedder.dimension must be at least 1");
        }
        if self.provider.concurrency == 0 {
            bail!("provider.concurrency must be at least 1");
        }
        self.diffusion
            .to_params()
            .validate()
            .context("invalid [diffusion] section")?;
        validate_rerank(self.rerank.epsilon, self.rerank.delta, self.rerank.n_dense)?;
        if self.retrieval.k_final == 0 {
            bail!("retrieval.k_final must be at least 1");
        }
        if self.retrieval.m_split < 2 {
            bail!("retrieval.m_split must be at least 2");
        }
        if self.eval.recall_ks.is_empty() {
            bail!("eval.recall_ks must name at least one cutoff");
        }
        if self.eval.recall_ks.iter().any(|&k| k == 0) {
            bail!("eval.recall_ks entries must be positive");
        }
        Ok(())
    }
}

/// Shared range checks for fusion knobs (the sweep revalidates overrides).
pub fn validate_rerank(epsilon: f64, delta: f64, n_dense: usize) -> Result<()> {
    if !(0.0..=1.0).contains(&epsilon) {
        bail!("rerank.epsilon = {epsilon} must lie in [0, 1]");
    }
    if !(delta > 0.0) {
        bail!("rerank.delta = {delta} must be positive");
    }
    if n_dense == 0 {
        bail!("rerank.n_dense must be at least 1");
    }
    Ok(())
}
