use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, ValueEnum};
use serde::{Deserialize, Serialize};

use factcurve::gateway::{Gateway, HttpTransport, CACHE_DIR_ENV};
use factcurve::ingestion::FilterScope;
use factcurve::report::ReportError;

pub const DEFAULT_CACHE_DIR: &str = "factcurve-cache";
pub const DEFAULT_ENDPOINT: &str = "https://api.openai.com/v1/chat/completions";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Replay,
    Record,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum InputFormat {
    Annotated,
    Factscore,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Scope {
    Opening,
    FullText,
}

/// Settings shared by every subcommand. Each can come from the config file
/// or a flag; flags win.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize, Args)]
#[serde(default, deny_unknown_fields)]
pub struct Settings {
    /// Model used for generation, decomposition, QA derivation and judging
    #[arg(long, global = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub model_id: Option<String>,
    /// replay: answer from the cache only; record: call the provider on a miss
    #[arg(long, global = true, value_enum)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mode: Option<Mode>,
    /// Response cache directory (default: $FACTCURVE_CACHE_DIR or ./factcurve-cache)
    #[arg(long, global = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub cache_dir: Option<PathBuf>,
    /// OpenAI-compatible chat completions URL used in record mode
    #[arg(long, global = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub endpoint: Option<String>,
    #[arg(long, global = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub max_in_flight: Option<usize>,
    #[arg(long, global = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub max_tokens: Option<u32>,
    /// Sampling temperature for biography generation
    #[arg(long, global = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub temperature: Option<f64>,
    /// Temperature of the single retry after an unparseable QA derivation
    #[arg(long, global = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub retry_temperature: Option<f64>,
    /// Chunks retrieved per entity for RAG prompts
    #[arg(long, global = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub top_k: Option<usize>,
    #[arg(long, global = true, value_enum)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub input_format: Option<InputFormat>,
    #[arg(long, global = true, value_enum)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub filter_scope: Option<Scope>,
    /// Replaces the default refusal phrases (repeatable)
    #[arg(long = "filter-phrase", global = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub filter_phrases: Option<Vec<String>>,
}

impl Settings {
    pub fn load(path: &Path) -> Result<Settings, ReportError> {
        let raw = fs::read_to_string(path).map_err(|e| ReportError::Config(format!("{}: {e}", path.display())))?;
        serde_json::from_str(&raw).map_err(|e| ReportError::Config(format!("{}: {e}", path.display())))
    }

    /// `self` overridden field by field with every value set in `flags`.
    pub fn merged(self, flags: &Settings) -> Settings {
        let flags = flags.clone();
        Settings {
            model_id: flags.model_id.or(self.model_id),
            mode: flags.mode.or(self.mode),
            cache_dir: flags.cache_dir.or(self.cache_dir),
            endpoint: flags.endpoint.or(self.endpoint),
            max_in_flight: flags.max_in_flight.or(self.max_in_flight),
            max_tokens: flags.max_tokens.or(self.max_tokens),
            temperature: flags.temperature.or(self.temperature),
            retry_temperature: flags.retry_temperature.or(self.retry_temperature),
            top_k: flags.top_k.or(self.top_k),
            input_format: flags.input_format.or(self.input_format),
            filter_scope: flags.filter_scope.or(self.filter_scope),
            filter_phrases: flags.filter_phrases.or(self.filter_phrases),
        }
    }

    /// Fills every unset field with its default; the result is what the
    /// manifest records.
    pub fn resolved(self) -> Settings {
        Settings {
            model_id: self.model_id,
            mode: Some(self.mode.unwrap_or(Mode::Replay)),
            cache_dir: Some(self.cache_dir.unwrap_or_else(|| {
                std::env::var_os(CACHE_DIR_ENV)
                    .map(PathBuf::from)
                    .unwrap_or_else(|| PathBuf::from(DEFAULT_CACHE_DIR))
            })),
            endpoint: Some(self.endpoint.unwrap_or_else(|| DEFAULT_ENDPOINT.to_string())),
            max_in_flight: Some(self.max_in_flight.unwrap_or(8)),
            max_tokens: Some(self.max_tokens.unwrap_or(1024)),
            temperature: Some(self.temperature.unwrap_or(0.0)),
            retry_temperature: Some(self.retry_temperature.unwrap_or(0.7)),
            top_k: Some(self.top_k.unwrap_or(factcurve::rag::DEFAULT_TOP_K)),
            input_format: Some(self.input_format.unwrap_or(InputFormat::Annotated)),
            filter_scope: Some(self.filter_scope.unwrap_or(Scope::Opening)),
            filter_phrases: self.filter_phrases,
        }
    }

    pub fn validate(&self) -> Result<(), ReportError> {
        let bad = |m: &str| Err(ReportError::Config(m.to_string()));
        if self.max_in_flight == Some(0) {
            return bad("max_in_flight must be at least 1");
        }
        if self.top_k == Some(0) {
            return bad("top_k must be at least 1");
        }
        if self.max_tokens == Some(0) {
            return bad("max_tokens must be at least 1");
        }
        for t in [self.temperature, self.retry_temperature].into_iter().flatten() {
            if !(t.is_finite() && t >= 0.0) {
                return bad("temperatures must be finite and non-negative");
            }
        }
        Ok(())
    }

    pub fn scope(&self) -> FilterScope {
        match self.filter_scope {
            Some(Scope::FullText) => FilterScope::FullText,
            _ => FilterScope::Opening,
        }
    }

    pub fn gateway(&self) -> Result<Gateway, ReportError> {
        let dir = self.cache_dir.clone().unwrap_or_else(|| PathBuf::from(DEFAULT_CACHE_DIR));
        match self.mode.unwrap_or(Mode::Replay) {
            Mode::Replay => Ok(Gateway::replay(dir)),
            Mode::Record => {
                let transport = HttpTransport::from_env(self.endpoint.clone().unwrap_or_else(|| DEFAULT_ENDPOINT.into()))
                    .map_err(|e| ReportError::Config(e.to_string()))?;
                Ok(Gateway::record(dir, std::sync::Arc::new(transport)))
            }
        }
    }
}
