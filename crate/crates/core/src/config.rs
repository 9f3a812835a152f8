//! Engine configuration.
//!
//! Values come from four layers, highest first: command-line flags,
//! `MHQA_*` environment variables, a flat TOML file of `key = value` pairs,
//! and built-in defaults. Every layer uses the same key names; the
//! environment variable for `k_info` is `MHQA_K_INFO`. The API key is read
//! from `MHQA_API_KEY` only and never stored here.

use std::collections::BTreeMap;
use std::path::PathBuf;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::informativeness::Granularity;

pub const ENV_PREFIX: &str = "MHQA_";
pub const API_KEY_ENV: &str = "MHQA_API_KEY";

#[derive(Debug, Error, PartialEq)]
pub enum ConfigError {
    #[error("unknown configuration key `{0}`")]
    UnknownKey(String),
    #[error("invalid value {value:?} for `{key}`: {reason}")]
    InvalidValue { key: String, value: String, reason: String },
    #[error("configuration file: {0}")]
    File(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GeneratorMode {
    Live,
    Stub,
}

impl FromStr for GeneratorMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "live" => Ok(Self::Live),
            "stub" => Ok(Self::Stub),
            other => Err(format!("expected live|stub, got `{other}`")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Config {
    pub k_info: usize,
    pub k_sim: usize,
    pub chunk_window: usize,
    pub chunk_stride: usize,
    pub max_steps: usize,
    pub granularity: Granularity,
    /// Character budget for the context handed to the answer prompt.
    pub context_char_budget: Option<usize>,
    pub generator_mode: GeneratorMode,
    pub endpoint: String,
    pub embedding_endpoint: Option<String>,
    pub decomposer_model: String,
    pub answer_model: String,
    pub embedding_model: String,
    pub temperature: f64,
    pub workers: usize,
    pub stub_script: Option<PathBuf>,
    pub prompts: Option<PathBuf>,
}

impl Default for Config {
    fn default() -> Self {
        Self {
            k_info: 15,
            k_sim: 10,
            chunk_window: 3,
            chunk_stride: 2,
            max_steps: 6,
            granularity: Granularity::Chunk,
            context_char_budget: None,
            generator_mode: GeneratorMode::Stub,
            endpoint: "http://127.0.0.1:8000/v1/chat/completions".into(),
            embedding_endpoint: None,
            decomposer_model: "llama-3.1-8b-decomposer".into(),
            answer_model: "gpt-4o-mini".into(),
            embedding_model: "sentence-transformers/all-MiniLM-L6-v2".into(),
            temperature: 0.0,
            workers: 1,
            stub_script: None,
            prompts: None,
        }
    }
}

pub const KEYS: [&str; 17] = [
    "k_info",
    "k_sim",
    "chunk_window",
    "chunk_stride",
    "max_steps",
    "granularity",
    "context_char_budget",
    "generator_mode",
    "endpoint",
    "embedding_endpoint",
    "decomposer_model",
    "answer_model",
    "embedding_model",
    "temperature",
    "workers",
    "stub_script",
    "prompts",
];

fn parse<T: FromStr>(key: &str, value: &str) -> Result<T, ConfigError>
where
    T::Err: std::fmt::Display,
{
    value.trim().parse().map_err(|e: T::Err| ConfigError::InvalidValue {
        key: key.to_string(),
        value: value.to_string(),
        reason: e.to_string(),
    })
}

fn optional(value: &str) -> Option<&str> {
    let v = value.trim();
    (!v.is_empty() && v != "none").then_some(v)
}

impl Config {
    /// Applies one `key = value` setting.
    pub fn set(&mut self, key: &str, value: &str) -> Result<(), ConfigError> {
        match key {
            "k_info" => self.k_info = parse(key, value)?,
            "k_sim" => self.k_sim = parse(key, value)?,
            "chunk_window" => self.chunk_window = parse(key, value)?,
            "chunk_stride" => self.chunk_stride = parse(key, value)?,
            "max_steps" => self.max_steps = parse(key, value)?,
            "granularity" => self.granularity = parse(key, value)?,
            "context_char_budget" => self.context_char_budget = optional(value).map(|v| parse(key, v)).transpose()?,
            "generator_mode" => self.generator_mode = parse(key, value)?,
            "endpoint" => self.endpoint = value.trim().to_string(),
            "embedding_endpoint" => self.embedding_endpoint = optional(value).map(str::to_string),
            "decomposer_model" => self.decomposer_model = value.trim().to_string(),
            "answer_model" => self.answer_model = value.trim().to_string(),
            "embedding_model" => self.embedding_model = value.trim().to_string(),
            "temperature" => self.temperature = parse(key, value)?,
            "workers" => self.workers = parse(key, value)?,
            "stub_script" => self.stub_script = optional(value).map(PathBuf::from),
            "prompts" => self.prompts = optional(value).map(PathBuf::from),
            other => return Err(ConfigError::UnknownKey(other.to_string())),
        }
        Ok(())
    }

    /// Layers file, environment and flags over the defaults, then validates.
    pub fn resolve<E>(file: Option<&str>, env: E, flags: &[(String, String)]) -> Result<Self, ConfigError>
    where
        E: Fn(&str) -> Option<String>,
    {
        let mut config = Self::default();
        if let Some(source) = file {
            for (key, value) in parse_file(source)? {
                config.set(&key, &value)?;
            }
        }
        for key in KEYS {
            let var = format!("{ENV_PREFIX}{}", key.to_uppercase());
            if let Some(value) = env(&var) {
                config.set(key, &value)?;
            }
        }
        for (key, value) in flags {
            config.set(key, value)?;
        }
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let invalid = |key: &str, value: String, reason: &str| ConfigError::InvalidValue {
            key: key.to_string(),
            value,
            reason: reason.to_string(),
        };
        if self.chunk_window == 0 || self.chunk_stride == 0 || self.chunk_stride > self.chunk_window {
            return Err(invalid(
                "chunk_stride",
                self.chunk_stride.to_string(),
                "need 1 <= chunk_stride <= chunk_window",
            ));
        }
        if self.k_info == 0 && self.k_sim == 0 {
            return Err(invalid("k_info", "0".into(), "k_info and k_sim cannot both be 0"));
        }
        if self.max_steps == 0 {
            return Err(invalid("max_steps", "0".into(), "must be at least 1"));
        }
        if self.workers == 0 {
            return Err(invalid("workers", "0".into(), "must be at least 1"));
        }
        if self.temperature.is_nan() || self.temperature < 0.0 {
            return Err(invalid("temperature", self.temperature.to_string(), "must be >= 0"));
        }
        Ok(())
    }
}

/// Reads a flat TOML table. Nested tables are rejected.
fn parse_file(source: &str) -> Result<BTreeMap<String, String>, ConfigError> {
    let table: toml::Table = toml::from_str(source).map_err(|e| ConfigError::File(e.to_string()))?;
    table
        .into_iter()
        .map(|(key, value)| {
            let text = match value {
                toml::Value::String(s) => s,
                toml::Value::Integer(i) => i.to_string(),
                toml::Value::Float(f) => f.to_string(),
                toml::Value::Boolean(b) => b.to_string(),
                other => {
                    return Err(ConfigError::File(format!(
                        "`{key}` must be a scalar, found {}",
                        other.type_str()
                    )))
                }
            };
            Ok((key, text))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn no_env(_: &str) -> Option<String> {
        None
    }

    #[test]
    fn defaults() {
        let c = Config::resolve(None, no_env, &[]).unwrap();
        assert_eq!((c.k_info, c.k_sim), (15, 10));
        assert_eq!((c.chunk_window, c.chunk_stride), (3, 2));
        assert_eq!(c.max_steps, 6);
        assert_eq!(c.temperature, 0.0);
        assert_eq!(c.generator_mode, GeneratorMode::Stub);
    }

    #[test]
    fn precedence_matrix() {
        // every subset of {file, env, flag} setting k_info to a distinct value
        for mask in 0u8..8 {
            let file = (mask & 1 != 0).then_some("k_info = 21\n");
            let env = move |var: &str| (mask & 2 != 0 && var == "MHQA_K_INFO").then(|| "22".to_string());
            let flags: Vec<(String, String)> = if mask & 4 != 0 {
                vec![("k_info".into(), "23".into())]
            } else {
                vec![]
            };
            let expected = if mask & 4 != 0 {
                23
            } else if mask & 2 != 0 {
                22
            } else if mask & 1 != 0 {
                21
            } else {
                15
            };
            let c = Config::resolve(file, env, &flags).unwrap();
            assert_eq!(c.k_info, expected, "mask {mask:03b}");
        }
    }

    #[test]
    fn file_types_and_errors() {
        let c = Config::resolve(
            Some("temperature = 0.5\ngenerator_mode = \"live\"\ncontext_char_budget = 4000\n"),
            no_env,
            &[],
        )
        .unwrap();
        assert_eq!(c.temperature, 0.5);
        assert_eq!(c.generator_mode, GeneratorMode::Live);
        assert_eq!(c.context_char_budget, Some(4000));
        assert!(matches!(
            Config::resolve(Some("bogus = 1"), no_env, &[]),
            Err(ConfigError::UnknownKey(_))
        ));
        assert!(matches!(
            Config::resolve(Some("[nested]\nk = 1"), no_env, &[]),
            Err(ConfigError::File(_))
        ));
        assert!(Config::resolve(None, no_env, &[("k_sim".into(), "ten".into())]).is_err());
        assert!(Config::resolve(None, no_env, &[("chunk_stride".into(), "4".into())]).is_err());
    }
}
