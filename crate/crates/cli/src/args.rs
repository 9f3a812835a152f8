use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

/// Multi-hop question answering over an entity-informativeness index.
///
/// Settings resolve as: command-line flag, then MHQA_<KEY> environment
/// variable, then the --config file, then the built-in default. The API key
/// for live mode is read from MHQA_API_KEY.
#[derive(Debug, Parser)]
#[command(name = "mhqa", version)]
pub struct Cli {
    #[command(flatten)]
    pub settings: SettingFlags,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct SettingFlags {
    /// Flat TOML file of `key = value` settings.
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,

    /// Override any setting, e.g. `--set context_char_budget=4000`. Repeatable.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    pub overrides: Vec<String>,

    #[arg(long, global = true, value_name = "N")]
    pub k_info: Option<usize>,
    #[arg(long, global = true, value_name = "N")]
    pub k_sim: Option<usize>,
    #[arg(long, global = true, value_name = "N")]
    pub chunk_window: Option<usize>,
    #[arg(long, global = true, value_name = "N")]
    pub chunk_stride: Option<usize>,
    #[arg(long, global = true, value_name = "N")]
    pub max_steps: Option<usize>,
    /// chunk | document
    #[arg(long, global = true)]
    pub granularity: Option<String>,
    /// live | stub
    #[arg(long, global = true, value_name = "MODE")]
    pub generator_mode: Option<String>,
    #[arg(long, global = true, value_name = "FILE")]
    pub stub_script: Option<PathBuf>,
    #[arg(long, global = true, value_name = "FILE")]
    pub prompts: Option<PathBuf>,
    #[arg(long, global = true, value_name = "URL")]
    pub endpoint: Option<String>,
    #[arg(long, global = true, value_name = "URL")]
    pub embedding_endpoint: Option<String>,
    #[arg(long, global = true)]
    pub temperature: Option<f64>,
    #[arg(long, global = true, value_name = "N")]
    pub workers: Option<usize>,
}

impl SettingFlags {
    /// The flag layer as `(key, value)` pairs, `--set` entries last.
    pub fn pairs(&self) -> Result<Vec<(String, String)>, String> {
        let mut out = Vec::new();
        let mut push = |key: &str, value: Option<String>| {
            if let Some(v) = value {
                out.push((key.to_string(), v));
            }
        };
        push("k_info", self.k_info.map(|v| v.to_string()));
        push("k_sim", self.k_sim.map(|v| v.to_string()));
        push("chunk_window", self.chunk_window.map(|v| v.to_string()));
        push("chunk_stride", self.chunk_stride.map(|v| v.to_string()));
        push("max_steps", self.max_steps.map(|v| v.to_string()));
        push("granularity", self.granularity.clone());
        push("generator_mode", self.generator_mode.clone());
        push(
            "stub_script",
            self.stub_script.as_ref().map(|p| p.display().to_string()),
        );
        push("prompts", self.prompts.as_ref().map(|p| p.display().to_string()));
        push("endpoint", self.endpoint.clone());
        push("embedding_endpoint", self.embedding_endpoint.clone());
        push("temperature", self.temperature.map(|v| v.to_string()));
        push("workers", self.workers.map(|v| v.to_string()));
        for item in &self.overrides {
            let (key, value) = item
                .split_once('=')
                .ok_or_else(|| format!("--set expects KEY=VALUE, got `{item}`"))?;
            out.push((key.trim().to_string(), value.to_string()));
        }
        Ok(out)
    }
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Load documents, trees and entity spans into an index directory.
    Ingest {
        #[arg(long, value_name = "FILE")]
        docs: PathBuf,
        #[arg(long, value_name = "FILE")]
        trees: PathBuf,
        #[arg(long, value_name = "FILE")]
        entities: PathBuf,
        /// Chunk embeddings (`{"chunk_id", "vector"}` lines).
        #[arg(long, value_name = "FILE")]
        embeddings: Option<PathBuf>,
        #[arg(long, value_name = "DIR")]
        out: PathBuf,
    },
    /// Attach chunk embeddings to an index and print index statistics.
    Index {
        #[arg(long, value_name = "DIR")]
        index: PathBuf,
        #[arg(long, value_name = "FILE")]
        embeddings: Option<PathBuf>,
    },
    /// Print every chunk's informativeness table as JSONL.
    Score {
        #[arg(long, value_name = "DIR")]
        index: PathBuf,
        #[arg(long, value_name = "FILE")]
        out: Option<PathBuf>,
    },
    /// Dual-path retrieval for queries from a queries file.
    Retrieve {
        #[arg(long, value_name = "DIR")]
        index: PathBuf,
        #[arg(long, value_name = "FILE")]
        queries: PathBuf,
        /// Only this query; otherwise every query, one JSON object per line.
        #[arg(long)]
        qid: Option<String>,
    },
    /// Answer one question and print its reasoning trace.
    Answer {
        #[arg(long, value_name = "DIR")]
        index: PathBuf,
        #[arg(long)]
        question: String,
        #[arg(long, default_value = "q")]
        qid: String,
        /// Gold answer, recorded in the trace.
        #[arg(long)]
        gold: Option<String>,
    },
    /// Run a questions file and write a scored report.
    Eval {
        #[arg(long, value_name = "DIR")]
        index: PathBuf,
        #[arg(long, value_name = "FILE")]
        questions: PathBuf,
        #[arg(long, value_name = "FILE")]
        out: Option<PathBuf>,
    },
    /// Score predictions against gold answers (both `{"qid", "answer"}` JSONL).
    ScoreAnswers {
        #[arg(long, value_name = "FILE")]
        pred: PathBuf,
        #[arg(long, value_name = "FILE")]
        gold: PathBuf,
    },
    /// Split candidate decompositions by whether they reach the gold answer.
    FilterData {
        #[arg(long, value_name = "DIR")]
        index: PathBuf,
        #[arg(long, value_name = "FILE")]
        candidates: PathBuf,
        /// Writes consistent.jsonl and inconsistent.jsonl here.
        #[arg(long, value_name = "DIR")]
        out: PathBuf,
    },
}
