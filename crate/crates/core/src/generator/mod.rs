//! Text-generation backends and the typed calls the orchestrator makes on them.
//!
//! A backend only turns a [`GeneratorRequest`] into reply text. Prompt filling
//! and reply parsing live in [`GeneratorClient`], so the live HTTP backend and
//! the scripted stub see exactly the same requests.

mod live;
mod prompts;
mod stub;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use live::{HttpEmbedder, HttpGenerator};
pub use prompts::{PromptError, PromptSet};
pub use stub::{needs_rewrite, resolve_anaphors, ScriptRule, ScriptedGenerator, StubScript, ANAPHORS};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeneratorError {
    #[error("generator transport error: {0}")]
    Transport(String),
    #[error("unparseable {template} reply after retry: {raw:?}")]
    Protocol { template: Template, raw: String },
    #[error(transparent)]
    Prompt(#[from] PromptError),
    #[error("stub script error: {0}")]
    Script(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Template {
    Decompose,
    RewriteDecision,
    Rewrite,
    Answer,
    Integrate,
    ExtractEntities,
}

impl Template {
    pub const ALL: [Template; 6] = [
        Template::Decompose,
        Template::RewriteDecision,
        Template::Rewrite,
        Template::Answer,
        Template::Integrate,
        Template::ExtractEntities,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Template::Decompose => "decompose",
            Template::RewriteDecision => "rewrite_decision",
            Template::Rewrite => "rewrite",
            Template::Answer => "answer",
            Template::Integrate => "integrate",
            Template::ExtractEntities => "extract_entities",
        }
    }
}

impl std::fmt::Display for Template {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// `(sub_question, answer)` pairs answered so far.
pub type History = Vec<(String, String)>;

/// The structured inputs behind a filled prompt.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "template", rename_all = "snake_case")]
pub enum Task {
    Decompose { question: String },
    RewriteDecision { sub_question: String, history: History },
    Rewrite { sub_question: String, history: History },
    Answer { sub_question: String, context: Vec<String> },
    Integrate { question: String, steps: History },
    ExtractEntities { question: String },
}

impl Task {
    pub fn template(&self) -> Template {
        match self {
            Task::Decompose { .. } => Template::Decompose,
            Task::RewriteDecision { .. } => Template::RewriteDecision,
            Task::Rewrite { .. } => Template::Rewrite,
            Task::Answer { .. } => Template::Answer,
            Task::Integrate { .. } => Template::Integrate,
            Task::ExtractEntities { .. } => Template::ExtractEntities,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GeneratorRequest {
    pub task: Task,
    pub filled_prompt: String,
    pub temperature: f64,
}

impl GeneratorRequest {
    pub fn template(&self) -> Template {
        self.task.template()
    }
}

pub trait Generator: Send + Sync {
    fn complete(&self, request: &GeneratorRequest) -> Result<String, GeneratorError>;
}

impl<G: Generator + ?Sized> Generator for &G {
    fn complete(&self, request: &GeneratorRequest) -> Result<String, GeneratorError> {
        (**self).complete(request)
    }
}

impl<G: Generator + ?Sized> Generator for Box<G> {
    fn complete(&self, request: &GeneratorRequest) -> Result<String, GeneratorError> {
        (**self).complete(request)
    }
}

pub trait Embedder: Send + Sync {
    fn embed(&self, text: &str) -> Result<Vec<f64>, GeneratorError>;
}

/// Parses a JSON array of strings, tolerating text around the brackets
/// (some models wrap the array, e.g. `{[...]}`).
pub fn parse_string_array(reply: &str) -> Option<Vec<String>> {
    let start = reply.find('[')?;
    let end = reply.rfind(']')?;
    if end < start {
        return None;
    }
    let items: Vec<String> = serde_json::from_str(&reply[start..=end]).ok()?;
    Some(
        items
            .into_iter()
            .map(|s| s.trim().to_string())
            .filter(|s| !s.is_empty())
            .collect(),
    )
}

pub fn parse_sub_questions(reply: &str) -> Option<Vec<String>> {
    parse_string_array(reply).filter(|v| !v.is_empty())
}

pub fn parse_yes_no(reply: &str) -> Option<bool> {
    let word: String = reply
        .trim()
        .chars()
        .take_while(|c| c.is_alphabetic())
        .collect::<String>()
        .to_lowercase();
    match word.as_str() {
        "yes" | "true" => Some(true),
        "no" | "false" => Some(false),
        _ => None,
    }
}

fn clean_text(reply: &str) -> String {
    let t = reply.trim();
    let t = t.strip_prefix("Answer:").unwrap_or(t).trim();
    t.trim_matches(|c| c == '"' || c == '\u{201c}' || c == '\u{201d}')
        .trim()
        .to_string()
}

fn format_history(history: &[(String, String)]) -> String {
    if history.is_empty() {
        return "(none)".to_string();
    }
    history
        .iter()
        .enumerate()
        .map(|(i, (q, a))| format!("Sub-question {n}: {q}\nAnswer {n}: {a}", n = i + 1))
        .collect::<Vec<_>>()
        .join("\n")
}

fn format_context(context: &[String]) -> String {
    if context.is_empty() {
        return "(no passages retrieved)".to_string();
    }
    context
        .iter()
        .enumerate()
        .map(|(i, c)| format!("[{}] {}", i + 1, c))
        .collect::<Vec<_>>()
        .join("\n")
}

/// Fills prompts, calls the backend and parses replies. Unparseable replies
/// are retried once.
pub struct GeneratorClient<'a> {
    backend: &'a dyn Generator,
    prompts: &'a PromptSet,
    temperature: f64,
}

impl<'a> GeneratorClient<'a> {
    pub fn new(backend: &'a dyn Generator, prompts: &'a PromptSet, temperature: f64) -> Self {
        Self {
            backend,
            prompts,
            temperature,
        }
    }

    pub fn request(&self, task: Task) -> Result<GeneratorRequest, GeneratorError> {
        let filled_prompt = match &task {
            Task::Decompose { question } => self.prompts.fill(Template::Decompose, &[("Question", question)])?,
            Task::RewriteDecision { sub_question, history } => self.prompts.fill(
                Template::RewriteDecision,
                &[("sub_question", sub_question), ("history", &format_history(history))],
            )?,
            Task::Rewrite { sub_question, history } => self.prompts.fill(
                Template::Rewrite,
                &[("sub_question", sub_question), ("history", &format_history(history))],
            )?,
            Task::Answer { sub_question, context } => self.prompts.fill(
                Template::Answer,
                &[("sub_question", sub_question), ("context", &format_context(context))],
            )?,
            Task::Integrate { question, steps } => self.prompts.fill(
                Template::Integrate,
                &[("question", question), ("steps", &format_history(steps))],
            )?,
            Task::ExtractEntities { question } => self
                .prompts
                .fill(Template::ExtractEntities, &[("question", question)])?,
        };
        Ok(GeneratorRequest {
            task,
            filled_prompt,
            temperature: self.temperature,
        })
    }

    fn call<T>(&self, task: Task, parse: impl Fn(&str) -> Option<T>) -> Result<T, GeneratorError> {
        let request = self.request(task)?;
        let mut raw = String::new();
        for _ in 0..2 {
            raw = self.backend.complete(&request)?;
            if let Some(parsed) = parse(&raw) {
                return Ok(parsed);
            }
        }
        Err(GeneratorError::Protocol {
            template: request.template(),
            raw,
        })
    }

    pub fn decompose(&self, question: &str) -> Result<Vec<String>, GeneratorError> {
        if question.trim().is_empty() {
            return Err(GeneratorError::Prompt(PromptError::EmptyInput("question")));
        }
        self.call(
            Task::Decompose {
                question: question.to_string(),
            },
            parse_sub_questions,
        )
    }

    pub fn answer(&self, sub_question: &str, context: &[String]) -> Result<String, GeneratorError> {
        self.call(
            Task::Answer {
                sub_question: sub_question.to_string(),
                context: context.to_vec(),
            },
            |r| Some(clean_text(r)),
        )
    }

    pub fn rewrite_decision(&self, sub_question: &str, history: &[(String, String)]) -> Result<bool, GeneratorError> {
        self.call(
            Task::RewriteDecision {
                sub_question: sub_question.to_string(),
                history: history.to_vec(),
            },
            parse_yes_no,
        )
    }

    pub fn rewrite(&self, sub_question: &str, history: &[(String, String)]) -> Result<String, GeneratorError> {
        self.call(
            Task::Rewrite {
                sub_question: sub_question.to_string(),
                history: history.to_vec(),
            },
            |r| Some(clean_text(r)).filter(|s| !s.is_empty()),
        )
    }

    pub fn integrate(&self, question: &str, steps: &[(String, String)]) -> Result<String, GeneratorError> {
        self.call(
            Task::Integrate {
                question: question.to_string(),
                steps: steps.to_vec(),
            },
            |r| Some(clean_text(r)),
        )
    }

    pub fn extract_entities(&self, question: &str) -> Result<Vec<String>, GeneratorError> {
        self.call(
            Task::ExtractEntities {
                question: question.to_string(),
            },
            parse_string_array,
        )
    }
}
