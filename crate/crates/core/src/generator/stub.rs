//! Deterministic scripted backend for offline runs.
//!
//! Script rules are tried in file order; a rule fires when its template
//! matches and every `contains` string occurs in the filled prompt. When no
//! rule fires, a fixed fallback per template applies:
//!
//! - decompose: the question itself as a single sub-question
//! - rewrite_decision: yes iff history is non-empty and the sub-question has an anaphor
//! - rewrite: anaphors replaced by the most recent answer
//! - answer: the script's `unknown_reply`
//! - integrate: the last step's answer
//! - extract_entities: an empty list

use std::ops::Range;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{Generator, GeneratorError, GeneratorRequest, Task, Template};

/// Tokens that mark a reference back to an earlier answer.
pub const ANAPHORS: [&str; 7] = ["this", "that", "these", "it", "he", "she", "they"];
const DEMONSTRATIVES: [&str; 3] = ["this", "that", "these"];

fn default_unknown() -> String {
    "unknown".to_string()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScriptRule {
    pub template: Template,
    #[serde(default)]
    pub contains: Vec<String>,
    pub reply: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StubScript {
    #[serde(default = "default_unknown")]
    pub unknown_reply: String,
    #[serde(default)]
    pub rules: Vec<ScriptRule>,
}

impl Default for StubScript {
    fn default() -> Self {
        Self {
            unknown_reply: default_unknown(),
            rules: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, Default)]
pub struct ScriptedGenerator {
    script: StubScript,
}

impl ScriptedGenerator {
    pub fn new(script: StubScript) -> Self {
        Self { script }
    }

    pub fn from_json(source: &str) -> Result<Self, GeneratorError> {
        serde_json::from_str(source)
            .map(Self::new)
            .map_err(|e| GeneratorError::Script(e.to_string()))
    }

    pub fn from_path(path: &Path) -> Result<Self, GeneratorError> {
        let text =
            std::fs::read_to_string(path).map_err(|e| GeneratorError::Script(format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn script(&self) -> &StubScript {
        &self.script
    }

    fn fallback(&self, task: &Task) -> String {
        match task {
            Task::Decompose { question } => serde_json::to_string(&[question]).expect("string array serializes"),
            Task::RewriteDecision { sub_question, history } => if needs_rewrite(sub_question, !history.is_empty()) {
                "Yes"
            } else {
                "No"
            }
            .to_string(),
            Task::Rewrite { sub_question, history } => match history.last() {
                Some((_, answer)) => resolve_anaphors(sub_question, answer),
                None => sub_question.clone(),
            },
            Task::Answer { .. } => self.script.unknown_reply.clone(),
            Task::Integrate { steps, .. } => steps
                .last()
                .map(|(_, a)| a.clone())
                .unwrap_or_else(|| self.script.unknown_reply.clone()),
            Task::ExtractEntities { .. } => "[]".to_string(),
        }
    }
}

impl Generator for ScriptedGenerator {
    fn complete(&self, request: &GeneratorRequest) -> Result<String, GeneratorError> {
        let template = request.template();
        let rule = self.script.rules.iter().find(|r| {
            r.template == template
                && r.contains
                    .iter()
                    .all(|needle| request.filled_prompt.contains(needle.as_str()))
        });
        Ok(match rule {
            Some(rule) => rule.reply.clone(),
            None => self.fallback(&request.task),
        })
    }
}

fn words(text: &str) -> Vec<Range<usize>> {
    let mut out = Vec::new();
    let mut start = None;
    for (i, c) in text.char_indices() {
        match (c.is_alphanumeric(), start) {
            (true, None) => start = Some(i),
            (false, Some(s)) => {
                out.push(s..i);
                start = None;
            }
            _ => {}
        }
    }
    if let Some(s) = start {
        out.push(s..text.len());
    }
    out
}

/// Byte spans of anaphor phrases: a demonstrative plus the following word,
/// or a bare pronoun.
fn anaphor_spans(question: &str) -> Vec<Range<usize>> {
    let words = words(question);
    let mut spans = Vec::new();
    let mut i = 0;
    while i < words.len() {
        let w = question[words[i].clone()].to_lowercase();
        if ANAPHORS.contains(&w.as_str()) {
            if DEMONSTRATIVES.contains(&w.as_str()) && i + 1 < words.len() {
                spans.push(words[i].start..words[i + 1].end);
                i += 2;
                continue;
            }
            spans.push(words[i].clone());
        }
        i += 1;
    }
    spans
}

/// True iff there is history to draw on and the sub-question contains an
/// anaphor as a standalone word.
pub fn needs_rewrite(sub_question: &str, has_history: bool) -> bool {
    has_history && !anaphor_spans(sub_question).is_empty()
}

/// Replaces the anaphor phrases of the original question with `answer`.
/// Only the original text is scanned, so an answer that itself contains an
/// anaphor is left alone.
pub fn resolve_anaphors(sub_question: &str, answer: &str) -> String {
    let mut out = String::with_capacity(sub_question.len() + answer.len());
    let mut last = 0;
    for span in anaphor_spans(sub_question) {
        out.push_str(&sub_question[last..span.start]);
        out.push_str(answer);
        last = span.end;
    }
    out.push_str(&sub_question[last..]);
    out
}
