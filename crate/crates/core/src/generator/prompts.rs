use std::collections::BTreeMap;

use serde::Deserialize;
use thiserror::Error;

use super::Template;

const DEFAULT_PROMPTS: &str = include_str!("prompts.toml");

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PromptError {
    #[error("prompt file: {0}")]
    Invalid(String),
    #[error("template `{0}` missing from prompt file")]
    MissingTemplate(&'static str),
    #[error("template `{template}` has no value for placeholder `{{{placeholder}}}`")]
    Unfilled {
        template: &'static str,
        placeholder: String,
    },
    #[error("{0} must not be empty")]
    EmptyInput(&'static str),
}

#[derive(Deserialize)]
struct PromptFile {
    version: u32,
    templates: BTreeMap<String, String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PromptSet {
    version: u32,
    templates: BTreeMap<Template, String>,
}

impl Default for PromptSet {
    fn default() -> Self {
        Self::from_toml(DEFAULT_PROMPTS).expect("bundled prompt file is valid")
    }
}

impl PromptSet {
    pub fn from_toml(source: &str) -> Result<Self, PromptError> {
        let file: PromptFile = toml::from_str(source).map_err(|e| PromptError::Invalid(e.to_string()))?;
        let mut templates = BTreeMap::new();
        for template in Template::ALL {
            let text = file
                .templates
                .get(template.name())
                .ok_or(PromptError::MissingTemplate(template.name()))?;
            templates.insert(template, text.trim().to_string());
        }
        Ok(Self {
            version: file.version,
            templates,
        })
    }

    pub fn version(&self) -> u32 {
        self.version
    }

    pub fn template(&self, template: Template) -> &str {
        &self.templates[&template]
    }

    /// Substitutes `{name}` placeholders in one pass; substituted values are
    /// never rescanned. Braces not enclosing an identifier are literal.
    pub fn fill(&self, template: Template, values: &[(&str, &str)]) -> Result<String, PromptError> {
        let text = self.template(template);
        let mut out = String::with_capacity(text.len() + 256);
        let mut rest = text;
        while let Some(open) = rest.find('{') {
            out.push_str(&rest[..open]);
            let after = &rest[open + 1..];
            let ident_len = after
                .find(|c: char| !(c.is_ascii_alphanumeric() || c == '_'))
                .unwrap_or(after.len());
            if ident_len > 0 && after[ident_len..].starts_with('}') {
                let name = &after[..ident_len];
                let value = values
                    .iter()
                    .find(|(k, _)| *k == name)
                    .map(|(_, v)| *v)
                    .ok_or_else(|| PromptError::Unfilled {
                        template: template.name(),
                        placeholder: name.to_string(),
                    })?;
                out.push_str(value);
                rest = &after[ident_len + 1..];
            } else {
                out.push('{');
                rest = after;
            }
        }
        out.push_str(rest);
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bundled_prompts_load() {
        let p = PromptSet::default();
        assert_eq!(p.version(), 1);
        assert!(p
            .template(Template::Decompose)
            .starts_with("You are a question-decomposition AI assistant."));
    }

    #[test]
    fn decompose_fill_keeps_literal_example() {
        let p = PromptSet::default();
        let q = "Who plays the wife of the producer of Here Comes the Boom in Grown Ups?";
        let filled = p.fill(Template::Decompose, &[("Question", q)]).unwrap();
        assert!(filled.contains(&format!("Question:{q}\nBreak down")));
        assert!(filled.contains(r#"{["Who is the producer of Here Comes the Boom?""#));
        assert!(!filled.contains("{Question}"));
    }

    #[test]
    fn values_are_not_rescanned() {
        let p = PromptSet::default();
        let filled = p
            .fill(Template::ExtractEntities, &[("question", "what is {question}?")])
            .unwrap();
        assert!(filled.contains("what is {question}?"));
    }

    #[test]
    fn missing_value_is_an_error() {
        let p = PromptSet::default();
        assert!(matches!(
            p.fill(Template::Answer, &[("sub_question", "x")]),
            Err(PromptError::Unfilled { .. })
        ));
    }

    #[test]
    fn incomplete_file_rejected() {
        let err = PromptSet::from_toml("version = 2\n[templates]\ndecompose = \"{Question}\"\n").unwrap_err();
        assert!(matches!(err, PromptError::MissingTemplate(_)));
    }
}
