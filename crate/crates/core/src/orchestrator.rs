//! The per-question reasoning loop, the answer-consistency filter and the
//! evaluation harness.
//!
//! A question is decomposed into sub-questions, then each sub-question is
//! optionally rewritten against the answers so far, retrieved for and
//! answered. The last step is integrating all sub-answers. Each step sees
//! only its own retrieval plus the `(sub-question, answer)` history.

use std::collections::BTreeMap;
use std::io::BufRead;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::config::{Config, GeneratorMode};
use crate::corpus::{read_jsonl, Corpus, CorpusError};
use crate::dense::VectorIndex;
use crate::generator::{Embedder, Generator, GeneratorClient, GeneratorError, PromptSet};
use crate::informativeness::{Granularity, InformativenessIndex, QuestionEntities};
use crate::metrics::{aggregate, answer_score, AnswerScore, MeanScore};
use crate::retrieval::{context_texts, retrieve, RetrievalQuery, RetrievalResult};
use crate::ContractViolation;

/// One line of `questions.jsonl`.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct QuestionInput {
    pub qid: String,
    pub question: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub answer: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub decomposition: Option<Vec<String>>,
    /// Question entities per 0-based sub-question index.
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub q_entities: BTreeMap<String, Vec<String>>,
    /// Query vectors per 0-based sub-question index.
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub q_vectors: BTreeMap<String, Vec<f64>>,
}

impl QuestionInput {
    pub fn new(qid: impl Into<String>, question: impl Into<String>) -> Self {
        Self {
            qid: qid.into(),
            question: question.into(),
            ..Default::default()
        }
    }
}

pub fn read_questions<R: BufRead>(input: R) -> Result<Vec<QuestionInput>, CorpusError> {
    read_jsonl(input, "questions")
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Source {
    Fixture,
    Generator,
    Gazetteer,
    Embedder,
    None,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Step {
    pub original_sub_question: String,
    pub rewrite_decision: bool,
    pub rewritten: Option<String>,
    pub effective_question: String,
    pub question_entities: QuestionEntities,
    pub entity_source: Source,
    pub vector_source: Source,
    pub retrieval: RetrievalResult,
    pub answer: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReasoningTrace {
    pub qid: String,
    pub question: String,
    pub gold_answer: Option<String>,
    pub decomposition_provided: bool,
    pub sub_questions: Vec<String>,
    pub steps: Vec<Step>,
    pub final_answer: Option<String>,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PipelineError {
    #[error(transparent)]
    Generator(#[from] GeneratorError),
    #[error(transparent)]
    Retrieval(#[from] ContractViolation),
}

/// A failed run together with the steps completed before the failure.
#[derive(Debug, Error, Clone, PartialEq)]
#[error("question `{}` failed after {} step(s): {source}", .trace.qid, .trace.steps.len())]
pub struct TraceError {
    pub trace: Box<ReasoningTrace>,
    pub source: PipelineError,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunSettings {
    pub k_info: usize,
    pub k_sim: usize,
    pub max_steps: usize,
    pub temperature: f64,
    pub context_char_budget: Option<usize>,
    /// Ask the generator for question entities when none are supplied;
    /// otherwise match corpus entity names in the question text.
    pub extract_entities_with_generator: bool,
    pub workers: usize,
    pub granularity: Granularity,
}

impl Default for RunSettings {
    fn default() -> Self {
        Self::from(&Config::default())
    }
}

impl From<&Config> for RunSettings {
    fn from(c: &Config) -> Self {
        Self {
            k_info: c.k_info,
            k_sim: c.k_sim,
            max_steps: c.max_steps,
            temperature: c.temperature,
            context_char_budget: c.context_char_budget,
            extract_entities_with_generator: c.generator_mode == GeneratorMode::Live,
            workers: c.workers,
            granularity: c.granularity,
        }
    }
}

pub struct Pipeline {
    corpus: Corpus,
    informativeness: InformativenessIndex,
    vectors: VectorIndex,
    generator: Box<dyn Generator>,
    embedder: Option<Box<dyn Embedder>>,
    prompts: PromptSet,
    settings: RunSettings,
}

impl Pipeline {
    pub fn new(corpus: Corpus, generator: Box<dyn Generator>, settings: RunSettings) -> Self {
        let informativeness = InformativenessIndex::build(&corpus, settings.granularity);
        let vectors = VectorIndex::from_corpus(&corpus);
        Self {
            corpus,
            informativeness,
            vectors,
            generator,
            embedder: None,
            prompts: PromptSet::default(),
            settings,
        }
    }

    pub fn with_embedder(mut self, embedder: Box<dyn Embedder>) -> Self {
        self.embedder = Some(embedder);
        self
    }

    pub fn with_prompts(mut self, prompts: PromptSet) -> Self {
        self.prompts = prompts;
        self
    }

    pub fn corpus(&self) -> &Corpus {
        &self.corpus
    }

    pub fn settings(&self) -> &RunSettings {
        &self.settings
    }

    fn client(&self) -> GeneratorClient<'_> {
        GeneratorClient::new(self.generator.as_ref(), &self.prompts, self.settings.temperature)
    }

    /// Runs decompose (unless a decomposition is supplied), then
    /// rewrite?/retrieve/answer per sub-question, then integrate.
    pub fn run_question(&self, input: &QuestionInput) -> Result<ReasoningTrace, TraceError> {
        let mut trace = ReasoningTrace {
            qid: input.qid.clone(),
            question: input.question.clone(),
            gold_answer: input.answer.clone(),
            decomposition_provided: input.decomposition.is_some(),
            sub_questions: Vec::new(),
            steps: Vec::new(),
            final_answer: None,
        };
        match self.fill_trace(input, &mut trace) {
            Ok(()) => Ok(trace),
            Err(source) => Err(TraceError {
                trace: Box::new(trace),
                source,
            }),
        }
    }

    fn fill_trace(&self, input: &QuestionInput, trace: &mut ReasoningTrace) -> Result<(), PipelineError> {
        let client = self.client();
        let mut sub_questions = match &input.decomposition {
            Some(d) if !d.is_empty() => d.clone(),
            _ => client.decompose(&input.question)?,
        };
        sub_questions.truncate(self.settings.max_steps);
        trace.sub_questions = sub_questions.clone();

        let mut history: Vec<(String, String)> = Vec::new();
        for (i, original) in sub_questions.iter().enumerate() {
            let decision = client.rewrite_decision(original, &history)?;
            let rewritten = if decision {
                Some(client.rewrite(original, &history)?)
            } else {
                None
            };
            let effective = rewritten.clone().unwrap_or_else(|| original.clone());

            let key = i.to_string();
            let (entities, entity_source) = match input.q_entities.get(&key) {
                Some(list) => (QuestionEntities::new(list), Source::Fixture),
                None if self.settings.extract_entities_with_generator => (
                    QuestionEntities::new(client.extract_entities(&effective)?),
                    Source::Generator,
                ),
                None => (
                    QuestionEntities::from_normalized(self.corpus.match_entities(&effective)),
                    Source::Gazetteer,
                ),
            };
            let (vector, vector_source) = match (input.q_vectors.get(&key), &self.embedder) {
                (Some(v), _) => (Some(v.clone()), Source::Fixture),
                (None, Some(embedder)) => (Some(embedder.embed(&effective)?), Source::Embedder),
                (None, None) => (None, Source::None),
            };

            let retrieval = retrieve(
                &self.informativeness,
                &self.vectors,
                &RetrievalQuery {
                    query_id: &format!("{}#{}", input.qid, i),
                    entities: &entities,
                    vector: vector.as_deref(),
                    k_info: self.settings.k_info,
                    k_sim: self.settings.k_sim,
                },
            )?;
            let context = context_texts(&self.corpus, &retrieval.fused, self.settings.context_char_budget);
            let answer = client.answer(&effective, &context)?;

            history.push((effective.clone(), answer.clone()));
            trace.steps.push(Step {
                original_sub_question: original.clone(),
                rewrite_decision: decision,
                rewritten,
                effective_question: effective,
                question_entities: entities,
                entity_source,
                vector_source,
                retrieval,
                answer,
            });
        }
        trace.final_answer = Some(client.integrate(&input.question, &history)?);
        Ok(())
    }

    /// Splits candidates by whether their supplied decomposition leads to an
    /// exact-match final answer.
    pub fn filter_by_answer_consistency(&self, candidates: &[QuestionInput]) -> ConsistencySplit {
        let outcomes: Vec<CandidateOutcome> = self.pool().install(|| {
            use rayon::prelude::*;
            candidates.par_iter().map(|c| self.judge_candidate(c)).collect()
        });
        let (consistent, inconsistent) = outcomes.into_iter().partition(|o| o.consistent);
        ConsistencySplit {
            consistent,
            inconsistent,
        }
    }

    fn judge_candidate(&self, candidate: &QuestionInput) -> CandidateOutcome {
        let mut outcome = CandidateOutcome {
            qid: candidate.qid.clone(),
            question: candidate.question.clone(),
            decomposition: candidate.decomposition.clone().unwrap_or_default(),
            gold_answer: candidate.answer.clone(),
            final_answer: None,
            consistent: false,
            note: None,
        };
        if candidate.decomposition.as_ref().is_none_or(|d| d.is_empty()) {
            outcome.note = Some("candidate has no decomposition".into());
            return outcome;
        }
        let Some(gold) = &candidate.answer else {
            outcome.note = Some("candidate has no gold answer".into());
            return outcome;
        };
        match self.run_question(candidate) {
            Ok(trace) => {
                let prediction = trace.final_answer.unwrap_or_default();
                outcome.consistent = answer_score(&prediction, gold).em == 1;
                outcome.final_answer = Some(prediction);
            }
            Err(e) => outcome.note = Some(e.to_string()),
        }
        outcome
    }

    fn pool(&self) -> rayon::ThreadPool {
        rayon::ThreadPoolBuilder::new()
            .num_threads(self.settings.workers.max(1))
            .build()
            .expect("thread pool")
    }

    /// Runs every question (up to `workers` at a time) and scores those with
    /// a gold answer. Results are ordered by question id.
    pub fn run_eval(&self, questions: &[QuestionInput]) -> EvalReport {
        let mut ordered: Vec<&QuestionInput> = questions.iter().collect();
        ordered.sort_by(|a, b| a.qid.cmp(&b.qid));
        let results: Vec<QuestionResult> = self.pool().install(|| {
            use rayon::prelude::*;
            ordered.par_iter().map(|q| self.evaluate(q)).collect()
        });
        let scores: Vec<AnswerScore> = results.iter().filter_map(|r| r.score).collect();
        EvalReport {
            questions: results.len(),
            failures: results.iter().filter(|r| r.error.is_some()).count(),
            scored: scores.len(),
            metrics: aggregate(&scores),
            prompt_version: self.prompts.version(),
            results,
        }
    }

    fn evaluate(&self, q: &QuestionInput) -> QuestionResult {
        let (trace, error) = match self.run_question(q) {
            Ok(trace) => (trace, None),
            Err(e) => {
                let message = e.to_string();
                (*e.trace, Some(message))
            }
        };
        let score = match (&trace.final_answer, &q.answer, &error) {
            (Some(pred), Some(gold), None) => Some(answer_score(pred, gold)),
            _ => None,
        };
        QuestionResult {
            qid: q.qid.clone(),
            question: q.question.clone(),
            gold_answer: q.answer.clone(),
            prediction: trace.final_answer.clone(),
            score,
            error,
            trace,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidateOutcome {
    pub qid: String,
    pub question: String,
    pub decomposition: Vec<String>,
    pub gold_answer: Option<String>,
    pub final_answer: Option<String>,
    pub consistent: bool,
    pub note: Option<String>,
}

/// `consistent` reached the gold answer exactly; `inconsistent` holds the rest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConsistencySplit {
    pub consistent: Vec<CandidateOutcome>,
    pub inconsistent: Vec<CandidateOutcome>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuestionResult {
    pub qid: String,
    pub question: String,
    pub gold_answer: Option<String>,
    pub prediction: Option<String>,
    pub score: Option<AnswerScore>,
    pub error: Option<String>,
    pub trace: ReasoningTrace,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub questions: usize,
    pub failures: usize,
    pub scored: usize,
    /// `null` when no question could be scored.
    pub metrics: Option<MeanScore>,
    pub prompt_version: u32,
    pub results: Vec<QuestionResult>,
}

impl EvalReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}
