//! Multi-hop question answering over an entity-informativeness index.
//!
//! Chunks are ranked two ways: by how structurally central the question's
//! entities are in each chunk's dependency trees, and by embedding
//! similarity. An orchestrator decomposes a question into sub-questions and
//! answers them in order, rewriting each against earlier answers before
//! retrieving for it.

pub mod config;
pub mod corpus;
pub mod dense;
pub mod generator;
pub mod informativeness;
pub mod metrics;
pub mod orchestrator;
pub mod persist;
pub mod retrieval;
pub mod training_math;
pub mod treebank;

use thiserror::Error;

/// A caller broke a documented precondition (bad `k`, mismatched vector
/// dimensions, zero vectors).
#[derive(Debug, Error, Clone, PartialEq, Eq)]
#[error("contract violation: {0}")]
pub struct ContractViolation(pub String);

pub use config::{Config, GeneratorMode};
pub use corpus::{chunk_document, load_corpus, normalize_entity, Chunk, Chunking, Corpus, CorpusError, Document};
pub use dense::{cosine, top_k_by_similarity, VectorIndex};
pub use informativeness::{
    build_table, chunk_score, entity_importance, top_k_by_informativeness, Granularity, InformativenessIndex,
    InformativenessTable, QuestionEntities, Scope,
};
pub use metrics::{aggregate, answer_score, normalize_answer, AnswerScore, MeanScore};
pub use orchestrator::{EvalReport, Pipeline, QuestionInput, ReasoningTrace, RunSettings, Step, TraceError};
pub use persist::{load_index, save_index};
pub use retrieval::{retrieve, RetrievalQuery, RetrievalResult};
pub use treebank::{parse_conllu, DependencyTree, Token};
