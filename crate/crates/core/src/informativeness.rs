//! Entity informativeness from dependency structure.
//!
//! An entity's importance within a unit is the sum, over the unit's sentences
//! that mention it, of the largest descendant count among the entity's tokens
//! in that sentence. Entities are ranked by importance (ties by name) and a
//! unit scores a question by the reciprocal ranks of the question's entities.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::ops::Range;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus::{normalize_entity, Chunk, Corpus, Document, EntityRecord};
use crate::ContractViolation;

/// Which sentence span an informativeness table is built over.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Granularity {
    /// One table per chunk, over the chunk's own sentences.
    #[default]
    Chunk,
    /// Every chunk inherits its whole document's table.
    Document,
}

impl std::str::FromStr for Granularity {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "chunk" => Ok(Self::Chunk),
            "document" => Ok(Self::Document),
            other => Err(format!("unknown granularity `{other}` (expected chunk|document)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RankedEntity {
    #[serde(rename = "e")]
    pub entity: String,
    #[serde(rename = "imp")]
    pub importance: u64,
    pub rank: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct InformativenessTable {
    #[serde(rename = "chunk_id")]
    pub unit_id: String,
    pub entities: Vec<RankedEntity>,
}

impl InformativenessTable {
    /// Ranks entities by importance descending, ties by ascending name.
    pub fn from_importances<I>(unit_id: impl Into<String>, importances: I) -> Self
    where
        I: IntoIterator<Item = (String, u64)>,
    {
        let mut pairs: Vec<(String, u64)> = importances.into_iter().collect();
        pairs.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
        let entities = pairs
            .into_iter()
            .enumerate()
            .map(|(i, (entity, importance))| RankedEntity {
                entity,
                importance,
                rank: i + 1,
            })
            .collect();
        Self {
            unit_id: unit_id.into(),
            entities,
        }
    }

    pub fn rank_of(&self, entity: &str) -> Option<usize> {
        self.entities.iter().find(|e| e.entity == entity).map(|e| e.rank)
    }

    pub fn is_empty(&self) -> bool {
        self.entities.is_empty()
    }
}

/// Normalized entities mentioned by a question or sub-question.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct QuestionEntities(BTreeSet<String>);

impl QuestionEntities {
    pub fn new<I, S>(entities: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        Self(
            entities
                .into_iter()
                .map(|e| normalize_entity(e.as_ref()))
                .filter(|e| !e.is_empty())
                .collect(),
        )
    }

    pub fn from_normalized(entities: BTreeSet<String>) -> Self {
        Self(entities)
    }

    pub fn iter(&self) -> impl Iterator<Item = &str> {
        self.0.iter().map(String::as_str)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn is_subset(&self, other: &Self) -> bool {
        self.0.is_subset(&other.0)
    }
}

/// A document together with the sentence span a table is computed over.
#[derive(Debug, Clone, Copy)]
pub struct Scope<'a> {
    pub document: &'a Document,
    pub sentences: (usize, usize),
}

impl<'a> Scope<'a> {
    pub fn chunk(document: &'a Document, chunk: &Chunk) -> Self {
        Self {
            document,
            sentences: (chunk.sentence_range.start, chunk.sentence_range.end),
        }
    }

    pub fn document(document: &'a Document) -> Self {
        Self {
            document,
            sentences: (0, document.sentences.len()),
        }
    }

    fn range(&self) -> Range<usize> {
        self.sentences.0..self.sentences.1
    }
}

fn max_descendants(document: &Document, sentence: usize, start: usize, end: usize) -> u64 {
    let tree = &document.sentences[sentence].tree;
    tree.descendant_counts()[start..end].iter().copied().max().unwrap_or(0) as u64
}

/// Importance of one entity inside a scope. Repeated mentions in one
/// sentence contribute once, through the max over all their tokens.
pub fn entity_importance(scope: Scope<'_>, entity: &EntityRecord) -> u64 {
    let range = scope.range();
    let mut per_sentence: BTreeMap<usize, u64> = BTreeMap::new();
    for occ in &entity.occurrences {
        if occ.doc_id != scope.document.doc_id || !range.contains(&occ.sentence) {
            continue;
        }
        let m = max_descendants(scope.document, occ.sentence, occ.start, occ.end);
        let slot = per_sentence.entry(occ.sentence).or_insert(0);
        *slot = (*slot).max(m);
    }
    per_sentence.values().sum()
}

fn importances_in(scope: Scope<'_>) -> BTreeMap<String, u64> {
    let range = scope.range();
    let mut per_sentence: BTreeMap<(&str, usize), u64> = BTreeMap::new();
    for m in &scope.document.mentions {
        if !range.contains(&m.sentence) {
            continue;
        }
        let value = max_descendants(scope.document, m.sentence, m.start, m.end);
        let slot = per_sentence.entry((m.entity.as_str(), m.sentence)).or_insert(0);
        *slot = (*slot).max(value);
    }
    let mut totals = BTreeMap::new();
    for ((entity, _), value) in per_sentence {
        *totals.entry(entity.to_string()).or_insert(0) += value;
    }
    totals
}

/// Builds the ranked entity table for a chunk.
pub fn build_table(chunk: &Chunk, corpus: &Corpus) -> InformativenessTable {
    build_table_with(chunk, corpus, Granularity::Chunk)
}

pub fn build_table_with(chunk: &Chunk, corpus: &Corpus, granularity: Granularity) -> InformativenessTable {
    let Some(document) = corpus.document(&chunk.doc_id) else {
        return InformativenessTable::from_importances(chunk.chunk_id.clone(), []);
    };
    let scope = match granularity {
        Granularity::Chunk => Scope::chunk(document, chunk),
        Granularity::Document => Scope::document(document),
    };
    InformativenessTable::from_importances(chunk.chunk_id.clone(), importances_in(scope))
}

/// Sum of reciprocal ranks of the question entities present in the table.
pub fn chunk_score(table: &InformativenessTable, question: &QuestionEntities) -> f64 {
    question
        .iter()
        .filter_map(|e| table.rank_of(e))
        .map(|rank| 1.0 / rank as f64)
        .sum()
}

/// Tables for every chunk of a corpus plus an entity -> (chunk, rank) posting map.
#[derive(Debug, Clone)]
pub struct InformativenessIndex {
    tables: Vec<InformativenessTable>,
    postings: HashMap<String, Vec<(usize, usize)>>,
}

impl InformativenessIndex {
    pub fn build(corpus: &Corpus, granularity: Granularity) -> Self {
        let tables: Vec<InformativenessTable> = corpus
            .chunks()
            .par_iter()
            .map(|chunk| build_table_with(chunk, corpus, granularity))
            .collect();
        let mut postings: HashMap<String, Vec<(usize, usize)>> = HashMap::new();
        for (i, table) in tables.iter().enumerate() {
            for e in &table.entities {
                postings.entry(e.entity.clone()).or_default().push((i, e.rank));
            }
        }
        Self { tables, postings }
    }

    pub fn tables(&self) -> &[InformativenessTable] {
        &self.tables
    }

    pub fn table(&self, chunk_id: &str) -> Option<&InformativenessTable> {
        self.tables.iter().find(|t| t.unit_id == chunk_id)
    }

    /// Highest-scoring chunks for the question, zero scores excluded,
    /// ties broken by ascending chunk id.
    pub fn top_k(&self, question: &QuestionEntities, k: usize) -> Result<Vec<(String, f64)>, ContractViolation> {
        if k == 0 {
            return Err(ContractViolation("informativeness top-k requires k >= 1".into()));
        }
        // Entities are visited in sorted order, the same order chunk_score
        // uses, so the sums are bit-identical.
        let mut scores: BTreeMap<usize, f64> = BTreeMap::new();
        for entity in question.iter() {
            if let Some(list) = self.postings.get(entity) {
                for &(chunk, rank) in list {
                    *scores.entry(chunk).or_insert(0.0) += 1.0 / rank as f64;
                }
            }
        }
        let mut hits: Vec<(String, f64)> = scores
            .into_iter()
            .filter(|&(_, s)| s > 0.0)
            .map(|(i, s)| (self.tables[i].unit_id.clone(), s))
            .collect();
        sort_hits(&mut hits);
        hits.truncate(k);
        Ok(hits)
    }
}

/// Descending score, ascending id.
pub(crate) fn sort_hits(hits: &mut [(String, f64)]) {
    hits.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
}

/// Convenience wrapper that builds chunk-granularity tables on the fly.
pub fn top_k_by_informativeness(
    corpus: &Corpus,
    question: &QuestionEntities,
    k: usize,
) -> Result<Vec<(String, f64)>, ContractViolation> {
    InformativenessIndex::build(corpus, Granularity::Chunk).top_k(question, k)
}
