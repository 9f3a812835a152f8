//! Documents, sentence-aligned annotations, entity records and chunking.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::io::BufRead;
use std::ops::Range;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::treebank::{parse_conllu, DependencyTree, TreebankError};

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("{stream} line {line}: {message}")]
    Json {
        stream: &'static str,
        line: usize,
        message: String,
    },
    #[error(transparent)]
    Tree(#[from] TreebankError),
    #[error("duplicate doc_id `{0}`")]
    DuplicateDocument(String),
    #[error("sentence `{0}` does not name a document as `<doc_id>#<ordinal>`")]
    BadSentenceId(String),
    #[error("tree `{sentence_id}` references unknown document `{doc_id}`")]
    UnknownDocument { sentence_id: String, doc_id: String },
    #[error("document `{doc_id}`: {message}")]
    Sentences { doc_id: String, message: String },
    #[error("entity in document `{doc_id}` sentence {sentence}: {message}")]
    EntitySpan {
        doc_id: String,
        sentence: usize,
        message: String,
    },
    #[error("invalid chunking: window {window}, stride {stride} (need 1 <= stride <= window)")]
    InvalidChunking { window: usize, stride: usize },
    #[error("embedding for `{chunk_id}`: {message}")]
    Embedding { chunk_id: String, message: String },
    #[error("unsupported index format version {found} (expected {expected})")]
    FormatVersion { found: u8, expected: u8 },
    #[error("corrupt index file: {0}")]
    Format(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Case fold, strip leading/trailing punctuation, collapse internal whitespace.
///
/// Anything that is neither alphanumeric nor whitespace counts as punctuation
/// at the edges.
pub fn normalize_entity(surface: &str) -> String {
    let folded = surface.to_lowercase();
    let trimmed = folded.trim_matches(|c: char| !c.is_alphanumeric());
    trimmed.split_whitespace().collect::<Vec<_>>().join(" ")
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Chunking {
    pub window: usize,
    pub stride: usize,
}

impl Default for Chunking {
    fn default() -> Self {
        Self { window: 3, stride: 2 }
    }
}

impl Chunking {
    pub fn new(window: usize, stride: usize) -> Result<Self, CorpusError> {
        if window == 0 || stride == 0 || stride > window {
            return Err(CorpusError::InvalidChunking { window, stride });
        }
        Ok(Self { window, stride })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Sentence {
    pub text: String,
    pub tree: DependencyTree,
}

/// One entity mention: `[start, end)` are 0-based token positions in the sentence.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EntityMention {
    pub entity: String,
    pub surface: String,
    pub label: String,
    pub sentence: usize,
    pub start: usize,
    pub end: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Document {
    pub doc_id: String,
    pub title: String,
    pub text: String,
    pub sentences: Vec<Sentence>,
    pub mentions: Vec<EntityMention>,
}

impl Document {
    pub fn new(doc_id: impl Into<String>, title: impl Into<String>, trees: Vec<DependencyTree>) -> Self {
        let sentences: Vec<Sentence> = trees
            .into_iter()
            .map(|tree| Sentence {
                text: tree.surface(),
                tree,
            })
            .collect();
        let text = sentences.iter().map(|s| s.text.as_str()).collect::<Vec<_>>().join(" ");
        Self {
            doc_id: doc_id.into(),
            title: title.into(),
            text,
            sentences,
            mentions: Vec::new(),
        }
    }

    /// Adds a mention after checking its span against the sentence.
    pub fn add_mention(
        &mut self,
        surface: &str,
        label: &str,
        sentence: usize,
        start: usize,
        end: usize,
    ) -> Result<(), CorpusError> {
        let span_err = |message: String| CorpusError::EntitySpan {
            doc_id: self.doc_id.clone(),
            sentence,
            message,
        };
        let Some(s) = self.sentences.get(sentence) else {
            return Err(span_err(format!(
                "sentence index out of range ({} sentences)",
                self.sentences.len()
            )));
        };
        if start >= end || end > s.tree.len() {
            return Err(span_err(format!(
                "token span [{start}, {end}) invalid for {} tokens",
                s.tree.len()
            )));
        }
        let entity = normalize_entity(surface);
        if entity.is_empty() {
            return Err(span_err(format!("surface `{surface}` normalizes to nothing")));
        }
        self.mentions.push(EntityMention {
            entity,
            surface: surface.to_string(),
            label: label.to_string(),
            sentence,
            start,
            end,
        });
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Chunk {
    pub chunk_id: String,
    pub doc_id: String,
    pub sentence_range: Range<usize>,
    pub text: String,
    pub embedding: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Occurrence {
    pub doc_id: String,
    pub sentence: usize,
    pub start: usize,
    pub end: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EntityRecord {
    pub normalized: String,
    pub surface_forms: BTreeSet<String>,
    pub occurrences: Vec<Occurrence>,
}

/// Splits a document into sentence windows at offsets `0, stride, 2*stride, ...`,
/// stopping once a window reaches the last sentence.
pub fn chunk_document(doc: &Document, window: usize, stride: usize) -> Result<Vec<Chunk>, CorpusError> {
    let chunking = Chunking::new(window, stride)?;
    let n = doc.sentences.len();
    let mut chunks = Vec::new();
    let mut start = 0;
    while start < n {
        let end = (start + chunking.window).min(n);
        let text = doc.sentences[start..end]
            .iter()
            .map(|s| s.text.as_str())
            .collect::<Vec<_>>()
            .join(" ");
        chunks.push(Chunk {
            chunk_id: format!("{}/{}", doc.doc_id, start),
            doc_id: doc.doc_id.clone(),
            sentence_range: start..end,
            text,
            embedding: None,
        });
        if end == n {
            break;
        }
        start += chunking.stride;
    }
    Ok(chunks)
}

/// An immutable, cross-linked document collection.
#[derive(Debug, Clone, PartialEq)]
pub struct Corpus {
    documents: Vec<Document>,
    entities: BTreeMap<String, EntityRecord>,
    chunks: Vec<Chunk>,
    chunking: Chunking,
    embedding_dim: Option<usize>,
    doc_index: HashMap<String, usize>,
    chunk_index: HashMap<String, usize>,
}

impl Corpus {
    /// Builds a corpus from validated documents. Documents are stored in
    /// `doc_id` order regardless of input order.
    pub fn build(mut documents: Vec<Document>, chunking: Chunking) -> Result<Self, CorpusError> {
        let chunking = Chunking::new(chunking.window, chunking.stride)?;
        documents.sort_by(|a, b| a.doc_id.cmp(&b.doc_id));
        for pair in documents.windows(2) {
            if pair[0].doc_id == pair[1].doc_id {
                return Err(CorpusError::DuplicateDocument(pair[0].doc_id.clone()));
            }
        }
        let mut chunks = Vec::new();
        for doc in &documents {
            chunks.extend(chunk_document(doc, chunking.window, chunking.stride)?);
        }
        Self::assemble(documents, chunks, chunking, None)
    }

    fn assemble(
        documents: Vec<Document>,
        chunks: Vec<Chunk>,
        chunking: Chunking,
        embedding_dim: Option<usize>,
    ) -> Result<Self, CorpusError> {
        let mut entities: BTreeMap<String, EntityRecord> = BTreeMap::new();
        for doc in &documents {
            for m in &doc.mentions {
                let record = entities.entry(m.entity.clone()).or_insert_with(|| EntityRecord {
                    normalized: m.entity.clone(),
                    surface_forms: BTreeSet::new(),
                    occurrences: Vec::new(),
                });
                record.surface_forms.insert(m.surface.clone());
                record.occurrences.push(Occurrence {
                    doc_id: doc.doc_id.clone(),
                    sentence: m.sentence,
                    start: m.start,
                    end: m.end,
                });
            }
        }
        let doc_index = documents
            .iter()
            .enumerate()
            .map(|(i, d)| (d.doc_id.clone(), i))
            .collect();
        let chunk_index = chunks
            .iter()
            .enumerate()
            .map(|(i, c)| (c.chunk_id.clone(), i))
            .collect();
        Ok(Self {
            documents,
            entities,
            chunks,
            chunking,
            embedding_dim,
            doc_index,
            chunk_index,
        })
    }

    pub(crate) fn from_stored(
        documents: Vec<Document>,
        chunks: Vec<Chunk>,
        chunking: Chunking,
        embedding_dim: Option<usize>,
    ) -> Result<Self, CorpusError> {
        Self::assemble(documents, chunks, chunking, embedding_dim)
    }

    pub fn empty() -> Self {
        Self::build(Vec::new(), Chunking::default()).expect("default chunking is valid")
    }

    pub fn documents(&self) -> &[Document] {
        &self.documents
    }

    pub fn document(&self, doc_id: &str) -> Option<&Document> {
        self.doc_index.get(doc_id).map(|&i| &self.documents[i])
    }

    pub fn entities(&self) -> &BTreeMap<String, EntityRecord> {
        &self.entities
    }

    pub fn entity(&self, normalized: &str) -> Option<&EntityRecord> {
        self.entities.get(normalized)
    }

    pub fn chunks(&self) -> &[Chunk] {
        &self.chunks
    }

    pub fn chunk(&self, chunk_id: &str) -> Option<&Chunk> {
        self.chunk_index.get(chunk_id).map(|&i| &self.chunks[i])
    }

    pub fn chunking(&self) -> Chunking {
        self.chunking
    }

    pub fn embedding_dim(&self) -> Option<usize> {
        self.embedding_dim
    }

    pub fn is_empty(&self) -> bool {
        self.documents.is_empty()
    }

    /// Attaches chunk embeddings. All vectors must share one dimension and be non-zero.
    pub fn attach_embeddings<I>(&mut self, embeddings: I) -> Result<usize, CorpusError>
    where
        I: IntoIterator<Item = (String, Vec<f64>)>,
    {
        let mut attached = 0;
        for (chunk_id, vector) in embeddings {
            let err = |message: String| CorpusError::Embedding {
                chunk_id: chunk_id.clone(),
                message,
            };
            let Some(&idx) = self.chunk_index.get(&chunk_id) else {
                return Err(err("unknown chunk id".into()));
            };
            if vector.is_empty() {
                return Err(err("empty vector".into()));
            }
            match self.embedding_dim {
                Some(dim) if dim != vector.len() => {
                    return Err(err(format!(
                        "dimension {} differs from corpus dimension {dim}",
                        vector.len()
                    )))
                }
                _ => self.embedding_dim = Some(vector.len()),
            }
            if vector.iter().any(|x| !x.is_finite()) {
                return Err(err("non-finite component".into()));
            }
            if vector.iter().all(|&x| x == 0.0) {
                return Err(err("all-zero vector".into()));
            }
            self.chunks[idx].embedding = Some(vector);
            attached += 1;
        }
        Ok(attached)
    }

    /// Scans a question for known entity names on word boundaries.
    /// Used when no question-side entity annotations are available.
    pub fn match_entities(&self, question: &str) -> BTreeSet<String> {
        let normalized: String = question
            .to_lowercase()
            .chars()
            .map(|c| if c.is_alphanumeric() { c } else { ' ' })
            .collect();
        let padded = format!(" {} ", normalized.split_whitespace().collect::<Vec<_>>().join(" "));
        self.entities
            .keys()
            .filter(|e| {
                let key: String = e.chars().map(|c| if c.is_alphanumeric() { c } else { ' ' }).collect();
                let key = key.split_whitespace().collect::<Vec<_>>().join(" ");
                !key.is_empty() && padded.contains(&format!(" {key} "))
            })
            .cloned()
            .collect()
    }
}

#[derive(Deserialize)]
struct DocumentLine {
    id: String,
    #[serde(default)]
    title: String,
    #[serde(default)]
    text: String,
}

#[derive(Deserialize)]
struct EntityLine {
    doc_id: String,
    sent: usize,
    start: usize,
    end: usize,
    surface: String,
    #[serde(default)]
    label: String,
}

#[derive(Deserialize)]
struct EmbeddingLine {
    chunk_id: String,
    vector: Vec<f64>,
}

pub(crate) fn read_jsonl<T, R>(input: R, stream: &'static str) -> Result<Vec<T>, CorpusError>
where
    T: serde::de::DeserializeOwned,
    R: BufRead,
{
    let mut out = Vec::new();
    for (i, line) in input.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let value = serde_json::from_str(&line).map_err(|e| CorpusError::Json {
            stream,
            line: i + 1,
            message: e.to_string(),
        })?;
        out.push(value);
    }
    Ok(out)
}

/// Reads `{"chunk_id", "vector"}` lines.
pub fn read_embeddings<R: BufRead>(input: R) -> Result<Vec<(String, Vec<f64>)>, CorpusError> {
    Ok(read_jsonl::<EmbeddingLine, _>(input, "embeddings")?
        .into_iter()
        .map(|e| (e.chunk_id, e.vector))
        .collect())
}

/// Loads documents, CoNLL-U trees (`# sent_id = <doc_id>#<ordinal>`) and
/// entity spans into a chunked corpus.
pub fn load_corpus<D, T, E>(documents: D, trees: T, entities: E, chunking: Chunking) -> Result<Corpus, CorpusError>
where
    D: BufRead,
    T: BufRead,
    E: BufRead,
{
    let doc_lines: Vec<DocumentLine> = read_jsonl(documents, "documents")?;
    let mut by_id: BTreeMap<String, (DocumentLine, BTreeMap<usize, DependencyTree>)> = BTreeMap::new();
    for line in doc_lines {
        if by_id.contains_key(&line.id) {
            return Err(CorpusError::DuplicateDocument(line.id));
        }
        by_id.insert(line.id.clone(), (line, BTreeMap::new()));
    }

    for tree in parse_conllu(trees, "trees")? {
        let sid = tree.sentence_id().to_string();
        let (doc_id, ordinal) = sid
            .rsplit_once('#')
            .and_then(|(d, o)| o.parse::<usize>().ok().map(|o| (d.to_string(), o)))
            .ok_or_else(|| CorpusError::BadSentenceId(sid.clone()))?;
        let Some((_, sentences)) = by_id.get_mut(&doc_id) else {
            return Err(CorpusError::UnknownDocument {
                sentence_id: sid,
                doc_id,
            });
        };
        if sentences.insert(ordinal, tree).is_some() {
            return Err(CorpusError::Sentences {
                doc_id,
                message: format!("duplicate sentence ordinal {ordinal}"),
            });
        }
    }

    let mut documents = BTreeMap::new();
    for (doc_id, (line, sentences)) in by_id {
        let n = sentences.len();
        if let Some((&last, _)) = sentences.last_key_value() {
            if last + 1 != n {
                return Err(CorpusError::Sentences {
                    doc_id,
                    message: format!("sentence ordinals are not contiguous 0..{n}"),
                });
            }
        }
        let mut doc = Document::new(doc_id.clone(), line.title, sentences.into_values().collect());
        if !line.text.is_empty() {
            doc.text = line.text;
        }
        documents.insert(doc_id, doc);
    }

    for e in read_jsonl::<EntityLine, _>(entities, "entities")? {
        let Some(doc) = documents.get_mut(&e.doc_id) else {
            return Err(CorpusError::EntitySpan {
                doc_id: e.doc_id,
                sentence: e.sent,
                message: "unknown document".into(),
            });
        };
        doc.add_mention(&e.surface, &e.label, e.sent, e.start, e.end)?;
    }

    Corpus::build(documents.into_values().collect(), chunking)
}
