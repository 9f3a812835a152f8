//! Versioned single-file index container.
//!
//! Layout: 7 magic bytes, 1 version byte, then five sections in fixed order
//! (documents, trees, entities, chunks, embeddings). Each section is a tag
//! byte, a little-endian `u64` payload length and the payload. Embeddings are
//! raw little-endian `f64` so round-trips are bit-exact.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::corpus::{Chunk, Chunking, Corpus, CorpusError, Document, EntityMention, EntityRecord, Sentence};
use crate::treebank::DependencyTree;

pub const MAGIC: &[u8; 7] = b"MHQAIDX";
pub const FORMAT_VERSION: u8 = 1;

const TAG_DOCUMENTS: u8 = 1;
const TAG_TREES: u8 = 2;
const TAG_ENTITIES: u8 = 3;
const TAG_CHUNKS: u8 = 4;
const TAG_EMBEDDINGS: u8 = 5;

#[derive(Serialize, Deserialize)]
struct StoredDocument {
    doc_id: String,
    title: String,
    text: String,
    sentence_texts: Vec<String>,
    mentions: Vec<EntityMention>,
}

#[derive(Serialize, Deserialize)]
struct StoredChunks {
    chunking: Chunking,
    chunks: Vec<StoredChunk>,
}

#[derive(Serialize, Deserialize)]
struct StoredChunk {
    chunk_id: String,
    doc_id: String,
    start: usize,
    end: usize,
    text: String,
}

fn format_err(message: impl Into<String>) -> CorpusError {
    CorpusError::Format(message.into())
}

fn json<T: Serialize>(value: &T) -> Result<Vec<u8>, CorpusError> {
    serde_json::to_vec(value).map_err(|e| format_err(e.to_string()))
}

fn write_section<W: Write>(out: &mut W, tag: u8, payload: &[u8]) -> Result<(), CorpusError> {
    out.write_all(&[tag])?;
    out.write_all(&(payload.len() as u64).to_le_bytes())?;
    out.write_all(payload)?;
    Ok(())
}

fn read_section<R: Read>(input: &mut R, expected: u8) -> Result<Vec<u8>, CorpusError> {
    let mut tag = [0u8; 1];
    input
        .read_exact(&mut tag)
        .map_err(|_| format_err("truncated section header"))?;
    if tag[0] != expected {
        return Err(format_err(format!("expected section {expected}, found {}", tag[0])));
    }
    let mut len = [0u8; 8];
    input
        .read_exact(&mut len)
        .map_err(|_| format_err("truncated section length"))?;
    let len = u64::from_le_bytes(len) as usize;
    let mut payload = Vec::new();
    input.take(len as u64).read_to_end(&mut payload)?;
    if payload.len() != len {
        return Err(format_err(format!("section {expected} truncated")));
    }
    Ok(payload)
}

fn encode_embeddings(corpus: &Corpus) -> Vec<u8> {
    let with_vectors: Vec<&Chunk> = corpus.chunks().iter().filter(|c| c.embedding.is_some()).collect();
    let dim = corpus.embedding_dim().unwrap_or(0);
    let mut buf = Vec::new();
    buf.extend_from_slice(&(dim as u64).to_le_bytes());
    buf.extend_from_slice(&(with_vectors.len() as u64).to_le_bytes());
    for chunk in with_vectors {
        let id = chunk.chunk_id.as_bytes();
        buf.extend_from_slice(&(id.len() as u64).to_le_bytes());
        buf.extend_from_slice(id);
        for x in chunk.embedding.as_ref().expect("filtered") {
            buf.extend_from_slice(&x.to_le_bytes());
        }
    }
    buf
}

struct Cursor<'a>(&'a [u8]);

impl Cursor<'_> {
    fn take(&mut self, n: usize) -> Result<&[u8], CorpusError> {
        if self.0.len() < n {
            return Err(format_err("embedding section truncated"));
        }
        let (head, tail) = self.0.split_at(n);
        self.0 = tail;
        Ok(head)
    }

    fn u64(&mut self) -> Result<u64, CorpusError> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }
}

type Embeddings = (Option<usize>, Vec<(String, Vec<f64>)>);

fn decode_embeddings(payload: &[u8]) -> Result<Embeddings, CorpusError> {
    let mut cur = Cursor(payload);
    let dim = cur.u64()? as usize;
    let count = cur.u64()? as usize;
    let mut out = Vec::with_capacity(count.min(1 << 20));
    for _ in 0..count {
        let id_len = cur.u64()? as usize;
        let id = String::from_utf8(cur.take(id_len)?.to_vec()).map_err(|e| format_err(e.to_string()))?;
        let mut vector = Vec::with_capacity(dim);
        for _ in 0..dim {
            vector.push(f64::from_le_bytes(cur.take(8)?.try_into().expect("8 bytes")));
        }
        out.push((id, vector));
    }
    if !cur.0.is_empty() {
        return Err(format_err("trailing bytes in embedding section"));
    }
    Ok(((dim > 0).then_some(dim), out))
}

pub fn write_index<W: Write>(corpus: &Corpus, mut out: W) -> Result<(), CorpusError> {
    let documents: Vec<StoredDocument> = corpus
        .documents()
        .iter()
        .map(|d| StoredDocument {
            doc_id: d.doc_id.clone(),
            title: d.title.clone(),
            text: d.text.clone(),
            sentence_texts: d.sentences.iter().map(|s| s.text.clone()).collect(),
            mentions: d.mentions.clone(),
        })
        .collect();
    let trees: Vec<Vec<&DependencyTree>> = corpus
        .documents()
        .iter()
        .map(|d| d.sentences.iter().map(|s| &s.tree).collect())
        .collect();
    let entities: Vec<&EntityRecord> = corpus.entities().values().collect();
    let chunks = StoredChunks {
        chunking: corpus.chunking(),
        chunks: corpus
            .chunks()
            .iter()
            .map(|c| StoredChunk {
                chunk_id: c.chunk_id.clone(),
                doc_id: c.doc_id.clone(),
                start: c.sentence_range.start,
                end: c.sentence_range.end,
                text: c.text.clone(),
            })
            .collect(),
    };

    out.write_all(MAGIC)?;
    out.write_all(&[FORMAT_VERSION])?;
    write_section(&mut out, TAG_DOCUMENTS, &json(&documents)?)?;
    write_section(&mut out, TAG_TREES, &json(&trees)?)?;
    write_section(&mut out, TAG_ENTITIES, &json(&entities)?)?;
    write_section(&mut out, TAG_CHUNKS, &json(&chunks)?)?;
    write_section(&mut out, TAG_EMBEDDINGS, &encode_embeddings(corpus))?;
    out.flush()?;
    Ok(())
}

pub fn read_index<R: Read>(mut input: R) -> Result<Corpus, CorpusError> {
    let mut magic = [0u8; 7];
    input.read_exact(&mut magic).map_err(|_| format_err("file too short"))?;
    if &magic != MAGIC {
        return Err(format_err("bad magic bytes"));
    }
    let mut version = [0u8; 1];
    input
        .read_exact(&mut version)
        .map_err(|_| format_err("missing version byte"))?;
    if version[0] != FORMAT_VERSION {
        return Err(CorpusError::FormatVersion {
            found: version[0],
            expected: FORMAT_VERSION,
        });
    }
    let parse = |bytes: Vec<u8>| -> Result<serde_json::Value, CorpusError> {
        serde_json::from_slice(&bytes).map_err(|e| format_err(e.to_string()))
    };
    let documents: Vec<StoredDocument> = serde_json::from_value(parse(read_section(&mut input, TAG_DOCUMENTS)?)?)
        .map_err(|e| format_err(e.to_string()))?;
    let trees: Vec<Vec<DependencyTree>> =
        serde_json::from_value(parse(read_section(&mut input, TAG_TREES)?)?).map_err(|e| format_err(e.to_string()))?;
    let entities: Vec<EntityRecord> = serde_json::from_value(parse(read_section(&mut input, TAG_ENTITIES)?)?)
        .map_err(|e| format_err(e.to_string()))?;
    let stored_chunks: StoredChunks =
        serde_json::from_value(parse(read_section(&mut input, TAG_CHUNKS)?)?).map_err(|e| format_err(e.to_string()))?;
    let (dim, embeddings) = decode_embeddings(&read_section(&mut input, TAG_EMBEDDINGS)?)?;

    if documents.len() != trees.len() {
        return Err(format_err("document and tree sections disagree"));
    }
    let mut docs = Vec::with_capacity(documents.len());
    for (stored, doc_trees) in documents.into_iter().zip(trees) {
        if stored.sentence_texts.len() != doc_trees.len() {
            return Err(format_err(format!(
                "document `{}` sentence count mismatch",
                stored.doc_id
            )));
        }
        let mut sentences = Vec::with_capacity(doc_trees.len());
        for (text, tree) in stored.sentence_texts.into_iter().zip(doc_trees) {
            tree.revalidate()?;
            sentences.push(Sentence { text, tree });
        }
        docs.push(Document {
            doc_id: stored.doc_id,
            title: stored.title,
            text: stored.text,
            sentences,
            mentions: stored.mentions,
        });
    }
    let mut vectors: BTreeMap<String, Vec<f64>> = embeddings.into_iter().collect();
    let chunks = stored_chunks
        .chunks
        .into_iter()
        .map(|c| Chunk {
            embedding: vectors.remove(&c.chunk_id),
            chunk_id: c.chunk_id,
            doc_id: c.doc_id,
            sentence_range: c.start..c.end,
            text: c.text,
        })
        .collect();
    if let Some(orphan) = vectors.keys().next() {
        return Err(format_err(format!("embedding for unknown chunk `{orphan}`")));
    }
    let corpus = Corpus::from_stored(docs, chunks, stored_chunks.chunking, dim)?;
    let rebuilt: Vec<&EntityRecord> = corpus.entities().values().collect();
    if rebuilt.len() != entities.len() || rebuilt.iter().zip(&entities).any(|(a, b)| *a != b) {
        return Err(format_err("entity section disagrees with document mentions"));
    }
    Ok(corpus)
}

pub fn save_index(corpus: &Corpus, path: &Path) -> Result<(), CorpusError> {
    let file = File::create(path)?;
    write_index(corpus, BufWriter::new(file))
}

pub fn load_index(path: &Path) -> Result<Corpus, CorpusError> {
    let file = File::open(path)?;
    read_index(BufReader::new(file))
}
