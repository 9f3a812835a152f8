//! Exact cosine-similarity search over precomputed chunk embeddings.

use std::collections::BTreeMap;

use crate::corpus::Corpus;
use crate::informativeness::sort_hits;
use crate::ContractViolation;

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn dot(u: &[f64], v: &[f64]) -> f64 {
    u.iter().zip(v).map(|(a, b)| a * b).sum()
}

pub fn cosine(u: &[f64], v: &[f64]) -> Result<f64, ContractViolation> {
    if u.len() != v.len() {
        return Err(ContractViolation(format!(
            "dimension mismatch: {} vs {}",
            u.len(),
            v.len()
        )));
    }
    let (nu, nv) = (norm(u), norm(v));
    if nu == 0.0 || nv == 0.0 {
        return Err(ContractViolation("cosine of a zero vector".into()));
    }
    Ok((dot(u, v) / (nu * nv)).clamp(-1.0, 1.0))
}

#[derive(Debug, Clone, PartialEq)]
pub struct VectorIndex {
    dimension: usize,
    entries: BTreeMap<String, (Vec<f64>, f64)>,
}

impl VectorIndex {
    pub fn new(dimension: usize) -> Result<Self, ContractViolation> {
        if dimension == 0 {
            return Err(ContractViolation("vector dimension must be positive".into()));
        }
        Ok(Self {
            dimension,
            entries: BTreeMap::new(),
        })
    }

    /// Index of every chunk that carries an embedding. Empty (dimension 1)
    /// when the corpus has none.
    pub fn from_corpus(corpus: &Corpus) -> Self {
        let mut index = Self::new(corpus.embedding_dim().unwrap_or(1)).expect("positive dimension");
        for chunk in corpus.chunks() {
            if let Some(v) = &chunk.embedding {
                index
                    .insert(chunk.chunk_id.clone(), v.clone())
                    .expect("corpus validates embeddings on attach");
            }
        }
        index
    }

    pub fn insert(&mut self, chunk_id: String, vector: Vec<f64>) -> Result<(), ContractViolation> {
        if vector.len() != self.dimension {
            return Err(ContractViolation(format!(
                "vector for `{chunk_id}` has dimension {}, index has {}",
                vector.len(),
                self.dimension
            )));
        }
        let n = norm(&vector);
        if n == 0.0 || !n.is_finite() {
            return Err(ContractViolation(format!(
                "vector for `{chunk_id}` is zero or non-finite"
            )));
        }
        self.entries.insert(chunk_id, (vector, n));
        Ok(())
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Every entry ranked by similarity; descending, ties by chunk id.
    pub fn rank_all(&self, query: &[f64]) -> Result<Vec<(String, f64)>, ContractViolation> {
        if query.len() != self.dimension {
            return Err(ContractViolation(format!(
                "query dimension {} does not match index dimension {}",
                query.len(),
                self.dimension
            )));
        }
        let qn = norm(query);
        if qn == 0.0 || !qn.is_finite() {
            return Err(ContractViolation("query vector is zero or non-finite".into()));
        }
        let mut hits: Vec<(String, f64)> = self
            .entries
            .iter()
            .map(|(id, (v, n))| (id.clone(), (dot(query, v) / (qn * n)).clamp(-1.0, 1.0)))
            .collect();
        sort_hits(&mut hits);
        Ok(hits)
    }

    pub fn top_k(&self, query: &[f64], k: usize) -> Result<Vec<(String, f64)>, ContractViolation> {
        if k == 0 {
            return Err(ContractViolation("similarity top-k requires k >= 1".into()));
        }
        let mut hits = self.rank_all(query)?;
        hits.truncate(k);
        Ok(hits)
    }
}

pub fn top_k_by_similarity(
    index: &VectorIndex,
    query: &[f64],
    k: usize,
) -> Result<Vec<(String, f64)>, ContractViolation> {
    index.top_k(query, k)
}
