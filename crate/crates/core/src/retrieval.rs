//! Dual-path retrieval: informativeness-ranked chunks followed by
//! similarity-ranked chunks, deduplicated in that order.

use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use crate::corpus::Corpus;
use crate::dense::VectorIndex;
use crate::informativeness::{InformativenessIndex, QuestionEntities};
use crate::ContractViolation;

pub const DEFAULT_K_INFO: usize = 15;
pub const DEFAULT_K_SIM: usize = 10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RetrievalResult {
    pub query_id: String,
    pub informativeness_hits: Vec<(String, f64)>,
    pub similarity_hits: Vec<(String, f64)>,
    pub fused: Vec<String>,
}

#[derive(Debug, Clone)]
pub struct RetrievalQuery<'a> {
    pub query_id: &'a str,
    pub entities: &'a QuestionEntities,
    pub vector: Option<&'a [f64]>,
    pub k_info: usize,
    pub k_sim: usize,
}

/// Runs both retrieval paths and concatenates them. `k_info == 0` or
/// `k_sim == 0` disables the corresponding path; a missing query vector
/// leaves the similarity path empty.
pub fn retrieve(
    informativeness: &InformativenessIndex,
    vectors: &VectorIndex,
    query: &RetrievalQuery<'_>,
) -> Result<RetrievalResult, ContractViolation> {
    if query.k_info == 0 && query.k_sim == 0 {
        return Err(ContractViolation("k_info and k_sim cannot both be 0".into()));
    }
    let (info, sim) = rayon::join(
        || match query.k_info {
            0 => Ok(Vec::new()),
            k => informativeness.top_k(query.entities, k),
        },
        || match (query.k_sim, query.vector) {
            (0, _) | (_, None) => Ok(Vec::new()),
            _ if vectors.is_empty() => Ok(Vec::new()),
            (k, Some(v)) => vectors.top_k(v, k),
        },
    );
    let (informativeness_hits, similarity_hits) = (info?, sim?);
    let fused = fuse(&informativeness_hits, &similarity_hits);
    Ok(RetrievalResult {
        query_id: query.query_id.to_string(),
        informativeness_hits,
        similarity_hits,
        fused,
    })
}

/// Ordered union: first list in order, then unseen ids from the second.
pub fn fuse(first: &[(String, f64)], second: &[(String, f64)]) -> Vec<String> {
    let mut seen = HashSet::new();
    first
        .iter()
        .chain(second)
        .filter(|(id, _)| seen.insert(id.as_str()))
        .map(|(id, _)| id.clone())
        .collect()
}

/// Chunk texts for the fused ids. With a budget, stops before the first
/// chunk that would push the total character count past it.
pub fn context_texts(corpus: &Corpus, fused: &[String], char_budget: Option<usize>) -> Vec<String> {
    let mut used = 0;
    let mut out = Vec::new();
    for id in fused {
        let Some(chunk) = corpus.chunk(id) else { continue };
        let len = chunk.text.chars().count();
        if let Some(budget) = char_budget {
            if used + len > budget {
                break;
            }
        }
        used += len;
        out.push(chunk.text.clone());
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn hits(ids: &[&str]) -> Vec<(String, f64)> {
        ids.iter()
            .enumerate()
            .map(|(i, id)| (id.to_string(), 1.0 / (i + 1) as f64))
            .collect()
    }

    #[test]
    fn disjoint_lists_concatenate() {
        let a: Vec<String> = (0..15).map(|i| format!("a{i:02}")).collect();
        let b: Vec<String> = (0..10).map(|i| format!("b{i:02}")).collect();
        let a_ref: Vec<&str> = a.iter().map(String::as_str).collect();
        let b_ref: Vec<&str> = b.iter().map(String::as_str).collect();
        assert_eq!(fuse(&hits(&a_ref), &hits(&b_ref)).len(), 25);
    }

    #[test]
    fn identical_lists_dedup() {
        let a: Vec<String> = (0..15).map(|i| format!("c{i:02}")).collect();
        let a_ref: Vec<&str> = a.iter().map(String::as_str).collect();
        let fused = fuse(&hits(&a_ref), &hits(&a_ref[..10]));
        assert_eq!(fused, a);
    }

    #[test]
    fn order_is_first_then_second() {
        let fused = fuse(&hits(&["x", "y"]), &hits(&["z", "x", "w"]));
        assert_eq!(fused, vec!["x", "y", "z", "w"]);
    }

    #[test]
    fn both_paths_disabled() {
        let corpus = Corpus::empty();
        let info = InformativenessIndex::build(&corpus, Default::default());
        let vectors = VectorIndex::from_corpus(&corpus);
        let q = QuestionEntities::default();
        let query = RetrievalQuery {
            query_id: "q",
            entities: &q,
            vector: None,
            k_info: 0,
            k_sim: 0,
        };
        assert!(retrieve(&info, &vectors, &query).is_err());
    }
}
