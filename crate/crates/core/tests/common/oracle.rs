//! Slow, obviously-correct reimplementations used as test oracles.

use std::collections::BTreeMap;

use mhqa_core::treebank::DependencyTree;
use mhqa_core::{Chunking, Corpus, Document};
use rand::Rng;

/// Random rooted tree over `n` tokens as a 1-based head vector (0 = root).
/// Tokens are attached in a random order, each to an already-attached one.
pub fn random_heads<R: Rng>(rng: &mut R, n: usize) -> Vec<usize> {
    let mut order: Vec<usize> = (1..=n).collect();
    for i in (1..n).rev() {
        order.swap(i, rng.random_range(0..=i));
    }
    let mut heads = vec![0; n];
    for (pos, &tok) in order.iter().enumerate().skip(1) {
        heads[tok - 1] = order[rng.random_range(0..pos)];
    }
    heads
}

/// Counts, for every token, the tokens whose head chain passes through it.
pub fn brute_descendants(heads: &[usize]) -> Vec<usize> {
    let n = heads.len();
    let mut counts = vec![0; n];
    for (i, count) in counts.iter_mut().enumerate() {
        for j in 0..n {
            if i == j {
                continue;
            }
            let mut cur = heads[j];
            let mut steps = 0;
            while cur != 0 && steps <= n {
                if cur == i + 1 {
                    *count += 1;
                    break;
                }
                cur = heads[cur - 1];
                steps += 1;
            }
        }
    }
    counts
}

pub struct MiniMention {
    pub name: String,
    pub sentence: usize,
    pub start: usize,
    pub end: usize,
}

pub struct MiniDoc {
    pub id: String,
    pub sentences: Vec<Vec<usize>>,
    pub mentions: Vec<MiniMention>,
}

/// Up to 5 documents of up to 6 sentences, entities drawn from a pool of 8.
pub fn random_mini_corpus<R: Rng>(rng: &mut R) -> Vec<MiniDoc> {
    let pool: Vec<String> = (0..rng.random_range(1..=8)).map(|i| format!("E{i}")).collect();
    (0..rng.random_range(1..=5))
        .map(|d| {
            let sentences: Vec<Vec<usize>> = (0..rng.random_range(1..=6))
                .map(|_| {
                    let n = rng.random_range(1..=10);
                    random_heads(rng, n)
                })
                .collect();
            let mut mentions = Vec::new();
            for (s, heads) in sentences.iter().enumerate() {
                for _ in 0..rng.random_range(0..=3) {
                    let start = rng.random_range(0..heads.len());
                    let end = rng.random_range(start + 1..=heads.len().min(start + 3));
                    let name = pool[rng.random_range(0..pool.len())].clone();
                    mentions.push(MiniMention {
                        name,
                        sentence: s,
                        start,
                        end,
                    });
                }
            }
            MiniDoc {
                id: format!("d{d}"),
                sentences,
                mentions,
            }
        })
        .collect()
}

pub fn build_corpus(docs: &[MiniDoc]) -> Corpus {
    let documents = docs
        .iter()
        .map(|d| {
            let trees = d
                .sentences
                .iter()
                .enumerate()
                .map(|(i, h)| DependencyTree::from_heads(format!("{}#{i}", d.id), h).unwrap())
                .collect();
            let mut doc = Document::new(d.id.clone(), d.id.clone(), trees);
            for m in &d.mentions {
                doc.add_mention(&m.name, "ENT", m.sentence, m.start, m.end).unwrap();
            }
            doc
        })
        .collect();
    Corpus::build(documents, Chunking::default()).unwrap()
}

/// Window 3, stride 2, in the most literal form.
pub fn naive_chunk_ranges(n: usize) -> Vec<(usize, usize)> {
    let mut out = Vec::new();
    let mut start = 0;
    loop {
        let end = (start + 3).min(n);
        out.push((start, end));
        if end == n {
            return out;
        }
        start += 2;
    }
}

/// Entity -> importance over sentences `[lo, hi)` of one document.
pub fn naive_importances(doc: &MiniDoc, lo: usize, hi: usize) -> BTreeMap<String, u64> {
    let mut out = BTreeMap::new();
    for m in &doc.mentions {
        if m.sentence >= lo && m.sentence < hi {
            out.entry(m.name.to_lowercase()).or_insert(0);
        }
    }
    for (name, total) in out.iter_mut() {
        for s in lo..hi {
            let counts = brute_descendants(&doc.sentences[s]);
            let best = doc
                .mentions
                .iter()
                .filter(|m| m.sentence == s && m.name.to_lowercase() == *name)
                .flat_map(|m| counts[m.start..m.end].iter().copied())
                .max();
            *total += best.unwrap_or(0) as u64;
        }
    }
    out
}

/// (entity, importance, rank) sorted by importance desc, name asc.
pub fn naive_ranking(importances: &BTreeMap<String, u64>) -> Vec<(String, u64, usize)> {
    let mut v: Vec<(String, u64)> = importances.iter().map(|(k, v)| (k.clone(), *v)).collect();
    v.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(&b.0)));
    v.into_iter().enumerate().map(|(i, (e, imp))| (e, imp, i + 1)).collect()
}

pub fn naive_score(ranking: &[(String, u64, usize)], question: &[String]) -> f64 {
    let mut q = question.to_vec();
    q.sort();
    q.dedup();
    q.iter()
        .filter_map(|e| ranking.iter().find(|r| &r.0 == e))
        .map(|r| 1.0 / r.2 as f64)
        .sum()
}

/// Every chunk's (chunk_id, ranking) in chunk-id order.
pub fn naive_tables(docs: &[MiniDoc]) -> BTreeMap<String, Vec<(String, u64, usize)>> {
    let mut out = BTreeMap::new();
    for doc in docs {
        for (lo, hi) in naive_chunk_ranges(doc.sentences.len()) {
            out.insert(
                format!("{}/{lo}", doc.id),
                naive_ranking(&naive_importances(doc, lo, hi)),
            );
        }
    }
    out
}
