mod common;

use common::oracle::*;
use mhqa_core::treebank::DependencyTree;
use mhqa_core::{build_table, chunk_score, entity_importance, InformativenessIndex, QuestionEntities, Scope};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[test]
fn descendant_counts_match_ancestor_enumeration() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for t in 0..300 {
        let n = rng.random_range(1..=50);
        let heads = random_heads(&mut rng, n);
        let tree = DependencyTree::from_heads(format!("t{t}"), &heads).unwrap();
        let expected = brute_descendants(&heads);
        for (i, &count) in expected.iter().enumerate() {
            assert_eq!(tree.descendant_count(i + 1).unwrap(), count);
        }
        assert_eq!(tree.descendant_count(tree.root()).unwrap(), n - 1);
    }
}

#[test]
fn chunk_tables_match_naive_reimplementation() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    for _ in 0..60 {
        let docs = random_mini_corpus(&mut rng);
        let corpus = build_corpus(&docs);
        let expected = naive_tables(&docs);
        let ids: Vec<&str> = corpus.chunks().iter().map(|c| c.chunk_id.as_str()).collect();
        assert_eq!(ids, expected.keys().map(String::as_str).collect::<Vec<_>>());

        for chunk in corpus.chunks() {
            let table = build_table(chunk, &corpus);
            let got: Vec<(String, u64, usize)> = table
                .entities
                .iter()
                .map(|e| (e.entity.clone(), e.importance, e.rank))
                .collect();
            assert_eq!(got, expected[&chunk.chunk_id], "{}", chunk.chunk_id);

            let doc = corpus.document(&chunk.doc_id).unwrap();
            for (name, imp, _) in &got {
                let record = corpus.entity(name).unwrap();
                assert_eq!(entity_importance(Scope::chunk(doc, chunk), record), *imp);
            }
        }

        let pool: Vec<String> = (0..8).map(|i| format!("e{i}")).chain(["zz".to_string()]).collect();
        let index = InformativenessIndex::build(&corpus, mhqa_core::Granularity::Chunk);
        for _ in 0..5 {
            let q: Vec<String> = pool.iter().filter(|_| rng.random_bool(0.4)).cloned().collect();
            let entities = QuestionEntities::new(&q);
            let mut naive_hits: Vec<(String, f64)> = Vec::new();
            for (id, ranking) in &expected {
                let want = naive_score(ranking, &q);
                let got = chunk_score(index.table(id).unwrap(), &entities);
                assert!((want - got).abs() <= 1e-12, "{id}: {want} vs {got}");
                if want > 0.0 {
                    naive_hits.push((id.clone(), want));
                }
            }
            naive_hits.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
            let k = rng.random_range(1..=10);
            naive_hits.truncate(k);
            let hits = index.top_k(&entities, k).unwrap();
            assert_eq!(
                hits.iter().map(|h| &h.0).collect::<Vec<_>>(),
                naive_hits.iter().map(|h| &h.0).collect::<Vec<_>>()
            );
        }
    }
}
