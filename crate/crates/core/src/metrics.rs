//! Token-level answer scoring: exact match, precision, recall and F1 over
//! normalized answer strings.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

const ARTICLES: [&str; 3] = ["a", "an", "the"];

fn is_punctuation(c: char) -> bool {
    c.is_ascii_punctuation() || (!c.is_ascii() && !c.is_alphanumeric() && !c.is_whitespace())
}

/// Lowercases, deletes punctuation, drops the articles `a`/`an`/`the` and
/// collapses whitespace. Punctuation goes before articles so the result is
/// a fixed point (`"the."` becomes `""`, not `"the"`).
pub fn normalize_answer(s: &str) -> String {
    let lowered = s.to_lowercase();
    let no_punct: String = lowered.chars().filter(|&c| !is_punctuation(c)).collect();
    no_punct
        .split_whitespace()
        .filter(|t| !ARTICLES.contains(t))
        .collect::<Vec<_>>()
        .join(" ")
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AnswerScore {
    pub f1: f64,
    pub em: u8,
    pub precision: f64,
    pub recall: f64,
}

impl AnswerScore {
    pub const PERFECT: Self = Self {
        f1: 1.0,
        em: 1,
        precision: 1.0,
        recall: 1.0,
    };
    pub const ZERO: Self = Self {
        f1: 0.0,
        em: 0,
        precision: 0.0,
        recall: 0.0,
    };
}

/// Size of the multiset intersection of two token lists.
pub fn token_overlap(a: &[&str], b: &[&str]) -> usize {
    let mut counts: HashMap<&str, usize> = HashMap::new();
    for t in a {
        *counts.entry(t).or_insert(0) += 1;
    }
    b.iter()
        .filter(|t| match counts.get_mut(*t) {
            Some(n) if *n > 0 => {
                *n -= 1;
                true
            }
            _ => false,
        })
        .count()
}

pub fn answer_score(prediction: &str, gold: &str) -> AnswerScore {
    let pred = normalize_answer(prediction);
    let gold = normalize_answer(gold);
    let pred_tokens: Vec<&str> = pred.split_whitespace().collect();
    let gold_tokens: Vec<&str> = gold.split_whitespace().collect();
    match (pred_tokens.is_empty(), gold_tokens.is_empty()) {
        (true, true) => return AnswerScore::PERFECT,
        (true, false) | (false, true) => return AnswerScore::ZERO,
        _ => {}
    }
    let overlap = token_overlap(&pred_tokens, &gold_tokens) as f64;
    let precision = overlap / pred_tokens.len() as f64;
    let recall = overlap / gold_tokens.len() as f64;
    let f1 = if precision + recall == 0.0 {
        0.0
    } else {
        2.0 * precision * recall / (precision + recall)
    };
    AnswerScore {
        f1,
        em: u8::from(pred == gold),
        precision,
        recall,
    }
}

/// Dataset-level means. `em` here is a rate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeanScore {
    pub f1: f64,
    pub em: f64,
    pub precision: f64,
    pub recall: f64,
}

/// `None` when there is nothing to average.
pub fn aggregate(scores: &[AnswerScore]) -> Option<MeanScore> {
    if scores.is_empty() {
        return None;
    }
    let n = scores.len() as f64;
    let mean = |f: fn(&AnswerScore) -> f64| scores.iter().map(f).sum::<f64>() / n;
    Some(MeanScore {
        f1: mean(|s| s.f1),
        em: mean(|s| f64::from(s.em)),
        precision: mean(|s| s.precision),
        recall: mean(|s| s.recall),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn normalize_cases() {
        assert_eq!(normalize_answer("Maria Bello"), "maria bello");
        assert_eq!(normalize_answer("The Colosseum."), "colosseum");
        assert_eq!(normalize_answer(""), "");
        assert_eq!(normalize_answer("  An   apple,  a DAY "), "apple day");
        assert_eq!(normalize_answer("the."), "");
    }

    #[test]
    fn score_cases() {
        assert_eq!(answer_score("Maria Bello", "Maria Bello"), AnswerScore::PERFECT);
        let s = answer_score("Kevin", "Kevin James");
        assert_eq!(s.precision, 1.0);
        assert_eq!(s.recall, 0.5);
        assert!((s.f1 - 2.0 / 3.0).abs() < 1e-12);
        assert_eq!(s.em, 0);
        assert_eq!(answer_score("", "Kevin James"), AnswerScore::ZERO);
        assert_eq!(answer_score("Kevin James", ""), AnswerScore::ZERO);
        assert_eq!(answer_score("the", ""), AnswerScore::PERFECT);
    }

    #[test]
    fn bag_overlap_counts_duplicates() {
        assert_eq!(token_overlap(&["new", "new", "york"], &["new", "york", "york"]), 2);
        let s = answer_score("new new york", "new york");
        assert!((s.precision - 2.0 / 3.0).abs() < 1e-12);
        assert_eq!(s.recall, 1.0);
    }

    #[test]
    fn aggregates() {
        assert!(aggregate(&[]).is_none());
        let m = aggregate(&[AnswerScore::PERFECT, AnswerScore::ZERO]).unwrap();
        assert_eq!(m.f1, 0.5);
        assert_eq!(m.em, 0.5);
        // hand means of (1,1,1,1), (0.5,0,1,1/3), (2/3,0,1,0.5)
        let scores = [
            AnswerScore::PERFECT,
            answer_score("Shirley", "Shirley New York"),
            answer_score("Kevin", "Kevin James"),
        ];
        let m = aggregate(&scores).unwrap();
        assert!((m.f1 - (1.0 + 0.5 + 2.0 / 3.0) / 3.0).abs() < 1e-12);
        assert!((m.em - 1.0 / 3.0).abs() < 1e-12);
        assert!((m.precision - 1.0).abs() < 1e-12);
        assert!((m.recall - (1.0 + 1.0 / 3.0 + 0.5) / 3.0).abs() < 1e-12);
    }
}
