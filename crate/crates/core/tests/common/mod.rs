#![allow(dead_code)]

pub mod oracle;

use std::fs::File;
use std::io::BufReader;
use std::path::PathBuf;

use mhqa_core::corpus::read_embeddings;
use mhqa_core::generator::ScriptedGenerator;
use mhqa_core::orchestrator::read_questions;
use mhqa_core::{load_corpus, Chunking, Corpus, Pipeline, QuestionInput, RunSettings};

pub const BOOM: &str = "Who plays the wife of the producer of Here Comes the Boom in Grown Ups?";

pub fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("tests/fixtures")
        .join(name)
}

fn open(name: &str) -> BufReader<File> {
    BufReader::new(File::open(fixture(name)).unwrap_or_else(|e| panic!("{name}: {e}")))
}

pub fn fixture_corpus() -> Corpus {
    let mut corpus = load_corpus(
        open("documents.jsonl"),
        open("trees.conllu"),
        open("entities.jsonl"),
        Chunking::default(),
    )
    .expect("fixture corpus loads");
    corpus
        .attach_embeddings(read_embeddings(open("embeddings.jsonl")).unwrap())
        .expect("fixture embeddings attach");
    corpus
}

pub fn stub() -> ScriptedGenerator {
    ScriptedGenerator::from_path(&fixture("stub_script.json")).expect("stub script parses")
}

pub fn pipeline() -> Pipeline {
    Pipeline::new(fixture_corpus(), Box::new(stub()), RunSettings::default())
}

pub fn questions(name: &str) -> Vec<QuestionInput> {
    read_questions(open(name)).expect("questions parse")
}

#[derive(serde::Deserialize)]
pub struct FixtureQuery {
    pub qid: String,
    pub text: String,
    pub entities: Vec<String>,
    pub vector: Vec<f64>,
}

pub fn queries() -> Vec<FixtureQuery> {
    use std::io::BufRead;
    open("queries.jsonl")
        .lines()
        .map(|l| serde_json::from_str(&l.unwrap()).unwrap())
        .collect()
}
