use std::collections::{BTreeMap, BTreeSet};
use std::fs::{self, File};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use serde::{Deserialize, Serialize};

use mhqa_core::config::API_KEY_ENV;
use mhqa_core::corpus::read_embeddings;
use mhqa_core::generator::{Embedder, Generator, HttpEmbedder, HttpGenerator, PromptSet, ScriptedGenerator};
use mhqa_core::orchestrator::read_questions;
use mhqa_core::{
    aggregate, answer_score, load_corpus, load_index, retrieve, save_index, AnswerScore, Chunking, Config, Corpus,
    GeneratorMode, InformativenessIndex, MeanScore, Pipeline, QuestionEntities, QuestionInput, RetrievalQuery,
    RunSettings, VectorIndex,
};

use crate::Internal;

pub const INDEX_FILE: &str = "index.bin";

fn open(path: &Path) -> Result<BufReader<File>> {
    File::open(path)
        .map(BufReader::new)
        .with_context(|| format!("cannot open {}", path.display()))
}

fn index_path(dir: &Path) -> PathBuf {
    dir.join(INDEX_FILE)
}

fn read_index(dir: &Path) -> Result<Corpus> {
    let path = index_path(dir);
    load_index(&path).with_context(|| format!("cannot load index {}", path.display()))
}

fn to_json<T: Serialize>(value: &T, pretty: bool) -> Result<String> {
    let text = if pretty {
        serde_json::to_string_pretty(value)
    } else {
        serde_json::to_string(value)
    };
    text.map_err(|e| anyhow!(Internal(format!("serializing output: {e}"))))
}

fn print_line(text: &str) -> Result<()> {
    let mut out = std::io::stdout().lock();
    writeln!(out, "{text}")?;
    out.flush()?;
    Ok(())
}

fn write_file(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).with_context(|| format!("cannot write {}", path.display()))
}

#[derive(Serialize)]
struct IndexSummary {
    documents: usize,
    sentences: usize,
    entities: usize,
    chunks: usize,
    embedded_chunks: usize,
    embedding_dim: Option<usize>,
}

impl IndexSummary {
    fn of(corpus: &Corpus) -> Self {
        Self {
            documents: corpus.documents().len(),
            sentences: corpus.documents().iter().map(|d| d.sentences.len()).sum(),
            entities: corpus.entities().len(),
            chunks: corpus.chunks().len(),
            embedded_chunks: corpus.chunks().iter().filter(|c| c.embedding.is_some()).count(),
            embedding_dim: corpus.embedding_dim(),
        }
    }
}

fn attach(corpus: &mut Corpus, embeddings: &Path) -> Result<()> {
    let vectors = read_embeddings(open(embeddings)?).with_context(|| format!("reading {}", embeddings.display()))?;
    corpus
        .attach_embeddings(vectors)
        .with_context(|| format!("attaching {}", embeddings.display()))?;
    Ok(())
}

pub fn ingest(
    config: &Config,
    docs: &Path,
    trees: &Path,
    entities: &Path,
    embeddings: Option<&Path>,
    out: &Path,
) -> Result<()> {
    let chunking = Chunking::new(config.chunk_window, config.chunk_stride)?;
    let mut corpus = load_corpus(open(docs)?, open(trees)?, open(entities)?, chunking)?;
    if let Some(path) = embeddings {
        attach(&mut corpus, path)?;
    }
    fs::create_dir_all(out).with_context(|| format!("cannot create {}", out.display()))?;
    save_index(&corpus, &index_path(out))?;
    print_line(&to_json(&IndexSummary::of(&corpus), false)?)
}

pub fn index(dir: &Path, embeddings: Option<&Path>) -> Result<()> {
    let mut corpus = read_index(dir)?;
    if let Some(path) = embeddings {
        attach(&mut corpus, path)?;
        save_index(&corpus, &index_path(dir))?;
    }
    print_line(&to_json(&IndexSummary::of(&corpus), false)?)
}

pub fn score(config: &Config, dir: &Path, out: Option<&Path>) -> Result<()> {
    let corpus = read_index(dir)?;
    let index = InformativenessIndex::build(&corpus, config.granularity);
    let mut text = String::new();
    for table in index.tables() {
        text.push_str(&to_json(table, false)?);
        text.push('\n');
    }
    match out {
        Some(path) => write_file(path, &text),
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout.write_all(text.as_bytes())?;
            Ok(stdout.flush()?)
        }
    }
}

#[derive(Deserialize)]
struct QueryLine {
    qid: String,
    text: String,
    #[serde(default)]
    entities: Option<Vec<String>>,
    #[serde(default)]
    vector: Option<Vec<f64>>,
}

fn read_jsonl<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<Vec<T>> {
    let mut out = Vec::new();
    for (i, line) in open(path)?.lines().enumerate() {
        let line = line.with_context(|| format!("reading {}", path.display()))?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(&line).with_context(|| format!("{}:{}", path.display(), i + 1))?);
    }
    Ok(out)
}

fn api_key() -> Option<String> {
    std::env::var(API_KEY_ENV).ok().filter(|k| !k.is_empty())
}

fn embedder(config: &Config) -> Result<Option<Box<dyn Embedder>>> {
    match (&config.generator_mode, &config.embedding_endpoint) {
        (GeneratorMode::Live, Some(url)) => Ok(Some(Box::new(HttpEmbedder::new(
            url.clone(),
            config.embedding_model.clone(),
            api_key(),
        )?))),
        _ => Ok(None),
    }
}

pub fn retrieve_cmd(config: &Config, dir: &Path, queries: &Path, qid: Option<&str>) -> Result<()> {
    let corpus = read_index(dir)?;
    let mut lines: Vec<QueryLine> = read_jsonl(queries)?;
    if let Some(id) = qid {
        lines.retain(|q| q.qid == id);
        if lines.is_empty() {
            bail!("no query with qid `{id}` in {}", queries.display());
        }
    }
    let info = InformativenessIndex::build(&corpus, config.granularity);
    let vectors = VectorIndex::from_corpus(&corpus);
    let embedder = embedder(config)?;
    for q in &lines {
        let entities = match &q.entities {
            Some(list) => QuestionEntities::new(list),
            None => QuestionEntities::from_normalized(corpus.match_entities(&q.text)),
        };
        let vector = match (&q.vector, &embedder) {
            (Some(v), _) => Some(v.clone()),
            (None, Some(e)) => Some(e.embed(&q.text)?),
            (None, None) => None,
        };
        let result = retrieve(
            &info,
            &vectors,
            &RetrievalQuery {
                query_id: &q.qid,
                entities: &entities,
                vector: vector.as_deref(),
                k_info: config.k_info,
                k_sim: config.k_sim,
            },
        )
        .with_context(|| format!("query `{}`", q.qid))?;
        print_line(&to_json(&result, qid.is_some())?)?;
    }
    Ok(())
}

fn pipeline(config: &Config, corpus: Corpus) -> Result<Pipeline> {
    let generator: Box<dyn Generator> = match config.generator_mode {
        GeneratorMode::Stub => match &config.stub_script {
            Some(path) => Box::new(ScriptedGenerator::from_path(path)?),
            None => Box::new(ScriptedGenerator::default()),
        },
        GeneratorMode::Live => Box::new(HttpGenerator::new(
            config.endpoint.clone(),
            config.decomposer_model.clone(),
            config.answer_model.clone(),
            api_key(),
        )?),
    };
    let mut pipeline = Pipeline::new(corpus, generator, RunSettings::from(config));
    if let Some(path) = &config.prompts {
        let source = fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))?;
        pipeline = pipeline.with_prompts(PromptSet::from_toml(&source)?);
    }
    if let Some(e) = embedder(config)? {
        pipeline = pipeline.with_embedder(e);
    }
    Ok(pipeline)
}

pub fn answer(config: &Config, dir: &Path, qid: &str, question: &str, gold: Option<&str>) -> Result<()> {
    let pipeline = pipeline(config, read_index(dir)?)?;
    let mut input = QuestionInput::new(qid, question);
    input.answer = gold.map(str::to_string);
    match pipeline.run_question(&input) {
        Ok(trace) => print_line(&to_json(&trace, true)?),
        Err(e) => {
            print_line(&to_json(&e.trace, true)?)?;
            Err(e.into())
        }
    }
}

#[derive(Serialize)]
struct EvalSummary<'a> {
    questions: usize,
    failures: usize,
    scored: usize,
    metrics: &'a Option<MeanScore>,
}

pub fn eval(config: &Config, dir: &Path, questions: &Path, out: Option<&Path>) -> Result<()> {
    let inputs = read_questions(open(questions)?).with_context(|| format!("reading {}", questions.display()))?;
    let report = pipeline(config, read_index(dir)?)?.run_eval(&inputs);
    let json = to_json(&report, true)?;
    match out {
        Some(path) => {
            write_file(path, &format!("{json}\n"))?;
            print_line(&to_json(
                &EvalSummary {
                    questions: report.questions,
                    failures: report.failures,
                    scored: report.scored,
                    metrics: &report.metrics,
                },
                false,
            )?)
        }
        None => print_line(&json),
    }
}

#[derive(Deserialize)]
struct AnswerLine {
    qid: String,
    #[serde(alias = "prediction")]
    answer: String,
}

#[derive(Serialize)]
struct ScoredAnswer {
    qid: String,
    score: AnswerScore,
}

#[derive(Serialize)]
struct ScoreReport {
    gold: usize,
    predicted: usize,
    /// Gold qids without a prediction; scored against an empty answer.
    missing: Vec<String>,
    metrics: Option<MeanScore>,
    results: Vec<ScoredAnswer>,
}

fn by_qid(path: &Path) -> Result<BTreeMap<String, String>> {
    let mut out = BTreeMap::new();
    for line in read_jsonl::<AnswerLine>(path)? {
        if out.insert(line.qid.clone(), line.answer).is_some() {
            bail!("{}: duplicate qid `{}`", path.display(), line.qid);
        }
    }
    Ok(out)
}

pub fn score_answers(pred: &Path, gold: &Path) -> Result<()> {
    let predictions = by_qid(pred)?;
    let golds = by_qid(gold)?;
    let mut missing = Vec::new();
    let results: Vec<ScoredAnswer> = golds
        .iter()
        .map(|(qid, g)| {
            let p = predictions.get(qid).map(String::as_str).unwrap_or_else(|| {
                missing.push(qid.clone());
                ""
            });
            ScoredAnswer {
                qid: qid.clone(),
                score: answer_score(p, g),
            }
        })
        .collect();
    let scores: Vec<AnswerScore> = results.iter().map(|r| r.score).collect();
    let report = ScoreReport {
        gold: golds.len(),
        predicted: predictions.len(),
        missing,
        metrics: aggregate(&scores),
        results,
    };
    print_line(&to_json(&report, true)?)
}

pub fn filter_data(config: &Config, dir: &Path, candidates: &Path, out: &Path) -> Result<()> {
    let inputs = read_questions(open(candidates)?).with_context(|| format!("reading {}", candidates.display()))?;
    let ids: BTreeSet<&str> = inputs.iter().map(|c| c.qid.as_str()).collect();
    if ids.len() != inputs.len() {
        bail!("{}: candidate qids must be unique", candidates.display());
    }
    let split = pipeline(config, read_index(dir)?)?.filter_by_answer_consistency(&inputs);
    fs::create_dir_all(out).with_context(|| format!("cannot create {}", out.display()))?;
    for (name, outcomes) in [
        ("consistent.jsonl", &split.consistent),
        ("inconsistent.jsonl", &split.inconsistent),
    ] {
        let path = out.join(name);
        let mut file =
            BufWriter::new(File::create(&path).with_context(|| format!("cannot create {}", path.display()))?);
        for o in outcomes {
            writeln!(file, "{}", to_json(o, false)?)?;
        }
        file.flush()?;
    }
    print_line(&format!(
        "{{\"consistent\":{},\"inconsistent\":{}}}",
        split.consistent.len(),
        split.inconsistent.len()
    ))
}
