//! CoNLL-U ingestion and dependency-tree statistics.
//!
//! Only the ID, FORM, HEAD and DEPREL columns survive parsing. Multiword
//! token ranges (`3-4`) and empty nodes (`5.1`) are skipped. Descendant
//! counts are computed once, bottom-up, when a tree is built.

use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum TreebankError {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("sentence `{sentence_id}`: {message}")]
    Structure { sentence_id: String, message: String },
    #[error("token index {index} out of range for sentence `{sentence_id}` ({len} tokens)")]
    IndexOutOfRange {
        sentence_id: String,
        index: usize,
        len: usize,
    },
    #[error("i/o error: {0}")]
    Io(String),
}

/// One syntactic word. `index` is 1-based; `head == 0` marks the root.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Token {
    pub index: usize,
    pub form: String,
    pub head: usize,
    pub deprel: String,
}

impl Token {
    pub fn new(index: usize, form: impl Into<String>, head: usize, deprel: impl Into<String>) -> Self {
        Self {
            index,
            form: form.into(),
            head,
            deprel: deprel.into(),
        }
    }
}

/// A validated dependency tree with cached per-token descendant counts.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DependencyTree {
    sentence_id: String,
    text: Option<String>,
    tokens: Vec<Token>,
    descendants: Vec<usize>,
}

impl DependencyTree {
    /// Validates the head structure and computes descendant counts.
    pub fn new(sentence_id: impl Into<String>, tokens: Vec<Token>) -> Result<Self, TreebankError> {
        let sentence_id = sentence_id.into();
        let descendants = validate_and_count(&sentence_id, &tokens)?;
        Ok(Self {
            sentence_id,
            text: None,
            tokens,
            descendants,
        })
    }

    /// Builds a tree from a head array where `heads[i]` is the head of token `i + 1`.
    pub fn from_heads(sentence_id: impl Into<String>, heads: &[usize]) -> Result<Self, TreebankError> {
        let tokens = heads
            .iter()
            .enumerate()
            .map(|(i, &h)| Token::new(i + 1, format!("w{}", i + 1), h, "dep"))
            .collect();
        Self::new(sentence_id, tokens)
    }

    pub fn with_text(mut self, text: impl Into<String>) -> Self {
        self.text = Some(text.into());
        self
    }

    pub fn sentence_id(&self) -> &str {
        &self.sentence_id
    }

    pub fn text(&self) -> Option<&str> {
        self.text.as_deref()
    }

    pub fn tokens(&self) -> &[Token] {
        &self.tokens
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    /// 1-based index of the root token.
    pub fn root(&self) -> usize {
        self.tokens
            .iter()
            .find(|t| t.head == 0)
            .map(|t| t.index)
            .expect("validated tree has a root")
    }

    /// Surface text: the `# text` comment when present, else space-joined forms.
    pub fn surface(&self) -> String {
        match &self.text {
            Some(text) => text.clone(),
            None => self
                .tokens
                .iter()
                .map(|t| t.form.as_str())
                .collect::<Vec<_>>()
                .join(" "),
        }
    }

    /// Number of direct and indirect dependents of the 1-based `token_index`.
    pub fn descendant_count(&self, token_index: usize) -> Result<usize, TreebankError> {
        if token_index == 0 || token_index > self.tokens.len() {
            return Err(TreebankError::IndexOutOfRange {
                sentence_id: self.sentence_id.clone(),
                index: token_index,
                len: self.tokens.len(),
            });
        }
        Ok(self.descendants[token_index - 1])
    }

    /// All descendant counts in token order.
    pub fn descendant_counts(&self) -> &[usize] {
        &self.descendants
    }

    /// Re-checks structure and cached counts, e.g. after deserialization.
    pub fn revalidate(&self) -> Result<(), TreebankError> {
        let counts = validate_and_count(&self.sentence_id, &self.tokens)?;
        if counts != self.descendants {
            return Err(TreebankError::Structure {
                sentence_id: self.sentence_id.clone(),
                message: "cached descendant counts disagree with head links".into(),
            });
        }
        Ok(())
    }
}

fn structure_err(sentence_id: &str, message: impl Into<String>) -> TreebankError {
    TreebankError::Structure {
        sentence_id: sentence_id.to_string(),
        message: message.into(),
    }
}

fn validate_and_count(sentence_id: &str, tokens: &[Token]) -> Result<Vec<usize>, TreebankError> {
    let n = tokens.len();
    if n == 0 {
        return Err(structure_err(sentence_id, "sentence has no tokens"));
    }
    let mut children: Vec<Vec<usize>> = vec![Vec::new(); n + 1];
    let mut root = None;
    for (pos, token) in tokens.iter().enumerate() {
        if token.index != pos + 1 {
            return Err(structure_err(
                sentence_id,
                format!(
                    "token ids are not contiguous: expected {}, found {}",
                    pos + 1,
                    token.index
                ),
            ));
        }
        if token.head > n {
            return Err(structure_err(
                sentence_id,
                format!(
                    "token {} has head {} beyond sentence length {}",
                    token.index, token.head, n
                ),
            ));
        }
        if token.head == token.index {
            return Err(structure_err(
                sentence_id,
                format!("token {} is its own head", token.index),
            ));
        }
        if token.head == 0 {
            if let Some(previous) = root {
                return Err(structure_err(
                    sentence_id,
                    format!("multiple roots: tokens {previous} and {}", token.index),
                ));
            }
            root = Some(token.index);
        }
        children[token.head].push(token.index);
    }
    let root = root.ok_or_else(|| structure_err(sentence_id, "no root token (cycle in head links)"))?;

    // Breadth-first from the root yields a parent-before-child order; any
    // token it misses sits on a cycle.
    let mut order = Vec::with_capacity(n);
    order.push(root);
    let mut cursor = 0;
    while cursor < order.len() {
        let node = order[cursor];
        order.extend(children[node].iter().copied());
        cursor += 1;
    }
    if order.len() != n {
        let mut seen = vec![false; n + 1];
        for &i in &order {
            seen[i] = true;
        }
        let stray = (1..=n).find(|&i| !seen[i]).unwrap_or(0);
        return Err(structure_err(
            sentence_id,
            format!("cycle in head links (token {stray} is unreachable from root)"),
        ));
    }

    let mut counts = vec![0usize; n + 1];
    for &node in order.iter().rev() {
        let head = tokens[node - 1].head;
        if head != 0 {
            counts[head] += counts[node] + 1;
        }
    }
    counts.remove(0);
    Ok(counts)
}

/// Parses a CoNLL-U stream. `source` names the stream in default sentence
/// ids (`<source>:<ordinal>`, 0-based) when no `# sent_id` comment is given.
pub fn parse_conllu<R: BufRead>(input: R, source: &str) -> Result<Vec<DependencyTree>, TreebankError> {
    let mut trees = Vec::new();
    let mut block = SentenceBlock::default();
    for (line_no, line) in input.lines().enumerate() {
        let line_no = line_no + 1;
        let line = line.map_err(|e| TreebankError::Io(e.to_string()))?;
        let line = line.trim_end_matches('\r');
        if line.trim().is_empty() {
            if let Some(tree) = block.finish(source, trees.len())? {
                trees.push(tree);
            }
            continue;
        }
        if let Some(comment) = line.strip_prefix('#') {
            if let Some((key, value)) = comment.split_once('=') {
                match key.trim() {
                    "sent_id" => block.sent_id = Some(value.trim().to_string()),
                    "text" => block.text = Some(value.trim().to_string()),
                    _ => {}
                }
            }
            continue;
        }
        block.push_line(line, line_no)?;
    }
    if let Some(tree) = block.finish(source, trees.len())? {
        trees.push(tree);
    }
    Ok(trees)
}

#[derive(Default)]
struct SentenceBlock {
    sent_id: Option<String>,
    text: Option<String>,
    tokens: Vec<Token>,
}

impl SentenceBlock {
    fn push_line(&mut self, line: &str, line_no: usize) -> Result<(), TreebankError> {
        let columns: Vec<&str> = line.split('\t').collect();
        if columns.len() != 10 {
            return Err(TreebankError::Parse {
                line: line_no,
                message: format!("expected 10 tab-separated columns, found {}", columns.len()),
            });
        }
        let id = columns[0];
        if id.contains('-') || id.contains('.') {
            return Ok(());
        }
        let index: usize = id.parse().map_err(|_| TreebankError::Parse {
            line: line_no,
            message: format!("non-integer ID `{id}`"),
        })?;
        let head: usize = columns[6].parse().map_err(|_| TreebankError::Parse {
            line: line_no,
            message: format!("non-integer HEAD `{}`", columns[6]),
        })?;
        self.tokens.push(Token::new(index, columns[1], head, columns[7]));
        Ok(())
    }

    fn finish(&mut self, source: &str, ordinal: usize) -> Result<Option<DependencyTree>, TreebankError> {
        let block = std::mem::take(self);
        if block.tokens.is_empty() {
            return Ok(None);
        }
        let id = block.sent_id.unwrap_or_else(|| format!("{source}:{ordinal}"));
        let mut tree = DependencyTree::new(id, block.tokens)?;
        tree.text = block.text;
        Ok(Some(tree))
    }
}

/// Writes trees back as CoNLL-U. Discarded columns are emitted as `_`.
pub fn write_conllu<W: Write>(trees: &[DependencyTree], mut out: W) -> std::io::Result<()> {
    for tree in trees {
        writeln!(out, "# sent_id = {}", tree.sentence_id)?;
        if let Some(text) = &tree.text {
            writeln!(out, "# text = {text}")?;
        }
        for t in &tree.tokens {
            writeln!(
                out,
                "{}\t{}\t_\t_\t_\t_\t{}\t{}\t_\t_",
                t.index, t.form, t.head, t.deprel
            )?;
        }
        writeln!(out)?;
    }
    Ok(())
}
