mod args;
mod commands;

use std::fmt;
use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::Parser;

use args::{Cli, Command};
use mhqa_core::Config;

/// Marks a failure that is a defect in this program rather than in its input.
#[derive(Debug)]
pub struct Internal(pub String);

impl fmt::Display for Internal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "internal error: {}", self.0)
    }
}

impl std::error::Error for Internal {}

fn resolve_config(cli: &Cli) -> anyhow::Result<Config> {
    let file = match &cli.settings.config {
        Some(path) => Some(
            std::fs::read_to_string(path).map_err(|e| anyhow::anyhow!("cannot read config {}: {e}", path.display()))?,
        ),
        None => None,
    };
    let flags = cli.settings.pairs().map_err(anyhow::Error::msg)?;
    Ok(Config::resolve(file.as_deref(), |var| std::env::var(var).ok(), &flags)?)
}

fn run(cli: Cli) -> anyhow::Result<()> {
    let config = resolve_config(&cli)?;
    match &cli.command {
        Command::Ingest {
            docs,
            trees,
            entities,
            embeddings,
            out,
        } => commands::ingest(&config, docs, trees, entities, embeddings.as_deref(), out),
        Command::Index { index, embeddings } => commands::index(index, embeddings.as_deref()),
        Command::Score { index, out } => commands::score(&config, index, out.as_deref()),
        Command::Retrieve { index, queries, qid } => commands::retrieve_cmd(&config, index, queries, qid.as_deref()),
        Command::Answer {
            index,
            question,
            qid,
            gold,
        } => commands::answer(&config, index, qid, question, gold.as_deref()),
        Command::Eval { index, questions, out } => commands::eval(&config, index, questions, out.as_deref()),
        Command::ScoreAnswers { pred, gold } => commands::score_answers(pred, gold),
        Command::FilterData { index, candidates, out } => commands::filter_data(&config, index, candidates, out),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => ExitCode::SUCCESS,
                _ => ExitCode::from(1),
            };
        }
    };
    match std::panic::catch_unwind(|| run(cli)) {
        Ok(Ok(())) => ExitCode::SUCCESS,
        Ok(Err(e)) => {
            eprintln!("error: {e:#}");
            if e.downcast_ref::<Internal>().is_some() {
                ExitCode::from(2)
            } else {
                ExitCode::from(1)
            }
        }
        Err(_) => ExitCode::from(2),
    }
}
