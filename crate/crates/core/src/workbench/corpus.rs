//! Scenarios shipped with the library.

use thiserror::Error;

use super::report::{run_scenario, Report, RunError, RunOptions};
use super::scenario::{Scenario, ScenarioError};

/// `(name, source)` of every built-in scenario.
pub const CORPUS: [(&str, &str); 4] = [
    ("challenge", include_str!("../../corpus/challenge.scn")),
    ("ddg", include_str!("../../corpus/ddg.scn")),
    ("ns", include_str!("../../corpus/ns.scn")),
    ("nsl", include_str!("../../corpus/nsl.scn")),
];

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("no corpus scenario named `{name}`; available: {}", available.join(", "))]
    Unknown {
        name: String,
        available: Vec<String>,
    },
    #[error("corpus scenario `{name}` is invalid: {source}")]
    Invalid {
        name: String,
        #[source]
        source: ScenarioError,
    },
    #[error(transparent)]
    Run(#[from] RunError),
}

pub fn corpus_list() -> Vec<&'static str> {
    CORPUS.iter().map(|(n, _)| *n).collect()
}

pub fn corpus_get(name: &str) -> Result<Scenario, CorpusError> {
    let (_, text) =
        CORPUS
            .iter()
            .find(|(n, _)| *n == name)
            .ok_or_else(|| CorpusError::Unknown {
                name: name.to_string(),
                available: corpus_list().iter().map(|s| s.to_string()).collect(),
            })?;
    Scenario::parse(text).map_err(|source| CorpusError::Invalid {
        name: name.to_string(),
        source,
    })
}

pub fn corpus_run(name: &str, opts: RunOptions) -> Result<Report, CorpusError> {
    Ok(run_scenario(&corpus_get(name)?, opts)?)
}
