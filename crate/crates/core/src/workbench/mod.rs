//! Scenario files, end-to-end runs, reports and the built-in corpus.

mod corpus;
mod report;
mod scenario;

pub use corpus::{corpus_get, corpus_list, corpus_run, CorpusError, CORPUS};
pub use report::{
    build_system, run_on_system, run_scenario, LoweDebug, QueryResult, Report, RunError,
    RunOptions, ScenarioEcho, SystemStats, REPORT_SCHEMA,
};
pub use scenario::{
    render_file, AdversarySection, BoundsSection, DdgSection, Diagnostic, KeysSection,
    ProtocolSection, Query, QuerySection, Scenario, ScenarioError, ScenarioFile, SessionSection,
    SoundnessSection,
};
