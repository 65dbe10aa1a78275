//! Experiment orchestration, metrics, and reporting.
//!
//! [`experiment`] wires the full path — train on one side of a seeded
//! split, enumerate candidates, prune, score, threshold, ensemble — and
//! [`metrics`] turns outcomes into precision/recall/F rows. [`report`]
//! renders two forms: a machine-readable key/value dump that is
//! byte-identical across reruns with the same seed, and an aligned human
//! summary with timing and reference numbers for context.

pub mod experiment;
pub mod metrics;
pub mod report;

pub use experiment::{
    all_relations_baseline, all_relations_report, classify_components, component_hyper,
    parse_config, predict_relations, relation_hyper, run_experiment, run_window_sweep,
    train_components, train_relation_scorer, ComponentArtifact, ComponentSource,
    DiscourseSource, EvalReport, ExperimentConfig, ExperimentInputs, PairRow,
    RelationArtifact, RelationPredictors, RelationRun, RelationSection, SalienceArtifact,
    ScorerKind, Task, WindowRow,
};
pub use metrics::{
    evaluate_components, evaluate_relations, prf_from_counts, ComponentEval, PrfRow,
};
pub use report::{
    human_report, machine_report, parse_discourse_labels, render_prf, render_sweep,
    validate_report,
};

use crate::candidates::{CandidateError, PairKey};
use crate::corpus::CorpusError;
use crate::features::FeatureError;
use crate::models::ModelError;

/// Errors from configuration, orchestration, and reporting.
#[derive(Debug, thiserror::Error)]
pub enum PipelineError {
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("config line {line}: {message}")]
    ConfigParse { line: usize, message: String },
    #[error("discourse label line {line}: {message}")]
    DiscourseParse { line: usize, message: String },
    #[error("report line {line}: {message}")]
    ReportParse { line: usize, message: String },
    #[error("report failed validation: {}", .0.join("; "))]
    InvalidReport(Vec<String>),
    #[error("gold and predicted labels cover different propositions")]
    UniverseMismatch,
    #[error("prediction outside the candidate universe: {0}")]
    OutsideUniverse(PairKey),
    #[error("unknown reference: {0}")]
    UnknownReference(String),
    #[error("model class list does not match component labels: {0}")]
    BadModelClasses(String),
    #[error("{stage}: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<PipelineError>,
    },
    #[error(transparent)]
    Corpus(#[from] CorpusError),
    #[error(transparent)]
    Candidates(#[from] CandidateError),
    #[error(transparent)]
    Features(#[from] FeatureError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Attaches the failing stage's name to an error.
pub(crate) trait Staged<T> {
    fn stage(self, name: &'static str) -> Result<T, PipelineError>;
}

impl<T, E: Into<PipelineError>> Staged<T> for Result<T, E> {
    fn stage(self, name: &'static str) -> Result<T, PipelineError> {
        self.map_err(|e| PipelineError::Stage { stage: name, source: Box::new(e.into()) })
    }
}


#[cfg(test)]
mod fixture_sync {
    use super::testutil::mini_corpus;
    use crate::corpus::{parse_corpus, serialize_corpus};

    /// Pins the bundled corpus fixture to the generator above; regenerate
    /// with `THREADMINE_WRITE_FIXTURES=1 cargo test -p threadmine --lib fixture`.
    #[test]
    fn bundled_mini_corpus_matches_the_generator() {
        let path = concat!(env!("CARGO_MANIFEST_DIR"), "/tests/fixtures/mini_corpus.txt");
        let expected = serialize_corpus(&mini_corpus(10)).unwrap();
        if std::env::var_os("THREADMINE_WRITE_FIXTURES").is_some() {
            std::fs::write(path, &expected).unwrap();
        }
        let on_disk = std::fs::read_to_string(path).expect("fixture file present");
        assert_eq!(on_disk, expected, "fixture out of date; regenerate");
        assert_eq!(parse_corpus(&on_disk).unwrap().len(), 10);
    }
}
