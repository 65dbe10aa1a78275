//! End-to-end experiment orchestration: train, filter, score, evaluate.

use std::collections::{BTreeMap, BTreeSet};
use std::path::PathBuf;
use std::str::FromStr;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::candidates::{
    apply_target_constraints, apply_target_selection, apply_window, attach_gold_labels,
    enumerate_inter, enumerate_intra, gold_labels, select_targets, CandidatePair, ConstantScorer,
    InterScope, LabelMap, PairKey, SalienceScorer, WINDOW_FILTER,
};
use crate::corpus::{
    ensure_valid, split_corpus, ComponentLabel, RelationKind, Thread,
};
use crate::features::{
    build_component_vocabulary, component_features, heuristic_discourse_label, pair_features,
    pair_vocabulary, FeatureVocabulary, LexiconSet,
};
use crate::models::linear::{train_linear, LinearConfig, LinearModel};
use crate::models::scores::{ensemble_or, PredictionSet, ScoreTable};
use crate::models::threshold::{tune_threshold, Threshold};
use crate::models::{Dataset, SavedModel};

use super::metrics::{
    evaluate_components, evaluate_relations, prf_from_counts, ComponentEval, PrfRow,
    COMPONENT_CLASSES,
};
use super::{PipelineError, Staged};

/// Fraction of threads held out as the evaluation split.
pub const TEST_FRACTION: f64 = 0.1;
/// Fraction of training threads carved off for threshold tuning.
pub const DEV_FRACTION: f64 = 0.1;
/// Unigrams must occur this often to enter a trained vocabulary.
pub const MIN_UNIGRAM_COUNT: usize = 2;

/// The heuristic's fallback discourse label; it asserts no relation, so the
/// discourse voter stays silent on it.
const NON_VOTING_DISCOURSE: &str = "Elaboration";

const SALT_COMPONENTS: u64 = 1;
const SALT_RELATIONS: u64 = 2;
const SALT_DEV: u64 = 3;

fn derive_seed(seed: u64, salt: u64) -> u64 {
    seed.wrapping_mul(0x9E37_79B9_7F4A_7C15).wrapping_add(salt)
}

// ---------------------------------------------------------------------------
// Configuration
// ---------------------------------------------------------------------------

macro_rules! keyword_enum {
    ($(#[$doc:meta])* $name:ident { $($variant:ident => $text:literal),+ $(,)? }) => {
        $(#[$doc])*
        #[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
        pub enum $name { $($variant),+ }

        impl $name {
            pub fn as_str(self) -> &'static str {
                match self { $($name::$variant => $text),+ }
            }
        }

        impl std::fmt::Display for $name {
            fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
                f.write_str(self.as_str())
            }
        }

        impl FromStr for $name {
            type Err = String;
            fn from_str(s: &str) -> Result<Self, Self::Err> {
                match s {
                    $($text => Ok($name::$variant),)+
                    other => Err(format!(
                        concat!("unknown ", stringify!($name), " `{}` (expected one of: ",
                                $($text, " ",)+ ")"),
                        other
                    )),
                }
            }
        }
    };
}

keyword_enum! {
    /// What a run evaluates.
    Task { Components => "components", Intra => "intra", Inter => "inter" }
}

keyword_enum! {
    /// Where candidate enumeration takes its component labels from.
    ComponentSource { Gold => "gold", Predicted => "predicted" }
}

keyword_enum! {
    /// How surviving candidate pairs are scored.
    ScorerKind { InternalLinear => "internal-linear", ExternalFile => "external-file", None => "none" }
}

keyword_enum! {
    /// Source of per-pair discourse labels for the OR-ensemble voter.
    DiscourseSource { Off => "off", Heuristic => "heuristic", ExternalFile => "external-file" }
}

/// Full description of one experiment run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub task: Task,
    pub component_source: ComponentSource,
    pub scorer: ScorerKind,
    pub scores_path: Option<PathBuf>,
    pub discourse: DiscourseSource,
    pub discourse_path: Option<PathBuf>,
    pub ensemble: bool,
    /// Signed sentence-distance window (within-post pairs only).
    pub window: Option<(i64, i64)>,
    /// Keep only the top-K salient targets per post (cross-post only).
    pub target_selection: Option<usize>,
    /// Drop pairs whose source is also someone's target, unless the pair
    /// aims at the main claim (cross-post only).
    pub source_target_constraint: bool,
    pub seed: u64,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            task: Task::Intra,
            component_source: ComponentSource::Gold,
            scorer: ScorerKind::InternalLinear,
            scores_path: None,
            discourse: DiscourseSource::Off,
            discourse_path: None,
            ensemble: false,
            window: None,
            target_selection: None,
            source_target_constraint: false,
            seed: 0,
        }
    }
}

impl ExperimentConfig {
    /// Rejects option combinations that have no defined meaning.
    pub fn validate(&self) -> Result<(), PipelineError> {
        let bad = |msg: &str| Err(PipelineError::InvalidConfig(msg.to_string()));
        if self.window.is_some() && self.task != Task::Intra {
            return bad("a distance window applies only to task=intra");
        }
        if let Some((lo, hi)) = self.window {
            if lo > hi {
                return bad("window low bound exceeds high bound");
            }
        }
        if (self.target_selection.is_some() || self.source_target_constraint)
            && self.task != Task::Inter
        {
            return bad("target selection and the source-target constraint apply only to task=inter");
        }
        if self.target_selection == Some(0) {
            return bad("target selection requires k >= 1");
        }
        if self.scorer == ScorerKind::ExternalFile && self.scores_path.is_none() {
            return bad("scorer=external-file requires scores-path");
        }
        if self.discourse == DiscourseSource::ExternalFile && self.discourse_path.is_none() {
            return bad("discourse=external-file requires discourse-path");
        }
        Ok(())
    }

    /// Applies one `key = value` setting.
    pub fn set(&mut self, key: &str, value: &str) -> Result<(), String> {
        match key {
            "task" => self.task = value.parse()?,
            "component-source" => self.component_source = value.parse()?,
            "scorer" => self.scorer = value.parse()?,
            "scores-path" => self.scores_path = Some(PathBuf::from(value)),
            "discourse" => self.discourse = value.parse()?,
            "discourse-path" => self.discourse_path = Some(PathBuf::from(value)),
            "ensemble" => self.ensemble = parse_bool(value)?,
            "window" => self.window = parse_window(value)?,
            "target-selection" => {
                self.target_selection = match value {
                    "-" | "none" => None,
                    v => Some(v.parse::<usize>().map_err(|e| format!("bad k `{v}`: {e}"))?),
                }
            }
            "source-target-constraint" => self.source_target_constraint = parse_bool(value)?,
            "seed" => {
                self.seed = value.parse().map_err(|e| format!("bad seed `{value}`: {e}"))?
            }
            other => return Err(format!("unknown setting `{other}`")),
        }
        Ok(())
    }
}

fn parse_bool(value: &str) -> Result<bool, String> {
    match value {
        "true" | "on" | "yes" => Ok(true),
        "false" | "off" | "no" => Ok(false),
        other => Err(format!("expected true/false, found `{other}`")),
    }
}

/// Parses `lo,hi` (signs allowed, e.g. `0,+5` or `-2,2`); `-` or `none`
/// clear the window.
fn parse_window(value: &str) -> Result<Option<(i64, i64)>, String> {
    if value == "-" || value == "none" {
        return Ok(None);
    }
    let (lo, hi) = value
        .split_once(',')
        .ok_or_else(|| format!("expected `lo,hi`, found `{value}`"))?;
    let parse = |s: &str| -> Result<i64, String> {
        s.trim().trim_start_matches('+').parse().map_err(|e| format!("bad bound `{s}`: {e}"))
    };
    Ok(Some((parse(lo)?, parse(hi)?)))
}

/// Parses a configuration file of `key = value` lines (`#` comments).
pub fn parse_config(text: &str) -> Result<ExperimentConfig, PipelineError> {
    let mut cfg = ExperimentConfig::default();
    for (n, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (key, value) = line.split_once('=').ok_or(PipelineError::ConfigParse {
            line: n + 1,
            message: format!("expected `key = value`, found `{line}`"),
        })?;
        cfg.set(key.trim(), value.trim())
            .map_err(|message| PipelineError::ConfigParse { line: n + 1, message })?;
    }
    Ok(cfg)
}

// ---------------------------------------------------------------------------
// Trained artifacts
// ---------------------------------------------------------------------------

/// A 3-way component classifier with its feature vocabulary.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComponentArtifact {
    pub vocabulary: FeatureVocabulary,
    pub model: LinearModel,
}

/// A binary relation scorer with its pair vocabulary and tuned threshold.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RelationArtifact {
    pub vocabulary: FeatureVocabulary,
    pub model: SavedModel,
    pub threshold: Threshold,
}

/// A trained salience ranker with its held-out diagnostics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SalienceArtifact {
    pub model: LinearModel,
    pub knee_k: usize,
    pub recall_at_k: Vec<f64>,
    pub baseline_recall_at_k: Vec<f64>,
}

macro_rules! json_artifact {
    ($name:ident) => {
        impl $name {
            pub fn save(&self, path: &std::path::Path) -> Result<(), PipelineError> {
                Ok(std::fs::write(path, serde_json::to_string(self)?)?)
            }

            pub fn load(path: &std::path::Path) -> Result<Self, PipelineError> {
                Ok(serde_json::from_str(&std::fs::read_to_string(path)?)?)
            }
        }
    };
}

json_artifact!(ComponentArtifact);
json_artifact!(RelationArtifact);
json_artifact!(SalienceArtifact);

/// Training settings the pipeline uses for the component classifier.
pub fn component_hyper(seed: u64) -> LinearConfig {
    LinearConfig { epochs: 80, seed: derive_seed(seed, SALT_COMPONENTS), ..LinearConfig::default() }
}

/// Training settings the pipeline uses for the relation scorer.
pub fn relation_hyper(seed: u64) -> LinearConfig {
    LinearConfig { epochs: 80, seed: derive_seed(seed, SALT_RELATIONS), ..LinearConfig::default() }
}

/// Trains the 3-way component classifier on gold-labeled threads. Titles
/// are fixed by rule, so they contribute no training examples.
pub fn train_components(
    threads: &[Thread],
    hyper: &LinearConfig,
) -> Result<ComponentArtifact, PipelineError> {
    let lexicons = LexiconSet::builtin();
    let vocabulary = build_component_vocabulary(threads, MIN_UNIGRAM_COUNT);
    let classes = COMPONENT_CLASSES.iter().map(|c| c.to_string()).collect();
    let mut dataset = Dataset::new(vocabulary.id(), vocabulary.dimension(), classes);
    for thread in threads {
        for post in &thread.posts {
            for prop in &post.propositions {
                if prop.label == ComponentLabel::MainClaim {
                    continue;
                }
                let class = COMPONENT_CLASSES
                    .iter()
                    .position(|c| *c == prop.label)
                    .expect("non-title labels are classifiable");
                dataset.push(component_features(prop, post, &vocabulary, lexicons), class)?;
            }
        }
    }
    let model = train_linear(&dataset, hyper)?;
    Ok(ComponentArtifact { vocabulary, model })
}

/// Labels every proposition of every thread: titles are fixed, everything
/// else gets the model's argmax (ties resolve to the earliest class in
/// Claim, Premise, NonArgument order). Returns per-thread label maps; the
/// threads' own gold labels are untouched.
pub fn classify_components(
    threads: &[Thread],
    artifact: &ComponentArtifact,
) -> Result<BTreeMap<String, LabelMap>, PipelineError> {
    let lexicons = LexiconSet::builtin();
    let mut out = BTreeMap::new();
    for thread in threads {
        let mut map = LabelMap::new();
        for post in &thread.posts {
            for prop in &post.propositions {
                let label = if prop.label == ComponentLabel::MainClaim {
                    ComponentLabel::MainClaim
                } else {
                    let x = component_features(prop, post, &artifact.vocabulary, lexicons);
                    let class = artifact.model.predict(&x)?;
                    artifact.model.classes()[class]
                        .parse()
                        .map_err(PipelineError::BadModelClasses)?
                };
                map.insert(prop.id.clone(), label);
            }
        }
        out.insert(thread.id.clone(), map);
    }
    Ok(out)
}

fn enumerate_task_pairs(task: Task, thread: &Thread, labels: &LabelMap) -> Vec<CandidatePair> {
    match task {
        Task::Intra => thread
            .posts
            .iter()
            .flat_map(|post| enumerate_intra(&thread.id, post, labels))
            .collect(),
        Task::Inter => enumerate_inter(thread, labels, InterScope::Parent),
        Task::Components => Vec::new(),
    }
}

/// Trains the binary relation scorer for one task on gold labels, tuning
/// its decision threshold on a held-out sliver of the training threads.
pub fn train_relation_scorer(
    threads: &[Thread],
    task: Task,
    seed: u64,
) -> Result<RelationArtifact, PipelineError> {
    let lexicons = LexiconSet::builtin();
    let (fit, dev) = if threads.len() < 2 {
        (threads.to_vec(), threads.to_vec())
    } else {
        split_corpus(threads.to_vec(), DEV_FRACTION, derive_seed(seed, SALT_DEV))?
    };
    let vocabulary = pair_vocabulary(&build_component_vocabulary(&fit, MIN_UNIGRAM_COUNT));

    let featurize = |threads: &[Thread]| -> Result<(Vec<_>, Vec<bool>), PipelineError> {
        let mut xs = Vec::new();
        let mut ys = Vec::new();
        for thread in threads {
            let labels = gold_labels(thread);
            let mut pairs = enumerate_task_pairs(task, thread, &labels);
            attach_gold_labels(&mut pairs, &thread.relations);
            for pair in &pairs {
                xs.push(pair_features(pair, thread, &vocabulary, lexicons)?);
                ys.push(pair.label == Some(true));
            }
        }
        Ok((xs, ys))
    };

    let (xs, ys) = featurize(&fit)?;
    let mut dataset = Dataset::binary(vocabulary.id(), vocabulary.dimension());
    for (x, &y) in xs.into_iter().zip(&ys) {
        dataset.push_binary(x, y)?;
    }
    let model = train_linear(&dataset, &relation_hyper(seed))?;

    let (dev_x, dev_y) = featurize(&dev)?;
    let threshold = if dev_y.contains(&true) {
        let mut dev_scores = Vec::with_capacity(dev_x.len());
        for x in &dev_x {
            dev_scores.push(model.score_positive(x)?);
        }
        match tune_threshold(&dev_scores, &dev_y) {
            Ok(search) => search.threshold,
            Err(e) => {
                log::warn!("threshold tuning failed ({e}); using the default");
                Threshold::FALLBACK
            }
        }
    } else {
        log::warn!("no positive pairs in the tuning sliver; using the default threshold");
        Threshold::FALLBACK
    };
    Ok(RelationArtifact { vocabulary, model: SavedModel::Linear(model), threshold })
}

// ---------------------------------------------------------------------------
// Prediction
// ---------------------------------------------------------------------------

/// Everything `predict_relations` may need besides the corpus itself.
pub struct RelationPredictors<'a> {
    pub scorer: Option<&'a RelationArtifact>,
    pub external_scores: Option<&'a ScoreTable>,
    pub external_discourse: Option<&'a BTreeMap<PairKey, String>>,
    pub salience: &'a dyn SalienceScorer,
}

/// Milestones of one prediction pass, from enumeration down to the final
/// prediction set.
#[derive(Debug)]
pub struct RelationRun {
    /// Post-enumeration snapshot with gold labels attached.
    pub universe: Vec<CandidatePair>,
    /// Pairs that outlived every configured filter (the scored set).
    pub survivors: Vec<CandidatePair>,
    /// Filter name → number of pairs it removed.
    pub removed: BTreeMap<String, usize>,
    pub scores: BTreeMap<PairKey, f64>,
    pub threshold: Threshold,
    pub predictions: PredictionSet,
}

fn reference_error(what: &str, id: &str) -> PipelineError {
    PipelineError::UnknownReference(format!("{what} `{id}`"))
}

/// Predicts positive for every given pair — the floor baseline.
pub fn all_relations_baseline(pairs: &[CandidatePair]) -> BTreeSet<PairKey> {
    pairs.iter().map(CandidatePair::key).collect()
}

/// Runs enumeration, pruning, scoring, thresholding, and the optional
/// OR-ensemble for one relation task. Pairs removed by a filter are
/// predicted negative; they stay in the universe and in the accounting.
pub fn predict_relations(
    threads: &[Thread],
    labels: &BTreeMap<String, LabelMap>,
    cfg: &ExperimentConfig,
    predictors: &RelationPredictors,
) -> Result<RelationRun, PipelineError> {
    let lexicons = LexiconSet::builtin();
    let empty = LabelMap::new();
    let mut current: Vec<CandidatePair> = Vec::new();
    for thread in threads {
        let map = labels.get(&thread.id).unwrap_or(&empty);
        let mut pairs = enumerate_task_pairs(cfg.task, thread, map);
        attach_gold_labels(&mut pairs, &thread.relations);
        current.extend(pairs);
    }
    let universe = current.clone();
    let mut removed: BTreeMap<String, usize> = BTreeMap::new();

    if let Some((lo, hi)) = cfg.window {
        let outcome = apply_window(current, lo, hi)?;
        if !outcome.removed.is_empty() {
            *removed.entry(WINDOW_FILTER.to_string()).or_default() += outcome.removed.len();
        }
        current = outcome.kept;
    }

    if cfg.target_selection.is_some() || cfg.source_target_constraint {
        let mut kept_all = Vec::new();
        for thread in threads {
            let (pairs, rest): (Vec<_>, Vec<_>) =
                current.into_iter().partition(|p| p.thread_id == thread.id);
            current = rest;
            if pairs.is_empty() {
                continue;
            }
            let mut selections = BTreeMap::new();
            if let Some(k) = cfg.target_selection {
                for post in &thread.posts {
                    if post.propositions.is_empty() {
                        continue;
                    }
                    let selection = select_targets(post, predictors.salience, k)?;
                    selections.insert(post.id.clone(), selection);
                }
            }
            let outcome = if cfg.source_target_constraint {
                let main_claim = thread.main_claim().map(|p| p.id.clone());
                apply_target_constraints(pairs, &selections, main_claim.as_deref())
            } else {
                apply_target_selection(pairs, &selections)
            };
            for pair in &outcome.removed {
                let filter = pair
                    .filters_applied
                    .last()
                    .cloned()
                    .unwrap_or_else(|| "unattributed".to_string());
                *removed.entry(filter).or_default() += 1;
            }
            kept_all.extend(outcome.kept);
        }
        current = kept_all;
    }
    let survivors = current;

    let thread_by_id: BTreeMap<&str, &Thread> =
        threads.iter().map(|t| (t.id.as_str(), t)).collect();
    let mut scores: BTreeMap<PairKey, f64> = BTreeMap::new();
    let threshold = match cfg.scorer {
        ScorerKind::None => Threshold::FALLBACK,
        ScorerKind::InternalLinear => {
            let artifact = predictors.scorer.ok_or_else(|| {
                PipelineError::InvalidConfig(
                    "scorer=internal-linear requires a trained relation model".to_string(),
                )
            })?;
            for pair in &survivors {
                let thread = thread_by_id
                    .get(pair.thread_id.as_str())
                    .ok_or_else(|| reference_error("thread", &pair.thread_id))?;
                let x = pair_features(pair, thread, &artifact.vocabulary, lexicons)?;
                scores.insert(pair.key(), artifact.model.score_positive(&x)?);
            }
            artifact.threshold
        }
        ScorerKind::ExternalFile => {
            let table = predictors.external_scores.ok_or_else(|| {
                PipelineError::InvalidConfig(
                    "scorer=external-file requires a loaded score table".to_string(),
                )
            })?;
            for pair in &survivors {
                scores.insert(pair.key(), table.require(&pair.key())?);
            }
            Threshold::FALLBACK
        }
    };

    let universe_keys: BTreeSet<PairKey> = universe.iter().map(CandidatePair::key).collect();
    let mut main = PredictionSet::new(universe_keys.clone());
    if cfg.scorer != ScorerKind::None {
        for pair in &survivors {
            if threshold.is_positive(scores[&pair.key()]) {
                main.mark_positive(pair.key())?;
            }
        }
    }

    let predictions = if cfg.ensemble && cfg.discourse != DiscourseSource::Off {
        let mut voter = PredictionSet::new(universe_keys);
        for pair in &survivors {
            let fires = match cfg.discourse {
                DiscourseSource::Heuristic => {
                    let thread = thread_by_id
                        .get(pair.thread_id.as_str())
                        .ok_or_else(|| reference_error("thread", &pair.thread_id))?;
                    let source = thread
                        .proposition(&pair.source_id)
                        .ok_or_else(|| reference_error("proposition", &pair.source_id))?;
                    let target = thread
                        .proposition(&pair.target_id)
                        .ok_or_else(|| reference_error("proposition", &pair.target_id))?;
                    heuristic_discourse_label(&source.text, &target.text).0
                        != NON_VOTING_DISCOURSE
                }
                DiscourseSource::ExternalFile => {
                    let map = predictors.external_discourse.ok_or_else(|| {
                        PipelineError::InvalidConfig(
                            "discourse=external-file requires loaded labels".to_string(),
                        )
                    })?;
                    map.get(&pair.key()).is_some_and(|label| label != NON_VOTING_DISCOURSE)
                }
                DiscourseSource::Off => unreachable!("guarded above"),
            };
            if fires {
                voter.mark_positive(pair.key())?;
            }
        }
        ensemble_or(&main, &voter)?
    } else {
        main
    };

    Ok(RelationRun { universe, survivors, removed, scores, threshold, predictions })
}

// ---------------------------------------------------------------------------
// Full runs
// ---------------------------------------------------------------------------

/// Pre-trained artifacts and external files for [`run_experiment`]; any
/// `None` that the configuration needs is trained or loaded on the fly.
#[derive(Default)]
pub struct ExperimentInputs<'a> {
    pub component_artifact: Option<&'a ComponentArtifact>,
    pub relation_artifact: Option<&'a RelationArtifact>,
    pub salience: Option<&'a dyn SalienceScorer>,
    pub external_scores: Option<&'a ScoreTable>,
    pub external_discourse: Option<&'a BTreeMap<PairKey, String>>,
}

/// One pair of the report's prediction dump.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairRow {
    pub key: PairKey,
    /// `None` when the pair never reached scoring (filtered, or no scorer).
    pub score: Option<f64>,
    pub predicted: bool,
    pub gold: bool,
}

/// Relation-task section of a report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RelationSection {
    pub enumerated: usize,
    pub removed: BTreeMap<String, usize>,
    /// Pairs that reached the scoring stage (filter survivors).
    pub scored: usize,
    pub gold_total: usize,
    /// Gold pairs reachable by this run's enumeration.
    pub gold_in_universe: usize,
    pub threshold: f64,
    /// The configured predictor.
    pub model: PrfRow,
    /// Every filter survivor predicted positive.
    pub baseline: PrfRow,
    pub pairs: Vec<PairRow>,
}

/// Everything one experiment run produced.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub config: ExperimentConfig,
    pub train_threads: usize,
    pub test_threads: usize,
    pub component_eval: Option<ComponentEval>,
    pub relation: Option<RelationSection>,
    /// For human consumption only; machine reports omit it so reruns are
    /// byte-identical.
    pub wall_clock_ms: u128,
}

/// Runs one configured experiment end to end.
///
/// The corpus is split into train/test by seed; missing artifacts are
/// trained on the training side and evaluation happens on the test side.
/// Fixed seed → identical report (timing aside).
pub fn run_experiment(
    cfg: &ExperimentConfig,
    corpus: &[Thread],
    inputs: &ExperimentInputs,
) -> Result<EvalReport, PipelineError> {
    let started = Instant::now();
    cfg.validate()?;
    for thread in corpus {
        ensure_valid(thread).stage("validate-corpus")?;
    }
    let (train, test) = if corpus.len() < 2 {
        log::warn!("corpus too small to split; evaluating on the training threads");
        (corpus.to_vec(), corpus.to_vec())
    } else {
        split_corpus(corpus.to_vec(), TEST_FRACTION, cfg.seed).stage("split-corpus")?
    };

    let needs_components =
        cfg.task == Task::Components || cfg.component_source == ComponentSource::Predicted;
    let trained_components: Option<ComponentArtifact> =
        if needs_components && inputs.component_artifact.is_none() {
            Some(train_components(&train, &component_hyper(cfg.seed)).stage("train-components")?)
        } else {
            None
        };
    let component_artifact = inputs.component_artifact.or(trained_components.as_ref());

    let mut report = EvalReport {
        config: cfg.clone(),
        train_threads: train.len(),
        test_threads: test.len(),
        component_eval: None,
        relation: None,
        wall_clock_ms: 0,
    };

    match cfg.task {
        Task::Components => {
            let artifact = component_artifact.expect("required above");
            let predicted =
                classify_components(&test, artifact).stage("classify-components")?;
            let mut gold_map = BTreeMap::new();
            let mut pred_map = BTreeMap::new();
            for thread in &test {
                for prop in thread.propositions() {
                    if prop.label == ComponentLabel::MainClaim {
                        continue;
                    }
                    let key = (thread.id.clone(), prop.id.clone());
                    gold_map.insert(key.clone(), prop.label);
                    pred_map.insert(key, predicted[&thread.id][&prop.id]);
                }
            }
            report.component_eval = Some(evaluate_components(&gold_map, &pred_map)?);
        }
        Task::Intra | Task::Inter => {
            let kind = match cfg.task {
                Task::Intra => RelationKind::IntraTurn,
                _ => RelationKind::InterTurn,
            };
            let labels: BTreeMap<String, LabelMap> = match cfg.component_source {
                ComponentSource::Gold => {
                    test.iter().map(|t| (t.id.clone(), gold_labels(t))).collect()
                }
                ComponentSource::Predicted => {
                    classify_components(&test, component_artifact.expect("required above"))
                        .stage("classify-components")?
                }
            };

            let trained_relation: Option<RelationArtifact> =
                if cfg.scorer == ScorerKind::InternalLinear && inputs.relation_artifact.is_none()
                {
                    Some(
                        train_relation_scorer(&train, cfg.task, cfg.seed)
                            .stage("train-relations")?,
                    )
                } else {
                    None
                };
            let loaded_scores: Option<ScoreTable> =
                if cfg.scorer == ScorerKind::ExternalFile && inputs.external_scores.is_none() {
                    let path = cfg.scores_path.as_ref().expect("validated above");
                    Some(ScoreTable::from_path(path).stage("load-scores")?)
                } else {
                    None
                };
            let loaded_discourse: Option<BTreeMap<PairKey, String>> = if cfg.discourse
                == DiscourseSource::ExternalFile
                && inputs.external_discourse.is_none()
            {
                let path = cfg.discourse_path.as_ref().expect("validated above");
                let text = std::fs::read_to_string(path).stage("load-discourse")?;
                Some(super::report::parse_discourse_labels(&text).stage("load-discourse")?)
            } else {
                None
            };

            let first_k = ConstantScorer(0.0);
            let predictors = RelationPredictors {
                scorer: inputs.relation_artifact.or(trained_relation.as_ref()),
                external_scores: inputs.external_scores.or(loaded_scores.as_ref()),
                external_discourse: inputs.external_discourse.or(loaded_discourse.as_ref()),
                salience: inputs.salience.unwrap_or(&first_k),
            };
            let run =
                predict_relations(&test, &labels, cfg, &predictors).stage("predict-relations")?;

            let gold: BTreeSet<PairKey> = test
                .iter()
                .flat_map(|t| {
                    t.relations.iter().filter(|r| r.kind == kind).map(|r| PairKey {
                        thread_id: t.id.clone(),
                        source_id: r.source_id.clone(),
                        target_id: r.target_id.clone(),
                    })
                })
                .collect();
            let universe_keys: BTreeSet<PairKey> =
                run.universe.iter().map(CandidatePair::key).collect();
            let model = evaluate_relations(&universe_keys, run.predictions.positives(), &gold)?;
            let survivor_keys: BTreeSet<PairKey> =
                run.survivors.iter().map(CandidatePair::key).collect();
            let baseline = evaluate_relations(&universe_keys, &survivor_keys, &gold)?;

            let pairs = universe_keys
                .iter()
                .map(|key| PairRow {
                    key: key.clone(),
                    score: run.scores.get(key).copied(),
                    predicted: run.predictions.is_positive(key),
                    gold: gold.contains(key),
                })
                .collect();
            report.relation = Some(RelationSection {
                enumerated: run.universe.len(),
                removed: run.removed,
                scored: run.survivors.len(),
                gold_total: gold.len(),
                gold_in_universe: gold.intersection(&universe_keys).count(),
                threshold: run.threshold.value(),
                model,
                baseline,
                pairs,
            });
        }
    }

    report.wall_clock_ms = started.elapsed().as_millis();
    Ok(report)
}

/// One row of a window sweep: the all-survivors baseline inside `[lo, hi]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WindowRow {
    pub lo: i64,
    pub hi: i64,
    pub enumerated: usize,
    pub kept: usize,
    pub gold_kept: usize,
    pub baseline: PrfRow,
}

/// Evaluates the all-relations baseline under each window over the whole
/// corpus with gold component labels. Recall at `[lo, hi]` is exactly the
/// share of gold pairs whose signed distance falls inside the window.
pub fn run_window_sweep(
    corpus: &[Thread],
    windows: &[(i64, i64)],
) -> Result<Vec<WindowRow>, PipelineError> {
    for thread in corpus {
        ensure_valid(thread).stage("validate-corpus")?;
    }
    let mut enumerated: Vec<CandidatePair> = Vec::new();
    let mut gold: BTreeSet<PairKey> = BTreeSet::new();
    for thread in corpus {
        let labels = gold_labels(thread);
        let mut pairs = enumerate_task_pairs(Task::Intra, thread, &labels);
        attach_gold_labels(&mut pairs, &thread.relations);
        enumerated.extend(pairs);
        gold.extend(thread.relations.iter().filter(|r| r.kind == RelationKind::IntraTurn).map(
            |r| PairKey {
                thread_id: thread.id.clone(),
                source_id: r.source_id.clone(),
                target_id: r.target_id.clone(),
            },
        ));
    }
    let universe_keys: BTreeSet<PairKey> = enumerated.iter().map(CandidatePair::key).collect();
    let mut rows = Vec::new();
    for &(lo, hi) in windows {
        let outcome = apply_window(enumerated.clone(), lo, hi)?;
        let kept_keys: BTreeSet<PairKey> = outcome.kept.iter().map(CandidatePair::key).collect();
        let baseline = evaluate_relations(&universe_keys, &kept_keys, &gold)?;
        rows.push(WindowRow {
            lo,
            hi,
            enumerated: enumerated.len(),
            kept: outcome.kept.len(),
            gold_kept: baseline.tp,
            baseline,
        });
    }
    Ok(rows)
}

/// Convenience: the unfiltered all-relations row for one task on gold
/// labels, over the whole corpus.
pub fn all_relations_report(corpus: &[Thread], task: Task) -> Result<PrfRow, PipelineError> {
    for thread in corpus {
        ensure_valid(thread).stage("validate-corpus")?;
    }
    let kind = match task {
        Task::Intra => RelationKind::IntraTurn,
        Task::Inter => RelationKind::InterTurn,
        Task::Components => {
            return Err(PipelineError::InvalidConfig(
                "the all-relations baseline needs a relation task".to_string(),
            ))
        }
    };
    let mut tp = 0usize;
    let mut fp = 0usize;
    let mut fn_count = 0usize;
    for thread in corpus {
        let labels = gold_labels(thread);
        let mut pairs = enumerate_task_pairs(task, thread, &labels);
        attach_gold_labels(&mut pairs, &thread.relations);
        let predicted = all_relations_baseline(&pairs);
        let gold: BTreeSet<PairKey> = thread
            .relations
            .iter()
            .filter(|r| r.kind == kind)
            .map(|r| PairKey {
                thread_id: thread.id.clone(),
                source_id: r.source_id.clone(),
                target_id: r.target_id.clone(),
            })
            .collect();
        tp += predicted.intersection(&gold).count();
        fp += predicted.len() - predicted.intersection(&gold).count();
        fn_count += gold.difference(&predicted).count();
    }
    Ok(prf_from_counts(tp, fp, fn_count))
}
