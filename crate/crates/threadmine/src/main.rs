//! Command-line front end: corpus statistics and splitting, model
//! training, experiment runs with machine/human reports, window sweeps,
//! and the two distant-supervision dataset builders.

use std::collections::BTreeMap;
use std::fs;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

use threadmine::corpus::{corpus_stats, parse_corpus, serialize_corpus, split_corpus, Thread};
use threadmine::distant::{
    build_imho_dataset, build_qr_dataset, read_qr_records, DumpComment, ImhoOptions, QrOptions,
};
use threadmine::features::LexiconSet;
use threadmine::models::linear::LinearConfig;
use threadmine::pipeline::{
    all_relations_report, component_hyper, human_report, machine_report, parse_config,
    render_prf, render_sweep, run_experiment, run_window_sweep, train_components,
    train_relation_scorer, validate_report, ComponentArtifact, ExperimentConfig,
    ExperimentInputs, RelationArtifact, SalienceArtifact, Task,
};
use threadmine::salience::{
    build_salience_dataset, train_salience, SalienceConfig, TrainedSalienceScorer,
};

#[derive(Parser)]
#[command(
    name = "threadmine",
    version,
    about = "Argument structure mining for threaded discussions"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Print corpus statistics (counts, candidate totals, distance histogram).
    Stats(StatsArgs),
    /// Split a corpus into train and test files by thread.
    Split(SplitArgs),
    /// Train the 3-way component classifier.
    TrainComponents(TrainComponentsArgs),
    /// Train a binary relation scorer for one task.
    TrainRelations(TrainRelationsArgs),
    /// Train the sentence-salience ranker from quote–response records.
    TrainSalience(TrainSalienceArgs),
    /// Run one configured experiment and write its reports.
    Predict(PredictArgs),
    /// Validate a machine report, or score the all-positive baseline.
    Evaluate(EvaluateArgs),
    /// Report the within-post baseline across widening distance windows.
    SweepWindow(SweepWindowArgs),
    /// Mine weakly labeled records from a raw forum dump.
    BuildDistant(BuildDistantArgs),
}

#[derive(Args)]
struct StatsArgs {
    /// Corpus file to describe.
    #[arg(long)]
    corpus: PathBuf,
}

#[derive(Args)]
struct SplitArgs {
    #[arg(long)]
    corpus: PathBuf,
    /// Fraction of threads placed in the test file.
    #[arg(long, default_value_t = 0.1)]
    test_fraction: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    train_out: PathBuf,
    #[arg(long)]
    test_out: PathBuf,
}

#[derive(Args)]
struct TrainComponentsArgs {
    /// Gold-labeled training corpus.
    #[arg(long)]
    corpus: PathBuf,
    /// Where to write the trained model (JSON).
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args)]
struct TrainRelationsArgs {
    #[arg(long)]
    corpus: PathBuf,
    /// Which relation task to train for.
    #[arg(long, value_enum)]
    task: RelationTask,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Copy, Clone, ValueEnum)]
enum RelationTask {
    Intra,
    Inter,
}

impl From<RelationTask> for Task {
    fn from(task: RelationTask) -> Task {
        match task {
            RelationTask::Intra => Task::Intra,
            RelationTask::Inter => Task::Inter,
        }
    }
}

#[derive(Args)]
struct TrainSalienceArgs {
    /// Quote–response records (one JSON object per line).
    #[arg(long)]
    records: PathBuf,
    /// The raw dump the records were mined from; supplies quoted post bodies.
    #[arg(long)]
    dump: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Fraction of posts held out for the recall-at-K curve.
    #[arg(long, default_value_t = 0.1)]
    holdout: f64,
    #[arg(long, default_value_t = 80)]
    epochs: usize,
}

#[derive(Args)]
struct PredictArgs {
    /// Corpus to split, train on, and evaluate against.
    #[arg(long)]
    corpus: PathBuf,
    /// Experiment configuration file (`key = value` lines).
    #[arg(long)]
    config: Option<PathBuf>,
    /// Override one configuration key, e.g. `--set task=inter`; repeatable,
    /// applied after the file in the order given.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
    /// Where to write the machine-readable report.
    #[arg(long)]
    out: PathBuf,
    /// Where to write the human-readable report (default: stdout).
    #[arg(long)]
    human_out: Option<PathBuf>,
    /// Pre-trained component classifier (otherwise trained on the fly).
    #[arg(long)]
    components: Option<PathBuf>,
    /// Pre-trained relation scorer (otherwise trained on the fly).
    #[arg(long)]
    relations: Option<PathBuf>,
    /// Trained salience ranker for target selection (otherwise sentence
    /// order is used).
    #[arg(long)]
    salience: Option<PathBuf>,
}

#[derive(Args)]
struct EvaluateArgs {
    /// Machine report to check for internal consistency.
    #[arg(long, required_unless_present = "corpus", conflicts_with_all = ["corpus", "task"])]
    report: Option<PathBuf>,
    /// Corpus for the predict-everything baseline (requires --task).
    #[arg(long, requires = "task")]
    corpus: Option<PathBuf>,
    #[arg(long, value_enum)]
    task: Option<RelationTask>,
}

#[derive(Args)]
struct SweepWindowArgs {
    #[arg(long)]
    corpus: PathBuf,
    /// Largest window bound; reports [0,+1] up to [0,+max].
    #[arg(long, default_value_t = 5)]
    max_distance: i64,
    /// Where to write the sweep (default: stdout).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Copy, Clone, ValueEnum)]
enum DistantKind {
    /// Opinion-acronym claim/premise pairs.
    Imho,
    /// Quote–response pairs from blockquoted replies.
    Qr,
}

#[derive(Args)]
struct BuildDistantArgs {
    #[arg(long, value_enum)]
    kind: DistantKind,
    /// Raw dump, one JSON comment per line, grouped by thread for `qr`.
    #[arg(long = "in")]
    input: PathBuf,
    /// Output record file; a `.report` sidecar summarizes counts and skips.
    #[arg(long)]
    out: PathBuf,
    /// File of thread ids to skip, one per line (qr only).
    #[arg(long)]
    exclude_ids: Option<PathBuf>,
    /// Match quotes byte-for-byte instead of under normalization (qr only).
    #[arg(long)]
    byte_exact: bool,
    /// Keep the trigger acronym in mined claim sentences (imho only).
    #[arg(long)]
    keep_acronym: bool,
    /// Drop quotes shorter than this many normalized characters (qr only).
    #[arg(long, default_value_t = 20)]
    min_quote_len: usize,
}

fn read_corpus(path: &Path) -> Result<Vec<Thread>> {
    let text =
        fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    parse_corpus(&text).with_context(|| format!("parsing {}", path.display()))
}

fn write_file(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

fn run_stats(args: &StatsArgs) -> Result<()> {
    let corpus = read_corpus(&args.corpus)?;
    let stats = corpus_stats(&corpus)?;
    print!("{}", stats.render_machine());
    Ok(())
}

fn run_split(args: &SplitArgs) -> Result<()> {
    let corpus = read_corpus(&args.corpus)?;
    let (train, test) = split_corpus(corpus, args.test_fraction, args.seed)?;
    write_file(&args.train_out, &serialize_corpus(&train)?)?;
    write_file(&args.test_out, &serialize_corpus(&test)?)?;
    println!("{} train threads -> {}", train.len(), args.train_out.display());
    println!("{} test threads -> {}", test.len(), args.test_out.display());
    Ok(())
}

fn run_train_components(args: &TrainComponentsArgs) -> Result<()> {
    let corpus = read_corpus(&args.corpus)?;
    let artifact = train_components(&corpus, &component_hyper(args.seed))?;
    artifact.save(&args.out)?;
    println!(
        "component classifier over {} features -> {}",
        artifact.vocabulary.len(),
        args.out.display()
    );
    Ok(())
}

fn run_train_relations(args: &TrainRelationsArgs) -> Result<()> {
    let corpus = read_corpus(&args.corpus)?;
    let artifact = train_relation_scorer(&corpus, args.task.into(), args.seed)?;
    artifact.save(&args.out)?;
    println!(
        "relation scorer over {} features, threshold {} -> {}",
        artifact.vocabulary.len(),
        artifact.threshold.value(),
        args.out.display()
    );
    Ok(())
}

fn run_train_salience(args: &TrainSalienceArgs) -> Result<()> {
    let records = read_qr_records(BufReader::new(
        File::open(&args.records).with_context(|| format!("opening {}", args.records.display()))?,
    ))?;

    let mut post_bodies: BTreeMap<(String, String), String> = BTreeMap::new();
    let dump = File::open(&args.dump).with_context(|| format!("opening {}", args.dump.display()))?;
    for line in BufReader::new(dump).lines() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let Ok(comment) = serde_json::from_str::<DumpComment>(&line) else {
            continue;
        };
        post_bodies.insert((comment.link_id, comment.id), comment.body);
    }

    let (examples, extraction) =
        build_salience_dataset(&records, &post_bodies, LexiconSet::builtin());
    let config = SalienceConfig {
        linear: LinearConfig { epochs: args.epochs, seed: args.seed, ..LinearConfig::default() },
        holdout_fraction: args.holdout,
        split_seed: args.seed,
    };
    let training = train_salience(&examples, &config)?;
    let artifact = SalienceArtifact {
        model: training.model,
        knee_k: training.knee_k,
        recall_at_k: training.recall_at_k,
        baseline_recall_at_k: training.baseline_recall_at_k,
    };
    artifact.save(&args.out)?;

    print!("{}", extraction.render());
    println!("held-out recall by K (model / first-K):");
    for (i, (model, first)) in
        artifact.recall_at_k.iter().zip(&artifact.baseline_recall_at_k).enumerate().take(10)
    {
        println!("  K={:<2} {:>6.1} / {:>6.1}", i + 1, 100.0 * model, 100.0 * first);
    }
    println!("knee at K={} -> {}", artifact.knee_k, args.out.display());
    Ok(())
}

fn run_predict(args: &PredictArgs) -> Result<()> {
    let mut cfg = match &args.config {
        Some(path) => {
            let text = fs::read_to_string(path)
                .with_context(|| format!("reading {}", path.display()))?;
            parse_config(&text).with_context(|| format!("parsing {}", path.display()))?
        }
        None => ExperimentConfig::default(),
    };
    for entry in &args.overrides {
        let Some((key, value)) = entry.split_once('=') else {
            bail!("--set expects KEY=VALUE, got `{entry}`");
        };
        cfg.set(key.trim(), value.trim())
            .map_err(|message| anyhow::anyhow!("--set {entry}: {message}"))?;
    }

    let corpus = read_corpus(&args.corpus)?;

    let component_artifact = args
        .components
        .as_deref()
        .map(ComponentArtifact::load)
        .transpose()
        .context("loading component classifier")?;
    let relation_artifact = args
        .relations
        .as_deref()
        .map(RelationArtifact::load)
        .transpose()
        .context("loading relation scorer")?;
    let salience_artifact = args
        .salience
        .as_deref()
        .map(SalienceArtifact::load)
        .transpose()
        .context("loading salience ranker")?;
    let salience_scorer =
        salience_artifact.map(|artifact| TrainedSalienceScorer::new(artifact.model));

    let inputs = ExperimentInputs {
        component_artifact: component_artifact.as_ref(),
        relation_artifact: relation_artifact.as_ref(),
        salience: salience_scorer.as_ref().map(|s| s as _),
        external_scores: None,
        external_discourse: None,
    };

    let report = run_experiment(&cfg, &corpus, &inputs)?;
    let machine = machine_report(&report);
    validate_report(&machine).context("emitted report failed self-validation")?;
    write_file(&args.out, &machine)?;

    let human = human_report(&report);
    match &args.human_out {
        Some(path) => write_file(path, &human)?,
        None => print!("{human}"),
    }
    Ok(())
}

fn run_evaluate(args: &EvaluateArgs) -> Result<()> {
    if let Some(path) = &args.report {
        let text =
            fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        validate_report(&text)?;
        println!("report ok: {}", path.display());
        return Ok(());
    }
    let corpus = read_corpus(args.corpus.as_deref().expect("clap enforces --corpus"))?;
    let task: Task = args.task.expect("clap enforces --task").into();
    let row = all_relations_report(&corpus, task)?;
    print!("{}", render_prf(&format!("all-relations.{task}"), &row));
    Ok(())
}

fn run_sweep(args: &SweepWindowArgs) -> Result<()> {
    if args.max_distance < 1 {
        bail!("--max-distance must be at least 1");
    }
    let corpus = read_corpus(&args.corpus)?;
    let windows: Vec<(i64, i64)> = (1..=args.max_distance).map(|hi| (0, hi)).collect();
    let rows = run_window_sweep(&corpus, &windows)?;
    let text = render_sweep(&rows);
    match &args.out {
        Some(path) => write_file(path, &text)?,
        None => print!("{text}"),
    }
    Ok(())
}

fn run_build_distant(args: &BuildDistantArgs) -> Result<()> {
    let input =
        File::open(&args.input).with_context(|| format!("opening {}", args.input.display()))?;
    let reader = BufReader::new(input);
    let out = File::create(&args.out)
        .with_context(|| format!("creating {}", args.out.display()))?;
    let mut writer = BufWriter::new(out);

    let report = match args.kind {
        DistantKind::Imho => {
            let options = ImhoOptions { keep_acronym: args.keep_acronym };
            build_imho_dataset(reader, &mut writer, &options)?
        }
        DistantKind::Qr => {
            let mut options = QrOptions {
                min_quote_chars: args.min_quote_len,
                byte_exact: args.byte_exact,
                ..QrOptions::default()
            };
            if let Some(path) = &args.exclude_ids {
                let text = fs::read_to_string(path)
                    .with_context(|| format!("reading {}", path.display()))?;
                options.exclude_threads =
                    text.lines().map(str::trim).filter(|l| !l.is_empty()).map(String::from).collect();
            }
            build_qr_dataset(reader, &mut writer, &options)?
        }
    };
    writer.flush()?;

    let sidecar = {
        let mut name = args.out.as_os_str().to_owned();
        name.push(".report");
        PathBuf::from(name)
    };
    write_file(&sidecar, &report.render())?;
    print!("{}", report.render());
    Ok(())
}

fn main() -> Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match Cli::parse().command {
        Command::Stats(args) => run_stats(&args),
        Command::Split(args) => run_split(&args),
        Command::TrainComponents(args) => run_train_components(&args),
        Command::TrainRelations(args) => run_train_relations(&args),
        Command::TrainSalience(args) => run_train_salience(&args),
        Command::Predict(args) => run_predict(&args),
        Command::Evaluate(args) => run_evaluate(&args),
        Command::SweepWindow(args) => run_sweep(&args),
        Command::BuildDistant(args) => run_build_distant(&args),
    }
}
