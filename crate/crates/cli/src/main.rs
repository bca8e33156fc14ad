//! `wallfilter`: train, classify, evaluate, benchmark and serve.
//!
//! Exit codes: 0 on success, 1 for usage errors (bad flags or values),
//! 2 for data errors (unreadable corpus or model, I/O failures).

use std::io::Read;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Context;
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;
use wallfilter_core::corpus::split;
use wallfilter_core::eval::{benchmark_compare, evaluate, BenchConfig, EvalReport};
use wallfilter_core::nbayes::DEFAULT_ALPHA;
use wallfilter_core::policy::{decide, DecisionKind, DEFAULT_TAU};
use wallfilter_core::{
    ClassLabel, Corpus, NbModel, PolicyConfig, Preprocessing, RawMessage, StopList, SvmModel,
    SvmParams,
};
use wallfilter_service::ServiceConfig;

#[derive(Parser)]
#[command(name = "wallfilter", version, about = "Naive Bayes wall moderation toolkit")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train a Naive Bayes model on a labeled XML corpus and write it to a file.
    Train(TrainArgs),
    /// Print the five class posteriors for a text, its argmax and the policy decision.
    Classify(ClassifyArgs),
    /// Train on a seeded split of a corpus and score the held-out part.
    Eval(EvalArgs),
    /// Compare Naive Bayes against the SVM baseline, with and without preprocessing.
    Bench(BenchArgs),
    /// Run the HTTP moderation service until interrupted.
    Serve(ServeArgs),
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Text,
    Json,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum ClassifierKind {
    Nb,
    Svm,
}

#[derive(Args)]
struct StopListArg {
    /// Stop-word file, one word per line (bundled English list if omitted).
    #[arg(long, value_name = "PATH")]
    stop_list: Option<PathBuf>,
}

impl StopListArg {
    fn load(&self) -> Result<StopList, CliError> {
        match &self.stop_list {
            Some(p) => StopList::load(p).map_err(data),
            None => Ok(StopList::english()),
        }
    }
}

#[derive(Args)]
struct TrainArgs {
    #[arg(long, value_name = "PATH")]
    corpus: PathBuf,
    /// Laplace smoothing constant, must be positive.
    #[arg(long, default_value_t = DEFAULT_ALPHA)]
    alpha: f64,
    #[arg(long, value_name = "PATH")]
    out: PathBuf,
    #[command(flatten)]
    stops: StopListArg,
    #[arg(long, value_enum, default_value_t = Format::Text)]
    format: Format,
}

#[derive(Args)]
#[group(id = "input", required = true, multiple = false, args = ["text", "stdin"])]
struct ClassifyArgs {
    #[arg(long, value_name = "PATH")]
    model: PathBuf,
    /// Text to classify.
    #[arg(long)]
    text: Option<String>,
    /// Read the text from standard input.
    #[arg(long)]
    stdin: bool,
    /// Flag threshold used for the printed decision.
    #[arg(long, default_value_t = DEFAULT_TAU)]
    tau: f64,
    #[command(flatten)]
    stops: StopListArg,
    #[arg(long, value_enum, default_value_t = Format::Text)]
    format: Format,
}

#[derive(Args)]
struct EvalArgs {
    #[arg(long, value_name = "PATH")]
    corpus: PathBuf,
    /// Fraction of each class held out for testing, in (0, 1).
    #[arg(long, default_value_t = 0.2)]
    split: f64,
    #[arg(long, default_value_t = 42)]
    seed: u64,
    #[arg(long, default_value_t = DEFAULT_ALPHA)]
    alpha: f64,
    #[arg(long, value_enum, default_value_t = ClassifierKind::Nb)]
    classifier: ClassifierKind,
    #[command(flatten)]
    stops: StopListArg,
    #[arg(long, value_enum, default_value_t = Format::Text)]
    format: Format,
}

#[derive(Args)]
struct BenchArgs {
    #[arg(long, value_name = "PATH")]
    corpus: PathBuf,
    #[arg(long, default_value_t = 42)]
    seed: u64,
    #[arg(long, default_value_t = DEFAULT_ALPHA)]
    alpha: f64,
    /// Training repetitions per classifier; the median time is reported.
    #[arg(long, default_value_t = 5)]
    timing_runs: usize,
    #[command(flatten)]
    stops: StopListArg,
    #[arg(long, value_enum, default_value_t = Format::Text)]
    format: Format,
    /// Also write the JSON report to this file.
    #[arg(long, value_name = "PATH")]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ServeArgs {
    #[arg(long, value_name = "PATH")]
    config: PathBuf,
}

enum CliError {
    Usage(String),
    Data(anyhow::Error),
}

fn data(e: impl Into<anyhow::Error>) -> CliError {
    CliError::Data(e.into())
}

fn usage(msg: impl Into<String>) -> CliError {
    CliError::Usage(msg.into())
}

fn check_alpha(alpha: f64) -> Result<(), CliError> {
    if alpha > 0.0 && alpha.is_finite() {
        Ok(())
    } else {
        Err(usage(format!("--alpha must be positive, got {alpha}")))
    }
}

fn load_corpus(path: &Path) -> Result<Corpus, CliError> {
    Corpus::load(path)
        .with_context(|| format!("loading corpus {}", path.display()))
        .map_err(CliError::Data)
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    std::fs::write(path, bytes)
        .with_context(|| format!("writing {}", path.display()))
        .map_err(CliError::Data)
}

fn train(args: TrainArgs) -> Result<(), CliError> {
    check_alpha(args.alpha)?;
    let stops = args.stops.load()?;
    let corpus = load_corpus(&args.corpus)?;
    let docs: Vec<_> = corpus
        .tokenize(&Preprocessing::Full(stops))
        .into_iter()
        .filter(|d| d.label.is_some())
        .collect();
    let model = NbModel::train(&docs, args.alpha).map_err(data)?;
    write_file(&args.out, &model.to_bytes())?;

    let hist = corpus.label_histogram();
    match args.format {
        Format::Json => {
            let histogram: serde_json::Map<_, _> = hist
                .iter()
                .map(|(c, n)| (c.as_str().to_string(), json!(n)))
                .collect();
            let doc = json!({
                "class_histogram": histogram,
                "model": args.out.display().to_string(),
                "training_docs": docs.len(),
                "vocabulary_size": model.vocabulary_len(),
            });
            println!("{}", serde_json::to_string_pretty(&doc).expect("json"));
        }
        Format::Text => {
            println!("wrote {}", args.out.display());
            println!("training docs: {}", docs.len());
            println!("vocabulary size: {}", model.vocabulary_len());
            println!("class histogram:");
            for (c, n) in hist.iter() {
                println!("  {:<14} {n}", c.as_str());
            }
        }
    }
    Ok(())
}

fn classify(args: ClassifyArgs) -> Result<(), CliError> {
    let policy = PolicyConfig {
        tau: args.tau,
        ..PolicyConfig::default()
    };
    policy.validate().map_err(|e| usage(e.to_string()))?;
    let stops = args.stops.load()?;
    let model = NbModel::load(&args.model)
        .with_context(|| format!("loading model {}", args.model.display()))
        .map_err(CliError::Data)?;
    let text = match args.text {
        Some(t) => t,
        None => {
            let mut buf = String::new();
            std::io::stdin()
                .read_to_string(&mut buf)
                .context("reading standard input")
                .map_err(CliError::Data)?;
            buf
        }
    };
    let msg = RawMessage {
        id: "input".into(),
        author_id: "cli".into(),
        text,
        label: None,
    };
    let doc = Preprocessing::Full(stops).apply(&msg);
    let posterior = model.classify(&doc);
    let decision = decide(&posterior, &policy);
    let flagged = decision.flagged_classes();
    let verdict = match decision.kind {
        DecisionKind::Flag(_) => "flag",
        _ => "publish",
    };

    match args.format {
        Format::Json => {
            let doc = json!({
                "argmax": posterior.argmax,
                "decision": verdict,
                "flagged": flagged,
                "posteriors": posterior.probs,
                "tau": args.tau,
                "tokens": doc.tokens,
            });
            println!("{}", serde_json::to_string_pretty(&doc).expect("json"));
        }
        Format::Text => {
            println!("tokens: {}", doc.tokens.join(" "));
            for c in ClassLabel::ALL {
                println!("  {:<14} {:.6}", c.as_str(), posterior.prob(c));
            }
            println!("argmax: {}", posterior.argmax);
            let names: Vec<_> = flagged.iter().map(|c| c.as_str()).collect();
            if names.is_empty() {
                println!("decision (tau={}): {verdict}", args.tau);
            } else {
                println!("decision (tau={}): {verdict} [{}]", args.tau, names.join(", "));
            }
        }
    }
    Ok(())
}

fn eval(args: EvalArgs) -> Result<(), CliError> {
    check_alpha(args.alpha)?;
    if !(args.split > 0.0 && args.split < 1.0) {
        return Err(usage(format!("--split must lie in (0, 1), got {}", args.split)));
    }
    let stops = args.stops.load()?;
    let corpus = load_corpus(&args.corpus)?;
    let (train, test) = split(&corpus, args.split, args.seed).map_err(data)?;
    let pre = Preprocessing::Full(stops);
    let train_docs = train.tokenize(&pre);
    let test_docs = test.tokenize(&pre);

    let started = std::time::Instant::now();
    let (report, name): (EvalReport, _) = match args.classifier {
        ClassifierKind::Nb => {
            let model = NbModel::train(&train_docs, args.alpha).map_err(data)?;
            let ms = started.elapsed().as_secs_f64() * 1e3;
            let mut r = evaluate(&model, &test_docs).map_err(data)?;
            r.train_time_ms = ms;
            (r, "naive bayes")
        }
        ClassifierKind::Svm => {
            let model = SvmModel::train(&train_docs, SvmParams::default()).map_err(data)?;
            let ms = started.elapsed().as_secs_f64() * 1e3;
            let mut r = evaluate(&model, &test_docs).map_err(data)?;
            r.train_time_ms = ms;
            (r, "linear svm")
        }
    };
    match args.format {
        Format::Json => print!("{}", report.to_canonical_json()),
        Format::Text => {
            let title = format!(
                "{name}: {} train / {} test, split {}, seed {}",
                train.len(),
                test.len(),
                args.split,
                args.seed
            );
            print!("{}", report.render_table(&title));
        }
    }
    Ok(())
}

fn bench(args: BenchArgs) -> Result<(), CliError> {
    check_alpha(args.alpha)?;
    if args.timing_runs == 0 {
        return Err(usage("--timing-runs must be at least 1"));
    }
    let stops = args.stops.load()?;
    let corpus = load_corpus(&args.corpus)?;
    let cfg = BenchConfig {
        alpha: args.alpha,
        seed: args.seed,
        timing_runs: args.timing_runs,
        ..BenchConfig::default()
    };
    let report = benchmark_compare(&corpus, &stops, &cfg).map_err(data)?;
    let json = report.to_canonical_json();
    if let Some(out) = &args.out {
        write_file(out, json.as_bytes())?;
    }
    match args.format {
        Format::Json => print!("{json}"),
        Format::Text => print!("{}", report.render_table()),
    }
    Ok(())
}

fn serve(args: ServeArgs) -> Result<(), CliError> {
    let config = ServiceConfig::load(&args.config).map_err(|e| usage(e.to_string()))?;
    let runtime = tokio::runtime::Runtime::new()
        .context("starting async runtime")
        .map_err(CliError::Data)?;
    runtime.block_on(wallfilter_service::serve(config)).map_err(data)
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Train(a) => train(a),
        Command::Classify(a) => classify(a),
        Command::Eval(a) => eval(a),
        Command::Bench(a) => bench(a),
        Command::Serve(a) => serve(a),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    let default_level = if matches!(cli.command, Command::Serve(_)) { "info" } else { "warn" };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(default_level)).init();

    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        Err(CliError::Data(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
