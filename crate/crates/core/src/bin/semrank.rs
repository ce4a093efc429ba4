use std::collections::BTreeMap;
use std::fs;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::str::FromStr;

use clap::{Args, Parser, Subcommand};

use semrank::bpnn::{Activation, BpNetwork, LayerSizes, TrainConfig};
use semrank::corpus::{
    load_catalog, load_log, save_catalog, save_log, sessionize, synth, Taxonomy,
};
use semrank::corpus::{validate_catalog, IngestStats, LogRecord, WebDocument};
use semrank::dwell::TimeDb;
use semrank::eval::{self, EvalConfig, ModelConfig};
use semrank::features::{build_training_set, write_training_set, FeedbackIndex, ScoringContext};
use semrank::index::CatalogIndex;
use semrank::rank::rank;
use semrank::semantics::UserHistoryDb;
use semrank::textprep::parse_query;
use semrank::Error;

const EXIT_IO: u8 = 2;
const EXIT_DATA: u8 = 3;
const EXIT_USAGE: u8 = 4;

/// Search ranking from content, dwell time, feedback and query history.
#[derive(Debug, Parser)]
#[command(name = "semrank", version)]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct Common {
    /// File of `key = value` lines. Command-line flags win.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[arg(long, global = true)]
    catalog: Option<PathBuf>,
    #[arg(long, global = true)]
    log: Option<PathBuf>,
    #[arg(long, global = true)]
    model: Option<PathBuf>,
    #[arg(long, global = true)]
    time_store: Option<PathBuf>,
    #[arg(long, global = true)]
    history: Option<PathBuf>,
    #[arg(long, global = true)]
    top_n: Option<usize>,
    #[arg(long, global = true)]
    hidden: Option<usize>,
    /// `logistic` or `tansig`.
    #[arg(long, global = true)]
    output_activation: Option<String>,
    #[arg(long, global = true)]
    lr: Option<f64>,
    #[arg(long, global = true)]
    epochs: Option<usize>,
    #[arg(long, global = true)]
    folds: Option<usize>,
    /// Comma-separated access-sequence lengths, e.g. `2,4,6,8`.
    #[arg(long, global = true)]
    lengths: Option<String>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Write a synthetic catalog, event log and ground-truth sidecar.
    Synth {
        #[arg(long)]
        books: Option<usize>,
        #[arg(long)]
        events: Option<usize>,
        /// Defaults to one user per 200 events.
        #[arg(long)]
        users: Option<usize>,
        #[arg(long)]
        out_dir: Option<PathBuf>,
    },
    /// Build the stores and fit the network on the whole log.
    Train {
        /// Also write the training examples as NDJSON.
        #[arg(long)]
        dump: Option<PathBuf>,
    },
    /// Rank catalog pages for a query.
    Rank {
        query: String,
        #[arg(long)]
        user: Option<String>,
    },
    /// k-fold cross-validation with the access-sequence sweep.
    Eval {
        #[arg(long)]
        report: Option<PathBuf>,
    },
}

#[derive(Debug)]
enum CliError {
    Lib(Error),
    Usage(String),
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        CliError::Lib(e)
    }
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            CliError::Usage(_) => EXIT_USAGE,
            CliError::Lib(e) => match e {
                Error::Io { .. } | Error::Corrupt { .. } => EXIT_IO,
                Error::InvalidInput(_) | Error::Divergence { .. } | Error::UndefinedMetric(_) => {
                    EXIT_DATA
                }
                Error::EmptyQuery | Error::Contract(_) => EXIT_USAGE,
            },
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Lib(e) => write!(f, "{e}"),
            CliError::Usage(m) => f.write_str(m),
        }
    }
}

type CliResult<T> = Result<T, CliError>;

/// Flag values resolved against the config file.
struct Settings {
    file: BTreeMap<String, String>,
}

impl Settings {
    fn load(path: Option<&Path>) -> CliResult<Self> {
        let mut file = BTreeMap::new();
        let Some(path) = path else {
            return Ok(Settings { file });
        };
        let text = fs::read_to_string(path).map_err(|e| Error::Io {
            path: path.to_path_buf(),
            source: e,
        })?;
        for (n, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let Some((k, v)) = line.split_once('=') else {
                return Err(CliError::Usage(format!(
                    "{}:{}: expected `key = value`",
                    path.display(),
                    n + 1
                )));
            };
            let key = k.trim().replace('_', "-");
            if !KNOWN_KEYS.contains(&key.as_str()) {
                return Err(CliError::Usage(format!(
                    "{}:{}: unknown key {key:?}",
                    path.display(),
                    n + 1
                )));
            }
            file.insert(key, v.trim().to_string());
        }
        Ok(Settings { file })
    }

    fn get<T: FromStr>(&self, flag: Option<T>, key: &str, default: T) -> CliResult<T> {
        Ok(self.opt(flag, key)?.unwrap_or(default))
    }

    fn opt<T: FromStr>(&self, flag: Option<T>, key: &str) -> CliResult<Option<T>> {
        if flag.is_some() {
            return Ok(flag);
        }
        match self.file.get(key) {
            None => Ok(None),
            Some(v) => v
                .parse()
                .map(Some)
                .map_err(|_| CliError::Usage(format!("config key {key}: cannot parse {v:?}"))),
        }
    }
}

const KNOWN_KEYS: &[&str] = &[
    "seed",
    "catalog",
    "log",
    "model",
    "time-store",
    "history",
    "top-n",
    "hidden",
    "output-activation",
    "lr",
    "epochs",
    "folds",
    "lengths",
    "books",
    "events",
    "users",
    "out-dir",
    "report",
    "dump",
    "user",
];

fn positive(name: &str, v: usize) -> CliResult<usize> {
    if v == 0 {
        return Err(CliError::Usage(format!("--{name} must be at least 1")));
    }
    Ok(v)
}

fn parse_lengths(s: &str) -> CliResult<Vec<usize>> {
    let lengths: Vec<usize> = s
        .split(',')
        .map(|p| p.trim().parse::<usize>())
        .collect::<Result<_, _>>()
        .map_err(|_| CliError::Usage(format!("--lengths: cannot parse {s:?}")))?;
    if lengths.is_empty() || lengths.contains(&0) {
        return Err(CliError::Usage(
            "--lengths must list positive integers".into(),
        ));
    }
    Ok(lengths)
}

fn model_config(c: &Common, s: &Settings, seed: u64) -> CliResult<ModelConfig> {
    let hidden = positive("hidden", s.get(c.hidden, "hidden", 4)?)?;
    let lr = s.get(c.lr, "lr", 0.1)?;
    if !(lr > 0.0 && lr.is_finite()) {
        return Err(CliError::Usage("--lr must be a positive number".into()));
    }
    let act = s.get(
        c.output_activation.clone(),
        "output-activation",
        "logistic".to_string(),
    )?;
    let output_activation = act
        .parse::<Activation>()
        .map_err(|_| CliError::Usage(format!("--output-activation: unknown activation {act:?}")))?;
    Ok(ModelConfig {
        sizes: LayerSizes::new(5, hidden, 1),
        output_activation,
        train: TrainConfig {
            learning_rate: lr,
            epochs: s.get(c.epochs, "epochs", TrainConfig::default().epochs)?,
            seed,
            shuffle: true,
        },
    })
}

fn create_dir(dir: &Path) -> CliResult<()> {
    fs::create_dir_all(dir).map_err(|e| {
        CliError::Lib(Error::Io {
            path: dir.to_path_buf(),
            source: e,
        })
    })
}

fn report_ingest(path: &Path, stats: &IngestStats) {
    eprintln!(
        "{}: {} records, {} lines skipped",
        path.display(),
        stats.accepted,
        stats.skipped
    );
}

fn load_inputs(c: &Common, s: &Settings) -> CliResult<(Vec<WebDocument>, Vec<LogRecord>)> {
    let catalog_path = s.get(c.catalog.clone(), "catalog", PathBuf::from("catalog.json"))?;
    let log_path = s.get(c.log.clone(), "log", PathBuf::from("log.jsonl"))?;
    let catalog = load_catalog(&catalog_path)?;
    validate_catalog(&catalog, &Taxonomy::books())?;
    let (records, stats) = load_log(&log_path)?;
    report_ingest(&log_path, &stats);
    Ok((catalog, records))
}

fn cmd_synth(
    c: &Common,
    s: &Settings,
    seed: u64,
    books: Option<usize>,
    events: Option<usize>,
    users: Option<usize>,
    out_dir: Option<PathBuf>,
) -> CliResult<()> {
    let books = positive("books", s.get(books, "books", 5800)?)?;
    let events = s.get(events, "events", 6400)?;
    let users = positive(
        "users",
        s.get(users, "users", synth::default_users(events))?,
    )?;
    let out_dir = s.get(out_dir, "out-dir", PathBuf::from("."))?;
    let catalog_path = s.get(c.catalog.clone(), "catalog", out_dir.join("catalog.json"))?;
    let log_path = s.get(c.log.clone(), "log", out_dir.join("log.jsonl"))?;
    let truth_path = out_dir.join("ground_truth.json");

    let taxonomy = Taxonomy::books();
    let catalog = synth::generate_catalog(seed, books, &taxonomy);
    let log = synth::generate_transactions(&catalog, seed, events, users)?;

    create_dir(&out_dir)?;
    save_catalog(&catalog, &catalog_path)?;
    save_log(&log.records, &log_path)?;
    synth::save_ground_truth(&log.ground_truth, &truth_path)?;
    println!(
        "wrote {} books, {} events, {} users",
        catalog.len(),
        log.records.len(),
        log.ground_truth.len()
    );
    Ok(())
}

fn cmd_train(c: &Common, s: &Settings, seed: u64, dump: Option<PathBuf>) -> CliResult<()> {
    let cfg = model_config(c, s, seed)?;
    let model_path = s.get(c.model.clone(), "model", PathBuf::from("model.json"))?;
    let time_path = s.get(
        c.time_store.clone(),
        "time-store",
        PathBuf::from("time.jsonl"),
    )?;
    let history_path = s.get(c.history.clone(), "history", PathBuf::from("history.jsonl"))?;
    let dump = s.opt(dump, "dump")?;
    let (catalog, records) = load_inputs(c, s)?;

    let taxonomy = Taxonomy::books();
    let mut ordered: Vec<&LogRecord> = records.iter().collect();
    ordered.sort_by_key(|r| r.timestamp);
    let time_db = TimeDb::from_records(ordered);
    let sessions = sessionize(records);
    let index = CatalogIndex::new(catalog);
    let examples = build_training_set(
        &index,
        &taxonomy,
        &sessions,
        &time_db,
        &UserHistoryDb::new(),
        seed,
    )?;
    if examples.is_empty() {
        return Err(Error::InvalidInput(
            "training set is empty: no session has a usable query".into(),
        )
        .into());
    }
    if let Some(path) = &dump {
        let file = fs::File::create(path).map_err(|e| Error::Io {
            path: path.clone(),
            source: e,
        })?;
        let mut out = BufWriter::new(file);
        write_training_set(&examples, &mut out)
            .and_then(|_| out.flush())
            .map_err(|e| Error::Io {
                path: path.clone(),
                source: e,
            })?;
    }

    let mut net = BpNetwork::init(seed, cfg.sizes)?.with_output_activation(cfg.output_activation);
    let losses = net.train(&examples, &cfg.train)?;
    let history = UserHistoryDb::from_sessions(&sessions, index.docs());

    net.save(&model_path)?;
    time_db.save(&time_path)?;
    history.save(&history_path)?;

    println!("examples {}", examples.len());
    match (losses.first(), losses.last()) {
        (Some(first), Some(last)) => {
            println!("epochs {}  loss {first:.6} -> {last:.6}", losses.len())
        }
        _ => println!("epochs 0  model left at its seeded initialisation"),
    }
    Ok(())
}

fn cmd_rank(c: &Common, s: &Settings, query: &str, user: Option<String>) -> CliResult<()> {
    let query = parse_query(query)?;
    let top_n = s.get(c.top_n, "top-n", 10)?;
    let user = s.get(user, "user", String::new())?;
    let catalog_path = s.get(c.catalog.clone(), "catalog", PathBuf::from("catalog.json"))?;
    let model_path = s.get(c.model.clone(), "model", PathBuf::from("model.json"))?;
    let time_path = s.get(
        c.time_store.clone(),
        "time-store",
        PathBuf::from("time.jsonl"),
    )?;
    let history_path = s.get(c.history.clone(), "history", PathBuf::from("history.jsonl"))?;

    let catalog = load_catalog(&catalog_path)?;
    let net = BpNetwork::load(&model_path)?;
    let time_db = TimeDb::load(&time_path)?;
    let history = UserHistoryDb::load(&history_path)?;
    let mut feedback = FeedbackIndex::new();
    if let Some(log_path) = s.opt(c.log.clone(), "log")? {
        let (records, stats) = load_log(&log_path)?;
        report_ingest(&log_path, &stats);
        for r in &records {
            feedback.record(&r.user_id, &r.doc_id, r.event_type);
        }
    }

    let taxonomy = Taxonomy::books();
    let index = CatalogIndex::new(catalog);
    let ctx = ScoringContext {
        index: &index,
        taxonomy: &taxonomy,
        time_db: &time_db,
        history: &history,
        feedback: &feedback,
    };
    let ranked = rank(&query, &user, &ctx, &net)?;

    let stdout = io::stdout();
    let mut out = stdout.lock();
    for (i, e) in ranked.top(top_n).enumerate() {
        let title = index
            .position(&e.doc_id)
            .map_or("", |p| index.doc(p).title.as_str());
        let _ = writeln!(out, "{}\t{}\t{}\t{:.6}", i + 1, e.doc_id, title, e.score);
    }
    Ok(())
}

fn cmd_eval(c: &Common, s: &Settings, seed: u64, report: Option<PathBuf>) -> CliResult<()> {
    let model = model_config(c, s, seed)?;
    let folds = s.get(c.folds, "folds", 5)?;
    if folds < 2 {
        return Err(CliError::Usage("--folds must be at least 2".into()));
    }
    let lengths = parse_lengths(&s.get(c.lengths.clone(), "lengths", "2,4,6,8".to_string())?)?;
    let top_n = positive("top-n", s.get(c.top_n, "top-n", 10)?)?;
    let report_path = s.get(report, "report", PathBuf::from("report.json"))?;
    let (catalog, records) = load_inputs(c, s)?;

    let cfg = EvalConfig {
        folds,
        lengths,
        top_n,
        seed,
        model,
    };
    let index = CatalogIndex::new(catalog);
    let reports = eval::cross_validate(&index, &Taxonomy::books(), records, &cfg)?;
    fs::write(&report_path, eval::reports_to_json(&reports)).map_err(|e| Error::Io {
        path: report_path.clone(),
        source: e,
    })?;
    print!("{}", eval::format_table(&reports));
    Ok(())
}

fn run(cli: Cli) -> CliResult<()> {
    let c = &cli.common;
    let s = Settings::load(c.config.as_deref())?;
    let seed = s.get(c.seed, "seed", 0)?;
    eprintln!("seed {seed}");
    match cli.command {
        Command::Synth {
            books,
            events,
            users,
            out_dir,
        } => cmd_synth(c, &s, seed, books, events, users, out_dir),
        Command::Train { dump } => cmd_train(c, &s, seed, dump),
        Command::Rank { query, user } => cmd_rank(c, &s, &query, user),
        Command::Eval { report } => cmd_eval(c, &s, seed, report),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(EXIT_USAGE)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("semrank: {e}");
            ExitCode::from(e.code())
        }
    }
}
