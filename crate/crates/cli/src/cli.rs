//! `bwskit` subcommands. Exit codes: 0 success, 1 validation error, 2 usage.

use std::collections::{BTreeMap, HashMap};
use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use bwskit::annotation::{parse_gold, simulate_annotators, GateConfig, ResponseSet};
use bwskit::corpus::{hqt_nqt_pairs, parse_dataset, Dataset, DatasetFormat, Emotion};
use bwskit::design::{generate_design, TupleDesign};
use bwskit::features::{assemble, EmbeddingTable, FeatureConfig, Lexicon, Negators, Resources};
use bwskit::regression::{
    ablation_run, evaluate, evaluate_subset, featurize, train, transfer_matrix, transfer_pooled, Hyperparams,
    RegressionModel, DEFAULT_C, DEFAULT_EPSILON, DEFAULT_MAX_EPOCHS, DEFAULT_TOLERANCE,
    TEST_PARTITIONS, TRAIN_PARTITIONS,
};
use bwskit::scoring::{
    compute_scores, hashtag_impact, hashtag_scatter_tsv, split_half_reliability, DEFAULT_SHR_REPETITIONS,
};
use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand};

use crate::service::{self, AppState, SessionTemplate};
use crate::store::{resolve_store_dir, SessionStore, STORE_ENV};

type AnyError = Box<dyn std::error::Error + Send + Sync>;
type CmdResult = Result<(), AnyError>;

#[derive(Parser, Debug)]
#[command(name = "bwskit", version, about = "Best-Worst Scaling emotion-intensity toolkit")]
pub struct Cli {
    /// Seed for every randomized step.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Output file; standard output when absent.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Build a 4-tuple design (2N tuples) from item ids, one per line.
    Design {
        #[arg(long)]
        items: PathBuf,
    },
    /// Counting-procedure scores from a response file.
    Score(ResponseArgs),
    /// Split-half reliability of a response file.
    Shr {
        #[command(flatten)]
        responses: ResponseArgs,
        #[arg(long, default_value_t = DEFAULT_SHR_REPETITIONS)]
        repetitions: usize,
    },
    /// Score changes when the query-term hashtag is removed.
    HashtagImpact {
        #[arg(long)]
        dataset: PathBuf,
        /// Also write the per-pair (hqt, nqt) scatter TSV here.
        #[arg(long)]
        scatter: Option<PathBuf>,
    },
    /// Simulated annotators answering a design from latent intensities.
    Simulate {
        #[arg(long)]
        tuples: PathBuf,
        /// `item_id<TAB>value` lines.
        #[arg(long)]
        latent: PathBuf,
        /// Probability of answering with the true extremes.
        #[arg(long, default_value_t = 0.8)]
        accuracy: f64,
        #[arg(long, default_value_t = 3)]
        per_tuple: usize,
    },
    /// Feature vectors as `item_id<TAB>feature<TAB>value` lines.
    Features {
        #[arg(long)]
        dataset: PathBuf,
        #[command(flatten)]
        features: FeatureArgs,
    },
    /// Train a regressor on the train and dev partitions.
    Train {
        #[arg(long)]
        dataset: PathBuf,
        #[command(flatten)]
        features: FeatureArgs,
        #[command(flatten)]
        solver: SolverArgs,
    },
    /// Evaluate a model on the test partition.
    Eval {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        dataset: PathBuf,
        #[command(flatten)]
        features: FeatureArgs,
        /// Restrict to gold scores at or above this value.
        #[arg(long)]
        threshold: Option<f64>,
    },
    /// Pearson grid over feature configurations and datasets.
    Ablate {
        /// One scored dataset per emotion; repeatable.
        #[arg(long = "dataset", required = true)]
        datasets: Vec<PathBuf>,
        /// Feature configuration labels; repeatable.
        #[arg(long = "config", required = true)]
        configs: Vec<String>,
        #[command(flatten)]
        resources: ResourceArgs,
        #[command(flatten)]
        solver: SolverArgs,
        /// Evaluate only on gold scores >= threshold (0.5 when given bare).
        #[arg(long, num_args = 0..=1, default_missing_value = "0.5")]
        threshold: Option<f64>,
        /// Machine-readable rows instead of the grid.
        #[arg(long)]
        flat: bool,
    },
    /// Cross-emotion transfer matrix, or one pooled-training cell.
    Transfer {
        #[arg(long = "dataset", required = true)]
        datasets: Vec<PathBuf>,
        #[command(flatten)]
        features: FeatureArgs,
        #[command(flatten)]
        solver: SolverArgs,
        /// Emotions whose training data are pooled, e.g. `fear,sadness`.
        #[arg(long, value_delimiter = ',', requires = "pool_test")]
        pool_train: Vec<Emotion>,
        /// Emotion whose test split scores the pooled model.
        #[arg(long, requires = "pool_train")]
        pool_test: Option<Emotion>,
    },
    /// Host annotation sessions over HTTP.
    Serve {
        #[arg(long, default_value = "127.0.0.1:8080")]
        addr: SocketAddr,
        /// Session storage directory (falls back to $BWSKIT_STORE).
        #[arg(long)]
        store: Option<PathBuf>,
        /// Dataset supplying item texts and the emotion.
        #[arg(long)]
        dataset: PathBuf,
        #[arg(long)]
        tuples: PathBuf,
        /// Gold questions: `tuple_index<TAB>best,..<TAB>worst,..`.
        #[arg(long)]
        gold: Option<PathBuf>,
    },
}

#[derive(Args, Debug)]
struct ResponseArgs {
    #[arg(long)]
    responses: PathBuf,
    #[arg(long)]
    tuples: PathBuf,
    #[arg(long, default_value_t = 3)]
    per_tuple: usize,
}

#[derive(Args, Debug, Clone)]
struct ResourceArgs {
    /// Word embedding text file.
    #[arg(long)]
    embeddings: Option<PathBuf>,
    /// Lexicon file; repeatable.
    #[arg(long = "lexicon")]
    lexicons: Vec<PathBuf>,
    /// Negator list replacing the built-in one.
    #[arg(long)]
    negators: Option<PathBuf>,
}

#[derive(Args, Debug, Clone)]
struct FeatureArgs {
    /// Feature configuration, e.g. `WN+WE+L` or `L:name`.
    #[arg(long, default_value = "WN+WE+L")]
    config: String,
    #[command(flatten)]
    resources: ResourceArgs,
}

#[derive(Args, Debug, Clone, Copy)]
struct SolverArgs {
    #[arg(long = "c", default_value_t = DEFAULT_C)]
    c: f64,
    #[arg(long, default_value_t = DEFAULT_EPSILON)]
    epsilon: f64,
    #[arg(long, default_value_t = DEFAULT_TOLERANCE)]
    tolerance: f64,
    #[arg(long, default_value_t = DEFAULT_MAX_EPOCHS)]
    max_epochs: usize,
}

impl SolverArgs {
    fn hyperparams(self, seed: u64) -> Hyperparams {
        Hyperparams {
            c: self.c,
            epsilon: self.epsilon,
            tolerance: self.tolerance,
            max_epochs: self.max_epochs,
            seed,
        }
    }
}

/// Parses `args` (program name first) and runs the subcommand.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 2,
            };
        }
    };
    match execute(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            1
        }
    }
}

fn emit(out: &Option<PathBuf>, content: &str) -> CmdResult {
    match out {
        Some(path) => fs::write(path, content).map_err(|e| format!("cannot write {}: {e}", path.display()).into()),
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout.write_all(content.as_bytes())?;
            stdout.flush()?;
            Ok(())
        }
    }
}

fn read(path: &Path) -> Result<String, AnyError> {
    fs::read_to_string(path).map_err(|e| format!("cannot read {}: {e}", path.display()).into())
}

/// Accepts either dataset layout, picking by column count.
fn load_dataset_any(path: &Path) -> Result<Dataset, AnyError> {
    let content = read(path)?;
    let cols = content
        .lines()
        .find(|l| !l.trim().is_empty())
        .map_or(6, |l| l.split('\t').count());
    let format = if cols == 5 { DatasetFormat::RawTsv } else { DatasetFormat::ScoredTsv };
    parse_dataset(&content, format).map_err(|e| format!("{}: {e}", path.display()).into())
}

fn load_design(path: &Path) -> Result<Arc<TupleDesign>, AnyError> {
    TupleDesign::load(path)
        .map(Arc::new)
        .map_err(|e| format!("{}: {e}", path.display()).into())
}

fn load_responses(args: &ResponseArgs) -> Result<ResponseSet, AnyError> {
    let design = load_design(&args.tuples)?;
    ResponseSet::load(&args.responses, design, args.per_tuple).map_err(|e| format!("{}: {e}", args.responses.display()).into())
}

fn load_resources(args: &ResourceArgs) -> Result<Resources, AnyError> {
    let embeddings = match &args.embeddings {
        Some(p) => Some(Arc::new(EmbeddingTable::load(p)?)),
        None => None,
    };
    let lexicons = args
        .lexicons
        .iter()
        .map(|p| Lexicon::load(p).map(Arc::new))
        .collect::<Result<Vec<_>, _>>()?;
    let negators = match &args.negators {
        Some(p) => Negators::load(p)?,
        None => Negators::default(),
    };
    Ok(Resources {
        embeddings,
        lexicons,
        negators,
    })
}

fn parse_latent(content: &str) -> Result<HashMap<String, f64>, AnyError> {
    let mut latent = HashMap::new();
    for (idx, line) in content.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let (id, value) = line
            .split_once('\t')
            .ok_or_else(|| format!("latent line {}: expected id<TAB>value", idx + 1))?;
        let value: f64 = value
            .trim()
            .parse()
            .map_err(|e| format!("latent line {}: bad value '{value}': {e}", idx + 1))?;
        latent.insert(id.trim().to_string(), value);
    }
    Ok(latent)
}

fn eval_lines(r: &bwskit::regression::EvalResult) -> String {
    let t = r.subset_threshold.map_or("NONE".to_string(), |t| t.to_string());
    format!("pearson\t{}\nspearman\t{}\nn\t{}\nsubset_threshold\t{t}\n", r.pearson, r.spearman, r.n)
}

fn execute(cli: Cli) -> CmdResult {
    let Cli { seed, out, command } = cli;
    match command {
        Command::Design { items } => {
            let ids: Vec<String> = read(&items)?
                .lines()
                .map(str::trim)
                .filter(|l| !l.is_empty())
                .map(str::to_string)
                .collect();
            emit(&out, &generate_design(&ids, seed)?.to_tsv())
        }
        Command::Score(args) => emit(&out, &compute_scores(&load_responses(&args)?)?.to_tsv()),
        Command::Shr { responses, repetitions } => {
            if repetitions == 0 {
                return Err("--repetitions must be at least 1".into());
            }
            let r = split_half_reliability(&load_responses(&responses)?, repetitions, seed)?;
            emit(
                &out,
                &format!(
                    "repetitions\t{}\nmean_pearson\t{}\nmean_spearman\t{}\n",
                    r.repetitions, r.mean_pearson, r.mean_spearman
                ),
            )
        }
        Command::HashtagImpact { dataset, scatter } => {
            let dataset = load_dataset_any(&dataset)?;
            let pairs = hqt_nqt_pairs(&dataset)?;
            let report = hashtag_impact(&pairs)?;
            if let Some(path) = scatter {
                fs::write(&path, hashtag_scatter_tsv(&pairs)?)
                    .map_err(|e| format!("cannot write {}: {e}", path.display()))?;
            }
            emit(&out, &report.to_key_values())
        }
        Command::Simulate {
            tuples,
            latent,
            accuracy,
            per_tuple,
        } => {
            let design = load_design(&tuples)?;
            let latent = parse_latent(&read(&latent)?)?;
            emit(&out, &simulate_annotators(design, &latent, accuracy, per_tuple, seed)?.to_tsv())
        }
        Command::Features { dataset, features } => {
            let dataset = load_dataset_any(&dataset)?;
            let config: FeatureConfig = features.config.parse()?;
            let resources = load_resources(&features.resources)?;
            resources.check(&config)?;
            let mut text = String::new();
            for item in &dataset.items {
                for (name, value) in assemble(&item.text, &config, &resources)?.iter() {
                    text.push_str(&format!("{}\t{name}\t{value}\n", item.id));
                }
            }
            emit(&out, &text)
        }
        Command::Train {
            dataset,
            features,
            solver,
        } => {
            let dataset = load_dataset_any(&dataset)?;
            let config: FeatureConfig = features.config.parse()?;
            let resources = load_resources(&features.resources)?;
            let examples = featurize(&dataset, &TRAIN_PARTITIONS, &config, &resources)?;
            emit(&out, &train(&examples, &solver.hyperparams(seed))?.to_tsv())
        }
        Command::Eval {
            model,
            dataset,
            features,
            threshold,
        } => {
            let model = RegressionModel::load(&model)?;
            let dataset = load_dataset_any(&dataset)?;
            let config: FeatureConfig = features.config.parse()?;
            let resources = load_resources(&features.resources)?;
            let test = featurize(&dataset, &TEST_PARTITIONS, &config, &resources)?;
            let result = match threshold {
                Some(t) => evaluate_subset(&model, &test, t)?,
                None => evaluate(&model, &test)?,
            };
            emit(&out, &eval_lines(&result))
        }
        Command::Ablate {
            datasets,
            configs,
            resources,
            solver,
            threshold,
            flat,
        } => {
            let datasets = datasets.iter().map(|p| load_dataset_any(p)).collect::<Result<Vec<_>, _>>()?;
            let configs = configs
                .iter()
                .map(|c| c.parse::<FeatureConfig>())
                .collect::<Result<Vec<_>, _>>()?;
            let resources = load_resources(&resources)?;
            let table = ablation_run(&datasets, &configs, &resources, &solver.hyperparams(seed), threshold)?;
            emit(&out, &if flat { table.to_flat_tsv() } else { table.to_tsv() })
        }
        Command::Transfer {
            datasets,
            features,
            solver,
            pool_train,
            pool_test,
        } => {
            let datasets = datasets.iter().map(|p| load_dataset_any(p)).collect::<Result<Vec<_>, _>>()?;
            let config: FeatureConfig = features.config.parse()?;
            let resources = load_resources(&features.resources)?;
            let hp = solver.hyperparams(seed);
            let Some(test_emotion) = pool_test else {
                return emit(&out, &transfer_matrix(&datasets, &config, &resources, &hp)?.to_string());
            };
            let find = |e: Emotion| {
                datasets
                    .iter()
                    .find(|d| d.emotion == Some(e))
                    .ok_or_else(|| format!("no dataset for emotion {e}"))
            };
            let train_sets = pool_train.iter().map(|&e| find(e)).collect::<Result<Vec<_>, _>>()?;
            let result = transfer_pooled(&train_sets, find(test_emotion)?, &config, &resources, &hp)?;
            let names: Vec<&str> = pool_train.iter().map(|e| e.as_str()).collect();
            emit(
                &out,
                &format!("train\t{}\ntest\t{test_emotion}\n{}", names.join("+"), eval_lines(&result)),
            )
        }
        Command::Serve {
            addr,
            store,
            dataset,
            tuples,
            gold,
        } => serve(addr, resolve_store_dir(store), &dataset, &tuples, gold.as_deref()),
    }
}

/// Loads the template inputs shared by every session a server creates.
pub fn load_template(dataset: &Path, tuples: &Path, gold: Option<&Path>) -> Result<SessionTemplate, AnyError> {
    let dataset = load_dataset_any(dataset)?;
    let emotion = dataset.emotion.ok_or("dataset is empty")?;
    let design = load_design(tuples)?;
    let texts: BTreeMap<String, String> = dataset.items.iter().map(|i| (i.id.clone(), i.text.clone())).collect();
    if let Some(missing) = design.items.iter().find(|id| !texts.contains_key(*id)) {
        return Err(format!("design item {missing} has no text in the dataset").into());
    }
    let gold = match gold {
        Some(p) => parse_gold(&read(p)?, &design)?,
        None => Vec::new(),
    };
    Ok(SessionTemplate {
        design,
        gold,
        texts,
        emotion,
        gate: GateConfig::default(),
    })
}

fn serve(addr: SocketAddr, store_dir: PathBuf, dataset: &Path, tuples: &Path, gold: Option<&Path>) -> CmdResult {
    let template = load_template(dataset, tuples, gold)?;
    let store = SessionStore::open(&store_dir)?;
    let state = AppState {
        store: Arc::new(store),
        template: Arc::new(template),
    };
    let runtime = tokio::runtime::Builder::new_multi_thread().enable_all().build()?;
    runtime.block_on(async move {
        let listener = tokio::net::TcpListener::bind(addr).await?;
        eprintln!(
            "serving on {} (store {}, override with ${STORE_ENV})",
            listener.local_addr()?,
            store_dir.display()
        );
        axum::serve(listener, service::router(state))
            .with_graceful_shutdown(async {
                let _ = tokio::signal::ctrl_c().await;
            })
            .await?;
        Ok(())
    })
}
