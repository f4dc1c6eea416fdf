use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand};
use polarlens::catalog::Dimension;
use polarlens::model::FeatureKind;
use polarlens::pipeline::{self, PipelineConfig};
use polarlens::synth::SynthSpec;
use serde::Serialize;

/// Multi-dimensional polarization inference over tweet corpora.
#[derive(Debug, Parser)]
#[command(name = "polarlens", version, about)]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct Global {
    /// `key = value` configuration file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Directory for stage artifacts.
    #[arg(long, global = true)]
    work_dir: Option<PathBuf>,
    /// Directory with science.csv, political.csv and moderacy.csv.
    #[arg(long, global = true)]
    catalogs: Option<PathBuf>,
    /// Directory with per-dimension seed lists (<dim>.tsv).
    #[arg(long, global = true)]
    seeds: Option<PathBuf>,
    /// Stopword list, one word per line. Defaults to a built-in English list.
    #[arg(long, global = true)]
    stopwords: Option<PathBuf>,
    /// Override any config key, e.g. `--set quantile=0.25`. Repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE", global = true)]
    overrides: Vec<String>,
    /// Maximum number of worker threads.
    #[arg(long, global = true)]
    jobs: Option<usize>,
    /// Log more (-v info, -vv debug).
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    verbose: u8,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Parse a JSON-lines corpus into per-user aggregates.
    Ingest {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Compute and bin domain scores on every dimension.
    Score {
        #[arg(long)]
        users: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Build the weighted retweet graph.
    Graph {
        #[arg(long)]
        users: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Propagate seed labels over the retweet graph.
    Lpa {
        #[arg(long)]
        graph: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Build classifier features.
    #[command(subcommand)]
    Features(FeaturesCmd),
    /// Train a logistic-regression classifier with k-fold evaluation.
    Train {
        /// Feature CSV; defaults to the work-dir file for --kind.
        #[arg(long)]
        features: Option<PathBuf>,
        #[arg(long, default_value = "embed")]
        kind: FeatureKind,
        /// Scores CSV whose bins are the training labels.
        #[arg(long)]
        labels: Option<PathBuf>,
        #[arg(long)]
        dim: Dimension,
        #[arg(long)]
        folds: Option<usize>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Apply trained models to every featurized user.
    Classify {
        /// Model JSON; pair each with a --features file. Without any, every
        /// model in the work dir is applied to its default features.
        #[arg(long)]
        model: Vec<PathBuf>,
        #[arg(long)]
        features: Vec<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Drift, group activity, hashtags, states and heatmaps.
    Analyze {
        #[arg(long)]
        users: Option<PathBuf>,
        #[arg(long)]
        scores: Option<PathBuf>,
        /// Classifier labels; defaults to the work-dir labels_all.csv if present.
        #[arg(long, conflicts_with = "from_bins")]
        labels: Option<PathBuf>,
        /// Assign groups from domain-score bins instead of classifier labels.
        #[arg(long)]
        from_bins: bool,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Generate a synthetic corpus with ground truth.
    Synth {
        /// JSON spec; defaults are used for missing fields.
        #[arg(long)]
        spec: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        truth: PathBuf,
        /// Where catalogs/, seeds/ and vectors.txt are written.
        #[arg(long)]
        world: Option<PathBuf>,
    },
    /// Bundle analysis outputs and evaluations.
    Report {
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Debug, Subcommand)]
enum FeaturesCmd {
    /// Hashtag TF-IDF over a seed-expanded vocabulary.
    Bow {
        #[arg(long)]
        dim: Dimension,
        #[arg(long)]
        users: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Topic affinities from LDA over per-user hashtag documents.
    Lda {
        #[arg(long)]
        users: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Instead of features, write mean coherence for these topic counts.
        #[arg(long, value_delimiter = ',')]
        sweep: Vec<usize>,
    },
    /// Mean word vectors of each user's cleaned text.
    Embed {
        #[arg(long)]
        vectors: Option<PathBuf>,
        #[arg(long)]
        users: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn load_config(g: &Global) -> anyhow::Result<PipelineConfig> {
    let mut cfg = match &g.config {
        Some(p) => PipelineConfig::load(p)?,
        None => PipelineConfig::default(),
    };
    if let Some(d) = &g.work_dir {
        cfg.work_dir = d.clone();
    }
    for (slot, flag) in [
        (&mut cfg.catalogs, &g.catalogs),
        (&mut cfg.seeds, &g.seeds),
        (&mut cfg.stopwords, &g.stopwords),
    ] {
        if flag.is_some() {
            *slot = flag.clone();
        }
    }
    for kv in &g.overrides {
        let (k, v) = kv
            .split_once('=')
            .ok_or_else(|| polarlens::Error::Invalid(format!("--set expects KEY=VALUE, got {kv:?}")))?;
        cfg.set(k.trim(), v.trim())?;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn or(p: &Option<PathBuf>, default: PathBuf) -> PathBuf {
    p.clone().unwrap_or(default)
}

fn print_json<T: Serialize>(v: &T) -> anyhow::Result<()> {
    println!("{}", serde_json::to_string_pretty(v)?);
    Ok(())
}

fn run(cli: Cli) -> anyhow::Result<()> {
    let cfg = load_config(&cli.global)?;
    if let Some(j) = cli.global.jobs {
        if j == 0 {
            return Err(polarlens::Error::Invalid("--jobs must be at least 1".into()).into());
        }
        pipeline::set_jobs(j)?;
    }
    let l = cfg.layout();
    match &cli.command {
        Command::Ingest { input, out } => {
            let s = pipeline::run_ingest(&cfg, input, &or(out, l.users()))?;
            print_json(&s)?;
        }
        Command::Score { users, out } => {
            let s = pipeline::run_score(&cfg, &or(users, l.users()), &or(out, l.scores()))?;
            print_json(&s)?;
        }
        Command::Graph { users, out } => {
            let s = pipeline::run_graph(&cfg, &or(users, l.users()), &or(out, l.graph()))?;
            print_json(&s)?;
        }
        Command::Lpa { graph, out } => {
            let s = pipeline::run_lpa(&cfg, &or(graph, l.graph()), &or(out, l.lpa_labels()))?;
            print_json(&s)?;
        }
        Command::Features(f) => match f {
            FeaturesCmd::Bow { dim, users, out } => {
                let s = pipeline::run_features_bow(
                    &cfg,
                    *dim,
                    &or(users, l.users()),
                    &or(out, l.features(FeatureKind::Bow, Some(*dim))),
                )?;
                print_json(&s)?;
            }
            FeaturesCmd::Lda { users, out, sweep } if !sweep.is_empty() => {
                let out = or(out, l.dir.join("topic_sweep.csv"));
                let table = pipeline::run_topic_sweep(&cfg, &or(users, l.users()), sweep, &out)?;
                print_json(&table)?;
            }
            FeaturesCmd::Lda { users, out, .. } => {
                let s = pipeline::run_features_lda(
                    &cfg,
                    &or(users, l.users()),
                    &or(out, l.features(FeatureKind::Lda, None)),
                )?;
                print_json(&s)?;
            }
            FeaturesCmd::Embed { vectors, users, out } => {
                let Some(vectors) = vectors.clone().or_else(|| cfg.vectors.clone()) else {
                    return Err(polarlens::Error::Invalid(
                        "no vector file given (use --vectors or set `vectors`)".into(),
                    )
                    .into());
                };
                let s = pipeline::run_features_embed(
                    &cfg,
                    &vectors,
                    &or(users, l.users()),
                    &or(out, l.features(FeatureKind::Embed, None)),
                )?;
                print_json(&s)?;
            }
        },
        Command::Train {
            features,
            kind,
            labels,
            dim,
            folds,
            out,
        } => {
            let mut cfg = cfg.clone();
            if let Some(k) = folds {
                cfg.folds = *k;
            }
            let dim_for_path = (*kind == FeatureKind::Bow).then_some(*dim);
            let r = pipeline::run_train(
                &cfg,
                &or(features, l.features(*kind, dim_for_path)),
                &or(labels, l.scores()),
                *dim,
                &or(out, l.model(*dim, *kind)),
            )?;
            print_json(&r)?;
        }
        Command::Classify { model, features, out } => {
            let pairs = classify_pairs(&l, model, features)?;
            let n = pipeline::run_classify(&cfg, &pairs, &or(out, l.labels_all()))?;
            println!("{n} predictions");
        }
        Command::Analyze {
            users,
            scores,
            labels,
            from_bins,
            out,
        } => {
            let labels = match (labels, from_bins) {
                (Some(p), _) => Some(p.clone()),
                (None, true) => None,
                (None, false) => Some(l.labels_all()).filter(|p| p.exists()),
            };
            if labels.is_none() {
                log::info!("assigning groups from domain-score bins");
            }
            let s = pipeline::run_analyze(
                &cfg,
                &or(users, l.users()),
                &or(scores, l.scores()),
                labels.as_deref(),
                &or(out, l.analysis()),
            )?;
            print_json(&s)?;
        }
        Command::Synth { spec, out, truth, world } => {
            let spec: SynthSpec = match spec {
                Some(p) => pipeline::read_spec(p)?,
                None => SynthSpec::default(),
            };
            let world = world
                .clone()
                .unwrap_or_else(|| out.parent().map(Path::to_path_buf).unwrap_or_default());
            let n = pipeline::run_synth(&spec, out, truth, &world)?;
            println!("{n} tweets");
        }
        Command::Report { out } => {
            let t = pipeline::run_report(&cfg, &or(out, l.report()))?;
            for note in &t.notes {
                eprintln!("note: {note}");
            }
            print_json(&t)?;
        }
    }
    Ok(())
}

fn classify_pairs(l: &pipeline::Layout, models: &[PathBuf], features: &[PathBuf]) -> anyhow::Result<Vec<(PathBuf, PathBuf)>> {
    if !models.is_empty() {
        if models.len() != features.len() {
            bail!(polarlens::Error::Invalid(
                "give one --features per --model".into()
            ));
        }
        return Ok(models.iter().cloned().zip(features.iter().cloned()).collect());
    }
    let mut pairs = Vec::new();
    for dim in Dimension::ALL {
        for kind in FeatureKind::ALL {
            let m = l.model(dim, kind);
            if m.exists() {
                let f = l.features(kind, (kind == FeatureKind::Bow).then_some(dim));
                pairs.push((m, f));
            }
        }
    }
    if pairs.is_empty() {
        bail!(polarlens::Error::MissingInput {
            path: l.dir.join("models"),
            producer: "train".into(),
        });
    }
    Ok(pairs)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.global.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match run(cli).context("polarlens failed") {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {:#}", e);
            let validation = e
                .chain()
                .find_map(|c| c.downcast_ref::<polarlens::Error>())
                .is_some_and(polarlens::Error::is_validation);
            ExitCode::from(if validation { 2 } else { 1 })
        }
    }
}
