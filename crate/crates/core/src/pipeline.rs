//! Stage runners shared by the command-line tool and end-to-end tests.
//!
//! Every stage reads files, writes files, and leaves a
//! `<output>.manifest.json` next to its primary output recording the
//! SHA-256 of each input and output plus the configuration used. Outputs
//! carry no timestamps, so rerunning a stage on the same inputs reproduces
//! them byte for byte.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::analysis::{
    assign_group, cumulative_paths, delta_series, group_activity_series, score_heatmap, state_fractions,
    top_group_hashtags, IdeologyGroup,
};
use crate::bow::{cooccur_vocab, tfidf_features, BowArtifact, HashtagSeeds};
use crate::catalog::{bin_scores, cross_dimension_table, domain_score, Bin, CatalogSet, Cutoffs, Dimension, DimScore, Pole};
use crate::corpus::{CorpusBundle, Gazetteer, SchemaConfig, StudyWindow};
use crate::embed::{embed_document, preprocess_text, EmbeddingTable, Stopwords};
use crate::error::{Error, Result};
use crate::graph::{holdout_eval, propagate_labels, EdgeMode, LpaParams, RetweetGraph, SeedSet};
use crate::lda::{self, affinity_features, build_hashtag_corpus, fit_lda, InferParams, LdaParams, TopicModel};
use crate::model::{kfold_cv, train_logreg, EvalReport, FeatureKind, LogRegModel, TrainParams};
use crate::synth::{generate, SynthSpec};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// All tunables of a pipeline run. Loaded from a `key = value` file and
/// overridden by command-line flags.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineConfig {
    pub work_dir: PathBuf,
    /// Directory holding `science.csv`, `political.csv`, `moderacy.csv`.
    pub catalogs: Option<PathBuf>,
    /// Directory holding `science.tsv`, `political.tsv`, `moderacy.tsv`.
    pub seeds: Option<PathBuf>,
    pub vectors: Option<PathBuf>,
    pub stopwords: Option<PathBuf>,
    pub schema: SchemaConfig,
    pub min_domains: usize,
    pub quantile: f64,
    pub min_users: usize,
    pub max_frac: f64,
    pub top_k: usize,
    pub topics: usize,
    pub folds: usize,
    pub min_state_users: usize,
    pub top_hashtags: usize,
    pub heatmap_bins: usize,
    pub lda_sweeps: usize,
    pub lda_burn_in: usize,
    pub infer_sweeps: usize,
    pub infer_burn_in: usize,
    pub lr: f64,
    pub l2: f64,
    pub epochs: usize,
    pub edge_mode: EdgeMode,
    pub lpa_max_iter: usize,
    /// Preferred classifier labels for group assignment.
    pub label_kind: FeatureKind,
    pub lpa_seed: u64,
    pub lda_seed: u64,
    pub infer_seed: u64,
    pub train_seed: u64,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        let lda = LdaParams::default();
        let infer = InferParams::default();
        let train = TrainParams::default();
        let lpa = LpaParams::default();
        Self {
            work_dir: PathBuf::from("work"),
            catalogs: None,
            seeds: None,
            vectors: None,
            stopwords: None,
            schema: SchemaConfig::default(),
            min_domains: crate::catalog::MIN_DOMAINS,
            quantile: crate::catalog::POLE_QUANTILE,
            min_users: lda::MIN_USERS,
            max_frac: lda::MAX_FRAC,
            top_k: crate::bow::TOP_K,
            topics: lda::DEFAULT_TOPICS,
            folds: 5,
            min_state_users: crate::analysis::MIN_STATE_USERS,
            top_hashtags: 50,
            heatmap_bins: 20,
            lda_sweeps: lda.sweeps,
            lda_burn_in: lda.burn_in,
            infer_sweeps: infer.sweeps,
            infer_burn_in: infer.burn_in,
            lr: train.lr,
            l2: train.l2,
            epochs: train.epochs,
            edge_mode: lpa.mode,
            lpa_max_iter: lpa.max_iter,
            label_kind: FeatureKind::Embed,
            lpa_seed: lpa.rng_seed,
            lda_seed: lda.rng_seed,
            infer_seed: infer.rng_seed,
            train_seed: train.rng_seed,
        }
    }
}

fn parse_value<T: std::str::FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| Error::invalid(format!("bad value {value:?} for {key}")))
}

impl PipelineConfig {
    /// Sets one key. Unknown keys are an error.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let path = || Some(PathBuf::from(value));
        match key {
            "work_dir" => self.work_dir = PathBuf::from(value),
            "catalogs" => self.catalogs = path(),
            "seeds" => self.seeds = path(),
            "vectors" => self.vectors = path(),
            "stopwords" => self.stopwords = path(),
            "window" => self.schema.window = StudyWindow::parse(value)?,
            "schema.id" => self.schema.id_key = value.into(),
            "schema.user_id" => self.schema.user_key = value.into(),
            "schema.created_at" => self.schema.created_at_key = value.into(),
            "schema.text" => self.schema.text_key = value.into(),
            "schema.urls" => self.schema.urls_key = value.into(),
            "schema.hashtags" => self.schema.hashtags_key = value.into(),
            "schema.retweeted_user_id" => self.schema.retweeted_user_key = value.into(),
            "schema.user_location" => self.schema.location_key = value.into(),
            "min_domains" => self.min_domains = parse_value(key, value)?,
            "quantile" => self.quantile = parse_value(key, value)?,
            "min_users" => self.min_users = parse_value(key, value)?,
            "max_frac" => self.max_frac = parse_value(key, value)?,
            "top_k" => self.top_k = parse_value(key, value)?,
            "topics" => self.topics = parse_value(key, value)?,
            "folds" => self.folds = parse_value(key, value)?,
            "min_state_users" => self.min_state_users = parse_value(key, value)?,
            "top_hashtags" => self.top_hashtags = parse_value(key, value)?,
            "heatmap_bins" => self.heatmap_bins = parse_value(key, value)?,
            "lda_sweeps" => self.lda_sweeps = parse_value(key, value)?,
            "lda_burn_in" => self.lda_burn_in = parse_value(key, value)?,
            "infer_sweeps" => self.infer_sweeps = parse_value(key, value)?,
            "infer_burn_in" => self.infer_burn_in = parse_value(key, value)?,
            "lr" => self.lr = parse_value(key, value)?,
            "l2" => self.l2 = parse_value(key, value)?,
            "epochs" => self.epochs = parse_value(key, value)?,
            "edge_mode" => self.edge_mode = value.parse()?,
            "lpa_max_iter" => self.lpa_max_iter = parse_value(key, value)?,
            "label_kind" => self.label_kind = value.parse()?,
            "lpa_seed" => self.lpa_seed = parse_value(key, value)?,
            "lda_seed" => self.lda_seed = parse_value(key, value)?,
            "infer_seed" => self.infer_seed = parse_value(key, value)?,
            "train_seed" => self.train_seed = parse_value(key, value)?,
            other => return Err(Error::invalid(format!("unknown config key {other:?}"))),
        }
        Ok(())
    }

    /// Parses `key = value` lines; blank lines and `#` comments are skipped.
    pub fn parse(text: &str, path: &Path) -> Result<Self> {
        let mut cfg = Self::default();
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| Error::Parse {
                path: path.into(),
                line: i + 1,
                message: "expected `key = value`".into(),
            })?;
            cfg.set(key.trim(), value.trim()).map_err(|e| Error::Parse {
                path: path.into(),
                line: i + 1,
                message: e.to_string(),
            })?;
        }
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text, path)
    }

    /// Checks thresholds and that every configured file exists.
    pub fn validate(&self) -> Result<()> {
        let range = |name: &str, ok: bool| {
            if ok {
                Ok(())
            } else {
                Err(Error::invalid(format!("{name} out of range")))
            }
        };
        range("min_domains", self.min_domains >= 1)?;
        range("quantile", self.quantile > 0.0 && self.quantile < 0.5)?;
        range("max_frac", self.max_frac > 0.0 && self.max_frac <= 1.0)?;
        range("top_k", self.top_k >= 1)?;
        range("topics", self.topics >= 1)?;
        range("folds", self.folds >= 2)?;
        range("heatmap_bins", self.heatmap_bins >= 1)?;
        range("lda_burn_in", self.lda_burn_in < self.lda_sweeps)?;
        range("infer_burn_in", self.infer_burn_in < self.infer_sweeps)?;
        range("lr", self.lr > 0.0 && self.lr.is_finite())?;
        range("l2", self.l2 >= 0.0 && self.l2.is_finite())?;
        for p in [&self.catalogs, &self.seeds, &self.vectors, &self.stopwords].into_iter().flatten() {
            if !p.exists() {
                return Err(Error::invalid(format!("{} does not exist", p.display())));
            }
        }
        Ok(())
    }

    pub fn layout(&self) -> Layout {
        Layout {
            dir: self.work_dir.clone(),
        }
    }

    fn lpa_params(&self) -> LpaParams {
        LpaParams {
            max_iter: self.lpa_max_iter,
            rng_seed: self.lpa_seed,
            mode: self.edge_mode,
        }
    }

    fn lda_params(&self) -> LdaParams {
        LdaParams {
            k: self.topics,
            alpha: None,
            beta: 0.01,
            sweeps: self.lda_sweeps,
            burn_in: self.lda_burn_in,
            rng_seed: self.lda_seed,
        }
    }

    fn infer_params(&self) -> InferParams {
        InferParams {
            sweeps: self.infer_sweeps,
            burn_in: self.infer_burn_in,
            rng_seed: self.infer_seed,
        }
    }

    fn train_params(&self) -> TrainParams {
        TrainParams {
            lr: self.lr,
            l2: self.l2,
            epochs: self.epochs,
            rng_seed: self.train_seed,
        }
    }

    fn catalog_set(&self) -> Result<CatalogSet> {
        let dir = self
            .catalogs
            .as_ref()
            .ok_or_else(|| Error::invalid("no catalog directory configured (set `catalogs`)"))?;
        CatalogSet::load_dir(dir)
    }

    fn stopword_list(&self) -> Result<Stopwords> {
        match &self.stopwords {
            Some(p) => Stopwords::load(p),
            None => Ok(Stopwords::default()),
        }
    }
}

/// Default artifact locations inside the work directory.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Layout {
    pub dir: PathBuf,
}

impl Layout {
    pub fn users(&self) -> PathBuf {
        self.dir.join("users.bin")
    }

    pub fn scores(&self) -> PathBuf {
        self.dir.join("scores.csv")
    }

    pub fn graph(&self) -> PathBuf {
        self.dir.join("graph.bin")
    }

    pub fn lpa_labels(&self) -> PathBuf {
        self.dir.join("lpa_labels.csv")
    }

    /// BOW vocabularies are per dimension; LDA and embedding features are not.
    pub fn features(&self, kind: FeatureKind, dim: Option<Dimension>) -> PathBuf {
        match (kind, dim) {
            (FeatureKind::Bow, Some(d)) => self.dir.join(format!("features_bow_{d}.csv")),
            _ => self.dir.join(format!("features_{kind}.csv")),
        }
    }

    pub fn model(&self, dim: Dimension, kind: FeatureKind) -> PathBuf {
        self.dir.join("models").join(format!("{dim}_{kind}.json"))
    }

    pub fn labels_all(&self) -> PathBuf {
        self.dir.join("labels_all.csv")
    }

    pub fn analysis(&self) -> PathBuf {
        self.dir.join("analysis")
    }

    pub fn report(&self) -> PathBuf {
        self.dir.join("report")
    }
}

/// `<path><suffix>`, e.g. `scores.csv` → `scores.csv.cutoffs.json`.
pub fn sidecar(path: &Path, suffix: &str) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(suffix);
    PathBuf::from(s)
}

pub fn sha256_file(path: &Path) -> Result<String> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    Ok(hex::encode(Sha256::digest(&bytes)))
}

fn require(path: &Path, producer: &str) -> Result<()> {
    if path.exists() {
        Ok(())
    } else {
        Err(Error::MissingInput {
            path: path.into(),
            producer: producer.into(),
        })
    }
}

fn write_bytes(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut bytes = serde_json::to_vec_pretty(value)?;
    bytes.push(b'\n');
    write_bytes(path, &bytes)
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    Ok(serde_json::from_slice(&bytes)?)
}

fn write_bincode<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    write_bytes(path, &bincode::serialize(value)?)
}

fn read_bincode<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    Ok(bincode::deserialize(&bytes)?)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FileHash {
    pub path: String,
    pub sha256: String,
}

/// Provenance record written next to every stage output.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub stage: String,
    pub version: String,
    pub inputs: Vec<FileHash>,
    pub outputs: Vec<FileHash>,
    pub config: serde_json::Value,
    /// Hash over the input hashes and the config snapshot.
    pub input_hash: String,
}

fn hash_files(paths: &[&Path]) -> Result<Vec<FileHash>> {
    paths
        .iter()
        .map(|p| {
            Ok(FileHash {
                path: p.display().to_string(),
                sha256: sha256_file(p)?,
            })
        })
        .collect()
}

/// Writes `<primary>.manifest.json` for a finished stage.
pub fn write_manifest(
    stage: &str,
    cfg: &PipelineConfig,
    inputs: &[&Path],
    outputs: &[&Path],
) -> Result<Manifest> {
    let inputs = hash_files(inputs)?;
    let config = serde_json::to_value(cfg)?;
    let mut h = Sha256::new();
    for f in &inputs {
        h.update(f.sha256.as_bytes());
    }
    h.update(serde_json::to_vec(&config)?);
    let manifest = Manifest {
        stage: stage.into(),
        version: VERSION.into(),
        inputs,
        outputs: hash_files(outputs)?,
        config,
        input_hash: hex::encode(h.finalize()),
    };
    let primary = outputs.first().ok_or_else(|| Error::invalid("stage produced no output"))?;
    write_json(&sidecar(primary, ".manifest.json"), &manifest)?;
    Ok(manifest)
}

// ---------------------------------------------------------------- ingest

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IngestSummary {
    pub parsed: u64,
    pub malformed: u64,
    pub out_of_window: u64,
    pub users: usize,
    pub retweets: usize,
}

pub fn run_ingest(cfg: &PipelineConfig, input: &Path, out: &Path) -> Result<IngestSummary> {
    if !input.exists() {
        return Err(Error::invalid(format!("corpus {} does not exist", input.display())));
    }
    let buckets = Default::default();
    let bundle = CorpusBundle::ingest_path(input, &cfg.schema, &Gazetteer::default(), &buckets)?;
    if bundle.stats.malformed > 0 {
        log::warn!("{}: skipped {} malformed lines", input.display(), bundle.stats.malformed);
    }
    write_bincode(out, &bundle)?;
    write_manifest("ingest", cfg, &[input], &[out])?;
    Ok(IngestSummary {
        parsed: bundle.stats.parsed,
        malformed: bundle.stats.malformed,
        out_of_window: bundle.stats.out_of_window,
        users: bundle.users.len(),
        retweets: bundle.retweets.len(),
    })
}

pub fn load_bundle(path: &Path) -> Result<CorpusBundle> {
    require(path, "ingest")?;
    read_bincode(path)
}

// ----------------------------------------------------------------- score

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CutoffReport {
    pub lo: f64,
    pub hi: f64,
    pub eligible: usize,
    pub pos: usize,
    pub neg: usize,
}

/// Scores of one dimension with the cutoffs used to bin them.
pub type ScoredDimension = (Vec<DimScore<f64>>, Cutoffs<f64>);

/// Scores every user on all three dimensions and bins the eligible ones.
pub fn score_all(
    bundle: &CorpusBundle,
    catalogs: &CatalogSet,
    q: f64,
    min_domains: usize,
) -> Result<BTreeMap<Dimension, ScoredDimension>> {
    let mut out = BTreeMap::new();
    for dim in Dimension::ALL {
        let catalog = catalogs.get(dim);
        let scores: Vec<DimScore<f64>> = bundle.users.iter().map(|u| domain_score(u, catalog)).collect();
        let binned = bin_scores(scores, q, min_domains)
            .map_err(|e| Error::Insufficient(format!("{dim}: {e}")))?;
        out.insert(dim, binned);
    }
    Ok(out)
}

fn fmt_f64(x: f64) -> String {
    format!("{x}")
}

pub fn run_score(cfg: &PipelineConfig, users: &Path, out: &Path) -> Result<BTreeMap<Dimension, CutoffReport>> {
    let bundle = load_bundle(users)?;
    let catalogs = cfg.catalog_set()?;
    let scored = score_all(&bundle, &catalogs, cfg.quantile, cfg.min_domains)?;

    let mut wtr = csv::Writer::from_writer(Vec::new());
    wtr.write_record(["user_id", "dim", "delta", "n", "bin"])?;
    let mut cutoffs = BTreeMap::new();
    for (dim, (scores, c)) in &scored {
        for s in scores {
            wtr.write_record([
                s.user_id.as_str(),
                dim.as_str(),
                &s.delta.map(fmt_f64).unwrap_or_default(),
                &s.n_domains.to_string(),
                s.bin.as_str(),
            ])?;
        }
        let count = |b: Bin| scores.iter().filter(|s| s.bin == b).count();
        cutoffs.insert(
            *dim,
            CutoffReport {
                lo: c.lo,
                hi: c.hi,
                eligible: scores.iter().filter(|s| s.is_eligible(cfg.min_domains)).count(),
                pos: count(Bin::PosPole),
                neg: count(Bin::NegPole),
            },
        );
    }
    let bytes = wtr.into_inner().map_err(|e| Error::Serde(e.to_string()))?;
    write_bytes(out, &bytes)?;
    let cut_path = sidecar(out, ".cutoffs.json");
    write_json(&cut_path, &cutoffs)?;
    let mut inputs = vec![users.to_path_buf()];
    for dim in Dimension::ALL {
        inputs.push(cfg.catalogs.as_ref().expect("loaded above").join(format!("{dim}.csv")));
    }
    let inputs: Vec<&Path> = inputs.iter().map(PathBuf::as_path).collect();
    write_manifest("score", cfg, &inputs, &[out, &cut_path])?;
    Ok(cutoffs)
}

/// One row of `scores.csv`.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreRow {
    pub user_id: String,
    pub dimension: Dimension,
    pub delta: Option<f64>,
    pub n_domains: usize,
    pub bin: Bin,
}

pub fn read_scores(path: &Path) -> Result<Vec<ScoreRow>> {
    require(path, "score")?;
    let mut rdr = csv::Reader::from_path(path)?;
    let mut rows = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let bad = |m: &str| Error::Parse {
            path: path.into(),
            line: i + 2,
            message: m.into(),
        };
        if rec.len() != 5 {
            return Err(bad("expected 5 columns"));
        }
        rows.push(ScoreRow {
            user_id: rec[0].to_owned(),
            dimension: rec[1].parse()?,
            delta: if rec[2].is_empty() {
                None
            } else {
                Some(rec[2].parse().map_err(|_| bad("bad delta"))?)
            },
            n_domains: rec[3].parse().map_err(|_| bad("bad count"))?,
            bin: rec[4].parse()?,
        });
    }
    Ok(rows)
}

fn scores_as_dim(rows: &[ScoreRow], dim: Dimension) -> Vec<DimScore<f64>> {
    rows.iter()
        .filter(|r| r.dimension == dim)
        .map(|r| DimScore {
            user_id: r.user_id.clone(),
            dimension: dim,
            delta: r.delta,
            n_domains: r.n_domains,
            bin: r.bin,
        })
        .collect()
}

// ----------------------------------------------------------- graph / lpa

pub fn run_graph(cfg: &PipelineConfig, users: &Path, out: &Path) -> Result<crate::graph::GraphStats> {
    let bundle = load_bundle(users)?;
    let g = RetweetGraph::from_retweets(bundle.retweets.iter().map(|(s, d)| (s.as_str(), d.as_str())));
    write_bincode(out, &g)?;
    write_manifest("graph", cfg, &[users], &[out])?;
    Ok(g.stats())
}

pub fn load_graph(path: &Path) -> Result<RetweetGraph> {
    require(path, "graph")?;
    read_bincode(path)
}

fn seed_path(cfg: &PipelineConfig, dim: Dimension) -> Result<PathBuf> {
    let dir = cfg
        .seeds
        .as_ref()
        .ok_or_else(|| Error::invalid("no seed directory configured (set `seeds`)"))?;
    Ok(dir.join(format!("{dim}.tsv")))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LpaDimReport {
    pub seeds: usize,
    pub seeds_missing: usize,
    pub labeled: usize,
    pub sweeps: usize,
    pub converged: bool,
    pub holdout: Option<EvalReport<f64>>,
}

/// Propagates every dimension whose seed file exists and evaluates each on
/// held-out seeds. Writes labels plus a `.eval.json` sidecar.
pub fn run_lpa(cfg: &PipelineConfig, graph: &Path, out: &Path) -> Result<BTreeMap<Dimension, LpaDimReport>> {
    let g = load_graph(graph)?;
    let params = cfg.lpa_params();
    let mut inputs = vec![graph.to_path_buf()];
    let mut reports = BTreeMap::new();
    let mut wtr = csv::Writer::from_writer(Vec::new());
    wtr.write_record(["user_id", "dim", "label", "seed"])?;
    for dim in Dimension::ALL {
        let path = seed_path(cfg, dim)?;
        if !path.exists() {
            log::warn!("no seeds for {dim} at {}; skipping", path.display());
            continue;
        }
        inputs.push(path.clone());
        let seeds = SeedSet::load(&path, dim)?;
        let outcome = propagate_labels(&g, &seeds, &params)?;
        for (user, pole) in outcome.to_map(&g) {
            let is_seed = seeds.label_of.contains_key(&user);
            wtr.write_record([
                user.as_str(),
                dim.as_str(),
                dim.label(pole).as_str(),
                if is_seed { "1" } else { "0" },
            ])?;
        }
        let holdout = match holdout_eval(&g, &seeds, cfg.folds, cfg.lpa_seed, &params) {
            Ok(r) => Some(r),
            Err(e) => {
                log::warn!("{dim}: holdout evaluation skipped: {e}");
                None
            }
        };
        reports.insert(
            dim,
            LpaDimReport {
                seeds: seeds.len(),
                seeds_missing: seeds.missing_from(&g).len(),
                labeled: outcome.labels.iter().flatten().count(),
                sweeps: outcome.sweeps(),
                converged: outcome.converged,
                holdout,
            },
        );
    }
    if reports.is_empty() {
        return Err(Error::invalid("no seed files found for any dimension"));
    }
    let bytes = wtr.into_inner().map_err(|e| Error::Serde(e.to_string()))?;
    write_bytes(out, &bytes)?;
    let eval_path = sidecar(out, ".eval.json");
    write_json(&eval_path, &reports)?;
    let inputs: Vec<&Path> = inputs.iter().map(PathBuf::as_path).collect();
    write_manifest("lpa", cfg, &inputs, &[out, &eval_path])?;
    Ok(reports)
}

// -------------------------------------------------------------- features

/// Describes a feature CSV: which users were featurized and its width.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureMeta {
    pub kind: FeatureKind,
    pub dimension: Option<Dimension>,
    pub n_features: usize,
    pub users: Vec<String>,
    /// Users in the corpus that could not be featurized.
    pub excluded: usize,
}

/// Dense rows keyed by user, loaded from a feature CSV and its meta file.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    pub meta: FeatureMeta,
    pub rows: BTreeMap<String, Vec<f64>>,
}

fn write_features(out: &Path, meta: &FeatureMeta, rows: &[(String, Vec<(usize, f64)>)]) -> Result<PathBuf> {
    let mut wtr = csv::Writer::from_writer(Vec::new());
    wtr.write_record(["user_id", "index", "value"])?;
    for (user, entries) in rows {
        for &(i, v) in entries {
            if v != 0.0 {
                wtr.write_record([user.as_str(), &i.to_string(), &fmt_f64(v)])?;
            }
        }
    }
    let bytes = wtr.into_inner().map_err(|e| Error::Serde(e.to_string()))?;
    write_bytes(out, &bytes)?;
    let meta_path = sidecar(out, ".meta.json");
    write_json(&meta_path, meta)?;
    Ok(meta_path)
}

pub fn read_features(path: &Path) -> Result<FeatureMatrix> {
    require(path, "features")?;
    let meta: FeatureMeta = read_json(&sidecar(path, ".meta.json"))?;
    let mut rows: BTreeMap<String, Vec<f64>> =
        meta.users.iter().map(|u| (u.clone(), vec![0.0; meta.n_features])).collect();
    let mut rdr = csv::Reader::from_path(path)?;
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let bad = |m: String| Error::Parse {
            path: path.into(),
            line: i + 2,
            message: m,
        };
        if rec.len() != 3 {
            return Err(bad("expected 3 columns".into()));
        }
        let idx: usize = rec[1].parse().map_err(|_| bad(format!("bad index {:?}", &rec[1])))?;
        let val: f64 = rec[2].parse().map_err(|_| bad(format!("bad value {:?}", &rec[2])))?;
        if idx >= meta.n_features {
            return Err(bad(format!("index {idx} ≥ width {}", meta.n_features)));
        }
        let row = rows
            .get_mut(&rec[0])
            .ok_or_else(|| bad(format!("user {:?} not in feature metadata", &rec[0])))?;
        row[idx] = val;
    }
    Ok(FeatureMatrix { meta, rows })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureSummary {
    pub users: usize,
    pub excluded: usize,
    pub n_features: usize,
}

pub fn run_features_bow(cfg: &PipelineConfig, dim: Dimension, users: &Path, out: &Path) -> Result<FeatureSummary> {
    let bundle = load_bundle(users)?;
    let vocab = cooccur_vocab(
        bundle.tweet_hashtags.iter().map(Vec::as_slice),
        dim,
        &HashtagSeeds::defaults(dim),
        cfg.top_k,
    )?;
    let tfidf = tfidf_features::<f64>(&bundle.users, &vocab)?;
    let meta = FeatureMeta {
        kind: FeatureKind::Bow,
        dimension: Some(dim),
        n_features: vocab.len(),
        users: tfidf.features.iter().map(|f| f.user_id.clone()).collect(),
        excluded: tfidf.excluded,
    };
    let rows: Vec<(String, Vec<(usize, f64)>)> = tfidf
        .features
        .iter()
        .map(|f| (f.user_id.clone(), f.indices.iter().copied().zip(f.values.iter().copied()).collect()))
        .collect();
    let meta_path = write_features(out, &meta, &rows)?;
    let artifact_path = sidecar(out, ".vocab.json");
    write_json(&artifact_path, &BowArtifact { vocab, idf: tfidf.idf })?;
    write_manifest("features bow", cfg, &[users], &[out, &meta_path, &artifact_path])?;
    Ok(FeatureSummary {
        users: meta.users.len(),
        excluded: meta.excluded,
        n_features: meta.n_features,
    })
}

pub fn run_features_lda(cfg: &PipelineConfig, users: &Path, out: &Path) -> Result<FeatureSummary> {
    let bundle = load_bundle(users)?;
    let corpus = build_hashtag_corpus(&bundle.users, cfg.min_users, cfg.max_frac)?;
    let model = fit_lda(&corpus, &cfg.lda_params())?;
    let affinities = affinity_features(&model, &bundle.users, &cfg.infer_params());
    let meta = FeatureMeta {
        kind: FeatureKind::Lda,
        dimension: None,
        n_features: model.k,
        users: affinities.iter().map(|a| a.user_id.clone()).collect(),
        excluded: 0,
    };
    let rows: Vec<(String, Vec<(usize, f64)>)> = affinities
        .iter()
        .map(|a| (a.user_id.clone(), a.theta.iter().copied().enumerate().collect()))
        .collect();
    let meta_path = write_features(out, &meta, &rows)?;
    let model_path = sidecar(out, ".model.json");
    write_json(&model_path, &model)?;
    write_manifest("features lda", cfg, &[users], &[out, &meta_path, &model_path])?;
    Ok(FeatureSummary {
        users: meta.users.len(),
        excluded: 0,
        n_features: model.k,
    })
}

/// Mean coherence for each candidate topic count.
pub fn run_topic_sweep(cfg: &PipelineConfig, users: &Path, candidates: &[usize], out: &Path) -> Result<Vec<(usize, f64)>> {
    let bundle = load_bundle(users)?;
    let corpus = build_hashtag_corpus(&bundle.users, cfg.min_users, cfg.max_frac)?;
    let table = lda::select_k(&corpus, candidates, &cfg.lda_params(), 10)?;
    let mut s = String::from("k,coherence\n");
    for (k, c) in &table {
        let _ = writeln!(s, "{k},{c}");
    }
    write_bytes(out, s.as_bytes())?;
    write_manifest("features lda sweep", cfg, &[users], &[out])?;
    Ok(table)
}

pub fn load_topic_model(path: &Path) -> Result<TopicModel> {
    read_json(path)
}

pub fn run_features_embed(cfg: &PipelineConfig, vectors: &Path, users: &Path, out: &Path) -> Result<FeatureSummary> {
    let bundle = load_bundle(users)?;
    if !vectors.exists() {
        return Err(Error::invalid(format!("vector file {} does not exist", vectors.display())));
    }
    let table = EmbeddingTable::<f64>::load(vectors)?;
    let stop = cfg.stopword_list()?;
    use rayon::prelude::*;
    let embedded: Vec<_> = bundle
        .users
        .par_iter()
        .map(|u| embed_document(&u.user_id, &preprocess_text(&u.doc_text, &stop), &table))
        .collect();
    let excluded = embedded.iter().filter(|e| e.is_none()).count();
    let docs: Vec<_> = embedded.into_iter().flatten().collect();
    let meta = FeatureMeta {
        kind: FeatureKind::Embed,
        dimension: None,
        n_features: table.dim,
        users: docs.iter().map(|d| d.user_id.clone()).collect(),
        excluded,
    };
    let rows: Vec<(String, Vec<(usize, f64)>)> = docs
        .iter()
        .map(|d| (d.user_id.clone(), d.vector.iter().copied().enumerate().collect()))
        .collect();
    let meta_path = write_features(out, &meta, &rows)?;
    let mut inputs = vec![users, vectors];
    if let Some(p) = &cfg.stopwords {
        inputs.push(p);
    }
    write_manifest("features embed", cfg, &inputs, &[out, &meta_path])?;
    Ok(FeatureSummary {
        users: meta.users.len(),
        excluded,
        n_features: table.dim,
    })
}

// ----------------------------------------------------- train / classify

/// Joins a feature matrix with binned poles: PosPole → true, NegPole → false.
pub fn training_set(features: &FeatureMatrix, scores: &[ScoreRow], dim: Dimension) -> (Vec<String>, Vec<Vec<f64>>, Vec<bool>) {
    let (mut ids, mut x, mut y) = (Vec::new(), Vec::new(), Vec::new());
    for s in scores.iter().filter(|s| s.dimension == dim) {
        let label = match s.bin {
            Bin::PosPole => true,
            Bin::NegPole => false,
            Bin::Unbinned => continue,
        };
        if let Some(row) = features.rows.get(&s.user_id) {
            ids.push(s.user_id.clone());
            x.push(row.clone());
            y.push(label);
        }
    }
    (ids, x, y)
}

pub fn run_train(cfg: &PipelineConfig, features: &Path, labels: &Path, dim: Dimension, out: &Path) -> Result<EvalReport<f64>> {
    require(labels, "score")?;
    let scores = read_scores(labels)?;
    let matrix = read_features(features)?;
    if let Some(d) = matrix.meta.dimension.filter(|&d| d != dim) {
        return Err(Error::invalid(format!("{} holds {d} features, not {dim}", features.display())));
    }
    let (_, x, y) = training_set(&matrix, &scores, dim);
    if x.is_empty() {
        return Err(Error::Insufficient(format!("no binned {dim} users have {} features", matrix.meta.kind)));
    }
    let params = cfg.train_params();
    let report = kfold_cv(&x, &y, cfg.folds, matrix.meta.kind, &params)?;
    let mut model = train_logreg(&x, &y, dim, matrix.meta.kind, &params)?;
    model.log.feature_hash = Some(sha256_file(features)?);
    write_json(out, &model)?;
    let eval_path = sidecar(out, ".eval.json");
    write_json(&eval_path, &report)?;
    write_manifest("train", cfg, &[features, labels], &[out, &eval_path])?;
    Ok(report)
}

pub fn load_model(path: &Path) -> Result<LogRegModel<f64>> {
    require(path, "train")?;
    read_json(path)
}

/// One row of `labels_all.csv`.
#[derive(Debug, Clone, PartialEq)]
pub struct ClassifiedRow {
    pub user_id: String,
    pub dimension: Dimension,
    pub kind: FeatureKind,
    pub probability: f64,
    pub pole: Pole,
}

/// Applies each `(model, features)` pair to every featurized user.
pub fn run_classify(cfg: &PipelineConfig, pairs: &[(PathBuf, PathBuf)], out: &Path) -> Result<usize> {
    if pairs.is_empty() {
        return Err(Error::invalid("classify needs at least one model"));
    }
    let mut wtr = csv::Writer::from_writer(Vec::new());
    wtr.write_record(["user_id", "dim", "kind", "probability", "label"])?;
    let mut n = 0;
    let mut inputs = Vec::new();
    for (model_path, feat_path) in pairs {
        let model = load_model(model_path)?;
        let matrix = read_features(feat_path)?;
        if matrix.meta.kind != model.feature_kind {
            return Err(Error::invalid(format!(
                "model {} expects {} features, {} holds {}",
                model_path.display(),
                model.feature_kind,
                feat_path.display(),
                matrix.meta.kind
            )));
        }
        for (user, row) in &matrix.rows {
            let (p, pos) = model.predict(row)?;
            let pole = if pos { Pole::Pos } else { Pole::Neg };
            wtr.write_record([
                user.as_str(),
                model.dimension.as_str(),
                model.feature_kind.as_str(),
                &fmt_f64(p),
                model.dimension.label(pole).as_str(),
            ])?;
            n += 1;
        }
        inputs.push(model_path.as_path());
        inputs.push(feat_path.as_path());
    }
    let bytes = wtr.into_inner().map_err(|e| Error::Serde(e.to_string()))?;
    write_bytes(out, &bytes)?;
    write_manifest("classify", cfg, &inputs, &[out])?;
    Ok(n)
}

pub fn read_classified(path: &Path) -> Result<Vec<ClassifiedRow>> {
    require(path, "classify")?;
    let mut rdr = csv::Reader::from_path(path)?;
    let mut rows = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let bad = |m: &str| Error::Parse {
            path: path.into(),
            line: i + 2,
            message: m.into(),
        };
        if rec.len() != 5 {
            return Err(bad("expected 5 columns"));
        }
        let dimension: Dimension = rec[1].parse()?;
        rows.push(ClassifiedRow {
            user_id: rec[0].to_owned(),
            dimension,
            kind: rec[2].parse()?,
            probability: rec[3].parse().map_err(|_| bad("bad probability"))?,
            pole: dimension.parse_pole(&rec[4])?,
        });
    }
    Ok(rows)
}

// --------------------------------------------------------------- analyze

/// Poles per dimension used for group assignment.
pub type PoleTable = BTreeMap<Dimension, BTreeMap<String, Pole>>;

/// Poles from domain-score bins.
pub fn poles_from_bins(scores: &[ScoreRow]) -> PoleTable {
    let mut t: PoleTable = Dimension::ALL.iter().map(|&d| (d, BTreeMap::new())).collect();
    for s in scores {
        if let Some(p) = s.bin.pole() {
            t.get_mut(&s.dimension).expect("all dims").insert(s.user_id.clone(), p);
        }
    }
    t
}

/// Poles from classifier output. For each dimension the `preferred`
/// feature kind is used when present, otherwise the first kind found in
/// bow, lda, embed order.
pub fn poles_from_classified(rows: &[ClassifiedRow], preferred: FeatureKind) -> PoleTable {
    let mut t: PoleTable = Dimension::ALL.iter().map(|&d| (d, BTreeMap::new())).collect();
    for dim in Dimension::ALL {
        let kinds: Vec<FeatureKind> = FeatureKind::ALL
            .into_iter()
            .filter(|k| rows.iter().any(|r| r.dimension == dim && r.kind == *k))
            .collect();
        let Some(kind) = kinds.iter().copied().find(|&k| k == preferred).or(kinds.first().copied()) else {
            continue;
        };
        let entry = t.get_mut(&dim).expect("all dims");
        for r in rows.iter().filter(|r| r.dimension == dim && r.kind == kind) {
            entry.insert(r.user_id.clone(), r.pole);
        }
    }
    t
}

pub fn assign_groups(poles: &PoleTable) -> BTreeMap<String, IdeologyGroup> {
    let get = |d: Dimension, u: &str| poles.get(&d).and_then(|m| m.get(u)).copied();
    poles
        .get(&Dimension::Science)
        .into_iter()
        .flat_map(|m| m.keys())
        .filter_map(|u| {
            assign_group(
                get(Dimension::Science, u),
                get(Dimension::Moderacy, u),
                get(Dimension::Political, u),
            )
            .map(|g| (u.clone(), g))
        })
        .collect()
}

pub const ANALYSIS_FILES: [&str; 6] = [
    "heatmaps.csv",
    "delta_bar.csv",
    "activity.csv",
    "states.csv",
    "hashtags.csv",
    "groups.csv",
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnalyzeSummary {
    pub classified: usize,
    pub label_source: String,
    pub cross_users: usize,
    pub drift_users: BTreeMap<Dimension, usize>,
}

fn group_header(first: &[&str]) -> Vec<String> {
    first
        .iter()
        .map(|s| s.to_string())
        .chain(IdeologyGroup::ALL.iter().map(|g| g.as_str().to_owned()))
        .collect()
}

/// Runs every downstream analysis and writes the plot-data files into
/// `out_dir`. Groups come from `labels` (classifier output) when given,
/// otherwise from the domain-score bins.
pub fn run_analyze(
    cfg: &PipelineConfig,
    users: &Path,
    scores_path: &Path,
    labels: Option<&Path>,
    out_dir: &Path,
) -> Result<AnalyzeSummary> {
    let bundle = load_bundle(users)?;
    let scores = read_scores(scores_path)?;
    let catalogs = cfg.catalog_set()?;
    let (poles, source) = match labels {
        Some(p) => (poles_from_classified(&read_classified(p)?, cfg.label_kind), "classifier"),
        None => (poles_from_bins(&scores), "domain_bins"),
    };
    let groups = assign_groups(&poles);
    let path = |name: &str| out_dir.join(name);

    // cross-dimension heatmaps over domain scores
    let dims: BTreeMap<Dimension, Vec<DimScore<f64>>> =
        Dimension::ALL.iter().map(|&d| (d, scores_as_dim(&scores, d))).collect();
    let table = cross_dimension_table(
        &dims[&Dimension::Science],
        &dims[&Dimension::Political],
        &dims[&Dimension::Moderacy],
        cfg.min_domains,
    );
    let heat = score_heatmap(&table, cfg.heatmap_bins)?;
    let mut s = String::from("grid,science_bin,other_bin,count\n");
    for (name, grid) in [("science_political", &heat.science_political), ("science_moderacy", &heat.science_moderacy)] {
        for (i, row) in grid.iter().enumerate() {
            for (j, c) in row.iter().enumerate() {
                let _ = writeln!(s, "{name},{i},{j},{c}");
            }
        }
    }
    write_bytes(&path("heatmaps.csv"), s.as_bytes())?;

    // drift over cumulative scores
    let n_buckets = bundle.buckets.len();
    let mut s = String::from("dim,from_bucket,to_bucket,delta_bar,n_users\n");
    let mut drift_users = BTreeMap::new();
    for dim in Dimension::ALL {
        let paths = cumulative_paths::<f64>(&bundle.users, catalogs.get(dim), n_buckets);
        drift_users.insert(dim, paths.users.len());
        match delta_series(&paths.paths) {
            Ok(series) => {
                for (t, d) in series.iter().enumerate() {
                    let _ = writeln!(s, "{dim},{},{},{d},{}", t + 1, t + 2, paths.users.len());
                }
            }
            Err(e) => log::warn!("{dim}: no drift series: {e}"),
        }
    }
    write_bytes(&path("delta_bar.csv"), s.as_bytes())?;

    let mut wtr = csv::Writer::from_writer(Vec::new());
    wtr.write_record(group_header(&["bucket", "active", "empty"]))?;
    for row in group_activity_series::<f64>(&groups, &bundle.users, n_buckets) {
        let mut rec = vec![row.bucket.to_string(), row.active.to_string(), row.empty.to_string()];
        rec.extend(row.fractions.iter().map(|f| fmt_f64(*f)));
        wtr.write_record(&rec)?;
    }
    write_bytes(&path("activity.csv"), &wtr.into_inner().map_err(|e| Error::Serde(e.to_string()))?)?;

    let mut wtr = csv::Writer::from_writer(Vec::new());
    wtr.write_record(group_header(&["state", "users", "suppressed"]))?;
    for row in state_fractions::<f64>(&groups, &bundle.users, cfg.min_state_users) {
        let mut rec = vec![row.state.clone(), row.users.to_string(), row.fractions.is_none().to_string()];
        match &row.fractions {
            Some(f) => rec.extend(f.iter().map(|v| fmt_f64(*v))),
            None => rec.extend(std::iter::repeat_n(String::new(), 6)),
        }
        wtr.write_record(&rec)?;
    }
    write_bytes(&path("states.csv"), &wtr.into_inner().map_err(|e| Error::Serde(e.to_string()))?)?;

    let tags = top_group_hashtags(&groups, &bundle.users, cfg.top_hashtags);
    let mut wtr = csv::Writer::from_writer(Vec::new());
    wtr.write_record(["group", "rank", "hashtag", "count"])?;
    for (g, list) in &tags.per_group {
        for (i, (t, c)) in list.iter().enumerate() {
            wtr.write_record([g.as_str(), &(i + 1).to_string(), t, &c.to_string()])?;
        }
    }
    for t in &tags.common {
        wtr.write_record(["common", "", t, ""])?;
    }
    write_bytes(&path("hashtags.csv"), &wtr.into_inner().map_err(|e| Error::Serde(e.to_string()))?)?;

    let mut wtr = csv::Writer::from_writer(Vec::new());
    wtr.write_record(["user_id", "group"])?;
    for (u, g) in &groups {
        wtr.write_record([u.as_str(), g.as_str()])?;
    }
    write_bytes(&path("groups.csv"), &wtr.into_inner().map_err(|e| Error::Serde(e.to_string()))?)?;

    let mut inputs = vec![users.to_path_buf(), scores_path.to_path_buf()];
    if let Some(l) = labels {
        inputs.push(l.to_path_buf());
    }
    let inputs: Vec<&Path> = inputs.iter().map(PathBuf::as_path).collect();
    let outputs: Vec<PathBuf> = ANALYSIS_FILES.iter().map(|f| path(f)).collect();
    let outputs: Vec<&Path> = outputs.iter().map(PathBuf::as_path).collect();
    write_manifest("analyze", cfg, &inputs, &outputs)?;
    Ok(AnalyzeSummary {
        classified: groups.len(),
        label_source: source.into(),
        cross_users: table.len(),
        drift_users,
    })
}

/// Reads `groups.csv`.
pub fn read_groups(path: &Path) -> Result<BTreeMap<String, IdeologyGroup>> {
    require(path, "analyze")?;
    let mut rdr = csv::Reader::from_path(path)?;
    let mut out = BTreeMap::new();
    for rec in rdr.records() {
        let rec = rec?;
        out.insert(rec[0].to_owned(), rec[1].parse()?);
    }
    Ok(out)
}

// ---------------------------------------------------------------- report

pub const REPORT_FILES: [&str; 6] = [
    "heatmaps.csv",
    "delta_bar.csv",
    "activity.csv",
    "states.csv",
    "hashtags.csv",
    "eval.json",
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalRow {
    pub method: String,
    pub dimension: Dimension,
    pub n: usize,
    pub accuracy: f64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

impl EvalRow {
    fn new(method: &str, dimension: Dimension, r: &EvalReport<f64>) -> Self {
        Self {
            method: method.into(),
            dimension,
            n: r.n,
            accuracy: r.accuracy,
            precision: r.precision,
            recall: r.recall,
            f1: r.f1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalTable {
    pub rows: Vec<EvalRow>,
    pub notes: Vec<String>,
}

/// Collects the analysis files and every available evaluation into one
/// directory. Missing analysis outputs or LPA evaluations are an error
/// listing all missing pieces; missing classifier evaluations only drop
/// their rows and add a note.
pub fn run_report(cfg: &PipelineConfig, out_dir: &Path) -> Result<EvalTable> {
    let layout = cfg.layout();
    let analysis = layout.analysis();
    let lpa_eval = sidecar(&layout.lpa_labels(), ".eval.json");
    let mut missing = Vec::new();
    for f in &REPORT_FILES[..5] {
        if !analysis.join(f).exists() {
            missing.push(format!("{} (run `polarlens analyze`)", analysis.join(f).display()));
        }
    }
    if !lpa_eval.exists() {
        missing.push(format!("{} (run `polarlens lpa`)", lpa_eval.display()));
    }
    if !missing.is_empty() {
        return Err(Error::Insufficient(format!("report inputs missing: {}", missing.join(", "))));
    }

    let mut rows = Vec::new();
    let mut notes = Vec::new();
    let lpa: BTreeMap<Dimension, LpaDimReport> = read_json(&lpa_eval)?;
    for (dim, r) in &lpa {
        match &r.holdout {
            Some(h) => rows.push(EvalRow::new("lpa", *dim, h)),
            None => notes.push(format!("lpa {dim}: too few seeds for holdout evaluation")),
        }
    }
    let mut inputs = vec![lpa_eval.clone()];
    for kind in FeatureKind::ALL {
        let mut found = false;
        for dim in Dimension::ALL {
            let p = sidecar(&layout.model(dim, kind), ".eval.json");
            if p.exists() {
                rows.push(EvalRow::new(kind.as_str(), dim, &read_json(&p)?));
                inputs.push(p);
                found = true;
            }
        }
        if !found {
            notes.push(format!("no {kind} classifier evaluations found; {kind} rows omitted"));
        }
    }

    fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    let mut outputs = Vec::new();
    for f in &REPORT_FILES[..5] {
        let src = analysis.join(f);
        let bytes = fs::read(&src).map_err(|e| Error::io(&src, e))?;
        write_bytes(&out_dir.join(f), &bytes)?;
        inputs.push(src);
        outputs.push(out_dir.join(f));
    }
    let table = EvalTable { rows, notes };
    let eval_path = out_dir.join("eval.json");
    write_json(&eval_path, &table)?;
    outputs.insert(0, eval_path);
    let inputs: Vec<&Path> = inputs.iter().map(PathBuf::as_path).collect();
    let outputs: Vec<&Path> = outputs.iter().map(PathBuf::as_path).collect();
    write_manifest("report", cfg, &inputs, &outputs)?;
    Ok(table)
}

// ----------------------------------------------------------------- synth

pub fn read_spec(path: &Path) -> Result<SynthSpec> {
    if !path.exists() {
        return Err(Error::invalid(format!("spec {} does not exist", path.display())));
    }
    read_json(path)
}

/// Writes a synthetic corpus, its truth table, and under `world_dir` the
/// matching `catalogs/`, `seeds/` and `vectors.txt`.
pub fn run_synth(spec: &SynthSpec, corpus: &Path, truth: &Path, world_dir: &Path) -> Result<usize> {
    let out = generate(spec)?;
    out.write_corpus(corpus)?;
    out.write_truth(truth)?;
    out.write_world(world_dir)?;
    let spec_path = sidecar(corpus, ".spec.json");
    write_json(&spec_path, spec)?;
    Ok(out.tweets.len())
}

/// Caps the worker pool used by parallel stages. Must be called before
/// any parallel work starts.
pub fn set_jobs(jobs: usize) -> Result<()> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build_global()
        .map_err(|e| Error::invalid(format!("cannot size worker pool: {e}")))
}
