//! Synthetic corpora and graphs with known ground truth.
//!
//! [`generate`] emits tweets in the production input format together with
//! the catalogs, seed lists and word vectors needed to run every pipeline
//! stage, so each inference method can be checked against planted labels.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::io::Write as _;
use std::path::Path;

use chrono::{Duration, NaiveDate, NaiveTime};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::analysis::IdeologyGroup;
use crate::catalog::{Dimension, Pole};
use crate::corpus::{RawTweet, StudyWindow};
use crate::error::{Error, Result};
use crate::graph::RetweetGraph;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthSpec {
    pub n_users: usize,
    /// Weights over [`IdeologyGroup::ALL`]; must sum to 1.
    pub mixture: Vec<f64>,
    /// Mean original tweets per user (actual count uniform in ±50%).
    pub tweets_per_user: usize,
    /// Probability that a tweet links a domain.
    pub url_rate: f64,
    /// Probability that a tweet carries hashtags.
    pub hashtag_rate: f64,
    /// Fraction of users who only ever emit items from their own poles.
    pub pure_fraction: f64,
    /// For the other users, probability that an item comes from the opposite pole.
    pub noise: f64,
    /// Retweet tie probability within a group.
    pub p_in: f64,
    /// Retweet tie probability across groups.
    pub p_out: f64,
    pub domains_per_pole: usize,
    pub hashtags_per_pole: usize,
    pub words_per_pole: usize,
    pub embed_dim: usize,
    /// Fraction of each pole's pure users listed as propagation seeds.
    pub seed_fraction: f64,
    pub states: Vec<String>,
    pub window: StudyWindow,
    pub rng_seed: u64,
}

impl Default for SynthSpec {
    fn default() -> Self {
        Self {
            n_users: 600,
            mixture: vec![1.0 / 6.0; 6],
            tweets_per_user: 20,
            url_rate: 0.7,
            hashtag_rate: 0.8,
            pure_fraction: 0.8,
            noise: 0.2,
            p_in: 0.05,
            p_out: 0.001,
            domains_per_pole: 20,
            hashtags_per_pole: 12,
            words_per_pole: 25,
            embed_dim: 16,
            seed_fraction: 0.05,
            states: ["CA", "TX", "NY", "FL", "IL", "PA", "OH", "GA"].map(String::from).to_vec(),
            window: StudyWindow::default(),
            rng_seed: 2020,
        }
    }
}

impl SynthSpec {
    pub fn validate(&self) -> Result<()> {
        if self.mixture.len() != 6 || self.mixture.iter().any(|&w| !w.is_finite() || w < 0.0) {
            return Err(Error::invalid("mixture needs six non-negative weights"));
        }
        let total: f64 = self.mixture.iter().sum();
        if (total - 1.0).abs() > 1e-6 {
            return Err(Error::invalid(format!("mixture sums to {total}, not 1")));
        }
        if self.n_users == 0 || self.tweets_per_user == 0 {
            return Err(Error::invalid("need at least one user and one tweet per user"));
        }
        for (name, p) in [
            ("url_rate", self.url_rate),
            ("hashtag_rate", self.hashtag_rate),
            ("pure_fraction", self.pure_fraction),
            ("noise", self.noise),
            ("p_in", self.p_in),
            ("p_out", self.p_out),
            ("seed_fraction", self.seed_fraction),
        ] {
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::invalid(format!("{name} = {p} outside [0, 1]")));
            }
        }
        if self.domains_per_pole == 0 || self.hashtags_per_pole == 0 || self.words_per_pole == 0 {
            return Err(Error::invalid("pools must be non-empty"));
        }
        if self.embed_dim < 3 {
            return Err(Error::invalid("embed_dim must be at least 3"));
        }
        if self.states.is_empty() {
            return Err(Error::invalid("at least one state is required"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TruthRow {
    pub user_id: String,
    pub group: IdeologyGroup,
    pub pure: bool,
    pub state: String,
}

/// Catalogs, seeds and vectors that go with a synthetic corpus.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthWorld {
    /// `(domain, label)` rows per dimension. The moderacy catalog lists
    /// only moderate domains; hardline is derived from the political one.
    pub catalogs: BTreeMap<Dimension, Vec<(String, String)>>,
    pub seeds: BTreeMap<Dimension, Vec<(String, String)>>,
    pub vectors: Vec<(String, Vec<f64>)>,
    pub embed_dim: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthOutput {
    pub tweets: Vec<RawTweet>,
    pub truth: Vec<TruthRow>,
    pub world: SynthWorld,
}

/// Named item pools, one per pole of each axis plus shared filler.
struct Pools {
    sci_domains: [Vec<String>; 2],
    pol_domains: [Vec<String>; 2],
    moderate_domains: Vec<String>,
    sci_tags: [Vec<String>; 2],
    pol_tags: [Vec<String>; 2],
    moderate_tags: Vec<String>,
    common_tags: Vec<String>,
    sci_words: [Vec<String>; 2],
    pol_words: [Vec<String>; 2],
    moderate_words: Vec<String>,
    common_words: Vec<String>,
}

fn names(prefix: &str, n: usize, suffix: &str) -> Vec<String> {
    (0..n).map(|i| format!("{prefix}{i}{suffix}")).collect()
}

/// Seed hashtags come first in each tag pool so they are always emitted.
fn with_seeds(seeds: &[&str], rest: Vec<String>) -> Vec<String> {
    seeds.iter().map(|s| s.to_string()).chain(rest).collect()
}

// index 0 = negative pole, 1 = positive pole
fn pole_idx(p: Pole) -> usize {
    match p {
        Pole::Neg => 0,
        Pole::Pos => 1,
    }
}

impl Pools {
    fn new(spec: &SynthSpec) -> Self {
        let (d, h, w) = (spec.domains_per_pole, spec.hashtags_per_pole, spec.words_per_pole);
        Self {
            sci_domains: [names("antisci", d, ".com"), names("prosci", d, ".org")],
            pol_domains: [names("leftnews", d, ".com"), names("rightnews", d, ".com")],
            moderate_domains: names("centerwire", d, ".org"),
            sci_tags: [
                with_seeds(&["plandemic"], names("hoax", h, "")),
                with_seeds(&["stayhome"], names("flatten", h, "")),
            ],
            pol_tags: [
                with_seeds(&["trumpvirus"], names("resist", h, "")),
                with_seeds(&["chinavirus"], names("maga", h, "")),
            ],
            moderate_tags: with_seeds(&["pandemic", "lockdown"], names("update", h, "")),
            common_tags: vec!["covid19".into(), "coronavirus".into()],
            sci_words: [names("skeptic", w, ""), names("evidence", w, "")],
            pol_words: [names("progressive", w, ""), names("patriot", w, "")],
            moderate_words: names("balanced", w, ""),
            common_words: names("daily", w, ""),
        }
    }
}

#[derive(Debug, Clone)]
struct PlantedUser {
    id: String,
    group: IdeologyGroup,
    pure: bool,
    state: String,
}

impl PlantedUser {
    fn noisy(&self, pole: Pole, noise: f64, rng: &mut ChaCha8Rng) -> Pole {
        if !self.pure && rng.gen_bool(noise) {
            pole.opposite()
        } else {
            pole
        }
    }
}

fn pick<'a>(pool: &'a [String], rng: &mut ChaCha8Rng) -> &'a str {
    pool.choose(rng).expect("non-empty pool")
}

/// Seed tags are drawn a third of the time, topical tags otherwise.
fn pick_tag<'a>(pool: &'a [String], n_seeds: usize, rng: &mut ChaCha8Rng) -> &'a str {
    if rng.gen_bool(1.0 / 3.0) {
        &pool[rng.gen_range(0..n_seeds)]
    } else {
        &pool[rng.gen_range(n_seeds..pool.len())]
    }
}

fn ideology_axis(user: &PlantedUser, spec: &SynthSpec, rng: &mut ChaCha8Rng) -> Option<Pole> {
    // Some(pole) = political side, None = moderate
    let moderate = user.noisy(user.group.moderacy(), spec.noise, rng) == Pole::Pos;
    if moderate {
        None
    } else {
        let side = user
            .group
            .political()
            .unwrap_or_else(|| if rng.gen_bool(0.5) { Pole::Pos } else { Pole::Neg });
        Some(user.noisy(side, spec.noise, rng))
    }
}

struct Composed {
    words: String,
    text: String,
    tags: Vec<String>,
    urls: Vec<String>,
}

fn compose_tweet(user: &PlantedUser, spec: &SynthSpec, pools: &Pools, rng: &mut ChaCha8Rng) -> Composed {
    let sci = pole_idx(user.noisy(user.group.science(), spec.noise, rng));
    let ideology = ideology_axis(user, spec, rng);
    let mut words: Vec<&str> = Vec::new();
    for _ in 0..3 {
        words.push(pick(&pools.sci_words[sci], rng));
    }
    for _ in 0..3 {
        words.push(match ideology {
            Some(side) => pick(&pools.pol_words[pole_idx(side)], rng),
            None => pick(&pools.moderate_words, rng),
        });
    }
    for _ in 0..2 {
        words.push(pick(&pools.common_words, rng));
    }
    words.push(["the", "and", "is", "of"][rng.gen_range(0..4)]);
    words.shuffle(rng);
    let words = words.join(" ");
    let mut text = words.clone();

    let mut tags = Vec::new();
    if rng.gen_bool(spec.hashtag_rate) {
        tags.push(pick_tag(&pools.sci_tags[sci], 1, rng).to_owned());
        let second = match ideology {
            Some(side) => pick_tag(&pools.pol_tags[pole_idx(side)], 1, rng),
            None => pick_tag(&pools.moderate_tags, 2, rng),
        };
        tags.push(second.to_owned());
        if rng.gen_bool(0.5) {
            tags.push(pick(&pools.common_tags, rng).to_owned());
        }
        tags.dedup();
    }
    for t in &tags {
        let _ = write!(text, " #{t}");
    }

    let mut urls = Vec::new();
    if rng.gen_bool(spec.url_rate) {
        let domain = if rng.gen_bool(0.5) {
            pick(&pools.sci_domains[sci], rng)
        } else {
            match ideology {
                Some(side) => pick(&pools.pol_domains[pole_idx(side)], rng),
                None => pick(&pools.moderate_domains, rng),
            }
        };
        let url = format!("https://www.{domain}/story/{}", rng.gen_range(0..100_000));
        let _ = write!(text, " {url}");
        urls.push(url);
    }
    Composed { words, text, tags, urls }
}

fn timestamp(window: &StudyWindow, rng: &mut ChaCha8Rng) -> String {
    let days = (window.end - window.start).num_days() + 1;
    let secs = rng.gen_range(0..days * 86_400);
    let t = window.start.and_time(NaiveTime::MIN) + Duration::seconds(secs);
    t.format("%Y-%m-%dT%H:%M:%SZ").to_string()
}

fn sample_group(mixture: &[f64], rng: &mut ChaCha8Rng) -> IdeologyGroup {
    let u: f64 = rng.gen();
    let mut acc = 0.0;
    for (g, &w) in IdeologyGroup::ALL.iter().zip(mixture) {
        acc += w;
        if u < acc {
            return *g;
        }
    }
    // rounding: fall back to the last group with positive weight
    *IdeologyGroup::ALL
        .iter()
        .zip(mixture)
        .rev()
        .find(|(_, &w)| w > 0.0)
        .map(|(g, _)| g)
        .expect("validated mixture has mass")
}

fn world(spec: &SynthSpec, pools: &Pools, users: &[PlantedUser], rng: &mut ChaCha8Rng) -> SynthWorld {
    let rows = |pool: &[String], label: &str| -> Vec<(String, String)> {
        pool.iter().map(|d| (d.clone(), label.to_owned())).collect()
    };
    let mut catalogs = BTreeMap::new();
    let mut sci = rows(&pools.sci_domains[1], "pro_science");
    sci.extend(rows(&pools.sci_domains[0], "anti_science"));
    catalogs.insert(Dimension::Science, sci);
    let mut pol = rows(&pools.pol_domains[0], "liberal");
    pol.extend(rows(&pools.pol_domains[1], "conservative"));
    catalogs.insert(Dimension::Political, pol);
    catalogs.insert(Dimension::Moderacy, rows(&pools.moderate_domains, "moderate"));

    let mut seeds = BTreeMap::new();
    for dim in Dimension::ALL {
        let mut rows = Vec::new();
        for pole in [Pole::Pos, Pole::Neg] {
            let mut members: Vec<&PlantedUser> = users
                .iter()
                .filter(|u| u.pure)
                .filter(|u| match dim {
                    Dimension::Science => u.group.science() == pole,
                    Dimension::Moderacy => u.group.moderacy() == pole,
                    Dimension::Political => u.group.political() == Some(pole),
                })
                .collect();
            members.shuffle(rng);
            let take = ((members.len() as f64 * spec.seed_fraction).ceil() as usize).min(members.len());
            for u in members.into_iter().take(take) {
                rows.push((u.id.clone(), dim.label(pole).to_string()));
            }
        }
        rows.sort();
        seeds.insert(dim, rows);
    }

    let dim = spec.embed_dim;
    let mut vectors = Vec::new();
    let mut push = |word: &String, axes: &[(usize, f64)], rng: &mut ChaCha8Rng| {
        let mut v: Vec<f64> = (0..dim).map(|_| rng.gen_range(-0.3..0.3)).collect();
        for &(a, s) in axes {
            v[a] += s;
        }
        vectors.push((word.clone(), v));
    };
    for w in &pools.sci_words[1] {
        push(w, &[(0, 1.0)], rng);
    }
    for w in &pools.sci_words[0] {
        push(w, &[(0, -1.0)], rng);
    }
    for w in &pools.pol_words[0] {
        push(w, &[(1, -1.0), (2, -1.0)], rng);
    }
    for w in &pools.pol_words[1] {
        push(w, &[(1, 1.0), (2, -1.0)], rng);
    }
    for w in &pools.moderate_words {
        push(w, &[(2, 1.0)], rng);
    }
    for w in &pools.common_words {
        push(w, &[], rng);
    }
    SynthWorld {
        catalogs,
        seeds,
        vectors,
        embed_dim: dim,
    }
}

/// Generates a corpus, its ground truth and the supporting inputs.
/// Deterministic for a fixed spec.
pub fn generate(spec: &SynthSpec) -> Result<SynthOutput> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.rng_seed);
    let pools = Pools::new(spec);
    let width = spec.n_users.to_string().len();
    let users: Vec<PlantedUser> = (0..spec.n_users)
        .map(|i| PlantedUser {
            id: format!("user{i:0width$}"),
            group: sample_group(&spec.mixture, &mut rng),
            pure: rng.gen_bool(spec.pure_fraction),
            state: spec.states.choose(&mut rng).expect("validated").clone(),
        })
        .collect();

    let mut tweets = Vec::new();
    let mut next_id = 0u64;
    let mut new_id = || {
        next_id += 1;
        format!("{next_id}")
    };
    for u in &users {
        let lo = (spec.tweets_per_user / 2).max(1);
        let hi = spec.tweets_per_user + spec.tweets_per_user / 2;
        let n = rng.gen_range(lo..=hi.max(lo));
        for _ in 0..n {
            let Composed { text, tags: hashtags, urls, .. } = compose_tweet(u, spec, &pools, &mut rng);
            tweets.push(RawTweet {
                id: new_id(),
                user_id: u.id.clone(),
                created_at: timestamp(&spec.window, &mut rng),
                text,
                urls,
                hashtags,
                retweeted_user_id: None,
                user_location: Some(format!("Somewhere, {}", u.state)),
            });
        }
    }

    // planted-partition retweet ties, blocks = ideology groups
    for (i, src) in users.iter().enumerate() {
        for (j, dst) in users.iter().enumerate() {
            if i == j {
                continue;
            }
            let p = if src.group == dst.group { spec.p_in } else { spec.p_out };
            if !rng.gen_bool(p) {
                continue;
            }
            for _ in 0..rng.gen_range(1..=3) {
                // quote only the words so links and tags stay with their author
                let body = compose_tweet(dst, spec, &pools, &mut rng).words;
                tweets.push(RawTweet {
                    id: new_id(),
                    user_id: src.id.clone(),
                    created_at: timestamp(&spec.window, &mut rng),
                    text: format!("RT @{}: {body}", dst.id),
                    urls: Vec::new(),
                    hashtags: Vec::new(),
                    retweeted_user_id: Some(dst.id.clone()),
                    user_location: Some(format!("Somewhere, {}", src.state)),
                });
            }
        }
    }

    let world = world(spec, &pools, &users, &mut rng);
    let truth = users
        .into_iter()
        .map(|u| TruthRow {
            user_id: u.id,
            group: u.group,
            pure: u.pure,
            state: u.state,
        })
        .collect();
    Ok(SynthOutput { tweets, truth, world })
}

fn write_file(path: &Path, contents: &[u8]) -> Result<()> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    std::fs::write(path, contents).map_err(|e| Error::io(path, e))
}

impl SynthOutput {
    pub fn corpus_jsonl(&self) -> Result<Vec<u8>> {
        let mut out = Vec::new();
        for t in &self.tweets {
            serde_json::to_writer(&mut out, t)?;
            out.push(b'\n');
        }
        Ok(out)
    }

    pub fn truth_csv(&self) -> String {
        let mut s = String::from("user_id,group,science,political,moderacy,pure,state\n");
        for r in &self.truth {
            let political = r
                .group
                .political()
                .map(|p| Dimension::Political.label(p).to_string())
                .unwrap_or_default();
            let _ = writeln!(
                s,
                "{},{},{},{},{},{},{}",
                r.user_id,
                r.group,
                Dimension::Science.label(r.group.science()),
                political,
                Dimension::Moderacy.label(r.group.moderacy()),
                r.pure,
                r.state
            );
        }
        s
    }

    pub fn write_corpus(&self, path: &Path) -> Result<()> {
        write_file(path, &self.corpus_jsonl()?)
    }

    pub fn write_truth(&self, path: &Path) -> Result<()> {
        write_file(path, self.truth_csv().as_bytes())
    }

    /// Writes `catalogs/<dim>.csv`, `seeds/<dim>.tsv` and `vectors.txt`.
    pub fn write_world(&self, dir: &Path) -> Result<()> {
        for (dim, rows) in &self.world.catalogs {
            let mut s = String::from("domain,label\n");
            for (d, l) in rows {
                let _ = writeln!(s, "{d},{l}");
            }
            write_file(&dir.join("catalogs").join(format!("{dim}.csv")), s.as_bytes())?;
        }
        for (dim, rows) in &self.world.seeds {
            let mut s = String::new();
            for (u, l) in rows {
                let _ = writeln!(s, "{u}\t{l}");
            }
            write_file(&dir.join("seeds").join(format!("{dim}.tsv")), s.as_bytes())?;
        }
        let mut v = Vec::new();
        writeln!(v, "{} {}", self.world.vectors.len(), self.world.embed_dim).expect("in-memory write");
        for (word, vec) in &self.world.vectors {
            write!(v, "{word}").expect("in-memory write");
            for x in vec {
                write!(v, " {x:.6}").expect("in-memory write");
            }
            v.push(b'\n');
        }
        write_file(&dir.join("vectors.txt"), &v)
    }
}

/// Stochastic block model: `sizes[b]` nodes in block `b`, each ordered
/// pair linked with `p_in` inside a block and `p_out` across. Node `i` is
/// named `n{i}`; returns the graph and each node's block by name.
pub fn planted_partition(
    sizes: &[usize],
    p_in: f64,
    p_out: f64,
    rng_seed: u64,
) -> Result<(RetweetGraph, BTreeMap<String, usize>)> {
    if !(0.0..=1.0).contains(&p_in) || !(0.0..=1.0).contains(&p_out) {
        return Err(Error::invalid("edge probabilities must lie in [0, 1]"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    let block: Vec<usize> = sizes
        .iter()
        .enumerate()
        .flat_map(|(b, &n)| std::iter::repeat_n(b, n))
        .collect();
    let names: Vec<String> = (0..block.len()).map(|i| format!("n{i}")).collect();
    let mut pairs = Vec::new();
    for i in 0..block.len() {
        for j in 0..block.len() {
            if i != j && rng.gen_bool(if block[i] == block[j] { p_in } else { p_out }) {
                pairs.push((names[i].as_str(), names[j].as_str()));
            }
        }
    }
    let graph = RetweetGraph::from_retweets(pairs.iter().copied());
    let labels = names.iter().cloned().zip(block).collect();
    Ok((graph, labels))
}

/// Role of a node in [`mixed_membership_graph`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Affiliation {
    Left,
    Right,
    Moderate,
}

/// Two partisan blocks plus moderates whose ties are split evenly between
/// them: each moderate links to any partisan node with `p_mod` and to
/// other moderates with `p_out`.
pub fn mixed_membership_graph(
    n_left: usize,
    n_right: usize,
    n_moderate: usize,
    p_in: f64,
    p_out: f64,
    p_mod: f64,
    rng_seed: u64,
) -> (RetweetGraph, BTreeMap<String, Affiliation>) {
    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    let roles: Vec<Affiliation> = std::iter::repeat_n(Affiliation::Left, n_left)
        .chain(std::iter::repeat_n(Affiliation::Right, n_right))
        .chain(std::iter::repeat_n(Affiliation::Moderate, n_moderate))
        .collect();
    let names: Vec<String> = (0..roles.len()).map(|i| format!("m{i}")).collect();
    let mut pairs = Vec::new();
    for i in 0..roles.len() {
        for j in 0..roles.len() {
            if i == j {
                continue;
            }
            use Affiliation::*;
            let p = match (roles[i], roles[j]) {
                (Moderate, Moderate) => p_out,
                (Moderate, _) | (_, Moderate) => p_mod,
                (a, b) if a == b => p_in,
                _ => p_out,
            };
            if rng.gen_bool(p) {
                pairs.push((names[i].as_str(), names[j].as_str()));
            }
        }
    }
    let graph = RetweetGraph::from_retweets(pairs.iter().copied());
    (graph, names.iter().cloned().zip(roles).collect())
}

/// First day of the default study window, for building hand-made records.
pub fn window_start() -> NaiveDate {
    StudyWindow::default().start
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::catalog::{score_domains, CatalogSet};
    use crate::corpus::{CorpusBundle, Gazetteer, SchemaConfig};

    fn small() -> SynthSpec {
        SynthSpec {
            n_users: 120,
            tweets_per_user: 10,
            ..SynthSpec::default()
        }
    }

    #[test]
    fn deterministic_bytes() {
        let a = generate(&small()).unwrap();
        let b = generate(&small()).unwrap();
        assert_eq!(a.corpus_jsonl().unwrap(), b.corpus_jsonl().unwrap());
        assert_eq!(a.truth_csv(), b.truth_csv());
        let c = generate(&SynthSpec { rng_seed: 1, ..small() }).unwrap();
        assert_ne!(a.corpus_jsonl().unwrap(), c.corpus_jsonl().unwrap());
    }

    #[test]
    fn single_group_mixture() {
        let mut mixture = vec![0.0; 6];
        mixture[4] = 1.0;
        let out = generate(&SynthSpec { mixture, ..small() }).unwrap();
        assert!(out.truth.iter().all(|t| t.group == IdeologyGroup::AntiSciModerate));
    }

    #[test]
    fn degenerate_mixtures_rejected() {
        assert!(generate(&SynthSpec { mixture: vec![0.0; 6], ..small() }).is_err());
        assert!(generate(&SynthSpec { mixture: vec![0.5, 0.5], ..small() }).is_err());
        assert!(generate(&SynthSpec { mixture: vec![-1.0, 2.0, 0.0, 0.0, 0.0, 0.0], ..small() }).is_err());
    }

    #[test]
    fn pure_users_score_on_their_planted_poles() {
        let out = generate(&small()).unwrap();
        let dir = tempfile::tempdir().unwrap();
        out.write_world(dir.path()).unwrap();
        let catalogs = CatalogSet::load_dir(&dir.path().join("catalogs")).unwrap();
        let jsonl = out.corpus_jsonl().unwrap();
        let bundle = CorpusBundle::ingest(
            &jsonl[..],
            &SchemaConfig::default(),
            &Gazetteer::default(),
            &Default::default(),
        )
        .unwrap();
        assert_eq!(bundle.stats.malformed, 0);
        let users = bundle.user_map();
        let mut checked = 0;
        for t in out.truth.iter().filter(|t| t.pure) {
            let agg = users[t.user_id.as_str()];
            assert_eq!(agg.state.as_deref(), Some(t.state.as_str()));
            let sci = score_domains::<f64>(&t.user_id, &agg.shared_domains, &catalogs.science);
            if let Some(d) = sci.delta {
                assert_eq!(d.signum(), t.group.science().value() as f64);
                checked += 1;
            }
            let md = score_domains::<f64>(&t.user_id, &agg.shared_domains, &catalogs.moderacy);
            if let Some(d) = md.delta {
                assert_eq!(d.signum(), t.group.moderacy().value() as f64);
            }
            if let Some(p) = t.group.political() {
                let pol = score_domains::<f64>(&t.user_id, &agg.shared_domains, &catalogs.political);
                if let Some(d) = pol.delta {
                    assert_eq!(d.signum(), p.value() as f64);
                }
            }
        }
        assert!(checked > 50);
    }

    #[test]
    fn planted_partition_shape() {
        let (g, labels) = planted_partition(&[30, 30], 0.3, 0.0, 4).unwrap();
        assert!(g.node_count() <= 60);
        for (s, d, _) in g.edges() {
            assert_eq!(labels[g.user(s)], labels[g.user(d)]);
        }
    }
}
